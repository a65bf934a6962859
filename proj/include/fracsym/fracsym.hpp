#pragma once

#include "fracsym/error.hpp"
#include "fracsym/grid_function.hpp"
#include "fracsym/nonlocal_op.hpp"
#include "fracsym/rearrange.hpp"
#include "fracsym/specialfn.hpp"
#include "fracsym/symmetrize.hpp"
