#include "fracsym/cli_harness.hpp"

int main(int argc, char** argv) { return fracsym::cli::main_entry(argc, argv); }
