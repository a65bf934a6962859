#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fracsym/error.hpp"

namespace fracsym {

/// Cell averages of a function on a uniform grid of [left, right], extended
/// by zero outside the interval.
class GridFunction {
public:
  GridFunction() = default;

  GridFunction(double left, double right, std::vector<double> values)
      : left_(left), right_(right), values_(std::move(values)) {
    if (!(left_ < right_)) throw DomainError("grid requires domain_left < domain_right");
    if (values_.empty()) throw DomainError("grid requires at least one cell");
    for (double v : values_)
      if (!std::isfinite(v)) throw DomainError("grid values must be finite");
  }

  GridFunction(double left, double right, std::size_t n_cells, double fill = 0.0)
      : GridFunction(left, right, std::vector<double>(n_cells, fill)) {}

  /// Samples fn at the cell centers.
  static GridFunction sample(double left, double right, std::size_t n_cells,
                             const std::function<double(double)>& fn) {
    GridFunction g(left, right, n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) g.values_[i] = fn(g.center(i));
    return g;
  }

  /// Cell averages of fn, by 4-point Gauss-Legendre quadrature on each cell.
  static GridFunction cell_averages(double left, double right, std::size_t n_cells,
                                    const std::function<double(double)>& fn) {
    static constexpr double nodes[4] = {-0.8611363115940526, -0.3399810435848563,
                                        0.3399810435848563, 0.8611363115940526};
    static constexpr double weights[4] = {0.3478548451374538, 0.6521451548625461,
                                          0.6521451548625461, 0.3478548451374538};
    GridFunction g(left, right, n_cells);
    const double h = g.cell_width();
    for (std::size_t i = 0; i < n_cells; ++i) {
      double acc = 0.0;
      for (int j = 0; j < 4; ++j) acc += weights[j] * fn(g.center(i) + 0.5 * h * nodes[j]);
      g.values_[i] = 0.5 * acc;
    }
    return g;
  }

  double domain_left() const noexcept { return left_; }
  double domain_right() const noexcept { return right_; }
  double measure() const noexcept { return right_ - left_; }
  std::size_t n_cells() const noexcept { return values_.size(); }
  double cell_width() const noexcept { return measure() / static_cast<double>(values_.size()); }

  double cell_left(std::size_t i) const noexcept {
    return left_ + static_cast<double>(i) * cell_width();
  }
  double cell_right(std::size_t i) const noexcept {
    return i + 1 == values_.size() ? right_ : cell_left(i + 1);
  }
  double center(std::size_t i) const noexcept {
    return left_ + (static_cast<double>(i) + 0.5) * cell_width();
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  /// Integral over the whole line.
  double integral() const noexcept {
    double acc = 0.0;
    for (double v : values_) acc += v;
    return acc * cell_width();
  }

  /// Integral of the piecewise-constant function over [a, b].
  double integral_over(double a, double b) const noexcept {
    a = std::max(a, left_);
    b = std::min(b, right_);
    if (!(a < b)) return 0.0;
    const double h = cell_width();
    const auto n = values_.size();
    auto first = static_cast<std::size_t>(std::clamp(std::floor((a - left_) / h), 0.0,
                                                     static_cast<double>(n - 1)));
    double acc = 0.0;
    for (std::size_t i = first; i < n; ++i) {
      if (cell_left(i) >= b) break;
      const double lo = std::max(a, cell_left(i));
      const double hi = std::min(b, cell_right(i));
      if (hi > lo) acc += values_[i] * (hi - lo);
    }
    return acc;
  }

  /// Value of the piecewise-constant function at x (zero outside the domain).
  double value_at(double x) const noexcept {
    if (x < left_ || x >= right_) return 0.0;
    const auto i = static_cast<std::size_t>((x - left_) / cell_width());
    return values_[std::min(i, values_.size() - 1)];
  }

  bool same_grid(const GridFunction& other, double rel_tol = 1e-12) const noexcept {
    const double scale = std::max({1.0, std::abs(left_), std::abs(right_)});
    return n_cells() == other.n_cells() && std::abs(left_ - other.left_) <= rel_tol * scale &&
           std::abs(right_ - other.right_) <= rel_tol * scale;
  }

  GridFunction& operator*=(double k) noexcept {
    for (double& v : values_) v *= k;
    return *this;
  }

  friend GridFunction operator*(double k, GridFunction g) { return g *= k; }

private:
  double left_ = 0.0;
  double right_ = 1.0;
  std::vector<double> values_{0.0};
};

inline void require_same_grid(const GridFunction& a, const GridFunction& b, const char* what) {
  if (!a.same_grid(b)) throw GridMismatchError(std::string(what) + ": grids differ");
}

// CSV with header "x,value", one row per cell center, 17 significant digits.

inline void write_csv(std::ostream& os, const GridFunction& f) {
  os << "x,value\n";
  char buf[64];
  for (std::size_t i = 0; i < f.n_cells(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", f.center(i), f[i]);
    os << buf;
  }
}

inline GridFunction read_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) throw ConfigError("grid CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,value") throw ConfigError("grid CSV: expected header 'x,value'");
  std::vector<double> xs;
  std::vector<double> vs;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("grid CSV line " + std::to_string(line_no) + ": expected two columns");
    try {
      std::size_t used = 0;
      const std::string xs_str = line.substr(0, comma);
      const std::string vs_str = line.substr(comma + 1);
      xs.push_back(std::stod(xs_str, &used));
      if (used != xs_str.size()) throw std::invalid_argument("x");
      vs.push_back(std::stod(vs_str, &used));
      if (used != vs_str.size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      throw ConfigError("grid CSV line " + std::to_string(line_no) + ": malformed number");
    }
  }
  if (xs.size() < 2) throw ConfigError("grid CSV: need at least two rows");
  const double h = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
  if (!(h > 0.0)) throw ConfigError("grid CSV: cell centers must increase");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double expected = xs.front() + static_cast<double>(i) * h;
    if (std::abs(xs[i] - expected) > 1e-9 * std::max(1.0, std::abs(expected)) + 1e-9 * h)
      throw ConfigError("grid CSV line " + std::to_string(i + 2) + ": cell centers not uniform");
  }
  return GridFunction(xs.front() - h / 2.0, xs.back() + h / 2.0, std::move(vs));
}

} // namespace fracsym
