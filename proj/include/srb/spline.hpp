#pragma once

#include <cstddef>
#include <vector>

namespace srb {

// Natural cubic spline on a strictly increasing (possibly non-uniform) grid.
// Evaluation outside the grid continues the end cubics; callers that want
// compact support clamp to [x_front, x_back] themselves.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  double x_front() const { return x_.front(); }
  double x_back() const { return x_.back(); }
  std::size_t size() const { return x_.size(); }
  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }

 private:
  std::size_t segment(double x) const;
  std::vector<double> x_, y_;
  std::vector<double> b_, c_, d_;  // piece i: y_i + b t + c t^2 + d t^3, t = x - x_i
};

}  // namespace srb
