#pragma once

#include <functional>

#include <Eigen/Dense>

namespace srb {

struct NelderMeadOptions {
  int max_iter = 400;    // iterations, not evaluations
  double f_tol = 1e-10;  // stop when the simplex value spread falls under f_tol*(1+|best|)
  double x_tol = 0;      // optional: stop when the simplex diameter falls under x_tol
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0;
  int evaluations = 0;
  bool converged = false;
};

// Downhill simplex minimizer with the classic reflect(1) / expand(2) /
// contract(1/2) / shrink(1/2) coefficients. Fully deterministic in the inputs.
NelderMeadResult nelder_mead_min(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                                 const NelderMeadOptions& opt = {});

}  // namespace srb
