#include "srb/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "srb/errors.hpp"

namespace srb {

NelderMeadResult nelder_mead_min(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                                 const NelderMeadOptions& opt) {
  const auto n = start.size();
  if (n == 0) throw ConfigError("simplex minimizer needs at least one dimension");
  if (step.size() != n) throw ConfigError("simplex step size mismatch");

  NelderMeadResult res;
  std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(n) + 1, start);
  std::vector<double> fx(static_cast<std::size_t>(n) + 1);
  auto eval = [&](const Eigen::VectorXd& p) {
    ++res.evaluations;
    return f(p);
  };
  for (Eigen::Index i = 0; i < n; ++i) x[static_cast<std::size_t>(i) + 1](i) += step(i);
  for (std::size_t i = 0; i <= static_cast<std::size_t>(n); ++i) fx[i] = eval(x[i]);

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  auto sort_order = [&] {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    sort_order();
    const std::size_t best = order.front(), worst = order.back();
    const std::size_t second_worst = order[order.size() - 2];

    if (std::fabs(fx[worst] - fx[best]) <= opt.f_tol * (1.0 + std::fabs(fx[best]))) {
      res.converged = true;
      break;
    }
    if (opt.x_tol > 0) {
      double diam = 0;
      for (std::size_t i = 1; i < x.size(); ++i)
        diam = std::max(diam, (x[order[i]] - x[best]).cwiseAbs().maxCoeff());
      if (diam <= opt.x_tol) {
        res.converged = true;
        break;
      }
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) centroid += x[order[i]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - x[worst]);
    const double fr = eval(reflected);
    if (fr < fx[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - x[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        x[worst] = expanded;
        fx[worst] = fe;
      } else {
        x[worst] = reflected;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[second_worst]) {
      x[worst] = reflected;
      fx[worst] = fr;
      continue;
    }
    // Contract toward the better of worst/reflected.
    const bool outside = fr < fx[worst];
    const Eigen::VectorXd contracted =
        outside ? centroid + 0.5 * (reflected - centroid) : centroid + 0.5 * (x[worst] - centroid);
    const double fc = eval(contracted);
    if (fc < std::min(fr, fx[worst])) {
      x[worst] = contracted;
      fx[worst] = fc;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 1; i < x.size(); ++i) {
      const std::size_t idx = order[i];
      x[idx] = x[best] + 0.5 * (x[idx] - x[best]);
      fx[idx] = eval(x[idx]);
    }
  }

  sort_order();
  res.x = x[order.front()];
  res.value = fx[order.front()];
  return res;
}

}  // namespace srb
