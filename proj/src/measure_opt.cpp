#include "srb/measure_opt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "srb/cfi.hpp"
#include "srb/errors.hpp"
#include "srb/nelder_mead.hpp"
#include "srb/qfi.hpp"
#include "srb/rng.hpp"

namespace srb {

Measurement orthonormal_mode_basis(const PsfModel& psf, int n, double center) {
  if (n < 1) throw ConfigError("mode basis needs at least one mode");
  if (psf.kind() != PsfKind::AnalyticGaussian && n > 3)
    throw ConfigError("tabulated kernels support at most three derivative modes");

  // Gram of {Psi, Psi', ..., Psi^(n-1)}: <Psi^(j), Psi^(k)> = (-1)^k w^(j+k)(0),
  // zero for odd j+k on an even momentum density.
  Eigen::MatrixXd raw(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      raw(j, k) = (j + k) % 2 == 1
                      ? 0.0
                      : (k % 2 == 0 ? 1.0 : -1.0) * psf.overlap_derivative(j + k, 0.0);

  Eigen::VectorXd scale(n);
  for (int j = 0; j < n; ++j) {
    if (!(raw(j, j) > 0)) throw RankLossError("derivative family is not positive definite", j);
    scale(j) = std::sqrt(raw(j, j));
  }
  Eigen::MatrixXd corr = raw;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) corr(j, k) /= scale(j) * scale(k);

  // Unpivoted Cholesky with a running determinant gate.
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  double det_run = 1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = corr(i, j);
      for (int k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      if (i == j) {
        det_run *= acc;
        if (!(acc > 0) || det_run < 1e-20)
          throw RankLossError("derivative family lost rank during orthonormalization", i);
        l(i, i) = std::sqrt(acc);
      } else {
        l(i, j) = acc / l(j, j);
      }
    }
  }

  // Mode i = sum_j B(i,j)/scale(j) Psi^(j) with B = L^-1 (forward substitution).
  Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    coeff(i, i) = 1.0 / l(i, i);
    for (int j = 0; j < i; ++j) {
      double acc = 0;
      for (int k = j; k < i; ++k) acc += l(i, k) * coeff(k, j);
      coeff(i, j) = -acc / l(i, i);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) coeff(i, j) /= scale(j);

  Measurement meas;
  meas.has_bucket = true;
  for (int i = 0; i < n; ++i) {
    const double lead_sign = (i % 2 == 0 ? 1.0 : -1.0) * coeff(i, i);
    DerivComboMode combo;
    for (int j = 0; j <= i; ++j) {
      double c = coeff(i, j);
      if (lead_sign < 0) c = -c;
      if (c != 0) combo.terms.push_back({j, center, c});
    }
    meas.modes.push_back(Mode{combo, "m" + std::to_string(i)});
  }
  return meas;
}

namespace {

// Apply the Givens chain (pairs in lexicographic order) to the columns of m.
void apply_rotations(const Eigen::VectorXd& angles, Eigen::MatrixXd& m) {
  int k = 0;
  const auto n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j, ++k) {
      const double c = std::cos(angles(k)), s = std::sin(angles(k));
      const Eigen::RowVectorXd ri = m.row(i);
      m.row(i) = c * ri - s * m.row(j);
      m.row(j) = s * ri + c * m.row(j);
    }
}

double objective_value(const PrecisionTriple& classical, const PrecisionTriple& quantum,
                       DesignObjective objective) {
  switch (objective) {
    case DesignObjective::SeparationPrecision:
      return classical.s;
    case DesignObjective::BrightnessPrecision:
      return classical.q;
    case DesignObjective::MinRatioVsQuantum: {
      double worst = 1;
      bool any = false;
      for (int i = 0; i < 3; ++i) {
        if (quantum.component(i) <= 0) continue;
        worst = any ? std::min(worst, classical.component(i) / quantum.component(i))
                    : classical.component(i) / quantum.component(i);
        any = true;
      }
      return any ? worst : 0;
    }
  }
  return 0;
}

}  // namespace

OptimizedMeasurement optimize_measurement(const PsfModel& psf, const SourceParams& params,
                                          const DesignSpec& spec) {
  params.validate();
  if (spec.modes < 1) throw ConfigError("measurement design needs at least one mode");
  if (spec.restarts < 1) throw ConfigError("measurement design needs at least one restart");

  const Measurement base = orthonormal_mode_basis(psf, spec.modes, params.s0);
  const ModeSourceOverlap base_ov = mode_source_overlap(base, psf, params);
  const PsfMoments mom = moments(psf);
  const OverlapSet ov = overlaps(psf, params.s);
  const FisherMatrix qfim = qfim_closed_form(ov, mom, params);
  const PrecisionTriple quantum = quantum_precisions_closed(ov, mom, params);

  const int n = spec.modes;
  const int n_angles = n * (n - 1) / 2;
  Eigen::MatrixXd stacked(n, 4);
  stacked.col(0) = base_ov.c_plus;
  stacked.col(1) = base_ov.c_minus;
  stacked.col(2) = base_ov.g_plus;
  stacked.col(3) = base_ov.g_minus;

  auto evaluate = [&](const Eigen::VectorXd& angles) {
    Eigen::MatrixXd rot = stacked;
    apply_rotations(angles, rot);
    ModeSourceOverlap mo;
    mo.c_plus = rot.col(0);
    mo.c_minus = rot.col(1);
    mo.g_plus = rot.col(2);
    mo.g_minus = rot.col(3);
    const FisherMatrix cfi = overlap_cfi(mo, params.q, true);
    if (min_eigenvalue(qfim.entries - cfi.entries) < -1e-9)
      throw NumericalError("candidate measurement information exceeds the quantum bound");
    return objective_value(precisions(cfi), quantum, spec.objective);
  };

  OptimizedMeasurement out;
  out.objective = spec.objective;
  out.quantum_precisions = quantum;

  Eigen::VectorXd best_angles = Eigen::VectorXd::Zero(n_angles);
  double best_value = -1;
  if (n_angles == 0) {
    // A single mode leaves nothing to rotate; score the basis projector as-is.
    best_value = evaluate(best_angles);
    out.best_restart = 0;
    out.converged = true;
    out.trace.push_back({0, best_value, best_value, true});
  } else {
    NelderMeadOptions nm_opt;
    nm_opt.max_iter = 600;
    nm_opt.f_tol = 1e-12;
    for (int r = 0; r < spec.restarts; ++r) {
      Eigen::VectorXd start = Eigen::VectorXd::Zero(n_angles);
      if (r > 0) {
        auto engine = make_engine(spec.seed, static_cast<std::uint64_t>(r));
        std::uniform_real_distribution<double> uni(-M_PI, M_PI);
        for (int k = 0; k < n_angles; ++k) start(k) = uni(engine);
      }
      const Eigen::VectorXd step = Eigen::VectorXd::Constant(n_angles, 0.3);
      const NelderMeadResult nm = nelder_mead_min(
          [&](const Eigen::VectorXd& a) { return -evaluate(a); }, start, step, nm_opt);
      const double value = -nm.value;
      if (value > best_value) {
        best_value = value;
        best_angles = nm.x;
        out.best_restart = r;
      }
      out.converged = out.converged || nm.converged;
      out.trace.push_back({r, value, best_value, nm.converged});
    }
  }

  // Materialize the rotated modes: combine the base derivative coefficients.
  Eigen::MatrixXd u = Eigen::MatrixXd::Identity(n, n);
  apply_rotations(best_angles, u);
  Eigen::MatrixXd base_coeff = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (const DerivTerm& t : std::get<DerivComboMode>(base.modes[static_cast<std::size_t>(i)].shape).terms)
      base_coeff(i, t.order) = t.coeff;
  const Eigen::MatrixXd final_coeff = u * base_coeff;

  out.measurement.has_bucket = true;
  for (int i = 0; i < n; ++i) {
    DerivComboMode combo;
    for (int j = 0; j < n; ++j)
      if (final_coeff(i, j) != 0) combo.terms.push_back({j, params.s0, final_coeff(i, j)});
    out.measurement.modes.push_back(Mode{combo, "opt" + std::to_string(i)});
  }
  out.measurement.validate(psf);

  // Independent final evaluation through the full measurement pipeline.
  out.achieved_cfi = measurement_cfi(out.measurement, psf, params);
  out.achieved_precisions = precisions(out.achieved_cfi);
  out.achieved = objective_value(out.achieved_precisions, quantum, spec.objective);
  if (std::fabs(out.achieved - best_value) > 1e-8 * std::max(1.0, std::fabs(best_value)))
    throw NumericalError("rotated-overlap objective disagrees with the measurement pipeline");
  return out;
}

}  // namespace srb
