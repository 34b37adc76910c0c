#include "srb/qfi.hpp"

#include <cmath>
#include <complex>

#include "srb/errors.hpp"

namespace srb {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

double min_eigenvalue(const Eigen::Matrix3d& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(0.5 * (m + m.transpose()));
  return eig.eigenvalues()(0);
}

double symmetry_defect(const Eigen::Matrix3d& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

void detect_zero_rows(FisherMatrix& f) {
  const double tol = 1e-13 * std::max(1.0, f.entries.cwiseAbs().maxCoeff());
  for (int i = 0; i < 3; ++i) {
    if (f.degenerate[static_cast<std::size_t>(i)] ||
        f.entries.row(i).cwiseAbs().maxCoeff() < tol) {
      f.degenerate[static_cast<std::size_t>(i)] = true;
      f.entries.row(i).setZero();
      f.entries.col(i).setZero();
    }
  }
}

namespace {

void check_consistency(const OverlapSet& ov, const SourceParams& params) {
  if (std::fabs(ov.s - params.s) > 1e-12 * std::max(1.0, std::fabs(params.s)))
    throw ConfigError("overlap set was evaluated at a different separation");
}

}  // namespace

FisherMatrix qfim_closed_form(const OverlapSet& ov, const PsfMoments& mom,
                              const SourceParams& params) {
  params.validate();
  check_consistency(ov, params);
  const double q = params.q, w = ov.w, m = ov.m, p2 = mom.p2;
  const double balance = params.balance_sq();

  FisherMatrix out;
  out.kind = FisherKind::Quantum;
  out.provenance = FisherProvenance::ClosedForm;
  Eigen::Matrix3d& e = out.entries;
  e(0, 0) = 4.0 * (p2 - balance * m * m);
  e(1, 1) = p2;
  e(0, 1) = e(1, 0) = 4.0 * (q - 0.5) * p2;
  e(0, 2) = e(2, 0) = 4.0 * w * m;
  e(2, 2) = balance > 0 ? 4.0 * (1.0 - w * w) / balance : 0.0;

  // Coincident sources or a single source carry no brightness information.
  if (params.s == 0 || q == 0 || q == 1) {
    out.degenerate[2] = true;
    e.row(2).setZero();
    e.col(2).setZero();
  }
  return out;
}

SpectralDecomposition rho_eigensystem(const OverlapSet& ov, double q) {
  if (!(q >= 0 && q <= 1)) throw ConfigError("relative brightness must be in [0,1]");
  const double w = ov.w;
  SpectralDecomposition dec;
  const double disc2 = std::max(0.25 - q * (1.0 - q) * (1.0 - w * w), 0.0);
  const double disc = std::sqrt(disc2);
  dec.lambda1 = 0.5 + disc;
  dec.lambda2 = std::max(0.5 - disc, 0.0);
  dec.pure_limit = dec.lambda2 < 1e-14;

  // Eigenvectors of the 2x2 pair-basis representation [[q, qw], [(1-q)w, 1-q]],
  // normalized in the Gram metric [[1, w], [w, 1]].
  auto eigvec = [&](double lambda) -> Eigen::Vector2d {
    Eigen::Vector2d v1(q * w, lambda - q);                    // from the first row
    Eigen::Vector2d v2(lambda - (1.0 - q), (1.0 - q) * w);    // from the second row
    Eigen::Vector2d v = v1.norm() >= v2.norm() ? v1 : v2;
    const double n2 = v(0) * v(0) + v(1) * v(1) + 2.0 * w * v(0) * v(1);
    if (n2 <= 1e-28) return Eigen::Vector2d::Zero();  // Gram-null direction (pure limit)
    v /= std::sqrt(n2);
    const double lead = std::fabs(v(0)) > 1e-12 ? v(0) : v(1);
    if (lead < 0) v = -v;
    return v;
  };
  dec.coeff1 = eigvec(dec.lambda1);
  if (dec.coeff1.isZero()) dec.coeff1 = Eigen::Vector2d(1, 0);
  dec.coeff2 = dec.pure_limit ? Eigen::Vector2d::Zero().eval() : eigvec(dec.lambda2);
  return dec;
}

SubspaceRep::SubspaceRep(const OverlapSet& ov, const PsfMoments& mom, const SourceParams& params)
    : ov_(ov), mom_(mom), params_(params) {
  params_.validate();
  check_consistency(ov, params);
  const double q = params.q, w = ov.w, m = ov.m, tau = ov.tau, p2 = mom.p2;
  const cd i(0, 1);

  if (params.s == 0) {
    // Pair basis collapses; use {Psi, P Psi}.
    gram_ = MatrixXcd::Zero(2, 2);
    gram_(0, 0) = 1;
    gram_(1, 1) = p2;
    rho_ = MatrixXcd::Zero(2, 2);
    rho_(0, 0) = 1;
    for (auto& d : drho_) d = MatrixXcd::Zero(2, 2);
    drho_[0](0, 1) = i;
    drho_[0](1, 0) = -i;
    drho_[1] = (q - 0.5) * drho_[0];
    // d/dq of q|Psi><Psi| + (1-q)|Psi><Psi| vanishes.
  } else {
    gram_ = MatrixXcd::Zero(4, 4);
    gram_(0, 0) = gram_(1, 1) = 1;
    gram_(0, 1) = gram_(1, 0) = w;
    gram_(2, 2) = gram_(3, 3) = p2;
    gram_(2, 3) = gram_(3, 2) = tau;
    gram_(0, 3) = i * m;
    gram_(3, 0) = -i * m;
    gram_(1, 2) = -i * m;
    gram_(2, 1) = i * m;

    rho_ = MatrixXcd::Zero(4, 4);
    rho_(0, 0) = q;
    rho_(1, 1) = 1.0 - q;

    for (auto& d : drho_) d = MatrixXcd::Zero(4, 4);
    // d_s0 rho = i [rho, P]
    drho_[0](0, 2) = i * q;
    drho_[0](2, 0) = -i * q;
    drho_[0](1, 3) = i * (1.0 - q);
    drho_[0](3, 1) = -i * (1.0 - q);
    // d_s rho: sources move apart at half rate each
    drho_[1](0, 2) = i * q * 0.5;
    drho_[1](2, 0) = -i * q * 0.5;
    drho_[1](1, 3) = -i * (1.0 - q) * 0.5;
    drho_[1](3, 1) = i * (1.0 - q) * 0.5;
    // d_q rho
    drho_[2](0, 0) = 1;
    drho_[2](1, 1) = -1;
  }

  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(gram_);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  if (!(ev(0) > 0)) throw NumericalError("subspace Gram matrix is not positive definite");
  gram_cond_ = ev(ev.size() - 1) / ev(0);
  frame_ = eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal();
}

const MatrixXcd& SubspaceRep::drho(int alpha) const {
  if (alpha < 0 || alpha > 2) throw ConfigError("parameter index must be 0, 1 or 2");
  return drho_[static_cast<std::size_t>(alpha)];
}

MatrixXcd SubspaceRep::product(const MatrixXcd& a, const MatrixXcd& b) const {
  return a * gram_ * b;
}

cd SubspaceRep::trace_op(const MatrixXcd& a) const { return (a * gram_).trace(); }

cd SubspaceRep::matrix_element(const VectorXcd& u, const MatrixXcd& a, const VectorXcd& v) const {
  return u.adjoint() * gram_ * a * gram_ * v;
}

FisherMatrix qfim_rank2(const SubspaceRep& rep, const SpectralDecomposition& dec) {
  if (dec.lambda2 <= 1e-12)
    throw DegenerateStateError("rank-2 form needs lambda2 > 1e-12 (use the pure-state path)");
  const double l1 = dec.lambda1, l2 = dec.lambda2;
  const int d = rep.dim();
  VectorXcd e1 = VectorXcd::Zero(d), e2 = VectorXcd::Zero(d);
  e1(0) = dec.coeff1(0);
  e1(1) = dec.coeff1(1);
  e2(0) = dec.coeff2(0);
  e2(1) = dec.coeff2(1);

  FisherMatrix out;
  out.kind = FisherKind::Quantum;
  out.provenance = FisherProvenance::Rank2;
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      cd acc = 0;
      for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        const MatrixXcd& da = rep.drho(x);
        const MatrixXcd& db = rep.drho(y);
        const cd a11 = rep.matrix_element(e1, da, e1);
        const cd a22 = rep.matrix_element(e2, da, e2);
        const cd a12 = rep.matrix_element(e1, da, e2);
        const cd b11 = rep.matrix_element(e1, db, e1);
        const cd b22 = rep.matrix_element(e2, db, e2);
        const cd b21 = rep.matrix_element(e2, db, e1);
        const MatrixXcd ab = rep.product(da, db);
        acc += -3.0 / l1 * a11 * b11 - 3.0 / l2 * a22 * b22 +
               4.0 * (1.0 - 1.0 / l1 - 1.0 / l2) * a12 * b21 +
               4.0 / l1 * rep.matrix_element(e1, ab, e1) +
               4.0 / l2 * rep.matrix_element(e2, ab, e2);
      }
      acc *= 0.5;
      if (std::fabs(acc.imag()) > 1e-6)
        throw NumericalError("rank-2 QFIM entry has a non-negligible imaginary part");
      out.entries(a, b) = out.entries(b, a) = acc.real();
    }
  }
  return out;
}

namespace {

// Solve (L G rho + rho G L)/2 = D for the coefficient matrix L by spectral
// division in the G-orthonormal frame; kernel-pair blocks are set to zero.
MatrixXcd spectral_sylvester(const MatrixXcd& t, const MatrixXcd& g, const Eigen::VectorXd& mu,
                             const MatrixXcd& y, const MatrixXcd& dcoef) {
  MatrixXcd dh = t.adjoint() * g * dcoef * g * t;
  dh = 0.5 * (dh + dh.adjoint()).eval();
  const MatrixXcd dbar = y.adjoint() * dh * y;
  const int d = static_cast<int>(mu.size());
  MatrixXcd lbar = MatrixXcd::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double den = mu(i) + mu(j);
      if (den > 1e-12) lbar(i, j) = 2.0 * dbar(i, j) / den;
    }
  return t * (y * lbar * y.adjoint()) * t.adjoint();
}

double defining_residual(const MatrixXcd& l, const MatrixXcd& g, const MatrixXcd& rho,
                         const MatrixXcd& dcoef) {
  const MatrixXcd r = dcoef - 0.5 * (l * g * rho + rho * g * l);
  return r.cwiseAbs().maxCoeff();
}

}  // namespace

SldOperator sld_subspace(const SubspaceRep& rep, const SpectralDecomposition& dec, int parameter) {
  if (parameter < 0 || parameter > 2) throw ConfigError("parameter index must be 0, 1 or 2");
  const MatrixXcd& g = rep.gram();
  const MatrixXcd& t = rep.frame();
  const MatrixXcd& rho = rep.rho();
  const MatrixXcd& dcoef = rep.drho(parameter);

  MatrixXcd rho_h = t.adjoint() * g * rho * g * t;
  rho_h = 0.5 * (rho_h + rho_h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(rho_h);
  const Eigen::VectorXd& mu = eig.eigenvalues();  // ascending
  const MatrixXcd& y = eig.eigenvectors();

  // Consistency with the analytic spectrum.
  const int d = rep.dim();
  if (std::fabs(mu(d - 1) - dec.lambda1) > 1e-8 ||
      (d == 4 && std::fabs(mu(d - 2) - dec.lambda2) > 1e-8))
    throw NumericalError("spectral decomposition inconsistent with the subspace state");

  // Certified a posteriori: refine until the defining-equation residual
  // stalls, then gate on the achieved accuracy. Gram and eigenvalue-ratio
  // conditioning at sub-width separations inflate the first solve but wash
  // out under refinement.
  MatrixXcd l = spectral_sylvester(t, g, mu, y, dcoef);
  double res = defining_residual(l, g, rho, dcoef);
  for (int round = 0; round < 8 && res > 1e-13; ++round) {
    const MatrixXcd r = dcoef - 0.5 * (l * g * rho + rho * g * l);
    const MatrixXcd refined = l + spectral_sylvester(t, g, mu, y, r);
    const double refined_res = defining_residual(refined, g, rho, dcoef);
    if (refined_res >= res) break;
    l = refined;
    res = refined_res;
  }
  if (res > 1e-8)
    throw NumericalError("SLD defining-equation residual " + std::to_string(res) +
                         " after refinement");

  SldOperator out;
  out.parameter = parameter;
  out.coeff = l;
  out.residual = res;

  MatrixXcd lh = t.adjoint() * g * l * g * t;
  lh = 0.5 * (lh + lh.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> leig(lh);
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  for (int k = 0; k < d; ++k) {
    const int src = d - 1 - k;  // descending order
    out.eigenvalues(k) = leig.eigenvalues()(src);
    VectorXcd col = t * leig.eigenvectors().col(src);
    // Deterministic phase: first significant coordinate positive real.
    const double top = col.cwiseAbs().maxCoeff();
    for (int idx = 0; idx < d; ++idx) {
      if (std::abs(col(idx)) > 1e-10 * std::max(top, 1.0)) {
        col *= std::conj(col(idx)) / std::abs(col(idx));
        break;
      }
    }
    out.eigenvectors.col(k) = col;
  }
  return out;
}

CompatibilityReport compatibility_check(const SubspaceRep& rep, const SpectralDecomposition& dec) {
  std::array<SldOperator, 3> sld = {sld_subspace(rep, dec, 0), sld_subspace(rep, dec, 1),
                                    sld_subspace(rep, dec, 2)};
  CompatibilityReport rep_out;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;  // commutator with itself: exactly zero
      const MatrixXcd comm =
          rep.product(sld[a].coeff, sld[b].coeff) - rep.product(sld[b].coeff, sld[a].coeff);
      const cd tval = rep.trace_op(rep.product(rep.rho(), comm));
      rep_out.residual(a, b) = tval.imag();
      rep_out.max_abs = std::max(rep_out.max_abs, std::abs(tval));
    }
  }
  rep_out.saturable = rep_out.max_abs < 1e-9;
  return rep_out;
}

}  // namespace srb
