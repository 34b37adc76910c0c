#include "srb/cfi.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "srb/errors.hpp"

namespace srb {

FisherMatrix overlap_cfi(const ModeSourceOverlap& ov, double q, bool has_bucket) {
  FisherMatrix out;
  out.kind = FisherKind::Classical;
  out.provenance = FisherProvenance::ClosedForm;
  Eigen::Vector3d grad_sum = Eigen::Vector3d::Zero();
  double prob_sum = 0;
  auto accumulate = [&](double p, const Eigen::Vector3d& g) {
    if (p > 1e-14) out.entries += g * g.transpose() / p;
  };

  for (Eigen::Index j = 0; j < ov.c_plus.size(); ++j) {
    const double cp = ov.c_plus(j), cm = ov.c_minus(j);
    const double gp = ov.g_plus(j), gm = ov.g_minus(j);
    const double p = q * cp * cp + (1.0 - q) * cm * cm;
    Eigen::Vector3d g;
    g(0) = -2.0 * (q * cp * gp + (1.0 - q) * cm * gm);
    g(1) = -q * cp * gp + (1.0 - q) * cm * gm;
    g(2) = cp * cp - cm * cm;
    prob_sum += p;
    grad_sum += g;
    accumulate(p, g);
  }
  if (prob_sum > 1.0 + 1e-9) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", prob_sum);
    throw NumericalError(std::string("mode outcome probabilities sum to ") + buf);
  }
  if (has_bucket) accumulate(std::max(1.0 - prob_sum, 0.0), -grad_sum);
  detect_zero_rows(out);
  return out;
}

FisherMatrix measurement_cfi(const Measurement& meas, const PsfModel& psf,
                             const SourceParams& params) {
  params.validate();
  return overlap_cfi(mode_source_overlap(meas, psf, params), params.q, meas.has_bucket);
}

Measurement sld_povm(const SldOperator& sld, const SubspaceRep& rep) {
  using cd = std::complex<double>;
  const int d = rep.dim();
  const SourceParams& pr = rep.params();
  const double pa = pr.plus_position(), pb = pr.minus_position();
  const cd mi(0, -1);
  const std::string pname = sld.parameter == 0 ? "s0" : sld.parameter == 1 ? "s" : "q";

  Measurement meas;
  meas.has_bucket = true;
  for (int k = 0; k < d; ++k) {
    const Eigen::VectorXcd y = sld.eigenvectors.col(k);
    // Coordinates on the real function basis: P Psi = -i Psi'.
    Eigen::VectorXcd u(d);
    if (d == 4)
      u << y(0), y(1), mi * y(2), mi * y(3);
    else
      u << y(0), mi * y(1);

    // If u = e^{i phi} r with r real, sum u_j^2 = e^{2 i phi} |r|^2.
    const cd square_sum = u.array().square().sum();
    const double phi = 0.5 * std::arg(square_sum);
    const Eigen::VectorXcd v = std::exp(cd(0, -phi)) * u;
    if (v.imag().cwiseAbs().maxCoeff() > 1e-8)
      throw NumericalError("SLD eigenvector cannot be phased into a real mode");
    Eigen::VectorXd r = v.real();
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (std::fabs(r(i)) > 1e-10) {
        if (r(i) < 0) r = -r;
        break;
      }
    }

    DerivComboMode combo;
    if (d == 4)
      combo.terms = {{0, pa, r(0)}, {0, pb, r(1)}, {1, pa, r(2)}, {1, pb, r(3)}};
    else
      combo.terms = {{0, pr.s0, r(0)}, {1, pr.s0, r(1)}};
    meas.modes.push_back(Mode{combo, "sld_" + pname + "_" + std::to_string(k)});
  }
  return meas;
}

}  // namespace srb
