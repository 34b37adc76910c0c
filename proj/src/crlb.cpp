#include "srb/crlb.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "srb/cfi.hpp"
#include "srb/errors.hpp"
#include "srb/qfi.hpp"

namespace srb {

PrecisionTriple precisions(const FisherMatrix& fisher) {
  FisherMatrix f = fisher;
  detect_zero_rows(f);
  PrecisionTriple out;
  out.degenerate = f.degenerate;

  std::vector<int> active;
  for (int i = 0; i < 3; ++i)
    if (!f.degenerate[static_cast<std::size_t>(i)]) active.push_back(i);
  if (active.empty()) return out;

  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd block(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      block(i, j) = f.entries(active[static_cast<std::size_t>(i)],
                              active[static_cast<std::size_t>(j)]);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(block);
  const double smin = svd.singularValues()(k - 1);
  const double smax = svd.singularValues()(0);
  if (!(smin > 0) || smax / smin > 1e12) {
    // Jointly unidentifiable block; report everything in it as degenerate.
    for (int i : active) out.degenerate[static_cast<std::size_t>(i)] = true;
    return out;
  }
  const Eigen::MatrixXd inv = block.inverse();
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = 1.0 / inv(i, i);
    const int idx = active[static_cast<std::size_t>(i)];
    if (idx == 0) out.s0 = h;
    if (idx == 1) out.s = h;
    if (idx == 2) out.q = h;
  }
  return out;
}

namespace {

struct StableCore {
  double n = 0;             // p2 (1 - w^2) - m^2, computed without cancellation
  double one_minus_w2 = 0;  // 1 - w^2
};

StableCore stable_core(const OverlapSet& ov, const PsfMoments& mom) {
  const double s = ov.s, p2 = mom.p2, p4 = mom.p4;
  StableCore core;
  if (s * std::sqrt(p2) < 1e-3) {
    // Leading series; direct evaluation would subtract equals at this scale.
    core.n = 0.25 * p2 * mom.var_p2 * s * s * s * s;
    core.one_minus_w2 = p2 * s * s - (0.25 * p2 * p2 + p4 / 12.0) * s * s * s * s;
  } else {
    core.one_minus_w2 = ov.method == OverlapMethod::Analytic ? -std::expm1(-p2 * s * s)
                                                             : (1.0 - ov.w) * (1.0 + ov.w);
    core.n = std::max(p2 * core.one_minus_w2 - ov.m * ov.m, 0.0);
  }
  return core;
}

}  // namespace

double separation_precision_closed(const OverlapSet& ov, const PsfMoments& mom, double q) {
  if (!(q >= 0 && q <= 1)) throw ConfigError("relative brightness must be in [0,1]");
  const double p2 = mom.p2;
  const double balance = 4.0 * q * (1.0 - q);
  if (ov.s == 0) return q == 0.5 ? p2 : 0.0;
  if (balance == 0) return 0.0;
  const StableCore core = stable_core(ov, mom);
  // At q = 1/2 the prefactor (1 - B) vanishes exactly and H_s = p2 bitwise.
  const double den = (1.0 - balance) * p2 * core.one_minus_w2 + balance * core.n;
  if (!(den > 0)) return q == 0.5 ? p2 : 0.0;
  return p2 * balance * core.n / den;
}

PrecisionTriple quantum_precisions_closed(const OverlapSet& ov, const PsfMoments& mom,
                                          const SourceParams& params) {
  params.validate();
  if (params.s == 0 || params.q <= 0 || params.q >= 1)
    return precisions(qfim_closed_form(ov, mom, params));

  const double p2 = mom.p2;
  const double balance = params.balance_sq();
  const StableCore core = stable_core(ov, mom);
  if (!(core.one_minus_w2 > 0) || !(core.n > 0))
    return precisions(qfim_closed_form(ov, mom, params));

  PrecisionTriple out;
  out.s0 = 4.0 * balance * core.n / core.one_minus_w2;
  out.s = separation_precision_closed(ov, mom, params.q);
  out.q = 4.0 * core.n / (balance * (p2 - ov.m * ov.m));
  return out;
}

PrecisionTriple asymptotic_precisions(const PsfMoments& mom, const SourceParams& params) {
  params.validate();
  if (params.q <= 0 || params.q >= 1)
    throw ConfigError("small-separation asymptotics need 0 < q < 1");
  const double balance = params.balance_sq();
  const double v = mom.var_p2, s = params.s;
  PrecisionTriple out;
  out.s0 = balance * v * s * s;
  out.s = params.q == 0.5 ? mom.p2 : balance / (4.0 * (1.0 - balance)) * v * s * s;
  out.q = v * s * s * s * s / balance;
  return out;
}

SlopeFit loglog_slope(std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  if (n < 5) throw ConfigError("slope fit needs at least 5 points");
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].first > 0) || !(points[i].second > 0))
      throw ConfigError("slope fit needs strictly positive coordinates");
    lx[i] = std::log(points[i].first);
    ly[i] = std::log(points[i].second);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0)) throw ConfigError("slope fit needs distinct abscissas");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - fit.intercept - fit.slope * lx[i];
    ss_res += r * r;
  }
  fit.std_error = std::sqrt(ss_res / static_cast<double>(n - 2) / sxx);
  return fit;
}

SweepTable sweep(const PsfModel& psf, const SweepSpec& spec) {
  if (spec.s_values.empty() || spec.q_values.empty())
    throw ConfigError("sweep needs non-empty separation and brightness grids");
  const PsfMoments mom = moments(psf);

  SweepTable table;
  for (const MeasurementSpec& ms : spec.measurements) {
    if (ms.name.empty()) throw ConfigError("measurement spec needs a name");
    if (ms.kind == MeasurementSpec::Kind::Modes) {
      if (!ms.modes) throw ConfigError("measurement spec '" + ms.name + "' has no modes");
      ms.modes->validate(psf);
    }
    table.measurement_names.push_back(ms.name);
  }

  for (double q : spec.q_values) {
    for (double s : spec.s_values) {
      SourceParams p{spec.s0, s, q};
      p.validate();
      const OverlapSet ov = overlaps(psf, s);
      SweepRow row;
      row.s = s;
      row.q = q;
      row.s0 = spec.s0;
      row.quantum = quantum_precisions_closed(ov, mom, p);
      for (const MeasurementSpec& ms : spec.measurements) {
        row.classical.push_back(ms.kind == MeasurementSpec::Kind::Direct
                                    ? direct_imaging_precisions(psf, p)
                                    : precisions(measurement_cfi(*ms.modes, psf, p)));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace srb
