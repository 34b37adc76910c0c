#include "srb/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

#include "srb/errors.hpp"
#include "srb/quadrature.hpp"

namespace srb {

namespace {

double bin_width(const BinMode& b) {
  if (!(b.hi > b.lo)) throw ConfigError("bin mode needs hi > lo");
  return b.hi - b.lo;
}

std::pair<double, double> mode_support(const Mode& mode, const PsfModel& psf) {
  if (const auto* b = std::get_if<BinMode>(&mode.shape)) return {b->lo, b->hi};
  if (const auto* d = std::get_if<DerivComboMode>(&mode.shape)) {
    if (d->terms.empty()) throw ConfigError("kernel-derivative mode has no terms");
    double lo = d->terms.front().center, hi = lo;
    for (const DerivTerm& t : d->terms) {
      lo = std::min(lo, t.center);
      hi = std::max(hi, t.center);
    }
    return {lo - psf.position_cut(), hi + psf.position_cut()};
  }
  const auto& s = std::get<SampledMode>(mode.shape).shape;
  return {s.x_front(), s.x_back()};
}

std::vector<double> merged_knots(const Mode& a, const Mode& b) {
  std::vector<double> breaks;
  for (const Mode* m : {&a, &b})
    if (const auto* sm = std::get_if<SampledMode>(&m->shape)) {
      const auto& k = sm->shape.knots();
      breaks.insert(breaks.end(), k.begin(), k.end());
    }
  std::sort(breaks.begin(), breaks.end());
  return breaks;
}

double quad_product(const Mode& a, const Mode& b, const PsfModel& psf) {
  const auto sa = mode_support(a, psf);
  const auto sb = mode_support(b, psf);
  const double lo = std::max(sa.first, sb.first);
  const double hi = std::min(sa.second, sb.second);
  if (!(hi > lo)) return 0.0;
  // At least one mode is tabulated: integrate cell by cell between its knots,
  // where the integrand is piecewise polynomial times a smooth kernel factor.
  return integrate_cells([&](double x) { return a.evaluate(psf, x) * b.evaluate(psf, x); },
                         merged_knots(a, b), lo, hi);
}

// Integral of Psi^(order)(x - c) over the bin, order 0 via the amplitude
// antiderivative and order >= 1 via the lower derivative at the endpoints.
double bin_kernel_integral(const BinMode& bin, const PsfModel& psf, double c, int order) {
  if (order == 0) return psf.amplitude_integral(bin.lo - c, bin.hi - c);
  return psf.amplitude_derivative(bin.hi - c, order - 1) -
         psf.amplitude_derivative(bin.lo - c, order - 1);
}

double bin_combo_overlap(const BinMode& bin, const DerivComboMode& combo, const PsfModel& psf) {
  double acc = 0;
  for (const DerivTerm& t : combo.terms)
    acc += t.coeff * bin_kernel_integral(bin, psf, t.center, t.order);
  return acc / std::sqrt(bin_width(bin));
}

double pair_overlap(const Mode& a, const Mode& b, const PsfModel& psf) {
  if (std::holds_alternative<SampledMode>(a.shape) || std::holds_alternative<SampledMode>(b.shape))
    return quad_product(a, b, psf);
  const auto* ba = std::get_if<BinMode>(&a.shape);
  const auto* bb = std::get_if<BinMode>(&b.shape);
  if (ba && bb) {
    const double lo = std::max(ba->lo, bb->lo), hi = std::min(ba->hi, bb->hi);
    return hi > lo ? (hi - lo) / std::sqrt(bin_width(*ba) * bin_width(*bb)) : 0.0;
  }
  const auto* da = std::get_if<DerivComboMode>(&a.shape);
  const auto* db = std::get_if<DerivComboMode>(&b.shape);
  if (ba && db) return bin_combo_overlap(*ba, *db, psf);
  if (da && bb) return bin_combo_overlap(*bb, *da, psf);
  double acc = 0;
  for (const DerivTerm& ti : da->terms)
    for (const DerivTerm& tj : db->terms) {
      const double sign = tj.order % 2 == 0 ? 1.0 : -1.0;
      acc += ti.coeff * tj.coeff * sign *
             psf.overlap_derivative(ti.order + tj.order, tj.center - ti.center);
    }
  return acc;
}

}  // namespace

double Mode::evaluate(const PsfModel& psf, double x) const {
  if (const auto* b = std::get_if<BinMode>(&shape))
    return x >= b->lo && x < b->hi ? 1.0 / std::sqrt(bin_width(*b)) : 0.0;
  if (const auto* d = std::get_if<DerivComboMode>(&shape)) {
    double acc = 0;
    for (const DerivTerm& t : d->terms)
      acc += t.coeff * psf.amplitude_derivative(x - t.center, t.order);
    return acc;
  }
  const auto& s = std::get<SampledMode>(shape).shape;
  return x >= s.x_front() && x <= s.x_back() ? s(x) : 0.0;
}

double mode_psf_overlap(const Mode& mode, const PsfModel& psf, double pos, int order) {
  if (order < 0) throw ConfigError("overlap derivative order must be non-negative");
  if (const auto* b = std::get_if<BinMode>(&mode.shape))
    return bin_kernel_integral(*b, psf, pos, order) / std::sqrt(bin_width(*b));
  if (const auto* d = std::get_if<DerivComboMode>(&mode.shape)) {
    // <Psi^(j)(. - u), Psi^(k)(. - v)> = (-1)^k w^(j+k)(v - u)
    const double sign = order % 2 == 0 ? 1.0 : -1.0;
    double acc = 0;
    for (const DerivTerm& t : d->terms)
      acc += t.coeff * sign * psf.overlap_derivative(t.order + order, pos - t.center);
    return acc;
  }
  const auto& s = std::get<SampledMode>(mode.shape).shape;
  const double lo = std::max(s.x_front(), pos - psf.position_cut());
  const double hi = std::min(s.x_back(), pos + psf.position_cut());
  if (!(hi > lo)) return 0.0;
  return integrate_cells(
      [&](double x) { return s(x) * psf.amplitude_derivative(x - pos, order); }, s.knots(), lo,
      hi);
}

Eigen::MatrixXd Measurement::gram(const PsfModel& psf) const {
  const auto n = static_cast<Eigen::Index>(modes.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j)
      g(i, j) = g(j, i) = pair_overlap(modes[static_cast<std::size_t>(i)],
                                       modes[static_cast<std::size_t>(j)], psf);
  return g;
}

void Measurement::validate(const PsfModel& psf) const {
  if (modes.empty()) throw ConfigError("measurement has no modes");
  const Eigen::MatrixXd g = gram(psf);
  double worst = 0;
  Eigen::Index wi = 0, wj = 0;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      const double defect = std::fabs(g(i, j) - (i == j ? 1.0 : 0.0));
      if (defect > worst) {
        worst = defect;
        wi = i;
        wj = j;
      }
    }
  if (worst > 1e-8) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", worst);
    throw ConfigError("modes '" + modes[static_cast<std::size_t>(wi)].label + "' and '" +
                      modes[static_cast<std::size_t>(wj)].label +
                      "' break orthonormality by " + buf);
  }
}

ModeSourceOverlap mode_source_overlap(const Measurement& meas, const PsfModel& psf,
                                      const SourceParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(meas.modes.size());
  ModeSourceOverlap out;
  out.c_plus.resize(n);
  out.c_minus.resize(n);
  out.g_plus.resize(n);
  out.g_minus.resize(n);
  const double pp = params.plus_position(), pm = params.minus_position();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Mode& mode = meas.modes[static_cast<std::size_t>(j)];
    out.c_plus(j) = mode_psf_overlap(mode, psf, pp, 0);
    out.c_minus(j) = mode_psf_overlap(mode, psf, pm, 0);
    out.g_plus(j) = mode_psf_overlap(mode, psf, pp, 1);
    out.g_minus(j) = mode_psf_overlap(mode, psf, pm, 1);
  }
  return out;
}

void save_measurement(std::ostream& os, const Measurement& meas, const PsfModel& psf, double x_lo,
                      double x_hi, double dx) {
  if (!(dx > 0) || !(x_hi > x_lo)) throw ConfigError("invalid sampling window for measurement export");
  os << "# x";
  for (std::size_t j = 0; j < meas.modes.size(); ++j) {
    std::string label = meas.modes[j].label.empty() ? "m" + std::to_string(j) : meas.modes[j].label;
    std::replace(label.begin(), label.end(), ' ', '_');
    os << ' ' << label;
  }
  os << '\n';
  const auto n = static_cast<std::size_t>(std::floor((x_hi - x_lo) / dx)) + 1;
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    const double x = x_lo + dx * static_cast<double>(i);
    std::snprintf(buf, sizeof buf, "%.12g", x);
    os << buf;
    for (const Mode& mode : meas.modes) {
      std::snprintf(buf, sizeof buf, "%.12g", mode.evaluate(psf, x));
      os << ' ' << buf;
    }
    os << '\n';
  }
}

void save_measurement(const std::string& path, const Measurement& meas, const PsfModel& psf,
                      double x_lo, double x_hi, double dx) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  save_measurement(os, meas, psf, x_lo, x_hi, dx);
}

Measurement load_measurement(std::istream& is) {
  std::string line;
  std::vector<std::string> labels;
  bool have_header = false;
  std::vector<double> xs;
  std::vector<std::vector<double>> cols;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    if (!have_header) {
      std::string hash, xname;
      if (!(ls >> hash) || hash != "#" || !(ls >> xname) || xname != "x")
        throw ConfigError("measurement file must start with a '# x <labels>' header");
      std::string label;
      while (ls >> label) labels.push_back(label);
      if (labels.empty()) throw ConfigError("measurement header lists no modes");
      cols.resize(labels.size());
      have_header = true;
      continue;
    }
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == '#') continue;
    std::vector<double> row;
    try {
      row.push_back(std::stod(first));
      std::string tok;
      while (ls >> tok) row.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("measurement file line " + std::to_string(line_no) + ": not a number");
    }
    if (row.size() != labels.size() + 1)
      throw ConfigError("measurement file line " + std::to_string(line_no) + ": expected " +
                        std::to_string(labels.size() + 1) + " columns, got " +
                        std::to_string(row.size()));
    xs.push_back(row[0]);
    for (std::size_t j = 0; j < labels.size(); ++j) cols[j].push_back(row[j + 1]);
  }
  if (!have_header) throw ConfigError("measurement file is empty");
  if (xs.size() < 4) throw ConfigError("measurement file has too few sample rows");

  Measurement meas;
  for (std::size_t j = 0; j < labels.size(); ++j)
    meas.modes.push_back(Mode{SampledMode{CubicSpline(xs, cols[j])}, labels[j]});
  return meas;
}

Measurement load_measurement(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  return load_measurement(is);
}

}  // namespace srb
