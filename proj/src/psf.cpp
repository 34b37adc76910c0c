#include "srb/psf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/special_functions/erf.hpp>

#include "srb/errors.hpp"
#include "srb/quadrature.hpp"

namespace srb {

namespace {

// Probabilists' Hermite polynomial He_r(u), by the three-term recurrence.
double hermite_he(int r, double u) {
  if (r == 0) return 1.0;
  double prev = 1.0, cur = u;
  for (int k = 1; k < r; ++k) {
    const double next = u * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// d^r/dx^r exp(-v x^2 / 2) = (-sqrt(v))^r He_r(sqrt(v) x) exp(-v x^2 / 2).
double gaussian_exp_derivative(int r, double v, double x) {
  const double rv = std::sqrt(v);
  double sign_pow = 1.0;
  for (int k = 0; k < r; ++k) sign_pow *= -rv;
  return sign_pow * hermite_he(r, rv * x) * std::exp(-0.5 * v * x * x);
}

double ipow(double x, int r) {
  double acc = 1.0;
  for (int k = 0; k < r; ++k) acc *= x;
  return acc;
}

double odd_factorial(int r) {  // (r-1)!! for even r
  double acc = 1.0;
  for (int k = r - 1; k > 1; k -= 2) acc *= k;
  return acc;
}

}  // namespace

struct PsfModel::SampledData {
  CubicSpline amp;          // normalized amplitude
  double x_lo = 0, x_hi = 0;
  double width = 1;         // intensity standard deviation
  CubicSpline mu;           // momentum density, normalized to unit integral
  double p_cut = 0;
  std::vector<double> cdf_x, cdf_v;  // dense intensity CDF table
  double norm_factor = 1;   // applied to the raw amplitude samples
  std::size_t points = 0;   // raw sample count
};

// Private-constructor access for the free-function loaders.
struct PsfAccess {
  static PsfModel wrap_sampled(std::shared_ptr<const PsfModel::SampledData> data) {
    PsfModel m;
    m.impl_ = PsfModel::Sampled{std::move(data)};
    return m;
  }
  static const PsfModel::SampledData* sampled(const PsfModel& m) {
    if (const auto* s = std::get_if<PsfModel::Sampled>(&m.impl_)) return s->data.get();
    return nullptr;
  }
  static std::shared_ptr<const PsfModel::SampledData> build_sampled(std::vector<double> x,
                                                                    std::vector<double> a);
};

std::shared_ptr<const PsfModel::SampledData> PsfAccess::build_sampled(std::vector<double> x,
                                                                      std::vector<double> a) {
  if (x.size() < 8) throw ConfigError("sampled PSF needs at least 8 points");
  if (x.size() != a.size()) throw ConfigError("sampled PSF column lengths differ");
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> xs(x.size()), as(a.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs[i] = x[order[i]];
    as[i] = a[order[i]];
  }
  x = std::move(xs);
  a = std::move(as);

  auto data = std::make_shared<PsfModel::SampledData>();
  data->points = x.size();

  CubicSpline raw(x, a);
  const double x_lo = raw.x_front(), x_hi = raw.x_back();
  const double norm2 = integrate_cells([&](double t) { const double v = raw(t); return v * v; },
                                       raw.knots(), x_lo, x_hi);
  if (!(norm2 > 0)) throw ConfigError("sampled PSF has zero intensity");
  const double factor = 1.0 / std::sqrt(norm2);
  for (double& v : a) v *= factor;
  data->norm_factor = factor;
  data->amp = CubicSpline(std::move(x), std::move(a));
  data->x_lo = x_lo;
  data->x_hi = x_hi;

  const CubicSpline& amp = data->amp;
  auto intensity = [&](double t) { const double v = amp(t); return v * v; };

  // Width = intensity standard deviation; also the unit the rest of the code
  // quotes "widths" in for this model.
  const double mean = integrate_cells([&](double t) { return t * intensity(t); }, amp.knots(),
                                      x_lo, x_hi);
  const double second = integrate_cells([&](double t) { return t * t * intensity(t); },
                                        amp.knots(), x_lo, x_hi);
  const double var = std::max(second - mean * mean, 1e-12);
  data->width = std::sqrt(var);

  // Dense CDF table for sampling and KS checks.
  const std::size_t table_n = 4001;
  data->cdf_x.resize(table_n);
  data->cdf_v.resize(table_n);
  const double h = (x_hi - x_lo) / static_cast<double>(table_n - 1);
  double cum = 0.0, prev = intensity(x_lo);
  data->cdf_x[0] = x_lo;
  data->cdf_v[0] = 0.0;
  for (std::size_t i = 1; i < table_n; ++i) {
    const double xi = x_lo + h * static_cast<double>(i);
    const double cur = intensity(xi);
    cum += 0.5 * h * (prev + cur);
    data->cdf_x[i] = xi;
    data->cdf_v[i] = cum;
    prev = cur;
  }
  for (double& v : data->cdf_v) v /= cum;  // exact unit total

  // Momentum density from the Fourier transform of the amplitude. The cutoff
  // balances an x-space derivative estimate of the momentum scale against the
  // Nyquist limit of the raw sampling.
  const double p2_est = integrate_cells(
      [&](double t) { const double d = amp.derivative(t); return d * d; }, amp.knots(), x_lo, x_hi);
  const double h_data = (x_hi - x_lo) / static_cast<double>(data->points - 1);
  const double nyquist = std::numbers::pi / (2.0 * h_data);
  double p_cut = std::min(nyquist, 14.0 * std::sqrt(std::max(p2_est, 1e-6)));
  data->p_cut = p_cut;

  const std::size_t np = 1201;
  std::vector<double> pg(np), muv(np);
  const double hp = 2.0 * p_cut / static_cast<double>(np - 1);
  for (std::size_t i = 0; i < np; ++i) {
    const double p = -p_cut + hp * static_cast<double>(i);
    const std::complex<double> ft = integrate_cells(
        [&](double t) { return amp(t) * std::polar(1.0, -p * t); }, amp.knots(), x_lo, x_hi);
    pg[i] = p;
    muv[i] = std::norm(ft) / (2.0 * std::numbers::pi);
  }
  CubicSpline mu_raw(pg, muv);
  const double mu_norm = integrate_cells([&](double p) { return std::max(mu_raw(p), 0.0); },
                                         mu_raw.knots(), -p_cut, p_cut);
  if (!(mu_norm > 0)) throw NumericalError("momentum density integrated to zero");
  for (double& v : muv) v /= mu_norm;
  data->mu = CubicSpline(std::move(pg), std::move(muv));
  return data;
}

PsfModel PsfModel::gaussian(double width) {
  if (!(width > 0) || !std::isfinite(width)) throw ConfigError("PSF width must be positive");
  PsfModel m;
  m.impl_ = Gaussian{width};
  return m;
}

PsfModel PsfModel::from_samples(std::vector<double> x, std::vector<double> amplitude) {
  return PsfAccess::wrap_sampled(PsfAccess::build_sampled(std::move(x), std::move(amplitude)));
}

PsfModel PsfModel::custom(std::function<double(double)> amplitude,
                          std::function<double(double)> momentum_density, double width,
                          double position_cut, double momentum_cut) {
  if (!(width > 0)) throw ConfigError("PSF width must be positive");
  if (!(position_cut > 0) || !(momentum_cut > 0)) throw ConfigError("PSF cutoffs must be positive");
  PsfModel m;
  m.impl_ = Custom{std::move(amplitude), std::move(momentum_density), width, position_cut,
                   momentum_cut};
  return m;
}

PsfKind PsfModel::kind() const {
  return std::holds_alternative<Gaussian>(impl_) ? PsfKind::AnalyticGaussian
                                                 : PsfKind::UserSampled;
}

double PsfModel::width() const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) return g->sigma;
  if (const auto* s = std::get_if<Sampled>(&impl_)) return s->data->width;
  return std::get<Custom>(impl_).width;
}

double PsfModel::amplitude(double x) const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    const double c = std::pow(2.0 * std::numbers::pi, -0.25) / std::sqrt(g->sigma);
    return c * std::exp(-x * x / (4.0 * g->sigma * g->sigma));
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    if (x < d.x_lo || x > d.x_hi) return 0.0;
    return d.amp(x);
  }
  return std::get<Custom>(impl_).amplitude(x);
}

double PsfModel::amplitude_derivative(double x, int r) const {
  if (r < 0) throw ConfigError("derivative order must be >= 0");
  if (r == 0) return amplitude(x);
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    const double c = std::pow(2.0 * std::numbers::pi, -0.25) / std::sqrt(g->sigma);
    return c * gaussian_exp_derivative(r, 1.0 / (2.0 * g->sigma * g->sigma), x);
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    if (x < d.x_lo || x > d.x_hi) return 0.0;
    if (r == 1) return d.amp.derivative(x);
    if (r == 2) return d.amp.second_derivative(x);
    throw ConfigError("sampled PSF supports derivatives up to order 2");
  }
  throw ConfigError("custom PSF does not provide amplitude derivatives");
}

double PsfModel::amplitude_integral(double a, double b) const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    const double c = std::pow(2.0 * std::numbers::pi, -0.25) / std::sqrt(g->sigma);
    const double rt_pi = std::sqrt(std::numbers::pi);
    const double s2 = 2.0 * g->sigma;
    return c * g->sigma * rt_pi * (std::erf(b / s2) - std::erf(a / s2));
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    const double lo = std::max(a, d.x_lo), hi = std::min(b, d.x_hi);
    return integrate_cells([&](double t) { return d.amp(t); }, d.amp.knots(), lo, hi);
  }
  return integrate<double>([&](double t) { return amplitude(t); }, a, b, 1e-12, 1e-12);
}

double PsfModel::momentum_density(double p) const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    const double vp = 1.0 / (4.0 * g->sigma * g->sigma);
    return std::exp(-p * p / (2.0 * vp)) / std::sqrt(2.0 * std::numbers::pi * vp);
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    if (std::fabs(p) > d.p_cut) return 0.0;
    return std::max(d.mu(p), 0.0);
  }
  return std::get<Custom>(impl_).momentum_density(p);
}

double PsfModel::momentum_cut() const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) return 14.0 * 0.5 / g->sigma;
  if (const auto* s = std::get_if<Sampled>(&impl_)) return s->data->p_cut;
  return std::get<Custom>(impl_).p_cut;
}

double PsfModel::position_cut() const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) return 12.0 * g->sigma;
  if (const auto* s = std::get_if<Sampled>(&impl_))
    return std::max(std::fabs(s->data->x_lo), std::fabs(s->data->x_hi));
  return std::get<Custom>(impl_).x_cut;
}

double PsfModel::momentum_moment(int r) const {
  if (r < 0) throw ConfigError("moment order must be >= 0");
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    if (r % 2 == 1) return 0.0;
    const double vp = 1.0 / (4.0 * g->sigma * g->sigma);
    return odd_factorial(r) * ipow(std::sqrt(vp), r);
  }
  const double pc = momentum_cut();
  if (const auto* s = std::get_if<Sampled>(&impl_))
    return integrate_cells([&](double p) { return ipow(p, r) * momentum_density(p); },
                           s->data->mu.knots(), -pc, pc);
  return integrate<double>([&](double p) { return ipow(p, r) * momentum_density(p); }, -pc, pc,
                           1e-10, 1e-11);
}

double PsfModel::overlap_derivative(int r, double delta) const {
  if (r < 0) throw ConfigError("derivative order must be >= 0");
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    const double v = 1.0 / (4.0 * g->sigma * g->sigma);  // p2
    return gaussian_exp_derivative(r, v, delta);
  }
  // w^{(r)}(d) = sign * ∫ p^r trig(d p) mu dp; differentiating ∫cos(dp)mu gives
  // the 4-cycle (+cos, -sin, -cos, +sin).
  const double pc = momentum_cut();
  const bool use_sin = (r % 2 == 1);
  const double sign = (r % 4 == 1 || r % 4 == 2) ? -1.0 : 1.0;
  auto f = [&](double p) {
    const double t = use_sin ? std::sin(delta * p) : std::cos(delta * p);
    return ipow(p, r) * t * momentum_density(p);
  };
  if (const auto* s = std::get_if<Sampled>(&impl_))
    return sign * integrate_cells(f, s->data->mu.knots(), -pc, pc);
  return sign * integrate<double>(f, -pc, pc, 1e-10, 1e-11);
}

double PsfModel::intensity_cdf(double x) const {
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    return 0.5 * (1.0 + std::erf(x / (g->sigma * std::numbers::sqrt2)));
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    if (x <= d.cdf_x.front()) return 0.0;
    if (x >= d.cdf_x.back()) return 1.0;
    const auto it = std::upper_bound(d.cdf_x.begin(), d.cdf_x.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - d.cdf_x.begin()) - 1;
    const double t = (x - d.cdf_x[i]) / (d.cdf_x[i + 1] - d.cdf_x[i]);
    return d.cdf_v[i] + t * (d.cdf_v[i + 1] - d.cdf_v[i]);
  }
  throw ConfigError("custom PSF does not provide an intensity CDF");
}

double PsfModel::intensity_quantile(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw ConfigError("quantile argument must be in [0,1]");
  if (const auto* g = std::get_if<Gaussian>(&impl_)) {
    return g->sigma * std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
  }
  if (const auto* s = std::get_if<Sampled>(&impl_)) {
    const auto& d = *s->data;
    const auto it = std::lower_bound(d.cdf_v.begin(), d.cdf_v.end(), u);
    if (it == d.cdf_v.begin()) return d.cdf_x.front();
    if (it == d.cdf_v.end()) return d.cdf_x.back();
    const std::size_t i = static_cast<std::size_t>(it - d.cdf_v.begin());
    const double dv = d.cdf_v[i] - d.cdf_v[i - 1];
    const double t = dv > 0 ? (u - d.cdf_v[i - 1]) / dv : 0.0;
    return d.cdf_x[i - 1] + t * (d.cdf_x[i] - d.cdf_x[i - 1]);
  }
  throw ConfigError("custom PSF does not provide an intensity quantile");
}

PsfMoments moments(const PsfModel& psf) {
  PsfMoments mom;
  if (psf.kind() == PsfKind::AnalyticGaussian) {
    const double p2 = 1.0 / (4.0 * psf.width() * psf.width());
    mom.p2 = p2;
    mom.p4 = 3.0 * p2 * p2;
  } else {
    mom.p2 = psf.momentum_moment(2);
    mom.p4 = psf.momentum_moment(4);
  }
  if (!(mom.p2 > 0)) throw NumericalError("nonpositive second momentum moment");
  mom.var_p2 = std::max(mom.p4 - mom.p2 * mom.p2, 0.0);
  return mom;
}

OverlapSet overlaps(const PsfModel& psf, double s) {
  if (!(s >= 0) || !std::isfinite(s)) throw ConfigError("separation must be >= 0");
  OverlapSet ov;
  ov.s = s;
  if (psf.kind() == PsfKind::AnalyticGaussian) {
    const double p2 = 1.0 / (4.0 * psf.width() * psf.width());
    const double e = std::exp(-0.5 * s * s * p2);
    ov.w = e;
    ov.m = s * p2 * e;
    ov.tau = (p2 - s * s * p2 * p2) * e;
    ov.method = OverlapMethod::Analytic;
    return ov;
  }
  ov.w = psf.overlap_derivative(0, s);
  ov.m = -psf.overlap_derivative(1, s);
  ov.tau = -psf.overlap_derivative(2, s);
  ov.method = OverlapMethod::Quadrature;
  return ov;
}

OverlapSet overlap_series(const PsfMoments& mom, double s) {
  if (!(s >= 0)) throw ConfigError("separation must be >= 0");
  OverlapSet ov;
  ov.s = s;
  const double s2 = s * s;
  ov.w = 1.0 - 0.5 * mom.p2 * s2 + mom.p4 * s2 * s2 / 24.0;
  ov.m = mom.p2 * s - mom.p4 * s2 * s / 6.0;
  ov.tau = mom.p2 - 0.5 * mom.p4 * s2;
  ov.method = OverlapMethod::Series;
  ov.series_in_range = s * std::sqrt(mom.p2) <= 0.5;
  return ov;
}

ParityReport validate_real_psf(const PsfModel& psf) {
  ParityReport rep;
  rep.max_imag = 0.0;  // amplitude is stored as a real-valued function
  const double pc = psf.momentum_cut();
  const int n = 401;
  double peak = 0.0, defect = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double p = pc * static_cast<double>(i) / n;
    const double a = psf.momentum_density(p);
    const double b = psf.momentum_density(-p);
    peak = std::max({peak, std::fabs(a), std::fabs(b)});
    defect = std::max(defect, std::fabs(a - b));
  }
  rep.even_defect = peak > 0 ? defect / peak : 0.0;
  rep.saturable = rep.even_defect < 1e-9 && rep.max_imag < 1e-9;
  return rep;
}

PsfLoadReport load_sampled_psf(std::istream& in) {
  std::vector<double> xs, as;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x, a;
    if (!(ls >> x)) continue;  // blank or comment-only line
    if (!(ls >> a)) throw ConfigError("PSF file line " + std::to_string(lineno) +
                                      ": expected two columns (x, amplitude)");
    double extra;
    if (ls >> extra) throw ConfigError("PSF file line " + std::to_string(lineno) +
                                       ": more than two columns");
    xs.push_back(x);
    as.push_back(a);
  }
  auto data = PsfAccess::build_sampled(std::move(xs), std::move(as));
  const double norm = data->norm_factor;
  const std::size_t pts = data->points;
  return PsfLoadReport{PsfAccess::wrap_sampled(std::move(data)), norm, pts};
}

PsfLoadReport load_sampled_psf(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PSF file: " + path.string());
  return load_sampled_psf(in);
}

}  // namespace srb
