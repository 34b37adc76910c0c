#include <array>
#include <cmath>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/float128.hpp>

#include "srb/cfi.hpp"
#include "srb/crlb.hpp"
#include "srb/errors.hpp"
#include "srb/quadrature.hpp"

namespace srb {

namespace {

using Real128 = boost::multiprecision::float128;

// Gaussian mixture intensity and its parameter gradient, templated so the
// double and quad-precision pipelines share one code path.
template <class R>
struct GaussianMixture {
  R inv_two_var, inv_var, norm, a, b, q;

  GaussianMixture(double sigma, const SourceParams& p) {
    const R s(sigma);
    inv_two_var = R(0.5) / (s * s);
    inv_var = R(1) / (s * s);
    norm = R(1) / (s * sqrt(R(2) * boost::math::constants::pi<R>()));
    a = R(p.plus_position());
    b = R(p.minus_position());
    q = R(p.q);
  }

  void eval(const R& x, R& intensity, std::array<R, 3>& grad) const {
    using std::exp;
    const R da = x - a, db = x - b;
    const R ra = norm * exp(-da * da * inv_two_var);
    const R rb = norm * exp(-db * db * inv_two_var);
    intensity = q * ra + (R(1) - q) * rb;
    const R ta = q * ra * da * inv_var;
    const R tb = (R(1) - q) * rb * db * inv_var;
    grad[0] = ta + tb;
    grad[1] = R(0.5) * ta - R(0.5) * tb;
    grad[2] = ra - rb;
  }
};

template <class R>
std::array<std::array<R, 3>, 3> mixture_fisher(const GaussianMixture<R>& mix, const R& lo,
                                               const R& hi, R abs_tol, R rel_tol) {
  std::array<std::array<R, 3>, 3> f{};
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      const R v = integrate<R>(
          [&](R x) {
            R intensity;
            std::array<R, 3> g;
            mix.eval(x, intensity, g);
            if (intensity < R(1e-300)) return R(0);
            return g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] / intensity;
          },
          lo, hi, abs_tol, rel_tol, 16);
      f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      f[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
    }
  }
  return f;
}

// Gauss-Jordan inverse with partial pivoting for k <= 3; false on singularity.
bool invert_small(std::vector<std::vector<Real128>>& m) {
  const std::size_t k = m.size();
  std::vector<std::vector<Real128>> inv(k, std::vector<Real128>(k, Real128(0)));
  for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (abs(m[r][col]) > abs(m[piv][col])) piv = r;
    if (m[piv][col] == 0) return false;
    std::swap(m[piv], m[col]);
    std::swap(inv[piv], inv[col]);
    const Real128 d = m[col][col];
    for (std::size_t c = 0; c < k; ++c) {
      m[col][c] /= d;
      inv[col][c] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const Real128 factor = m[r][col];
      if (factor == 0) continue;
      for (std::size_t c = 0; c < k; ++c) {
        m[r][c] -= factor * m[col][c];
        inv[r][c] -= factor * inv[col][c];
      }
    }
  }
  m = inv;
  return true;
}

}  // namespace

bool direct_imaging_hp_supported(const PsfModel& psf) {
  return psf.kind() == PsfKind::AnalyticGaussian;
}

FisherMatrix direct_imaging_cfi(const PsfModel& psf, const SourceParams& params) {
  params.validate();
  FisherMatrix out;
  out.kind = FisherKind::Classical;
  out.provenance = FisherProvenance::Quadrature;

  if (psf.kind() == PsfKind::AnalyticGaussian) {
    const GaussianMixture<double> mix(psf.width(), params);
    const double cut = psf.position_cut();
    const auto f = mixture_fisher<double>(mix, params.minus_position() - cut,
                                          params.plus_position() + cut, 1e-12, 1e-11);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        out.entries(i, j) = f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  } else {
    const IntensityProfile profile = intensity_profile(psf, params);
    const double cut = psf.position_cut();
    const double lo = params.minus_position() - cut, hi = params.plus_position() + cut;
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) {
        out.entries(i, j) = out.entries(j, i) = integrate<double>(
            [&](double x) {
              const double intensity = profile(x);
              if (intensity < 1e-300) return 0.0;
              const std::array<double, 3> g = intensity_gradients(psf, params, x);
              return g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] / intensity;
            },
            lo, hi, 1e-12, 1e-11, 15);
      }
    }
  }
  detect_zero_rows(out);
  return out;
}

PrecisionTriple direct_imaging_precisions(const PsfModel& psf, const SourceParams& params) {
  params.validate();
  if (!direct_imaging_hp_supported(psf)) return precisions(direct_imaging_cfi(psf, params));

  const GaussianMixture<Real128> mix(psf.width(), params);
  // 16 widths of margin: quad-precision tolerances see Gaussian tails that are
  // negligible at double precision.
  const Real128 cut = Real128(16) * Real128(psf.width());
  const auto f =
      mixture_fisher<Real128>(mix, mix.b - cut, mix.a + cut, Real128(1e-30), Real128(1e-26));

  PrecisionTriple out;
  Real128 maxabs(0);
  for (const auto& row : f)
    for (const Real128& v : row) maxabs = std::max(maxabs, Real128(abs(v)));
  const Real128 row_tol = Real128(1e-25) * std::max(Real128(1), maxabs);

  std::vector<int> active;
  for (int i = 0; i < 3; ++i) {
    Real128 rmax(0);
    for (int j = 0; j < 3; ++j)
      rmax = std::max(rmax,
                      Real128(abs(f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])));
    if (rmax < row_tol)
      out.degenerate[static_cast<std::size_t>(i)] = true;
    else
      active.push_back(i);
  }
  if (active.empty()) return out;

  const std::size_t k = active.size();
  std::vector<std::vector<Real128>> block(k, std::vector<Real128>(k));
  Real128 fnorm(0);
  for (std::size_t i = 0; i < k; ++i) {
    Real128 rsum(0);
    for (std::size_t j = 0; j < k; ++j) {
      block[i][j] = f[static_cast<std::size_t>(active[i])][static_cast<std::size_t>(active[j])];
      rsum += abs(block[i][j]);
    }
    fnorm = std::max(fnorm, rsum);
  }
  const bool ok = invert_small(block);
  Real128 inorm(0);
  if (ok) {
    for (std::size_t i = 0; i < k; ++i) {
      Real128 rsum(0);
      for (std::size_t j = 0; j < k; ++j) rsum += abs(block[i][j]);
      inorm = std::max(inorm, rsum);
    }
  }
  if (!ok || fnorm * inorm > Real128(1e28)) {
    for (int i : active) out.degenerate[static_cast<std::size_t>(i)] = true;
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double h = static_cast<double>(Real128(1) / block[i][i]);
    if (active[i] == 0) out.s0 = h;
    if (active[i] == 1) out.s = h;
    if (active[i] == 2) out.q = h;
  }
  return out;
}

}  // namespace srb
