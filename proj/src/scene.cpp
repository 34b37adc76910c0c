#include "srb/scene.hpp"

#include <cmath>
#include <random>

#include "srb/errors.hpp"
#include "srb/rng.hpp"

namespace srb {

void SourceParams::validate() const {
  if (!std::isfinite(s0) || !std::isfinite(s) || !std::isfinite(q))
    throw ConfigError("source parameters must be finite");
  if (s < 0) throw ConfigError("separation must be >= 0");
  if (q < 0 || q > 1) throw ConfigError("relative brightness must be in [0,1]");
}

IntensityProfile::IntensityProfile(PsfModel psf, SourceParams params)
    : psf_(std::move(psf)), params_(params) {
  params_.validate();
}

double IntensityProfile::operator()(double x) const {
  const double ap = psf_.amplitude(x - params_.plus_position());
  const double am = psf_.amplitude(x - params_.minus_position());
  return params_.q * ap * ap + (1.0 - params_.q) * am * am;
}

double IntensityProfile::cdf(double x) const {
  return params_.q * psf_.intensity_cdf(x - params_.plus_position()) +
         (1.0 - params_.q) * psf_.intensity_cdf(x - params_.minus_position());
}

IntensityProfile intensity_profile(const PsfModel& psf, const SourceParams& params) {
  return IntensityProfile(psf, params);
}

std::array<double, 3> intensity_gradients(const PsfModel& psf, const SourceParams& params,
                                          double x) {
  params.validate();
  const double up = x - params.plus_position();
  const double um = x - params.minus_position();
  const double ip = psf.amplitude(up) * psf.amplitude(up);
  const double im = psf.amplitude(um) * psf.amplitude(um);
  const double dip = 2.0 * psf.amplitude(up) * psf.amplitude_derivative(up, 1);
  const double dim = 2.0 * psf.amplitude(um) * psf.amplitude_derivative(um, 1);
  const double q = params.q;
  // d/ds0 shifts both sources, d/ds moves them apart at half rate each.
  return {-q * dip - (1.0 - q) * dim, -0.5 * q * dip + 0.5 * (1.0 - q) * dim, ip - im};
}

std::vector<double> sample_photons(const IntensityProfile& profile, std::size_t n,
                                   std::uint64_t seed) {
  if (n == 0) throw ConfigError("photon count must be >= 1");
  const SourceParams& par = profile.params();
  const PsfModel& psf = profile.psf();
  std::mt19937_64 eng = make_engine(seed, 0);
  std::vector<double> out(n);
  std::bernoulli_distribution label(par.q);
  if (psf.kind() == PsfKind::AnalyticGaussian) {
    std::normal_distribution<double> pos(0.0, psf.width());
    for (std::size_t i = 0; i < n; ++i) {
      const double center = label(eng) ? par.plus_position() : par.minus_position();
      out[i] = center + pos(eng);
    }
  } else {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double center = label(eng) ? par.plus_position() : par.minus_position();
      out[i] = center + psf.intensity_quantile(uni(eng));
    }
  }
  return out;
}

}  // namespace srb
