#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "srb/psf.hpp"

namespace srb {

// Parameter vector theta = (s0, s, q): centroid, separation, relative
// brightness of the "+" source. Lengths in PSF widths.
struct SourceParams {
  double s0 = 0;
  double s = 0;
  double q = 0.5;

  void validate() const;  // throws ConfigError on s < 0 or q outside [0,1]
  double balance_sq() const { return 4.0 * q * (1.0 - q); }  // 1 = equal, 0 = single source
  double plus_position() const { return s0 + 0.5 * s; }      // weight q
  double minus_position() const { return s0 - 0.5 * s; }     // weight 1-q
};

// Normalized mean image-plane intensity q I(x-a) + (1-q) I(x-b) with
// I = amplitude^2, a/b the +/- source positions.
class IntensityProfile {
 public:
  IntensityProfile(PsfModel psf, SourceParams params);
  double operator()(double x) const;
  double cdf(double x) const;
  const PsfModel& psf() const { return psf_; }
  const SourceParams& params() const { return params_; }

 private:
  PsfModel psf_;
  SourceParams params_;
};

IntensityProfile intensity_profile(const PsfModel& psf, const SourceParams& params);

// (d/ds0, d/ds, d/dq) of the mixture density at x, by the chain rule on the
// PSF intensity derivative I' = 2 Psi Psi'.
std::array<double, 3> intensity_gradients(const PsfModel& psf, const SourceParams& params,
                                          double x);

// n photon positions. Gaussian model: exact label + normal draws; sampled
// models: inverse-CDF. Deterministic given (seed, n) regardless of how the
// caller distributes work (the engine is private to this call).
std::vector<double> sample_photons(const IntensityProfile& profile, std::size_t n,
                                   std::uint64_t seed);

}  // namespace srb
