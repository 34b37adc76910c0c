#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <variant>
#include <vector>

#include "srb/spline.hpp"

namespace srb {

enum class PsfKind { AnalyticGaussian, UserSampled };
enum class OverlapMethod { Analytic, Quadrature, Series };

// Momentum moments of the amplitude PSF: p2 = <P^2>, p4 = <P^4>.
struct PsfMoments {
  double p2 = 0;      // width^-2
  double p4 = 0;      // width^-4
  double var_p2 = 0;  // p4 - p2^2, the variance of P^2
};

// The three displacement functionals that determine every information quantity:
//   w(s)   = <Psi|e^{isP}|Psi>      (real for a real PSF)
//   m(s)   = Im <Psi|e^{isP}P|Psi>  (the full expectation is purely imaginary)
//   tau(s) = <Psi|e^{isP}P^2|Psi>
// with the identities m = -dw/ds and tau = -d^2w/ds^2.
struct OverlapSet {
  double s = 0;
  double w = 1;
  double m = 0;
  double tau = 0;
  OverlapMethod method = OverlapMethod::Analytic;
  bool series_in_range = true;  // series guard s*sqrt(p2) <= 0.5
};

// Real amplitude point-spread function with its momentum-space density.
// Immutable after construction; copies are cheap (shared backing tables).
class PsfModel {
 public:
  // amplitude(x) = (2*pi)^{-1/4} width^{-1/2} exp(-x^2 / (4 width^2)).
  static PsfModel gaussian(double width);
  // Raw (x, amplitude) samples; renormalized internally so that the intensity
  // integrates to 1. load_sampled_psf reports the factor that was applied.
  static PsfModel from_samples(std::vector<double> x, std::vector<double> amplitude);
  // Aberration/testing hook: explicit amplitude and momentum density functions.
  // The density need not be even; validate_real_psf exists to detect that.
  static PsfModel custom(std::function<double(double)> amplitude,
                         std::function<double(double)> momentum_density, double width,
                         double position_cut, double momentum_cut);

  PsfKind kind() const;
  double width() const;

  double amplitude(double x) const;
  // r-th derivative of the amplitude; any r >= 0 for the Gaussian, r <= 2 otherwise.
  double amplitude_derivative(double x, int r) const;
  // Integral of the amplitude over [a, b] (erf closed form for the Gaussian).
  double amplitude_integral(double a, double b) const;

  double momentum_density(double p) const;
  double momentum_cut() const;  // density negligible beyond |p| > momentum_cut
  double position_cut() const;  // amplitude negligible beyond |x| > position_cut
  // ∫ p^r momentum_density(p) dp; vanishes for odd r on even densities.
  double momentum_moment(int r) const;

  // r-th derivative of w at displacement delta, w(delta) = ∫ cos(delta p) mu(p) dp.
  // w^{(0)} = w. Every mode-overlap integral reduces to these.
  double overlap_derivative(int r, double delta) const;

  // CDF of the single-source intensity amplitude(x)^2 and its inverse.
  double intensity_cdf(double x) const;
  double intensity_quantile(double u) const;

 private:
  // No default member initializers here: gcc rejects them while the enclosing
  // class (and thus the variant member below) is still incomplete.
  struct Gaussian {
    double sigma;
  };
  struct SampledData;  // splines + tables, built once in from_samples
  struct Sampled {
    std::shared_ptr<const SampledData> data;
  };
  struct Custom {
    std::function<double(double)> amplitude;
    std::function<double(double)> momentum_density;
    double width;
    double x_cut;
    double p_cut;
  };
  PsfModel() = default;
  std::variant<Gaussian, Sampled, Custom> impl_;

  friend struct PsfAccess;
};

PsfMoments moments(const PsfModel& psf);
// Exact Gaussian closed forms, quadrature of the momentum density otherwise.
OverlapSet overlaps(const PsfModel& psf, double s);
// Small-s expansion: w = 1 - p2 s^2/2 + p4 s^4/24, m = p2 s - p4 s^3/6,
// tau = p2 - p4 s^2/2 (term-by-term -w'').
OverlapSet overlap_series(const PsfMoments& mom, double s);

// Certificate that the saturability condition applies: real amplitude and an
// even momentum density.
struct ParityReport {
  double max_imag = 0;     // amplitude storage is real-valued; recorded as 0
  double even_defect = 0;  // max_p |mu(p) - mu(-p)| relative to the density peak
  bool saturable = false;  // both defects below 1e-9
};
ParityReport validate_real_psf(const PsfModel& psf);

struct PsfLoadReport {
  PsfModel psf;
  double normalization = 1;  // factor applied to the raw amplitude samples
  std::size_t points = 0;
};
// Two-column text (x, amplitude), '#' comments and blank lines allowed.
PsfLoadReport load_sampled_psf(std::istream& in);
PsfLoadReport load_sampled_psf(const std::filesystem::path& path);

}  // namespace srb
