#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "srb/psf.hpp"
#include "srb/scene.hpp"
#include "srb/spline.hpp"

namespace srb {

// Interval indicator 1/sqrt(hi - lo) on [lo, hi).
struct BinMode {
  double lo = 0;
  double hi = 1;
};

// sum_k coeff_k Psi^(order_k)(x - center_k), built from the imaging kernel.
struct DerivTerm {
  int order = 0;
  double center = 0;
  double coeff = 1;
};
struct DerivComboMode {
  std::vector<DerivTerm> terms;
};

// Tabulated shape; cubic-spline interpolated, zero outside the sample range.
struct SampledMode {
  CubicSpline shape;
};

struct Mode {
  std::variant<BinMode, DerivComboMode, SampledMode> shape;
  std::string label;

  double evaluate(const PsfModel& psf, double x) const;
};

// <phi | Psi^(order)(. - pos)>. Bin and kernel-derivative modes use exact
// antiderivatives and displaced-overlap derivatives; sampled shapes integrate.
double mode_psf_overlap(const Mode& mode, const PsfModel& psf, double pos, int order);

// Orthonormal projective mode family. has_bucket adds a virtual outcome that
// absorbs the residual intensity so outcome probabilities sum to one.
struct Measurement {
  std::vector<Mode> modes;
  bool has_bucket = true;

  Eigen::MatrixXd gram(const PsfModel& psf) const;
  void validate(const PsfModel& psf) const;  // ConfigError if not orthonormal to 1e-8
};

// Overlaps of every mode with the two displaced kernels and their derivatives,
// the only inputs the classical information of a mode measurement needs.
struct ModeSourceOverlap {
  Eigen::VectorXd c_plus, c_minus;  // <phi_j | Psi(. - pos+-)>
  Eigen::VectorXd g_plus, g_minus;  // <phi_j | Psi'(. - pos+-)>
};
ModeSourceOverlap mode_source_overlap(const Measurement& meas, const PsfModel& psf,
                                      const SourceParams& params);

// Text export: "# x <label...>" header, then column-wise samples on a uniform
// grid. Loading reconstructs every mode as a tabulated shape; the bucket flag
// is not serialized and defaults to true.
void save_measurement(std::ostream& os, const Measurement& meas, const PsfModel& psf, double x_lo,
                      double x_hi, double dx);
void save_measurement(const std::string& path, const Measurement& meas, const PsfModel& psf,
                      double x_lo, double x_hi, double dx);
Measurement load_measurement(std::istream& is);
Measurement load_measurement(const std::string& path);

}  // namespace srb
