#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "srb/crlb.hpp"
#include "srb/measurement.hpp"
#include "srb/psf.hpp"
#include "srb/scene.hpp"

namespace srb {

// Search box for the estimator; the s >= 0 half removes the s <-> -s,
// q <-> 1-q labeling ambiguity by convention.
struct EstimationBox {
  double s0_lo = -10, s0_hi = 10;
  double s_lo = 0, s_hi = 10;
  double q_lo = 0, q_hi = 1;
};

struct MleOptions {
  std::optional<SourceParams> init;  // default: method-of-moments start
  EstimationBox box;
  // Components pinned to the initial point (s0, s, q order): single- or
  // two-parameter estimation with the rest known. Pinning requires an
  // explicit init.
  std::array<bool, 3> fixed{false, false, false};
  int restarts = 4;  // jittered starts beyond the initial point
  std::uint64_t seed = 1;
  int max_iter = 160;  // simplex iterations per start
};

struct MleResult {
  SourceParams estimate;
  double loglik = 0;
  std::array<bool, 3> at_boundary{false, false, false};
  bool improved = false;  // a jittered restart beat the initial start
};

// Closed-form start from the first three sample moments: the mixture mean,
// the excess variance A = Var - width^2 = q(1-q) s^2 and the third central
// moment B = q(1-q)(1-2q) s^3 determine (s0, s, q) up to the box convention.
SourceParams moment_init(std::span<const double> samples, const PsfModel& psf,
                         const EstimationBox& box);

// Maximum-likelihood estimate from photon positions (continuous readout).
MleResult mle(std::span<const double> samples, const PsfModel& psf, const MleOptions& opt = {});

// Maximum-likelihood estimate from per-outcome photon counts of a mode
// measurement (counts ordered as meas.modes, bucket last when present).
// Needs an explicit init; there is no moment start for counts.
MleResult mle(std::span<const std::int64_t> counts, const Measurement& meas, const PsfModel& psf,
              const MleOptions& opt);

struct StudyConfig {
  SourceParams truth;
  MeasurementSpec::Kind kind = MeasurementSpec::Kind::Direct;
  std::optional<Measurement> modes;  // for Kind::Modes
  // Components held at the truth during estimation. The CRLB reference then
  // inverts the Fisher block of the free components only, so a per-parameter
  // optimal measurement can be scored against its single-parameter bound.
  std::array<bool, 3> fixed{false, false, false};
  std::size_t photons = 100000;  // >= 1e4: asymptotic-regime guard
  std::size_t trials = 200;      // >= 100
  std::uint64_t seed = 1;
};

struct EstimationRun {
  StudyConfig config;
  std::vector<SourceParams> estimates;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (trials - 1) denominator
  PrecisionTriple crlb;                                  // per-detection precisions at the truth
  Eigen::Vector3d crlb_variance = Eigen::Vector3d::Zero();  // (F^-1)_aa / photons
  Eigen::Vector3d ratio = Eigen::Vector3d::Zero();  // empirical variance / CRLB variance
  std::size_t boundary_hits = 0;  // trials with any boundary-pinned component
};

// Repeated sample -> estimate rounds against the CRLB reference. Per-trial
// seeds are derived from the study seed, so results are independent of how
// trials would be distributed across workers.
EstimationRun crlb_saturation_study(const PsfModel& psf, const StudyConfig& config);

}  // namespace srb
