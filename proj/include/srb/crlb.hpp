#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srb/fisher.hpp"
#include "srb/measurement.hpp"
#include "srb/psf.hpp"
#include "srb/scene.hpp"

namespace srb {

// Per-detection precision H_theta = 1/(F^-1)_{theta,theta}, the inverse
// single-parameter Cramer-Rao variance with the other two parameters unknown.
// Degenerate components (flagged rows, zero rows, or an ill-conditioned
// information block) report H = 0: the parameter is not jointly estimable.
struct PrecisionTriple {
  double s0 = 0;
  double s = 0;
  double q = 0;
  std::array<bool, 3> degenerate{false, false, false};

  double component(int i) const { return i == 0 ? s0 : i == 1 ? s : q; }
};

PrecisionTriple precisions(const FisherMatrix& fisher);

// Separation precision from the quantum matrix in the cancellation-free form
//   H_s = p2 B N / D,  N = p2 (1 - w^2) - m^2,  D = (1 - B) p2 (1 - w^2) + B N,
// with a small-s series branch for N. Equals precisions(qfim).s to round-off
// and stays accurate deep into the sub-width regime.
double separation_precision_closed(const OverlapSet& ov, const PsfMoments& mom, double q);

// All three quantum precisions through the same cancellation-free core:
//   H_s0 = 4 B N / (1 - w^2),   H_q = 4 N / (B (p2 - m^2)).
// Inverting the information matrix instead loses these below s ~ 1e-3 (its
// condition number grows like s^-4). Boundaries (s = 0, q in {0, 1}) fall
// back to the flagged inversion path, which drops the unidentifiable rows.
PrecisionTriple quantum_precisions_closed(const OverlapSet& ov, const PsfMoments& mom,
                                          const SourceParams& params);

// Leading small-s behavior (B = 4q(1-q), V = var P^2):
//   H_s0 -> B V s^2,   H_s -> p2 (q = 1/2) or B/(4(1-B)) V s^2,   H_q -> V s^4 / B.
PrecisionTriple asymptotic_precisions(const PsfMoments& mom, const SourceParams& params);

// Precision triple of ideal continuous position readout. Uses quad-precision
// integration and inversion where supported (the q component collapses ~ s^6
// and double-precision inversion loses it below s ~ 0.1).
PrecisionTriple direct_imaging_precisions(const PsfModel& psf, const SourceParams& params);

struct SlopeFit {
  double slope = 0;
  double std_error = 0;
  double intercept = 0;
};
// Least-squares slope of log y vs log x; needs >= 5 strictly positive points.
SlopeFit loglog_slope(std::span<const std::pair<double, double>> points);

struct MeasurementSpec {
  enum class Kind { Direct, Modes };
  std::string name;
  Kind kind = Kind::Direct;
  std::optional<Measurement> modes;
};

struct SweepSpec {
  std::vector<double> s_values;
  std::vector<double> q_values;
  double s0 = 0;
  std::vector<MeasurementSpec> measurements;
};

struct SweepRow {
  double s = 0;
  double q = 0;
  double s0 = 0;
  PrecisionTriple quantum;
  std::vector<PrecisionTriple> classical;  // one per measurement, same order
};

// Rows ordered q-major, then s, matching the order of the input lists.
struct SweepTable {
  std::vector<std::string> measurement_names;
  std::vector<SweepRow> rows;
};

SweepTable sweep(const PsfModel& psf, const SweepSpec& spec);

}  // namespace srb
