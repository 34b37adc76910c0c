#pragma once

#include <cstdint>
#include <vector>

#include "srb/crlb.hpp"
#include "srb/measurement.hpp"
#include "srb/psf.hpp"
#include "srb/scene.hpp"

namespace srb {

// First n members of the orthonormal family spanned by the kernel derivatives
// Psi, Psi', ..., Psi^(n-1), centered at `center` (Cholesky orthogonalization
// in exact overlap arithmetic; for the Gaussian these are the Hermite-Gauss
// modes). Signs follow (-1)^i * (coefficient on Psi^(i)) > 0. Throws
// RankLossError when the family loses numerical rank before n members.
Measurement orthonormal_mode_basis(const PsfModel& psf, int n, double center = 0);

enum class DesignObjective { SeparationPrecision, BrightnessPrecision, MinRatioVsQuantum };

struct DesignSpec {
  int modes = 4;
  DesignObjective objective = DesignObjective::SeparationPrecision;
  int restarts = 16;
  std::uint64_t seed = 1;
};

struct RestartTrace {
  int restart = 0;
  double objective = 0;    // this restart's converged value
  double best_so_far = 0;  // running maximum through this restart
  bool converged = false;
};

struct OptimizedMeasurement {
  Measurement measurement;
  double achieved = 0;  // objective at the optimum, recomputed independently
  FisherMatrix achieved_cfi;
  PrecisionTriple achieved_precisions;  // classical precisions of the final measurement
  PrecisionTriple quantum_precisions;
  DesignObjective objective = DesignObjective::SeparationPrecision;
  int best_restart = 0;
  bool converged = false;  // at least one restart met the simplex tolerance
  std::vector<RestartTrace> trace;
};

// Rotate the orthonormal mode family by a chain of n(n-1)/2 Givens rotations
// and maximize the chosen classical precision (or the worst classical/quantum
// precision ratio) by multistart simplex search. Restart 0 starts from the
// unrotated basis; later restarts draw angles from a per-restart stream of
// `seed`. Deterministic; ties resolve to the lowest restart index. Every
// candidate is checked against the quantum bound along the way.
OptimizedMeasurement optimize_measurement(const PsfModel& psf, const SourceParams& params,
                                          const DesignSpec& spec);

}  // namespace srb
