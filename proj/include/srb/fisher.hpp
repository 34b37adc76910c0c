#pragma once

#include <array>

#include <Eigen/Dense>

namespace srb {

enum class FisherKind { Quantum, Classical };
enum class FisherProvenance { ClosedForm, Rank2, GridOracle, Quadrature };

// 3x3 information matrix per detection event, fixed parameter order (s0, s, q).
// degenerate[i] marks components that carry no information at this parameter
// point (their row/column is pinned to zero) so sweeps can cross boundaries.
struct FisherMatrix {
  Eigen::Matrix3d entries = Eigen::Matrix3d::Zero();
  FisherKind kind = FisherKind::Quantum;
  FisherProvenance provenance = FisherProvenance::ClosedForm;
  std::array<bool, 3> degenerate{false, false, false};
};

double min_eigenvalue(const Eigen::Matrix3d& m);
double symmetry_defect(const Eigen::Matrix3d& m);

// Flag and pin rows (and columns) that vanish to round-off; idempotent.
void detect_zero_rows(FisherMatrix& f);

}  // namespace srb
