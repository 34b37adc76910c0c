#pragma once

#include <complex>

#include <Eigen/Dense>

#include "srb/fisher.hpp"
#include "srb/psf.hpp"
#include "srb/scene.hpp"

namespace srb {

// rho restricted to span{Psi+, Psi-} has exactly two nonzero eigenvalues,
// lambda = 1/2 +- sqrt(1/4 - q(1-q)(1-w^2)). coeff_i are the eigenvector
// coordinates on the (non-orthogonal) pair basis, normalized in the Gram
// metric [[1, w], [w, 1]].
struct SpectralDecomposition {
  double lambda1 = 1;
  double lambda2 = 0;
  Eigen::Vector2d coeff1{1, 0};
  Eigen::Vector2d coeff2{0, 1};
  bool pure_limit = false;  // w -> 1: lambda2 = 0 and coeff2 is not normalizable
};

// Quantum Fisher information matrix in closed form:
//   Q = 4 [[p2 - B m^2,     (q-1/2) p2,  w m        ]
//          [(q-1/2) p2,     p2 / 4,      0          ]
//          [w m,            0,           (1-w^2)/B  ]]   with B = 4q(1-q).
// Boundaries: q in {0,1} and s = 0 yield flagged degenerate rows, not errors.
FisherMatrix qfim_closed_form(const OverlapSet& ov, const PsfMoments& mom,
                              const SourceParams& params);

SpectralDecomposition rho_eigensystem(const OverlapSet& ov, double q);

// Coordinate algebra on span{Psi+, Psi-, P Psi+, P Psi-} with the Hermitian
// Gram metric (<Psi+|P|Psi-> = i m). An operator is a coefficient matrix A
// meaning sum_ij A_ij |b_i><b_j|; composition inserts G. At s = 0 the pair
// basis is linearly dependent and the representation degrades to the
// 2-dimensional {Psi, P Psi} basis with Gram diag(1, p2).
class SubspaceRep {
 public:
  SubspaceRep(const OverlapSet& ov, const PsfMoments& mom, const SourceParams& params);

  int dim() const { return static_cast<int>(gram_.rows()); }
  const Eigen::MatrixXcd& gram() const { return gram_; }
  const Eigen::MatrixXcd& rho() const { return rho_; }
  const Eigen::MatrixXcd& drho(int alpha) const;

  Eigen::MatrixXcd product(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) const;
  std::complex<double> trace_op(const Eigen::MatrixXcd& a) const;
  std::complex<double> matrix_element(const Eigen::VectorXcd& u, const Eigen::MatrixXcd& a,
                                      const Eigen::VectorXcd& v) const;

  // Columns of T are coordinates of a G-orthonormal basis: T^dagger G T = 1.
  const Eigen::MatrixXcd& frame() const { return frame_; }
  double gram_condition() const { return gram_cond_; }

  const OverlapSet& overlaps() const { return ov_; }
  const PsfMoments& moments() const { return mom_; }
  const SourceParams& params() const { return params_; }

 private:
  OverlapSet ov_;
  PsfMoments mom_;
  SourceParams params_;
  Eigen::MatrixXcd gram_, rho_, frame_;
  std::array<Eigen::MatrixXcd, 3> drho_;
  double gram_cond_ = 1;
};

// Rank-2 spectral form of the QFIM evaluated entirely inside the subspace:
//   Q_ab = -3/l1 A11 B11 - 3/l2 A22 B22 + 4(1 - 1/l1 - 1/l2) A12 B21
//          + 4/l1 <l1|da_rho db_rho|l1> + 4/l2 <l2|da_rho db_rho|l2>,
// symmetrized over a <-> b. Requires lambda2 > 1e-12.
FisherMatrix qfim_rank2(const SubspaceRep& rep, const SpectralDecomposition& dec);

// Brute-force oracle: discretize x, build the rank-2 kernel, differentiate the
// parameters by 5-point central differences, diagonalize densely and apply the
// spectral QFIM sum over eigenvalue pairs above 1e-11.
struct GridSpec {
  double extent = 12.0;   // half-width beyond the outermost source; >= 10
  double spacing = 0.02;  // <= 0.02
};
FisherMatrix qfim_grid_oracle(const PsfModel& psf, const SourceParams& params,
                              const GridSpec& grid = {});
// Same discretization, evaluating Tr(rho [L_a, L_b]) from the grid SLDs.
Eigen::Matrix3d compatibility_grid_oracle(const PsfModel& psf, const SourceParams& params,
                                          const GridSpec& grid = {});

// Symmetric logarithmic derivative L_a solving (L rho + rho L)/2 = d_a rho on
// the subspace: spectral division in a G-orthonormal frame plus two rounds of
// iterative refinement. eigenvectors are G-orthonormal coordinate columns,
// eigenvalue-descending, phase-fixed (first significant coordinate positive real).
struct SldOperator {
  int parameter = 0;  // 0 = s0, 1 = s, 2 = q
  Eigen::MatrixXcd coeff;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
  double residual = 0;  // achieved defining-equation residual (max entry)
};
SldOperator sld_subspace(const SubspaceRep& rep, const SpectralDecomposition& dec, int parameter);

// Saturability certificate: residual(a,b) = Im Tr(rho [L_a, L_b]) for all
// pairs (real parts are zero to round-off and folded into max_abs).
struct CompatibilityReport {
  Eigen::Matrix3d residual = Eigen::Matrix3d::Zero();
  double max_abs = 0;
  bool saturable = false;  // max_abs < 1e-9
};
CompatibilityReport compatibility_check(const SubspaceRep& rep, const SpectralDecomposition& dec);

}  // namespace srb
