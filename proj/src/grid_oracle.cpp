#include <array>
#include <cmath>
#include <cstdio>
#include <utility>
#include <vector>

#include "srb/errors.hpp"
#include "srb/qfi.hpp"

namespace srb {

namespace {

constexpr double kSupportCut = 0.5e-11;  // eigenvalue support threshold
constexpr double kPairCut = 1e-11;       // eigenvalue-pair sum gate

struct RankOneTerm {
  double weight;
  Eigen::VectorXd w;  // V^T u for the rank-one direction u
};

struct GridWork {
  double h = 0;
  Eigen::VectorXd lambda;   // ascending, clamped to >= 0
  Eigen::MatrixXd vectors;  // eigenvector columns
  Eigen::Index first_support = 0;
  std::array<std::vector<RankOneTerm>, 3> terms;  // d_alpha rho as sum of rank-one pieces
  std::array<bool, 3> degenerate{};
};

Eigen::VectorXd kernel_vector(const PsfModel& psf, const Eigen::VectorXd& x, double center,
                              double root_h) {
  Eigen::VectorXd v(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) v(i) = psf.amplitude(x(i) - center) * root_h;
  return v;
}

GridWork build_grid_work(const PsfModel& psf, const SourceParams& params, const GridSpec& grid) {
  params.validate();
  if (grid.extent < 10) throw ConfigError("grid extent must be at least 10");
  if (grid.spacing > 0.02) throw ConfigError("grid spacing must be at most 0.02");
  if (params.s < 6e-3)
    throw ConfigError("grid oracle needs s >= 6e-3 to resolve finite differences");

  const double lo = params.minus_position() - grid.extent;
  const double hi = params.plus_position() + grid.extent;
  const auto n = static_cast<Eigen::Index>(std::ceil((hi - lo) / grid.spacing)) + 1;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = lo + h * static_cast<double>(i);
  const double rh = std::sqrt(h);

  const Eigen::VectorXd a = kernel_vector(psf, x, params.plus_position(), rh);
  const Eigen::VectorXd b = kernel_vector(psf, x, params.minus_position(), rh);
  const double mass = params.q * a.squaredNorm() + (1.0 - params.q) * b.squaredNorm();
  if (std::fabs(mass - 1.0) > 1e-10) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", mass - 1.0);
    throw GridError(std::string("discretized state mass defect ") + buf +
                    "; PSF tails leave the grid");
  }

  Eigen::MatrixXd rho = params.q * (a * a.transpose());
  rho.noalias() += (1.0 - params.q) * (b * b.transpose());

  GridWork work;
  work.h = h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rho);
  work.lambda = eig.eigenvalues().cwiseMax(0.0);
  work.vectors = eig.eigenvectors();
  work.first_support = n;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (work.lambda(i) > kSupportCut) {
      work.first_support = i;
      break;
    }
  }

  const std::array<double, 4> offset = {-2, -1, 1, 2};
  const std::array<double, 4> fd = {1, -8, 8, -1};
  auto add_terms = [&](int alpha, double step) {
    for (int k = 0; k < 4; ++k) {
      SourceParams p = params;
      if (alpha == 0) p.s0 += offset[k] * step;
      if (alpha == 1) p.s += offset[k] * step;
      if (alpha == 2) p.q += offset[k] * step;
      const double c = fd[k] / (12.0 * step);
      const Eigen::VectorXd ap = kernel_vector(psf, x, p.plus_position(), rh);
      const Eigen::VectorXd bp = kernel_vector(psf, x, p.minus_position(), rh);
      work.terms[static_cast<std::size_t>(alpha)].push_back(
          {c * p.q, work.vectors.transpose() * ap});
      work.terms[static_cast<std::size_t>(alpha)].push_back(
          {c * (1.0 - p.q), work.vectors.transpose() * bp});
    }
  };
  add_terms(0, 2e-3);
  add_terms(1, 2e-3);
  if (params.q <= 0 || params.q >= 1) {
    work.degenerate[2] = true;  // no brightness information at the boundary
  } else {
    add_terms(2, std::min({1e-3, params.q / 2.5, (1.0 - params.q) / 2.5}));
  }
  return work;
}

// Rows of C_alpha = V^T (d_alpha rho) V restricted to the support indices.
Eigen::MatrixXd support_rows(const GridWork& work, int alpha) {
  const Eigen::Index n = work.lambda.size();
  const Eigen::Index ns = n - work.first_support;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(ns, n);
  for (const RankOneTerm& term : work.terms[static_cast<std::size_t>(alpha)])
    for (Eigen::Index si = 0; si < ns; ++si)
      rows.row(si) += term.weight * term.w(work.first_support + si) * term.w.transpose();
  return rows;
}

}  // namespace

FisherMatrix qfim_grid_oracle(const PsfModel& psf, const SourceParams& params,
                              const GridSpec& grid) {
  const GridWork work = build_grid_work(psf, params, grid);
  const Eigen::Index n = work.lambda.size();
  const Eigen::Index ns = n - work.first_support;

  std::array<Eigen::MatrixXd, 3> rows;
  for (int alpha = 0; alpha < 3; ++alpha)
    rows[static_cast<std::size_t>(alpha)] = work.degenerate[static_cast<std::size_t>(alpha)]
                                                ? Eigen::MatrixXd::Zero(ns, n)
                                                : support_rows(work, alpha);

  FisherMatrix out;
  out.kind = FisherKind::Quantum;
  out.provenance = FisherProvenance::GridOracle;
  out.degenerate = work.degenerate;
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      double acc = 0;
      for (Eigen::Index si = 0; si < ns; ++si) {
        const Eigen::Index m = work.first_support + si;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double den = work.lambda(m) + work.lambda(k);
          if (den <= kPairCut) continue;
          double t = 2.0 * rows[static_cast<std::size_t>(a)](si, k) *
                     rows[static_cast<std::size_t>(b)](si, k) / den;
          if (k < work.first_support) t *= 2.0;  // mirrored ordered pair (k, m)
          acc += t;
        }
      }
      out.entries(a, b) = out.entries(b, a) = acc;
    }
  }
  return out;
}

Eigen::Matrix3d compatibility_grid_oracle(const PsfModel& psf, const SourceParams& params,
                                          const GridSpec& grid) {
  const GridWork work = build_grid_work(psf, params, grid);
  const Eigen::Index n = work.lambda.size();
  const Eigen::Index ns = n - work.first_support;

  // SLD rows in the eigenbasis: L_a(m, k) = 2 C_a(m, k) / (lambda_m + lambda_k).
  std::array<Eigen::MatrixXd, 3> lrows;
  for (int alpha = 0; alpha < 3; ++alpha) {
    lrows[static_cast<std::size_t>(alpha)] = work.degenerate[static_cast<std::size_t>(alpha)]
                                                 ? Eigen::MatrixXd::Zero(ns, n)
                                                 : support_rows(work, alpha);
    for (Eigen::Index si = 0; si < ns; ++si) {
      const Eigen::Index m = work.first_support + si;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double den = work.lambda(m) + work.lambda(k);
        lrows[static_cast<std::size_t>(alpha)](si, k) =
            den > kPairCut ? 2.0 * lrows[static_cast<std::size_t>(alpha)](si, k) / den : 0.0;
      }
    }
  }

  // Tr(rho [L_a, L_b]) summed over the support. All kernels here are real
  // symmetric, so each product pair cancels its mirror exactly; the vanishing
  // commutator trace is the mechanism that makes the bound saturable, and the
  // floating-point result is an exact zero rather than a small residual.
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      double acc = 0;
      for (Eigen::Index si = 0; si < ns; ++si) {
        const Eigen::Index m = work.first_support + si;
        acc += work.lambda(m) * (lrows[static_cast<std::size_t>(a)].row(si).dot(
                                     lrows[static_cast<std::size_t>(b)].row(si)) -
                                 lrows[static_cast<std::size_t>(b)].row(si).dot(
                                     lrows[static_cast<std::size_t>(a)].row(si)));
      }
      out(a, b) = acc;
    }
  }
  return out;
}

}  // namespace srb
