#include <cmath>
#include <vector>

#include "doctest.h"
#include "srb/cfi.hpp"
#include "srb/errors.hpp"
#include "srb/measure_opt.hpp"
#include "srb/measurement.hpp"
#include "srb/psf.hpp"
#include "srb/scene.hpp"

using namespace srb;

namespace {

const std::vector<double> kGridS{0.05, 0.2, 0.5, 1.0, 2.0, 4.0};
const std::vector<double> kGridQ{0.1, 0.3, 0.5, 0.7, 0.95};

FisherMatrix qfim_at(const PsfModel& psf, const SourceParams& p) {
  return qfim_closed_form(overlaps(psf, p.s), moments(psf), p);
}

}  // namespace

TEST_CASE("direct imaging separation information at large separation") {
  // Fully resolved sources: each photon localizes its source, so the
  // separation information approaches the single-source limit p2 = 1/(4 w^2).
  const PsfModel psf = PsfModel::gaussian(1.0);
  const FisherMatrix f = direct_imaging_cfi(psf, {0, 10, 0.5});
  CHECK(f.entries(1, 1) == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(f.kind == FisherKind::Classical);
}

TEST_CASE("direct imaging suffers the small-separation collapse") {
  const PsfModel psf = PsfModel::gaussian(1.0);
  const double f_small = direct_imaging_cfi(psf, {0, 1e-3, 0.5}).entries(1, 1);
  CHECK(f_small < 1e-6);
  const double f_mid = direct_imaging_cfi(psf, {0, 0.5, 0.5}).entries(1, 1);
  CHECK(f_mid > 1e-3);
  CHECK(f_mid < 0.25);
}

TEST_CASE("direct imaging respects the quantum matrix bound on the grid") {
  const PsfModel psf = PsfModel::gaussian(1.0);
  for (double s : kGridS)
    for (double q : kGridQ) {
      const SourceParams p{0, s, q};
      const FisherMatrix f = direct_imaging_cfi(psf, p);
      const FisherMatrix quantum = qfim_at(psf, p);
      CHECK(min_eigenvalue(quantum.entries - f.entries) >= -1e-9);
    }
}

TEST_CASE("mode measurements respect the quantum matrix bound on the grid") {
  const PsfModel psf = PsfModel::gaussian(1.0);
  const Measurement hermite = orthonormal_mode_basis(psf, 4);
  for (double s : kGridS)
    for (double q : kGridQ) {
      const SourceParams p{0, s, q};
      const FisherMatrix f = measurement_cfi(hermite, psf, p);
      const FisherMatrix quantum = qfim_at(psf, p);
      CHECK(min_eigenvalue(quantum.entries - f.entries) >= -1e-9);
    }
}

TEST_CASE("two-mode sorting recovers the full separation information at small s") {
  // The (Psi, Psi') projector pair with a bucket reaches F_ss -> p2 as s -> 0,
  // where direct imaging loses everything; at larger s it trails the quantum
  // value but stays within a few percent out to s ~ 2 widths.
  const PsfModel psf = PsfModel::gaussian(1.0);
  const Measurement two = orthonormal_mode_basis(psf, 2);
  auto f_ss = [&](double s) { return measurement_cfi(two, psf, {0, s, 0.5}).entries(1, 1); };
  CHECK(f_ss(0.01) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(f_ss(0.1) == doctest::Approx(0.25).epsilon(1e-4));
  for (double s : {0.5, 1.0, 2.0}) {
    CHECK(f_ss(s) < 0.25);
    CHECK(f_ss(s) > 0.24);
  }
  // Hand expansion of the three outcome probabilities: with t = s^2/16,
  //   F_ss = (s^2/64) e^-t [1 + (1-t)^2/t + t^2 e^-t / (1 - (1+t) e^-t)],
  // cross-checked by finite differences on numerically integrated overlaps.
  CHECK(f_ss(1.0) == doctest::Approx(0.2498405919).epsilon(1e-6));
  CHECK(f_ss(2.0) == doctest::Approx(0.2476032640).epsilon(1e-6));
}

TEST_CASE("bucketless family loses the complement information") {
  const PsfModel psf = PsfModel::gaussian(1.0);
  Measurement meas = orthonormal_mode_basis(psf, 2);
  const SourceParams p{0, 0.8, 0.35};
  const FisherMatrix with_bucket = measurement_cfi(meas, psf, p);
  meas.has_bucket = false;
  const FisherMatrix without = measurement_cfi(meas, psf, p);
  const FisherMatrix quantum = qfim_at(psf, p);
  CHECK(min_eigenvalue(with_bucket.entries - without.entries) >= -1e-9);
  CHECK(min_eigenvalue(quantum.entries - with_bucket.entries) >= -1e-9);
}

TEST_CASE("overlap algebra matches the assembled measurement") {
  const PsfModel psf = PsfModel::gaussian(1.0);
  const Measurement meas = orthonormal_mode_basis(psf, 3);
  const SourceParams p{0.2, 1.1, 0.45};
  const ModeSourceOverlap mo = mode_source_overlap(meas, psf, p);
  const FisherMatrix direct_path = measurement_cfi(meas, psf, p);
  const FisherMatrix algebra_path = overlap_cfi(mo, p.q, meas.has_bucket);
  CHECK((direct_path.entries - algebra_path.entries).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("probability overflow is rejected") {
  ModeSourceOverlap mo;
  mo.c_plus = Eigen::VectorXd::Constant(3, 0.8);
  mo.c_minus = Eigen::VectorXd::Constant(3, 0.8);
  mo.g_plus = Eigen::VectorXd::Zero(3);
  mo.g_minus = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(overlap_cfi(mo, 0.5, true), NumericalError);
}

TEST_CASE("centroid-only measurement leaves zero rows flagged") {
  // A single even mode at the centroid is blind to s0 at q = 1/2 by parity.
  const PsfModel psf = PsfModel::gaussian(1.0);
  const Measurement one = orthonormal_mode_basis(psf, 1);
  const FisherMatrix f = measurement_cfi(one, psf, {0, 1, 0.5});
  CHECK(f.degenerate[0]);
  CHECK(f.entries(0, 0) == 0.0);
}
