#include "srb/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "srb/cfi.hpp"
#include "srb/errors.hpp"
#include "srb/nelder_mead.hpp"
#include "srb/rng.hpp"

namespace srb {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

SourceParams clip_to_box(const SourceParams& p, const EstimationBox& box) {
  return {clip(p.s0, box.s0_lo, box.s0_hi), clip(p.s, box.s_lo, box.s_hi),
          clip(p.q, box.q_lo, box.q_hi)};
}

void check_box(const EstimationBox& box) {
  if (!(box.s0_hi > box.s0_lo) || !(box.s_hi > box.s_lo) || !(box.q_hi > box.q_lo) ||
      box.s_lo < 0 || box.q_lo < 0 || box.q_hi > 1)
    throw ConfigError("invalid estimation box");
}

// Position-data log-likelihood. The Gaussian kernel gets a log-domain fast
// path (one exp per sample); other kernels evaluate the intensity directly.
class PositionLogLik {
 public:
  PositionLogLik(const PsfModel& psf, std::span<const double> samples)
      : psf_(psf), samples_(samples), gaussian_(psf.kind() == PsfKind::AnalyticGaussian) {
    const double sigma = psf.width();
    inv_two_var_ = 0.5 / (sigma * sigma);
    log_norm_ = -std::log(sigma * std::sqrt(2.0 * M_PI));
  }

  double operator()(const SourceParams& p) const {
    if (gaussian_) {
      const double a = p.plus_position(), b = p.minus_position();
      const double lq = std::log(p.q), l1q = std::log(1.0 - p.q);
      double acc = 0;
      for (const double x : samples_) {
        const double da = x - a, db = x - b;
        const double la = lq - da * da * inv_two_var_;
        const double lb = l1q - db * db * inv_two_var_;
        const double hi = std::max(la, lb), lo = std::min(la, lb);
        acc += hi + std::log1p(std::exp(lo - hi));
      }
      return acc + static_cast<double>(samples_.size()) * log_norm_;
    }
    const IntensityProfile profile = intensity_profile(psf_, p);
    double acc = 0;
    for (const double x : samples_) acc += std::log(std::max(profile(x), 1e-300));
    return acc;
  }

 private:
  const PsfModel& psf_;
  std::span<const double> samples_;
  bool gaussian_;
  double inv_two_var_ = 0, log_norm_ = 0;
};

std::array<bool, 3> boundary_flags(const SourceParams& p, const EstimationBox& box) {
  auto near = [](double v, double bound, double range) {
    return std::fabs(v - bound) < 1e-6 * range;
  };
  std::array<bool, 3> flags{};
  flags[0] = near(p.s0, box.s0_lo, box.s0_hi - box.s0_lo) ||
             near(p.s0, box.s0_hi, box.s0_hi - box.s0_lo);
  flags[1] =
      near(p.s, box.s_lo, box.s_hi - box.s_lo) || near(p.s, box.s_hi, box.s_hi - box.s_lo);
  flags[2] =
      near(p.q, box.q_lo, box.q_hi - box.q_lo) || near(p.q, box.q_hi, box.q_hi - box.q_lo);
  return flags;
}

double component_of(const SourceParams& p, int i) { return i == 0 ? p.s0 : i == 1 ? p.s : p.q; }

void set_component(SourceParams& p, int i, double v) {
  (i == 0 ? p.s0 : i == 1 ? p.s : p.q) = v;
}

// Shared multistart driver: maximize `loglik` over the free components from
// init plus jittered starts; opt.fixed components stay at the initial point.
template <class LL>
MleResult maximize(const LL& loglik, const SourceParams& init, const PsfModel& psf,
                   const MleOptions& opt, double penalty_weight) {
  const EstimationBox& box = opt.box;
  std::vector<int> free_dims;
  for (int i = 0; i < 3; ++i)
    if (!opt.fixed[static_cast<std::size_t>(i)]) free_dims.push_back(i);

  MleResult best;
  if (free_dims.empty()) {
    best.estimate = init;
    best.loglik = loglik(init);
    return best;
  }

  const auto dim = static_cast<Eigen::Index>(free_dims.size());
  auto embed = [&](const Eigen::VectorXd& x) {
    SourceParams p = init;
    for (Eigen::Index k = 0; k < dim; ++k)
      set_component(p, free_dims[static_cast<std::size_t>(k)], x(k));
    return p;
  };
  auto negative = [&](const Eigen::VectorXd& x) {
    const SourceParams raw = embed(x);
    const SourceParams c = clip_to_box(raw, box);
    const double d0 = raw.s0 - c.s0, d1 = raw.s - c.s, d2 = raw.q - c.q;
    return -loglik(c) + penalty_weight * (d0 * d0 + d1 * d1 + d2 * d2);
  };

  NelderMeadOptions nm_opt;
  nm_opt.max_iter = opt.max_iter;
  nm_opt.f_tol = 1e-9;
  const double w = psf.width();
  const double full_step[3] = {0.1 * w, 0.1 * w, 0.05};
  const double jitter_sd[3] = {0.05 * w, 0.05 * w, 0.02};
  Eigen::VectorXd step(dim);
  for (Eigen::Index k = 0; k < dim; ++k)
    step(k) = full_step[free_dims[static_cast<std::size_t>(k)]];

  double best_neg = std::numeric_limits<double>::infinity();
  for (int r = 0; r <= opt.restarts; ++r) {
    SourceParams start = init;
    if (r > 0) {
      auto engine = make_engine(opt.seed, static_cast<std::uint64_t>(r));
      for (const int i : free_dims) {
        std::normal_distribution<double> jit(0.0, jitter_sd[i]);
        set_component(start, i, component_of(start, i) + jit(engine));
      }
      start = clip_to_box(start, box);
    }
    Eigen::VectorXd x0(dim);
    for (Eigen::Index k = 0; k < dim; ++k)
      x0(k) = component_of(start, free_dims[static_cast<std::size_t>(k)]);
    const NelderMeadResult nm = nelder_mead_min(negative, x0, step, nm_opt);
    if (nm.value < best_neg) {
      best_neg = nm.value;
      best.estimate = clip_to_box(embed(nm.x), box);
      best.improved = r > 0;
    }
  }
  best.loglik = loglik(best.estimate);
  best.at_boundary = boundary_flags(best.estimate, box);
  for (int i = 0; i < 3; ++i)
    if (opt.fixed[static_cast<std::size_t>(i)]) best.at_boundary[static_cast<std::size_t>(i)] = false;
  return best;
}

}  // namespace

SourceParams moment_init(std::span<const double> samples, const PsfModel& psf,
                         const EstimationBox& box) {
  if (samples.size() < 2) throw ConfigError("moment initializer needs at least two samples");
  check_box(box);
  const auto n = static_cast<double>(samples.size());
  double m1 = 0;
  for (const double x : samples) m1 += x;
  m1 /= n;
  double m2 = 0, m3 = 0;
  for (const double x : samples) {
    const double d = x - m1;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;

  // Deconvolve the kernel: the two-point mixture has variance A = q(1-q) s^2
  // and third central moment B = q(1-q)(1-2q) s^3.
  const double width = psf.width();
  const double a = m2 - width * width;
  SourceParams init{m1, 0, 0.5};
  if (a > 0) {
    if (std::fabs(m3) < 1e-12 * std::pow(a, 1.5)) {
      init.s = 2.0 * std::sqrt(a);
    } else {
      const double t2 = m3 * m3 / (4.0 * a * a * a + m3 * m3);
      const double t = std::copysign(std::sqrt(t2), m3);
      init.s = m3 / (a * t);
      init.q = 0.5 * (1.0 - t);
      init.s0 = m1 - (init.q - 0.5) * init.s;
    }
  }
  return clip_to_box(init, box);
}

MleResult mle(std::span<const double> samples, const PsfModel& psf, const MleOptions& opt) {
  if (samples.empty()) throw ConfigError("estimator needs at least one sample");
  check_box(opt.box);
  const bool any_fixed = opt.fixed[0] || opt.fixed[1] || opt.fixed[2];
  if (any_fixed && !opt.init)
    throw ConfigError("pinned components need an explicit initial point");
  const SourceParams init =
      opt.init ? clip_to_box(*opt.init, opt.box) : moment_init(samples, psf, opt.box);
  const PositionLogLik loglik(psf, samples);
  const double weight = 1e3 * static_cast<double>(samples.size());
  return maximize(loglik, init, psf, opt, weight);
}

MleResult mle(std::span<const std::int64_t> counts, const Measurement& meas, const PsfModel& psf,
              const MleOptions& opt) {
  const std::size_t expected = meas.modes.size() + (meas.has_bucket ? 1 : 0);
  if (counts.size() != expected)
    throw ConfigError("count vector length does not match the measurement outcomes");
  if (!opt.init) throw ConfigError("count-data estimation needs an explicit initial point");
  check_box(opt.box);
  std::int64_t total = 0;
  for (const std::int64_t c : counts) {
    if (c < 0) throw ConfigError("negative outcome count");
    total += c;
  }
  if (total == 0) throw ConfigError("estimator needs at least one recorded photon");

  auto loglik = [&](const SourceParams& p) {
    const ModeSourceOverlap mo = mode_source_overlap(meas, psf, p);
    double acc = 0, psum = 0;
    for (Eigen::Index j = 0; j < mo.c_plus.size(); ++j) {
      const double cp = mo.c_plus(j), cm = mo.c_minus(j);
      const double prob = p.q * cp * cp + (1.0 - p.q) * cm * cm;
      psum += prob;
      const auto c = counts[static_cast<std::size_t>(j)];
      if (c > 0) acc += static_cast<double>(c) * std::log(std::max(prob, 1e-300));
    }
    if (meas.has_bucket) {
      const auto c = counts[counts.size() - 1];
      if (c > 0)
        acc += static_cast<double>(c) * std::log(std::max(1.0 - psum, 1e-300));
    }
    return acc;
  };
  const SourceParams init = clip_to_box(*opt.init, opt.box);
  return maximize(loglik, init, psf, opt, 1e3 * static_cast<double>(total));
}

EstimationRun crlb_saturation_study(const PsfModel& psf, const StudyConfig& config) {
  config.truth.validate();
  if (config.photons < 10000) throw ConfigError("study needs at least 1e4 photons per trial");
  if (config.trials < 100) throw ConfigError("study needs at least 100 trials");
  const bool modes = config.kind == MeasurementSpec::Kind::Modes;
  if (modes && !config.modes) throw ConfigError("mode study needs a measurement");
  if (modes) config.modes->validate(psf);
  const bool any_fixed = config.fixed[0] || config.fixed[1] || config.fixed[2];
  if (config.fixed[0] && config.fixed[1] && config.fixed[2])
    throw ConfigError("study needs at least one free component");

  EstimationRun run;
  run.config = config;
  if (any_fixed) {
    // Invert only the free block: pinned components are known, not nuisance.
    FisherMatrix f =
        modes ? measurement_cfi(*config.modes, psf, config.truth)
              : direct_imaging_cfi(psf, config.truth);
    for (int i = 0; i < 3; ++i)
      if (config.fixed[static_cast<std::size_t>(i)]) f.degenerate[static_cast<std::size_t>(i)] = true;
    run.crlb = precisions(f);
  } else {
    run.crlb = modes ? precisions(measurement_cfi(*config.modes, psf, config.truth))
                     : direct_imaging_precisions(psf, config.truth);
  }
  for (int i = 0; i < 3; ++i)
    run.crlb_variance(i) =
        run.crlb.component(i) > 0
            ? 1.0 / (static_cast<double>(config.photons) * run.crlb.component(i))
            : 0.0;

  std::vector<double> outcome_probs;
  if (modes) {
    const ModeSourceOverlap mo = mode_source_overlap(*config.modes, psf, config.truth);
    double psum = 0;
    for (Eigen::Index j = 0; j < mo.c_plus.size(); ++j) {
      const double cp = mo.c_plus(j), cm = mo.c_minus(j);
      const double prob =
          config.truth.q * cp * cp + (1.0 - config.truth.q) * cm * cm;
      outcome_probs.push_back(std::max(prob, 0.0));
      psum += prob;
    }
    if (config.modes->has_bucket) outcome_probs.push_back(std::max(1.0 - psum, 0.0));
  }
  const IntensityProfile profile = intensity_profile(psf, config.truth);

  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(config.seed, t);
    MleOptions opt;
    opt.seed = trial_seed;
    opt.restarts = 2;
    opt.fixed = config.fixed;
    MleResult res;
    if (modes) {
      auto engine = make_engine(trial_seed, 0);
      std::discrete_distribution<std::size_t> outcome(outcome_probs.begin(),
                                                      outcome_probs.end());
      std::vector<std::int64_t> counts(outcome_probs.size(), 0);
      for (std::size_t i = 0; i < config.photons; ++i) ++counts[outcome(engine)];
      opt.init = config.truth;
      res = mle(counts, *config.modes, psf, opt);
    } else {
      if (any_fixed) opt.init = config.truth;
      const std::vector<double> samples = sample_photons(profile, config.photons, trial_seed);
      res = mle(samples, psf, opt);
    }
    run.estimates.push_back(res.estimate);
    if (res.at_boundary[0] || res.at_boundary[1] || res.at_boundary[2]) ++run.boundary_hits;
  }

  const auto trials = static_cast<double>(config.trials);
  for (const SourceParams& e : run.estimates)
    run.mean += Eigen::Vector3d(e.s0, e.s, e.q);
  run.mean /= trials;
  for (const SourceParams& e : run.estimates) {
    const Eigen::Vector3d d = Eigen::Vector3d(e.s0, e.s, e.q) - run.mean;
    run.covariance += d * d.transpose();
  }
  run.covariance /= trials - 1.0;
  for (int i = 0; i < 3; ++i)
    run.ratio(i) = run.crlb_variance(i) > 0 ? run.covariance(i, i) / run.crlb_variance(i) : 0.0;
  return run;
}

}  // namespace srb
