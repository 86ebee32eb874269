#include "ogpit/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ogpit/parallel.hpp"

namespace ogpit::tr {

namespace {

constexpr double kModelDedupTol = 1e-9;

opt::BoxRegion unit_box(int d) {
  opt::BoxRegion b;
  b.lower = Vector::Constant(d, -1.0);
  b.upper = Vector::Constant(d, 1.0);
  return b;
}

int resolved_neighbor_count(const TRConfig& cfg, int dim, int archive_size) {
  const int base = cfg.n_b > 0 ? cfg.n_b : std::max(10 * (dim + 1), 50);
  return std::min(archive_size, base);
}

double round_half_away(double v) {
  return v >= 0.0 ? std::floor(v + 0.5) : std::ceil(v - 0.5);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config resolution

TRConfig TRConfig::resolved(const prob::Problem& problem) const {
  TRConfig c = *this;
  const int d = problem.dim;
  if (!(c.gamma_dec > 0.0 && c.gamma_dec < 1.0))
    throw std::invalid_argument("TRConfig: gamma_dec must be in (0,1)");
  if (c.gamma_inc <= 0.0) c.gamma_inc = 1.0 / c.gamma_dec;
  if (!(c.gamma_inc > 1.0)) throw std::invalid_argument("TRConfig: gamma_inc must exceed 1");
  if (!(c.eta > 0.0 && c.eta < 1.0)) throw std::invalid_argument("TRConfig: eta must be in (0,1)");
  if (!(c.beta > 0.0 && c.beta < 1.0)) throw std::invalid_argument("TRConfig: beta must be in (0,1)");
  if (!(c.T_a > 0.0 && c.T_a < 1.0)) throw std::invalid_argument("TRConfig: T_a must be in (0,1)");
  if (!(c.var_ratio > 1.0)) throw std::invalid_argument("TRConfig: var_ratio must exceed 1");
  if (c.imse_ratio < 0.0) throw std::invalid_argument("TRConfig: imse_ratio must be nonnegative");
  if (c.p_max < 1) throw std::invalid_argument("TRConfig: p_max must be positive");
  if (c.acquisition.fixed_reps < 0 || c.acquisition.fixed_reps > c.p_max)
    throw std::invalid_argument("TRConfig: fixed replicate count outside [1, p_max]");
  if (c.N0 <= 0) c.N0 = std::max(d + 1, std::min(10, 2 * d));
  if (c.N_max <= 0) throw std::invalid_argument("TRConfig: N_max must be set");
  if (c.N_max < c.N0) throw std::invalid_argument("TRConfig: budget smaller than initial design");
  const double halfwidth = (problem.bounds.upper - problem.bounds.lower).mean() / 2.0;
  if (c.delta0 <= 0.0) c.delta0 = 0.2 * halfwidth;
  if (c.delta_min <= 0.0) c.delta_min = 1e-6 * c.delta0;
  if (!(c.delta_min < c.delta0))
    throw std::invalid_argument("TRConfig: delta_min must be below delta0");
  if (c.candidate_count <= 0) c.candidate_count = std::min(100 * d, 5000);
  if (c.refit_period < 1) throw std::invalid_argument("TRConfig: refit_period must be positive");
  return c;
}

// ---------------------------------------------------------------------------
// LocalModel maps

Vector LocalModel::to_model(const Vector& x_domain) const {
  Vector z(x_domain.size());
  for (int j = 0; j < z.size(); ++j) {
    const double mid = 0.5 * (box_lo[j] + box_hi[j]);
    const double hw = std::max(0.5 * (box_hi[j] - box_lo[j]), 1e-12);
    z[j] = (x_domain[j] - mid) / hw;
  }
  return z;
}

Vector LocalModel::to_domain(const Vector& x_model) const {
  Vector x(x_model.size());
  for (int j = 0; j < x.size(); ++j) {
    const double mid = 0.5 * (box_lo[j] + box_hi[j]);
    const double hw = std::max(0.5 * (box_hi[j] - box_lo[j]), 1e-12);
    x[j] = mid + x_model[j] * hw;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Acceptance ratio

RhoResult acceptance_ratio_from_means(double mean_center, double mean_new,
                                      double loo_center, double loo_new) {
  const double den = loo_center - loo_new;
  if (std::abs(den) < 1e-12) return {0.0, false, true};
  const double num = mean_center - mean_new;
  if (den > 0.0) return {num / den, false, false};
  return {(num - den) / std::abs(den), true, false};
}

RhoResult acceptance_ratio(const gp::GPModel& updated, int center_index,
                           int new_index) {
  const Vector& xc = updated.designs().location(center_index);
  const Vector& xn = updated.designs().location(new_index);
  const double mc = updated.predict(xc).mean;
  const double mn = updated.predict(xn).mean;
  const double lc = updated.loo(center_index).mean;
  const double ln = updated.loo(new_index).mean;
  return acceptance_ratio_from_means(mc, mn, lc, ln);
}

// ---------------------------------------------------------------------------
// Model construction

namespace {

// Builds the standardized local model from the n_b nearest archive designs.
// `fit_mode`: 0 reuse stored hyperparameters, 1 warm single-start refit,
// 2 full multistart refit.
LocalModel assemble_local_model(TrustRegionState& state, const Vector& box_lo,
                                const Vector& box_hi, int fit_mode) {
  const TRConfig& cfg = state.config;
  const int d = state.archive.dim();
  const int n_archive = state.archive.size();
  if (n_archive < 2)
    throw std::invalid_argument("build_local_model: needs at least two designs");

  const int n_b = resolved_neighbor_count(cfg, d, n_archive);
  std::vector<int> order(n_archive);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> dist(n_archive);
  for (int i = 0; i < n_archive; ++i)
    dist[i] = (state.archive.location(i) - state.center).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[a] < dist[b]; });
  order.resize(n_b);

  LocalModel local;
  local.box_lo = box_lo;
  local.box_hi = box_hi;

  double mean = 0.0;
  for (int i : order) mean += state.archive.agg_mean(i);
  mean /= n_b;
  double var = 0.0;
  for (int i : order) {
    const double dme = state.archive.agg_mean(i) - mean;
    var += dme * dme;
  }
  var /= std::max(1, n_b - 1);
  local.out_mean = mean;
  local.out_sd = std::max(std::sqrt(var), 1e-12);
  const double sd2 = local.out_sd * local.out_sd;

  gp::DesignSet designs(d, kModelDedupTol);
  for (int i : order) {
    designs.add_aggregate(local.to_model(state.archive.location(i)),
                          state.archive.rep_count(i),
                          local.standardize(state.archive.agg_mean(i)),
                          state.archive.sq_dev_sum(i) / sd2);
  }

  // Noise model in standardized units.
  gp::NoiseModel noise;
  auto known_std = [&]() {
    auto fn = cfg.known_noise;
    const LocalModel maps = local;  // copy of the affine maps only
    return gp::NoiseModel::known([fn, maps, sd2](const Vector& z) {
      return fn(maps.to_domain(z)) / sd2;
    });
  };

  gp::FitBounds bounds;
  const auto to_model_units = [&](const gp::KernelSpec& k_dom, double noise_dom) {
    gp::KernelSpec k;
    k.process_var = std::clamp(k_dom.process_var / sd2, bounds.process_var_lo,
                               bounds.process_var_hi);
    k.lengthscales.resize(d);
    for (int j = 0; j < d; ++j) {
      const double hw = std::max(0.5 * (box_hi[j] - box_lo[j]), 1e-12);
      k.lengthscales[j] =
          std::clamp(k_dom.lengthscales[j] / hw, bounds.lengthscale_lo,
                     bounds.lengthscale_hi);
    }
    return std::pair<gp::KernelSpec, double>(k, noise_dom / sd2);
  };

  if (fit_mode == 0 && state.have_hypers) {
    auto [k, r2] = to_model_units(state.hypers_domain, state.const_noise_domain);
    if (cfg.noise_kind == gp::NoiseModel::Kind::known_function) {
      noise = known_std();
    } else if (cfg.noise_kind == gp::NoiseModel::Kind::empirical_pooled) {
      const double pooled = designs.pooled_variance(3);
      noise = pooled >= 0.0
                  ? gp::NoiseModel::constant(pooled, gp::NoiseModel::Kind::empirical_pooled)
                  : gp::NoiseModel::constant(r2, gp::NoiseModel::Kind::constant_mle);
    } else {
      noise = gp::NoiseModel::constant(r2, gp::NoiseModel::Kind::constant_mle);
    }
    local.model = gp::GPModel(std::move(designs), k, noise);
    return local;
  }

  // Refit on the standardized data.
  Rng fit_rng(hash64({state.seed_base, 0x66697475ULL, static_cast<std::uint64_t>(state.iteration)}));
  const int restarts = fit_mode == 2 ? cfg.mle_restarts : 1;
  gp::KernelSpec warm_model_units;
  const gp::KernelSpec* warm = nullptr;
  gp::NoiseModel warm_noise_model;
  const gp::NoiseModel* warm_noise = nullptr;
  if (state.have_hypers) {
    auto [k, r2] = to_model_units(state.hypers_domain, state.const_noise_domain);
    warm_model_units = k;
    warm = &warm_model_units;
    warm_noise_model = gp::NoiseModel::constant(std::max(r2, bounds.noise_lo));
    warm_noise = &warm_noise_model;
  }
  std::function<double(const Vector&)> known_fn;
  if (cfg.noise_kind == gp::NoiseModel::Kind::known_function) {
    auto fn = cfg.known_noise;
    const LocalModel maps = local;
    known_fn = [fn, maps](const Vector& z) { return fn(maps.to_domain(z)); };
  }
  const gp::FitResult fit = gp::fit_hyperparameters(
      designs, cfg.noise_kind, bounds, restarts, fit_rng, warm, warm_noise, known_fn);

  // Store back in domain units for reuse under future scalings.
  state.hypers_domain.process_var = fit.kernel.process_var * sd2;
  state.hypers_domain.lengthscales.resize(d);
  for (int j = 0; j < d; ++j) {
    const double hw = std::max(0.5 * (box_hi[j] - box_lo[j]), 1e-12);
    state.hypers_domain.lengthscales[j] = fit.kernel.lengthscales[j] * hw;
  }
  if (fit.noise.kind() != gp::NoiseModel::Kind::known_function)
    state.const_noise_domain = fit.noise.value() * sd2;
  state.have_hypers = true;

  noise = cfg.noise_kind == gp::NoiseModel::Kind::known_function ? known_std() : fit.noise;
  local.model = gp::GPModel(std::move(designs), fit.kernel, noise);
  return local;
}

}  // namespace

LocalModel build_local_model(TrustRegionState& state) {
  const TRConfig& cfg = state.config;
  const opt::BoxRegion box =
      opt::BoxRegion::trust_region(state.center, state.radius, state.problem->bounds);

  int fit_mode = 0;
  if (!state.have_hypers ||
      state.iteration - state.last_full_fit_iteration >= cfg.refit_period) {
    fit_mode = 2;
    state.last_full_fit_iteration = state.iteration;
    state.center_moved_since_fit = false;
  } else if (state.center_moved_since_fit) {
    fit_mode = 1;
    state.center_moved_since_fit = false;
  }
  state.local = assemble_local_model(state, box.lower, box.upper, fit_mode);
  return state.local;
}

// ---------------------------------------------------------------------------
// Initialization

TrustRegionState initialize(const prob::Problem& problem, const TRConfig& config,
                            Rng& rng, const Vector* x0) {
  TrustRegionState state;
  state.problem = &problem;
  state.config = config.resolved(problem);
  const TRConfig& cfg = state.config;
  const int d = problem.dim;
  state.archive = gp::DesignSet(
      d, 1e-9 * std::max(1.0, (problem.bounds.upper - problem.bounds.lower).minCoeff()));
  state.domain_halfwidth = (problem.bounds.upper - problem.bounds.lower).mean() / 2.0;
  state.seed_base = rng.next_u64();

  const auto evaluate_once = [&](const Vector& x) {
    const prob::EvaluationReceipt receipt = prob::evaluate(problem, x, 1, cfg.cost, rng);
    state.archive.add_samples(x, receipt.samples);
    state.eval_count += 1;
    state.cost_spent += receipt.cost_charged;
  };

  for (const Vector& u : opt::lhs_maximin(cfg.N0, d, rng)) {
    Vector x = problem.bounds.lower.array() +
               u.array() * (problem.bounds.upper - problem.bounds.lower).array();
    evaluate_once(x);
  }
  if (x0) {
    if (!problem.bounds.contains(*x0, 1e-9))
      throw std::invalid_argument("initialize: x0 outside problem bounds");
    if (state.archive.find(*x0) < 0) evaluate_once(*x0);
  }

  // Initial model over the whole domain to pick the center.
  state.center = 0.5 * (problem.bounds.lower + problem.bounds.upper);
  state.radius = (problem.bounds.upper - problem.bounds.lower).maxCoeff();
  state.iteration = 0;
  build_local_model(state);

  if (x0) {
    state.center = *x0;
  } else {
    int best = 0;
    double best_mean = std::numeric_limits<double>::infinity();
    for (int i = 0; i < state.archive.size(); ++i) {
      const double m =
          state.local.model.predict(state.local.to_model(state.archive.location(i))).mean;
      if (m < best_mean) {
        best_mean = m;
        best = i;
      }
    }
    state.center = state.archive.location(best);
  }
  state.radius = cfg.delta0;

  TraceRow row;
  row.iteration = 0;
  row.n_evals = state.eval_count;
  row.cost_spent = state.cost_spent;
  row.center = state.center;
  row.center_model_value = state.local.destandardize(
      state.local.model.predict(state.local.to_model(state.center)).mean);
  row.radius = state.radius;
  row.reps = state.eval_count;
  state.trace.push_back(std::move(row));
  return state;
}

// ---------------------------------------------------------------------------
// Poisedness augmentation

namespace {

int designs_in_box(const gp::DesignSet& archive, const opt::BoxRegion& box) {
  int count = 0;
  for (int i = 0; i < archive.size(); ++i) {
    if (box.contains(archive.location(i), 1e-12)) ++count;
  }
  return count;
}

bool budget_left(const TrustRegionState& state) {
  return state.eval_count < state.config.N_max &&
         state.cost_spent < state.config.max_cost;
}

}  // namespace

void augment_poisedness(TrustRegionState& state, Rng& rng) {
  const TRConfig& cfg = state.config;
  const int d = state.archive.dim();
  const opt::BoxRegion box =
      opt::BoxRegion::trust_region(state.center, state.radius, state.problem->bounds);

  while (designs_in_box(state.archive, box) < d + 1) {
    if (!budget_left(state)) {
      state.finished = true;
      state.termination = state.eval_count >= cfg.N_max ? "budget" : "cost";
      return;
    }
    const Vector x = opt::uniform_candidates(box, 1, rng)[0];
    int reps = 1;
    if (cfg.acquisition.fixed_reps > 0) {
      reps = cfg.acquisition.fixed_reps;
    } else {
      reps = acq::p_adaptive(state.local.model, state.local.to_model(x), cfg.T_a, cfg.p_max);
    }
    const prob::EvaluationReceipt receipt =
        prob::evaluate(*state.problem, x, reps, cfg.cost, rng);
    state.archive.add_samples(x, receipt.samples);
    state.eval_count += reps;
    state.cost_spent += receipt.cost_charged;

    // Keep the working model aware of the new point for the next p_adaptive.
    std::vector<double> std_samples(receipt.samples.size());
    for (std::size_t k = 0; k < receipt.samples.size(); ++k)
      std_samples[k] = state.local.standardize(receipt.samples[k]);
    state.local.model =
        state.local.model.with_samples(state.local.to_model(x), std_samples);
  }
}

// ---------------------------------------------------------------------------
// Candidate selection

namespace {

struct LocalDesignSummary {
  int best_index = 0;       // design with minimal predictive mean
  double best_mean = 0.0;   // threshold value
};

LocalDesignSummary summarize_designs(const gp::GPModel& model) {
  LocalDesignSummary s;
  s.best_mean = std::numeric_limits<double>::infinity();
  for (int i = 0; i < model.size(); ++i) {
    const double m = model.predict(model.designs().location(i)).mean;
    if (m < s.best_mean) {
      s.best_mean = m;
      s.best_index = i;
    }
  }
  return s;
}

// Scan-then-refine maximization of a smooth criterion over the model box.
opt::SearchResult scan_and_refine(const std::function<double(const Vector&)>& objective,
                                  const opt::BoxRegion& box, int count, Rng& rng) {
  const std::vector<Vector> candidates = opt::uniform_candidates(box, count, rng);
  std::vector<double> scores(candidates.size());
  par::map(static_cast<std::ptrdiff_t>(candidates.size()),
           [&](std::ptrdiff_t i) { scores[i] = objective(candidates[i]); });
  int best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  opt::LbfgsOptions opts;
  opts.max_iterations = 60;
  return opt::local_refine(objective, candidates[best], box, opts);
}

}  // namespace

CandidateChoice select_candidate(TrustRegionState& state, Rng& rng) {
  const TRConfig& cfg = state.config;
  const gp::GPModel& model = state.local.model;
  const int d = model.dim();
  const opt::BoxRegion box = unit_box(d);
  const LocalDesignSummary summary = summarize_designs(model);
  const double threshold = summary.best_mean;
  const Vector center_model = state.local.to_model(state.center);
  const Vector star_model = model.designs().location(summary.best_index);
  const std::uint64_t stream_seed = rng.next_u64();

  CandidateChoice choice;
  if (cfg.acquisition.kind == AcquisitionKind::ei) {
    const auto objective = [&](const Vector& z) {
      const gp::Prediction p = model.predict(z);
      return acq::ei(p.mean, std::sqrt(std::max(0.0, p.var_obs)), threshold);
    };
    const opt::SearchResult res = scan_and_refine(objective, box, cfg.candidate_count, rng);
    choice.point_domain = state.local.to_domain(res.point);
    choice.reps = cfg.acquisition.fixed_reps > 0
                      ? cfg.acquisition.fixed_reps
                      : acq::p_adaptive(model, res.point, cfg.T_a, cfg.p_max);
  } else if (cfg.acquisition.kind == AcquisitionKind::qerci_v1) {
    const acq::McStream stream(stream_seed, 3);
    const auto objective = [&](const Vector& z) {
      return acq::qerci_v1(model, z, center_model, star_model, cfg.T_a, cfg.p_max,
                           threshold, stream);
    };
    const opt::SearchResult res = scan_and_refine(objective, box, cfg.candidate_count, rng);
    choice.point_domain = state.local.to_domain(res.point);
    choice.reps = acq::p_adaptive(model, res.point, cfg.T_a, cfg.p_max);
  } else {
    // Joint search over two points and their (continuous) replicate counts.
    const acq::McStream stream(stream_seed, 4);
    opt::BoxRegion joint;
    joint.lower = Vector::Zero(2 * d + 2);
    joint.upper = Vector::Zero(2 * d + 2);
    joint.lower.segment(0, d).setConstant(-1.0);
    joint.upper.segment(0, d).setConstant(1.0);
    joint.lower[d] = 0.0;
    joint.upper[d] = cfg.p_max;
    joint.lower.segment(d + 1, d).setConstant(-1.0);
    joint.upper.segment(d + 1, d).setConstant(1.0);
    joint.lower[2 * d + 1] = 0.0;
    joint.upper[2 * d + 1] = cfg.p_max;

    const auto split = [&](const Vector& v) {
      Vector x = v.segment(0, d);
      Vector x2 = v.segment(d + 1, d);
      double a = v[d];
      double a2 = v[2 * d + 1];
      const double total = a + a2;
      if (total > cfg.p_max) {
        a *= cfg.p_max / total;
        a2 *= cfg.p_max / total;
      }
      return std::tuple<Vector, double, Vector, double>(std::move(x), a, std::move(x2), a2);
    };
    const auto objective = [&](const Vector& v) {
      auto [x, a, x2, a2] = split(v);
      if (a + a2 < 1.0) return 0.0;
      return acq::qerci_v2(model, x, a, x2, a2, cfg.cost, center_model, star_model,
                           threshold, stream);
    };
    opt::SearchResult res =
        opt::pso(objective, joint, cfg.pso_particles, cfg.pso_iterations, rng);
    opt::LbfgsOptions opts;
    opts.max_iterations = 60;
    res = opt::local_refine(objective, res.point, joint, opts);

    auto [x, a, x2, a2] = split(res.point);
    long ra = static_cast<long>(round_half_away(a));
    long rb = static_cast<long>(round_half_away(a2));
    ra = std::clamp<long>(ra, 0, cfg.p_max);
    rb = std::clamp<long>(rb, 0, cfg.p_max);
    if (ra + rb > cfg.p_max) {
      if (ra >= rb) {
        ra = cfg.p_max - rb;
      } else {
        rb = cfg.p_max - ra;
      }
    }
    if (ra + rb == 0) {
      if (a >= a2) {
        ra = 1;
      } else {
        rb = 1;
      }
    }
    // Only the point carrying the larger rounded count is evaluated.
    if (ra >= rb) {
      choice.point_domain = state.local.to_domain(x);
      choice.reps = static_cast<int>(ra);
    } else {
      choice.point_domain = state.local.to_domain(x2);
      choice.reps = static_cast<int>(rb);
    }
  }

  const opt::BoxRegion tr_box =
      opt::BoxRegion::trust_region(state.center, state.radius, state.problem->bounds);
  choice.point_domain = tr_box.clamp(choice.point_domain);
  choice.reps = std::clamp(choice.reps, 1, cfg.p_max);
  return choice;
}

int safeguard_replicates(const TrustRegionState& state, const Vector& candidate_domain,
                         int reps) {
  const TRConfig& cfg = state.config;
  const gp::GPModel& model = state.local.model;
  const Vector cand = state.local.to_model(candidate_domain);
  const Vector center = state.local.to_model(state.center);
  const double target = cfg.var_ratio * model.predict(center).var_latent;
  if (model.predict(cand).var_latent <= 0.0) return reps;

  const auto fantasy_ok = [&](int p) {
    return model.fantasy_variance(cand, static_cast<double>(p), cand) <= target;
  };
  if (fantasy_ok(reps)) return reps;
  if (!fantasy_ok(cfg.p_max)) return cfg.p_max;
  int lo = reps, hi = cfg.p_max;  // predicate false at lo, true at hi
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (fantasy_ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// ---------------------------------------------------------------------------
// One loop body

IterationReport iterate(TrustRegionState& state, Rng& rng) {
  const TRConfig& cfg = state.config;
  IterationReport report;
  if (state.finished) return report;

  augment_poisedness(state, rng);
  if (state.finished) return report;

  build_local_model(state);

  if (!budget_left(state)) {
    state.finished = true;
    state.termination = state.eval_count >= cfg.N_max ? "budget" : "cost";
    return report;
  }

  CandidateChoice choice = select_candidate(state, rng);
  report.reps_requested = choice.reps;
  if (cfg.acquisition.fixed_reps <= 0) {
    choice.reps = safeguard_replicates(state, choice.point_domain, choice.reps);
  }
  report.reps_final = choice.reps;
  report.candidate = choice.point_domain;

  const prob::EvaluationReceipt receipt =
      prob::evaluate(*state.problem, choice.point_domain, choice.reps, cfg.cost, rng);
  state.archive.add_samples(choice.point_domain, receipt.samples);
  state.eval_count += choice.reps;
  state.cost_spent += receipt.cost_charged;
  report.evaluated = true;

  // Update the local model with the new observations (same transforms and
  // hyperparameters).
  std::vector<double> std_samples(receipt.samples.size());
  for (std::size_t k = 0; k < receipt.samples.size(); ++k)
    std_samples[k] = state.local.standardize(receipt.samples[k]);
  const Vector cand_model = state.local.to_model(choice.point_domain);
  state.local.model = state.local.model.with_samples(cand_model, std_samples);
  const gp::GPModel& updated = state.local.model;

  const Vector center_model = state.local.to_model(state.center);
  const int center_index = updated.designs().find(center_model);
  const int new_index = updated.designs().find(cand_model);

  const double mean_center = updated.predict(center_model).mean;
  const double mean_new = updated.predict(cand_model).mean;
  const double decrease_model = mean_center - mean_new;
  const double decrease =
      cfg.decrease_units == DecreaseUnits::model
          ? decrease_model
          : decrease_model * state.local.out_sd;
  const double delta_rel = state.radius / state.domain_halfwidth;
  const double decrease_floor = cfg.beta * std::min(delta_rel, delta_rel * delta_rel);
  report.decrease_gate_fired = decrease >= decrease_floor;

  bool accepted = false;
  if (report.decrease_gate_fired && new_index != center_index && center_index >= 0) {
    const RhoResult rho = acceptance_ratio(updated, center_index, new_index);
    report.rho = rho.rho;
    report.used_corner_case = rho.used_corner_case;
    report.rho_degenerate = rho.degenerate;
    const double var_center = updated.predict(center_model).var_latent;
    const double var_new = updated.predict(cand_model).var_latent;
    report.variance_check_passed = var_new <= cfg.var_ratio * var_center;
    accepted = !rho.degenerate && rho.rho >= cfg.eta && report.variance_check_passed;
  }
  report.accepted = accepted;

  if (accepted) {
    state.center = choice.point_domain;
    state.radius *= cfg.gamma_inc;
    state.center_moved_since_fit = true;
    report.radius_action = IterationReport::RadiusAction::increase;
  } else {
    report.imse_gate_consulted = true;
    const gp::VarianceDecomposition vd = updated.variance_decomposition(
        Vector::Constant(updated.dim(), -1.0), Vector::Constant(updated.dim(), 1.0),
        cfg.imse_nodes);
    if (vd.var_of_mean >= cfg.imse_ratio * vd.mean_pred_var) {
      state.radius *= cfg.gamma_dec;
      report.radius_action = IterationReport::RadiusAction::decrease;
    } else {
      report.radius_action = IterationReport::RadiusAction::hold;
      report.imse_gate_blocked = true;
    }
  }

  state.iteration += 1;

  TraceRow row;
  row.iteration = state.iteration;
  row.n_evals = state.eval_count;
  row.cost_spent = state.cost_spent;
  row.center = state.center;
  row.center_model_value = state.local.destandardize(
      updated.predict(state.local.to_model(state.center)).mean);
  row.radius = state.radius;
  row.reps = choice.reps;
  row.accepted = accepted;
  row.gate_fired = report.decrease_gate_fired;
  state.trace.push_back(std::move(row));

  if (state.radius <= cfg.delta_min) {
    state.finished = true;
    state.termination = "radius";
  } else if (state.eval_count >= cfg.N_max) {
    state.finished = true;
    state.termination = "budget";
  } else if (state.cost_spent >= cfg.max_cost) {
    state.finished = true;
    state.termination = "cost";
  } else if (state.iteration >= cfg.max_iterations) {
    state.finished = true;
    state.termination = "iterations";
  }
  return report;
}

RunResult run(const prob::Problem& problem, const TRConfig& config, Rng& rng,
              const Vector* x0) {
  TrustRegionState state = initialize(problem, config, rng, x0);
  while (!state.finished) {
    if (state.eval_count >= state.config.N_max) {
      state.finished = true;
      state.termination = "budget";
      break;
    }
    if (state.cost_spent >= state.config.max_cost) {
      state.finished = true;
      state.termination = "cost";
      break;
    }
    iterate(state, rng);
  }
  RunResult out;
  out.center = state.center;
  out.center_value_estimate = state.local.destandardize(
      state.local.model.predict(state.local.to_model(state.center)).mean);
  out.trace = std::move(state.trace);
  out.termination = state.termination;
  out.eval_count = state.eval_count;
  out.cost_spent = state.cost_spent;
  return out;
}

}  // namespace ogpit::tr
