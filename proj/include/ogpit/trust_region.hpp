#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ogpit/acquisition.hpp"
#include "ogpit/gp.hpp"
#include "ogpit/optim.hpp"
#include "ogpit/problems.hpp"
#include "ogpit/rng.hpp"

namespace ogpit::tr {

using Vector = Eigen::VectorXd;

enum class AcquisitionKind { ei, qerci_v1, qerci_v2 };

struct AcquisitionChoice {
  AcquisitionKind kind = AcquisitionKind::ei;
  int fixed_reps = 0;  // > 0 pins the replicate count and bypasses p_adaptive
};

// Units in which the sufficient-decrease test compares the model decrease
// against beta * min(delta, delta^2) (delta taken relative to the domain
// half-width): standardized model outputs or raw objective units.
enum class DecreaseUnits { model, domain };

struct TRConfig {
  double gamma_dec = 0.8;
  double gamma_inc = 0.0;  // 0 -> 1 / gamma_dec
  double eta = 0.2;
  double beta = 1e-3;
  int n_b = 0;      // neighbor count; 0 -> min(n, max(10*(d+1), 50))
  int N0 = 0;       // initial design size; 0 -> max(d+1, min(10, 2d))
  long N_max = 0;   // evaluation budget (required)
  int p_max = 500;
  double delta0 = 0.0;     // 0 -> 0.2 * mean domain half-width
  double delta_min = 0.0;  // 0 -> 1e-6 * delta0
  double T_a = 0.2;
  double var_ratio = 4.0;
  double imse_ratio = 10.0;  // 0 disables the gate (radius always eligible to shrink)
  int refit_period = 3;
  int imse_nodes = 1024;
  int candidate_count = 0;  // 0 -> min(100 d, 5000)
  int pso_particles = 50;
  int pso_iterations = 40;
  int mle_restarts = 5;
  AcquisitionChoice acquisition;
  acq::CostModel cost;
  double max_cost = std::numeric_limits<double>::infinity();
  long max_iterations = std::numeric_limits<long>::max();
  gp::NoiseModel::Kind noise_kind = gp::NoiseModel::Kind::empirical_pooled;
  std::function<double(const Vector&)> known_noise;  // r^2(x) in raw units
  DecreaseUnits decrease_units = DecreaseUnits::domain;

  // Fills the zero defaults for the given problem and checks ranges.
  TRConfig resolved(const prob::Problem& problem) const;
};

// Local simple-kriging model: inputs affinely mapped from the trust-region
// box to [-1,1]^d, outputs standardized. Carries the maps alongside the GP.
struct LocalModel {
  gp::GPModel model;
  Vector box_lo, box_hi;  // domain-coordinate box backing the input map
  double out_mean = 0.0;
  double out_sd = 1.0;

  Vector to_model(const Vector& x_domain) const;
  Vector to_domain(const Vector& x_model) const;
  double standardize(double y) const { return (y - out_mean) / out_sd; }
  double destandardize(double m) const { return m * out_sd + out_mean; }
};

struct TraceRow {
  long iteration = 0;
  long n_evals = 0;
  double cost_spent = 0.0;
  Vector center;
  double center_model_value = 0.0;  // predictive mean at the center, raw units
  double radius = 0.0;
  long reps = 0;
  bool accepted = false;
  bool gate_fired = false;  // sufficient-decrease test outcome
};

struct IterationReport {
  Vector candidate;
  int reps_requested = 0;  // before the variance safeguard
  int reps_final = 0;
  bool evaluated = false;
  bool accepted = false;
  std::optional<double> rho;
  bool used_corner_case = false;
  bool rho_degenerate = false;
  bool decrease_gate_fired = false;
  bool variance_check_passed = false;
  enum class RadiusAction { increase, decrease, hold } radius_action = RadiusAction::hold;
  bool imse_gate_consulted = false;
  bool imse_gate_blocked = false;  // gate prevented a radius decrease
};

struct TrustRegionState {
  const prob::Problem* problem = nullptr;
  TRConfig config;  // resolved
  Vector center;
  double radius = 0.0;
  gp::DesignSet archive;  // domain coordinates, raw outputs
  long eval_count = 0;
  double cost_spent = 0.0;
  long iteration = 0;
  LocalModel local;
  gp::KernelSpec hypers_domain;  // kernel in domain-input / raw-output units
  double const_noise_domain = 0.0;
  bool have_hypers = false;
  long last_full_fit_iteration = 0;
  bool center_moved_since_fit = false;
  std::uint64_t seed_base = 0;
  bool finished = false;
  std::string termination;
  std::vector<TraceRow> trace;

  double domain_halfwidth = 1.0;  // mean over coordinates
};

struct RhoResult {
  double rho = 0.0;
  bool used_corner_case = false;
  bool degenerate = false;
};

// rho from the updated-model means at the center and candidate and their
// leave-one-out counterparts. Main form when the LOO-predicted decrease is
// positive; the good-surprise form otherwise.
RhoResult acceptance_ratio_from_means(double mean_center, double mean_new,
                                      double loo_center, double loo_new);

// Both indices must be designs of the updated model.
RhoResult acceptance_ratio(const gp::GPModel& updated, int center_index,
                           int new_index);

TrustRegionState initialize(const prob::Problem& problem, const TRConfig& config,
                            Rng& rng, const Vector* x0 = nullptr);

// Rebuilds the local model around the current center: n_b nearest unique
// designs, trust-region input scaling, output standardization; refits
// hyperparameters on the configured schedule and reuses them otherwise.
LocalModel build_local_model(TrustRegionState& state);

// Evaluates uniform trust-region points until d+1 unique designs lie in the
// box, with replicate counts from the latest model.
void augment_poisedness(TrustRegionState& state, Rng& rng);

struct CandidateChoice {
  Vector point_domain;
  int reps = 1;
};

CandidateChoice select_candidate(TrustRegionState& state, Rng& rng);

// Raise reps until the fantasy latent variance at the candidate is within
// var_ratio of the current latent variance at the center, capped at p_max.
int safeguard_replicates(const TrustRegionState& state, const Vector& candidate_domain,
                         int reps);

IterationReport iterate(TrustRegionState& state, Rng& rng);

struct RunResult {
  Vector center;
  double center_value_estimate = 0.0;  // predictive mean, raw units
  std::vector<TraceRow> trace;
  std::string termination;
  long eval_count = 0;
  double cost_spent = 0.0;
};

RunResult run(const prob::Problem& problem, const TRConfig& config, Rng& rng,
              const Vector* x0 = nullptr);

}  // namespace ogpit::tr
