#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ogpit/acquisition.hpp"
#include "ogpit/optim.hpp"
#include "ogpit/rng.hpp"

namespace ogpit::prob {

using Vector = Eigen::VectorXd;

// A stochastic benchmark objective. true_objective is the noise-free
// function; it is reserved for regret reporting and never shown to the
// optimizer, which only sees noisy samples through evaluate().
struct Problem {
  std::string name;
  int dim = 0;
  opt::BoxRegion bounds;
  std::function<double(const Vector&)> true_objective;
  double noise_sd = 0.0;
  double optimum_value = 0.0;
};

struct EvaluationReceipt {
  std::vector<double> samples;
  double cost_charged = 0.0;
  long rng_draws_consumed = 0;
};

// Draw `reps` noisy samples f(x) + sd * z from the run's stream and charge
// the batch cost c0 + c1 * reps.
EvaluationReceipt evaluate(const Problem& p, const Vector& x, int reps,
                           const acq::CostModel& cost, Rng& rng);

// Benchmark set: sphere (2,4,6), sqsphere (2,4,6), branin (2),
// rosenbrock (2,4). Standard domains; sphere family offset so the optimum is
// away from design-grid symmetry.
Problem make_benchmark1(const std::string& name, int dim, double noise_sd);

// Sum-of-squares objective from residual functions. The optimum value is
// taken from the caller or estimated by multistart bounded refinement.
Problem make_least_squares(std::string name, int dim,
                           std::vector<std::function<double(const Vector&)>> residuals,
                           opt::BoxRegion bounds, double noise_sd,
                           std::optional<double> optimum = std::nullopt);

// Registry lookup by "name-dim" id, e.g. "sphere-2", "ls-rosen-2".
Problem from_id(const std::string& id, double noise_sd);
std::vector<std::string> registry_ids();

}  // namespace ogpit::prob
