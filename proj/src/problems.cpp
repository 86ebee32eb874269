#include "ogpit/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace ogpit::prob {

namespace {

constexpr double kPi = 3.141592653589793;

opt::BoxRegion cube(int dim, double lo, double hi) {
  opt::BoxRegion b;
  b.lower = Vector::Constant(dim, lo);
  b.upper = Vector::Constant(dim, hi);
  return b;
}

double sphere_offset(const Vector& x) {
  double s = 0.0;
  for (int j = 0; j < x.size(); ++j) s += (x[j] - 0.3) * (x[j] - 0.3);
  return s;
}

double branin(const Vector& x) {
  const double a = 1.0;
  const double b = 5.1 / (4.0 * kPi * kPi);
  const double c = 5.0 / kPi;
  const double r = 6.0;
  const double s = 10.0;
  const double t = 1.0 / (8.0 * kPi);
  const double u = x[1] - b * x[0] * x[0] + c * x[0] - r;
  return a * u * u + s * (1.0 - t) * std::cos(x[0]) + s;
}

double rosenbrock(const Vector& x) {
  double s = 0.0;
  for (int j = 0; j + 1 < x.size(); ++j) {
    const double a = x[j + 1] - x[j] * x[j];
    const double b = 1.0 - x[j];
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double estimate_optimum(const std::function<double(const Vector&)>& f,
                        const opt::BoxRegion& bounds) {
  Rng rng(0x5eedfu);
  const auto neg = [&](const Vector& x) { return -f(x); };
  double best = std::numeric_limits<double>::infinity();
  const auto starts = opt::lhs_maximin(16, bounds.dim(), rng, 20);
  opt::LbfgsOptions opts;
  opts.max_iterations = 200;
  for (const Vector& u : starts) {
    Vector x = bounds.lower.array() +
               u.array() * (bounds.upper - bounds.lower).array();
    const opt::SearchResult res = opt::local_refine(neg, x, bounds, opts);
    best = std::min(best, -res.value);
  }
  return best;
}

}  // namespace

EvaluationReceipt evaluate(const Problem& p, const Vector& x, int reps,
                           const acq::CostModel& cost, Rng& rng) {
  if (x.size() != p.dim) throw std::invalid_argument("evaluate: dimension mismatch");
  if (reps < 1) throw std::invalid_argument("evaluate: reps must be positive");
  if (!p.bounds.contains(x, 1e-9))
    throw std::invalid_argument("evaluate: point outside problem bounds");
  const double f = p.true_objective(x);
  EvaluationReceipt receipt;
  receipt.samples.reserve(reps);
  for (int k = 0; k < reps; ++k) {
    receipt.samples.push_back(f + p.noise_sd * rng.normal());
    ++receipt.rng_draws_consumed;
  }
  receipt.cost_charged = cost.cost(static_cast<double>(reps));
  return receipt;
}

Problem make_benchmark1(const std::string& name, int dim, double noise_sd) {
  Problem p;
  p.noise_sd = noise_sd;
  p.dim = dim;
  if (name == "sphere" && (dim == 2 || dim == 4 || dim == 6)) {
    p.name = "sphere-" + std::to_string(dim);
    p.bounds = cube(dim, -5.0, 5.0);
    p.true_objective = sphere_offset;
    p.optimum_value = 0.0;
    return p;
  }
  if (name == "sqsphere" && (dim == 2 || dim == 4 || dim == 6)) {
    p.name = "sqsphere-" + std::to_string(dim);
    p.bounds = cube(dim, -5.0, 5.0);
    p.true_objective = [](const Vector& x) {
      const double s = sphere_offset(x);
      return s * s;
    };
    p.optimum_value = 0.0;
    return p;
  }
  if (name == "branin" && dim == 2) {
    p.name = "branin-2";
    p.bounds.lower = Vector(2);
    p.bounds.upper = Vector(2);
    p.bounds.lower << -5.0, 0.0;
    p.bounds.upper << 10.0, 15.0;
    p.true_objective = branin;
    p.optimum_value = 0.39788735772973816;
    return p;
  }
  if (name == "rosenbrock" && (dim == 2 || dim == 4)) {
    p.name = "rosenbrock-" + std::to_string(dim);
    p.bounds = cube(dim, -2.048, 2.048);
    p.true_objective = rosenbrock;
    p.optimum_value = 0.0;
    return p;
  }
  throw std::invalid_argument("make_benchmark1: unsupported problem '" + name + "-" +
                              std::to_string(dim) + "'");
}

Problem make_least_squares(std::string name, int dim,
                           std::vector<std::function<double(const Vector&)>> residuals,
                           opt::BoxRegion bounds, double noise_sd,
                           std::optional<double> optimum) {
  if (residuals.empty())
    throw std::invalid_argument("make_least_squares: needs at least one residual");
  Problem p;
  p.name = std::move(name);
  p.dim = dim;
  p.bounds = std::move(bounds);
  p.noise_sd = noise_sd;
  p.true_objective = [residuals](const Vector& x) {
    double s = 0.0;
    for (const auto& r : residuals) {
      const double v = r(x);
      s += v * v;
    }
    return s;
  };
  p.optimum_value = optimum ? *optimum : estimate_optimum(p.true_objective, p.bounds);
  return p;
}

namespace {

Problem make_ls_instance(const std::string& key, double noise_sd) {
  using Fn = std::function<double(const Vector&)>;
  if (key == "ls-linear-4") {
    // Full-rank linear residuals, m = 6: f_i = x_i - (2/m) sum(x) - 1 for
    // i <= n, f_i = -(2/m) sum(x) - 1 beyond; minimum m - n at x = -1.
    const int n = 4, m = 6;
    std::vector<Fn> res;
    for (int i = 0; i < m; ++i) {
      res.push_back([i, n, m](const Vector& x) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += x[j];
        const double base = -(2.0 / m) * s - 1.0;
        return (i < n) ? x[i] + base : base;
      });
    }
    return make_least_squares("ls-linear-4", n, std::move(res), cube(n, -3.0, 3.0),
                              noise_sd, static_cast<double>(m - n));
  }
  if (key == "ls-rosen-2") {
    std::vector<Fn> res = {
        [](const Vector& x) { return 10.0 * (x[1] - x[0] * x[0]); },
        [](const Vector& x) { return 1.0 - x[0]; }};
    return make_least_squares("ls-rosen-2", 2, std::move(res), cube(2, -2.048, 2.048),
                              noise_sd, 0.0);
  }
  if (key == "ls-powell-4") {
    const double s5 = std::sqrt(5.0);
    const double s10 = std::sqrt(10.0);
    std::vector<Fn> res = {
        [](const Vector& x) { return x[0] + 10.0 * x[1]; },
        [s5](const Vector& x) { return s5 * (x[2] - x[3]); },
        [](const Vector& x) {
          const double d = x[1] - 2.0 * x[2];
          return d * d;
        },
        [s10](const Vector& x) {
          const double d = x[0] - x[3];
          return s10 * d * d;
        }};
    return make_least_squares("ls-powell-4", 4, std::move(res), cube(4, -4.0, 5.0),
                              noise_sd, 0.0);
  }
  throw std::invalid_argument("unknown least-squares instance '" + key + "'");
}

}  // namespace

Problem from_id(const std::string& id, double noise_sd) {
  if (id.rfind("ls-", 0) == 0) return make_ls_instance(id, noise_sd);
  const auto dash = id.rfind('-');
  if (dash == std::string::npos)
    throw std::invalid_argument("problem id must be 'name-dim': '" + id + "'");
  const std::string name = id.substr(0, dash);
  int dim = 0;
  try {
    dim = std::stoi(id.substr(dash + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("problem id must be 'name-dim': '" + id + "'");
  }
  return make_benchmark1(name, dim, noise_sd);
}

std::vector<std::string> registry_ids() {
  return {"sphere-2",  "sphere-4",     "sphere-6",  "sqsphere-2", "sqsphere-4",
          "sqsphere-6", "branin-2",    "rosenbrock-2", "rosenbrock-4",
          "ls-linear-4", "ls-rosen-2", "ls-powell-4"};
}

}  // namespace ogpit::prob
