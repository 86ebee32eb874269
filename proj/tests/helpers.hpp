#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ogpit/gp.hpp"
#include "ogpit/rng.hpp"

namespace ogpit::test {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A random replicated-GP instance: raw samples at unique locations plus the
// aggregated design set the model consumes.
struct RawInstance {
  int dim = 1;
  gp::KernelSpec kernel;
  double noise_var = 0.0;
  std::vector<Vector> locations;       // unique
  std::vector<std::vector<double>> samples;  // per location
  gp::DesignSet aggregated;
};

inline RawInstance random_instance(Rng& rng, int dim, int n_unique, int max_reps,
                                   double noise_var) {
  RawInstance inst;
  inst.dim = dim;
  inst.noise_var = noise_var;
  inst.kernel.process_var = 0.5 + rng.uniform() * 2.0;
  inst.kernel.lengthscales = Vector::Zero(dim);
  for (int j = 0; j < dim; ++j) inst.kernel.lengthscales[j] = 0.3 + rng.uniform() * 1.2;
  inst.aggregated = gp::DesignSet(dim);
  for (int i = 0; i < n_unique; ++i) {
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
    const int reps = 1 + static_cast<int>(rng.uniform_int(max_reps));
    std::vector<double> ys;
    for (int r = 0; r < reps; ++r) ys.push_back(rng.normal());
    inst.locations.push_back(x);
    inst.samples.push_back(ys);
    inst.aggregated.add_samples(x, ys);
  }
  return inst;
}

inline gp::GPModel model_of(const RawInstance& inst) {
  return gp::GPModel(inst.aggregated, inst.kernel,
                     gp::NoiseModel::constant(inst.noise_var));
}

// Dense full-N reference: every raw sample is its own row of the system.
struct FullNOracle {
  Matrix K;           // N x N with noise on the diagonal
  Eigen::LDLT<Matrix> solver;
  std::vector<Vector> rows;
  Vector y;
  gp::KernelSpec kernel;
  double noise_var;

  explicit FullNOracle(const RawInstance& inst)
      : kernel(inst.kernel), noise_var(inst.noise_var) {
    for (std::size_t i = 0; i < inst.locations.size(); ++i) {
      for (double v : inst.samples[i]) {
        rows.push_back(inst.locations[i]);
        y.conservativeResize(static_cast<long>(rows.size()));
        y[static_cast<long>(rows.size()) - 1] = v;
      }
    }
    const int N = static_cast<int>(rows.size());
    K.resize(N, N);
    for (int a = 0; a < N; ++a) {
      for (int b = 0; b < N; ++b) K(a, b) = gp::matern52(rows[a], rows[b], kernel);
      K(a, a) += noise_var;
    }
    solver.compute(K);
  }

  gp::Prediction predict(const Vector& x) const {
    const int N = static_cast<int>(rows.size());
    Vector k(N);
    for (int a = 0; a < N; ++a) k[a] = gp::matern52(x, rows[a], kernel);
    const double mean = k.dot(solver.solve(y));
    const double var = kernel.process_var - k.dot(solver.solve(k));
    return {mean, var, var + noise_var};
  }
};

}  // namespace ogpit::test
