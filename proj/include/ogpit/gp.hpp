#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ogpit/rng.hpp"

namespace ogpit::gp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised when a covariance factorization cannot be stabilized.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unique evaluated locations with replicate bookkeeping: for each location
// x_i it stores the replicate count a_i, the sample mean of the a_i
// replicates, and the within-location sum of squared deviations. Locations
// closer than dedup_tol are treated as one point and merged exactly via the
// streaming-mean identity.
class DesignSet {
 public:
  DesignSet() = default;
  explicit DesignSet(int dim, double dedup_tol = 1e-9)
      : dim_(dim), dedup_tol_(dedup_tol) {}

  int dim() const { return dim_; }
  double dedup_tol() const { return dedup_tol_; }
  int size() const { return static_cast<int>(locations_.size()); }
  long total_evals() const;

  const std::vector<Vector>& locations() const { return locations_; }
  const Vector& location(int i) const { return locations_[i]; }
  long rep_count(int i) const { return rep_counts_[i]; }
  double agg_mean(int i) const { return agg_means_[i]; }
  double sq_dev_sum(int i) const { return sq_dev_sums_[i]; }

  // Index of the location within dedup_tol of x, or -1.
  int find(const Vector& x) const;

  // Merge raw samples at x (replicates if x matches an existing location).
  // Returns the index the samples landed on.
  int add_samples(const Vector& x, std::span<const double> samples);

  // Merge an already-aggregated batch: count replicates with the given mean
  // and sum of squared deviations about that mean.
  int add_aggregate(const Vector& x, long count, double mean, double sq_dev_sum);

  void remove(int i);

  // n x d matrix of locations.
  Matrix location_matrix() const;

  // Pooled within-location variance estimate, or -1 when fewer than
  // min_dof replicate degrees of freedom are available.
  double pooled_variance(long min_dof = 3) const;

 private:
  int dim_ = 0;
  double dedup_tol_ = 1e-9;
  std::vector<Vector> locations_;
  std::vector<long> rep_counts_;
  std::vector<double> agg_means_;
  std::vector<double> sq_dev_sums_;
};

struct KernelSpec {
  double process_var = 1.0;
  Vector lengthscales;

  bool valid() const;
};

// Anisotropic product-form Matern 5/2 covariance.
double matern52(const Vector& a, const Vector& b, const KernelSpec& k);

// Observation-noise variance r^2(x). Either a user-supplied function of the
// input, or a scalar estimated jointly with the kernel (constant_mle) or
// pooled from replicate scatter (empirical_pooled).
class NoiseModel {
 public:
  enum class Kind { known_function, constant_mle, empirical_pooled };

  NoiseModel() : kind_(Kind::constant_mle), value_(0.0) {}
  static NoiseModel known(std::function<double(const Vector&)> r2);
  static NoiseModel constant(double r2, Kind kind = Kind::constant_mle);

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  double variance_at(const Vector& x) const;

 private:
  Kind kind_;
  double value_;
  std::function<double(const Vector&)> fn_;
};

struct Prediction {
  double mean;
  double var_latent;
  double var_obs;
};

struct LooPrediction {
  double mean;
  double var;  // variance of the held-out aggregated observation
};

struct VarianceDecomposition {
  double mean_pred_var;  // E[s_n^2(X)], X uniform on the box (latent variance)
  double var_of_mean;    // Var[m_n(X)]
};

// Zero-mean GP conditioned on aggregated observations. The factorization of
// K_n + diag(r^2(x_i)/a_i) (+ jitter) is cached; prediction, fantasy updates
// and leave-one-out all reuse it. Instances are immutable once built;
// with_samples returns the updated model.
class GPModel {
 public:
  GPModel() = default;
  GPModel(DesignSet designs, KernelSpec kernel, NoiseModel noise);

  const DesignSet& designs() const { return designs_; }
  const KernelSpec& kernel() const { return kernel_; }
  const NoiseModel& noise() const { return noise_; }
  int size() const { return designs_.size(); }
  int dim() const { return designs_.dim(); }
  double jitter() const { return jitter_; }
  const Matrix& chol_factor() const { return chol_; }

  // Ingest raw samples at x and return the refactorized model.
  GPModel with_samples(const Vector& x, std::span<const double> samples) const;
  GPModel with_aggregate(const Vector& x, long count, double mean,
                         double sq_dev_sum) const;

  Prediction predict(const Vector& x) const;

  // Batch prediction over the rows of X; data-parallel kernel.
  void predict_batch(const Matrix& X, Vector& mean, Vector& var_latent) const;

  // Latent predictive cross-covariance s_n^2(a, b).
  double latent_cov(const Vector& a, const Vector& b) const;
  Matrix latent_cov_matrix(const std::vector<Vector>& pts) const;

  // Posterior variance at x_query after hypothetically adding `reps`
  // observations at x_new (noise r^2(x_new)/reps); independent of the values
  // that would be observed. Latent scale throughout.
  double fantasy_variance(const Vector& x_new, double reps,
                          const Vector& x_query) const;

  // Posterior mean at x_query after hypothetically observing an aggregated
  // value ybar_new from `reps` observations at x_new.
  double fantasy_mean(const Vector& x_new, double reps, double ybar_new,
                      const Vector& x_query) const;

  // Prediction at design i with observation i removed, hyperparameters held
  // fixed. Uses the cross-validation identities
  //   mean = ybar_i - [C^-1 ybar]_i / [C^-1]_ii,
  //   var  = 1 / [C^-1]_ii,
  // with C = K_n + diag(r^2/a) + jitter. The variance is the reciprocal of
  // the diagonal entry (variance of the held-out aggregated observation);
  // equality with explicit deletion-and-repredict is asserted in tests.
  LooPrediction loo(int i) const;

  // E[s_n^2(X)] and Var[m_n(X)] for X uniform on [lower, upper], approximated
  // on a fixed Sobol point set of the given size.
  VarianceDecomposition variance_decomposition(const Vector& lower,
                                               const Vector& upper,
                                               int nodes = 1024) const;

  // The deterministic node set used by variance_decomposition.
  static Matrix quadrature_nodes(const Vector& lower, const Vector& upper, int nodes);

  // Log marginal likelihood of the aggregated observations. When grad is
  // non-null it receives d logL / d log(theta) with theta =
  // (process_var, lengthscales..., [constant noise if fitted_noise]).
  static double log_likelihood(const DesignSet& d, const KernelSpec& k,
                               const NoiseModel& noise, Vector* grad = nullptr,
                               bool fitted_noise = false);

 private:
  DesignSet designs_;
  KernelSpec kernel_;
  NoiseModel noise_;
  Matrix chol_;   // lower Cholesky factor of C
  Vector alpha_;  // C^-1 ybar
  double jitter_ = 0.0;

  void factorize();
  Vector cross_vector(const Vector& x) const;  // k(x, x_1..n)
};

struct FitBounds {
  // Bounds are interpreted for inputs on [-1,1]^d and standardized outputs.
  double lengthscale_lo = 0.05, lengthscale_hi = 10.0;
  double process_var_lo = 0.05, process_var_hi = 20.0;
  double noise_lo = 1e-8, noise_hi = 10.0;
};

struct FitResult {
  KernelSpec kernel;
  NoiseModel noise;
  double log_likelihood;  // of the standardized data at the optimum
};

// Maximum-likelihood hyperparameters by multistart bounded quasi-Newton
// search in log space. Outputs are standardized internally (bounds above
// refer to that scale); the returned kernel and noise are mapped back to the
// data's units. Optional warm start is added to the start list.
FitResult fit_hyperparameters(const DesignSet& d, NoiseModel::Kind noise_kind,
                              const FitBounds& bounds, int restarts, Rng& rng,
                              const KernelSpec* warm_kernel = nullptr,
                              const NoiseModel* warm_noise = nullptr,
                              std::function<double(const Vector&)> known_r2 = nullptr);

}  // namespace ogpit::gp
