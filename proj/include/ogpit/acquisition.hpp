#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "ogpit/gp.hpp"

namespace ogpit::acq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ImprovementThreshold {
  enum class Source { best_predictive_mean, user_supplied };
  double value = 0.0;
  Source source = Source::user_supplied;

  // T = min over the model's designs of the predictive mean.
  static ImprovementThreshold best_predictive_mean(const gp::GPModel& m);
  static ImprovementThreshold user(double value);
};

// Evaluation cost c(p) = c0 * 1{p>0} + c1 * p.
struct CostModel {
  double setup_cost = 0.0;
  double per_replicate_cost = 0.0;
  double cost(double reps) const {
    return (reps > 0.0 ? setup_cost : 0.0) + per_replicate_cost * reps;
  }
};

struct BatchProposal {
  Vector first_point;
  double first_reps = 0.0;
  std::optional<Vector> second_point;
  double second_reps = 0.0;
  double criterion_value = 0.0;
};

// Closed-form expected improvement below threshold T for a Gaussian with the
// given mean and standard deviation; max(T - mean, 0) when sd = 0.
double ei(double mean, double sd, double threshold);

// EI at x under the model, on the observation scale (latent + noise).
double ei(const gp::GPModel& m, const Vector& x, const ImprovementThreshold& T);

// Fixed quasi-random standard-normal block (coords x draws). Coordinate j is
// a Halton sequence in the j-th prime base under a seed-derived Cranley-
// Patterson rotation, pushed through the normal quantile. Repeated
// construction from the same seed yields the same block, and coordinate
// streams do not depend on how many coordinates are materialized.
class McStream {
 public:
  McStream(std::uint64_t seed, int q_max, int draws = 4096);
  const Matrix& z() const { return z_; }
  int draws() const { return static_cast<int>(z_.cols()); }
  int q_max() const { return static_cast<int>(z_.rows()); }

 private:
  Matrix z_;  // q_max x draws
};

// Monte Carlo estimate of E[max(0, T - min_i Y_i)], Y ~ N(mean, cov), using
// the leading rows of the stream. cov must be symmetric PSD up to a small
// eigenvalue floor.
double qei(const Vector& mean, const Matrix& cov, double threshold,
           const McStream& stream);
double qei(const Vector& mean, const Matrix& cov, double threshold, int draws,
           std::uint64_t seed);

struct PlannedPoint {
  Vector x;
  double reps;
};

// Expected reduction in the batch improvement at the reference points caused
// by conditioning on the planned (noisy, replicated) observations. Both qEI
// terms share the mean vector, threshold and random stream.
double qerci(const gp::GPModel& m, const std::vector<Vector>& refs,
             const std::vector<PlannedPoint>& new_points, double threshold,
             const McStream& stream);

// Smallest p in [1, p_max] whose fantasy update reduces the latent variance
// at x by the relative factor T_a; p_max when no p suffices.
int p_adaptive(const gp::GPModel& m, const Vector& x, double T_a, int p_max);

// qERCI with refs (x_c, x_star, x) and p_adaptive(x) planned replicates at x.
double qerci_v1(const gp::GPModel& m, const Vector& x, const Vector& x_center,
                const Vector& x_star, double T_a, int p_max, double threshold,
                const McStream& stream);

// qERCI with refs (x_c, x_star, x, x2) and planned batches (x, reps),
// (x2, reps2), divided by the setup-cost model;  the denominator falls back
// to 1 when it vanishes (zero costs). Replicate counts may be continuous.
double qerci_v2(const gp::GPModel& m, const Vector& x, double reps, const Vector& x2,
                double reps2, const CostModel& cost, const Vector& x_center,
                const Vector& x_star, double threshold, const McStream& stream);

}  // namespace ogpit::acq
