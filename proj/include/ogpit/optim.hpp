#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "ogpit/rng.hpp"

namespace ogpit::opt {

using Vector = Eigen::VectorXd;

// Axis-aligned box; the trust region is represented this way after clipping
// against the domain.
struct BoxRegion {
  Vector lower;
  Vector upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool degenerate() const;
  bool contains(const Vector& x, double tol = 0.0) const;
  Vector clamp(const Vector& x) const;
  Vector width() const { return upper - lower; }

  // Box of half-width `radius` around `center`, clipped to `domain`.
  static BoxRegion trust_region(const Vector& center, double radius,
                                const BoxRegion& domain);
};

// Latin hypercube in the unit cube, one point per axis stratum.
std::vector<Vector> lhs_plain(int count, int dim, Rng& rng);

// Best of `restarts` Latin hypercubes by minimal pairwise distance.
std::vector<Vector> lhs_maximin(int count, int dim, Rng& rng, int restarts = 100);

// i.i.d. uniform points on the region.
std::vector<Vector> uniform_candidates(const BoxRegion& region, int count, Rng& rng);

struct SearchResult {
  Vector point;
  double value;
};

// Particle swarm maximization with constriction coefficients; iterates are
// clamped to the region, objective evaluations run through the parallel map.
SearchResult pso(const std::function<double(const Vector&)>& objective,
                 const BoxRegion& region, int particles, int iterations, Rng& rng);

struct LbfgsOptions {
  int max_iterations = 100;
  double grad_tol = 1e-8;
  double step_tol = 1e-8;
  int memory = 8;
};

// Box-constrained L-BFGS ascent on a caller-supplied value/gradient oracle.
// Returns the best evaluated point, never worse than the start.
SearchResult lbfgsb_max(const std::function<double(const Vector&, Vector*)>& fg,
                        const Vector& start, const BoxRegion& region,
                        const LbfgsOptions& opts = {});

// Bounded ascent with central finite-difference gradients (one-sided at the
// box faces), for objectives without analytic derivatives.
SearchResult local_refine(const std::function<double(const Vector&)>& objective,
                          const Vector& start, const BoxRegion& region,
                          const LbfgsOptions& opts = {});

}  // namespace ogpit::opt
