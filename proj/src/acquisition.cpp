#include "ogpit/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ogpit/parallel.hpp"

namespace ogpit::acq {

// ---------------------------------------------------------------------------
// Expected improvement

ImprovementThreshold ImprovementThreshold::best_predictive_mean(const gp::GPModel& m) {
  if (m.size() == 0)
    throw std::invalid_argument("ImprovementThreshold: model has no designs");
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m.size(); ++i) {
    best = std::min(best, m.predict(m.designs().location(i)).mean);
  }
  return {best, Source::best_predictive_mean};
}

ImprovementThreshold ImprovementThreshold::user(double value) {
  return {value, Source::user_supplied};
}

double ei(double mean, double sd, double threshold) {
  const double delta = threshold - mean;
  if (!(sd > 0.0)) return std::max(delta, 0.0);
  const double z = delta / sd;
  return delta * normal_cdf(z) + sd * normal_pdf(z);
}

double ei(const gp::GPModel& m, const Vector& x, const ImprovementThreshold& T) {
  const gp::Prediction p = m.predict(x);
  return ei(p.mean, std::sqrt(std::max(0.0, p.var_obs)), T.value);
}

// ---------------------------------------------------------------------------
// Quasi-random stream

McStream::McStream(std::uint64_t seed, int q_max, int draws) {
  if (q_max < 1 || q_max > 16) throw std::invalid_argument("McStream: unsupported q_max");
  if (draws < 1) throw std::invalid_argument("McStream: draws must be positive");
  z_.resize(q_max, draws);
  for (int j = 0; j < q_max; ++j) {
    // Per-coordinate rotation independent of q_max.
    const std::uint64_t h = hash64({seed, static_cast<std::uint64_t>(j)});
    const double shift = static_cast<double>(h >> 11) * 0x1.0p-53;
    par::map(draws, [&, j, shift](std::ptrdiff_t k) {
      double u = sobol_point(static_cast<std::uint64_t>(k) + 1, j) + shift;
      u -= std::floor(u);
      u = std::min(std::max(u, 0x1.0p-53), 1.0 - 0x1.0p-53);
      z_(j, k) = normal_quantile(u);
    });
  }
}

// ---------------------------------------------------------------------------
// qEI

namespace {

// Factor cov = L L^T through an eigendecomposition with a nonnegative floor.
// Eigenpairs are ordered by decreasing eigenvalue and sign-fixed so that
// degenerate batches reduce exactly to their lower-q equivalents under the
// shared stream.
Matrix psd_factor(const Matrix& cov) {
  const int q = static_cast<int>(cov.rows());
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::invalid_argument("qei: covariance eigendecomposition failed");
  const Vector& vals = eig.eigenvalues();  // ascending
  const double vmax = std::max(vals[q - 1], 0.0);
  if (vals[0] < -1e-8 * std::max(1.0, vmax))
    throw std::invalid_argument("qei: covariance is not PSD");
  Matrix L = Matrix::Zero(q, q);
  for (int c = 0; c < q; ++c) {
    const int src = q - 1 - c;  // descending order
    const double lam = std::max(vals[src], 0.0);
    if (lam <= 0.0) continue;
    Vector u = eig.eigenvectors().col(src);
    int imax = 0;
    for (int i = 1; i < q; ++i) {
      if (std::abs(u[i]) > std::abs(u[imax])) imax = i;
    }
    if (u[imax] < 0.0) u = -u;
    L.col(c) = u * std::sqrt(lam);
  }
  return L;
}

}  // namespace

double qei(const Vector& mean, const Matrix& cov, double threshold,
           const McStream& stream) {
  const int q = static_cast<int>(mean.size());
  if (q < 1 || cov.rows() != q || cov.cols() != q)
    throw std::invalid_argument("qei: inconsistent mean/cov sizes");
  if (q > stream.q_max()) throw std::invalid_argument("qei: stream has too few coordinates");

  const Matrix L = psd_factor(cov);
  const int draws = stream.draws();
  const Matrix& z = stream.z();

  Vector improvement(draws);
  par::map(draws, [&](std::ptrdiff_t k) {
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < q; ++i) {
      double y = mean[i];
      for (int c = 0; c < q; ++c) y += L(i, c) * z(c, k);
      lo = std::min(lo, y);
    }
    improvement[k] = std::max(0.0, threshold - lo);
  });
  double acc = 0.0;
  for (int k = 0; k < draws; ++k) acc += improvement[k];
  return acc / draws;
}

double qei(const Vector& mean, const Matrix& cov, double threshold, int draws,
           std::uint64_t seed) {
  const McStream stream(seed, static_cast<int>(mean.size()), draws);
  return qei(mean, cov, threshold, stream);
}

// ---------------------------------------------------------------------------
// qERCI

namespace {

std::vector<Vector> dedup_points(const std::vector<Vector>& pts, double tol) {
  std::vector<Vector> out;
  for (const Vector& p : pts) {
    bool seen = false;
    for (const Vector& o : out) {
      if ((o - p).norm() <= tol) {
        seen = true;
        break;
      }
    }
    if (!seen) out.push_back(p);
  }
  return out;
}

}  // namespace

double qerci(const gp::GPModel& m, const std::vector<Vector>& refs,
             const std::vector<PlannedPoint>& new_points, double threshold,
             const McStream& stream) {
  if (refs.empty()) throw std::invalid_argument("qerci: empty reference set");
  const double tol = m.designs().dedup_tol();

  const std::vector<Vector> uref = dedup_points(refs, tol);
  const int q = static_cast<int>(uref.size());

  // Merge coincident planned points (replicates add) and drop empty batches.
  std::vector<PlannedPoint> planned;
  for (const PlannedPoint& p : new_points) {
    if (!(p.reps > 1e-9)) continue;
    bool merged = false;
    for (PlannedPoint& o : planned) {
      if ((o.x - p.x).norm() <= tol) {
        o.reps += p.reps;
        merged = true;
        break;
      }
    }
    if (!merged) planned.push_back(p);
  }
  if (planned.empty()) return 0.0;

  Vector mean(q);
  Vector ref_noise(q);
  for (int i = 0; i < q; ++i) {
    const gp::Prediction p = m.predict(uref[i]);
    mean[i] = p.mean;
    ref_noise[i] = p.var_obs - p.var_latent;
  }
  Matrix prior = m.latent_cov_matrix(uref);

  // Condition the latent covariance on the planned observations.
  const int nb = static_cast<int>(planned.size());
  std::vector<Vector> new_locs(nb);
  for (int j = 0; j < nb; ++j) new_locs[j] = planned[j].x;
  Matrix s_nn = m.latent_cov_matrix(new_locs);
  for (int j = 0; j < nb; ++j) {
    s_nn(j, j) += m.noise().variance_at(planned[j].x) / planned[j].reps;
  }
  Matrix s_rn(q, nb);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < nb; ++j) s_rn(i, j) = m.latent_cov(uref[i], new_locs[j]);
  }
  s_nn.diagonal().array() += 1e-12 * m.kernel().process_var;
  const Matrix gain = s_nn.ldlt().solve(s_rn.transpose());
  Matrix posterior = prior - s_rn * gain;

  prior.diagonal() += ref_noise;
  posterior.diagonal() += ref_noise;

  return qei(mean, prior, threshold, stream) - qei(mean, posterior, threshold, stream);
}

int p_adaptive(const gp::GPModel& m, const Vector& x, double T_a, int p_max) {
  if (!(T_a > 0.0 && T_a < 1.0)) throw std::invalid_argument("p_adaptive: T_a must be in (0,1)");
  if (p_max < 1) throw std::invalid_argument("p_adaptive: p_max must be positive");
  const double s2 = m.predict(x).var_latent;
  if (!(s2 > 0.0)) return 1;
  const double r2 = m.noise().variance_at(x);
  if (r2 <= 0.0) return 1;

  // Relative reduction (s2 - s2_after(p)) / s2 is nondecreasing in p, so the
  // first qualifying p is found by bisection over the predicate.
  const auto reduction_ok = [&](int p) {
    const double after = m.fantasy_variance(x, static_cast<double>(p), x);
    return (s2 - after) / s2 >= T_a;
  };
  if (reduction_ok(1)) return 1;
  if (!reduction_ok(p_max)) return p_max;
  int lo = 1, hi = p_max;  // predicate false at lo, true at hi
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (reduction_ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double qerci_v1(const gp::GPModel& m, const Vector& x, const Vector& x_center,
                const Vector& x_star, double T_a, int p_max, double threshold,
                const McStream& stream) {
  const int p = p_adaptive(m, x, T_a, p_max);
  const std::vector<Vector> refs = {x_center, x_star, x};
  const std::vector<PlannedPoint> planned = {{x, static_cast<double>(p)}};
  return qerci(m, refs, planned, threshold, stream);
}

double qerci_v2(const gp::GPModel& m, const Vector& x, double reps, const Vector& x2,
                double reps2, const CostModel& cost, const Vector& x_center,
                const Vector& x_star, double threshold, const McStream& stream) {
  if (reps < 0.0 || reps2 < 0.0)
    throw std::invalid_argument("qerci_v2: negative replicate counts");
  const std::vector<Vector> refs = {x_center, x_star, x, x2};
  const std::vector<PlannedPoint> planned = {{x, reps}, {x2, reps2}};
  const double value = qerci(m, refs, planned, threshold, stream);
  double denom = cost.setup_cost * ((reps > 1e-9 ? 1.0 : 0.0) + (reps2 > 1e-9 ? 1.0 : 0.0)) +
                 cost.per_replicate_cost * (reps + reps2);
  if (denom <= 0.0) denom = 1.0;
  return value / denom;
}

}  // namespace ogpit::acq
