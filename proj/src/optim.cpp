#include "ogpit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ogpit/parallel.hpp"

namespace ogpit::opt {

// ---------------------------------------------------------------------------
// BoxRegion

bool BoxRegion::degenerate() const {
  if (lower.size() != upper.size() || lower.size() == 0) return true;
  for (int j = 0; j < lower.size(); ++j) {
    if (!(upper[j] > lower[j])) return true;
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) return true;
  }
  return false;
}

bool BoxRegion::contains(const Vector& x, double tol) const {
  for (int j = 0; j < lower.size(); ++j) {
    if (x[j] < lower[j] - tol || x[j] > upper[j] + tol) return false;
  }
  return true;
}

Vector BoxRegion::clamp(const Vector& x) const {
  Vector y = x;
  for (int j = 0; j < lower.size(); ++j) y[j] = std::clamp(y[j], lower[j], upper[j]);
  return y;
}

BoxRegion BoxRegion::trust_region(const Vector& center, double radius,
                                  const BoxRegion& domain) {
  BoxRegion tr;
  tr.lower = center.array() - radius;
  tr.upper = center.array() + radius;
  for (int j = 0; j < center.size(); ++j) {
    tr.lower[j] = std::max(tr.lower[j], domain.lower[j]);
    tr.upper[j] = std::min(tr.upper[j], domain.upper[j]);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Designs

std::vector<Vector> lhs_plain(int count, int dim, Rng& rng) {
  if (count < 1 || dim < 1) throw std::invalid_argument("lhs: count and dim must be positive");
  std::vector<Vector> pts(count, Vector(dim));
  std::vector<int> perm(count);
  for (int j = 0; j < dim; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = count - 1; i > 0; --i) {
      const int k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[i], perm[k]);
    }
    for (int i = 0; i < count; ++i) {
      pts[i][j] = (perm[i] + rng.uniform()) / static_cast<double>(count);
    }
  }
  return pts;
}

namespace {

double min_pairwise_sq_dist(const std::vector<Vector>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      best = std::min(best, (pts[i] - pts[j]).squaredNorm());
    }
  }
  return best;
}

}  // namespace

std::vector<Vector> lhs_maximin(int count, int dim, Rng& rng, int restarts) {
  std::vector<Vector> best = lhs_plain(count, dim, rng);
  if (count == 1) return best;
  double best_score = min_pairwise_sq_dist(best);
  for (int r = 1; r < restarts; ++r) {
    std::vector<Vector> cand = lhs_plain(count, dim, rng);
    const double score = min_pairwise_sq_dist(cand);
    if (score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

std::vector<Vector> uniform_candidates(const BoxRegion& region, int count, Rng& rng) {
  if (count < 0) throw std::invalid_argument("uniform_candidates: negative count");
  if (region.degenerate()) throw std::invalid_argument("uniform_candidates: degenerate region");
  std::vector<Vector> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vector x(region.dim());
    for (int j = 0; j < region.dim(); ++j) {
      x[j] = region.lower[j] + rng.uniform() * (region.upper[j] - region.lower[j]);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Particle swarm

SearchResult pso(const std::function<double(const Vector&)>& objective,
                 const BoxRegion& region, int particles, int iterations, Rng& rng) {
  if (region.degenerate()) throw std::invalid_argument("pso: degenerate region");
  const int d = region.dim();
  const double inertia = 0.72;
  const double c_cog = 1.49;
  const double c_soc = 1.49;
  const Vector vmax = 0.5 * region.width();

  std::vector<Vector> pos = uniform_candidates(region, particles, rng);
  std::vector<Vector> vel(particles, Vector::Zero(d));
  std::vector<Vector> pbest = pos;
  std::vector<double> pbest_val(particles);
  std::vector<double> val(particles);

  const auto evaluate_all = [&]() {
    par::map(particles, [&](std::ptrdiff_t i) { val[i] = objective(pos[i]); });
  };

  evaluate_all();
  int gbest = 0;
  for (int i = 0; i < particles; ++i) {
    pbest_val[i] = val[i];
    if (val[i] > val[gbest]) gbest = i;
  }
  Vector gbest_pos = pos[gbest];
  double gbest_val = val[gbest];

  for (int it = 0; it < iterations; ++it) {
    for (int i = 0; i < particles; ++i) {
      for (int j = 0; j < d; ++j) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        double v = inertia * vel[i][j] + c_cog * r1 * (pbest[i][j] - pos[i][j]) +
                   c_soc * r2 * (gbest_pos[j] - pos[i][j]);
        v = std::clamp(v, -vmax[j], vmax[j]);
        double x = pos[i][j] + v;
        if (x < region.lower[j]) {
          x = region.lower[j];
          v = 0.0;
        } else if (x > region.upper[j]) {
          x = region.upper[j];
          v = 0.0;
        }
        vel[i][j] = v;
        pos[i][j] = x;
      }
    }
    evaluate_all();
    for (int i = 0; i < particles; ++i) {
      if (val[i] > pbest_val[i]) {
        pbest_val[i] = val[i];
        pbest[i] = pos[i];
      }
      if (val[i] > gbest_val) {
        gbest_val = val[i];
        gbest_pos = pos[i];
      }
    }
  }
  return {gbest_pos, gbest_val};
}

// ---------------------------------------------------------------------------
// Bounded L-BFGS ascent

namespace {

// Project the gradient onto the feasible directions at x (zero components
// that point out of the box at an active bound).
Vector projected_gradient(const Vector& x, const Vector& g, const BoxRegion& box,
                          double tol) {
  Vector pg = g;
  for (int j = 0; j < x.size(); ++j) {
    if (x[j] <= box.lower[j] + tol && g[j] < 0.0) pg[j] = 0.0;
    if (x[j] >= box.upper[j] - tol && g[j] > 0.0) pg[j] = 0.0;
  }
  return pg;
}

}  // namespace

SearchResult lbfgsb_max(const std::function<double(const Vector&, Vector*)>& fg,
                        const Vector& start, const BoxRegion& region,
                        const LbfgsOptions& opts) {
  if (region.degenerate()) throw std::invalid_argument("lbfgsb_max: degenerate region");
  const int d = region.dim();
  const double bound_tol = 1e-12;

  Vector x = region.clamp(start);
  Vector g(d);
  double f = fg(x, &g);
  if (!std::isfinite(f)) throw std::invalid_argument("lbfgsb_max: non-finite value at start");

  Vector best_x = x;
  double best_f = f;

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Vector pg = projected_gradient(x, g, region, bound_tol);
    if (pg.lpNorm<Eigen::Infinity>() <= opts.grad_tol) break;

    // Two-loop recursion on the projected gradient (ascent direction).
    Vector q = pg;
    std::vector<double> a_coef(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a_coef[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a_coef[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const Vector& s = s_hist.back();
      const Vector& y = y_hist.back();
      q *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a_coef[i] - b) * s_hist[i];
    }
    Vector dir = q;
    if (dir.dot(pg) <= 0.0) dir = pg;  // fallback to steepest ascent

    // Backtracking Armijo line search on the projected step.
    double step = 1.0;
    const double slope = dir.dot(pg);
    bool moved = false;
    Vector x_new, g_new;
    double f_new = f;
    for (int ls = 0; ls < 40; ++ls) {
      Vector trial = region.clamp(x + step * dir);
      if ((trial - x).lpNorm<Eigen::Infinity>() < opts.step_tol * (1.0 + x.norm())) {
        step *= 0.5;
        continue;
      }
      Vector gt(d);
      const double ft = fg(trial, &gt);
      if (std::isfinite(ft) && ft >= f + 1e-4 * step * slope) {
        x_new = std::move(trial);
        g_new = std::move(gt);
        f_new = ft;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;

    const Vector s = x_new - x;
    const Vector y = g_new - g;  // ascent curvature pair uses -dg below
    const double sy = -s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(-y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double df = f_new - f;
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
    if (std::abs(df) <= opts.step_tol * (1.0 + std::abs(f)) &&
        s.lpNorm<Eigen::Infinity>() <= opts.step_tol * (1.0 + x.norm()))
      break;
  }
  return {best_x, best_f};
}

SearchResult local_refine(const std::function<double(const Vector&)>& objective,
                          const Vector& start, const BoxRegion& region,
                          const LbfgsOptions& opts) {
  if (region.degenerate()) throw std::invalid_argument("local_refine: degenerate region");
  if (!region.contains(start, 1e-9))
    throw std::invalid_argument("local_refine: start outside region");
  const double f0 = objective(region.clamp(start));
  if (!std::isfinite(f0)) throw std::invalid_argument("local_refine: non-finite objective at start");

  const auto fg = [&](const Vector& x, Vector* grad) {
    const double f = objective(x);
    if (grad) {
      grad->resize(x.size());
      for (int j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        double xu = x[j] + h, xl = x[j] - h;
        // One-sided at a box face.
        if (xu > region.upper[j]) xu = x[j];
        if (xl < region.lower[j]) xl = x[j];
        if (xu == xl) {
          (*grad)[j] = 0.0;
          continue;
        }
        Vector p = x;
        p[j] = xu;
        const double fu = objective(p);
        p[j] = xl;
        const double fl = objective(p);
        (*grad)[j] = (fu - fl) / (xu - xl);
      }
    }
    return f;
  };
  SearchResult res = lbfgsb_max(fg, start, region, opts);
  if (res.value < f0) return {region.clamp(start), f0};
  return res;
}

}  // namespace ogpit::opt
