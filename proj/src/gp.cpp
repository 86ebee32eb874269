#include "ogpit/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ogpit/optim.hpp"
#include "ogpit/parallel.hpp"

namespace ogpit::gp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969;

double matern52_checked(const Vector& a, const Vector& b, const KernelSpec& k) {
  double prod = 1.0;
  double tsum = 0.0;
  for (int j = 0; j < a.size(); ++j) {
    const double t = kSqrt5 * std::abs(a[j] - b[j]) / k.lengthscales[j];
    prod *= 1.0 + t + t * t / 3.0;
    tsum += t;
  }
  return k.process_var * prod * std::exp(-tsum);
}

Matrix kernel_matrix(const DesignSet& d, const KernelSpec& k) {
  const int n = d.size();
  Matrix K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = k.process_var;
    for (int j = i + 1; j < n; ++j) {
      K(i, j) = K(j, i) = matern52_checked(d.location(i), d.location(j), k);
    }
  }
  return K;
}

Vector noise_over_reps(const DesignSet& d, const NoiseModel& noise) {
  Vector v(d.size());
  for (int i = 0; i < d.size(); ++i) {
    v[i] = noise.variance_at(d.location(i)) / static_cast<double>(d.rep_count(i));
  }
  return v;
}

Vector agg_mean_vector(const DesignSet& d) {
  Vector y(d.size());
  for (int i = 0; i < d.size(); ++i) y[i] = d.agg_mean(i);
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// DesignSet

long DesignSet::total_evals() const {
  long total = 0;
  for (long a : rep_counts_) total += a;
  return total;
}

int DesignSet::find(const Vector& x) const {
  for (int i = 0; i < size(); ++i) {
    if ((locations_[i] - x).norm() <= dedup_tol_) return i;
  }
  return -1;
}

int DesignSet::add_samples(const Vector& x, std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("add_samples: empty sample set");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("add_samples: non-finite sample");
  }
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  double ssd = 0.0;
  for (double s : samples) ssd += (s - mean) * (s - mean);
  return add_aggregate(x, static_cast<long>(samples.size()), mean, ssd);
}

int DesignSet::add_aggregate(const Vector& x, long count, double mean,
                             double sq_dev_sum) {
  if (x.size() != dim_) throw std::invalid_argument("add_aggregate: dimension mismatch");
  if (count < 1) throw std::invalid_argument("add_aggregate: count must be positive");
  if (!std::isfinite(mean) || !std::isfinite(sq_dev_sum))
    throw std::invalid_argument("add_aggregate: non-finite aggregate");
  sq_dev_sum = std::max(0.0, sq_dev_sum);

  const int i = find(x);
  if (i < 0) {
    locations_.push_back(x);
    rep_counts_.push_back(count);
    agg_means_.push_back(mean);
    sq_dev_sums_.push_back(count == 1 ? 0.0 : sq_dev_sum);
    return size() - 1;
  }
  // Streaming merge; equals recomputation from all raw samples.
  const double a = static_cast<double>(rep_counts_[i]);
  const double p = static_cast<double>(count);
  const double delta = mean - agg_means_[i];
  const double total = a + p;
  agg_means_[i] += delta * p / total;
  sq_dev_sums_[i] += sq_dev_sum + delta * delta * a * p / total;
  rep_counts_[i] += count;
  return i;
}

void DesignSet::remove(int i) {
  locations_.erase(locations_.begin() + i);
  rep_counts_.erase(rep_counts_.begin() + i);
  agg_means_.erase(agg_means_.begin() + i);
  sq_dev_sums_.erase(sq_dev_sums_.begin() + i);
}

Matrix DesignSet::location_matrix() const {
  Matrix X(size(), dim_);
  for (int i = 0; i < size(); ++i) X.row(i) = locations_[i].transpose();
  return X;
}

double DesignSet::pooled_variance(long min_dof) const {
  long dof = 0;
  double ssd = 0.0;
  for (int i = 0; i < size(); ++i) {
    dof += rep_counts_[i] - 1;
    ssd += sq_dev_sums_[i];
  }
  if (dof < min_dof) return -1.0;
  return ssd / static_cast<double>(dof);
}

// ---------------------------------------------------------------------------
// Kernel and noise

bool KernelSpec::valid() const {
  if (!(process_var > 0.0) || !std::isfinite(process_var)) return false;
  for (int j = 0; j < lengthscales.size(); ++j) {
    if (!(lengthscales[j] > 0.0) || !std::isfinite(lengthscales[j])) return false;
  }
  return lengthscales.size() > 0;
}

double matern52(const Vector& a, const Vector& b, const KernelSpec& k) {
  if (a.size() != b.size() || a.size() != k.lengthscales.size())
    throw std::invalid_argument("matern52: dimension mismatch");
  if (!k.valid()) throw std::invalid_argument("matern52: invalid kernel parameters");
  return matern52_checked(a, b, k);
}

NoiseModel NoiseModel::known(std::function<double(const Vector&)> r2) {
  NoiseModel m;
  m.kind_ = Kind::known_function;
  m.fn_ = std::move(r2);
  m.value_ = 0.0;
  return m;
}

NoiseModel NoiseModel::constant(double r2, Kind kind) {
  if (!(r2 >= 0.0) || !std::isfinite(r2))
    throw std::invalid_argument("NoiseModel: variance must be nonnegative");
  NoiseModel m;
  m.kind_ = kind;
  m.value_ = r2;
  return m;
}

double NoiseModel::variance_at(const Vector& x) const {
  if (kind_ == Kind::known_function) {
    const double v = fn_(x);
    if (!(v >= 0.0)) throw std::invalid_argument("NoiseModel: r^2(x) must be nonnegative");
    return v;
  }
  return value_;
}

// ---------------------------------------------------------------------------
// GPModel

GPModel::GPModel(DesignSet designs, KernelSpec kernel, NoiseModel noise)
    : designs_(std::move(designs)), kernel_(std::move(kernel)), noise_(std::move(noise)) {
  if (!kernel_.valid() || kernel_.lengthscales.size() != designs_.dim())
    throw std::invalid_argument("GPModel: invalid kernel for design dimension");
  factorize();
}

void GPModel::factorize() {
  const int n = designs_.size();
  jitter_ = 0.0;
  if (n == 0) {
    chol_.resize(0, 0);
    alpha_.resize(0);
    return;
  }
  Matrix C = kernel_matrix(designs_, kernel_);
  C.diagonal() += noise_over_reps(designs_, noise_);
  const Vector y = agg_mean_vector(designs_);

  double jitter = 0.0;
  const double max_jitter = 1e-4 * kernel_.process_var;
  while (true) {
    Matrix Cj = C;
    if (jitter > 0.0) Cj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(Cj);
    if (llt.info() == Eigen::Success) {
      chol_ = llt.matrixL();
      alpha_ = llt.solve(y);
      jitter_ = jitter;
      return;
    }
    if (jitter == 0.0) {
      jitter = 1e-10 * kernel_.process_var;
    } else if (jitter * 10.0 <= max_jitter) {
      jitter *= 10.0;
    } else {
      throw NumericalError("GPModel: covariance factorization failed at maximum jitter");
    }
  }
}

Vector GPModel::cross_vector(const Vector& x) const {
  const int n = designs_.size();
  Vector k(n);
  for (int i = 0; i < n; ++i) k[i] = matern52_checked(x, designs_.location(i), kernel_);
  return k;
}

GPModel GPModel::with_samples(const Vector& x, std::span<const double> samples) const {
  GPModel next = *this;
  next.designs_.add_samples(x, samples);
  next.factorize();
  return next;
}

GPModel GPModel::with_aggregate(const Vector& x, long count, double mean,
                                double sq_dev_sum) const {
  GPModel next = *this;
  next.designs_.add_aggregate(x, count, mean, sq_dev_sum);
  next.factorize();
  return next;
}

Prediction GPModel::predict(const Vector& x) const {
  if (x.size() != designs_.dim())
    throw std::invalid_argument("predict: dimension mismatch");
  const double prior = kernel_.process_var;
  const double r2 = noise_.variance_at(x);
  if (designs_.size() == 0) return {0.0, prior, prior + r2};
  const Vector k = cross_vector(x);
  const Vector v = chol_.triangularView<Eigen::Lower>().solve(k);
  const double mean = k.dot(alpha_);
  const double var_latent = std::max(0.0, prior - v.squaredNorm());
  return {mean, var_latent, var_latent + r2};
}

void GPModel::predict_batch(const Matrix& X, Vector& mean, Vector& var_latent) const {
  const auto rows = static_cast<std::ptrdiff_t>(X.rows());
  mean.resize(rows);
  var_latent.resize(rows);
  par::map(rows, [&](std::ptrdiff_t i) {
    const Prediction p = predict(X.row(i).transpose());
    mean[i] = p.mean;
    var_latent[i] = p.var_latent;
  });
}

double GPModel::latent_cov(const Vector& a, const Vector& b) const {
  const double kab = matern52_checked(a, b, kernel_);
  if (designs_.size() == 0) return kab;
  const Vector va = chol_.triangularView<Eigen::Lower>().solve(cross_vector(a));
  const Vector vb = chol_.triangularView<Eigen::Lower>().solve(cross_vector(b));
  return kab - va.dot(vb);
}

Matrix GPModel::latent_cov_matrix(const std::vector<Vector>& pts) const {
  const int q = static_cast<int>(pts.size());
  Matrix S(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = i; j < q; ++j) {
      S(i, j) = S(j, i) = (i == j) ? std::max(0.0, latent_cov(pts[i], pts[i]))
                                   : latent_cov(pts[i], pts[j]);
    }
  }
  return S;
}

double GPModel::fantasy_variance(const Vector& x_new, double reps,
                                 const Vector& x_query) const {
  if (!(reps > 0.0)) throw std::invalid_argument("fantasy_variance: reps must be positive");
  const double s2_new = predict(x_new).var_latent;
  const double denom = s2_new + noise_.variance_at(x_new) / reps;
  if (denom <= 0.0)
    throw NumericalError("fantasy_variance: degenerate conditioning variance");
  const double s2_query = predict(x_query).var_latent;
  const double cross = latent_cov(x_query, x_new);
  return std::max(0.0, s2_query - cross * cross / denom);
}

double GPModel::fantasy_mean(const Vector& x_new, double reps, double ybar_new,
                             const Vector& x_query) const {
  if (!(reps > 0.0)) throw std::invalid_argument("fantasy_mean: reps must be positive");
  const Prediction at_new = predict(x_new);
  const double denom = at_new.var_latent + noise_.variance_at(x_new) / reps;
  if (denom <= 0.0)
    throw NumericalError("fantasy_mean: degenerate conditioning variance");
  const double cross = latent_cov(x_query, x_new);
  return predict(x_query).mean + cross / denom * (ybar_new - at_new.mean);
}

LooPrediction GPModel::loo(int i) const {
  const int n = designs_.size();
  if (n < 2) throw std::invalid_argument("loo: needs at least two designs");
  if (i < 0 || i >= n) throw std::invalid_argument("loo: index out of range");
  Vector e = Vector::Zero(n);
  e[i] = 1.0;
  const Vector v = chol_.triangularView<Eigen::Lower>().solve(e);
  const double cinv_ii = v.squaredNorm();
  const double var = 1.0 / cinv_ii;
  const double mean = designs_.agg_mean(i) - alpha_[i] * var;
  return {mean, var};
}

Matrix GPModel::quadrature_nodes(const Vector& lower, const Vector& upper, int nodes) {
  const int d = static_cast<int>(lower.size());
  Matrix X(nodes, d);
  for (int k = 0; k < nodes; ++k) {
    for (int j = 0; j < d; ++j) {
      X(k, j) = lower[j] + sobol_point(static_cast<std::uint64_t>(k), j) *
                               (upper[j] - lower[j]);
    }
  }
  return X;
}

VarianceDecomposition GPModel::variance_decomposition(const Vector& lower,
                                                      const Vector& upper,
                                                      int nodes) const {
  const int d = designs_.dim();
  if (lower.size() != d || upper.size() != d)
    throw std::invalid_argument("variance_decomposition: dimension mismatch");
  for (int j = 0; j < d; ++j) {
    if (!(upper[j] > lower[j]))
      throw std::invalid_argument("variance_decomposition: degenerate box");
  }
  if (nodes < 2) throw std::invalid_argument("variance_decomposition: too few nodes");

  const Matrix X = quadrature_nodes(lower, upper, nodes);
  Vector mean, var_latent;
  predict_batch(X, mean, var_latent);

  double e_s2 = 0.0;
  double m_bar = 0.0;
  for (int k = 0; k < nodes; ++k) {
    e_s2 += var_latent[k];
    m_bar += mean[k];
  }
  e_s2 /= nodes;
  m_bar /= nodes;
  double var_m = 0.0;
  for (int k = 0; k < nodes; ++k) var_m += (mean[k] - m_bar) * (mean[k] - m_bar);
  var_m /= nodes;
  return {e_s2, var_m};
}

double GPModel::log_likelihood(const DesignSet& d, const KernelSpec& k,
                               const NoiseModel& noise, Vector* grad,
                               bool fitted_noise) {
  const int n = d.size();
  const int dim = d.dim();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  const int n_params = 1 + dim + (fitted_noise ? 1 : 0);
  if (grad) grad->setZero(n_params);

  Matrix K = kernel_matrix(d, k);
  Matrix C = K;
  C.diagonal() += noise_over_reps(d, noise);
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success) return neg_inf;

  const Vector y = agg_mean_vector(d);
  const Vector alpha = llt.solve(y);
  double logdet = 0.0;
  const Matrix& L = llt.matrixLLT();
  for (int i = 0; i < n; ++i) logdet += std::log(L(i, i));
  const double ll =
      -0.5 * y.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * 3.141592653589793);
  if (!grad) return ll;

  // d logL / d theta = 0.5 tr((alpha alpha^T - C^-1) dC/dtheta), in log scale.
  const Matrix Cinv = llt.solve(Matrix::Identity(n, n));
  const Matrix M = alpha * alpha.transpose() - Cinv;

  (*grad)[0] = 0.5 * M.cwiseProduct(K).sum();  // d/d log(process_var)

  for (int j = 0; j < dim; ++j) {
    double g = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const double t =
            kSqrt5 * std::abs(d.location(a)[j] - d.location(b)[j]) / k.lengthscales[j];
        const double w = t * t * (1.0 + t) / (3.0 * (1.0 + t + t * t / 3.0));
        g += M(a, b) * K(a, b) * w;  // symmetric pair counted once, doubled below
      }
    }
    (*grad)[1 + j] = g;  // 0.5 * 2 * sum over upper triangle
  }

  if (fitted_noise) {
    double g = 0.0;
    for (int i = 0; i < n; ++i) {
      g += M(i, i) * noise.value() / static_cast<double>(d.rep_count(i));
    }
    (*grad)[1 + dim] = 0.5 * g;
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting

FitResult fit_hyperparameters(const DesignSet& d, NoiseModel::Kind noise_kind,
                              const FitBounds& bounds, int restarts, Rng& rng,
                              const KernelSpec* warm_kernel,
                              const NoiseModel* warm_noise,
                              std::function<double(const Vector&)> known_r2) {
  const int n = d.size();
  const int dim = d.dim();
  if (n < 2) throw std::invalid_argument("fit_hyperparameters: needs at least two designs");

  // Standardize outputs; bounds refer to this scale.
  double mean_y = 0.0;
  for (int i = 0; i < n; ++i) mean_y += d.agg_mean(i);
  mean_y /= n;
  double var_y = 0.0;
  for (int i = 0; i < n; ++i) var_y += (d.agg_mean(i) - mean_y) * (d.agg_mean(i) - mean_y);
  var_y /= (n - 1);
  const double sd_y = std::max(std::sqrt(var_y), 1e-12);
  const double sd2 = sd_y * sd_y;

  DesignSet std_d(dim, d.dedup_tol());
  for (int i = 0; i < n; ++i) {
    std_d.add_aggregate(d.location(i), d.rep_count(i), (d.agg_mean(i) - mean_y) / sd_y,
                        d.sq_dev_sum(i) / sd2);
  }

  // Decide the noise treatment on the standardized problem.
  bool fit_noise = false;
  NoiseModel fixed_noise;
  NoiseModel::Kind out_kind = noise_kind;
  double pooled_std = -1.0;
  if (noise_kind == NoiseModel::Kind::known_function) {
    if (!known_r2)
      throw std::invalid_argument("fit_hyperparameters: known noise requires r^2 function");
    fixed_noise = NoiseModel::known([known_r2, sd2](const Vector& x) { return known_r2(x) / sd2; });
  } else if (noise_kind == NoiseModel::Kind::empirical_pooled) {
    const double pooled_raw = d.pooled_variance(3);
    if (pooled_raw >= 0.0) {
      pooled_std = pooled_raw / sd2;
      fixed_noise = NoiseModel::constant(pooled_std, NoiseModel::Kind::empirical_pooled);
    } else {
      out_kind = NoiseModel::Kind::constant_mle;  // not enough replicate dof
      fit_noise = true;
    }
  } else {
    fit_noise = true;
  }

  const int n_params = 1 + dim + (fit_noise ? 1 : 0);
  Vector lo(n_params), hi(n_params);
  lo[0] = std::log(bounds.process_var_lo);
  hi[0] = std::log(bounds.process_var_hi);
  for (int j = 0; j < dim; ++j) {
    lo[1 + j] = std::log(bounds.lengthscale_lo);
    hi[1 + j] = std::log(bounds.lengthscale_hi);
  }
  if (fit_noise) {
    lo[1 + dim] = std::log(bounds.noise_lo);
    hi[1 + dim] = std::log(bounds.noise_hi);
  }

  const auto unpack = [&](const Vector& theta) {
    KernelSpec k;
    k.process_var = std::exp(theta[0]);
    k.lengthscales = theta.segment(1, dim).array().exp();
    NoiseModel noise = fit_noise
                           ? NoiseModel::constant(std::exp(theta[1 + dim]), out_kind)
                           : fixed_noise;
    return std::pair<KernelSpec, NoiseModel>(std::move(k), std::move(noise));
  };

  const auto objective = [&](const Vector& theta, Vector* grad) {
    auto [k, noise] = unpack(theta);
    Vector g;
    const double ll = GPModel::log_likelihood(std_d, k, noise, grad ? &g : nullptr, fit_noise);
    if (grad) {
      if (std::isfinite(ll)) {
        *grad = g;
      } else {
        grad->setZero(n_params);
      }
    }
    return ll;
  };

  // Low-discrepancy starts in the log box, shifted by one random rotation.
  std::vector<Vector> starts;
  Vector shift(n_params);
  for (int j = 0; j < n_params; ++j) shift[j] = rng.uniform();
  for (int s = 0; s < std::max(1, restarts); ++s) {
    Vector theta(n_params);
    for (int j = 0; j < n_params; ++j) {
      double u = radical_inverse(static_cast<std::uint64_t>(s) + 1, kSmallPrimes[j]) + shift[j];
      u -= std::floor(u);
      theta[j] = lo[j] + u * (hi[j] - lo[j]);
    }
    starts.push_back(std::move(theta));
  }
  if (warm_kernel && warm_kernel->valid() && warm_kernel->lengthscales.size() == dim) {
    Vector theta(n_params);
    theta[0] = std::log(warm_kernel->process_var / sd2);
    for (int j = 0; j < dim; ++j) theta[1 + j] = std::log(warm_kernel->lengthscales[j]);
    if (fit_noise) {
      double w = bounds.noise_lo;
      if (warm_noise && warm_noise->kind() != NoiseModel::Kind::known_function)
        w = std::max(warm_noise->value() / sd2, bounds.noise_lo);
      theta[1 + dim] = std::log(w);
    }
    for (int j = 0; j < n_params; ++j) theta[j] = std::clamp(theta[j], lo[j], hi[j]);
    starts.push_back(std::move(theta));
  }

  opt::BoxRegion box{lo, hi};
  opt::LbfgsOptions opts;
  opts.max_iterations = 40;
  opts.grad_tol = 1e-5;
  double best_ll = -std::numeric_limits<double>::infinity();
  Vector best_theta;
  for (const Vector& start : starts) {
    if (!std::isfinite(objective(start, nullptr))) continue;
    const opt::SearchResult res = opt::lbfgsb_max(objective, start, box, opts);
    if (res.value > best_ll) {
      best_ll = res.value;
      best_theta = res.point;
    }
  }
  if (!std::isfinite(best_ll))
    throw NumericalError("fit_hyperparameters: all starts failed factorization");

  auto [k_std, noise_std] = unpack(best_theta);
  FitResult out;
  out.kernel.process_var = k_std.process_var * sd2;
  out.kernel.lengthscales = k_std.lengthscales;
  if (noise_kind == NoiseModel::Kind::known_function) {
    out.noise = NoiseModel::known(std::move(known_r2));
  } else if (out_kind == NoiseModel::Kind::empirical_pooled) {
    out.noise = NoiseModel::constant(pooled_std * sd2, NoiseModel::Kind::empirical_pooled);
  } else {
    out.noise = NoiseModel::constant(noise_std.value() * sd2, out_kind);
  }
  out.log_likelihood = best_ll;
  return out;
}

}  // namespace ogpit::gp
