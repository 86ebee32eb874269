#include <doctest.h>

#include <cmath>

#include "ogpit/problems.hpp"

using namespace ogpit;
using prob::Vector;

TEST_CASE("benchmark objectives") {
  SUBCASE("sphere family vanishes at the shifted optimum") {
    for (int d : {2, 4, 6}) {
      const prob::Problem s = prob::make_benchmark1("sphere", d, 0.0);
      const prob::Problem q = prob::make_benchmark1("sqsphere", d, 0.0);
      const Vector xstar = Vector::Constant(d, 0.3);
      CHECK(s.true_objective(xstar) == doctest::Approx(0.0));
      CHECK(q.true_objective(xstar) == doctest::Approx(0.0));
      CHECK(s.optimum_value == 0.0);
      // The squared form is the square of the plain form.
      const Vector x = Vector::Constant(d, -1.1);
      CHECK(q.true_objective(x) ==
            doctest::Approx(std::pow(s.true_objective(x), 2)).epsilon(1e-12));
    }
  }

  SUBCASE("rosenbrock vanishes at the all-ones point") {
    for (int d : {2, 4}) {
      const prob::Problem p = prob::make_benchmark1("rosenbrock", d, 0.0);
      CHECK(p.true_objective(Vector::Constant(d, 1.0)) == doctest::Approx(0.0));
    }
  }

  SUBCASE("branin optimum confirmed by local refinement from textbook starts") {
    const prob::Problem p = prob::make_benchmark1("branin", 2, 0.0);
    const double pi = 3.141592653589793;
    const double starts[3][2] = {{-pi, 12.275}, {pi, 2.275}, {9.42478, 2.475}};
    const auto neg = [&](const Vector& x) { return -p.true_objective(x); };
    for (const auto& s : starts) {
      Vector x0(2);
      x0 << s[0], s[1];
      const opt::SearchResult res = opt::local_refine(neg, x0, p.bounds);
      CHECK(-res.value == doctest::Approx(p.optimum_value).epsilon(1e-9));
    }
  }

  SUBCASE("unsupported name-dim pairs are rejected") {
    CHECK_THROWS_AS(prob::make_benchmark1("sphere", 3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(prob::make_benchmark1("branin", 4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(prob::from_id("nosuch-2", 0.0), std::invalid_argument);
  }
}

TEST_CASE("stochastic evaluation") {
  const prob::Problem p = prob::make_benchmark1("sphere", 2, 0.0);
  acq::CostModel cost{1.0, 0.001};
  Rng rng(100);
  const Vector x = Vector::Constant(2, 1.0);

  SUBCASE("noise-free samples all equal the objective") {
    const auto r = prob::evaluate(p, x, 5, cost, rng);
    for (double v : r.samples) CHECK(v == p.true_objective(x));
    CHECK(r.cost_charged == doctest::Approx(1.005));
  }

  SUBCASE("cost arithmetic") {
    const auto r = prob::evaluate(p, x, 3, cost, rng);
    CHECK(r.cost_charged == doctest::Approx(1.003));
    CHECK(r.samples.size() == 3);
  }

  SUBCASE("sample mean concentrates at the true value") {
    const prob::Problem noisy = prob::make_benchmark1("sphere", 2, 0.5);
    const int reps = 100000;
    const auto r = prob::evaluate(noisy, x, reps, cost, rng);
    double mean = 0.0;
    for (double v : r.samples) mean += v;
    mean /= reps;
    CHECK(std::abs(mean - noisy.true_objective(x)) <=
          3.0 * noisy.noise_sd / std::sqrt(static_cast<double>(reps)));
  }

  SUBCASE("noise draws are serially uncorrelated") {
    const prob::Problem noisy = prob::make_benchmark1("sphere", 2, 1.0);
    const int reps = 100000;
    const auto r = prob::evaluate(noisy, x, reps, cost, rng);
    const double f = noisy.true_objective(x);
    double lag1 = 0.0, var = 0.0;
    for (int i = 0; i + 1 < reps; ++i)
      lag1 += (r.samples[i] - f) * (r.samples[i + 1] - f);
    for (int i = 0; i < reps; ++i) var += (r.samples[i] - f) * (r.samples[i] - f);
    CHECK(std::abs(lag1 / var) <= 3.0 / std::sqrt(static_cast<double>(reps)));
  }

  SUBCASE("out-of-bounds points are rejected") {
    CHECK_THROWS_AS(prob::evaluate(p, Vector::Constant(2, 99.0), 1, cost, rng),
                    std::invalid_argument);
    CHECK_THROWS_AS(prob::evaluate(p, x, 0, cost, rng), std::invalid_argument);
  }
}

TEST_CASE("least squares constructor") {
  SUBCASE("single coordinate residual") {
    auto f1 = [](const Vector& x) { return x[0]; };
    opt::BoxRegion b;
    b.lower = Vector::Constant(2, -1.0);
    b.upper = Vector::Constant(2, 1.0);
    const prob::Problem p = prob::make_least_squares("t", 2, {f1}, b, 0.0, 0.0);
    Vector x(2);
    x << 0.7, -0.3;
    CHECK(p.true_objective(x) == doctest::Approx(0.49));
  }

  SUBCASE("rosenbrock residual form equals the direct form") {
    const prob::Problem direct = prob::make_benchmark1("rosenbrock", 2, 0.0);
    const prob::Problem ls = prob::from_id("ls-rosen-2", 0.0);
    Rng rng(55);
    for (int i = 0; i < 100; ++i) {
      Vector x(2);
      x << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0);
      CHECK(ls.true_objective(x) ==
            doctest::Approx(direct.true_objective(x)).epsilon(1e-10));
    }
  }

  SUBCASE("all-zero residuals give the zero objective") {
    auto z = [](const Vector&) { return 0.0; };
    opt::BoxRegion b;
    b.lower = Vector::Constant(1, -1.0);
    b.upper = Vector::Constant(1, 1.0);
    const prob::Problem p = prob::make_least_squares("z", 1, {z, z, z}, b, 0.0);
    CHECK(p.true_objective(Vector::Constant(1, 0.5)) == 0.0);
    CHECK(p.optimum_value == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("bundled instances have consistent optima") {
    const prob::Problem lin = prob::from_id("ls-linear-4", 0.0);
    CHECK(lin.true_objective(Vector::Constant(4, -1.0)) ==
          doctest::Approx(lin.optimum_value).epsilon(1e-12));
    const prob::Problem pow4 = prob::from_id("ls-powell-4", 0.0);
    CHECK(pow4.true_objective(Vector::Zero(4)) == doctest::Approx(0.0));
  }

  SUBCASE("empty residual list is rejected") {
    opt::BoxRegion b;
    b.lower = Vector::Constant(1, -1.0);
    b.upper = Vector::Constant(1, 1.0);
    CHECK_THROWS_AS(prob::make_least_squares("e", 1, {}, b, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("registry regret nonnegativity") {
  Rng rng(8899);
  for (const std::string& id : prob::registry_ids()) {
    const prob::Problem p = prob::from_id(id, 0.0);
    for (int i = 0; i < 10000; ++i) {
      Vector x(p.dim);
      for (int j = 0; j < p.dim; ++j)
        x[j] = rng.uniform(p.bounds.lower[j], p.bounds.upper[j]);
      CHECK(p.true_objective(x) - p.optimum_value >= -1e-12);
    }
  }
}
