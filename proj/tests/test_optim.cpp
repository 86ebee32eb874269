#include <doctest.h>

#include <cmath>
#include <set>

#include "ogpit/optim.hpp"
#include "ogpit/rng.hpp"

using namespace ogpit;
using opt::BoxRegion;
using opt::Vector;

namespace {

BoxRegion unit_box(int d) {
  BoxRegion b;
  b.lower = Vector::Constant(d, 0.0);
  b.upper = Vector::Constant(d, 1.0);
  return b;
}

double min_pairwise_dist(const std::vector<Vector>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::min(best, (pts[i] - pts[j]).norm());
  return best;
}

}  // namespace

TEST_CASE("latin hypercube stratification") {
  Rng rng(42);
  const auto single = opt::lhs_maximin(1, 3, rng);
  REQUIRE(single.size() == 1);
  for (int j = 0; j < 3; ++j) CHECK((single[0][j] >= 0.0 && single[0][j] < 1.0));

  const auto two = opt::lhs_maximin(2, 1, rng);
  REQUIRE(two.size() == 2);
  CHECK(std::min(two[0][0], two[1][0]) < 0.5);
  CHECK(std::max(two[0][0], two[1][0]) >= 0.5);

  // One point per axis stratum, every dimension.
  const int n = 16;
  const auto pts = opt::lhs_maximin(n, 4, rng, 10);
  for (int j = 0; j < 4; ++j) {
    std::set<int> strata;
    for (const auto& p : pts) strata.insert(static_cast<int>(p[j] * n));
    CHECK(static_cast<int>(strata.size()) == n);
  }
}

TEST_CASE("maximin improves the minimal pairwise distance") {
  int wins = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng r_plain(seed), r_max(seed);
    const auto plain = opt::lhs_plain(10, 2, r_plain);
    const auto maximin = opt::lhs_maximin(10, 2, r_max, 100);
    if (min_pairwise_dist(maximin) >= min_pairwise_dist(plain)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("uniform candidates") {
  BoxRegion box;
  box.lower = Vector::Constant(3, -2.0);
  box.upper = Vector::Constant(3, 5.0);
  Rng rng(7);
  CHECK(opt::uniform_candidates(box, 0, rng).empty());
  const auto pts = opt::uniform_candidates(box, 2000, rng);
  for (const auto& p : pts) CHECK(box.contains(p));

  // Empirical mean near the box midpoint.
  Rng rng2(8);
  const int big = 100000;
  const auto many = opt::uniform_candidates(box, big, rng2);
  for (int j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (const auto& p : many) mean += p[j];
    mean /= big;
    const double width = box.upper[j] - box.lower[j];
    const double se = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(big));
    CHECK(std::abs(mean - 0.5 * (box.lower[j] + box.upper[j])) <= 3.0 * se);
  }

  BoxRegion bad = box;
  bad.upper[0] = bad.lower[0];
  CHECK_THROWS_AS(opt::uniform_candidates(bad, 10, rng), std::invalid_argument);
}

TEST_CASE("pso on standard shapes") {
  BoxRegion box;
  box.lower = Vector::Constant(2, -3.0);
  box.upper = Vector::Constant(2, 3.0);

  SUBCASE("constant objective returns a feasible point") {
    Rng rng(1);
    const auto res = opt::pso([](const Vector&) { return 2.5; }, box, 20, 10, rng);
    CHECK(res.value == 2.5);
    CHECK(box.contains(res.point));
  }

  SUBCASE("concave quadratic, interior maximizer") {
    Vector target(2);
    target << 0.7, -1.2;
    const auto objective = [&](const Vector& x) { return -(x - target).squaredNorm(); };
    for (int seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      const auto res = opt::pso(objective, box, 50, 40, rng);
      CHECK(res.value >= -1e-3);
    }
  }

  SUBCASE("maximizer on the boundary") {
    const auto objective = [](const Vector& x) { return x[0] + 0.3 * x[1]; };
    Rng rng(3);
    const auto res = opt::pso(objective, box, 50, 40, rng);
    CHECK(std::abs(res.point[0] - box.upper[0]) <= 1e-2);
    CHECK(std::abs(res.point[1] - box.upper[1]) <= 1e-2);
  }

  SUBCASE("deterministic given the seed") {
    const auto objective = [](const Vector& x) { return -x.squaredNorm(); };
    Rng r1(11), r2(11);
    const auto a = opt::pso(objective, box, 30, 20, r1);
    const auto b = opt::pso(objective, box, 30, 20, r2);
    CHECK(a.value == b.value);
    CHECK((a.point - b.point).norm() == 0.0);
  }
}

TEST_CASE("local refinement") {
  BoxRegion box;
  box.lower = Vector::Constant(1, -4.0);
  box.upper = Vector::Constant(1, 4.0);

  SUBCASE("fixed point at an interior stationary maximum") {
    const auto objective = [](const Vector& x) { return -(x[0] - 1.0) * (x[0] - 1.0); };
    Vector start(1);
    start << 1.0;
    const auto res = opt::local_refine(objective, start, box);
    CHECK(std::abs(res.point[0] - 1.0) <= 1e-6);
  }

  SUBCASE("1-d concave quadratic converges to the vertex") {
    const auto objective = [](const Vector& x) {
      return -(x[0] - 0.37) * (x[0] - 0.37) + 2.0;
    };
    Vector start(1);
    start << -3.0;
    const auto res = opt::local_refine(objective, start, box);
    CHECK(std::abs(res.point[0] - 0.37) <= 1e-6);
    CHECK(res.value >= objective(start) - 1e-12);
  }

  SUBCASE("maximizer outside the region projects to the boundary") {
    const auto objective = [](const Vector& x) { return -(x[0] - 9.0) * (x[0] - 9.0); };
    Vector start(1);
    start << 0.0;
    const auto res = opt::local_refine(objective, start, box);
    CHECK(std::abs(res.point[0] - 4.0) <= 1e-4);
  }

  SUBCASE("2-d bowl from an off-center start, boundary-constrained coordinate") {
    BoxRegion b2;
    b2.lower = Vector::Constant(2, -1.0);
    b2.upper = Vector::Constant(2, 1.0);
    Vector target(2);
    target << 0.4, 3.0;  // second coordinate beyond the box
    const auto objective = [&](const Vector& x) { return -(x - target).squaredNorm(); };
    Vector start = Vector::Zero(2);
    const auto res = opt::local_refine(objective, start, b2);
    CHECK(std::abs(res.point[0] - 0.4) <= 1e-4);
    CHECK(std::abs(res.point[1] - 1.0) <= 1e-4);
  }

  SUBCASE("refinement never worsens a pso result") {
    BoxRegion b2;
    b2.lower = Vector::Constant(2, -2.0);
    b2.upper = Vector::Constant(2, 2.0);
    const auto objective = [](const Vector& x) {
      return std::sin(3.0 * x[0]) * std::cos(2.0 * x[1]) - 0.1 * x.squaredNorm();
    };
    Rng rng(77);
    const auto coarse = opt::pso(objective, b2, 30, 15, rng);
    const auto fine = opt::local_refine(objective, coarse.point, b2);
    CHECK(fine.value >= coarse.value - 1e-12);
  }

  SUBCASE("non-finite start is rejected") {
    const auto objective = [](const Vector& x) {
      return x[0] > 0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
    };
    Vector start(1);
    start << 1.0;
    CHECK_THROWS_AS(opt::local_refine(objective, start, box), std::invalid_argument);
  }
}
