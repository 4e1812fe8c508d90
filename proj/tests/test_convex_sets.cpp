#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "pzo/convex_sets.hpp"

using namespace pzo;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

FeasibleSetd unit_box() { return FeasibleSetd::box(v2(-1, -1), v2(1, 1)); }
FeasibleSetd disk() { return FeasibleSetd::ball(v2(1.5, 0), 1.5); }

FeasibleSetd triangle() {
  Mat A(3, 2);
  A << 1, 1, -1, 0, 0, -1;
  Vec b(3);
  b << 1, 0, 0;
  return FeasibleSetd::polytope(A, b);
}

FeasibleSetd slanted() {
  Mat A(3, 2);
  A << 1, 2, -1, 0, 0, -1;
  Vec b(3);
  b << 2, 0, 0;
  return FeasibleSetd::polytope(A, b);
}

std::vector<FeasibleSetd> zoo() {
  Mat A(4, 2);
  A << 1, 1, -1, 2, 0, -1, -2, -1;
  Vec b(4);
  b << 2, 2, 1, 2;
  return {unit_box(),
          disk(),
          triangle(),
          slanted(),
          FeasibleSetd::polytope(A, b),
          FeasibleSetd::orthant(2),
          FeasibleSetd::product({FeasibleSetd::box(Vec::Constant(1, 0.0), Vec::Constant(1, 1.0)),
                                 FeasibleSetd::orthant(1)})};
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace

TEST_CASE("projection examples") {
  CHECK((project(unit_box(), v2(2, 0.5)) - v2(1, 0.5)).norm() < 1e-15);
  CHECK((project(disk(), v2(4.5, 0)) - v2(3, 0)).norm() < 1e-15);
  CHECK((project(triangle(), v2(1, 1)) - v2(0.5, 0.5)).norm() < 1e-12);

  SUBCASE("slanted polytope against a grid search") {
    Mat A(3, 2);
    A << 1, 2, -1, 0, 0, -1;
    Vec b(3);
    b << 2, 0, 0;
    const Vec ref = oracle::grid_project_2d(A, b, v2(2, 2), 0.0, 2.0);
    const Vec got = project(slanted(), v2(2, 2));
    CHECK((got - ref).norm() < 1e-6);
    CHECK((got - v2(1.2, 0.4)).norm() < 1e-12);
  }
}

TEST_CASE("empty polytope is refused at construction") {
  Mat A(2, 1);
  A << 1, -1;
  Vec b(2);
  b << 0, -1;  // x <= 0 and x >= 1
  CHECK_THROWS_AS(FeasibleSetd::polytope(A, b), ConstructionError);
  CHECK_THROWS_AS(FeasibleSetd::ball(v2(0, 0), 0.0), ConstructionError);
  CHECK_THROWS_AS(FeasibleSetd::box(v2(1, 0), v2(0, 1)), ConstructionError);
}

TEST_CASE("membership examples") {
  CHECK(member(unit_box(), v2(0, 0), 0.0));
  CHECK_FALSE(member(unit_box(), v2(1 + 1e-6, 0), 0.0));
  CHECK(member(disk(), v2(3.0005, 0), 1e-3));
  CHECK_FALSE(member(disk(), v2(3.0005, 0), 1e-4));
}

TEST_CASE("tangent cone examples") {
  const Vec lo = v2(-1, -1), hi = v2(1, 1);
  CHECK(tangent_project(unit_box(), v2(0, 0), v2(3, -2)) == v2(3, -2));
  CHECK((tangent_project(unit_box(), v2(1, 0), v2(1, 1)) - v2(0, 1)).norm() == 0.0);
  const Vec corner = tangent_project(unit_box(), v2(1, 1), v2(1, -1));
  CHECK(corner == oracle::box_cone_project(lo, hi, v2(1, 1), v2(1, -1)));
  CHECK(corner == v2(0, -1));
  CHECK_THROWS_AS(tangent_project(unit_box(), v2(1.5, 0), v2(1, 0)), DomainError);
}

TEST_CASE("tangent cone of a box agrees with subset enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> face(0, 2);
  const Vec lo = v2(-1, -1), hi = v2(1, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec x = random_vec(rng, 2, 1.0);
    for (int i = 0; i < 2; ++i) {
      const int f = face(rng);
      if (f == 1) x(i) = 1.0;
      if (f == 2) x(i) = -1.0;
    }
    const Vec v = random_vec(rng, 2, 3.0);
    CHECK((tangent_project(unit_box(), x, v) - oracle::box_cone_project(lo, hi, x, v)).norm() < 1e-14);
  }
}

TEST_CASE("shrink examples") {
  const auto s = shrink(unit_box(), 1e-2);
  REQUIRE(s.kind() == SetKind::box);
  CHECK((s.as<BoxShape<double>>().lower - v2(-0.99, -0.99)).norm() < 1e-15);
  CHECK((s.as<BoxShape<double>>().upper - v2(0.99, 0.99)).norm() < 1e-15);

  const double eps_a = 1e-2;
  const auto d = shrink(disk(), eps_a);
  REQUIRE(d.kind() == SetKind::ball);
  CHECK(d.as<BallShape<double>>().radius == doctest::Approx(1.5 - eps_a).epsilon(1e-15));

  for (const auto& set : zoo()) {
    const auto same = shrink(set, 0.0);
    CHECK(same.kind() == set.kind());
    const Vec probe = v2(0.3, 2.0);
    CHECK(project(same, probe) == project(set, probe));
  }
  CHECK_THROWS_AS(shrink(unit_box(), 1.5), ConstructionError);
  CHECK_THROWS_AS(shrink(disk(), 2.0), ConstructionError);
}

TEST_CASE("shrunk set keeps every margin probe inside the base set") {
  std::mt19937_64 rng(5);
  const double margin = 0.05;
  for (const auto& base : {unit_box(), disk(), triangle(), slanted()}) {
    const auto s = shrink(base, margin);
    for (int k = 0; k < 2000; ++k) {
      const Vec p = project(s, random_vec(rng, 2, 3.0));
      Vec d = random_vec(rng, 2, 1.0);
      d *= margin / std::max(d.norm(), 1e-12);
      CHECK(member(base, Vec(p + d), 1e-12));
    }
  }
}

TEST_CASE("projection properties on random data") {
  std::mt19937_64 rng(1);
  for (const auto& set : zoo()) {
    CAPTURE(to_string(set.kind()));
    int nonexpansive_failures = 0, vi_failures = 0, idempotent_failures = 0, member_failures = 0;
    for (int k = 0; k < 10000; ++k) {
      const Vec u = random_vec(rng, 2, 4.0), v = random_vec(rng, 2, 4.0);
      const Vec pu = project(set, u), pv = project(set, v);
      if ((pu - pv).norm() > (u - v).norm() + 1e-9) ++nonexpansive_failures;
      if (!member(set, pu)) ++member_failures;
      if ((project(set, pu) - pu).norm() > 1e-12) ++idempotent_failures;
      if (k % 10 == 0) {
        // pv is a sample point of the set; the variational inequality must hold against it
        for (int j = 0; j < 10; ++j) {
          const Vec y = project(set, random_vec(rng, 2, 4.0));
          if ((u - pu).dot(pu - y) < -1e-9) ++vi_failures;
        }
        if ((u - pu).norm() > (u - pv).norm() + 1e-9) ++vi_failures;
      }
    }
    CHECK(nonexpansive_failures == 0);
    CHECK(vi_failures == 0);
    CHECK(idempotent_failures == 0);
    CHECK(member_failures == 0);
  }
}

TEST_CASE("tangent decomposition at boundary points") {
  std::mt19937_64 rng(3);
  for (const auto& set : zoo()) {
    CAPTURE(to_string(set.kind()));
    for (int k = 0; k < 2000; ++k) {
      const Vec outside = random_vec(rng, 2, 6.0);
      const Vec x = project(set, outside);
      if (!member(set, x)) continue;
      const Vec v = random_vec(rng, 2, 3.0);
      const Vec d = tangent_project(set, x, v);
      const Vec eta = v - d;
      CHECK(std::abs(eta.dot(d)) <= 1e-9);
      CHECK(std::abs(v.dot(d) - d.squaredNorm()) <= 1e-9);
    }
  }
}

TEST_CASE("product projection is component-wise") {
  const auto a = FeasibleSetd::ball(v2(0, 0), 1.0);
  const auto b = FeasibleSetd::box(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5));
  const auto c = FeasibleSetd::orthant(2);
  const auto prod = FeasibleSetd::product({a, b, c});
  REQUIRE(prod.dim() == 5);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 1000; ++k) {
    const Vec v = random_vec(rng, 5, 3.0);
    Vec expect(5);
    expect << project(a, Vec(v.head(2))), project(b, Vec(v.segment(2, 1))), project(c, Vec(v.tail(2)));
    CHECK(project(prod, v) == expect);
  }
}

TEST_CASE("single precision instantiation") {
  using Vf = Eigen::VectorXf;
  Vf lo(2), hi(2), v(2);
  lo << -1, -1;
  hi << 1, 1;
  v << 2, 0.5f;
  const auto box = FeasibleSet<float>::box(lo, hi);
  const Vf p = project(box, v);
  CHECK(p(0) == 1.0f);
  CHECK(p(1) == 0.5f);
}
