#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "pzo/dynamics.hpp"
#include "pzo/integrator.hpp"

using namespace pzo;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Problem scalar_square() { return make_quadratic_problem(Mat::Constant(1, 1, 2.0), Vec::Zero(1), 0.0); }

Problem norm_square(Eigen::Index n) { return make_quadratic_problem(2.0 * Mat::Identity(n, n), Vec::Zero(n), 0.0); }

FeasibleSetd unit_box() { return FeasibleSetd::box(v2(-1, -1), v2(1, 1)); }

std::vector<Rational> kappa23() { return {Rational(2), Rational(3)}; }

// Average over one common period of a function of the probe, by the midpoint rule.
template <typename Fn>
Vec period_average(const DitherBankd& bank, Fn&& fn, int nodes = 6000) {
  const double T = bank.common_period();
  Vec acc;
  for (int j = 0; j < nodes; ++j) {
    const Vec value = fn(bank.probe_after(T * (j + 0.5) / nodes));
    acc = j ? Vec(acc + value) : value;
  }
  return acc / nodes;
}

}  // namespace

TEST_CASE("vanilla ES field") {
  const Problem sq = scalar_square();
  const ZerothOrderOracle zo(sq);
  const MeasurementChannel channel(zo);
  GainSet gains;
  gains.k_x = 1.0;
  gains.eps_a = 1e-2;
  gains.eps_omega = 0.1;

  CHECK(vanilla_es_field(1.0, 0.0, channel, gains) == 0.0);

  const double period = gains.eps_omega;  // kappa = 1
  const int nodes = 4000;
  double acc = 0.0;
  for (int j = 0; j < nodes; ++j) acc += vanilla_es_field(1.0, period * j / nodes, channel, gains);
  CHECK(acc / nodes == doctest::Approx(-2.0).epsilon(1e-6));

  Problem::Definition def;
  def.name = "constant";
  def.n = 1;
  def.f = [](const Vec&, const Vec&, int) { return 7.0; };
  const Problem flat(def);
  const ZerothOrderOracle flat_zo(flat);
  const MeasurementChannel flat_channel(flat_zo);
  acc = 0.0;
  for (int j = 0; j < nodes; ++j) acc += vanilla_es_field(1.0, period * j / nodes, flat_channel, gains);
  CHECK(std::abs(acc / nodes) <= 1e-9);
}

TEST_CASE("P-GZO field examples") {
  GainSet gains;
  gains.k_x = 1.0;
  gains.alpha_x = 1.0;
  const DitherBankd bank(kappa23(), 0.01, gains.eps_a);

  SUBCASE("rest at the unconstrained minimizer") {
    const Problem pb = norm_square(2);
    const ZerothOrderOracle zo(pb);
    const GzoState s{Vec::Zero(2), Vec::Zero(2), bank};
    const GzoRate r = gzo_field(s, MeasurementChannel(zo), FeasibleSetd::whole(2), gains, Vec());
    CHECK(r.dx.isZero(0.0));
    CHECK(r.dmu == bank.rate());
  }
  SUBCASE("the boundary blocks outward motion") {
    const Problem pb = norm_square(2);
    const ZerothOrderOracle zo(pb);
    const GzoState s{v2(1, 0), v2(-1, 0), bank};
    const GzoRate r = gzo_field(s, MeasurementChannel(zo), unit_box(), gains, Vec());
    CHECK(r.dx.isZero(0.0));
  }
  SUBCASE("perturbed input and filter drive") {
    const Problem pb = make_tracking_problem();
    const ZerothOrderOracle zo(pb);
    const Vec probe = v2(0.3, -0.8);
    const Vec x = v2(0.2, 0.1), xi = v2(1, 2), theta = v2(1, 1);
    const GzoRate r = gzo_rate(x, xi, probe, MeasurementChannel(zo), FeasibleSetd::whole(2), gains, theta);
    const Vec xhat = x + gains.eps_a * probe;
    CHECK((r.xhat - xhat).norm() == 0.0);
    const Vec drive = (2.0 / gains.eps_a) * (xhat - theta).squaredNorm() * probe;
    CHECK((r.dxi - (drive - xi) / gains.eps_xi).norm() < 1e-10);
    CHECK((r.dx - (-gains.alpha_x * xi)).norm() < 1e-15);
  }
}

TEST_CASE("filter settles on the gradient at a frozen point") {
  const Problem pb = norm_square(2);
  const ZerothOrderOracle zo(pb);
  const MeasurementChannel channel(zo);
  GainSet gains;
  gains.eps_a = 1e-2;
  gains.eps_omega = 1e-2;
  gains.eps_xi = 0.05;
  const DitherBankd bank(kappa23(), gains.eps_omega, gains.eps_a);
  const Vec x = v2(1, 0);
  const double h = gains.eps_omega / 60.0;
  const double horizon = 10.0 / gains.eps_xi;
  const long steps = std::lround(horizon / h);
  Vec xi = Vec::Zero(2);
  for (long k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * h;
    xi = rk4_step(xi, t0, h, [&](double t, const Vec& z) {
      const Vec probe = bank.probe_after(t);
      return Vec(((2.0 / gains.eps_a) * zo.f(Vec(x + gains.eps_a * probe), Vec()) * probe - z) / gains.eps_xi);
    });
  }
  // the filter carries a ripple at the dither frequencies; compare its period average
  const double T = bank.common_period();
  const long period_steps = std::lround(T / h);
  Vec avg = Vec::Zero(2);
  for (long k = 0; k < period_steps; ++k) {
    const double t0 = horizon + static_cast<double>(k) * h;
    xi = rk4_step(xi, t0, h, [&](double t, const Vec& z) {
      const Vec probe = bank.probe_after(t);
      return Vec(((2.0 / gains.eps_a) * zo.f(Vec(x + gains.eps_a * probe), Vec()) * probe - z) / gains.eps_xi);
    });
    avg += xi;
  }
  avg /= static_cast<double>(period_steps);
  CHECK((avg - v2(2, 0)).norm() <= 5 * gains.eps_a);
}

TEST_CASE("P-PDZO field examples") {
  const Problem desk = make_desk_kkt_problem();
  const ZerothOrderOracle zo(desk);
  const MeasurementChannel channel(zo);
  const FeasibleSetd box = FeasibleSetd::box(v2(0, 0), v2(3, 3));
  GainSet gains;
  gains.eps_a = 1e-2;
  const DitherBankd bank(kappa23(), 0.01, gains.eps_a);

  SUBCASE("dual stays at zero while the constraint is slack") {
    const Vec x = v2(0.5, 0.5);
    const Vec g = zo.g(x);
    REQUIRE(g(0) < 0);
    const PdzoState s{x, Vec::Zero(1), Vec::Zero(2), g, bank};
    const PdzoRate r = pdzo_field(s, channel, box, gains, Vec());
    CHECK(r.dlambda(0) == 0.0);
  }

  SUBCASE("averaged field vanishes at the saddle point") {
    const Vec x = v2(1, 1), lambda = Vec::Constant(1, 2.0);
    // average filter drives at the saddle point, with zero filter states
    const Vec drive1 = period_average(bank, [&](const Vec& probe) {
      return Vec(gains.eps_xi * pdzo_rate(x, lambda, Vec::Zero(2), Vec::Zero(1), probe, channel, box, gains, Vec()).dxi1);
    });
    const Vec drive2 = period_average(bank, [&](const Vec& probe) {
      return Vec(gains.eps_xi * pdzo_rate(x, lambda, Vec::Zero(2), Vec::Zero(1), probe, channel, box, gains, Vec()).dxi2);
    });
    CHECK(drive1.norm() <= 1e-9);
    CHECK(std::abs(drive2(0)) <= 1e-12);
    const PdzoRate r = pdzo_rate(x, lambda, drive1, drive2, Vec::Zero(2), channel, box, gains, Vec());
    CHECK(r.dx.norm() <= 1e-9);
    CHECK(r.dlambda.norm() <= 1e-9);
  }

  SUBCASE("xi2 settles on the constraint value") {
    Problem::Definition def;
    def.name = "curved constraint";
    def.n = 2;
    def.m = 1;
    def.f = [](const Vec& x, const Vec&, int) { return x.squaredNorm(); };
    def.g = [](const Vec& x) { return Vec::Constant(1, x.squaredNorm() - 1.0); };
    const Problem curved(def);
    const ZerothOrderOracle czo(curved);
    const MeasurementChannel cch(czo);
    const Vec x = v2(0.3, 0.4);
    const Vec drive2 = period_average(bank, [&](const Vec& probe) {
      return Vec(gains.eps_xi *
                 pdzo_rate(x, Vec::Zero(1), Vec::Zero(2), Vec::Zero(1), probe, cch, box, gains, Vec()).dxi2);
    });
    const double g_x = x.squaredNorm() - 1.0;
    // g(x + a mu) averages to g(x) + a^2 ||mu||^2 / 2 per channel
    CHECK(std::abs(drive2(0) - g_x) <= 2 * gains.eps_a * gains.eps_a);
    CHECK(std::abs(drive2(0) - g_x - gains.eps_a * gains.eps_a) <= 1e-9);
  }
}

TEST_CASE("DP-GZO field examples") {
  const Problem pb = norm_square(2);
  const ZerothOrderOracle zo(pb);
  const MeasurementChannel channel(zo);
  GainSet gains;
  gains.k_x = 2.0;
  const DitherBankd bank(kappa23(), 0.01, gains.eps_a);

  const GzoState inside{v2(0.2, -0.3), v2(0.7, 0.1), bank};
  CHECK((dpzo_field(inside, channel, unit_box(), gains, Vec()).dx - (-gains.k_x * v2(0.7, 0.1))).norm() == 0.0);

  const GzoState corner{v2(1, 1), v2(-1, 1), bank};
  const Vec expect = gains.k_x * oracle::box_cone_project(v2(-1, -1), v2(1, 1), v2(1, 1), v2(1, -1));
  CHECK(dpzo_field(corner, channel, unit_box(), gains, Vec()).dx == expect);
  CHECK(expect == v2(0, -2));

  const GzoState still{v2(1, 1), Vec::Zero(2), bank};
  CHECK(dpzo_field(still, channel, unit_box(), gains, Vec()).dx.isZero(0.0));

  const GzoState outside{v2(1.1, 0), v2(1, 0), bank};
  CHECK_THROWS_AS(dpzo_field(outside, channel, unit_box(), gains, Vec()), DomainError);
}

TEST_CASE("target gradient flow") {
  const Problem pb = make_tracking_problem();
  const GradientOracle go(pb);
  GainSet gains;
  const FeasibleSetd disk = FeasibleSetd::ball(v2(1.5, 0), 1.5);

  CHECK(target_gradient_flow(v2(2, 0.5), go, disk, gains, v2(2, 0.5)).isZero(0.0));
  // constrained minimizer for a parameter outside the disk
  CHECK(target_gradient_flow(v2(3, 0), go, disk, gains, v2(4, 0)).norm() < 1e-15);

  const Vec p = v2(0.3, -0.7), theta = v2(1, 2);
  CHECK((target_gradient_flow(p, go, FeasibleSetd::whole(2), gains, theta) -
         (-gains.k_x * gains.alpha_x * 2.0 * (p - theta)))
            .norm() < 1e-15);

  // p = (3, 0), theta = 0: p - 0.1 * (6, 0) = (2.4, 0) lies in the disk, so the rate is (-0.6, 0)
  CHECK((target_gradient_flow(v2(3, 0), go, disk, gains, v2(0, 0)) - v2(-0.6, 0)).norm() < 1e-15);
}

TEST_CASE("target saddle flow") {
  const Problem desk = make_desk_kkt_problem();
  const GradientOracle go(desk);
  GainSet gains;
  const FeasibleSetd box = FeasibleSetd::box(v2(0, 0), v2(3, 3));
  const auto [dp1, dp2] = target_saddle_flow(v2(1, 1), Vec::Constant(1, 2.0), go, box, gains, Vec());
  CHECK(dp1.norm() < 1e-15);
  CHECK(dp2.norm() < 1e-15);

  const auto [q1, q2] = target_saddle_flow(v2(0.5, 0.5), Vec::Zero(1), go, box, gains, Vec());
  CHECK(q2(0) == 0.0);
  CHECK(q1.norm() > 0.0);

  const Problem tracking = make_tracking_problem();
  const GradientOracle tgo(tracking);
  const Vec theta = v2(0.4, 2.0), p = v2(1, 0.2);
  const FeasibleSetd disk = FeasibleSetd::ball(v2(1.5, 0), 1.5);
  const auto [r1, r2] = target_saddle_flow(p, Vec(), tgo, disk, gains, theta);
  CHECK(r1 == target_gradient_flow(p, tgo, disk, gains, theta));
  CHECK(r2.size() == 0);
}

TEST_CASE("average P-GZO field") {
  const Problem pb = make_tracking_problem();
  const GradientOracle go(pb);
  GainSet gains;
  const FeasibleSetd disk = FeasibleSetd::ball(v2(1.5, 0), 1.5);
  const Vec theta = v2(2, 0.5);
  const Vec x = v2(1, -0.5);
  const auto [dx, dxi] = average_gzo_field(x, go.grad_f(x, theta), go, disk, gains, theta);
  CHECK(dxi.isZero(0.0));
  CHECK(dx.norm() > 0);
  const auto [ex, exi] = average_gzo_field(theta, Vec::Zero(2), go, disk, gains, theta);
  CHECK(ex.isZero(0.0));
  CHECK(exi.isZero(0.0));
}

TEST_CASE("scaling the objective with a matched step keeps the average equilibria") {
  Mat Q(2, 2);
  Q << 3, 1, 1, 2;
  const Vec c = v2(-1, 0.5);
  const double scale = 4.0;
  const Problem base = make_quadratic_problem(Q, c, 0.0);
  const Problem scaled = make_quadratic_problem(scale * Q, scale * c, 0.0);
  const GradientOracle gb(base), gs(scaled);
  GainSet gains;
  GainSet matched = gains;
  matched.alpha_x = gains.alpha_x / scale;
  const FeasibleSetd box = FeasibleSetd::box(v2(0, 0), v2(1, 1));
  for (const Vec& x : {v2(0.2, 0.7), v2(1, 0), v2(0, 0.3)}) {
    const Vec xi = gb.grad_f(x, Vec());
    const auto [dx_base, dxi_base] = average_gzo_field(x, xi, gb, box, gains, Vec());
    const auto [dx_scaled, dxi_scaled] = average_gzo_field(x, Vec(scale * xi), gs, box, matched, Vec());
    CHECK((dx_base - dx_scaled).norm() < 1e-14);
    CHECK((dxi_scaled - scale * dxi_base).norm() < 1e-12);
  }
}

TEST_CASE("composite Lyapunov function decreases along averaged DP-GZO") {
  const Problem pb = make_tracking_problem();
  const GradientOracle go(pb);
  GainSet gains;
  gains.k_x = 1.0;
  gains.eps_xi = 0.05;
  const Vec theta = v2(1.5, 0.3);
  const Vec x_star = v2(1, 0.3);
  const double weight = 0.5;
  auto V = [&](const Vec& x, const Vec& xi) {
    return (1 - weight) * (go.f(x, theta) - go.f(x_star, theta)) +
           0.5 * weight * (xi - go.grad_f(x, theta)).squaredNorm();
  };
  Vec x = v2(-0.8, -0.6), xi = Vec::Zero(2);
  const double h = 1e-4;
  double prev = V(x, xi);
  int increases = 0;
  for (int k = 0; k < 100000; ++k) {
    const auto [dx, dxi] = average_dpgzo_field(x, xi, go, unit_box(), gains, theta);
    x = project(unit_box(), Vec(x + h * dx));
    xi += h * dxi;
    const double now = V(x, xi);
    const bool near = (x - x_star).norm() < 1e-3 && (xi - go.grad_f(x_star, theta)).norm() < 1e-3;
    if (!near && now > prev + 1e-12) ++increases;
    prev = now;
  }
  CHECK(increases == 0);
  CHECK((x - x_star).norm() < 1e-3);
}

TEST_CASE("algorithm names") {
  for (auto a : {Algorithm::vanilla_es, Algorithm::pgzo, Algorithm::ppdzo, Algorithm::dpgzo, Algorithm::target_grad,
                 Algorithm::target_saddle, Algorithm::average_gzo})
    CHECK(parse_algorithm(to_string(a)) == a);
  CHECK_THROWS_AS(parse_algorithm("newton"), ValidationError);
  CHECK(is_zeroth_order(Algorithm::dpgzo));
  CHECK_FALSE(is_zeroth_order(Algorithm::average_gzo));
  GainSet bad;
  bad.eps_xi = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
