#include "pzo/problems.hpp"

#include <cmath>
#include <stdexcept>

#include "pzo/integrator.hpp"

namespace pzo {

Problem::Problem(Definition def)
    : def_(std::make_shared<const Definition>(std::move(def))), counters_(std::make_shared<Counters>()) {
  if (def_->n <= 0) throw ValidationError("problem '" + def_->name + "': dimension must be positive");
  if (!def_->f) throw ValidationError("problem '" + def_->name + "': objective missing");
  if (def_->m > 0 && !def_->g) throw ValidationError("problem '" + def_->name + "': constraints missing");
  if (def_->modes < 1) throw ValidationError("problem '" + def_->name + "': needs at least one mode");
}

CallCounts Problem::counts() const {
  return {counters_->f.load(), counters_->g.load(), counters_->grad_f.load(), counters_->jac_g.load()};
}

double ZerothOrderOracle::f(const Vec& x, const Vec& theta, int mode) const {
  problem_->counters_->f.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->f(x, theta, mode);
}

Vec ZerothOrderOracle::g(const Vec& x) const {
  if (problem_->def_->m == 0) return Vec();
  problem_->counters_->g.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->g(x);
}

GradientOracle::GradientOracle(const Problem& problem) : problem_(&problem) {
  if (!problem.has_gradients())
    throw ValidationError("problem '" + problem.name() + "' has no analytic derivatives");
}

double GradientOracle::f(const Vec& x, const Vec& theta, int mode) const {
  problem_->counters_->f.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->f(x, theta, mode);
}

Vec GradientOracle::g(const Vec& x) const {
  if (problem_->def_->m == 0) return Vec();
  problem_->counters_->g.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->g(x);
}

Vec GradientOracle::grad_f(const Vec& x, const Vec& theta, int mode) const {
  problem_->counters_->grad_f.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->grad_f(x, theta, mode);
}

Mat GradientOracle::jac_g(const Vec& x) const {
  if (problem_->def_->m == 0) return Mat(0, problem_->def_->n);
  problem_->counters_->jac_g.fetch_add(1, std::memory_order_relaxed);
  return problem_->def_->jac_g(x);
}

// ---------------------------------------------------------------------------

NoiseStream::NoiseStream(const NoiseSpec& spec) : spec_(spec), engine_(spec.seed) {
  if (!(spec.bound >= 0)) throw ValidationError("noise bound must be nonnegative");
}

Vec NoiseStream::sample(Eigen::Index dim) {
  Vec e = Vec::Zero(dim);
  if (spec_.bound > 0 && dim > 0) {
    if (spec_.mode == NoiseMode::constant_direction) {
      e(0) = spec_.bound;
    } else {
      for (Eigen::Index i = 0; i < dim; ++i) e(i) = gauss_(engine_);
      const double norm = e.norm();
      const double radius = spec_.bound * std::pow(uniform_(engine_), 1.0 / static_cast<double>(dim));
      e *= norm > 0 ? radius / norm : 0.0;
      if (const double len = e.norm(); len > spec_.bound) e *= spec_.bound / len;
    }
  }
  ++emitted_;
  max_emitted_ = std::max(max_emitted_, e.norm());
  return e;
}

double NoiseStream::sample_scalar() { return sample(1)(0); }

double evaluate_objective(const ZerothOrderOracle& oracle, const Vec& x, const Vec& theta, int mode,
                          NoiseStream* noise) {
  const double value = oracle.f(x, theta, mode);
  if (noise && noise->spec().on_measurement()) return value + noise->sample_scalar();
  return value;
}

Vec MeasurementChannel::g(const Vec& x) const {
  Vec value = oracle_.g(x);
  if (noise_ && noise_->spec().on_measurement() && value.size() > 0) value += noise_->sample(value.size());
  return value;
}

// ---------------------------------------------------------------------------

Vec enforce_exo_invariance(const Exosystem& exo, const Vec& theta, int* clamps) {
  if (!theta.allFinite()) throw ExosystemInvarianceError("exosystem state is not finite");
  const double drift = distance(exo.invariant_set, theta);
  if (drift == 0.0) return theta;
  if (drift > kExoClampTol)
    throw ExosystemInvarianceError("exosystem '" + exo.name + "' left its invariant set by " +
                                   std::to_string(drift));
  if (clamps) ++*clamps;
  return project(exo.invariant_set, theta);
}

Vec exo_step(const Exosystem& exo, const Vec& theta, double dt, int* clamps) {
  if (!(dt > 0)) throw ValidationError("exo_step: dt must be positive");
  const Vec next = rk4_step(theta, 0.0, dt, [&](double, const Vec& th) { return exo.velocity(th); });
  return enforce_exo_invariance(exo, next, clamps);
}

Exosystem static_exosystem(Eigen::Index p) {
  Exosystem exo;
  exo.p = p;
  exo.rate = 0.0;
  exo.field = nullptr;
  exo.invariant_set = FeasibleSetd::whole(p);
  exo.name = "static";
  return exo;
}

Exosystem drifting_exosystem(double eps_theta, double bound) {
  Exosystem exo;
  exo.p = 2;
  exo.rate = eps_theta;
  exo.field = [](const Vec& th) {
    Vec v(2);
    v << std::sin(2.0 * th(1)), 0.5 * std::cos(th(0));
    return v;
  };
  exo.invariant_set = FeasibleSetd::box(Vec::Constant(2, -bound), Vec::Constant(2, bound));
  exo.name = "drift";
  return exo;
}

Exosystem rotation_exosystem(double eps_p, double bound) {
  Exosystem exo;
  exo.p = 2;
  exo.rate = eps_p;
  exo.field = [](const Vec& th) {
    Vec v(2);
    v << -th(1), th(0);
    return v;
  };
  exo.invariant_set = FeasibleSetd::box(Vec::Constant(2, -bound), Vec::Constant(2, bound));
  exo.name = "rotation";
  return exo;
}

double common_critical_point_error(const GradientOracle& oracle, const SwitchingFamily& family,
                                   const Vec& theta) {
  double worst = 0.0;
  for (int q = 0; q < oracle.problem().modes(); ++q)
    worst = std::max(worst, (oracle.grad_f(family.x_star, theta, q) - family.xi_star).norm());
  return worst;
}

// ---------------------------------------------------------------------------

Problem make_tracking_problem() {
  Problem::Definition def;
  def.name = "tracking";
  def.n = 2;
  def.p = 2;
  def.f = [](const Vec& x, const Vec& th, int) { return (x - th).squaredNorm(); };
  def.grad_f = [](const Vec& x, const Vec& th, int) -> Vec { return 2.0 * (x - th); };
  return Problem(std::move(def));
}

Problem make_desk_kkt_problem() {
  Problem::Definition def;
  def.name = "desk_kkt";
  def.n = 2;
  def.m = 1;
  def.f = [](const Vec& x, const Vec&, int) { return (x.array() - 2.0).square().sum(); };
  def.grad_f = [](const Vec& x, const Vec&, int) -> Vec { return 2.0 * (x.array() - 2.0).matrix(); };
  def.g = [](const Vec& x) {
    Vec g(1);
    g << x(0) + x(1) - 2.0;
    return g;
  };
  def.jac_g = [](const Vec&) {
    Mat J(1, 2);
    J << 1.0, 1.0;
    return J;
  };
  return Problem(std::move(def));
}

namespace {

std::vector<Mat> switching_matrices(Eigen::Index n) {
  Mat second = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) second(i, i) = (i % 2 == 0) ? 2.0 : 1.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) second(i, i + 1) = second(i + 1, i) = 0.3;
  return {Mat::Identity(n, n), second};
}

}  // namespace

Problem make_switching_quadratic_problem(const Vec& x_star) {
  const auto mats = switching_matrices(x_star.size());
  Problem::Definition def;
  def.name = "switching_quadratic";
  def.n = x_star.size();
  def.modes = static_cast<int>(mats.size());
  def.f = [mats, x_star](const Vec& x, const Vec&, int q) {
    const Vec e = x - x_star;
    return e.dot(mats.at(static_cast<std::size_t>(q)) * e);
  };
  def.grad_f = [mats, x_star](const Vec& x, const Vec&, int q) -> Vec {
    return 2.0 * mats.at(static_cast<std::size_t>(q)) * (x - x_star);
  };
  return Problem(std::move(def));
}

namespace {

// Quintic smoothstep on u in [0, 1] and its derivative.
double smoothstep(double u) {
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

double smoothstep_deriv(double u) {
  if (u <= 0 || u >= 1) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

}  // namespace

Problem make_regional_problem(const Vec& x_star, double convex_radius, double blend_width) {
  if (x_star.size() != 2) throw ValidationError("regional problem is planar");
  if (!(convex_radius > 0) || !(blend_width > 0)) throw ValidationError("regional problem: radii must be positive");
  Problem::Definition def;
  def.name = "regional";
  def.n = 2;
  def.f = [=](const Vec& x, const Vec&, int) {
    const Vec e = x - x_star;
    const double blend = smoothstep((e.norm() - convex_radius) / blend_width);
    return e.squaredNorm() + 0.5 * blend * std::sin(3.0 * x(0)) * std::sin(3.0 * x(1));
  };
  def.grad_f = [=](const Vec& x, const Vec&, int) -> Vec {
    const Vec e = x - x_star;
    const double r = e.norm();
    const double u = (r - convex_radius) / blend_width;
    const double blend = smoothstep(u);
    const double ripple = std::sin(3.0 * x(0)) * std::sin(3.0 * x(1));
    Vec grad = 2.0 * e;
    Vec ripple_grad(2);
    ripple_grad << 3.0 * std::cos(3.0 * x(0)) * std::sin(3.0 * x(1)), 3.0 * std::sin(3.0 * x(0)) * std::cos(3.0 * x(1));
    grad += 0.5 * blend * ripple_grad;
    if (r > 0) grad += 0.5 * ripple * smoothstep_deriv(u) / blend_width * (e / r);
    return grad;
  };
  return Problem(std::move(def));
}

Problem make_quadratic_problem(const Mat& Q, const Vec& c, double k, const Mat& G, const Vec& h) {
  if (Q.rows() != Q.cols() || Q.rows() != c.size()) throw ValidationError("quadratic: Q must be n x n and c length n");
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != Q.rows()))
    throw ValidationError("quadratic: constraint block must be m x n with h of length m");
  const Mat Qs = 0.5 * (Q + Q.transpose());
  Problem::Definition def;
  def.name = "quadratic";
  def.n = Q.rows();
  def.m = G.rows();
  def.f = [Qs, c, k](const Vec& x, const Vec&, int) { return 0.5 * x.dot(Qs * x) + c.dot(x) + k; };
  def.grad_f = [Qs, c](const Vec& x, const Vec&, int) -> Vec { return Qs * x + c; };
  if (G.rows() > 0) {
    def.g = [G, h](const Vec& x) -> Vec { return G * x - h; };
    def.jac_g = [G](const Vec&) { return G; };
  }
  return Problem(std::move(def));
}

Problem make_logquad_problem(Eigen::Index n) {
  Problem::Definition def;
  def.name = "logquad";
  def.n = n;
  def.f = [](const Vec& x, const Vec&, int) {
    const double r2 = x.squaredNorm();
    return std::log1p(r2) + r2;
  };
  def.grad_f = [](const Vec& x, const Vec&, int) -> Vec {
    const double r2 = x.squaredNorm();
    return (2.0 / (1.0 + r2) + 2.0) * x;
  };
  return Problem(std::move(def));
}

}  // namespace pzo
