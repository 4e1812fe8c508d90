#include "pzo/dynamics.hpp"

#include <cmath>
#include <numbers>

namespace pzo {

void GainSet::validate() const {
  const std::pair<const char*, double> named[] = {
      {"k_x", k_x},       {"alpha_x", alpha_x}, {"k_lambda", k_lambda},   {"alpha_lambda", alpha_lambda},
      {"eps_xi", eps_xi}, {"eps_a", eps_a},     {"eps_omega", eps_omega}, {"lambda_max", lambda_max}};
  for (const auto& [name, value] : named)
    if (!(value > 0) || !std::isfinite(value))
      throw ValidationError(std::string("gain ") + name + " must be positive and finite");
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::vanilla_es: return "vanilla_es";
    case Algorithm::pgzo: return "pgzo";
    case Algorithm::ppdzo: return "ppdzo";
    case Algorithm::dpgzo: return "dpgzo";
    case Algorithm::target_grad: return "target_grad";
    case Algorithm::target_saddle: return "target_saddle";
    case Algorithm::average_gzo: return "average_gzo";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::vanilla_es, Algorithm::pgzo, Algorithm::ppdzo, Algorithm::dpgzo, Algorithm::target_grad,
                 Algorithm::target_saddle, Algorithm::average_gzo})
    if (to_string(a) == name) return a;
  throw ValidationError("unknown algorithm '" + name +
                        "' (expected vanilla_es|pgzo|ppdzo|dpgzo|target_grad|target_saddle|average_gzo)");
}

bool is_zeroth_order(Algorithm a) {
  return a == Algorithm::vanilla_es || a == Algorithm::pgzo || a == Algorithm::ppdzo || a == Algorithm::dpgzo;
}

namespace {

Vec filter_rate(const Vec& state, const Vec& input, double eps_xi) { return (input - state) / eps_xi; }

}  // namespace

double vanilla_es_field(double x, double t, const MeasurementChannel& channel, const GainSet& gains, double kappa) {
  const double omega = 2.0 * std::numbers::pi * kappa / gains.eps_omega;
  const double s = std::sin(omega * t);
  Vec xhat(1);
  xhat << x + gains.eps_a * s;
  return -gains.k_x * (2.0 / gains.eps_a) * channel.f(xhat, Vec(), 0) * s;
}

Vec vanilla_es_rate(const Vec& x, const Vec& probe, const MeasurementChannel& channel, const GainSet& gains,
                    const Vec& theta, int mode) {
  const Vec xhat = x + gains.eps_a * probe;
  return -gains.k_x * (2.0 / gains.eps_a) * channel.f(xhat, theta, mode) * probe;
}

GzoRate gzo_rate(const Vec& x, const Vec& xi, const Vec& probe, const MeasurementChannel& channel,
                 const FeasibleSetd& set, const GainSet& gains, const Vec& theta, int mode) {
  GzoRate r;
  r.xhat = x + gains.eps_a * probe;
  r.dx = gains.k_x * (project(set, Vec(x - gains.alpha_x * xi)) - x);
  r.dxi = filter_rate(xi, (2.0 / gains.eps_a) * channel.f(r.xhat, theta, mode) * probe, gains.eps_xi);
  return r;
}

GzoRate gzo_field(const GzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                  const GainSet& gains, const Vec& theta, int mode) {
  GzoRate r = gzo_rate(s.x, s.xi, s.bank.probe(), channel, set, gains, theta, mode);
  r.dmu = s.bank.rate();
  return r;
}

Vec project_dual(const Vec& lambda, double lambda_max) { return lambda.cwiseMax(0.0).cwiseMin(lambda_max); }

PdzoRate pdzo_rate(const Vec& x, const Vec& lambda, const Vec& xi1, const Vec& xi2, const Vec& probe,
                   const MeasurementChannel& channel, const FeasibleSetd& set, const GainSet& gains,
                   const Vec& theta) {
  PdzoRate r;
  r.xhat = x + gains.eps_a * probe;
  r.dx = gains.k_x * (project(set, Vec(x - gains.alpha_x * xi1)) - x);
  r.dlambda = gains.k_lambda * (project_dual(lambda + gains.alpha_lambda * xi2, gains.lambda_max) - lambda);
  const double f = channel.f(r.xhat, theta, 0);
  const Vec g = channel.g(r.xhat);
  const double lagrangian = g.size() ? f + lambda.dot(g) : f;
  r.dxi1 = filter_rate(xi1, (2.0 / gains.eps_a) * lagrangian * probe, gains.eps_xi);
  r.dxi2 = g.size() ? filter_rate(xi2, g, gains.eps_xi) : Vec();
  return r;
}

PdzoRate pdzo_field(const PdzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                    const GainSet& gains, const Vec& theta) {
  PdzoRate r = pdzo_rate(s.x, s.lambda, s.xi1, s.xi2, s.bank.probe(), channel, set, gains, theta);
  r.dmu = s.bank.rate();
  return r;
}

GzoRate dpzo_rate(const Vec& x, const Vec& xi, const Vec& probe, const MeasurementChannel& channel,
                  const FeasibleSetd& set, const GainSet& gains, const Vec& theta, int mode) {
  GzoRate r;
  r.xhat = x + gains.eps_a * probe;
  r.dx = gains.k_x * tangent_project(set, x, Vec(-xi));
  r.dxi = filter_rate(xi, (2.0 / gains.eps_a) * channel.f(r.xhat, theta, mode) * probe, gains.eps_xi);
  return r;
}

GzoRate dpzo_field(const GzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                   const GainSet& gains, const Vec& theta, int mode) {
  GzoRate r = dpzo_rate(s.x, s.xi, s.bank.probe(), channel, set, gains, theta, mode);
  r.dmu = s.bank.rate();
  return r;
}

Vec target_gradient_flow(const Vec& p, const GradientOracle& oracle, const FeasibleSetd& set,
                         const GainSet& gains, const Vec& theta, int mode) {
  return gains.k_x * (project(set, Vec(p - gains.alpha_x * oracle.grad_f(p, theta, mode))) - p);
}

std::pair<Vec, Vec> target_saddle_flow(const Vec& p1, const Vec& p2, const GradientOracle& oracle,
                                       const FeasibleSetd& set, const GainSet& gains, const Vec& theta) {
  Vec lagrangian_grad = oracle.grad_f(p1, theta, 0);
  Vec dp2(p2.size());
  if (p2.size() > 0) {
    lagrangian_grad += oracle.jac_g(p1).transpose() * p2;
    dp2 = gains.k_lambda * (project_dual(p2 + gains.alpha_lambda * oracle.g(p1), gains.lambda_max) - p2);
  }
  Vec dp1 = gains.k_x * (project(set, Vec(p1 - gains.alpha_x * lagrangian_grad)) - p1);
  return {std::move(dp1), std::move(dp2)};
}

Vec target_tangent_flow(const Vec& p, const GradientOracle& oracle, const FeasibleSetd& set,
                        const GainSet& gains, const Vec& theta, int mode) {
  return gains.k_x * tangent_project(set, p, Vec(-oracle.grad_f(p, theta, mode)));
}

std::pair<Vec, Vec> average_gzo_field(const Vec& x_bar, const Vec& xi_bar, const GradientOracle& oracle,
                                      const FeasibleSetd& set, const GainSet& gains, const Vec& theta,
                                      int mode) {
  Vec dx = gains.k_x * (project(set, Vec(x_bar - gains.alpha_x * xi_bar)) - x_bar);
  Vec dxi = filter_rate(xi_bar, oracle.grad_f(x_bar, theta, mode), gains.eps_xi);
  return {std::move(dx), std::move(dxi)};
}

std::pair<Vec, Vec> average_dpgzo_field(const Vec& x_bar, const Vec& xi_bar, const GradientOracle& oracle,
                                        const FeasibleSetd& set, const GainSet& gains, const Vec& theta,
                                        int mode) {
  Vec dx = gains.k_x * tangent_project(set, x_bar, Vec(-xi_bar));
  Vec dxi = filter_rate(xi_bar, oracle.grad_f(x_bar, theta, mode), gains.eps_xi);
  return {std::move(dx), std::move(dxi)};
}

}  // namespace pzo
