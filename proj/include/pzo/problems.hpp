#pragma once

// Black-box problem oracles. Algorithms see a problem only through
// ZerothOrderOracle (function values); analytic derivatives are reachable only
// through GradientOracle, which the verification code constructs. Every call
// is counted so runs can be audited for zeroth-order purity.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pzo/convex_sets.hpp"

namespace pzo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct CallCounts {
  std::uint64_t f = 0;
  std::uint64_t g = 0;
  std::uint64_t grad_f = 0;
  std::uint64_t jac_g = 0;

  std::uint64_t gradient_calls() const { return grad_f + jac_g; }
  friend CallCounts operator-(const CallCounts& a, const CallCounts& b) {
    return {a.f - b.f, a.g - b.g, a.grad_f - b.grad_f, a.jac_g - b.jac_g};
  }
};

class Problem {
 public:
  using ObjectiveFn = std::function<double(const Vec& x, const Vec& theta, int mode)>;
  using ConstraintFn = std::function<Vec(const Vec& x)>;
  using GradientFn = std::function<Vec(const Vec& x, const Vec& theta, int mode)>;
  using JacobianFn = std::function<Mat(const Vec& x)>;

  struct Definition {
    std::string name;
    Eigen::Index n = 0;  // decision dimension
    Eigen::Index m = 0;  // inequality constraints g(x) <= 0
    Eigen::Index p = 0;  // exogenous parameter dimension
    int modes = 1;       // switching family size
    ObjectiveFn f;
    ConstraintFn g;
    GradientFn grad_f;  // optional, verification only
    JacobianFn jac_g;   // optional, verification only
  };

  explicit Problem(Definition def);

  const std::string& name() const { return def_->name; }
  Eigen::Index n() const { return def_->n; }
  Eigen::Index m() const { return def_->m; }
  Eigen::Index p() const { return def_->p; }
  int modes() const { return def_->modes; }
  bool has_gradients() const { return static_cast<bool>(def_->grad_f) && (def_->m == 0 || def_->jac_g); }

  CallCounts counts() const;

 private:
  friend class ZerothOrderOracle;
  friend class GradientOracle;

  struct Counters {
    std::atomic<std::uint64_t> f{0}, g{0}, grad_f{0}, jac_g{0};
  };

  std::shared_ptr<const Definition> def_;
  std::shared_ptr<Counters> counters_;
};

/// Value-only access used by every zeroth-order algorithm.
class ZerothOrderOracle {
 public:
  explicit ZerothOrderOracle(const Problem& problem) : problem_(&problem) {}

  double f(const Vec& x, const Vec& theta, int mode = 0) const;
  Vec g(const Vec& x) const;
  const Problem& problem() const { return *problem_; }

 private:
  const Problem* problem_;
};

/// Derivative access for target flows and verification. Throws if the problem
/// carries no analytic derivatives.
class GradientOracle {
 public:
  explicit GradientOracle(const Problem& problem);

  double f(const Vec& x, const Vec& theta, int mode = 0) const;
  Vec g(const Vec& x) const;
  Vec grad_f(const Vec& x, const Vec& theta, int mode = 0) const;
  Mat jac_g(const Vec& x) const;
  const Problem& problem() const { return *problem_; }

 private:
  const Problem* problem_;
};

// ---------------------------------------------------------------------------
// Noise

enum class NoiseMode { uniform_ball, constant_direction };
enum class NoiseTarget { measurement, state, both };

struct NoiseSpec {
  double bound = 0.0;
  NoiseMode mode = NoiseMode::uniform_ball;
  NoiseTarget target = NoiseTarget::measurement;
  std::uint64_t seed = 1;

  bool on_measurement() const { return bound > 0 && target != NoiseTarget::state; }
  bool on_state() const { return bound > 0 && target != NoiseTarget::measurement; }
};

/// Seeded stream of samples e with ||e|| <= bound.
class NoiseStream {
 public:
  explicit NoiseStream(const NoiseSpec& spec);

  const NoiseSpec& spec() const { return spec_; }
  Vec sample(Eigen::Index dim);
  double sample_scalar();
  /// Largest norm emitted so far.
  double max_emitted() const { return max_emitted_; }
  std::uint64_t emitted() const { return emitted_; }

 private:
  NoiseSpec spec_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  double max_emitted_ = 0.0;
  std::uint64_t emitted_ = 0;
};

/// f_q(x, theta) plus a measurement-noise sample when the stream targets measurements.
double evaluate_objective(const ZerothOrderOracle& oracle, const Vec& x, const Vec& theta, int mode,
                          NoiseStream* noise);

/// What an algorithm actually measures: oracle values, possibly corrupted.
class MeasurementChannel {
 public:
  MeasurementChannel(const ZerothOrderOracle& oracle, NoiseStream* noise = nullptr)
      : oracle_(oracle), noise_(noise) {}

  double f(const Vec& x, const Vec& theta, int mode) const {
    return evaluate_objective(oracle_, x, theta, mode, noise_);
  }
  Vec g(const Vec& x) const;
  const ZerothOrderOracle& oracle() const { return oracle_; }
  NoiseStream* noise() const { return noise_; }

 private:
  const ZerothOrderOracle& oracle_;
  NoiseStream* noise_;
};

// ---------------------------------------------------------------------------
// Exosystem: theta' = rate * field(theta), theta in an invariant set.

struct Exosystem {
  Eigen::Index p = 0;
  double rate = 0.0;
  std::function<Vec(const Vec&)> field;
  FeasibleSetd invariant_set = FeasibleSetd::whole(0);
  std::string name = "static";

  Vec velocity(const Vec& theta) const { return field ? Vec(rate * field(theta)) : Vec(Vec::Zero(theta.size())); }
};

inline constexpr double kExoClampTol = 1e-6;

/// One RK4 step of the exosystem. Drift out of the invariant set up to 1e-6 is
/// projected back (counted in *clamps); larger drift throws.
Vec exo_step(const Exosystem& exo, const Vec& theta, double dt, int* clamps = nullptr);

/// Applies the invariance check/clamp to an already advanced parameter.
Vec enforce_exo_invariance(const Exosystem& exo, const Vec& theta, int* clamps = nullptr);

Exosystem static_exosystem(Eigen::Index p);
/// theta1' = eps sin(2 theta2), theta2' = (eps / 2) cos(theta1).
Exosystem drifting_exosystem(double eps_theta, double bound = 10.0);
/// theta1' = -eps theta2, theta2' = eps theta1.
Exosystem rotation_exosystem(double eps_p, double bound = 10.0);

// ---------------------------------------------------------------------------
// Switching family metadata.

struct SwitchingFamily {
  Vec x_star;   // common minimizer
  Vec xi_star;  // common critical value of the gradients at x_star
};

/// Largest ||grad f_q(x*) - xi*|| over all modes.
double common_critical_point_error(const GradientOracle& oracle, const SwitchingFamily& family,
                                   const Vec& theta);

// ---------------------------------------------------------------------------
// Built-in problems.

/// f(x, theta) = ||x - theta||^2 in the plane (tracking on a disk or a box).
Problem make_tracking_problem();
/// min (x1-2)^2 + (x2-2)^2 s.t. x1 + x2 - 2 <= 0.
Problem make_desk_kkt_problem();
/// Two modes f_q = (x - x*)^T A_q (x - x*) sharing minimizer x*.
Problem make_switching_quadratic_problem(const Vec& x_star);
/// Quadratic bowl at x_star with a sinusoidal ripple switched on only outside a
/// ball of radius convex_radius around x_star (smooth quintic blend).
Problem make_regional_problem(const Vec& x_star, double convex_radius, double blend_width);
/// f(x) = 1/2 x^T Q x + c^T x + k, optional g(x) = G x - h.
Problem make_quadratic_problem(const Mat& Q, const Vec& c, double k, const Mat& G = Mat(), const Vec& h = Vec());
/// f(x) = log(1 + ||x||^2) + ||x||^2.
Problem make_logquad_problem(Eigen::Index n);

}  // namespace pzo
