#pragma once

// Fixed-step simulation of the coupled (algorithm state, exosystem, dither,
// switching automaton) system with flow-set enforcement and recording.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pzo/dither.hpp"
#include "pzo/dynamics.hpp"
#include "pzo/hybrid_switching.hpp"
#include "pzo/problems.hpp"

namespace pzo {

enum class IntegratorKind { rk4, euler, exp_euler };

std::string to_string(IntegratorKind k);
IntegratorKind parse_integrator(const std::string& s);

struct SimConfig {
  double t_end = 10.0;
  double h = 1e-3;
  int stride = 100;  // record every stride steps (plus the final state)
  IntegratorKind integrator = IntegratorKind::rk4;
  bool guard = true;  // re-project x and lambda after every step
  std::uint64_t seed = 1;
};

/// Everything one simulation needs.
struct RunSpec {
  const Problem* problem = nullptr;
  Algorithm algorithm = Algorithm::pgzo;
  GainSet gains;
  FeasibleSetd set = FeasibleSetd::whole(1);  // the feasible set X
  bool shrink_set = false;                    // dynamics use X shrunk by eps_a
  std::vector<Rational> kappa;                // empty: default primes
  Vec mu0;                                    // empty: sine phase
  Exosystem exosystem;
  Vec theta0;
  Vec x0;
  Vec xi0;       // empty: zero
  Vec lambda0;   // empty: zero
  Vec xi2_0;     // empty: zero
  NoiseSpec noise;
  std::optional<AutomatonConfig> switching;
  double flow_rate = -1.0;  // negative: 1 / tau_d
  SimConfig sim;
  /// Known optimizer map x*(theta), used only for the dist_opt diagnostic.
  std::function<Vec(const Vec&)> optimizer;
};

struct Trajectory {
  Algorithm algorithm = Algorithm::pgzo;
  Eigen::Index n = 0, m = 0, p = 0;
  double eps_a = 0.0;
  double common_period = 0.0;

  std::vector<double> t;
  std::vector<Vec> x;
  std::vector<Vec> xhat;
  std::vector<Vec> xi;      // xi, or xi1 for P-PDZO
  std::vector<Vec> xi2;     // P-PDZO only
  std::vector<Vec> lambda;  // dual state (empty vectors when m = 0)
  std::vector<Vec> mu;
  std::vector<Vec> theta;
  std::vector<int> q;       // 0-based mode
  std::vector<double> f_value;
  std::vector<Vec> g;
  std::vector<double> dist_opt;
  std::vector<int> in_set;       // x within 1e-9 of X
  std::vector<int> xhat_in_set;  // xhat within 1e-9 of X
  std::vector<double> phi;       // ||x - P_X(x)||^2
  std::vector<double> guard_disp;
  std::vector<Vec> x_avg;        // x averaged over the preceding common dither period
  std::vector<Vec> lambda_avg;   // same for lambda (empty when there is no dual state)

  std::vector<SwitchEvent> switch_log;
  CallCounts calls;  // oracle calls made by the run itself
  double max_noise = 0.0;
  double max_guard_disp = 0.0;
  double max_dither_drift = 0.0;
  int exo_clamps = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return t.size(); }
  bool has_lambda() const { return m > 0 && (algorithm == Algorithm::ppdzo || algorithm == Algorithm::target_saddle); }
  bool has_xi() const;
};

/// Validates dimensions, frequencies, step size and the initial flow-set
/// condition. Returns warnings; throws ValidationError on failure.
std::vector<std::string> validate_run(const RunSpec& spec);

/// Integrates the spec to t_end. Throws ValidationError, DivergenceError or
/// ExosystemInvarianceError.
Trajectory run(const RunSpec& spec);

struct CosimResult {
  std::vector<Trajectory> trajectories;
  /// Sup over shared samples of ||x_a - x_b||, indexed [a][b].
  std::vector<std::vector<double>> sup_distance;
};

/// Runs every algorithm on the same problem, initial state, exosystem and
/// noise seed, then compares x trajectories pairwise.
CosimResult cosimulate(const RunSpec& base, const std::vector<Algorithm>& algorithms);

/// Sup-norm distance between the x samples of two trajectories on the same grid.
double sup_distance(const Trajectory& a, const Trajectory& b);

/// Trajectory CSV: t, x, xhat, xi (or xi1/xi2), lambda, mu, theta, q (1-based),
/// f_value, g, dist_opt, in_set, phi, guard_disp. 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
std::vector<std::string> trajectory_csv_header(const Trajectory& traj);
/// t, q_before, q_after, tau (modes 1-based).
void write_switch_log_csv(std::ostream& out, const std::vector<SwitchEvent>& log);

}  // namespace pzo
