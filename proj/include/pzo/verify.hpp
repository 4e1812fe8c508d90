#pragma once

// Verification quantities computed from trajectories and oracles: distances,
// KKT residuals, averaging quadratures, Lyapunov monitors, tracking errors and
// the key: value / CSV reports built from them.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pzo/convex_sets.hpp"
#include "pzo/dither.hpp"
#include "pzo/hybrid_switching.hpp"
#include "pzo/problems.hpp"
#include "pzo/sim.hpp"

namespace pzo {

double dist_to_set(const Vec& x, const FeasibleSetd& set);
/// Distance to the nearest point of a finite list. Throws ValidationError when empty.
double dist_to_set(const Vec& x, const std::vector<Vec>& points);

struct KktReport {
  double stationarity = 0.0;     // ||x - P_X(x - (grad f + J^T lambda))||
  double primal = 0.0;           // max_i max(g_i(x), 0)
  double dual = 0.0;             // max_i max(-lambda_i, 0)
  double complementarity = 0.0;  // |lambda^T g(x)|

  double worst() const;
};

/// Stationarity uses the projection residual, so the normal-cone element is
/// eta = (x - v) - P_X(x - v) with v the Lagrangian gradient.
KktReport kkt_residual(const Vec& x, const Vec& lambda, const GradientOracle& oracle, const FeasibleSetd& set,
                       const Vec& theta = Vec(), int mode = 0);

/// (1/T) int_0^T (2/eps_a) f(x + eps_a mu(t)) mu(t) dt over the common period,
/// by the periodic rectangle rule with at least nodes_per_fastest nodes per
/// period of the fastest channel. The bank's current phase is the start.
Vec averaging_quadrature(const std::function<double(const Vec&)>& f, const Vec& x, const DitherBankd& bank,
                         int nodes_per_fastest = 1000);
Vec averaging_quadrature(const ZerothOrderOracle& oracle, const Vec& x, const DitherBankd& bank,
                         const Vec& theta = Vec(), int mode = 0, int nodes_per_fastest = 1000);

struct DitherMoments {
  Vec mean;  // (1/T) int mu
  Mat gram;  // (1/T) int mu mu^T, ideally I/2
};
DitherMoments dither_moments(const DitherBankd& bank, int nodes_per_fastest = 1000);

/// W = (1 - w) |x|^2 / 2 + w |xi|^2 / 2. Throws ValidationError unless w in (0, 1).
double lyapunov_W(const Vec& x_err, const Vec& xi_err, double weight = 0.5);
/// V_q = |x - x*|^2 / 2 + |xi - grad f_q(x)|^2 / 2.
double lyapunov_Vq(const Vec& x, const Vec& xi, int mode, const GradientOracle& oracle, const Vec& x_star,
                   const Vec& theta = Vec());

struct TrackingSeries {
  std::vector<double> t;
  std::vector<double> error;
  double limsup = 0.0;  // max over the final 20% of the horizon
};

/// ||x(t) - d(theta(t))|| at every sample, optionally using period-averaged x.
TrackingSeries tracking_error_series(const Trajectory& traj, const std::function<Vec(const Vec&)>& optimizer,
                                     bool averaged = false);

/// Max over samples with t >= (1 - fraction) t_end.
double tail_max(const std::vector<double>& t, const std::vector<double>& v, double fraction = 0.2);

/// Period-averaged terminal x.
Vec terminal_average(const Trajectory& traj);

/// Ordered key: value report.
class Report {
 public:
  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, double value);
  void add(const std::string& key, const Vec& value);
  void add_flag(const std::string& key, bool value);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::optional<std::string> get(const std::string& key) const;

  void write_text(std::ostream& out) const;
  /// Header of keys, then one row of values.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct ReportContext {
  FeasibleSetd set = FeasibleSetd::whole(1);
  bool shrink_set = false;
  std::function<Vec(const Vec&)> optimizer;
  /// Separate problem instance for gradient-based checks, so the run's own
  /// counters stay untouched.
  const Problem* verify_problem = nullptr;
  std::optional<AutomatonConfig> switching;
};

Report verification_report(const Trajectory& traj, const ReportContext& ctx);

}  // namespace pzo
