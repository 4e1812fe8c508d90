#include "pzo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pzo/errors.hpp"

namespace pzo {

double dist_to_set(const Vec& x, const FeasibleSetd& set) { return distance(set, x); }

double dist_to_set(const Vec& x, const std::vector<Vec>& points) {
  if (points.empty()) throw ValidationError("dist_to_set: empty point list");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : points) best = std::min(best, (x - p).norm());
  return best;
}

double KktReport::worst() const { return std::max({stationarity, primal, dual, complementarity}); }

KktReport kkt_residual(const Vec& x, const Vec& lambda, const GradientOracle& oracle, const FeasibleSetd& set,
                       const Vec& theta, int mode) {
  KktReport r;
  Vec v = oracle.grad_f(x, theta, mode);
  const auto m = oracle.problem().m();
  Vec g;
  if (m > 0) {
    if (lambda.size() != m) throw ValidationError("kkt_residual: lambda must have dimension m");
    g = oracle.g(x);
    v += oracle.jac_g(x).transpose() * lambda;
    r.primal = std::max(0.0, g.maxCoeff());
    r.dual = std::max(0.0, -lambda.minCoeff());
    r.complementarity = std::abs(lambda.dot(g));
  }
  r.stationarity = (x - project(set, Vec(x - v))).norm();
  return r;
}

namespace {

std::size_t quadrature_nodes(const DitherBankd& bank, int nodes_per_fastest) {
  if (nodes_per_fastest < 1) throw ValidationError("quadrature: need at least one node per period");
  const double periods = bank.common_period() * bank.max_kappa() / bank.eps_omega();
  return static_cast<std::size_t>(std::ceil(nodes_per_fastest * periods - 1e-9));
}

}  // namespace

Vec averaging_quadrature(const std::function<double(const Vec&)>& f, const Vec& x, const DitherBankd& bank,
                         int nodes_per_fastest) {
  if (x.size() != bank.channels()) throw ValidationError("averaging_quadrature: x and dither dimensions differ");
  const double T = bank.common_period();
  const std::size_t N = quadrature_nodes(bank, nodes_per_fastest);
  const double a = bank.eps_a();
  Vec acc = Vec::Zero(x.size());
  for (std::size_t j = 0; j < N; ++j) {
    const Vec mu = bank.probe_after(T * static_cast<double>(j) / static_cast<double>(N));
    acc += f(Vec(x + a * mu)) * mu;
  }
  return (2.0 / a) * acc / static_cast<double>(N);
}

Vec averaging_quadrature(const ZerothOrderOracle& oracle, const Vec& x, const DitherBankd& bank, const Vec& theta,
                         int mode, int nodes_per_fastest) {
  return averaging_quadrature([&](const Vec& z) { return oracle.f(z, theta, mode); }, x, bank, nodes_per_fastest);
}

DitherMoments dither_moments(const DitherBankd& bank, int nodes_per_fastest) {
  const double T = bank.common_period();
  const std::size_t N = quadrature_nodes(bank, nodes_per_fastest);
  const auto n = bank.channels();
  DitherMoments out{Vec::Zero(n), Mat::Zero(n, n)};
  for (std::size_t j = 0; j < N; ++j) {
    const Vec mu = bank.probe_after(T * static_cast<double>(j) / static_cast<double>(N));
    out.mean += mu;
    out.gram += mu * mu.transpose();
  }
  out.mean /= static_cast<double>(N);
  out.gram /= static_cast<double>(N);
  return out;
}

double lyapunov_W(const Vec& x_err, const Vec& xi_err, double weight) {
  if (!(weight > 0 && weight < 1)) throw ValidationError("lyapunov_W: weight must lie in (0, 1)");
  return (1.0 - weight) * 0.5 * x_err.squaredNorm() + weight * 0.5 * xi_err.squaredNorm();
}

double lyapunov_Vq(const Vec& x, const Vec& xi, int mode, const GradientOracle& oracle, const Vec& x_star,
                   const Vec& theta) {
  return 0.5 * (x - x_star).squaredNorm() + 0.5 * (xi - oracle.grad_f(x, theta, mode)).squaredNorm();
}

double tail_max(const std::vector<double>& t, const std::vector<double>& v, double fraction) {
  if (t.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double start = t.front() + (1.0 - fraction) * (t.back() - t.front());
  double out = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= start - 1e-12) out = std::max(out, v[i]);
  return out;
}

TrackingSeries tracking_error_series(const Trajectory& traj, const std::function<Vec(const Vec&)>& optimizer,
                                     bool averaged) {
  if (!optimizer) throw ValidationError("tracking_error_series: optimizer map required");
  TrackingSeries s;
  s.t = traj.t;
  s.error.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Vec& x = averaged ? traj.x_avg[i] : traj.x[i];
    s.error.push_back((x - optimizer(traj.theta[i])).norm());
  }
  s.limsup = tail_max(s.t, s.error);
  return s;
}

Vec terminal_average(const Trajectory& traj) {
  if (traj.x_avg.empty()) throw ValidationError("terminal_average: empty trajectory");
  return traj.x_avg.back();
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void Report::add(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
void Report::add(const std::string& key, double value) { add(key, fmt(value)); }
void Report::add(const std::string& key, const Vec& value) {
  std::string s;
  for (Eigen::Index i = 0; i < value.size(); ++i) s += (i ? " " : "") + fmt(value(i));
  add(key, s);
}
void Report::add_flag(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }

std::optional<std::string> Report::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

void Report::write_text(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << ": " << v << '\n';
}

void Report::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) out << (i ? "," : "") << entries_[i].first;
  out << '\n';
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::string v = entries_[i].second;
    if (v.find_first_of(", \"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : v) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      v = quoted + "\"";
    }
    out << (i ? "," : "") << v;
  }
  out << '\n';
}

Report verification_report(const Trajectory& traj, const ReportContext& ctx) {
  Report r;
  r.add("algorithm", to_string(traj.algorithm));
  r.add("samples", static_cast<double>(traj.size()));
  if (traj.size() == 0) return r;
  r.add("t_end", traj.t.back());
  for (const auto& w : traj.warnings) r.add("warning", w);

  const bool all_in = std::all_of(traj.in_set.begin(), traj.in_set.end(), [](int v) { return v == 1; });
  const bool all_xhat_in =
      std::all_of(traj.xhat_in_set.begin(), traj.xhat_in_set.end(), [](int v) { return v == 1; });
  r.add_flag("all_in_set", all_in);
  if (ctx.shrink_set) r.add_flag("all_xhat_in_set", all_xhat_in);
  r.add("max_phi", *std::max_element(traj.phi.begin(), traj.phi.end()));
  r.add("max_guard_disp", traj.max_guard_disp);
  r.add("terminal_x", traj.x.back());
  r.add("terminal_x_avg", traj.x_avg.back());

  if (ctx.optimizer) {
    const Vec target = ctx.optimizer(traj.theta.back());
    r.add("terminal_optimizer", target);
    r.add("terminal_error", (traj.x_avg.back() - target).norm());
    r.add("limsup_tracking_error", tracking_error_series(traj, ctx.optimizer).limsup);
  }

  double violation = 0.0;
  for (const auto& g : traj.g)
    if (g.size()) violation = std::max(violation, g.maxCoeff());
  r.add("max_constraint_violation", violation);

  if (ctx.verify_problem && traj.has_lambda() && ctx.verify_problem->has_gradients()) {
    const GradientOracle oracle(*ctx.verify_problem);
    const Vec lam = traj.lambda_avg.back();
    const KktReport k = kkt_residual(traj.x_avg.back(), lam, oracle, ctx.set, traj.theta.back());
    r.add("terminal_lambda_avg", lam);
    r.add("kkt_stationarity", k.stationarity);
    r.add("kkt_primal", k.primal);
    r.add("kkt_dual", k.dual);
    r.add("kkt_complementarity", k.complementarity);
  }

  r.add("calls_f", static_cast<double>(traj.calls.f));
  r.add("calls_g", static_cast<double>(traj.calls.g));
  r.add("calls_grad_f", static_cast<double>(traj.calls.grad_f));
  r.add("calls_jac_g", static_cast<double>(traj.calls.jac_g));
  if (is_zeroth_order(traj.algorithm)) r.add_flag("zeroth_order_pure", traj.calls.gradient_calls() == 0);
  r.add("max_noise", traj.max_noise);
  r.add("max_dither_drift", traj.max_dither_drift);
  r.add("exo_clamps", static_cast<double>(traj.exo_clamps));

  if (ctx.switching) {
    const AdtAudit audit = audit_adt(traj.switch_log, ctx.switching->tau_d, ctx.switching->n0);
    r.add("switches", static_cast<double>(audit.switches));
    r.add_flag("adt_ok", audit.ok);
    r.add("adt_worst_margin", audit.worst_margin);
  }
  return r;
}

}  // namespace pzo
