#include "pzo/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "pzo/errors.hpp"

namespace pzo {

std::string to_string(IntegratorKind k) {
  switch (k) {
    case IntegratorKind::rk4: return "rk4";
    case IntegratorKind::euler: return "euler";
    case IntegratorKind::exp_euler: return "exp_euler";
  }
  return "unknown";
}

IntegratorKind parse_integrator(const std::string& s) {
  if (s == "rk4") return IntegratorKind::rk4;
  if (s == "euler") return IntegratorKind::euler;
  if (s == "exp_euler") return IntegratorKind::exp_euler;
  throw ValidationError("unknown integrator '" + s + "' (expected rk4|euler|exp_euler)");
}

namespace {

bool has_filter(Algorithm a) {
  return a == Algorithm::pgzo || a == Algorithm::ppdzo || a == Algorithm::dpgzo || a == Algorithm::average_gzo;
}

bool needs_gradients(Algorithm a) {
  return a == Algorithm::target_grad || a == Algorithm::target_saddle || a == Algorithm::average_gzo;
}

bool has_dual(Algorithm a) { return a == Algorithm::ppdzo || a == Algorithm::target_saddle; }

// Offsets of each block in the flat continuous state; -1 when absent.
struct Layout {
  Eigen::Index n = 0, m = 0, p = 0;
  Eigen::Index ix = 0, ixi = -1, ilam = -1, ixi2 = -1, itheta = 0, size = 0;

  Layout(Algorithm a, Eigen::Index n_, Eigen::Index m_, Eigen::Index p_) : n(n_), m(m_), p(p_) {
    Eigen::Index k = n;
    if (has_filter(a)) { ixi = k; k += n; }
    if (has_dual(a)) { ilam = k; k += m; }
    if (a == Algorithm::ppdzo) { ixi2 = k; k += m; }
    itheta = k;
    size = k + p;
  }
};

std::vector<Rational> resolved_kappa(const RunSpec& spec) {
  return spec.kappa.empty() ? default_kappa(static_cast<std::size_t>(spec.problem->n())) : spec.kappa;
}

DitherBankd make_bank(const RunSpec& spec) {
  const auto kappa = resolved_kappa(spec);
  const Vec mu0 = spec.mu0.size() ? spec.mu0 : DitherBankd::sine_phase(static_cast<Eigen::Index>(kappa.size()));
  return DitherBankd(kappa, spec.gains.eps_omega, spec.gains.eps_a, mu0);
}

FeasibleSetd dynamics_set(const RunSpec& spec) {
  return spec.shrink_set ? shrink(spec.set, spec.gains.eps_a) : spec.set;
}

double flow_rate_of(const RunSpec& spec) {
  if (!spec.switching) return 0.0;
  return spec.flow_rate < 0 ? 1.0 / spec.switching->tau_d : spec.flow_rate;
}

Vec or_zero(const Vec& v, Eigen::Index size) { return v.size() ? v : Vec(Vec::Zero(size)); }

}  // namespace

bool Trajectory::has_xi() const { return has_filter(algorithm); }

std::vector<std::string> validate_run(const RunSpec& spec) {
  std::vector<std::string> warnings;
  if (!spec.problem) throw ValidationError("run: no problem");
  const Problem& pb = *spec.problem;
  const auto n = pb.n(), m = pb.m(), p = pb.p();
  const Algorithm a = spec.algorithm;
  spec.gains.validate();

  const SimConfig& sc = spec.sim;
  if (!(sc.h > 0) || !std::isfinite(sc.h)) throw ValidationError("sim: step h must be positive");
  if (!(sc.t_end >= 0) || !std::isfinite(sc.t_end)) throw ValidationError("sim: horizon must be nonnegative");
  if (sc.stride < 1) throw ValidationError("sim: recording stride must be at least 1");

  if (spec.x0.size() != n)
    throw ValidationError("initial x has dimension " + std::to_string(spec.x0.size()) + ", problem expects " +
                          std::to_string(n));
  if (spec.set.dim() != n)
    throw ValidationError("feasible set has dimension " + std::to_string(spec.set.dim()) + ", problem expects " +
                          std::to_string(n));
  if (spec.theta0.size() != p)
    throw ValidationError("initial theta has dimension " + std::to_string(spec.theta0.size()) + ", problem expects " +
                          std::to_string(p));
  if (spec.exosystem.field && spec.exosystem.p != p) throw ValidationError("exosystem dimension does not match problem");
  if (spec.xi0.size() && spec.xi0.size() != n) throw ValidationError("initial xi must have dimension n");
  if (spec.lambda0.size() && spec.lambda0.size() != m) throw ValidationError("initial lambda must have dimension m");
  if (spec.xi2_0.size() && spec.xi2_0.size() != m) throw ValidationError("initial xi2 must have dimension m");
  if (needs_gradients(a) && !pb.has_gradients())
    throw ValidationError("algorithm " + to_string(a) + " needs analytic gradients, problem '" + pb.name() +
                          "' has none");

  const auto kappa = resolved_kappa(spec);
  if (is_zeroth_order(a) && static_cast<Eigen::Index>(kappa.size()) != n)
    throw ValidationError("dither needs one frequency per decision variable (" + std::to_string(n) + "), got " +
                          std::to_string(kappa.size()));
  const DitherBankd bank = make_bank(spec);  // validates frequencies and the torus

  auto check_step = [&](double limit, const std::string& rule) {
    if (sc.h > 2.0 * limit) {
      std::ostringstream msg;
      msg << "sim: step h = " << sc.h << " exceeds twice the limit " << rule << " = " << limit;
      throw ValidationError(msg.str());
    }
    if (sc.h > limit) {
      std::ostringstream msg;
      msg << "step h = " << sc.h << " exceeds " << rule << " = " << limit << " (accuracy degraded)";
      warnings.push_back(msg.str());
    }
  };
  if (is_zeroth_order(a)) check_step(spec.gains.eps_omega / (20.0 * bank.max_kappa()), "eps_omega/(20 max kappa)");
  if (has_filter(a) && sc.integrator != IntegratorKind::exp_euler) check_step(spec.gains.eps_xi / 5.0, "eps_xi/5");

  if (a != Algorithm::vanilla_es) {
    const FeasibleSetd dyn = dynamics_set(spec);
    if (!member(dyn, spec.x0))
      throw ValidationError(std::string("initial x lies outside the ") + (spec.shrink_set ? "shrunk " : "") +
                            "feasible set (distance " + std::to_string(distance(dyn, spec.x0)) + ")");
  }
  if (has_dual(a) && spec.lambda0.size()) {
    if ((spec.lambda0.array() < 0).any()) throw ValidationError("initial lambda must be nonnegative");
    if ((spec.lambda0.array() > spec.gains.lambda_max).any())
      throw ValidationError("initial lambda exceeds lambda_max");
  }
  if (spec.switching) {
    if (spec.switching->modes != pb.modes())
      throw ValidationError("switching automaton has " + std::to_string(spec.switching->modes) +
                            " modes, problem has " + std::to_string(pb.modes()));
    SwitchAutomaton probe(*spec.switching);  // validates the automaton
    const double rate = flow_rate_of(spec);
    if (rate < 0 || rate > probe.max_flow_rate() * (1 + 1e-12))
      throw ValidationError("switching flow rate outside [0, 1/tau_d]");
  } else if (pb.modes() > 1) {
    warnings.push_back("problem has several modes but no switching block; mode 1 is used throughout");
  }
  if (spec.exosystem.field && p > 0 && !member(spec.exosystem.invariant_set, spec.theta0))
    throw ValidationError("initial theta lies outside the exosystem invariant set");
  return warnings;
}

Trajectory run(const RunSpec& spec) {
  Trajectory traj;
  traj.warnings = validate_run(spec);
  const Problem& pb = *spec.problem;
  const Algorithm alg = spec.algorithm;
  const GainSet& gains = spec.gains;
  const SimConfig& sc = spec.sim;
  const Layout L(alg, pb.n(), pb.m(), pb.p());
  const auto n = L.n, m = L.m, p = L.p;
  const bool zo = is_zeroth_order(alg);

  traj.algorithm = alg;
  traj.n = n;
  traj.m = m;
  traj.p = p;
  traj.eps_a = gains.eps_a;

  const FeasibleSetd dyn = dynamics_set(spec);
  DitherBankd bank = make_bank(spec);
  traj.common_period = bank.common_period();

  const ZerothOrderOracle zoo(pb);
  std::optional<GradientOracle> grad;
  if (needs_gradients(alg)) grad.emplace(pb);

  NoiseSpec noise_spec = spec.noise;
  NoiseStream noise(noise_spec);
  NoiseStream* meas_noise = noise_spec.on_measurement() ? &noise : nullptr;
  const MeasurementChannel channel(zoo, meas_noise);
  const bool state_noise = noise_spec.on_state();

  std::optional<SwitchAutomaton> automaton;
  if (spec.switching) automaton.emplace(*spec.switching);
  const double flow_rate = flow_rate_of(spec);

  Vec y(L.size);
  y.segment(L.ix, n) = spec.x0;
  if (L.ixi >= 0) y.segment(L.ixi, n) = or_zero(spec.xi0, n);
  if (L.ilam >= 0) y.segment(L.ilam, m) = or_zero(spec.lambda0, m);
  if (L.ixi2 >= 0) y.segment(L.ixi2, m) = or_zero(spec.xi2_0, m);
  if (p > 0) y.segment(L.itheta, p) = spec.theta0;

  // Field of the continuous state. `dt` is the offset of the stage from the
  // start of the current step, used to place the oscillator exactly.
  auto rhs = [&](double dt, const Vec& s, int mode) -> Vec {
    Vec dy = Vec::Zero(L.size);
    const Vec theta = s.segment(L.itheta, p);
    if (p > 0) dy.segment(L.itheta, p) = spec.exosystem.velocity(theta);
    Vec x = s.segment(L.ix, n);
    Vec e;
    if (state_noise) {
      e = noise.sample(n);
      x += e;
    }
    const Vec probe = zo ? bank.probe_after(dt) : Vec();
    Vec dx;
    switch (alg) {
      case Algorithm::vanilla_es:
        dx = vanilla_es_rate(x, probe, channel, gains, theta, mode);
        break;
      case Algorithm::pgzo: {
        const GzoRate r = gzo_rate(x, s.segment(L.ixi, n), probe, channel, dyn, gains, theta, mode);
        dx = r.dx;
        dy.segment(L.ixi, n) = r.dxi;
        break;
      }
      case Algorithm::dpgzo: {
        // The tangent cone is only defined on the set; stages may sit slightly outside.
        const Vec xs = project(dyn, x);
        const GzoRate r = dpzo_rate(xs, s.segment(L.ixi, n), probe, channel, dyn, gains, theta, mode);
        dx = r.dx;
        dy.segment(L.ixi, n) = r.dxi;
        break;
      }
      case Algorithm::ppdzo: {
        const Vec xi2 = m ? Vec(s.segment(L.ixi2, m)) : Vec();
        const Vec lam = m ? Vec(s.segment(L.ilam, m)) : Vec();
        const PdzoRate r = pdzo_rate(x, lam, s.segment(L.ixi, n), xi2, probe, channel, dyn, gains, theta);
        dx = r.dx;
        dy.segment(L.ixi, n) = r.dxi1;
        if (m) {
          dy.segment(L.ilam, m) = r.dlambda;
          dy.segment(L.ixi2, m) = r.dxi2;
        }
        break;
      }
      case Algorithm::target_grad:
        dx = target_gradient_flow(x, *grad, dyn, gains, theta, mode);
        break;
      case Algorithm::target_saddle: {
        const Vec lam = m ? Vec(s.segment(L.ilam, m)) : Vec();
        auto [d1, d2] = target_saddle_flow(x, lam, *grad, dyn, gains, theta);
        dx = d1;
        if (m) dy.segment(L.ilam, m) = d2;
        break;
      }
      case Algorithm::average_gzo: {
        auto [d1, d2] = average_gzo_field(x, s.segment(L.ixi, n), *grad, dyn, gains, theta, mode);
        dx = d1;
        dy.segment(L.ixi, n) = d2;
        break;
      }
    }
    if (state_noise) dx += e;
    dy.segment(L.ix, n) = dx;
    return dy;
  };

  // Exact exponential update for the linear filter blocks, explicit Euler elsewhere.
  auto exp_euler_step = [&](const Vec& s, double h, int mode) -> Vec {
    const Vec k = rhs(0.0, s, mode);
    Vec next = s + h * k;
    const double decay = std::exp(-h / gains.eps_xi);
    auto filter_block = [&](Eigen::Index off, Eigen::Index len) {
      if (off < 0 || len == 0) return;
      const Vec xi = s.segment(off, len);
      const Vec input = xi + gains.eps_xi * k.segment(off, len);
      next.segment(off, len) = decay * xi + (1.0 - decay) * input;
    };
    filter_block(L.ixi, n);
    filter_block(L.ixi2, m);
    return next;
  };

  auto advance = [&](const Vec& s, double h, int mode) -> Vec {
    switch (sc.integrator) {
      case IntegratorKind::rk4: {
        const Vec k1 = rhs(0.0, s, mode);
        const Vec k2 = rhs(h / 2, Vec(s + (h / 2) * k1), mode);
        const Vec k3 = rhs(h / 2, Vec(s + (h / 2) * k2), mode);
        const Vec k4 = rhs(h, Vec(s + h * k3), mode);
        return s + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
      }
      case IntegratorKind::euler:
        return s + h * rhs(0.0, s, mode);
      case IntegratorKind::exp_euler:
        return exp_euler_step(s, h, mode);
    }
    return s;
  };

  // Sliding trapezoid average of x over the last common dither period.
  const double window_period = traj.common_period;
  const auto window_steps = static_cast<std::size_t>(
      std::clamp(std::llround(window_period / sc.h), 1LL, 1000000LL));
  // Window entries stack x and lambda so both can be averaged.
  const Eigen::Index wlen = n + (L.ilam >= 0 ? m : 0);
  auto window_entry = [&](const Vec& s) -> Vec {
    Vec z(wlen);
    z.head(n) = s.segment(L.ix, n);
    if (wlen > n) z.tail(m) = s.segment(L.ilam, m);
    return z;
  };
  std::deque<Vec> window;
  Vec window_sum = Vec::Zero(wlen);
  auto push_window = [&](const Vec& x) {
    window.push_back(x);
    window_sum += x;
    if (window.size() > window_steps + 1) {
      window_sum -= window.front();
      window.pop_front();
    }
  };
  auto window_average = [&]() -> Vec {
    if (window.size() < 2) return window.back();
    return (window_sum - 0.5 * (window.front() + window.back())) / static_cast<double>(window.size() - 1);
  };

  double pending_guard = 0.0;
  auto record = [&](double t, const Vec& s, int mode) {
    const Vec x = s.segment(L.ix, n);
    const Vec theta = s.segment(L.itheta, p);
    const Vec xhat = zo ? Vec(x + gains.eps_a * bank.probe()) : x;
    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.xhat.push_back(xhat);
    traj.xi.push_back(L.ixi >= 0 ? Vec(s.segment(L.ixi, n)) : Vec());
    traj.xi2.push_back(L.ixi2 >= 0 ? Vec(s.segment(L.ixi2, m)) : Vec());
    traj.lambda.push_back(L.ilam >= 0 ? Vec(s.segment(L.ilam, m)) : Vec());
    traj.mu.push_back(zo ? bank.state() : Vec());
    traj.theta.push_back(theta);
    traj.q.push_back(mode);
    traj.f_value.push_back(zoo.f(xhat, theta, mode));
    traj.g.push_back(m ? zoo.g(xhat) : Vec());
    traj.dist_opt.push_back(spec.optimizer ? (x - spec.optimizer(theta)).norm()
                                           : std::numeric_limits<double>::quiet_NaN());
    traj.in_set.push_back(alg == Algorithm::vanilla_es || member(spec.set, x) ? 1 : 0);
    traj.xhat_in_set.push_back(member(spec.set, xhat) ? 1 : 0);
    const double d = distance(spec.set, x);
    traj.phi.push_back(d * d);
    traj.guard_disp.push_back(pending_guard);
    const Vec avg = window_average();
    traj.x_avg.push_back(avg.head(n));
    traj.lambda_avg.push_back(wlen > n ? Vec(avg.tail(m)) : Vec());
    traj.max_dither_drift = std::max(traj.max_dither_drift, static_cast<double>(bank.unit_circle_drift()));
    pending_guard = 0.0;
  };

  int mode = automaton ? automaton->mode() : 0;
  push_window(window_entry(y));
  record(0.0, y, mode);

  const auto steps = sc.t_end > 0 ? static_cast<long long>(std::ceil(sc.t_end / sc.h - 1e-9)) : 0LL;
  CallCounts calls;
  for (long long k = 1; k <= steps; ++k) {
    const double t_prev = static_cast<double>(k - 1) * sc.h;
    const double t_next = k == steps ? sc.t_end : static_cast<double>(k) * sc.h;
    const double h = t_next - t_prev;

    const CallCounts before = pb.counts();
    Vec next = advance(y, h, mode);
    const CallCounts delta = pb.counts() - before;
    calls.f += delta.f;
    calls.g += delta.g;
    calls.grad_f += delta.grad_f;
    calls.jac_g += delta.jac_g;

    if (!next.allFinite() || next.lpNorm<Eigen::Infinity>() > 1e12) {
      std::ostringstream msg;
      msg << "state diverged at t = " << t_next << " (algorithm " << to_string(alg) << ")";
      throw DivergenceError(msg.str(), t_prev, y);
    }

    if (sc.guard) {
      double disp = 0.0;
      if (alg != Algorithm::vanilla_es) {
        const Vec x = next.segment(L.ix, n);
        const Vec px = project(dyn, x);
        disp = std::max(disp, (px - x).norm());
        next.segment(L.ix, n) = px;
      }
      if (L.ilam >= 0 && m > 0) {
        const Vec lam = next.segment(L.ilam, m);
        const Vec pl = project_dual(lam, gains.lambda_max);
        disp = std::max(disp, (pl - lam).norm());
        next.segment(L.ilam, m) = pl;
      }
      pending_guard = std::max(pending_guard, disp);
      traj.max_guard_disp = std::max(traj.max_guard_disp, disp);
    }
    if (p > 0 && spec.exosystem.field)
      next.segment(L.itheta, p) = enforce_exo_invariance(spec.exosystem, next.segment(L.itheta, p), &traj.exo_clamps);

    bank = bank.advance(h);
    y = std::move(next);
    if (automaton) {
      auto events = automaton->step(h, flow_rate);
      traj.switch_log.insert(traj.switch_log.end(), events.begin(), events.end());
      mode = automaton->mode();
    }
    push_window(window_entry(y));
    if (k % sc.stride == 0 || k == steps) record(t_next, y, mode);
  }
  traj.calls = calls;
  traj.max_noise = noise.max_emitted();
  return traj;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size() || a.n != b.n) throw ValidationError("cosimulate: trajectories are on different grids");
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.t[i] - b.t[i]) > 1e-12) throw ValidationError("cosimulate: sample times differ");
    out = std::max(out, (a.x[i] - b.x[i]).norm());
  }
  return out;
}

CosimResult cosimulate(const RunSpec& base, const std::vector<Algorithm>& algorithms) {
  if (algorithms.empty()) throw ValidationError("cosimulate: no algorithms given");
  CosimResult result;
  for (Algorithm a : algorithms) {
    RunSpec spec = base;
    spec.algorithm = a;
    result.trajectories.push_back(run(spec));
  }
  const std::size_t k = algorithms.size();
  result.sup_distance.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      result.sup_distance[i][j] = result.sup_distance[j][i] =
          sup_distance(result.trajectories[i], result.trajectories[j]);
  return result;
}

std::vector<std::string> trajectory_csv_header(const Trajectory& traj) {
  std::vector<std::string> h{"t"};
  auto block = [&](const std::string& name, Eigen::Index len) {
    for (Eigen::Index i = 1; i <= len; ++i) h.push_back(name + "_" + std::to_string(i));
  };
  block("x", traj.n);
  block("xhat", traj.n);
  if (traj.algorithm == Algorithm::ppdzo) {
    block("xi1", traj.n);
    block("xi2", traj.m);
  } else if (traj.has_xi()) {
    block("xi", traj.n);
  }
  if (traj.has_lambda()) block("lambda", traj.m);
  if (is_zeroth_order(traj.algorithm)) block("mu", 2 * traj.n);
  block("theta", traj.p);
  h.push_back("q");
  h.push_back("f_value");
  block("g", traj.m);
  for (const char* c : {"dist_opt", "in_set", "phi", "guard_disp"}) h.emplace_back(c);
  return h;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const auto header = trajectory_csv_header(traj);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  out << std::setprecision(17);
  auto put = [&](const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << v(i);
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.t[k];
    put(traj.x[k]);
    put(traj.xhat[k]);
    put(traj.xi[k]);
    if (traj.algorithm == Algorithm::ppdzo) put(traj.xi2[k]);
    if (traj.has_lambda()) put(traj.lambda[k]);
    put(traj.mu[k]);
    put(traj.theta[k]);
    out << ',' << traj.q[k] + 1 << ',' << traj.f_value[k];
    put(traj.g[k]);
    out << ',' << traj.dist_opt[k] << ',' << traj.in_set[k] << ',' << traj.phi[k] << ',' << traj.guard_disp[k]
        << '\n';
  }
}

void write_switch_log_csv(std::ostream& out, const std::vector<SwitchEvent>& log) {
  out << "t,q_before,q_after,tau\n" << std::setprecision(17);
  for (const auto& e : log) out << e.t << ',' << e.q_before + 1 << ',' << e.q_after + 1 << ',' << e.tau << '\n';
}

}  // namespace pzo
