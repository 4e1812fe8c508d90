#include "pzo/hybrid_switching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pzo/errors.hpp"

namespace pzo {

std::string to_string(SwitchPolicy p) { return p == SwitchPolicy::cyclic ? "cyclic" : "random"; }
std::string to_string(JumpTiming t) { return t == JumpTiming::eager ? "eager" : "lazy"; }

SwitchPolicy parse_switch_policy(const std::string& s) {
  if (s == "cyclic") return SwitchPolicy::cyclic;
  if (s == "random") return SwitchPolicy::random;
  throw ValidationError("unknown switch policy '" + s + "' (expected cyclic|random)");
}

JumpTiming parse_jump_timing(const std::string& s) {
  if (s == "eager") return JumpTiming::eager;
  if (s == "lazy") return JumpTiming::lazy;
  throw ValidationError("unknown jump timing '" + s + "' (expected eager|lazy)");
}

SwitchAutomaton::SwitchAutomaton(const AutomatonConfig& config)
    : config_(config), q_(config.q0), tau_(config.tau0), engine_(config.seed) {
  if (config_.modes < 1) throw ValidationError("switching: need at least one mode");
  if (!(config_.tau_d > 0)) throw ValidationError("switching: tau_d must be positive");
  if (!(config_.n0 >= 1)) throw ValidationError("switching: N0 must be at least 1");
  if (config_.tau0 < 0 || config_.tau0 > config_.n0) throw ValidationError("switching: tau0 must lie in [0, N0]");
  if (config_.q0 < 0 || config_.q0 >= config_.modes) throw ValidationError("switching: initial mode out of range");
  if (config_.lazy_probability < 0 || config_.lazy_probability > 1)
    throw ValidationError("switching: lazy probability must lie in [0, 1]");
}

int SwitchAutomaton::next_mode() {
  if (config_.policy == SwitchPolicy::cyclic) return (q_ + 1) % config_.modes;
  std::uniform_int_distribution<int> pick(0, config_.modes - 2);
  const int k = pick(engine_);
  return k >= q_ ? k + 1 : k;
}

std::vector<SwitchEvent> SwitchAutomaton::step(double dt, double flow_rate) {
  if (!(dt > 0)) throw ValidationError("switching: dt must be positive");
  if (!(flow_rate >= 0) || flow_rate > max_flow_rate() * (1.0 + 1e-12))
    throw ValidationError("switching: flow rate " + std::to_string(flow_rate) + " outside [0, 1/tau_d]");
  t_ += dt;
  tau_ = std::min(config_.n0, tau_ + flow_rate * dt);
  std::vector<SwitchEvent> events;
  if (config_.modes < 2) return events;
  std::bernoulli_distribution take(config_.lazy_probability);
  while (tau_ >= 1.0) {
    if (config_.timing == JumpTiming::lazy && !take(engine_)) break;
    const int before = q_;
    q_ = next_mode();
    tau_ -= 1.0;
    events.push_back({t_, before, q_, tau_});
  }
  return events;
}

AutomatonStep automaton_step(SwitchAutomaton a, double dt, double flow_rate) {
  auto events = a.step(dt, flow_rate);
  return {std::move(a), std::move(events)};
}

AdtAudit audit_adt(const std::vector<SwitchEvent>& log, double tau_d, double n0) {
  AdtAudit audit;
  audit.switches = log.size();
  audit.worst_margin = log.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.size(); ++i) {
    for (std::size_t j = i; j < log.size(); ++j) {
      const double count = static_cast<double>(j - i + 1);
      const double margin = count - (log[j].t - log[i].t) / tau_d - n0;
      if (margin > audit.worst_margin) {
        audit.worst_margin = margin;
        audit.worst_t1 = log[i].t;
        audit.worst_t2 = log[j].t;
      }
    }
  }
  audit.ok = audit.worst_margin <= 1e-9;
  return audit;
}

}  // namespace pzo
