#pragma once

// Average-dwell-time switching automaton. The timer tau flows at a rate in
// [0, 1/tau_d] and saturates at N0; a jump needs tau >= 1, changes the mode to
// some other mode and spends one unit of tau. Any signal produced this way
// satisfies S(t1, t2) <= (t2 - t1) / tau_d + N0.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pzo {

enum class SwitchPolicy { cyclic, random };
enum class JumpTiming { eager, lazy };

std::string to_string(SwitchPolicy p);
std::string to_string(JumpTiming t);
SwitchPolicy parse_switch_policy(const std::string& s);
JumpTiming parse_jump_timing(const std::string& s);

struct SwitchEvent {
  double t = 0.0;
  int q_before = 0;
  int q_after = 0;
  double tau = 0.0;  // timer value after the jump
};

struct AutomatonConfig {
  int modes = 2;
  double tau_d = 1.0;
  double n0 = 1.0;  // chatter bound N0 >= 1
  SwitchPolicy policy = SwitchPolicy::cyclic;
  JumpTiming timing = JumpTiming::eager;
  double lazy_probability = 0.5;  // chance of taking an allowed jump per step in lazy mode
  std::uint64_t seed = 1;
  double tau0 = 0.0;
  int q0 = 0;
};

class SwitchAutomaton {
 public:
  explicit SwitchAutomaton(const AutomatonConfig& config);

  int mode() const { return q_; }
  double timer() const { return tau_; }
  double time() const { return t_; }
  const AutomatonConfig& config() const { return config_; }
  double max_flow_rate() const { return 1.0 / config_.tau_d; }

  /// Flows for dt at the given rate, then takes every jump the policy requests.
  /// Events are stamped with the time at the end of the step. Throws
  /// ValidationError for a rate outside [0, 1/tau_d] or dt <= 0.
  std::vector<SwitchEvent> step(double dt, double flow_rate);

 private:
  int next_mode();

  AutomatonConfig config_;
  int q_;
  double tau_;
  double t_ = 0.0;
  std::mt19937_64 engine_;
};

struct AutomatonStep {
  SwitchAutomaton automaton;
  std::vector<SwitchEvent> events;
};

/// Value-style stepping: returns the advanced automaton and its jump events.
AutomatonStep automaton_step(SwitchAutomaton a, double dt, double flow_rate);

struct AdtAudit {
  bool ok = true;
  std::size_t switches = 0;
  /// Largest S(t1, t2) - (t2 - t1)/tau_d - N0 over all windows (<= 0 when ok).
  double worst_margin = 0.0;
  double worst_t1 = 0.0;
  double worst_t2 = 0.0;
};

/// Checks the average-dwell-time bound on every closed window spanned by two
/// logged switches (these windows are the binding ones).
AdtAudit audit_adt(const std::vector<SwitchEvent>& log, double tau_d, double n0);

}  // namespace pzo
