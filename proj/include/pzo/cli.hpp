#pragma once

// Command implementations behind the `pzo` executable. Each returns a process
// exit code: 0 success, 2 validation, 3 divergence, 4 I/O.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pzo/scenario.hpp"

namespace pzo {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitValidation = 2, kExitDivergence = 3, kExitIo = 4 };

struct CommandOptions {
  std::string config;
  std::string out_dir;  // empty: config value, then $PZO_OUT_DIR, then "out"
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;  // 0: hardware concurrency
  std::string param;
  std::string values;
  std::optional<double> eps_omega_ratio;
  double tol = 0.05;  // convergence flag threshold in sweep summaries
};

/// Runs body and maps exceptions to exit codes, printing the message to err.
int guarded(const std::function<int()>& body, std::ostream& err);

int cmd_run(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_compare(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_check(const CommandOptions& opt, std::ostream& out, std::ostream& err);

/// Output directory resolution: flag, then config, then $PZO_OUT_DIR, then "out".
std::string resolve_out_dir(const CommandOptions& opt, const Scenario& s);

/// Long-format plot data: t, series, component, value.
void write_plot_csv(std::ostream& out, const Trajectory& traj);
/// (x1, x2) phase portrait with the feasible-set outline and the optimizer path.
void write_phase_svg(std::ostream& out, const Trajectory& traj, const FeasibleSetd& set,
                     const std::function<Vec(const Vec&)>& optimizer);

struct SweepRow {
  double value = 0.0;
  std::string status = "ok";  // ok | diverged | invalid
  double terminal_error = 0.0;
  double limsup_tracking_error = 0.0;
  double max_constraint_violation = 0.0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t gradient_calls = 0;
  bool all_in_set = true;
  bool converged = false;
};

/// Runs one scenario per value on a worker pool; rows come back in value order.
std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& param, const std::vector<double>& values,
                                unsigned workers, double tol);
void write_sweep_csv(std::ostream& out, const std::string& param, const std::vector<SweepRow>& rows);

}  // namespace pzo
