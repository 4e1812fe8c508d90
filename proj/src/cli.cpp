#include "pzo/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "pzo/errors.hpp"

namespace pzo {

namespace fs = std::filesystem;

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ExosystemInvarianceError& e) {
    err << "exosystem: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

namespace {

Scenario load_with_overrides(const CommandOptions& opt) {
  if (opt.config.empty()) throw ValidationError("--config is required");
  Scenario s = load_scenario(opt.config);
  if (opt.seed) s.sim.config.seed = *opt.seed;
  if (opt.eps_omega_ratio) s.dither.eps_omega_ratio = *opt.eps_omega_ratio;
  return s;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  return f;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item.substr(b), &used));
    } catch (const std::exception&) {
      throw ValidationError("--values: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ValidationError("--values needs at least one number");
  return out;
}

double number(const Report& r, const std::string& key) {
  const auto v = r.get(key);
  return v ? std::stod(*v) : std::numeric_limits<double>::quiet_NaN();
}

void write_run_artifacts(const fs::path& dir, const std::string& name, const Trajectory& traj,
                         const BuiltScenario& built, const Report& report, bool plots) {
  {
    auto f = open_out(dir / (name + "_trajectory.csv"));
    write_trajectory_csv(f, traj);
  }
  if (built.spec.switching) {
    auto f = open_out(dir / (name + "_switches.csv"));
    write_switch_log_csv(f, traj.switch_log);
  }
  {
    auto f = open_out(dir / (name + "_report.txt"));
    report.write_text(f);
  }
  {
    auto f = open_out(dir / (name + "_summary.csv"));
    report.write_csv(f);
  }
  if (plots) {
    auto f = open_out(dir / (name + "_plot.csv"));
    write_plot_csv(f, traj);
    if (traj.n >= 2) {
      auto g = open_out(dir / (name + "_phase.svg"));
      write_phase_svg(g, traj, built.spec.set, built.spec.optimizer);
    }
  }
}

}  // namespace

std::string resolve_out_dir(const CommandOptions& opt, const Scenario& s) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (!s.output.dir.empty()) return s.output.dir;
  if (const char* env = std::getenv("PZO_OUT_DIR"); env && *env) return env;
  return "out";
}

int cmd_check(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const Scenario s = load_with_overrides(opt);
        const BuiltScenario b = build_scenario(s);
        for (const auto& w : b.warnings) err << "warning: " << w << '\n';
        out << "ok: " << opt.config << " (" << to_string(s.algorithm.name) << ", h = " << b.spec.sim.h
            << ", steps = " << static_cast<long long>(std::ceil(b.spec.sim.t_end / b.spec.sim.h - 1e-9)) << ")\n";
        return kExitOk;
      },
      err);
}

int cmd_run(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const Scenario s = load_with_overrides(opt);
        const BuiltScenario b = build_scenario(s);
        for (const auto& w : b.warnings) err << "warning: " << w << '\n';
        const fs::path dir = prepare_dir(resolve_out_dir(opt, s));
        const Trajectory traj = run(b.spec);
        const Report report = verification_report(traj, b.context);
        write_run_artifacts(dir, s.output.name, traj, b, report, s.output.plots);
        report.write_text(out);
        out << "output: " << (dir / s.output.name).string() << "_*\n";
        return kExitOk;
      },
      err);
}

std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& param, const std::vector<double>& values,
                                unsigned workers, double tol) {
  // Validate every variant up front so a bad value fails the whole sweep.
  std::vector<Scenario> variants;
  for (double v : values) {
    Scenario s = base;
    apply_parameter(s, param, v);
    build_scenario(s);
    variants.push_back(std::move(s));
  }
  std::vector<SweepRow> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < variants.size(); i = next++) {
      SweepRow row;
      row.value = values[i];
      try {
        const BuiltScenario b = build_scenario(variants[i]);
        const Trajectory traj = run(b.spec);
        const Report r = verification_report(traj, b.context);
        row.terminal_error = number(r, "terminal_error");
        row.limsup_tracking_error = number(r, "limsup_tracking_error");
        row.max_constraint_violation = number(r, "max_constraint_violation");
        row.oracle_calls = traj.calls.f + traj.calls.g;
        row.gradient_calls = traj.calls.gradient_calls();
        row.all_in_set = std::all_of(traj.in_set.begin(), traj.in_set.end(), [](int v) { return v == 1; });
        row.converged = std::isfinite(row.terminal_error) && row.terminal_error <= tol;
      } catch (const DivergenceError&) {
        row.status = "diverged";
      } catch (const ExosystemInvarianceError&) {
        row.status = "diverged";
      }
      rows[i] = row;
    }
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(variants.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::string& param, const std::vector<SweepRow>& rows) {
  out << param
      << ",status,terminal_error,limsup_tracking_error,max_constraint_violation,oracle_calls,gradient_calls,"
         "all_in_set,converged\n"
      << std::setprecision(17);
  for (const auto& r : rows)
    out << r.value << ',' << r.status << ',' << r.terminal_error << ',' << r.limsup_tracking_error << ','
        << r.max_constraint_violation << ',' << r.oracle_calls << ',' << r.gradient_calls << ','
        << (r.all_in_set ? 1 : 0) << ',' << (r.converged ? 1 : 0) << '\n';
}

int cmd_sweep(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const Scenario s = load_with_overrides(opt);
        const auto& names = sweep_parameters();
        if (std::find(names.begin(), names.end(), opt.param) == names.end())
          throw ValidationError("--param must be one of eps_a, eps_omega, eps_xi, eps_theta, tau_d");
        const auto values = parse_values(opt.values);
        const fs::path dir = prepare_dir(resolve_out_dir(opt, s));
        const auto rows = run_sweep(s, opt.param, values, opt.workers, opt.tol);
        const fs::path path = dir / (s.output.name + "_sweep_" + opt.param + ".csv");
        {
          auto f = open_out(path);
          write_sweep_csv(f, opt.param, rows);
        }
        write_sweep_csv(out, opt.param, rows);
        out << "output: " << path.string() << '\n';
        const bool any_diverged =
            std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "diverged"; });
        return any_diverged ? static_cast<int>(kExitDivergence) : static_cast<int>(kExitOk);
      },
      err);
}

int cmd_compare(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const Scenario s = load_with_overrides(opt);
        if (s.compare.size() < 2) throw ValidationError("[compare] algorithms must list at least two algorithms");
        const BuiltScenario b = build_scenario(s);
        for (const auto& w : b.warnings) err << "warning: " << w << '\n';
        const fs::path dir = prepare_dir(resolve_out_dir(opt, s));
        const CosimResult res = cosimulate(b.spec, s.compare);

        Report report;
        auto label = [&](std::size_t i) { return std::to_string(i + 1) + "_" + to_string(s.compare[i]); };
        for (std::size_t i = 0; i < s.compare.size(); ++i)
          for (std::size_t j = i + 1; j < s.compare.size(); ++j) {
            report.add("sup_distance." + label(i) + "." + label(j), res.sup_distance[i][j]);
            report.add("terminal_distance." + label(i) + "." + label(j),
                       (res.trajectories[i].x_avg.back() - res.trajectories[j].x_avg.back()).norm());
          }
        for (std::size_t i = 0; i < s.compare.size(); ++i) {
          const Report r = verification_report(res.trajectories[i], b.context);
          for (const auto& [k, v] : r.entries()) report.add(label(i) + "." + k, v);
          auto f = open_out(dir / (s.output.name + "_" + label(i) + "_trajectory.csv"));
          write_trajectory_csv(f, res.trajectories[i]);
        }
        {
          auto f = open_out(dir / (s.output.name + "_compare.txt"));
          report.write_text(f);
        }
        {
          auto f = open_out(dir / (s.output.name + "_compare.csv"));
          report.write_csv(f);
        }
        report.write_text(out);
        return kExitOk;
      },
      err);
}

// ---------------------------------------------------------------------------
// Plot emission

void write_plot_csv(std::ostream& out, const Trajectory& traj) {
  out << "t,series,component,value\n" << std::setprecision(17);
  auto put = [&](double t, const char* series, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << t << ',' << series << ',' << i + 1 << ',' << v(i) << '\n';
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.t[k];
    put(t, "x", traj.x[k]);
    put(t, "xhat", traj.xhat[k]);
    put(t, "x_avg", traj.x_avg[k]);
    put(t, "theta", traj.theta[k]);
    if (traj.has_lambda()) put(t, "lambda", traj.lambda[k]);
    out << t << ",f_value,1," << traj.f_value[k] << '\n';
    if (std::isfinite(traj.dist_opt[k])) out << t << ",dist_opt,1," << traj.dist_opt[k] << '\n';
    out << t << ",q,1," << traj.q[k] + 1 << '\n';
  }
}

namespace {

// Vertices of a planar polytope in counter-clockwise order.
std::vector<Vec> polygon_vertices(const Mat& A, const Vec& b) {
  std::vector<Vec> pts;
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = i + 1; j < A.rows(); ++j) {
      Eigen::Matrix2d M;
      M << A(i, 0), A(i, 1), A(j, 0), A(j, 1);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = M.inverse() * Eigen::Vector2d(b(i), b(j));
      if (((A * Vec(v)) - b).maxCoeff() <= 1e-9 * (1 + b.cwiseAbs().maxCoeff())) pts.push_back(Vec(v));
    }
  if (pts.empty()) return pts;
  Vec c = Vec::Zero(2);
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b2) {
    return std::atan2(a(1) - c(1), a(0) - c(0)) < std::atan2(b2(1) - c(1), b2(0) - c(0));
  });
  return pts;
}

}  // namespace

void write_phase_svg(std::ostream& out, const Trajectory& traj, const FeasibleSetd& set,
                     const std::function<Vec(const Vec&)>& optimizer) {
  // Bounding box over the path, the optimizer path and the set outline.
  double lo0 = std::numeric_limits<double>::infinity(), lo1 = lo0, hi0 = -lo0, hi1 = -lo0;
  auto grow = [&](double a, double b) {
    lo0 = std::min(lo0, a);
    hi0 = std::max(hi0, a);
    lo1 = std::min(lo1, b);
    hi1 = std::max(hi1, b);
  };
  for (const auto& x : traj.x) grow(x(0), x(1));
  std::vector<Vec> opt_path;
  if (optimizer)
    for (const auto& th : traj.theta) {
      opt_path.push_back(optimizer(th));
      grow(opt_path.back()(0), opt_path.back()(1));
    }
  if (set.dim() == 2) {
    if (set.kind() == SetKind::box) {
      const auto& bx = set.as<BoxShape<double>>();
      if (bx.lower.allFinite() && bx.upper.allFinite()) {
        grow(bx.lower(0), bx.lower(1));
        grow(bx.upper(0), bx.upper(1));
      }
    } else if (set.kind() == SetKind::ball) {
      const auto& bl = set.as<BallShape<double>>();
      grow(bl.center(0) - bl.radius, bl.center(1) - bl.radius);
      grow(bl.center(0) + bl.radius, bl.center(1) + bl.radius);
    } else if (set.kind() == SetKind::polytope) {
      const auto& pg = set.as<PolytopeShape<double>>();
      for (const auto& v : polygon_vertices(pg.A, pg.b)) grow(v(0), v(1));
    }
  }
  const double span = std::max({hi0 - lo0, hi1 - lo1, 1e-6});
  const double pad = 0.08 * span;
  lo0 -= pad;
  lo1 -= pad;
  const double size = span + 2 * pad;
  const double W = 480.0;
  auto X = [&](double v) { return (v - lo0) / size * W; };
  auto Y = [&](double v) { return W - (v - lo1) / size * W; };

  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << W << "\" viewBox=\"0 0 " << W
      << ' ' << W << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (set.dim() == 2) {
    const char* style = "fill=\"#e8f0fb\" stroke=\"#345\" stroke-width=\"1.5\"";
    if (set.kind() == SetKind::box) {
      const auto& bx = set.as<BoxShape<double>>();
      if (bx.lower.allFinite() && bx.upper.allFinite())
        out << "<rect x=\"" << X(bx.lower(0)) << "\" y=\"" << Y(bx.upper(1)) << "\" width=\""
            << X(bx.upper(0)) - X(bx.lower(0)) << "\" height=\"" << Y(bx.lower(1)) - Y(bx.upper(1)) << "\" " << style
            << "/>\n";
    } else if (set.kind() == SetKind::ball) {
      const auto& bl = set.as<BallShape<double>>();
      out << "<circle cx=\"" << X(bl.center(0)) << "\" cy=\"" << Y(bl.center(1)) << "\" r=\""
          << bl.radius / size * W << "\" " << style << "/>\n";
    } else if (set.kind() == SetKind::polytope) {
      const auto& pg = set.as<PolytopeShape<double>>();
      out << "<polygon points=\"";
      for (const auto& v : polygon_vertices(pg.A, pg.b)) out << X(v(0)) << ',' << Y(v(1)) << ' ';
      out << "\" " << style << "/>\n";
    }
  }
  auto polyline = [&](const std::vector<Vec>& pts, const char* attrs) {
    if (pts.empty()) return;
    out << "<polyline fill=\"none\" " << attrs << " points=\"";
    for (const auto& p : pts) out << X(p(0)) << ',' << Y(p(1)) << ' ';
    out << "\"/>\n";
  };
  polyline(opt_path, "stroke=\"#c33\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"");
  polyline(traj.x, "stroke=\"#1a5\" stroke-width=\"1.2\"");
  if (!traj.x.empty()) {
    out << "<circle cx=\"" << X(traj.x.front()(0)) << "\" cy=\"" << Y(traj.x.front()(1))
        << "\" r=\"4\" fill=\"#1a5\"/>\n";
    out << "<circle cx=\"" << X(traj.x.back()(0)) << "\" cy=\"" << Y(traj.x.back()(1))
        << "\" r=\"4\" fill=\"none\" stroke=\"#1a5\" stroke-width=\"2\"/>\n";
  }
  out << "<text x=\"8\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" << to_string(traj.algorithm)
      << ": x (green), optimizer (red dashed)</text>\n";
  out << "</svg>\n";
}

}  // namespace pzo
