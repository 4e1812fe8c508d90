#include "pzo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pzo/errors.hpp"

namespace pzo {

namespace pt = boost::property_tree;

namespace {

// ---------------------------------------------------------------------------
// Value parsing

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("key '" + key + "': '" + text + "' is not a number");
  }
}

Vec to_vec(const std::string& key, const std::string& text) {
  const auto items = split_list(text);
  Vec v(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(key, items[i]);
  return v;
}

Mat to_mat(const std::string& key, const std::string& text) {
  std::vector<Vec> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';'))
    if (!trim(row).empty()) rows.push_back(to_vec(key, row));
  if (rows.empty()) return Mat();
  Mat M(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != M.cols()) throw ValidationError("key '" + key + "': matrix rows have different lengths");
    M.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return M;
}

bool to_bool(const std::string& key, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), ::tolower);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError("key '" + key + "': '" + text + "' is not a boolean");
}

long long to_int(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != std::floor(v)) throw ValidationError("key '" + key + "': '" + text + "' is not an integer");
  return static_cast<long long>(v);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(const Vec& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i));
  return s;
}

std::string fmt(const Mat& M) {
  std::string s;
  for (Eigen::Index i = 0; i < M.rows(); ++i) s += (i ? "; " : "") + fmt(Vec(M.row(i).transpose()));
  return s;
}

// Reads one section, rejecting keys it does not know.
class Section {
 public:
  Section(const pt::ptree& root, const std::string& name, std::set<std::string> allowed) : name_(name) {
    if (auto child = root.get_child_optional(name)) {
      for (const auto& [k, v] : *child) {
        if (!allowed.count(k)) throw ValidationError("unknown key '" + k + "' in section [" + name + "]");
        values_[k] = trim(v.data());
      }
    }
  }

  bool has(const std::string& k) const { return values_.count(k) && !values_.at(k).empty(); }
  std::string str(const std::string& k, const std::string& def) const { return has(k) ? values_.at(k) : def; }
  double num(const std::string& k, double def) const { return has(k) ? to_double(key(k), values_.at(k)) : def; }
  long long integer(const std::string& k, long long def) const {
    return has(k) ? to_int(key(k), values_.at(k)) : def;
  }
  bool flag(const std::string& k, bool def) const { return has(k) ? to_bool(key(k), values_.at(k)) : def; }
  Vec vec(const std::string& k) const { return has(k) ? to_vec(key(k), values_.at(k)) : Vec(); }
  Mat mat(const std::string& k) const { return has(k) ? to_mat(key(k), values_.at(k)) : Mat(); }

 private:
  std::string key(const std::string& k) const { return name_ + "." + k; }
  std::string name_;
  std::map<std::string, std::string> values_;
};

NoiseMode parse_noise_mode(const std::string& s) {
  if (s == "uniform_ball") return NoiseMode::uniform_ball;
  if (s == "constant_direction") return NoiseMode::constant_direction;
  throw ValidationError("unknown noise mode '" + s + "' (expected uniform_ball|constant_direction)");
}

NoiseTarget parse_noise_target(const std::string& s) {
  if (s == "measurement") return NoiseTarget::measurement;
  if (s == "state") return NoiseTarget::state;
  if (s == "both") return NoiseTarget::both;
  throw ValidationError("unknown noise target '" + s + "' (expected measurement|state|both)");
}

std::string to_string(NoiseMode m) { return m == NoiseMode::uniform_ball ? "uniform_ball" : "constant_direction"; }
std::string to_string(NoiseTarget t) {
  switch (t) {
    case NoiseTarget::measurement: return "measurement";
    case NoiseTarget::state: return "state";
    case NoiseTarget::both: return "both";
  }
  return "measurement";
}

bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && (a.array() == b.array()).all(); }
bool same(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool operator==(const Scenario& a, const Scenario& b) {
  const auto& pa = a.problem;
  const auto& pb = b.problem;
  const bool problem = pa.name == pb.name && pa.dim == pb.dim && same(pa.x_star, pb.x_star) &&
                       pa.convex_radius == pb.convex_radius && pa.blend_width == pb.blend_width && same(pa.Q, pb.Q) &&
                       same(pa.c, pb.c) && pa.k == pb.k && same(pa.G, pb.G) && same(pa.h, pb.h);
  const bool exo = a.exosystem.kind == b.exosystem.kind && a.exosystem.eps == b.exosystem.eps &&
                   a.exosystem.bound == b.exosystem.bound && same(a.exosystem.theta0, b.exosystem.theta0);
  const bool set = a.set.kind == b.set.kind && same(a.set.lower, b.set.lower) && same(a.set.upper, b.set.upper) &&
                   same(a.set.center, b.set.center) && a.set.radius == b.set.radius && same(a.set.A, b.set.A) &&
                   same(a.set.b, b.set.b) && a.set.shrink == b.set.shrink;
  const auto& ga = a.algorithm.gains;
  const auto& gb = b.algorithm.gains;
  const bool alg = a.algorithm.name == b.algorithm.name && ga.k_x == gb.k_x && ga.alpha_x == gb.alpha_x &&
                   ga.k_lambda == gb.k_lambda && ga.alpha_lambda == gb.alpha_lambda && ga.eps_xi == gb.eps_xi &&
                   ga.eps_a == gb.eps_a && ga.eps_omega == gb.eps_omega && ga.lambda_max == gb.lambda_max &&
                   same(a.algorithm.x0, b.algorithm.x0) && same(a.algorithm.xi0, b.algorithm.xi0) &&
                   same(a.algorithm.lambda0, b.algorithm.lambda0) && same(a.algorithm.xi2_0, b.algorithm.xi2_0);
  const bool dither = a.dither.kappa == b.dither.kappa && same(a.dither.mu0, b.dither.mu0) &&
                      a.dither.eps_omega_ratio == b.dither.eps_omega_ratio;
  const auto& sa = a.sim.config;
  const auto& sb = b.sim.config;
  const bool sim = sa.t_end == sb.t_end && sa.h == sb.h && sa.stride == sb.stride && sa.integrator == sb.integrator &&
                   sa.guard == sb.guard && sa.seed == sb.seed && a.sim.auto_h == b.sim.auto_h;
  const bool noise = a.noise.bound == b.noise.bound && a.noise.mode == b.noise.mode &&
                     a.noise.target == b.noise.target && a.noise_seed_set == b.noise_seed_set &&
                     (!a.noise_seed_set || a.noise.seed == b.noise.seed);
  const auto& wa = a.switching.config;
  const auto& wb = b.switching.config;
  const bool sw = a.switching.enabled == b.switching.enabled && wa.modes == wb.modes && wa.tau_d == wb.tau_d &&
                  wa.n0 == wb.n0 && wa.policy == wb.policy && wa.timing == wb.timing &&
                  wa.lazy_probability == wb.lazy_probability && wa.tau0 == wb.tau0 && wa.q0 == wb.q0 &&
                  a.switching.flow_rate == b.switching.flow_rate;
  const bool out = a.output.dir == b.output.dir && a.output.name == b.output.name && a.output.plots == b.output.plots;
  return problem && exo && set && alg && dither && sim && noise && sw && out && a.compare == b.compare;
}

Scenario parse_scenario(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config syntax: ") + e.what());
  }
  static const std::set<std::string> sections{"problem",  "exosystem", "set",    "algorithm", "dither",
                                              "sim",      "noise",     "switching", "output", "compare"};
  for (const auto& [name, child] : root) {
    if (!sections.count(name)) throw ValidationError("unknown section [" + name + "]");
    if (child.empty() && !child.data().empty()) throw ValidationError("key '" + name + "' outside any section");
  }

  Scenario s;
  {
    const Section sec(root, "problem",
                      {"name", "dim", "x_star", "convex_radius", "blend_width", "Q", "c", "k", "G", "h"});
    s.problem.name = sec.str("name", s.problem.name);
    s.problem.dim = sec.integer("dim", s.problem.dim);
    s.problem.x_star = sec.vec("x_star");
    s.problem.convex_radius = sec.num("convex_radius", s.problem.convex_radius);
    s.problem.blend_width = sec.num("blend_width", s.problem.blend_width);
    s.problem.Q = sec.mat("Q");
    s.problem.c = sec.vec("c");
    s.problem.k = sec.num("k", s.problem.k);
    s.problem.G = sec.mat("G");
    s.problem.h = sec.vec("h");
  }
  {
    const Section sec(root, "exosystem", {"kind", "eps", "bound", "theta0"});
    s.exosystem.kind = sec.str("kind", s.exosystem.kind);
    s.exosystem.eps = sec.num("eps", s.exosystem.eps);
    s.exosystem.bound = sec.num("bound", s.exosystem.bound);
    s.exosystem.theta0 = sec.vec("theta0");
  }
  {
    const Section sec(root, "set", {"kind", "lower", "upper", "center", "radius", "A", "b", "shrink"});
    s.set.kind = sec.str("kind", s.set.kind);
    s.set.lower = sec.vec("lower");
    s.set.upper = sec.vec("upper");
    s.set.center = sec.vec("center");
    s.set.radius = sec.num("radius", s.set.radius);
    s.set.A = sec.mat("A");
    s.set.b = sec.vec("b");
    s.set.shrink = sec.flag("shrink", s.set.shrink);
  }
  {
    const Section sec(root, "algorithm",
                      {"name", "k_x", "alpha_x", "k_lambda", "alpha_lambda", "eps_xi", "eps_a", "eps_omega",
                       "lambda_max", "x0", "xi0", "lambda0", "xi2_0"});
    auto& a = s.algorithm;
    a.name = parse_algorithm(sec.str("name", to_string(a.name)));
    a.gains.k_x = sec.num("k_x", a.gains.k_x);
    a.gains.alpha_x = sec.num("alpha_x", a.gains.alpha_x);
    a.gains.k_lambda = sec.num("k_lambda", a.gains.k_lambda);
    a.gains.alpha_lambda = sec.num("alpha_lambda", a.gains.alpha_lambda);
    a.gains.eps_xi = sec.num("eps_xi", a.gains.eps_xi);
    a.gains.eps_a = sec.num("eps_a", a.gains.eps_a);
    a.gains.eps_omega = sec.num("eps_omega", a.gains.eps_omega);
    a.gains.lambda_max = sec.num("lambda_max", a.gains.lambda_max);
    a.x0 = sec.vec("x0");
    a.xi0 = sec.vec("xi0");
    a.lambda0 = sec.vec("lambda0");
    a.xi2_0 = sec.vec("xi2_0");
  }
  {
    const Section sec(root, "dither", {"kappa", "mu0", "eps_omega_ratio"});
    if (sec.has("kappa")) {
      for (const auto& item : split_list(sec.str("kappa", ""))) {
        try {
          s.dither.kappa.push_back(Rational::parse(item));
        } catch (const std::exception&) {
          throw ValidationError("key 'dither.kappa': '" + item + "' is not a rational number");
        }
      }
    }
    s.dither.mu0 = sec.vec("mu0");
    s.dither.eps_omega_ratio = sec.num("eps_omega_ratio", 0.0);
  }
  {
    const Section sec(root, "sim", {"t_end", "h", "integrator", "guard", "seed"});
    auto& c = s.sim.config;
    c.t_end = sec.num("t_end", c.t_end);
    if (sec.str("h", "") == "auto") {
      s.sim.auto_h = true;
    } else {
      c.h = sec.num("h", c.h);
    }
    c.integrator = parse_integrator(sec.str("integrator", to_string(c.integrator)));
    c.guard = sec.flag("guard", c.guard);
    const long long seed = sec.integer("seed", static_cast<long long>(c.seed));
    if (seed < 0) throw ValidationError("key 'sim.seed' must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
  }
  {
    const Section sec(root, "noise", {"bound", "mode", "target", "seed"});
    s.noise.bound = sec.num("bound", 0.0);
    if (s.noise.bound < 0) throw ValidationError("key 'noise.bound' must be nonnegative");
    s.noise.mode = parse_noise_mode(sec.str("mode", "uniform_ball"));
    s.noise.target = parse_noise_target(sec.str("target", "measurement"));
    if (sec.has("seed")) {
      s.noise_seed_set = true;
      s.noise.seed = static_cast<std::uint64_t>(sec.integer("seed", 1));
    }
  }
  {
    const Section sec(root, "switching",
                      {"enabled", "modes", "tau_d", "n0", "policy", "timing", "lazy_probability", "flow_rate", "tau0",
                       "q0"});
    auto& w = s.switching;
    w.enabled = sec.flag("enabled", root.get_child_optional("switching").has_value());
    w.config.modes = static_cast<int>(sec.integer("modes", w.config.modes));
    w.config.tau_d = sec.num("tau_d", w.config.tau_d);
    w.config.n0 = sec.num("n0", w.config.n0);
    w.config.policy = parse_switch_policy(sec.str("policy", to_string(w.config.policy)));
    w.config.timing = parse_jump_timing(sec.str("timing", to_string(w.config.timing)));
    w.config.lazy_probability = sec.num("lazy_probability", w.config.lazy_probability);
    w.flow_rate = sec.num("flow_rate", w.flow_rate);
    w.config.tau0 = sec.num("tau0", w.config.tau0);
    w.config.q0 = static_cast<int>(sec.integer("q0", 1)) - 1;
  }
  {
    const Section sec(root, "output", {"dir", "name", "stride", "plots"});
    s.output.dir = sec.str("dir", "");
    s.output.name = sec.str("name", s.output.name);
    s.output.plots = sec.flag("plots", s.output.plots);
    const long long stride = sec.integer("stride", s.sim.config.stride);
    if (stride < 1) throw ValidationError("key 'output.stride' must be at least 1");
    s.sim.config.stride = static_cast<int>(stride);
  }
  {
    const Section sec(root, "compare", {"algorithms"});
    for (const auto& name : split_list(sec.str("algorithms", ""))) s.compare.push_back(parse_algorithm(name));
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  return parse_scenario(in);
}

void save_scenario(std::ostream& out, const Scenario& s) {
  auto put = [&](const std::string& k, const std::string& v) {
    if (!v.empty()) out << k << " = " << v << '\n';
  };
  out << "[problem]\n";
  put("name", s.problem.name);
  put("dim", std::to_string(s.problem.dim));
  put("x_star", fmt(s.problem.x_star));
  put("convex_radius", fmt(s.problem.convex_radius));
  put("blend_width", fmt(s.problem.blend_width));
  put("Q", fmt(s.problem.Q));
  put("c", fmt(s.problem.c));
  put("k", fmt(s.problem.k));
  put("G", fmt(s.problem.G));
  put("h", fmt(s.problem.h));

  out << "\n[exosystem]\n";
  put("kind", s.exosystem.kind);
  put("eps", fmt(s.exosystem.eps));
  put("bound", fmt(s.exosystem.bound));
  put("theta0", fmt(s.exosystem.theta0));

  out << "\n[set]\n";
  put("kind", s.set.kind);
  put("lower", fmt(s.set.lower));
  put("upper", fmt(s.set.upper));
  put("center", fmt(s.set.center));
  put("radius", fmt(s.set.radius));
  put("A", fmt(s.set.A));
  put("b", fmt(s.set.b));
  put("shrink", s.set.shrink ? "true" : "false");

  const auto& g = s.algorithm.gains;
  out << "\n[algorithm]\n";
  put("name", to_string(s.algorithm.name));
  put("k_x", fmt(g.k_x));
  put("alpha_x", fmt(g.alpha_x));
  put("k_lambda", fmt(g.k_lambda));
  put("alpha_lambda", fmt(g.alpha_lambda));
  put("eps_xi", fmt(g.eps_xi));
  put("eps_a", fmt(g.eps_a));
  put("eps_omega", fmt(g.eps_omega));
  put("lambda_max", fmt(g.lambda_max));
  put("x0", fmt(s.algorithm.x0));
  put("xi0", fmt(s.algorithm.xi0));
  put("lambda0", fmt(s.algorithm.lambda0));
  put("xi2_0", fmt(s.algorithm.xi2_0));

  out << "\n[dither]\n";
  std::string kappa;
  for (std::size_t i = 0; i < s.dither.kappa.size(); ++i) kappa += (i ? ", " : "") + s.dither.kappa[i].str();
  put("kappa", kappa);
  put("mu0", fmt(s.dither.mu0));
  if (s.dither.eps_omega_ratio > 0) put("eps_omega_ratio", fmt(s.dither.eps_omega_ratio));

  const auto& c = s.sim.config;
  out << "\n[sim]\n";
  put("t_end", fmt(c.t_end));
  put("h", s.sim.auto_h ? "auto" : fmt(c.h));
  put("integrator", to_string(c.integrator));
  put("guard", c.guard ? "true" : "false");
  put("seed", std::to_string(c.seed));

  out << "\n[noise]\n";
  put("bound", fmt(s.noise.bound));
  put("mode", to_string(s.noise.mode));
  put("target", to_string(s.noise.target));
  if (s.noise_seed_set) put("seed", std::to_string(s.noise.seed));

  if (s.switching.enabled) {
    const auto& w = s.switching.config;
    out << "\n[switching]\n";
    put("enabled", "true");
    put("modes", std::to_string(w.modes));
    put("tau_d", fmt(w.tau_d));
    put("n0", fmt(w.n0));
    put("policy", to_string(w.policy));
    put("timing", to_string(w.timing));
    put("lazy_probability", fmt(w.lazy_probability));
    put("flow_rate", fmt(s.switching.flow_rate));
    put("tau0", fmt(w.tau0));
    put("q0", std::to_string(w.q0 + 1));
  }

  out << "\n[output]\n";
  put("dir", s.output.dir);
  put("name", s.output.name);
  put("stride", std::to_string(c.stride));
  put("plots", s.output.plots ? "true" : "false");

  if (!s.compare.empty()) {
    std::string list;
    for (std::size_t i = 0; i < s.compare.size(); ++i) list += (i ? ", " : "") + to_string(s.compare[i]);
    out << "\n[compare]\n";
    put("algorithms", list);
  }
}

const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> names{"eps_a", "eps_omega", "eps_xi", "eps_theta", "tau_d"};
  return names;
}

void apply_parameter(Scenario& s, const std::string& name, double value) {
  if (name == "eps_a") {
    s.algorithm.gains.eps_a = value;
  } else if (name == "eps_omega") {
    s.algorithm.gains.eps_omega = value;
    s.dither.eps_omega_ratio = 0.0;
  } else if (name == "eps_xi") {
    s.algorithm.gains.eps_xi = value;
  } else if (name == "eps_theta") {
    if (value == 0.0) {
      s.exosystem.kind = "static";
    } else if (s.exosystem.kind == "static") {
      throw ValidationError("eps_theta sweep needs a moving exosystem in the base scenario");
    }
    s.exosystem.eps = value;
  } else if (name == "tau_d") {
    if (!s.switching.enabled) throw ValidationError("tau_d sweep needs a [switching] section");
    s.switching.config.tau_d = value;
  } else {
    throw ValidationError("unknown sweep parameter '" + name + "' (expected eps_a|eps_omega|eps_xi|eps_theta|tau_d)");
  }
}

FeasibleSetd build_set(const SetBlock& b) {
  if (b.kind == "box") return FeasibleSetd::box(b.lower, b.upper);
  if (b.kind == "ball") return FeasibleSetd::ball(b.center, b.radius);
  if (b.kind == "polytope") return FeasibleSetd::polytope(b.A, b.b);
  if (b.kind == "orthant" || b.kind == "whole") throw ValidationError("orthant and whole sets need a dimension");
  throw ValidationError("unknown set kind '" + b.kind + "' (expected box|ball|polytope|orthant|whole)");
}

namespace {

FeasibleSetd build_set_for(const SetBlock& b, Eigen::Index n) {
  if (b.kind == "orthant") return FeasibleSetd::orthant(n);
  if (b.kind == "whole") return FeasibleSetd::whole(n);
  return build_set(b);
}

}  // namespace

Problem build_problem(const ProblemBlock& b) {
  if (b.name == "tracking") return make_tracking_problem();
  if (b.name == "desk_kkt") return make_desk_kkt_problem();
  if (b.name == "switching_quadratic") {
    if (b.x_star.size() == 0) throw ValidationError("switching_quadratic needs problem.x_star");
    return make_switching_quadratic_problem(b.x_star);
  }
  if (b.name == "regional") {
    if (b.x_star.size() == 0) throw ValidationError("regional needs problem.x_star");
    return make_regional_problem(b.x_star, b.convex_radius, b.blend_width);
  }
  if (b.name == "quadratic") {
    if (b.Q.size() == 0 || b.Q.rows() != b.Q.cols()) throw ValidationError("quadratic needs a square problem.Q");
    const Vec c = b.c.size() ? b.c : Vec(Vec::Zero(b.Q.rows()));
    return make_quadratic_problem(b.Q, c, b.k, b.G, b.h);
  }
  if (b.name == "logquad") {
    if (b.dim < 1) throw ValidationError("logquad needs problem.dim >= 1");
    return make_logquad_problem(b.dim);
  }
  throw ValidationError("unknown problem '" + b.name +
                        "' (expected tracking|desk_kkt|switching_quadratic|regional|quadratic|logquad)");
}

Exosystem build_exosystem(const ExosystemBlock& b) {
  if (b.kind == "static") return static_exosystem(b.theta0.size());
  if (!(b.bound > 0)) throw ValidationError("exosystem.bound must be positive");
  if (b.eps < 0) throw ValidationError("exosystem.eps must be nonnegative");
  if (b.kind == "drifting") return drifting_exosystem(b.eps, b.bound);
  if (b.kind == "rotation") return rotation_exosystem(b.eps, b.bound);
  throw ValidationError("unknown exosystem '" + b.kind + "' (expected static|drifting|rotation)");
}

namespace {

double effective_eps_omega(const Scenario& s) {
  return s.dither.eps_omega_ratio > 0 ? s.dither.eps_omega_ratio * s.algorithm.gains.eps_a
                                      : s.algorithm.gains.eps_omega;
}

bool filtered(Algorithm a) {
  return a == Algorithm::pgzo || a == Algorithm::ppdzo || a == Algorithm::dpgzo || a == Algorithm::average_gzo;
}

// Projected gradient on 1/2 x^T Q x + c^T x over X, from the model (not the oracle).
Vec quadratic_minimizer(const Mat& Q, const Vec& c, const FeasibleSetd& X) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (Q + Q.transpose()));
  const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  Vec x = project(X, Vec(Vec::Zero(c.size())));
  for (int it = 0; it < 200000; ++it) {
    const Vec next = project(X, Vec(x - (Q * x + c) / L));
    const double step = (next - x).norm();
    x = next;
    if (step < 1e-14) break;
  }
  return x;
}

}  // namespace

double auto_step(const Scenario& s) {
  const auto& c = s.sim.config;
  std::vector<Algorithm> algs = s.compare;
  algs.push_back(s.algorithm.name);
  const bool zo = std::any_of(algs.begin(), algs.end(), is_zeroth_order);
  const bool filter = std::any_of(algs.begin(), algs.end(), filtered);
  double limit = std::numeric_limits<double>::infinity();
  if (zo) {
    auto kappa = s.dither.kappa;
    if (kappa.empty()) kappa = default_kappa(static_cast<std::size_t>(std::max<Eigen::Index>(s.algorithm.x0.size(), 1)));
    double kmax = 0.0;
    for (const auto& k : kappa) kmax = std::max(kmax, k.value());
    limit = std::min(limit, effective_eps_omega(s) / (20.0 * kmax));
  }
  if (filter && c.integrator != IntegratorKind::exp_euler) limit = std::min(limit, s.algorithm.gains.eps_xi / 5.0);
  if (!std::isfinite(limit)) limit = std::min(c.h, 1e-2);
  if (c.t_end > 0) return c.t_end / std::ceil(c.t_end / limit - 1e-9);
  return limit;
}

BuiltScenario build_scenario(const Scenario& s) {
  BuiltScenario out;
  out.problem = std::make_unique<Problem>(build_problem(s.problem));
  out.verify_problem = std::make_unique<Problem>(build_problem(s.problem));
  const Problem& pb = *out.problem;
  const auto n = pb.n();

  RunSpec& spec = out.spec;
  spec.problem = out.problem.get();
  spec.algorithm = s.algorithm.name;
  spec.gains = s.algorithm.gains;
  spec.gains.eps_omega = effective_eps_omega(s);
  spec.set = build_set_for(s.set, n);
  spec.shrink_set = s.set.shrink;
  spec.kappa = s.dither.kappa;
  spec.mu0 = s.dither.mu0;
  spec.exosystem = build_exosystem(s.exosystem);
  spec.theta0 = s.exosystem.theta0;
  if (pb.p() > 0 && spec.theta0.size() == 0) throw ValidationError("problem needs exosystem.theta0");
  if (s.exosystem.kind == "static") spec.exosystem = static_exosystem(pb.p());
  if (s.algorithm.x0.size() == 0) throw ValidationError("algorithm.x0 is required");
  spec.x0 = s.algorithm.x0;
  spec.xi0 = s.algorithm.xi0;
  spec.lambda0 = s.algorithm.lambda0;
  spec.xi2_0 = s.algorithm.xi2_0;
  spec.sim = s.sim.config;
  if (s.sim.auto_h) spec.sim.h = auto_step(s);
  spec.noise = s.noise;
  if (!s.noise_seed_set) spec.noise.seed = mix_seed(s.sim.config.seed, 1);
  if (s.switching.enabled) {
    AutomatonConfig cfg = s.switching.config;
    cfg.seed = mix_seed(s.sim.config.seed, 2);
    spec.switching = cfg;
    spec.flow_rate = s.switching.flow_rate;
  }

  // Optimizer map for diagnostics.
  const FeasibleSetd X = spec.set;
  if (s.problem.x_star.size()) {
    const Vec xs = s.problem.x_star;
    spec.optimizer = [xs](const Vec&) { return xs; };
  } else if (s.problem.name == "tracking") {
    spec.optimizer = [X](const Vec& th) { return project(X, th); };
  } else if (s.problem.name == "desk_kkt") {
    spec.optimizer = [](const Vec&) { return Vec(Vec::Ones(2)); };
  } else if (s.problem.name == "logquad") {
    const Vec xs = project(X, Vec(Vec::Zero(n)));
    spec.optimizer = [xs](const Vec&) { return xs; };
  } else if (s.problem.name == "quadratic" && s.problem.G.size() == 0) {
    const Vec xs = quadratic_minimizer(s.problem.Q, s.problem.c.size() ? s.problem.c : Vec(Vec::Zero(n)), X);
    spec.optimizer = [xs](const Vec&) { return xs; };
  }

  out.context.set = spec.set;
  out.context.shrink_set = spec.shrink_set;
  out.context.optimizer = spec.optimizer;
  out.context.verify_problem = out.verify_problem.get();
  out.context.switching = spec.switching;

  out.warnings = validate_run(spec);
  for (Algorithm a : s.compare) {
    RunSpec other = spec;
    other.algorithm = a;
    validate_run(other);
  }
  return out;
}

}  // namespace pzo
