#pragma once

// Scenario files: sectioned key = value text, loaded into a typed Scenario,
// cross-validated, and turned into a runnable RunSpec.

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pzo/sim.hpp"
#include "pzo/verify.hpp"

namespace pzo {

struct ProblemBlock {
  std::string name = "tracking";  // tracking|desk_kkt|switching_quadratic|regional|quadratic|logquad
  Eigen::Index dim = 2;           // logquad only
  Vec x_star;                     // switching/regional minimizer; optional override elsewhere
  double convex_radius = 1.6;
  double blend_width = 0.6;
  Mat Q;  // quadratic: f = 1/2 x^T Q x + c^T x + k
  Vec c;
  double k = 0.0;
  Mat G;  // quadratic: g = G x - h
  Vec h;
};

struct ExosystemBlock {
  std::string kind = "static";  // static|drifting|rotation
  double eps = 0.0;
  double bound = 10.0;
  Vec theta0;
};

struct SetBlock {
  std::string kind = "whole";  // box|ball|polytope|orthant|whole
  Vec lower, upper;
  Vec center;
  double radius = 0.0;
  Mat A;
  Vec b;
  bool shrink = false;
};

struct AlgorithmBlock {
  Algorithm name = Algorithm::pgzo;
  GainSet gains;
  Vec x0, xi0, lambda0, xi2_0;
};

struct DitherBlock {
  std::vector<Rational> kappa;  // empty: first n primes
  Vec mu0;                      // empty: sine phase
  double eps_omega_ratio = 0.0; // > 0: eps_omega = ratio * eps_a
};

struct SimBlock {
  SimConfig config;
  bool auto_h = false;  // pick the largest step the step rule allows
};

struct SwitchingBlock {
  bool enabled = false;
  AutomatonConfig config;
  double flow_rate = -1.0;
};

struct OutputBlock {
  std::string dir;  // empty: command-line or environment default
  std::string name = "run";
  bool plots = true;
};

struct Scenario {
  ProblemBlock problem;
  ExosystemBlock exosystem;
  SetBlock set;
  AlgorithmBlock algorithm;
  DitherBlock dither;
  SimBlock sim;
  NoiseSpec noise;
  bool noise_seed_set = false;
  SwitchingBlock switching;
  OutputBlock output;
  std::vector<Algorithm> compare;
};

bool operator==(const Scenario& a, const Scenario& b);

/// Parses and type-checks a scenario. Throws ValidationError (bad content) or
/// IoError (unreadable file).
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(std::istream& in);
/// Writes the scenario in the same format, with exact round-trip precision.
void save_scenario(std::ostream& out, const Scenario& s);

/// The sweepable parameters.
const std::vector<std::string>& sweep_parameters();
/// Sets one sweep parameter. Throws ValidationError for unknown names.
void apply_parameter(Scenario& s, const std::string& name, double value);

/// A scenario made concrete: owns the problems the spec points to.
struct BuiltScenario {
  std::unique_ptr<Problem> problem;
  std::unique_ptr<Problem> verify_problem;  // same problem, separate counters
  RunSpec spec;
  ReportContext context;
  std::vector<std::string> warnings;
};

FeasibleSetd build_set(const SetBlock& block);
Problem build_problem(const ProblemBlock& block);
Exosystem build_exosystem(const ExosystemBlock& block);
/// Largest step allowed by the step rule for this scenario.
double auto_step(const Scenario& s);

/// Builds and fully validates a run (dimensions, frequencies, initial flow set).
BuiltScenario build_scenario(const Scenario& s);

}  // namespace pzo
