#pragma once

// Right-hand sides of the zeroth-order dynamics (vanilla ES, P-GZO, P-PDZO,
// DP-GZO) and of the model-based flows they emulate on average. Fields are
// autonomous: time enters only through the oscillator state.

#include <string>
#include <utility>

#include "pzo/convex_sets.hpp"
#include "pzo/dither.hpp"
#include "pzo/problems.hpp"

namespace pzo {

struct GainSet {
  double k_x = 1.0;
  double alpha_x = 0.1;
  double k_lambda = 1.0;
  double alpha_lambda = 0.1;
  double eps_xi = 0.05;
  double eps_a = 1e-2;
  double eps_omega = 1e-2;
  double lambda_max = 1e6;  // dual box [0, lambda_max]^m

  /// Throws ValidationError unless every gain is strictly positive.
  void validate() const;
};

enum class Algorithm { vanilla_es, pgzo, ppdzo, dpgzo, target_grad, target_saddle, average_gzo };

std::string to_string(Algorithm a);
/// Throws ValidationError for unknown names.
Algorithm parse_algorithm(const std::string& name);
bool is_zeroth_order(Algorithm a);

struct GzoState {
  Vec x;
  Vec xi;
  DitherBankd bank;
};

struct GzoRate {
  Vec dx;
  Vec dxi;
  Vec dmu;   // oscillator field; advanced exactly by the simulator
  Vec xhat;  // perturbed input at which the oracle was queried
};

struct PdzoState {
  Vec x;
  Vec lambda;
  Vec xi1;
  Vec xi2;
  DitherBankd bank;
};

struct PdzoRate {
  Vec dx;
  Vec dlambda;
  Vec dxi1;
  Vec dxi2;
  Vec dmu;
  Vec xhat;
};

/// Scalar classic ES: -k_x (2/eps_a) f(x + eps_a sin(w t)) sin(w t), w = 2 pi kappa / eps_omega.
double vanilla_es_field(double x, double t, const MeasurementChannel& channel, const GainSet& gains,
                        double kappa = 1.0);

/// Vector classic ES driven by a probe value: -k_x (2/eps_a) f(x + eps_a mu) mu.
Vec vanilla_es_rate(const Vec& x, const Vec& probe, const MeasurementChannel& channel, const GainSet& gains,
                    const Vec& theta, int mode = 0);

/// P-GZO with an explicit probe vector; the typed overload below wraps it.
GzoRate gzo_rate(const Vec& x, const Vec& xi, const Vec& probe, const MeasurementChannel& channel,
                 const FeasibleSetd& set, const GainSet& gains, const Vec& theta, int mode = 0);
GzoRate gzo_field(const GzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                  const GainSet& gains, const Vec& theta, int mode = 0);

PdzoRate pdzo_rate(const Vec& x, const Vec& lambda, const Vec& xi1, const Vec& xi2, const Vec& probe,
                   const MeasurementChannel& channel, const FeasibleSetd& set, const GainSet& gains,
                   const Vec& theta);
PdzoRate pdzo_field(const PdzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                    const GainSet& gains, const Vec& theta);

/// DP-GZO: x' = k_x P_{T_X(x)}(-xi). Throws DomainError when x is off the set.
GzoRate dpzo_rate(const Vec& x, const Vec& xi, const Vec& probe, const MeasurementChannel& channel,
                  const FeasibleSetd& set, const GainSet& gains, const Vec& theta, int mode = 0);
GzoRate dpzo_field(const GzoState& s, const MeasurementChannel& channel, const FeasibleSetd& set,
                   const GainSet& gains, const Vec& theta, int mode = 0);

// Model-based flows (verification only).

/// p' = k_x (P_X(p - alpha_x grad f(p)) - p).
Vec target_gradient_flow(const Vec& p, const GradientOracle& oracle, const FeasibleSetd& set,
                         const GainSet& gains, const Vec& theta, int mode = 0);

/// Projected saddle flow on X x R_+^m. Returns (p1', p2').
std::pair<Vec, Vec> target_saddle_flow(const Vec& p1, const Vec& p2, const GradientOracle& oracle,
                                       const FeasibleSetd& set, const GainSet& gains, const Vec& theta);

/// p' = k_x P_{T_X(p)}(-grad f(p)).
Vec target_tangent_flow(const Vec& p, const GradientOracle& oracle, const FeasibleSetd& set,
                        const GainSet& gains, const Vec& theta, int mode = 0);

/// Average of P-GZO for vanishing amplitude: the filter tracks grad f exactly.
std::pair<Vec, Vec> average_gzo_field(const Vec& x_bar, const Vec& xi_bar, const GradientOracle& oracle,
                                      const FeasibleSetd& set, const GainSet& gains, const Vec& theta,
                                      int mode = 0);

/// Same average for DP-GZO.
std::pair<Vec, Vec> average_dpgzo_field(const Vec& x_bar, const Vec& xi_bar, const GradientOracle& oracle,
                                        const FeasibleSetd& set, const GainSet& gains, const Vec& theta,
                                        int mode = 0);

/// Projection onto the dual box [0, lambda_max]^m.
Vec project_dual(const Vec& lambda, double lambda_max);

}  // namespace pzo
