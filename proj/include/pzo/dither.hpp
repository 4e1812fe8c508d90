#pragma once

// Sinusoidal dither oscillators: n planar rotations with rational frequency
// ratios kappa_i, time scale eps_omega and probing amplitude eps_a. The
// oscillator state is advanced by exact rotation, never by numerical
// integration, so every 2-block stays on the unit circle.

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pzo/errors.hpp"
#include "pzo/rational.hpp"

namespace pzo {

struct FrequencyReport {
  bool ok = true;
  /// Index pairs (i, j) violating kappa_i != kappa_j or kappa_i != 2 kappa_j.
  std::vector<std::pair<std::size_t, std::size_t>> violations;
  std::string message;
};

/// Exact rational check of the dither frequency separation conditions.
inline FrequencyReport validate_frequencies(const std::vector<Rational>& kappa) {
  FrequencyReport report;
  std::ostringstream msg;
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    if (kappa[i].num() <= 0) {
      report.ok = false;
      msg << "kappa_" << i + 1 << " = " << kappa[i] << " is not positive; ";
    }
  }
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    for (std::size_t j = 0; j < kappa.size(); ++j) {
      if (i == j) continue;
      if (i < j && kappa[i] == kappa[j]) {
        report.ok = false;
        report.violations.emplace_back(i, j);
        msg << "kappa_" << i + 1 << " = kappa_" << j + 1 << " = " << kappa[i] << "; ";
      } else if (kappa[i] == 2 * kappa[j]) {
        report.ok = false;
        report.violations.emplace_back(i, j);
        msg << "kappa_" << i + 1 << " = " << kappa[i] << " = 2 * kappa_" << j + 1 << "; ";
      }
    }
  }
  if (!report.ok)
    report.message = "dither frequencies violate the separation assumption (kappa_i != kappa_j, kappa_i != 2 kappa_j): " +
                     msg.str();
  return report;
}

/// First n primes; they never satisfy p = q or p = 2 q pairwise.
inline std::vector<Rational> default_kappa(std::size_t n) {
  std::vector<Rational> out;
  for (std::int64_t candidate = 2; out.size() < n; ++candidate) {
    bool prime = true;
    for (std::int64_t d = 2; d * d <= candidate; ++d)
      if (candidate % d == 0) {
        prime = false;
        break;
      }
    if (prime) out.emplace_back(candidate);
  }
  return out;
}

template <typename Scalar>
class DitherBank {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Initial phase for which the probe reads sin(2 pi kappa_i t / eps_omega).
  static Vector sine_phase(Eigen::Index n) {
    Vector mu = Vector::Zero(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) mu(2 * i + 1) = Scalar(-1);
    return mu;
  }

  DitherBank(std::vector<Rational> kappa, Scalar eps_omega, Scalar eps_a)
      : DitherBank(kappa, eps_omega, eps_a, sine_phase(static_cast<Eigen::Index>(kappa.size()))) {}

  DitherBank(std::vector<Rational> kappa, Scalar eps_omega, Scalar eps_a, Vector mu0)
      : kappa_(std::move(kappa)), eps_omega_(eps_omega), eps_a_(eps_a), mu0_(std::move(mu0)) {
    const auto n = static_cast<Eigen::Index>(kappa_.size());
    if (n == 0) throw ValidationError("dither: at least one channel required");
    if (!(eps_omega_ > 0)) throw ValidationError("dither: eps_omega must be positive");
    if (!(eps_a_ > 0)) throw ValidationError("dither: eps_a must be positive");
    if (auto report = validate_frequencies(kappa_); !report.ok) throw ValidationError(report.message);
    if (mu0_.size() != 2 * n) throw ValidationError("dither: initial state must have 2n entries");
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar r2 = mu0_(2 * i) * mu0_(2 * i) + mu0_(2 * i + 1) * mu0_(2 * i + 1);
      if (std::abs(r2 - Scalar(1)) > Scalar(1e-9))
        throw ValidationError("dither: initial state of channel " + std::to_string(i + 1) +
                              " is not on the unit circle");
    }
    cycles_ = Vector::Zero(n);
    mu_ = mu0_;
  }

  Eigen::Index channels() const { return static_cast<Eigen::Index>(kappa_.size()); }
  const std::vector<Rational>& kappa() const { return kappa_; }
  Scalar eps_omega() const { return eps_omega_; }
  Scalar eps_a() const { return eps_a_; }
  const Vector& state() const { return mu_; }
  const Vector& initial_state() const { return mu0_; }

  /// Angular frequency 2 pi kappa_i / eps_omega of channel i.
  Scalar omega(Eigen::Index i) const {
    return Scalar(2) * std::numbers::pi_v<Scalar> * static_cast<Scalar>(kappa_[static_cast<std::size_t>(i)].value()) /
           eps_omega_;
  }

  Scalar max_kappa() const {
    Scalar out = 0;
    for (const auto& k : kappa_) out = std::max(out, static_cast<Scalar>(k.value()));
    return out;
  }

  /// Rotates every 2-block by 2 pi kappa_i dt / eps_omega.
  DitherBank advance(Scalar dt) const {
    DitherBank next = *this;
    for (Eigen::Index i = 0; i < channels(); ++i) {
      const Scalar turns = static_cast<Scalar>(kappa_[static_cast<std::size_t>(i)].value()) * dt / eps_omega_;
      Scalar c = cycles_(i) + (turns - std::floor(turns));
      c -= std::floor(c);
      next.cycles_(i) = c;
      const Scalar angle = Scalar(2) * std::numbers::pi_v<Scalar> * c;
      const Scalar cs = std::cos(angle), sn = std::sin(angle);
      const Scalar a = mu0_(2 * i), b = mu0_(2 * i + 1);
      next.mu_(2 * i) = cs * a - sn * b;
      next.mu_(2 * i + 1) = sn * a + cs * b;
    }
    return next;
  }

  /// Probe of the state advanced by dt, without building a new bank.
  Vector probe_after(Scalar dt) const {
    Vector out(channels());
    for (Eigen::Index i = 0; i < channels(); ++i) {
      const Scalar turns = static_cast<Scalar>(kappa_[static_cast<std::size_t>(i)].value()) * dt / eps_omega_;
      Scalar c = cycles_(i) + (turns - std::floor(turns));
      c -= std::floor(c);
      const Scalar angle = Scalar(2) * std::numbers::pi_v<Scalar> * c;
      out(i) = std::cos(angle) * mu0_(2 * i) - std::sin(angle) * mu0_(2 * i + 1);
    }
    return out;
  }

  /// Odd entries of the oscillator state: the probing vector.
  Vector probe() const {
    Vector out(channels());
    for (Eigen::Index i = 0; i < channels(); ++i) out(i) = mu_(2 * i);
    return out;
  }

  /// Lambda_kappa mu / eps_omega, the oscillator vector field.
  Vector rate() const {
    Vector out(mu_.size());
    for (Eigen::Index i = 0; i < channels(); ++i) {
      const Scalar w = omega(i);
      out(2 * i) = -w * mu_(2 * i + 1);
      out(2 * i + 1) = w * mu_(2 * i);
    }
    return out;
  }

  /// Least T > 0 with T kappa_i / eps_omega integer for every channel.
  Scalar common_period() const {
    std::int64_t den_lcm = 1;
    std::int64_t num_gcd = 0;
    for (const auto& k : kappa_) {
      den_lcm = std::lcm(den_lcm, k.den());
      num_gcd = std::gcd(num_gcd, k.num());
    }
    return eps_omega_ * static_cast<Scalar>(den_lcm) / static_cast<Scalar>(num_gcd);
  }

  /// Largest deviation of mu_i^2 + mu_{i+1}^2 from one.
  Scalar unit_circle_drift() const {
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < channels(); ++i) {
      const Scalar r2 = mu_(2 * i) * mu_(2 * i) + mu_(2 * i + 1) * mu_(2 * i + 1);
      worst = std::max(worst, std::abs(r2 - Scalar(1)));
    }
    return worst;
  }

 private:
  std::vector<Rational> kappa_;
  Scalar eps_omega_;
  Scalar eps_a_;
  Vector mu0_;
  Vector cycles_;  // fractional revolutions since mu0, in [0, 1)
  Vector mu_;
};

using DitherBankd = DitherBank<double>;

}  // namespace pzo
