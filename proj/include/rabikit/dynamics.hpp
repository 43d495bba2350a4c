#pragma once

#include <complex>

#include "rabikit/emitter.hpp"

namespace rabikit {

enum class DampingRegime { oscillatory, critically_damped, overdamped };

// Exponents of the two-sided correlation decay,
//   lambda_pm = -(gamma + gamma_perp)/2 +- q,
//   q = i*sqrt(omega_eff^2 - ((gamma - gamma_perp)/2)^2),
// with omega_eff = sqrt(omega^2 + delta^2). q is normalized to the branch
// with Re(q) >= 0 and Im(q) >= 0, so lambda_plus always carries the slower
// decay. Oscillatory when omega_eff^2 exceeds the squared half-difference
// of the rates, overdamped below it, critically damped at equality.
struct LambdaPair {
  std::complex<double> lambda_plus;
  std::complex<double> lambda_minus;
  std::complex<double> q;
  DampingRegime regime = DampingRegime::oscillatory;
};

LambdaPair lambda_pair(const EmitterParams& params);

// Resonant second-order correlation
//   g2(tau) = 1 + (lambda_-/2q) e^{|tau| lambda_+} - (lambda_+/2q) e^{|tau| lambda_-}
// evaluated through the equivalent cancellation-free real form
//   g2(tau) = 1 - e^{-s|tau|} (s|tau| sinhc(q|tau|) + cosh(q|tau|)),
// s = (gamma + gamma_perp)/2, which carries the critically damped q -> 0
// limit 1 - (1 + s|tau|) e^{-s|tau|} without a branch switch. Requires
// delta = 0. If degenerate_limit is non-null it is set when
// |q| < 1e-9 (gamma + gamma_perp), i.e. when the returned value coincides
// with the limiting form to machine precision.
double g2_resonant(const EmitterParams& params, double tau,
                   bool* degenerate_limit = nullptr);

// Detuned correlation: the resonant law with omega replaced by the
// generalized Rabi frequency sqrt(omega^2 + delta^2).
double g2_detuned(const EmitterParams& params, double tau,
                  bool* degenerate_limit = nullptr);

// Steady-state excited population
//   C(delta) = (1/2) (omega^2 gperp/gamma) / (delta^2 + gperp^2 + omega^2 gperp/gamma)
// with the proportionality constant fixed to 1; in [0, 1/2), monotone
// decreasing in |delta|, saturating to 1/2 on resonance.
double emission_rate(const EmitterParams& params);

namespace detail {
// Core evaluator shared by the resonant/detuned entry points: s is the mean
// rate (gamma+gperp)/2, q2 the signed discriminant omega_eff^2 - ((gamma -
// gperp)/2)^2 (note q^2 = -q2 in the complex convention above).
double g2_core(double s, double q2, double tau);
}  // namespace detail

}  // namespace rabikit
