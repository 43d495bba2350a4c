#include "rabikit/dynamics.hpp"

#include <cmath>

namespace rabikit {

LambdaPair lambda_pair(const EmitterParams& params) {
  validate(params);
  const double gperp = gamma_perp(params);
  const double s = 0.5 * (params.gamma + gperp);
  const double d = 0.5 * (params.gamma - gperp);
  const double om = effective_rabi(params);
  const double disc = om * om - d * d;

  LambdaPair out;
  if (disc > 0.0) {
    out.q = {0.0, std::sqrt(disc)};
    out.regime = DampingRegime::oscillatory;
  } else if (disc < 0.0) {
    out.q = {std::sqrt(-disc), 0.0};
    out.regime = DampingRegime::overdamped;
  } else {
    out.q = {0.0, 0.0};
    out.regime = DampingRegime::critically_damped;
  }
  out.lambda_plus = -s + out.q;
  out.lambda_minus = -s - out.q;
  return out;
}

namespace detail {

double g2_core(double s, double q2, double tau) {
  const double t = std::fabs(tau);
  const double st = s * t;
  // z^2 = q2 * t^2 is the signed square of the argument of sinh/cosh:
  // positive -> oscillatory (trig branch), negative -> overdamped
  // (hyperbolic branch). The series kicks in where either branch would
  // divide small by small.
  const double z2 = q2 * t * t;
  double ch, shc;  // cosh(z), sinh(z)/z with z = sqrt(-z2) hyperbolic side
  if (std::fabs(z2) < 1e-8) {
    // cosh(z) = 1 + z^2/2 + z^4/24, sinhc(z) = 1 + z^2/6 + z^4/120 with
    // z^2 = -z2; truncation below 1e-25 at this threshold
    ch = 1.0 - z2 / 2.0 + z2 * z2 / 24.0;
    shc = 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
  } else if (z2 > 0.0) {
    const double w = std::sqrt(z2);
    ch = std::cos(w);
    shc = std::sin(w) / w;
  } else {
    const double u = std::sqrt(-z2);
    ch = std::cosh(u);
    shc = std::sinh(u) / u;
  }
  return 1.0 - std::exp(-st) * (st * shc + ch);
}

}  // namespace detail

static double g2_eval(const EmitterParams& params, double omega_eff,
                      double tau, bool* degenerate_limit) {
  const double gperp = gamma_perp(params);
  const double s = 0.5 * (params.gamma + gperp);
  const double d = 0.5 * (params.gamma - gperp);
  const double q2 = omega_eff * omega_eff - d * d;
  if (degenerate_limit != nullptr)
    *degenerate_limit = std::sqrt(std::fabs(q2)) < 1e-9 * 2.0 * s;
  return detail::g2_core(s, q2, tau);
}

double g2_resonant(const EmitterParams& params, double tau,
                   bool* degenerate_limit) {
  validate(params);
  if (params.delta != 0.0)
    throw ValidationError("g2_resonant requires delta = 0; use g2_detuned");
  return g2_eval(params, params.omega, tau, degenerate_limit);
}

double g2_detuned(const EmitterParams& params, double tau,
                  bool* degenerate_limit) {
  validate(params);
  return g2_eval(params, effective_rabi(params), tau, degenerate_limit);
}

double emission_rate(const EmitterParams& params) {
  validate(params);
  if (params.omega == 0.0) return 0.0;
  const double gperp = gamma_perp(params);
  const double pump = params.omega * params.omega * gperp / params.gamma;
  return 0.5 * pump / (params.delta * params.delta + gperp * gperp + pump);
}

}  // namespace rabikit
