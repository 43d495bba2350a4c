#include "rabikit/bloch.hpp"

#include <algorithm>
#include <cmath>

#include "rk45.hpp"

namespace rabikit {

static double rise_constant(const PulseEnvelope& env) {
  // 10-90% rise of 1 - exp(-t/tau_c) spans tau_c * ln 9
  return env.rise_time / std::log(9.0);
}

double PulseEnvelope::omega_at(double t) const {
  if (shape == PulseShape::ideal_square)
    return (t >= 0.0 && t < duration) ? peak_omega : 0.0;
  if (t < 0.0) return 0.0;
  const double tc = rise_constant(*this);
  if (tc <= 0.0)
    return (t < duration) ? peak_omega : 0.0;
  if (t < duration) return peak_omega * (1.0 - std::exp(-t / tc));
  const double at_end = peak_omega * (1.0 - std::exp(-duration / tc));
  return at_end * std::exp(-(t - duration) / tc);
}

void validate(const PulseEnvelope& env) {
  if (!(env.duration > 0.0))
    throw ValidationError("PulseEnvelope: duration must be positive");
  if (!(env.rise_time >= 0.0))
    throw ValidationError("PulseEnvelope: rise_time must be >= 0");
  if (env.rise_time >= env.duration)
    throw ValidationError("PulseEnvelope: rise_time must be < duration");
  if (!(env.peak_omega >= 0.0))
    throw ValidationError("PulseEnvelope: peak_omega must be >= 0");
}

std::vector<BlochState> evolve_pulse(const EmitterParams& params,
                                     const PulseEnvelope& envelope,
                                     std::span<const double> t_grid,
                                     const OdeOptions& opts,
                                     const BlochState& initial) {
  validate(params);
  validate(envelope);
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw ValidationError("evolve_pulse: t_grid must be increasing");
  if (!t_grid.empty() && t_grid.front() < 0.0)
    throw ValidationError("evolve_pulse: t_grid must start at t >= 0");

  const double gperp = gamma_perp(params);
  const double gamma = params.gamma;
  const double delta = params.delta;

  auto deriv = [&](double t, const detail::StateVec<3>& y,
                   detail::StateVec<3>& dy) {
    const double om = envelope.omega_at(t);
    const double ee = y[0], re = y[1], im = y[2];
    dy[0] = -gamma * ee - om * im;
    dy[1] = -gperp * re - delta * im;
    dy[2] = delta * re - gperp * im + 0.5 * om * (2.0 * ee - 1.0);
  };

  detail::Rk45Controls<3> ctl;
  ctl.rtol = opts.rtol;
  ctl.atol = opts.atol;
  ctl.max_steps = opts.max_steps;
  ctl.on_accept = [&](double t, const detail::StateVec<3>& y) {
    const double ee = y[0];
    const double coh2 = y[1] * y[1] + y[2] * y[2];
    if (ee < -opts.invariant_tol || ee > 1.0 + opts.invariant_tol ||
        coh2 > ee * (1.0 - ee) + opts.invariant_tol)
      throw NumericalError(
          "evolve_pulse: Bloch physicality invariant violated at t = " +
          std::to_string(t));
  };

  detail::StateVec<3> y = {initial.rho_ee, initial.rho_eg.real(),
                           initial.rho_eg.imag()};
  double t = 0.0;

  std::vector<BlochState> out;
  out.reserve(t_grid.size());
  for (double tg : t_grid) {
    // stop at the envelope kink so the error estimator never straddles it
    if (t < envelope.duration && tg > envelope.duration) {
      detail::rk45_integrate<3>(deriv, t, y, envelope.duration, ctl);
      t = envelope.duration;
    }
    detail::rk45_integrate<3>(deriv, t, y, tg, ctl);
    t = tg;
    out.push_back(BlochState{y[0], {y[1], y[2]}});
  }
  return out;
}

}  // namespace rabikit
