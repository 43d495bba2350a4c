#pragma once

#include <complex>
#include <span>
#include <vector>

#include "rabikit/emitter.hpp"

namespace rabikit {

enum class PulseShape { ideal_square, exponential_rise };

// Drive envelope Omega(t). The pulse is on over [0, duration). For
// exponential_rise the amplitude approaches the peak as 1 - exp(-t/tau_c)
// with tau_c fixed so the 10-90% rise equals rise_time, and decays with the
// same constant after the pulse ends.
struct PulseEnvelope {
  double duration = 0.0;   // s, > 0
  double rise_time = 0.0;  // s, >= 0, < duration (exponential_rise only)
  PulseShape shape = PulseShape::ideal_square;
  double peak_omega = 0.0;  // rad/s

  double omega_at(double t) const;
};

void validate(const PulseEnvelope& env);

// Excited population and optical coherence of the two-level system.
struct BlochState {
  double rho_ee = 0.0;
  std::complex<double> rho_eg = {0.0, 0.0};
};

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-13;
  double invariant_tol = 1e-6;  // slack on |rho_eg|^2 <= rho_ee(1 - rho_ee)
  long max_steps = 50'000'000;
};

// Integrates the optical Bloch equations in the rotating frame,
//   d rho_ee /dt = -gamma rho_ee - Omega(t) Im(rho_eg)
//   d rho_eg /dt = (i delta - gamma_perp) rho_eg + i Omega(t)/2 (2 rho_ee - 1)
// with the drive amplitude taken from the envelope (params.omega is not
// used here) and detuning/decay rates from params. Returns the state at
// each requested grid time. The integration is segmented at t = 0 and
// t = duration where the envelope is non-smooth. Throws NumericalError on
// step-size collapse (reporting the offending time) and on violation of the
// physicality invariant |rho_eg|^2 <= rho_ee (1 - rho_ee) + tol.
std::vector<BlochState> evolve_pulse(const EmitterParams& params,
                                     const PulseEnvelope& envelope,
                                     std::span<const double> t_grid,
                                     const OdeOptions& opts = {},
                                     const BlochState& initial = {});

}  // namespace rabikit
