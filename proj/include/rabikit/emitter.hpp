#pragma once

#include <cmath>

#include "rabikit/errors.hpp"

namespace rabikit {

// Physical state of the driven two-level emitter. All fields are angular
// frequencies in rad/s.
struct EmitterParams {
  double gamma = 0.0;    // fluorescence decay rate
  double gamma_c = 0.0;  // pure dephasing rate
  double omega = 0.0;    // Rabi frequency
  double delta = 0.0;    // detuning from resonance
};

// Transverse dephasing rate, gamma/2 + gamma_c. Minimum gamma/2 at zero
// pure dephasing.
inline double gamma_perp(const EmitterParams& p) {
  return 0.5 * p.gamma + p.gamma_c;
}

// Generalized Rabi frequency sqrt(omega^2 + delta^2) for detuned driving.
inline double effective_rabi(const EmitterParams& p) {
  return std::hypot(p.omega, p.delta);
}

inline void validate(const EmitterParams& p) {
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma))
    throw ValidationError("EmitterParams: gamma must be positive and finite");
  if (!(p.gamma_c >= 0.0) || !std::isfinite(p.gamma_c))
    throw ValidationError("EmitterParams: gamma_c must be >= 0 and finite");
  if (!(p.omega >= 0.0) || !std::isfinite(p.omega))
    throw ValidationError("EmitterParams: omega must be >= 0 and finite");
  if (!std::isfinite(p.delta))
    throw ValidationError("EmitterParams: delta must be finite");
}

// Quasi-static Gaussian law for the spectrally diffusing detuning.
// sigma = 0 denotes the resonant, diffusion-free case.
struct DetuningDistribution {
  double sigma = 0.0;  // rad/s, standard deviation
  double mean = 0.0;   // rad/s, center offset
};

inline void validate(const DetuningDistribution& d) {
  if (!(d.sigma >= 0.0) || !std::isfinite(d.sigma))
    throw ValidationError(
        "DetuningDistribution: sigma must be >= 0 and finite");
  if (!std::isfinite(d.mean))
    throw ValidationError("DetuningDistribution: mean must be finite");
}

}  // namespace rabikit
