#pragma once

#include <array>
#include <vector>

#include "rabikit/fit_result.hpp"

namespace rabikit {

// One drive power's fitted oscillation parameters at a fixed temperature.
struct PowerEntry {
  double power = 0.0;        // W
  double omega = 0.0;        // rad/s
  double omega_sigma = 0.0;  // 1-sigma uncertainty, rad/s
  double gamma_perp = 0.0;   // rad/s
  double gamma_perp_sigma = 0.0;
};

struct PowerSeries {
  double temperature = 0.0;  // K
  std::vector<PowerEntry> entries;  // powers strictly increasing, >= 2
};

// How far coherent optical control can be pushed, judged by the slope m of
// the transverse dephasing rate against the Rabi frequency: a pi rotation
// stays coherent for m <= 0.5, a pi/2 rotation for m <= 1, the dynamics
// remain underdamped (oscillatory) up to m = 2, and beyond that the drive
// overdamps its own oscillation (critical damping sits at gamma_perp =
// 2 omega when gamma_perp dominates gamma).
enum class DrivingRegime {
  fully_coherent_pi_capable,
  coherent_pi2_only,
  incoherent_underdamped,
  overdamped,
};

struct RegimeReport {
  double temperature = 0.0;
  double slope_m = 0.0;  // d(gamma_perp)/d(omega), dimensionless
  double slope_m_sigma = 0.0;
  double offset = 0.0;  // gamma_perp at omega = 0, rad/s
  double offset_sigma = 0.0;
  // true iff |offset - gamma/2| <= 2 offset_sigma, i.e. the zero-drive
  // dephasing is consistent with the lifetime floor gamma_perp = gamma/2
  bool offset_consistent_with_gamma_over_2 = false;
  DrivingRegime regime = DrivingRegime::fully_coherent_pi_capable;
  double rabi_slope = 0.0;  // d(omega)/d(sqrt P), rad/s per sqrt(W)
  double rabi_slope_sigma = 0.0;
  // Probability mass per regime under a Gaussian slope posterior
  // N(slope_m, slope_m_sigma), indexed in enum order. The regime field
  // itself is decided by the central value against {0.5, 1, 2}.
  std::array<double, 4> class_probabilities{};
};

// Weighted straight-line fit of omega against sqrt(power); per-point
// sigmas are taken at face value (no residual rescaling), x uncertainties
// are not propagated. Parameters are named slope and intercept.
FitResult fit_rabi_vs_power(const PowerSeries& series);

// Weighted straight-line fit gamma_perp = offset + m * omega, thresholded
// into a DrivingRegime at the central slope. gamma is the population decay
// rate used for the offset-consistency flag.
RegimeReport classify(const PowerSeries& series, double gamma);

}  // namespace rabikit
