#pragma once

#include <cmath>
#include <numbers>

// Unit convention used throughout the library: every rate and frequency is
// stored internally as an angular frequency in rad/s. All file and CLI I/O
// is in ordinary frequency (Hz). The two helpers below are the only place
// where the factor 2*pi appears.

namespace rabikit {

inline constexpr double k_boltzmann = 1.380649e-23;  // J/K, exact SI value

constexpr double to_angular(double hz) {
  return 2.0 * std::numbers::pi * hz;
}

constexpr double to_ordinary(double rad_per_s) {
  return rad_per_s / (2.0 * std::numbers::pi);
}

// Gaussian FWHM <-> standard deviation, same unit on both sides.
inline double fwhm_to_sigma(double fwhm) {
  return fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
}

inline double sigma_to_fwhm(double sigma) {
  return sigma * 2.0 * std::sqrt(2.0 * std::numbers::ln2);
}

}  // namespace rabikit
