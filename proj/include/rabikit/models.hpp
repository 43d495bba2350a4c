#pragma once

#include "rabikit/errors.hpp"
#include "rabikit/fit_result.hpp"

namespace rabikit {

// Thermally activated gap / half-width law  w(T) = A + B exp(-C / kB T).
// C is stored as an energy in joules with kB explicit. B may carry either
// sign: negative B models a gap shrinking toward A + B at high temperature.
struct BoltzmannModel {
  double A = 0.0;  // low-temperature asymptote, unit of the dataset
  double B = 0.0;  // activation amplitude, same unit
  double C = 0.0;  // activation energy, J
};

// Inhomogeneous linewidth growth  w(T) = A + B T^3.
struct CubicLinewidthModel {
  double A = 0.0;  // zero-temperature linewidth, Hz
  double B = 0.0;  // cubic coefficient, Hz/K^3
};

// Generalized logistic for the single-scan linewidth,
//   w(T) = D + (A - D) / [1 + exp(B (ln T - C))]^E.
// Natural logarithm; C is in ln-Kelvin units.
struct LogisticLinewidthModel {
  double A = 0.0;  // lower asymptote, Hz
  double D = 0.0;  // upper asymptote, Hz
  double B = 0.0;  // slope, dimensionless
  double C = 0.0;  // midpoint, ln K
  double E = 0.0;  // asymmetry, dimensionless
};

// Emitter saturation  I(P) = I_inf (P/P_sat) / (1 + P/P_sat).
struct SaturationModel {
  double i_inf = 0.0;   // asymptotic intensity, counts/s
  double p_sat = 0.0;   // saturation power, W
};

void validate(const BoltzmannModel& m);
void validate(const CubicLinewidthModel& m);
void validate(const LogisticLinewidthModel& m);
void validate(const SaturationModel& m);

double eval_boltzmann(const BoltzmannModel& m, double temperature);
double eval_cubic(const CubicLinewidthModel& m, double temperature);
double eval_logistic(const LogisticLinewidthModel& m, double temperature);
double eval_saturation(const SaturationModel& m, double power);

// Lower bound on the spectral diffusion rate from repeated-scan statistics:
// (scan speed / FTL linewidth) x (single-scan / FTL linewidth). The first
// factor is how often the scanning laser crosses the homogeneous line, the
// second how much wider the line already wanders within one scan.
double diffusion_rate(double scan_speed, double ftl_linewidth,
                      double single_scan_linewidth);

// Closed interval of temperatures, [lo, hi] in K; empty when the bands
// never overlap on the evaluated grid.
struct TemperatureInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = true;
};

// Temperatures where the sigma_level confidence bands of two fitted
// Boltzmann curves overlap, evaluated on a 1 K grid over [4, 300] K.
// Parameters are positional (A, B, C) with their covariance taken from the
// fit results; the band at each T comes from first-order propagation
// through the analytic Boltzmann Jacobian. Symmetric in its two arguments.
TemperatureInterval gap_closing_range(const FitResult& fit_down,
                                      const FitResult& fit_up,
                                      double sigma_level = 2.0);

}  // namespace rabikit
