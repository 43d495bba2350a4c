#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rabikit/correlation.hpp"
#include "rabikit/dynamics.hpp"
#include "rabikit/fit_result.hpp"

namespace rabikit {

// A named parametric curve the least-squares engine can fit. eval fills
// out[i] = f(x[i]; p) for the full parameter vector p (fixed parameters
// included); lower/upper are box bounds enforced by step clamping.
struct FitModel {
  std::string name;
  std::vector<std::string> param_names;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::function<void(std::span<const double> x, const Eigen::VectorXd& p,
                     std::span<double> out)>
      eval;
};

// Registry lookup. Known models: line, gaussian, lorentzian, boltzmann,
// cubic_linewidth, logistic_linewidth, saturation, g2_resonant, g2_diffused.
const FitModel& fit_model(const std::string& name);
std::vector<std::string> fit_model_names();

struct FitProblem {
  std::string model;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> y_sigma;  // empty = unweighted; else per-point, > 0
  Eigen::VectorXd initial_guess;  // full parameter vector, within bounds
  std::map<std::string, double> fixed_params;  // pinned out of the fit
  double band_sigma_level = 2.0;
};

// Damped Gauss-Newton (Levenberg-Marquardt) minimizer of the weighted
// squared residual. Converged when the relative parameter change drops
// below 1e-8 and the relative cost change below 1e-10; gives up after 500
// iterations and returns the best point found with converged = false.
// Covariance is the residual-variance-scaled inverse of the Gauss-Newton
// normal matrix (zero rows/columns for fixed parameters); the confidence
// band is first-order propagation onto the data abscissae. A singular
// normal matrix at the solution raises RankDeficiencyError naming the
// parameter combination that the data cannot distinguish.
FitResult fit(const FitProblem& problem);

// Correlation-curve fit with drive strength and pure dephasing free and
// the decay rate (and diffusion width, when nonzero) held fixed. The raw
// histogram normalization is absorbed by a free scale whose model plateau
// is 1. Initial guesses are taken from the curve's oscillation structure
// unless supplied. The transverse dephasing floor gamma_perp = gamma/2
// corresponds to the gamma_c >= 0 bound; fits pinned there are flagged.
struct G2Fit {
  FitResult fit;
  DampingRegime regime = DampingRegime::oscillatory;
  bool pinned_dephasing_floor = false;
};

G2Fit fit_g2(const CorrelationCurve& curve, double gamma, double sigma = 0.0,
             std::optional<double> omega_guess = std::nullopt,
             std::optional<double> gamma_c_guess = std::nullopt);

// One frequency scan of an emitter line (photoluminescence excitation).
struct PleScan {
  int id = 0;
  std::vector<double> freq_hz;
  std::vector<double> counts;
};

enum class LineShape { lorentzian, gaussian };

// Per-scan linewidths plus the aggregate center statistics. The
// inhomogeneous width is the center-spread FWHM convolved (in quadrature)
// with the mean single-scan width, so that zero spread degrades gracefully
// to the single-scan floor.
struct LinewidthSummary {
  std::vector<double> scan_center;  // Hz, one per bright scan
  std::vector<double> scan_fwhm;    // Hz, one per bright scan
  int dark_scans = 0;               // scans with no detectable peak
  double mean_single_fwhm = 0.0;    // Hz
  double mean_single_fwhm_sigma = 0.0;
  double inhom_fwhm = 0.0;  // Hz
  double inhom_fwhm_sigma = 0.0;
  FitResult center_histogram_fit;  // Gaussian over the center histogram
};

LinewidthSummary histogram_line_fit(const std::vector<PleScan>& scans,
                                    LineShape shape);

}  // namespace rabikit
