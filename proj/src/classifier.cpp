#include "rabikit/classifier.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rabikit/errors.hpp"

namespace rabikit {

namespace {

void validate(const PowerSeries& series) {
  if (series.entries.size() < 2)
    throw ValidationError("power series needs at least 2 entries");
  if (!(series.temperature > 0.0) || !std::isfinite(series.temperature))
    throw ValidationError("power series temperature must be positive");
  for (std::size_t i = 0; i < series.entries.size(); ++i) {
    const PowerEntry& e = series.entries[i];
    if (!(e.power > 0.0) || !std::isfinite(e.power))
      throw ValidationError("entry " + std::to_string(i) +
                            ": power must be positive");
    if (i > 0 && !(e.power > series.entries[i - 1].power))
      throw ValidationError("entry " + std::to_string(i) +
                            ": powers must be strictly increasing");
    if (!(e.omega >= 0.0) || !std::isfinite(e.omega) ||
        !std::isfinite(e.gamma_perp) || !(e.gamma_perp > 0.0))
      throw ValidationError("entry " + std::to_string(i) +
                            ": omega must be >= 0 and gamma_perp > 0");
    if (!(e.omega_sigma > 0.0) || !(e.gamma_perp_sigma > 0.0) ||
        !std::isfinite(e.omega_sigma) || !std::isfinite(e.gamma_perp_sigma))
      throw ValidationError("entry " + std::to_string(i) +
                            ": sigmas must be positive");
  }
}

struct WlsLine {
  double slope = 0.0;
  double intercept = 0.0;
  double var_slope = 0.0;
  double var_intercept = 0.0;
  double cov = 0.0;
  double chi2 = 0.0;
};

// Closed-form weighted least squares, y = intercept + slope * x. The
// covariance takes the per-point sigmas at face value and is NOT rescaled
// by the residual variance: the inputs here are fitted parameters with
// their own calibrated uncertainties, not raw counts.
WlsLine weighted_line(const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<double>& sigma) {
  double sw = 0.0, sx = 0.0, sxx = 0.0, sy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    sx += w * x[i];
    sxx += w * x[i] * x[i];
    sy += w * y[i];
    sxy += w * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 1e-12 * sw * sxx))
    throw ValidationError(
        "weighted line fit: degenerate x range (all abscissae equal)");
  WlsLine line;
  line.slope = (sw * sxy - sx * sy) / det;
  line.intercept = (sxx * sy - sx * sxy) / det;
  line.var_slope = sw / det;
  line.var_intercept = sxx / det;
  line.cov = -sx / det;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - line.intercept - line.slope * x[i]) / sigma[i];
    line.chi2 += r * r;
  }
  return line;
}

FitResult line_result(const std::vector<double>& x, const WlsLine& line,
                      std::size_t n) {
  FitResult res;
  res.param_names = {"slope", "intercept"};
  res.params = Eigen::Vector2d(line.slope, line.intercept);
  res.covariance = Eigen::Matrix2d{{line.var_slope, line.cov},
                                   {line.cov, line.var_intercept}};
  res.residual_norm = line.chi2;
  res.dof = static_cast<int>(n) - 2;
  res.converged = true;
  res.iterations = 1;
  res.band.sigma_level = 2.0;
  res.band.x = x;
  for (double xi : x) {
    const double var = line.var_intercept + 2.0 * xi * line.cov +
                       xi * xi * line.var_slope;
    const double y = line.intercept + line.slope * xi;
    const double half = 2.0 * std::sqrt(std::max(var, 0.0));
    res.band.lo.push_back(y - half);
    res.band.hi.push_back(y + half);
  }
  return res;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

FitResult fit_rabi_vs_power(const PowerSeries& series) {
  validate(series);
  std::vector<double> x, y, s;
  for (const PowerEntry& e : series.entries) {
    x.push_back(std::sqrt(e.power));
    y.push_back(e.omega);
    s.push_back(e.omega_sigma);
  }
  return line_result(x, weighted_line(x, y, s), x.size());
}

RegimeReport classify(const PowerSeries& series, double gamma) {
  validate(series);
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ValidationError("classify: gamma must be positive");

  std::vector<double> x, y, s;
  for (const PowerEntry& e : series.entries) {
    x.push_back(e.omega);
    y.push_back(e.gamma_perp);
    s.push_back(e.gamma_perp_sigma);
  }
  const WlsLine line = weighted_line(x, y, s);

  RegimeReport report;
  report.temperature = series.temperature;
  report.slope_m = line.slope;
  report.slope_m_sigma = std::sqrt(line.var_slope);
  report.offset = line.intercept;
  report.offset_sigma = std::sqrt(line.var_intercept);
  report.offset_consistent_with_gamma_over_2 =
      std::fabs(report.offset - 0.5 * gamma) <= 2.0 * report.offset_sigma;

  const double m = report.slope_m;
  report.regime = m <= 0.5   ? DrivingRegime::fully_coherent_pi_capable
                  : m <= 1.0 ? DrivingRegime::coherent_pi2_only
                  : m <= 2.0 ? DrivingRegime::incoherent_underdamped
                             : DrivingRegime::overdamped;

  const double sm = report.slope_m_sigma;
  if (sm > 0.0) {
    const double c1 = normal_cdf((0.5 - m) / sm);
    const double c2 = normal_cdf((1.0 - m) / sm);
    const double c3 = normal_cdf((2.0 - m) / sm);
    report.class_probabilities = {c1, c2 - c1, c3 - c2, 1.0 - c3};
  } else {
    report.class_probabilities = {};
    report.class_probabilities[static_cast<std::size_t>(report.regime)] = 1.0;
  }

  const FitResult rabi = fit_rabi_vs_power(series);
  report.rabi_slope = rabi.value("slope");
  report.rabi_slope_sigma = rabi.sigma("slope");
  return report;
}

}  // namespace rabikit
