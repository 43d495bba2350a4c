#include "rabikit/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rabikit/units.hpp"

namespace rabikit {

void validate(const BoltzmannModel& m) {
  if (!std::isfinite(m.A) || !std::isfinite(m.B) || !std::isfinite(m.C))
    throw ValidationError("BoltzmannModel: parameters must be finite");
}

void validate(const CubicLinewidthModel& m) {
  if (!(m.A > 0.0) || !std::isfinite(m.A))
    throw ValidationError("CubicLinewidthModel: A must be positive");
  if (!(m.B >= 0.0) || !std::isfinite(m.B))
    throw ValidationError("CubicLinewidthModel: B must be >= 0");
}

void validate(const LogisticLinewidthModel& m) {
  if (!(m.A < m.D))
    throw ValidationError(
        "LogisticLinewidthModel: lower asymptote A must lie below D");
  if (!(m.B > 0.0))
    throw ValidationError("LogisticLinewidthModel: B must be positive");
  if (!(m.E > 0.0))
    throw ValidationError("LogisticLinewidthModel: E must be positive");
}

void validate(const SaturationModel& m) {
  if (!(m.i_inf > 0.0))
    throw ValidationError("SaturationModel: i_inf must be positive");
  if (!(m.p_sat > 0.0))
    throw ValidationError("SaturationModel: p_sat must be positive");
}

double eval_boltzmann(const BoltzmannModel& m, double temperature) {
  validate(m);
  if (!(temperature > 0.0))
    throw ValidationError("eval_boltzmann: temperature must be positive");
  return m.A + m.B * std::exp(-m.C / (k_boltzmann * temperature));
}

double eval_cubic(const CubicLinewidthModel& m, double temperature) {
  validate(m);
  if (!(temperature >= 0.0))
    throw ValidationError("eval_cubic: temperature must be >= 0");
  return m.A + m.B * temperature * temperature * temperature;
}

double eval_logistic(const LogisticLinewidthModel& m, double temperature) {
  validate(m);
  if (!(temperature > 0.0))
    throw ValidationError("eval_logistic: temperature must be positive");
  const double u = std::exp(m.B * (std::log(temperature) - m.C));
  return m.D + (m.A - m.D) / std::pow(1.0 + u, m.E);
}

double eval_saturation(const SaturationModel& m, double power) {
  validate(m);
  if (!(power >= 0.0))
    throw ValidationError("eval_saturation: power must be >= 0");
  const double x = power / m.p_sat;
  return m.i_inf * x / (1.0 + x);
}

double diffusion_rate(double scan_speed, double ftl_linewidth,
                      double single_scan_linewidth) {
  if (!(scan_speed > 0.0) || !(ftl_linewidth > 0.0) ||
      !(single_scan_linewidth > 0.0))
    throw ValidationError("diffusion_rate: all inputs must be positive");
  return (scan_speed / ftl_linewidth) * (single_scan_linewidth / ftl_linewidth);
}

namespace {

// value and sigma_level-sigma half-width of a fitted Boltzmann curve at T,
// by first-order propagation through dw/d(A,B,C)
std::pair<double, double> boltzmann_band(const FitResult& fit, double t,
                                         double sigma_level) {
  const double a = fit.params[0], b = fit.params[1], c = fit.params[2];
  const double e = std::exp(-c / (k_boltzmann * t));
  const Eigen::Vector3d jac(1.0, e, -b * e / (k_boltzmann * t));
  const double var =
      jac.dot(fit.covariance.topLeftCorner<3, 3>() * jac);
  return {a + b * e, sigma_level * std::sqrt(std::max(0.0, var))};
}

}  // namespace

TemperatureInterval gap_closing_range(const FitResult& fit_down,
                                      const FitResult& fit_up,
                                      double sigma_level) {
  if (fit_down.params.size() < 3 || fit_up.params.size() < 3 ||
      fit_down.covariance.rows() < 3 || fit_up.covariance.rows() < 3)
    throw ValidationError(
        "gap_closing_range: fits must carry Boltzmann parameters (A, B, C) "
        "with covariance");
  if (!(sigma_level > 0.0))
    throw ValidationError("gap_closing_range: sigma_level must be positive");

  TemperatureInterval out;
  out.lo = std::numeric_limits<double>::quiet_NaN();
  out.hi = std::numeric_limits<double>::quiet_NaN();
  for (int t = 4; t <= 300; ++t) {
    const auto [wd, sd] = boltzmann_band(fit_down, t, sigma_level);
    const auto [wu, su] = boltzmann_band(fit_up, t, sigma_level);
    const bool overlap = std::max(wd - sd, wu - su) <= std::min(wd + sd, wu + su);
    if (!overlap) continue;
    if (out.empty) {
      out.lo = t;
      out.empty = false;
    }
    out.hi = t;
  }
  return out;
}

}  // namespace rabikit
