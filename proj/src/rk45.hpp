#pragma once

// Dormand-Prince 5(4) embedded pair with PI step control. Internal to the
// library; fixed-size state vectors only.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "rabikit/errors.hpp"

namespace rabikit::detail {

template <std::size_t N>
using StateVec = std::array<double, N>;

template <std::size_t N>
struct Rk45Controls {
  double rtol = 1e-9;
  double atol = 1e-13;
  long max_steps = 50'000'000;
  // Called after every accepted step with (t, y); may throw to abort.
  std::function<void(double, const StateVec<N>&)> on_accept;
};

// Integrates dy/dt = f(t, y) from t0 to t1 (t1 > t0), mutating y in place.
// Stops exactly at t1, so callers chain segments and sample grids by
// repeated calls.
template <std::size_t N, class F>
void rk45_integrate(F&& f, double& t, StateVec<N>& y, double t1,
                    const Rk45Controls<N>& ctl) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5,
                          c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                          a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                          a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // difference between 5th and embedded 4th order weights
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                          e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (!(t1 > t)) return;

  StateVec<N> k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  f(t, y, k1);

  double h = (t1 - t) * 1e-4;
  double err_prev = 1.0;
  long steps = 0;

  while (t < t1) {
    if (++steps > ctl.max_steps)
      throw NumericalError("rk45: step budget exhausted at t = " +
                           std::to_string(t));
    h = std::min(h, t1 - t);
    if (!(h > 0.0) || t + h == t)
      throw NumericalError("rk45: step size collapsed at t = " +
                           std::to_string(t));

    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, ytmp, k2);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, ytmp, k3);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, ytmp, k4);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] =
          y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, ytmp, k5);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                            a64 * k4[i] + a65 * k5[i]);
    f(t + h, ytmp, k6);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                            b5 * k5[i] + b6 * k6[i]);
    f(t + h, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                             e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc =
          ctl.atol + ctl.rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
      err = std::max(err, std::fabs(ei) / sc);
    }

    if (err <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      if (ctl.on_accept) ctl.on_accept(t, y);
      const double fac =
          0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
          std::pow(err_prev, 0.4 / 5.0);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(err, 1e-10);
    } else {
      h *= std::clamp(0.9 * std::pow(err, -1.0 / 5.0), 0.1, 0.9);
    }
  }
}

}  // namespace rabikit::detail
