#include "rabikit/montecarlo.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rabikit/dynamics.hpp"
#include "rabikit/errors.hpp"

namespace rabikit {

namespace {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Cplx = std::complex<double>;

// No-emission generator over (rho_gg, rho_ee, Re rho_eg, Im rho_eg). It is
// the rotating-frame master equation with the gamma*rho_ee recycling of the
// ground state removed: emission is the detected channel, while dephasing
// stays inside gamma_perp as a continuous, undetected one. The trace of the
// propagated state is the probability that no photon has been emitted yet.
Mat4 no_emission_generator(double gamma, double gperp, double omega,
                           double delta) {
  Mat4 m;
  m << 0.0, 0.0, 0.0, omega,
      0.0, -gamma, 0.0, -omega,
      0.0, 0.0, -gperp, -delta,
      -0.5 * omega, 0.5 * omega, delta, -gperp;
  return m;
}

// Eigen-expansion of the generator: exact propagation and waiting-time
// inversion both reduce to sums of four complex exponentials.
struct Propagator {
  Eigen::Matrix4cd V;
  Eigen::Matrix4cd Vinv;
  Eigen::Vector4cd lam;
};

Propagator make_propagator(double gamma, double gamma_c, double omega,
                           double delta) {
  const double scale =
      gamma + gamma_c + omega + std::fabs(delta) + 1.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    // a defective generator (exact critical damping) has no eigenbasis;
    // nudge the dephasing by a physically invisible amount and retry
    const double bump =
        attempt == 0 ? 0.0 : scale * std::pow(10.0, attempt - 10);
    const double gperp = 0.5 * gamma + gamma_c + bump;
    const Mat4 m = no_emission_generator(gamma, gperp, omega, delta);
    Eigen::EigenSolver<Mat4> es(m);
    if (es.info() != Eigen::Success) continue;
    Propagator p;
    p.V = es.eigenvectors();
    p.lam = es.eigenvalues();
    Eigen::FullPivLU<Eigen::Matrix4cd> lu(p.V);
    if (!lu.isInvertible()) continue;
    p.Vinv = lu.inverse();
    const double resid = (p.V * p.lam.asDiagonal() * p.Vinv -
                          m.cast<Cplx>())
                             .cwiseAbs()
                             .maxCoeff();
    if (resid > 3e-10 * scale) continue;
    return p;
  }
  throw NumericalError(
      "simulate_stream: no-emission generator is not diagonalizable");
}

// Expansion of one start state: survival S(t) = sum_k sc_k e^{lam_k t}
// (trace of the propagated state) and the full state for hand-off at
// segment boundaries.
struct Expansion {
  const Propagator* prop = nullptr;
  Eigen::Vector4cd c;                // Vinv * y
  std::array<Cplx, 4> sc{};          // trace-row coefficients

  double survival(double t, double* deriv = nullptr) const {
    Cplx s{};
    Cplx d{};
    for (int k = 0; k < 4; ++k) {
      const Cplx e = sc[k] * std::exp(prop->lam[k] * t);
      s += e;
      if (deriv) d += prop->lam[k] * e;
    }
    if (deriv) *deriv = d.real();
    return s.real();
  }

  Vec4 state(double t) const {
    Eigen::Vector4cd z;
    for (int k = 0; k < 4; ++k) z[k] = c[k] * std::exp(prop->lam[k] * t);
    return (prop->V * z).real();
  }
};

Expansion expand(const Propagator& prop, const Vec4& y) {
  Expansion ex;
  ex.prop = &prop;
  ex.c = prop.Vinv * y.cast<Cplx>();
  for (int k = 0; k < 4; ++k)
    ex.sc[k] = (prop.V(0, k) + prop.V(1, k)) * ex.c[k];
  return ex;
}

// Survival is monotone non-increasing (its derivative is -gamma rho_ee of
// a positive conditional state), so the waiting time S(t) = u has a unique
// root, bracketed and polished by a bisection-safeguarded Newton.
std::optional<double> survival_crossing(const Expansion& ex, double u,
                                        double t_max, Vec4* y_end) {
  if (!(t_max > 0.0)) {
    if (y_end) *y_end = ex.state(std::max(t_max, 0.0));
    return std::nullopt;
  }
  if (ex.survival(t_max) > u) {
    if (y_end) *y_end = ex.state(t_max);
    return std::nullopt;
  }
  double lo = 0.0;
  double hi = t_max;
  double t = 0.5 * t_max;
  for (int it = 0; it < 200; ++it) {
    double ds = 0.0;
    const double s = ex.survival(t, &ds);
    if (s > u)
      lo = t;
    else
      hi = t;
    if (hi - lo <= 1e-12 * hi) break;
    const double tn = ds < 0.0 ? t - (s - u) / ds : -1.0;
    t = (tn > lo && tn < hi) ? tn : 0.5 * (lo + hi);
  }
  return 0.5 * (lo + hi);
}

Vec4 ground_state() { return Vec4(1.0, 0.0, 0.0, 0.0); }

double draw_open_unit(std::mt19937_64& rng,
                      std::uniform_real_distribution<double>& unif) {
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);  // keep the target strictly inside (0,1)
  return u;
}

}  // namespace

namespace detail {

std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 of master + index*golden: independent streams per index
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

void validate(const DiffusionProcess& proc) {
  if (!(proc.sigma >= 0.0) || !std::isfinite(proc.sigma))
    throw ValidationError("DiffusionProcess: sigma must be >= 0 and finite");
  if (!(proc.jump_rate >= 0.0) || !std::isfinite(proc.jump_rate))
    throw ValidationError(
        "DiffusionProcess: jump_rate must be >= 0 and finite");
}

void validate(const PhotonStream& stream) {
  if (!(stream.total_duration > 0.0) ||
      !std::isfinite(stream.total_duration))
    throw ValidationError(
        "PhotonStream: total_duration must be positive and finite");
  double prev = -1.0;
  for (std::size_t i = 0; i < stream.arrival_times.size(); ++i) {
    const double t = stream.arrival_times[i];
    if (!std::isfinite(t) || t < 0.0 || t > stream.total_duration)
      throw ValidationError(
          "PhotonStream: arrival time outside [0, total_duration] at index " +
          std::to_string(i));
    if (!(t > prev))
      throw ValidationError(
          "PhotonStream: arrival_times must be strictly increasing at "
          "index " +
          std::to_string(i));
    prev = t;
  }
}

PhotonStream simulate_stream(const EmitterParams& params,
                             const DiffusionProcess& proc, double duration,
                             double detection_efficiency,
                             double background_rate) {
  validate(params);
  validate(proc);
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw ValidationError(
        "simulate_stream: duration must be positive and finite");
  if (!(detection_efficiency > 0.0) || !(detection_efficiency <= 1.0))
    throw ValidationError(
        "simulate_stream: detection_efficiency must be in (0, 1]");
  if (!(background_rate >= 0.0) || !std::isfinite(background_rate))
    throw ValidationError(
        "simulate_stream: background_rate must be >= 0 and finite");

  std::vector<double> times;
  if (params.omega > 0.0) {
    const bool jumps = proc.kind == DiffusionKind::jump_process &&
                       proc.jump_rate > 0.0 && proc.sigma > 0.0;
    std::mt19937_64 rng_wait(detail::sub_seed(proc.seed, 0));
    std::mt19937_64 rng_env(detail::sub_seed(proc.seed, 1));
    std::mt19937_64 rng_det(detail::sub_seed(proc.seed, 2));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::exponential_distribution<double> gap(jumps ? proc.jump_rate : 1.0);

    double offset = proc.sigma > 0.0 ? proc.sigma * gauss(rng_env) : 0.0;
    Propagator prop = make_propagator(params.gamma, params.gamma_c,
                                      params.omega, params.delta + offset);
    double seg_end = jumps ? std::min(duration, gap(rng_env)) : duration;

    Vec4 y = ground_state();
    double t_cur = 0.0;
    double u = draw_open_unit(rng_wait, unif);
    while (true) {
      const Expansion ex = expand(prop, y);
      Vec4 y_end;
      const auto wait = survival_crossing(ex, u, seg_end - t_cur, &y_end);
      if (wait) {
        t_cur += *wait;
        if (detection_efficiency >= 1.0 ||
            unif(rng_det) < detection_efficiency)
          times.push_back(t_cur);
        y = ground_state();
        u = draw_open_unit(rng_wait, unif);
      } else {
        t_cur = seg_end;
        if (!(seg_end < duration)) break;
        y = y_end;
        offset = proc.sigma * gauss(rng_env);
        prop = make_propagator(params.gamma, params.gamma_c, params.omega,
                               params.delta + offset);
        seg_end = std::min(duration, seg_end + gap(rng_env));
      }
    }
  }

  if (background_rate > 0.0) {
    std::mt19937_64 rng_bg(detail::sub_seed(proc.seed, 3));
    std::poisson_distribution<long long> count(background_rate * duration);
    std::uniform_real_distribution<double> when(0.0, duration);
    const long long n_bg = count(rng_bg);
    times.reserve(times.size() + static_cast<std::size_t>(n_bg));
    for (long long i = 0; i < n_bg; ++i) times.push_back(when(rng_bg));
    std::sort(times.begin(), times.end());
  }
  times.erase(std::unique(times.begin(), times.end()), times.end());

  PhotonStream out;
  out.arrival_times = std::move(times);
  out.total_duration = duration;
  out.seed = proc.seed;
  return out;
}

CorrelationCurve correlate(const PhotonStream& stream, double bin_width,
                           double max_tau) {
  validate(stream);
  if (!(bin_width > 0.0) || !std::isfinite(bin_width))
    throw ValidationError("correlate: bin_width must be positive and finite");
  if (!(max_tau >= bin_width) || !std::isfinite(max_tau))
    throw ValidationError("correlate: max_tau must be >= bin_width");
  if (stream.arrival_times.size() < 2)
    throw ValidationError("correlate: stream has fewer than 2 photons");

  const long k_max = std::max<long>(1, std::lround(max_tau / bin_width));
  const double cut = (static_cast<double>(k_max) + 0.5) * bin_width;
  std::vector<double> one_sided(static_cast<std::size_t>(k_max) + 1, 0.0);
  const auto& ts = stream.arrival_times;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      const double dt = ts[j] - ts[i];
      if (!(dt < cut)) break;
      const long k = std::lround(dt / bin_width);
      if (k <= k_max) one_sided[static_cast<std::size_t>(k)] += 1.0;
    }
  }

  CorrelationCurve curve;
  curve.bin_width = bin_width;
  const std::size_t n_bins = 2 * static_cast<std::size_t>(k_max) + 1;
  curve.tau_bins.resize(n_bins);
  curve.counts.resize(n_bins);
  for (long k = -k_max; k <= k_max; ++k) {
    const std::size_t idx = static_cast<std::size_t>(k + k_max);
    curve.tau_bins[idx] = static_cast<double>(k) * bin_width;
    // each unordered pair lands at +dt and -dt; both fall in the center bin
    curve.counts[idx] =
        k == 0 ? 2.0 * one_sided[0]
               : one_sided[static_cast<std::size_t>(std::labs(k))];
  }

  const long k_plateau = std::max<long>(
      1, static_cast<long>(std::ceil(0.8 * static_cast<double>(k_max) -
                                     1e-9)));
  double acc = 0.0;
  long n_pl = 0;
  for (long k = k_plateau; k <= k_max; ++k) {
    acc += one_sided[static_cast<std::size_t>(k)];
    ++n_pl;
  }
  if (!(acc > 0.0))
    throw NumericalError(
        "correlate: plateau window has no coincidences; stream too short "
        "to normalize");
  curve.normalization = static_cast<double>(n_pl) / acc;
  return curve;
}

QuasiStaticG2 quasi_static_average(const EmitterParams& params,
                                   const DetuningDistribution& dist,
                                   std::span<const double> tau_grid,
                                   int n_samples, std::uint64_t seed) {
  validate(params);
  validate(dist);
  if (n_samples < 100)
    throw ValidationError("quasi_static_average: n_samples must be >= 100");
  for (std::size_t i = 0; i < tau_grid.size(); ++i)
    if (!std::isfinite(tau_grid[i]))
      throw ValidationError(
          "quasi_static_average: non-finite tau at index " +
          std::to_string(i));

  const std::size_t n_tau = tau_grid.size();
  QuasiStaticG2 out;
  out.g2.resize(n_tau);
  out.std_error.assign(n_tau, 0.0);

  if (dist.sigma == 0.0) {
    EmitterParams p = params;
    p.delta += dist.mean;
    for (std::size_t t = 0; t < n_tau; ++t)
      out.g2[t] = g2_detuned(p, tau_grid[t]);
    return out;
  }

  const std::size_t n = static_cast<std::size_t>(n_samples);
  std::vector<double> offsets(n), weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(detail::sub_seed(seed, i));
    std::normal_distribution<double> gauss(0.0, 1.0);
    offsets[i] = dist.mean + dist.sigma * gauss(rng);
    EmitterParams p = params;
    p.delta += offsets[i];
    const double rate = emission_rate(p);
    weights[i] = rate * rate;
  }
  double w_sum = 0.0;
  for (double w : weights) w_sum += w;
  if (!(w_sum > 0.0))
    throw NumericalError(
        "quasi_static_average: all sample weights vanished");

  std::vector<double> num(n_tau, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    EmitterParams p = params;
    p.delta += offsets[i];
    for (std::size_t t = 0; t < n_tau; ++t)
      num[t] += weights[i] * g2_detuned(p, tau_grid[t]);
  }
  for (std::size_t t = 0; t < n_tau; ++t) out.g2[t] = num[t] / w_sum;

  // linearized ratio-estimator error: SE^2 = sum_i [w_i (g_i - ghat)]^2
  // over (sum w)^2, exactly zero when every draw gives the same value
  std::vector<double> se2(n_tau, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    EmitterParams p = params;
    p.delta += offsets[i];
    for (std::size_t t = 0; t < n_tau; ++t) {
      const double dev =
          weights[i] * (g2_detuned(p, tau_grid[t]) - out.g2[t]);
      se2[t] += dev * dev;
    }
  }
  for (std::size_t t = 0; t < n_tau; ++t)
    out.std_error[t] = std::sqrt(se2[t]) / w_sum;
  return out;
}

EnsembleRho ensemble_rho_ee(const EmitterParams& params,
                            double drive_duration,
                            std::span<const double> t_grid,
                            int n_trajectories, std::uint64_t seed) {
  validate(params);
  if (!(drive_duration > 0.0) || !std::isfinite(drive_duration))
    throw ValidationError(
        "ensemble_rho_ee: drive_duration must be positive and finite");
  if (n_trajectories < 2)
    throw ValidationError(
        "ensemble_rho_ee: need at least 2 trajectories for a standard "
        "error");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!std::isfinite(t_grid[i]) || t_grid[i] < 0.0)
      throw ValidationError(
          "ensemble_rho_ee: grid times must be finite and >= 0 (index " +
          std::to_string(i) + ")");
    if (i > 0 && !(t_grid[i] >= t_grid[i - 1]))
      throw ValidationError(
          "ensemble_rho_ee: grid times must be non-decreasing (index " +
          std::to_string(i) + ")");
  }

  const std::size_t n_grid = t_grid.size();
  EnsembleRho out;
  out.rho_ee.assign(n_grid, 0.0);
  out.std_error.assign(n_grid, 0.0);
  if (n_grid == 0) return out;

  const Propagator prop_on = make_propagator(
      params.gamma, params.gamma_c, params.omega, params.delta);
  const Propagator prop_off =
      make_propagator(params.gamma, params.gamma_c, 0.0, params.delta);
  // horizon strictly past the last grid point so every point is recorded
  const double horizon = t_grid.back() + 1.0 / params.gamma;

  struct Segment {
    double end;
    const Propagator* prop;
  };
  std::vector<Segment> segments;
  segments.push_back({std::min(drive_duration, horizon), &prop_on});
  if (horizon > drive_duration) segments.push_back({horizon, &prop_off});

  std::vector<double> mean(n_grid, 0.0), m2(n_grid, 0.0);
  std::vector<double> traj(n_grid, 0.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int tr = 0; tr < n_trajectories; ++tr) {
    std::mt19937_64 rng(detail::sub_seed(seed, static_cast<std::uint64_t>(tr)));
    std::size_t g = 0;
    std::size_t si = 0;
    Vec4 y = ground_state();
    double t_cur = 0.0;
    double u = draw_open_unit(rng, unif);
    while (g < n_grid && si < segments.size()) {
      const Expansion ex = expand(*segments[si].prop, y);
      Vec4 y_end;
      const auto wait =
          survival_crossing(ex, u, segments[si].end - t_cur, &y_end);
      const double t_ev = wait ? t_cur + *wait : segments[si].end;
      while (g < n_grid && t_grid[g] < t_ev) {
        const Vec4 st = ex.state(t_grid[g] - t_cur);
        traj[g] = st[1] / (st[0] + st[1]);
        ++g;
      }
      if (wait) {
        t_cur = t_ev;
        y = ground_state();
        u = draw_open_unit(rng, unif);
      } else {
        t_cur = segments[si].end;
        y = y_end;
        ++si;
      }
    }
    for (std::size_t k = 0; k < n_grid; ++k) {
      const double delta = traj[k] - mean[k];
      mean[k] += delta / static_cast<double>(tr + 1);
      m2[k] += delta * (traj[k] - mean[k]);
    }
  }

  const double n = static_cast<double>(n_trajectories);
  for (std::size_t k = 0; k < n_grid; ++k) {
    out.rho_ee[k] = mean[k];
    out.std_error[k] = std::sqrt(m2[k] / (n - 1.0) / n);
  }
  return out;
}

}  // namespace rabikit
