#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rabikit/bloch.hpp"
#include "rabikit/diffusion.hpp"
#include "rabikit/dynamics.hpp"
#include "rabikit/errors.hpp"
#include "rabikit/montecarlo.hpp"
#include "stream_checks.hpp"

using namespace rabikit;
using namespace stream_checks;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

EmitterParams bright_emitter() {
  EmitterParams p;
  p.gamma = kTwoPi * 1.09e8;
  p.gamma_c = kTwoPi * 5e7;
  p.omega = kTwoPi * 1.0e9;
  return p;
}

// Merged raw histogram over an ensemble of short streams sharing one
// master seed. Streams with fewer than 2 photons carry no pairs; the rare
// stream whose plateau is empty cannot be normalized and is skipped too.
std::vector<double> merged_one_sided(const EmitterParams& params,
                                     const DiffusionProcess& proto,
                                     int n_streams, double duration,
                                     double bin_width, double max_tau,
                                     std::uint64_t master) {
  std::vector<double> merged;
  DiffusionProcess proc = proto;
  for (int s = 0; s < n_streams; ++s) {
    proc.seed = detail::sub_seed(master, static_cast<std::uint64_t>(s));
    const PhotonStream stream = simulate_stream(params, proc, duration, 1.0);
    if (stream.arrival_times.size() < 2) continue;
    try {
      const CorrelationCurve curve = correlate(stream, bin_width, max_tau);
      const std::vector<double> one = one_sided_counts(curve);
      if (merged.empty()) merged.assign(one.size(), 0.0);
      for (std::size_t k = 0; k < one.size(); ++k) merged[k] += one[k];
    } catch (const NumericalError&) {
      // no plateau coincidences in this stream
    }
  }
  return merged;
}

}  // namespace

TEST_CASE("simulate_stream basics") {
  const EmitterParams p = bright_emitter();

  SUBCASE("zero drive emits nothing") {
    EmitterParams off = p;
    off.omega = 0.0;
    DiffusionProcess proc;
    proc.seed = 3;
    const PhotonStream st = simulate_stream(off, proc, 1e-4, 1.0);
    CHECK(st.arrival_times.empty());
    CHECK(st.total_duration == 1e-4);
  }

  SUBCASE("same seed reproduces the stream bit for bit") {
    DiffusionProcess proc;
    proc.kind = DiffusionKind::frozen_gaussian;
    proc.sigma = kTwoPi * 3e8;
    proc.seed = 11;
    const PhotonStream a = simulate_stream(p, proc, 2e-6, 0.7);
    const PhotonStream b = simulate_stream(p, proc, 2e-6, 0.7);
    REQUIRE(a.arrival_times.size() == b.arrival_times.size());
    CHECK(a.arrival_times == b.arrival_times);

    proc.kind = DiffusionKind::jump_process;
    proc.jump_rate = 2e6;
    const PhotonStream c = simulate_stream(p, proc, 2e-6, 0.7);
    const PhotonStream d = simulate_stream(p, proc, 2e-6, 0.7);
    CHECK(c.arrival_times == d.arrival_times);
  }

  SUBCASE("stream invariants hold") {
    DiffusionProcess proc;
    proc.seed = 5;
    const PhotonStream st = simulate_stream(p, proc, 1e-5, 0.9);
    CHECK_NOTHROW(validate(st));
    CHECK(st.arrival_times.size() > 100);
  }

  SUBCASE("detection efficiency thins the rate proportionally") {
    DiffusionProcess proc;
    proc.seed = 21;
    const double dur = 2e-4;
    const double n_full = static_cast<double>(
        simulate_stream(p, proc, dur, 1.0).arrival_times.size());
    const double n_half = static_cast<double>(
        simulate_stream(p, proc, dur, 0.5).arrival_times.size());
    // binomial thinning: ratio 0.5 within ~4 combined standard errors
    CHECK(n_half / n_full ==
          doctest::Approx(0.5).epsilon(4.0 / std::sqrt(n_half)));
  }

  SUBCASE("input validation") {
    DiffusionProcess proc;
    CHECK_THROWS_AS(simulate_stream(p, proc, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(simulate_stream(p, proc, 1e-6, 0.0), ValidationError);
    CHECK_THROWS_AS(simulate_stream(p, proc, 1e-6, 1.5), ValidationError);
    CHECK_THROWS_AS(simulate_stream(p, proc, 1e-6, 1.0, -1.0),
                    ValidationError);
    proc.sigma = -1.0;
    CHECK_THROWS_AS(simulate_stream(p, proc, 1e-6, 1.0), ValidationError);
    proc.sigma = 0.0;
    proc.jump_rate = -2.0;
    CHECK_THROWS_AS(simulate_stream(p, proc, 1e-6, 1.0), ValidationError);
  }
}

TEST_CASE("stream mean rate matches the steady-state emission rate") {
  const EmitterParams p = bright_emitter();
  DiffusionProcess proc;
  proc.seed = 42;
  const double dur = 8e-4;
  const PhotonStream st = simulate_stream(p, proc, dur, 1.0);

  // chunked rate estimate: the renewal stream is not Poisson, so take the
  // standard error from the scatter of 16 block rates
  const int n_blocks = 16;
  std::vector<double> rates(n_blocks, 0.0);
  for (double t : st.arrival_times) {
    int b = static_cast<int>(t / dur * n_blocks);
    if (b == n_blocks) b = n_blocks - 1;
    rates[static_cast<std::size_t>(b)] += 1.0;
  }
  double mean = 0.0;
  for (double& r : rates) {
    r /= dur / n_blocks;
    mean += r / n_blocks;
  }
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean) / (n_blocks - 1);
  const double se = std::sqrt(var / n_blocks);

  const double expected = p.gamma * emission_rate(p);
  CHECK(std::fabs(mean - expected) <= 3.0 * se);
  CHECK(se < 0.01 * expected);  // the check has real resolving power
}

TEST_CASE("correlate on a hand-built stream") {
  PhotonStream st;
  st.total_duration = 1e-8;
  st.arrival_times = {0.0, 1e-9, 2e-9};
  const CorrelationCurve c = correlate(st, 1e-9, 2e-9);
  REQUIRE(c.size() == 5);
  CHECK(c.tau_bins.front() == doctest::Approx(-2e-9));
  CHECK(c.tau_bins.back() == doctest::Approx(2e-9));
  // pairs: two at 1 ns, one at 2 ns, mirrored; empty center
  CHECK(c.counts == std::vector<double>{1.0, 2.0, 0.0, 2.0, 1.0});
  CHECK(c.normalization == doctest::Approx(1.0));
  CHECK_NOTHROW(validate(c));

  SUBCASE("rejections") {
    CHECK_THROWS_AS(correlate(st, 0.0, 2e-9), ValidationError);
    CHECK_THROWS_AS(correlate(st, 1e-9, 0.5e-9), ValidationError);
    PhotonStream lone;
    lone.total_duration = 1e-8;
    lone.arrival_times = {1e-9};
    CHECK_THROWS_AS(correlate(lone, 1e-9, 2e-9), ValidationError);
    PhotonStream unsorted;
    unsorted.total_duration = 1e-8;
    unsorted.arrival_times = {2e-9, 1e-9};
    CHECK_THROWS_AS(correlate(unsorted, 1e-9, 2e-9), ValidationError);
    PhotonStream outside;
    outside.total_duration = 1e-9;
    outside.arrival_times = {0.0, 2e-9};
    CHECK_THROWS_AS(correlate(outside, 1e-9, 1e-9), ValidationError);
  }
}

TEST_CASE("uniform random stream is flat at g2 = 1") {
  // coherent-source statistics: fixed seed, a 3 sigma per-bin gate over 41
  // bins is seed-sensitive by construction
  std::mt19937_64 rng(904);
  std::uniform_real_distribution<double> when(0.0, 1e-3);
  std::vector<double> times(150000);
  for (double& t : times) t = when(rng);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  PhotonStream st;
  st.total_duration = 1e-3;
  st.arrival_times = std::move(times);
  const CorrelationCurve c = correlate(st, 1e-9, 2e-8);
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double sigma =
        c.normalization * std::sqrt(std::max(c.counts[k], 1.0));
    CHECK(std::fabs(c.g2_at(k) - 1.0) <= 3.0 * sigma);
  }
}

TEST_CASE("resonant stream histogram matches the analytic correlation") {
  const EmitterParams p = bright_emitter();
  DiffusionProcess proc;
  proc.seed = 42;
  const double dur = 8e-4;
  const double bin = 1.6e-10;
  const PhotonStream st = simulate_stream(p, proc, dur, 1.0);
  REQUIRE(st.arrival_times.size() > 200000);
  const CorrelationCurve curve = correlate(st, bin, 2e-8);

  const std::vector<double> one = one_sided_counts(curve);
  std::vector<double> shape(one.size(), 0.0);
  for (std::size_t k = 1; k < shape.size(); ++k)
    shape[k] = bin_average(
        [&](double t) { return g2_resonant(p, t); },
        static_cast<double>(k) * bin, bin);
  const ShapeChi2 fit = shape_chi2(one, bin, dur, shape);
  CHECK(fit.bins > 100);
  CHECK(fit.per_dof() > 0.7);
  CHECK(fit.per_dof() < 1.3);

  SUBCASE("the center bin is antibunched") {
    const std::size_t center = (curve.size() - 1) / 2;
    CHECK(curve.g2_at(center) < 0.06);
  }
}

TEST_CASE("frozen-detuning ensemble reproduces the diffusion average") {
  const EmitterParams p = bright_emitter();
  DetuningDistribution dist;
  dist.sigma = kTwoPi * 1.01e9;
  DiffusionProcess proto;
  proto.kind = DiffusionKind::frozen_gaussian;
  proto.sigma = dist.sigma;

  const double bin = 1.6e-10;
  const double dur = 3e-7;
  const std::vector<double> merged =
      merged_one_sided(p, proto, 9000, dur, bin, 2e-8, 99);
  REQUIRE_FALSE(merged.empty());

  std::vector<double> shape(merged.size(), 0.0);
  for (std::size_t k = 1; k < shape.size(); ++k)
    shape[k] = bin_average(
        [&](double t) { return g2_diffused(p, dist, t); },
        static_cast<double>(k) * bin, bin);
  const ShapeChi2 fit = shape_chi2(merged, bin, dur, shape);
  CHECK(fit.bins > 100);
  CHECK(fit.per_dof() > 0.7);
  CHECK(fit.per_dof() < 1.3);
}

TEST_CASE("slow jump diffusion reproduces the quasi-static average") {
  const EmitterParams p = bright_emitter();
  DetuningDistribution dist;
  dist.sigma = kTwoPi * 1.01e9;
  DiffusionProcess proc;
  proc.kind = DiffusionKind::jump_process;
  proc.sigma = dist.sigma;
  proc.jump_rate = 1.25e6;  // mean hold 0.8 us, 40x the correlation window
  proc.seed = 17;

  const double dur = 1.2e-3;
  const double bin = 1.6e-10;
  const PhotonStream st = simulate_stream(p, proc, dur, 0.5);
  const CorrelationCurve curve = correlate(st, bin, 2e-8);

  const std::vector<double> one = one_sided_counts(curve);
  std::vector<double> shape(one.size(), 0.0);
  for (std::size_t k = 1; k < shape.size(); ++k)
    shape[k] = bin_average(
        [&](double t) { return g2_diffused(p, dist, t); },
        static_cast<double>(k) * bin, bin);
  const ShapeChi2 fit = shape_chi2(one, bin, dur, shape);
  CHECK(fit.bins > 100);
  CHECK(fit.per_dof() > 0.7);
  CHECK(fit.per_dof() < 1.3);
}

TEST_CASE("uniform background fills in the antibunching dip") {
  EmitterParams p = bright_emitter();
  DiffusionProcess proc;
  proc.seed = 33;
  const double dur = 2e-4;
  const double signal_rate = p.gamma * emission_rate(p);

  const PhotonStream clean = simulate_stream(p, proc, dur, 1.0);
  const PhotonStream dirty =
      simulate_stream(p, proc, dur, 1.0, 0.45 * signal_rate);
  CHECK(dirty.arrival_times.size() > clean.arrival_times.size());

  const CorrelationCurve c_clean = correlate(clean, 1.6e-10, 2e-8);
  const CorrelationCurve c_dirty = correlate(dirty, 1.6e-10, 2e-8);
  const std::size_t center = (c_clean.size() - 1) / 2;
  CHECK(c_clean.g2_at(center) < 0.06);
  // background fraction f = 0.31: expected dip floor 1 - (1-f)^2 = 0.52
  CHECK(c_dirty.g2_at(center) > 0.35);
  CHECK(c_dirty.g2_at(center) < 0.70);
}

TEST_CASE("quasi-static Monte Carlo average") {
  const EmitterParams p = bright_emitter();
  DetuningDistribution dist;
  dist.sigma = kTwoPi * 1.01e9;
  std::vector<double> taus;
  for (int i = 0; i <= 12; ++i) taus.push_back(i * 4e-10);

  SUBCASE("zero width collapses to the detuned law exactly") {
    DetuningDistribution frozen;
    frozen.sigma = 0.0;
    frozen.mean = kTwoPi * 2e8;
    const QuasiStaticG2 est = quasi_static_average(p, frozen, taus, 500, 1);
    EmitterParams shifted = p;
    shifted.delta += frozen.mean;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      CHECK(est.g2[i] == g2_detuned(shifted, taus[i]));
      CHECK(est.std_error[i] == 0.0);
    }
  }

  SUBCASE("agrees with the quadrature average within 3 standard errors") {
    const QuasiStaticG2 est =
        quasi_static_average(p, dist, taus, 100000, 11);
    const std::vector<double> quad = g2_diffused_grid(p, dist, taus);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (est.std_error[i] < 1e-14) {
        CHECK(std::fabs(est.g2[i] - quad[i]) < 1e-12);
      } else {
        CHECK(std::fabs(est.g2[i] - quad[i]) <= 3.0 * est.std_error[i]);
      }
    }
  }

  SUBCASE("standard error shrinks like 1/sqrt(n)") {
    std::vector<double> mid = {8e-10, 1.2e-9, 1.6e-9, 2.4e-9};
    const QuasiStaticG2 a = quasi_static_average(p, dist, mid, 20000, 7);
    const QuasiStaticG2 b = quasi_static_average(p, dist, mid, 40000, 7);
    double ra = 0.0, rb = 0.0;
    for (std::size_t i = 0; i < mid.size(); ++i) {
      ra += a.std_error[i];
      rb += b.std_error[i];
    }
    CHECK(ra / rb == doctest::Approx(std::sqrt(2.0)).epsilon(0.20));
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(quasi_static_average(p, dist, taus, 99, 1),
                    ValidationError);
    std::vector<double> bad = {0.0, std::nan("")};
    CHECK_THROWS_AS(quasi_static_average(p, dist, bad, 500, 1),
                    ValidationError);
  }
}

TEST_CASE("trajectory ensemble matches the master equation") {
  const EmitterParams p = bright_emitter();
  const double pulse = 3e-9;
  std::vector<double> grid;
  for (int i = 0; i <= 14; ++i) grid.push_back(i * 3e-10);

  const EnsembleRho ens = ensemble_rho_ee(p, pulse, grid, 10000, 7);

  PulseEnvelope env;
  env.duration = pulse;
  env.peak_omega = p.omega;
  const std::vector<BlochState> master = evolve_pulse(p, env, grid);

  CHECK(std::fabs(ens.rho_ee[0]) < 1e-12);  // eigenbasis round trip of 0
  for (std::size_t i = 1; i < grid.size(); ++i) {
    REQUIRE(ens.std_error[i] > 0.0);
    const double z = (ens.rho_ee[i] - master[i].rho_ee) / ens.std_error[i];
    CHECK(std::fabs(z) <= 3.0);
    CHECK(ens.std_error[i] < 0.01);  // enough trajectories to resolve
  }

  SUBCASE("validation") {
    CHECK_THROWS_AS(ensemble_rho_ee(p, 0.0, grid, 100, 1), ValidationError);
    CHECK_THROWS_AS(ensemble_rho_ee(p, pulse, grid, 1, 1), ValidationError);
    std::vector<double> bad = {2e-10, 1e-10};
    CHECK_THROWS_AS(ensemble_rho_ee(p, pulse, bad, 100, 1),
                    ValidationError);
    std::vector<double> neg = {-1e-10};
    CHECK_THROWS_AS(ensemble_rho_ee(p, pulse, neg, 100, 1),
                    ValidationError);
  }
}

TEST_CASE("photon stream validation") {
  PhotonStream st;
  st.total_duration = 0.0;
  CHECK_THROWS_AS(validate(st), ValidationError);
  st.total_duration = 1e-6;
  st.arrival_times = {0.0, 0.0};
  CHECK_THROWS_AS(validate(st), ValidationError);
  st.arrival_times = {-1e-9};
  CHECK_THROWS_AS(validate(st), ValidationError);
  st.arrival_times = {0.5e-6, 2e-6};
  CHECK_THROWS_AS(validate(st), ValidationError);
  st.arrival_times = {0.5e-6, 0.9e-6};
  CHECK_NOTHROW(validate(st));
}
