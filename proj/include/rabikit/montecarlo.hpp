#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rabikit/correlation.hpp"
#include "rabikit/emitter.hpp"

namespace rabikit {

enum class DiffusionKind { frozen_gaussian, jump_process };

// Stochastic model of the slowly diffusing detuning offset added to
// params.delta. frozen_gaussian draws one offset per stream (quasi-static
// limit); jump_process resamples the offset from the same stationary
// Gaussian at Poisson-distributed times with mean rate jump_rate, the
// simplest process with a tunable diffusion rate.
struct DiffusionProcess {
  DiffusionKind kind = DiffusionKind::frozen_gaussian;
  double sigma = 0.0;      // rad/s, stationary Gaussian width
  double jump_rate = 0.0;  // events/s, jump_process only
  std::uint64_t seed = 0;
};

void validate(const DiffusionProcess& proc);

// One detected-photon time-tag record, strictly increasing times in
// [0, total_duration].
struct PhotonStream {
  std::vector<double> arrival_times;  // s
  double total_duration = 0.0;        // s
  std::uint64_t seed = 0;
};

void validate(const PhotonStream& stream);

// Simulates a photon emission stream by unraveling the Bloch dynamics over
// the emission channel: between photons the conditional density matrix
// evolves under the no-emission generator (dephasing stays a continuous,
// undetected channel), the trace gives the no-photon survival probability,
// and each waiting time is drawn by inverting survival against a uniform
// variate. Every emission resets the emitter to the ground state, so the
// stream is a renewal process per constant-detuning segment. Emitted
// photons are thinned by detection_efficiency; background_rate > 0 merges
// in a uniform Poisson background (off by default). Fully reproducible
// from proc.seed. omega = 0 yields an empty stream.
PhotonStream simulate_stream(const EmitterParams& params,
                             const DiffusionProcess& proc, double duration,
                             double detection_efficiency,
                             double background_rate = 0.0);

// Full pairwise (not start-stop) coincidence histogram of the stream.
// Bin k at center k*bin_width collects signed differences within half a
// bin of the center, k = -K..K with K = max(1, round(max_tau/bin_width)),
// so every bin is complete even when max_tau is not a multiple of the
// width. normalization is set from the mean of the outer 20% of the range
// so the plateau is 1. Streams with fewer than 2 photons are rejected; an
// empty plateau (too few coincidences to normalize) is a NumericalError.
CorrelationCurve correlate(const PhotonStream& stream, double bin_width,
                           double max_tau);

// Monte Carlo estimate of the quasi-static diffusion average: sample the
// detuning offset from dist, weight each draw by the squared steady-state
// emission rate, and average the detuned correlation over draws.
struct QuasiStaticG2 {
  std::vector<double> g2;         // per tau_grid entry
  std::vector<double> std_error;  // ratio-estimator standard error
};

QuasiStaticG2 quasi_static_average(const EmitterParams& params,
                                   const DetuningDistribution& dist,
                                   std::span<const double> tau_grid,
                                   int n_samples, std::uint64_t seed);

// Trajectory-ensemble check of the unraveling: mean excited population
// over n_trajectories independent trajectories driven at params.omega over
// [0, drive_duration) and free afterwards, recorded on t_grid, with the
// per-time standard error of the mean. Agrees with the master equation
// (bloch::evolve_pulse, square pulse) within statistics.
struct EnsembleRho {
  std::vector<double> rho_ee;
  std::vector<double> std_error;
};

EnsembleRho ensemble_rho_ee(const EmitterParams& params,
                            double drive_duration,
                            std::span<const double> t_grid,
                            int n_trajectories, std::uint64_t seed);

namespace detail {
// Deterministic sub-seed stream: trajectory/sample i of a master seed.
// Distinct indices give independent generators, so parallel or reordered
// execution merges to bit-identical aggregates.
std::uint64_t sub_seed(std::uint64_t master, std::uint64_t index);
}  // namespace detail

}  // namespace rabikit
