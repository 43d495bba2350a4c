#pragma once

#include <span>
#include <vector>

#include "rabikit/emitter.hpp"

namespace rabikit {

// Quadrature rule for averaging over the quasi-static detuning distribution.
// gauss_hermite matches the Gaussian weight and is the fast path when the
// distribution is narrower than the emission-weight half-width
// V = sqrt(gperp^2 + omega^2 gperp/gamma); an internal self-check detects
// when the rule stops converging (broad distributions squeeze the C(Delta)^2
// factor into a few nodes) and transparently switches to the adaptive rule,
// so the accuracy contract holds in every regime. adaptive_trapezoid is
// trapezoid refinement with Richardson extrapolation on the window
// [mean +- range_sigmas*sigma] clipped to 256 V around the line center.
enum class QuadratureScheme { gauss_hermite, adaptive_trapezoid };

struct QuadratureSpec {
  int node_count = 64;
  QuadratureScheme scheme = QuadratureScheme::gauss_hermite;
  double range_sigmas = 8.0;  // half-width in sigmas, adaptive scheme only
};

void validate(const QuadratureSpec& quad);

// Spectral-diffusion-averaged correlation
//   g2_diff(tau) = int p(x) C(d+x)^2 g2(tau, d+x) dx / int p(x) C(d+x)^2 dx
// with p the Gaussian density of dist, d the laser detuning params.delta,
// and C the steady-state emission rate. The two-photon coincidence weights
// each detuning class by its rate squared; the normalization fixes the
// plateau g2(inf) = 1. Valid while the diffusion is slow compared to the
// correlation window (quasi-static). Relative quadrature error stays below
// 1e-6 at the default spec. sigma = 0 collapses to the pure detuned law.
double g2_diffused(const EmitterParams& params,
                   const DetuningDistribution& dist, double tau,
                   const QuadratureSpec& quad = {});

// Batch version sharing nodes and weights across the whole tau grid.
std::vector<double> g2_diffused_grid(const EmitterParams& params,
                                     const DetuningDistribution& dist,
                                     std::span<const double> taus,
                                     const QuadratureSpec& quad = {});

// Ratio of the first-oscillation peak-to-dip amplitude of the diffused
// correlation to that of the resonant one. 1 at sigma = 0, non-increasing
// in sigma, positive because the C^2 weighting keeps near-resonant emitters
// dominant no matter how broad the distribution. Requires oscillatory
// resonant dynamics (there is no "first oscillation" otherwise).
double contrast_reduction(const EmitterParams& params,
                          const DetuningDistribution& dist);

namespace detail {
// Nodes and weights of the n-point Hermite rule for weight exp(-x^2),
// via the Golub-Welsch eigenproblem. Ascending node order.
void gauss_hermite_rule(int n, std::vector<double>& nodes,
                        std::vector<double>& weights);
}  // namespace detail

}  // namespace rabikit
