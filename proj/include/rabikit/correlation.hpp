#pragma once

#include <cmath>
#include <vector>

#include "rabikit/errors.hpp"

namespace rabikit {

// A tau-binned coincidence histogram, measured or simulated. counts are raw
// coincidences; multiplying by `normalization` maps them to g2 units (the
// large-|tau| plateau of counts*normalization is 1 for a normalized curve).
struct CorrelationCurve {
  std::vector<double> tau_bins;  // bin centers, s, strictly increasing
  std::vector<double> counts;    // coincidences per bin, >= 0
  double bin_width = 0.0;        // s
  double normalization = 1.0;    // counts -> g2 scale factor

  std::size_t size() const { return tau_bins.size(); }
  double g2_at(std::size_t i) const { return counts[i] * normalization; }
};

inline void validate(const CorrelationCurve& c) {
  if (c.tau_bins.size() != c.counts.size())
    throw ValidationError("CorrelationCurve: tau_bins/counts size mismatch");
  if (c.tau_bins.size() < 2)
    throw ValidationError("CorrelationCurve: need at least 2 bins");
  if (!(c.bin_width > 0.0))
    throw ValidationError("CorrelationCurve: bin_width must be positive");
  for (std::size_t i = 0; i < c.counts.size(); ++i) {
    if (!(c.counts[i] >= 0.0))
      throw ValidationError("CorrelationCurve: negative counts at bin " +
                            std::to_string(i));
  }
  const double tol = 1e-6 * c.bin_width;
  for (std::size_t i = 1; i < c.tau_bins.size(); ++i) {
    const double step = c.tau_bins[i] - c.tau_bins[i - 1];
    if (!(step > 0.0) || std::fabs(step - c.bin_width) > tol)
      throw ValidationError(
          "CorrelationCurve: non-uniform bin spacing at index " +
          std::to_string(i));
  }
}

}  // namespace rabikit
