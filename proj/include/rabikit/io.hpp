#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rabikit/bloch.hpp"
#include "rabikit/classifier.hpp"
#include "rabikit/diffusion.hpp"
#include "rabikit/fitting.hpp"
#include "rabikit/montecarlo.hpp"

namespace rabikit {

// Tool configuration, read from a flat key = value text file ('#' starts a
// comment). All frequencies in files are ordinary frequencies in Hz; the
// library converts to angular rates internally. The decay rate comes from
// exactly one of emitter.ftl_hz (transform-limited linewidth, gamma =
// 2 pi ftl) or emitter.gamma_hz (the rate stated directly under the same
// Hz convention); supplying both is rejected. The full key list lives in
// the README next to a sample file.
struct Config {
  std::optional<double> ftl_hz;
  std::optional<double> gamma_hz;
  double gamma_c_hz = 0.0;
  std::optional<double> omega_hz;
  double delta_hz = 0.0;

  DiffusionKind diffusion_kind = DiffusionKind::frozen_gaussian;
  double diffusion_sigma_hz = 0.0;
  double diffusion_mean_hz = 0.0;
  double jump_rate = 0.0;  // events/s

  std::string frequency_unit = "hz";  // only accepted value
  QuadratureSpec quadrature;
  OdeOptions solver;
  std::optional<std::uint64_t> seed;
  std::string output_dir = ".";
};

void validate(const Config& cfg);
Config load_config(const std::string& path);

// Decay rate in rad/s from whichever source the config carries; throws
// ValidationError when neither is set.
double config_gamma(const Config& cfg);

// Correlation histogram CSV: optional '# bin_width = ...' and
// '# normalization = ...' comment lines, a 'tau_s,counts' header, then one
// bin per row. Loader errors (malformed rows, non-uniform bins to 1e-6
// relative, negative counts) name the offending line. save/load round-trip
// is exact: floats are written with shortest round-trip precision.
CorrelationCurve load_correlation_csv(const std::string& path);
void save_correlation_csv(const std::string& path,
                          const CorrelationCurve& curve);

// Excitation-scan CSV with header 'scan_id,freq_hz,counts'. Rows are
// grouped by scan_id and frequency-sorted per scan, so a shuffled file
// loads to the same result as a sorted one. Scans with all-zero counts are
// retained (histogram_line_fit decides darkness). Missing columns and
// files with no data rows are errors.
std::vector<PleScan> load_ple_scans(const std::string& path);

// Strict numeric CSV: the header must name `columns` in order, though
// trailing optional ones may be omitted (the first min_columns are
// required); every row carries exactly the header's arity. Returned
// per-column; absent optional columns come back empty.
std::vector<std::vector<double>> load_numeric_csv(
    const std::string& path, const std::vector<std::string>& columns,
    std::size_t min_columns);

// Power-series CSV with header
// 'power_w,omega_hz,omega_sigma_hz,gamma_perp_hz,gamma_perp_sigma_hz'.
// Entries are sorted by power (duplicate powers rejected) and converted to
// angular rates.
PowerSeries load_power_series_csv(const std::string& path,
                                  double temperature);

// Detected-photon time tags, binary: 8-byte magic "RKTT0001", then
// total_duration (IEEE-754 double), seed (uint64), count (uint64), then
// `count` arrival times in seconds as doubles — everything little-endian.
void save_time_tags(const std::string& path, const PhotonStream& stream);
PhotonStream load_time_tags(const std::string& path);

// Plot-data export consumed by the report command and external tooling:
// CSV with header 'x,y,band_lo,band_hi'.
struct PlotData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
};

void save_plot_csv(const std::string& path, const PlotData& plot);
PlotData load_plot_csv(const std::string& path);

// Static SVG rendering of one plot-data set: confidence band polygon under
// the center polyline, with min/max axis labels. Deterministic output.
void save_plot_svg(const std::string& path, const PlotData& plot,
                   const std::string& title);

namespace detail {
// Shortest round-trip decimal representation of a double (std::to_chars).
std::string format_double(double v);
}  // namespace detail

}  // namespace rabikit
