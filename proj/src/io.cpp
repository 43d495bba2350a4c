#include "rabikit/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "rabikit/units.hpp"

namespace rabikit {

namespace detail {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

namespace {

using detail::format_double;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

// Whole file as lines; CRLF tolerated. Line numbers are 1-based throughout.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail_at(const std::string& path, std::size_t lineno,
                          const std::string& msg) {
  throw ValidationError(path + ":" + std::to_string(lineno) + ": " + msg);
}

double parse_double_at(const std::string& field, const std::string& path,
                       std::size_t lineno, const std::string& what) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;  // from_chars rejects '+'
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || first == last)
    fail_at(path, lineno, "cannot parse " + what + " from '" + field + "'");
  return v;
}

std::uint64_t parse_u64_at(const std::string& field, const std::string& path,
                           std::size_t lineno, const std::string& what) {
  std::uint64_t v = 0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() ||
      field.empty())
    fail_at(path, lineno, "cannot parse " + what + " from '" + field + "'");
  return v;
}

long parse_long_at(const std::string& field, const std::string& path,
                   std::size_t lineno, const std::string& what) {
  long v = 0;
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size() ||
      field.empty())
    fail_at(path, lineno, "cannot parse " + what + " from '" + field + "'");
  return v;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  return out;
}

void require_finite(double v, const std::string& key) {
  if (!std::isfinite(v))
    throw ValidationError("config: " + key + " must be finite");
}

}  // namespace

void validate(const Config& cfg) {
  if (cfg.frequency_unit != "hz")
    throw ValidationError(
        "config: units.frequency only supports 'hz' (all file and CLI "
        "frequencies are ordinary frequencies)");
  if (cfg.ftl_hz && cfg.gamma_hz)
    throw ValidationError(
        "config: emitter.ftl_hz and emitter.gamma_hz are two sources for "
        "the same decay rate; set exactly one");
  if (cfg.ftl_hz && !(*cfg.ftl_hz > 0.0 && std::isfinite(*cfg.ftl_hz)))
    throw ValidationError("config: emitter.ftl_hz must be positive");
  if (cfg.gamma_hz && !(*cfg.gamma_hz > 0.0 && std::isfinite(*cfg.gamma_hz)))
    throw ValidationError("config: emitter.gamma_hz must be positive");
  require_finite(cfg.gamma_c_hz, "emitter.gamma_c_hz");
  if (cfg.gamma_c_hz < 0.0)
    throw ValidationError("config: emitter.gamma_c_hz must be >= 0");
  if (cfg.omega_hz && !(*cfg.omega_hz >= 0.0 && std::isfinite(*cfg.omega_hz)))
    throw ValidationError("config: emitter.omega_hz must be >= 0");
  require_finite(cfg.delta_hz, "emitter.delta_hz");
  require_finite(cfg.diffusion_sigma_hz, "diffusion.sigma_hz");
  if (cfg.diffusion_sigma_hz < 0.0)
    throw ValidationError("config: diffusion.sigma_hz must be >= 0");
  require_finite(cfg.diffusion_mean_hz, "diffusion.mean_hz");
  require_finite(cfg.jump_rate, "diffusion.jump_rate");
  if (cfg.jump_rate < 0.0)
    throw ValidationError("config: diffusion.jump_rate must be >= 0");
  validate(cfg.quadrature);
  if (!(cfg.solver.rtol > 0.0) || !std::isfinite(cfg.solver.rtol))
    throw ValidationError("config: solver.rtol must be positive");
  if (!(cfg.solver.atol > 0.0) || !std::isfinite(cfg.solver.atol))
    throw ValidationError("config: solver.atol must be positive");
  if (!(cfg.solver.invariant_tol > 0.0) ||
      !std::isfinite(cfg.solver.invariant_tol))
    throw ValidationError("config: solver.invariant_tol must be positive");
  if (cfg.solver.max_steps <= 0)
    throw ValidationError("config: solver.max_steps must be positive");
  if (cfg.output_dir.empty())
    throw ValidationError("config: output_dir must not be empty");
}

Config load_config(const std::string& path) {
  Config cfg;
  std::set<std::string> seen;
  const std::vector<std::string> lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    std::string line = lines[i];
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail_at(path, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail_at(path, lineno, "empty key");
    if (value.empty()) fail_at(path, lineno, "empty value for '" + key + "'");
    if (!seen.insert(key).second)
      fail_at(path, lineno, "duplicate key '" + key + "'");

    if (key == "units.frequency") {
      cfg.frequency_unit = value;
    } else if (key == "emitter.ftl_hz") {
      cfg.ftl_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "emitter.gamma_hz") {
      cfg.gamma_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "emitter.gamma_c_hz") {
      cfg.gamma_c_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "emitter.omega_hz") {
      cfg.omega_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "emitter.delta_hz") {
      cfg.delta_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "diffusion.kind") {
      if (value == "frozen_gaussian")
        cfg.diffusion_kind = DiffusionKind::frozen_gaussian;
      else if (value == "jump_process")
        cfg.diffusion_kind = DiffusionKind::jump_process;
      else
        fail_at(path, lineno,
                "diffusion.kind must be frozen_gaussian or jump_process");
    } else if (key == "diffusion.sigma_hz") {
      cfg.diffusion_sigma_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "diffusion.mean_hz") {
      cfg.diffusion_mean_hz = parse_double_at(value, path, lineno, key);
    } else if (key == "diffusion.jump_rate") {
      cfg.jump_rate = parse_double_at(value, path, lineno, key);
    } else if (key == "quadrature.scheme") {
      if (value == "gauss_hermite")
        cfg.quadrature.scheme = QuadratureScheme::gauss_hermite;
      else if (value == "adaptive_trapezoid")
        cfg.quadrature.scheme = QuadratureScheme::adaptive_trapezoid;
      else
        fail_at(path, lineno,
                "quadrature.scheme must be gauss_hermite or "
                "adaptive_trapezoid");
    } else if (key == "quadrature.nodes") {
      cfg.quadrature.node_count =
          static_cast<int>(parse_long_at(value, path, lineno, key));
    } else if (key == "quadrature.range_sigmas") {
      cfg.quadrature.range_sigmas = parse_double_at(value, path, lineno, key);
    } else if (key == "solver.rtol") {
      cfg.solver.rtol = parse_double_at(value, path, lineno, key);
    } else if (key == "solver.atol") {
      cfg.solver.atol = parse_double_at(value, path, lineno, key);
    } else if (key == "solver.invariant_tol") {
      cfg.solver.invariant_tol = parse_double_at(value, path, lineno, key);
    } else if (key == "solver.max_steps") {
      cfg.solver.max_steps = parse_long_at(value, path, lineno, key);
    } else if (key == "seed") {
      cfg.seed = parse_u64_at(value, path, lineno, key);
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      fail_at(path, lineno, "unknown key '" + key + "'");
    }
  }
  try {
    validate(cfg);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return cfg;
}

double config_gamma(const Config& cfg) {
  if (cfg.ftl_hz) return to_angular(*cfg.ftl_hz);
  if (cfg.gamma_hz) return to_angular(*cfg.gamma_hz);
  throw ValidationError(
      "no decay rate configured: set emitter.ftl_hz or emitter.gamma_hz "
      "(or pass --ftl-hz / --gamma-hz)");
}

CorrelationCurve load_correlation_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  CorrelationCurve curve;
  std::optional<double> bin_width, normalization;
  std::size_t i = 0;

  // leading '# key = value' comments carry the metadata that raw
  // tau/counts columns cannot (set by save_correlation_csv)
  for (; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    if (line[0] != '#') break;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(line.substr(1, eq - 1));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "bin_width")
      bin_width = parse_double_at(value, path, i + 1, "bin_width");
    else if (key == "normalization")
      normalization = parse_double_at(value, path, i + 1, "normalization");
  }

  if (i >= lines.size() || trim(lines[i]) != "tau_s,counts")
    fail_at(path, i + 1, "expected header 'tau_s,counts'");
  ++i;

  std::vector<std::size_t> row_lines;
  for (; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 2)
      fail_at(path, i + 1, "expected 2 columns, got " +
                               std::to_string(fields.size()));
    const double tau = parse_double_at(fields[0], path, i + 1, "tau_s");
    const double cnt = parse_double_at(fields[1], path, i + 1, "counts");
    if (!(cnt >= 0.0))
      fail_at(path, i + 1, "negative counts " + fields[1]);
    curve.tau_bins.push_back(tau);
    curve.counts.push_back(cnt);
    row_lines.push_back(i + 1);
  }

  if (curve.tau_bins.size() < 2)
    throw ValidationError(path + ": need at least 2 bins, got " +
                          std::to_string(curve.tau_bins.size()));

  if (bin_width) {
    curve.bin_width = *bin_width;
    if (!(curve.bin_width > 0.0))
      throw ValidationError(path + ": bin_width must be positive");
  } else {
    std::vector<double> steps;
    for (std::size_t k = 1; k < curve.tau_bins.size(); ++k)
      steps.push_back(curve.tau_bins[k] - curve.tau_bins[k - 1]);
    std::sort(steps.begin(), steps.end());
    curve.bin_width = steps[steps.size() / 2];
    if (!(curve.bin_width > 0.0))
      fail_at(path, row_lines[1], "tau_s not increasing");
  }
  curve.normalization = normalization.value_or(1.0);

  for (std::size_t k = 1; k < curve.tau_bins.size(); ++k) {
    const double step = curve.tau_bins[k] - curve.tau_bins[k - 1];
    if (!(step > 0.0) ||
        std::fabs(step - curve.bin_width) > 1e-6 * curve.bin_width)
      fail_at(path, row_lines[k],
              "non-uniform bin spacing (step " + format_double(step) +
                  " vs bin width " + format_double(curve.bin_width) + ")");
  }

  validate(curve);
  return curve;
}

void save_correlation_csv(const std::string& path,
                          const CorrelationCurve& curve) {
  validate(curve);
  std::ofstream out = open_for_write(path);
  out << "# bin_width = " << format_double(curve.bin_width) << "\n";
  out << "# normalization = " << format_double(curve.normalization) << "\n";
  out << "tau_s,counts\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << format_double(curve.tau_bins[i]) << ","
        << format_double(curve.counts[i]) << "\n";
  if (!out) throw ValidationError("write failed on '" + path + "'");
}

std::vector<PleScan> load_ple_scans(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;
  if (i >= lines.size() || trim(lines[i]) != "scan_id,freq_hz,counts")
    fail_at(path, i + 1, "expected header 'scan_id,freq_hz,counts'");
  ++i;

  std::map<long, std::vector<std::pair<double, double>>> groups;
  std::size_t rows = 0;
  for (; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != 3)
      fail_at(path, i + 1, "expected 3 columns, got " +
                               std::to_string(fields.size()));
    const long id = parse_long_at(fields[0], path, i + 1, "scan_id");
    const double freq = parse_double_at(fields[1], path, i + 1, "freq_hz");
    const double cnt = parse_double_at(fields[2], path, i + 1, "counts");
    if (!(cnt >= 0.0)) fail_at(path, i + 1, "negative counts " + fields[2]);
    groups[id].emplace_back(freq, cnt);
    ++rows;
  }
  if (rows == 0) throw ValidationError(path + ": no scan rows");

  std::vector<PleScan> scans;
  for (auto& [id, pts] : groups) {
    // counts as sorting tiebreaker so shuffled files load identically
    std::sort(pts.begin(), pts.end());
    PleScan scan;
    scan.id = static_cast<int>(id);
    for (const auto& [freq, cnt] : pts) {
      scan.freq_hz.push_back(freq);
      scan.counts.push_back(cnt);
    }
    scans.push_back(std::move(scan));
  }
  return scans;
}

std::vector<std::vector<double>> load_numeric_csv(
    const std::string& path, const std::vector<std::string>& columns,
    std::size_t min_columns) {
  const std::vector<std::string> lines = read_lines(path);
  std::size_t i = 0;
  while (i < lines.size() && trim(lines[i]).empty()) ++i;

  std::string expected;
  for (std::size_t c = 0; c < columns.size(); ++c)
    expected += (c ? "," : "") + columns[c];
  if (i >= lines.size())
    fail_at(path, i + 1, "expected header '" + expected + "'");
  const std::vector<std::string> header = split_fields(trim(lines[i]));
  if (header.size() < min_columns || header.size() > columns.size())
    fail_at(path, i + 1, "expected header '" + expected + "'" +
                             (min_columns < columns.size()
                                  ? " (trailing columns optional)"
                                  : ""));
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] != columns[c])
      fail_at(path, i + 1, "column " + std::to_string(c + 1) + " must be '" +
                               columns[c] + "', got '" + header[c] + "'");
  const std::size_t arity = header.size();
  ++i;

  std::vector<std::vector<double>> cols(columns.size());
  std::size_t rows = 0;
  for (; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != arity)
      fail_at(path, i + 1, "expected " + std::to_string(arity) +
                               " columns, got " +
                               std::to_string(fields.size()));
    for (std::size_t c = 0; c < arity; ++c)
      cols[c].push_back(parse_double_at(fields[c], path, i + 1, columns[c]));
    ++rows;
  }
  if (rows == 0) throw ValidationError(path + ": no data rows");
  return cols;
}

PowerSeries load_power_series_csv(const std::string& path,
                                  double temperature) {
  const auto cols = load_numeric_csv(
      path,
      {"power_w", "omega_hz", "omega_sigma_hz", "gamma_perp_hz",
       "gamma_perp_sigma_hz"},
      5);
  PowerSeries series;
  series.temperature = temperature;
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    PowerEntry e;
    e.power = cols[0][i];
    e.omega = to_angular(cols[1][i]);
    e.omega_sigma = to_angular(cols[2][i]);
    e.gamma_perp = to_angular(cols[3][i]);
    e.gamma_perp_sigma = to_angular(cols[4][i]);
    series.entries.push_back(e);
  }
  std::sort(series.entries.begin(), series.entries.end(),
            [](const PowerEntry& a, const PowerEntry& b) {
              return a.power < b.power;
            });
  for (std::size_t i = 1; i < series.entries.size(); ++i)
    if (!(series.entries[i].power > series.entries[i - 1].power))
      throw ValidationError(
          path + ": duplicate power " +
          format_double(series.entries[i].power) +
          " W; powers must be distinct");
  return series;
}

namespace {

constexpr char kTimeTagMagic[8] = {'R', 'K', 'T', 'T', '0', '0', '0', '1'};

static_assert(std::numeric_limits<double>::is_iec559,
              "time-tag format requires IEEE-754 doubles");

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double v) {
  put_u64le(out, std::bit_cast<std::uint64_t>(v));
}

std::uint64_t get_u64le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
    v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

double get_f64le(const char* p) {
  return std::bit_cast<double>(get_u64le(p));
}

}  // namespace

void save_time_tags(const std::string& path, const PhotonStream& stream) {
  validate(stream);
  std::string buf;
  buf.reserve(32 + 8 * stream.arrival_times.size());
  buf.append(kTimeTagMagic, sizeof kTimeTagMagic);
  put_f64le(buf, stream.total_duration);
  put_u64le(buf, stream.seed);
  put_u64le(buf, static_cast<std::uint64_t>(stream.arrival_times.size()));
  for (double t : stream.arrival_times) put_f64le(buf, t);
  std::ofstream out = open_for_write(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ValidationError("write failed on '" + path + "'");
}

PhotonStream load_time_tags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 32)
    throw ValidationError(path + ": truncated time-tag file (" +
                          std::to_string(buf.size()) + " bytes)");
  if (std::memcmp(buf.data(), kTimeTagMagic, sizeof kTimeTagMagic) != 0)
    throw ValidationError(path + ": not a time-tag file (bad magic)");
  PhotonStream stream;
  stream.total_duration = get_f64le(buf.data() + 8);
  stream.seed = get_u64le(buf.data() + 16);
  const std::uint64_t count = get_u64le(buf.data() + 24);
  const std::uint64_t payload = buf.size() - 32;
  if (payload != 8 * count)
    throw ValidationError(
        path + ": record count " + std::to_string(count) +
        " does not match payload of " + std::to_string(payload) + " bytes");
  stream.arrival_times.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    stream.arrival_times[i] = get_f64le(buf.data() + 32 + 8 * i);
  try {
    validate(stream);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return stream;
}

void save_plot_csv(const std::string& path, const PlotData& plot) {
  const std::size_t n = plot.x.size();
  if (plot.y.size() != n || plot.band_lo.size() != n ||
      plot.band_hi.size() != n)
    throw ValidationError("plot data columns must have equal length");
  std::ofstream out = open_for_write(path);
  out << "x,y,band_lo,band_hi\n";
  for (std::size_t i = 0; i < n; ++i)
    out << format_double(plot.x[i]) << "," << format_double(plot.y[i]) << ","
        << format_double(plot.band_lo[i]) << ","
        << format_double(plot.band_hi[i]) << "\n";
  if (!out) throw ValidationError("write failed on '" + path + "'");
}

PlotData load_plot_csv(const std::string& path) {
  const auto cols =
      load_numeric_csv(path, {"x", "y", "band_lo", "band_hi"}, 4);
  return PlotData{cols[0], cols[1], cols[2], cols[3]};
}

namespace {

// SVG coordinates rounded to 0.01 px so the output is compact and stable
std::string px(double v) {
  return format_double(std::round(v * 100.0) / 100.0);
}

void xml_escape_into(std::string& out, const std::string& s) {
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
}

}  // namespace

void save_plot_svg(const std::string& path, const PlotData& plot,
                   const std::string& title) {
  const std::size_t n = plot.x.size();
  if (plot.y.size() != n || plot.band_lo.size() != n ||
      plot.band_hi.size() != n)
    throw ValidationError("plot data columns must have equal length");
  if (n == 0) throw ValidationError("cannot render an empty plot");

  const double kw = 720.0, kh = 440.0;
  const double ml = 78.0, mr = 20.0, mt = 36.0, mb = 46.0;
  const double pw = kw - ml - mr, ph = kh - mt - mb;

  double x0 = plot.x[0], x1 = plot.x[0];
  double y0 = plot.y[0], y1 = plot.y[0];
  for (std::size_t i = 0; i < n; ++i) {
    x0 = std::min(x0, plot.x[i]);
    x1 = std::max(x1, plot.x[i]);
    y0 = std::min({y0, plot.y[i], plot.band_lo[i]});
    y1 = std::max({y1, plot.y[i], plot.band_hi[i]});
  }
  if (!(x1 > x0)) {
    const double pad = std::max(0.5, std::fabs(x0) * 0.1);
    x0 -= pad;
    x1 += pad;
  }
  double ypad = 0.05 * (y1 - y0);
  if (!(ypad > 0.0)) ypad = y1 != 0.0 ? 0.1 * std::fabs(y1) : 1.0;
  y0 -= ypad;
  y1 += ypad;

  const auto sx = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  const auto sy = [&](double v) {
    return mt + ph - (v - y0) / (y1 - y0) * ph;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" "
         "height=\"440\" viewBox=\"0 0 720 440\">\n";
  svg += "<rect width=\"720\" height=\"440\" fill=\"white\"/>\n";
  svg += "<text x=\"360\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">";
  xml_escape_into(svg, title);
  svg += "</text>\n";

  bool has_band = false;
  for (std::size_t i = 0; i < n; ++i)
    if (plot.band_lo[i] != plot.band_hi[i]) has_band = true;
  if (has_band && n >= 2) {
    svg += "<polygon fill=\"#aec7e8\" fill-opacity=\"0.6\" points=\"";
    for (std::size_t i = 0; i < n; ++i)
      svg += px(sx(plot.x[i])) + "," + px(sy(plot.band_lo[i])) + " ";
    for (std::size_t i = n; i-- > 0;)
      svg += px(sx(plot.x[i])) + "," + px(sy(plot.band_hi[i])) +
             (i ? " " : "");
    svg += "\"/>\n";
  }
  if (n >= 2) {
    svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" "
           "points=\"";
    for (std::size_t i = 0; i < n; ++i)
      svg += px(sx(plot.x[i])) + "," + px(sy(plot.y[i])) +
             (i + 1 < n ? " " : "");
    svg += "\"/>\n";
  } else {
    svg += "<circle cx=\"" + px(sx(plot.x[0])) + "\" cy=\"" +
           px(sy(plot.y[0])) + "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }

  // axes with min/max labels
  svg += "<line x1=\"" + px(ml) + "\" y1=\"" + px(mt + ph) + "\" x2=\"" +
         px(ml + pw) + "\" y2=\"" + px(mt + ph) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + px(ml) + "\" y1=\"" + px(mt) + "\" x2=\"" + px(ml) +
         "\" y2=\"" + px(mt + ph) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<text x=\"" + px(ml) + "\" y=\"" + px(kh - 18.0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" +
         format_double(x0) + "</text>\n";
  svg += "<text x=\"" + px(ml + pw) + "\" y=\"" + px(kh - 18.0) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"12\">" +
         format_double(x1) + "</text>\n";
  svg += "<text x=\"" + px(ml - 6.0) + "\" y=\"" + px(mt + ph) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"12\">" +
         format_double(y0) + "</text>\n";
  svg += "<text x=\"" + px(ml - 6.0) + "\" y=\"" + px(mt + 12.0) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" "
         "font-size=\"12\">" +
         format_double(y1) + "</text>\n";
  svg += "</svg>\n";

  std::ofstream out = open_for_write(path);
  out << svg;
  if (!out) throw ValidationError("write failed on '" + path + "'");
}

}  // namespace rabikit
