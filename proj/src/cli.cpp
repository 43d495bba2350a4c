#include "rabikit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rabikit/bloch.hpp"
#include "rabikit/classifier.hpp"
#include "rabikit/diffusion.hpp"
#include "rabikit/dynamics.hpp"
#include "rabikit/errors.hpp"
#include "rabikit/fitting.hpp"
#include "rabikit/io.hpp"
#include "rabikit/models.hpp"
#include "rabikit/montecarlo.hpp"
#include "rabikit/units.hpp"
#include "schema_data.hpp"

namespace rabikit {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------
// schema checking (draft-07 subset)

namespace {

bool type_matches(const json& doc, const std::string& t) {
  if (t == "object") return doc.is_object();
  if (t == "array") return doc.is_array();
  if (t == "string") return doc.is_string();
  if (t == "boolean") return doc.is_boolean();
  if (t == "integer") return doc.is_number_integer();
  if (t == "number") return doc.is_number();
  if (t == "null") return doc.is_null();
  return false;
}

void check_node(const json& schema, const json& doc, const std::string& at);

bool satisfies(const json& schema, const json& doc) {
  try {
    check_node(schema, doc, "");
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

void check_node(const json& schema, const json& doc, const std::string& at) {
  const std::string here = at.empty() ? "(root)" : at;
  if (schema.contains("const") && doc != schema["const"])
    throw ValidationError(here + ": must equal " + schema["const"].dump());
  if (schema.contains("enum")) {
    bool ok = false;
    for (const json& v : schema["enum"])
      if (doc == v) ok = true;
    if (!ok)
      throw ValidationError(here + ": " + doc.dump() + " not in " +
                            schema["enum"].dump());
  }
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok;
    if (t.is_array()) {
      ok = false;
      for (const json& alt : t)
        if (type_matches(doc, alt.get<std::string>())) ok = true;
    } else {
      ok = type_matches(doc, t.get<std::string>());
    }
    if (!ok)
      throw ValidationError(here + ": expected type " + t.dump());
  }
  if (doc.is_object()) {
    if (schema.contains("required"))
      for (const json& k : schema["required"])
        if (!doc.contains(k.get<std::string>()))
          throw ValidationError(here + ": missing required key '" +
                                k.get<std::string>() + "'");
    if (schema.contains("properties"))
      for (const auto& [key, sub] : schema["properties"].items())
        if (doc.contains(key)) check_node(sub, doc[key], at + "/" + key);
    if (schema.contains("additionalProperties") &&
        schema["additionalProperties"].is_boolean() &&
        !schema["additionalProperties"].get<bool>()) {
      for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (!schema.contains("properties") ||
            !schema["properties"].contains(key))
          throw ValidationError(here + ": unexpected key '" + key + "'");
      }
    }
  }
  if (doc.is_array()) {
    if (schema.contains("minItems") &&
        doc.size() < schema["minItems"].get<std::size_t>())
      throw ValidationError(here + ": fewer than " +
                            schema["minItems"].dump() + " items");
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < doc.size(); ++i)
        check_node(schema["items"], doc[i], at + "/" + std::to_string(i));
    }
  }
  if (schema.contains("allOf"))
    for (const json& sub : schema["allOf"]) check_node(sub, doc, at);
  if (schema.contains("if") && satisfies(schema["if"], doc) &&
      schema.contains("then"))
    check_node(schema["then"], doc, at);
}

}  // namespace

const json& result_schema() {
  static const json schema = json::parse(detail::kResultSchemaJson);
  return schema;
}

void check_schema(const json& schema, const json& doc) {
  check_node(schema, doc, "");
}

// ---------------------------------------------------------------------
// command plumbing

namespace {

constexpr const char* kSchemaVersion = "rabikit-result/v1";

// Options shared across subcommands; flags override the config file.
struct Common {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::string label;

  std::optional<double> ftl_hz, gamma_hz, gamma_c_hz, omega_hz, delta_hz;
  std::optional<double> sigma_hz, mean_hz, jump_rate;
  std::optional<std::string> diffusion_kind;
};

Config effective_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : load_config(c.config_path);
  if (c.ftl_hz && c.gamma_hz)
    throw ValidationError(
        "--ftl-hz and --gamma-hz are two sources for the same decay rate; "
        "pass one");
  if (c.ftl_hz) {
    cfg.ftl_hz = *c.ftl_hz;
    cfg.gamma_hz.reset();
  }
  if (c.gamma_hz) {
    cfg.gamma_hz = *c.gamma_hz;
    cfg.ftl_hz.reset();
  }
  if (c.gamma_c_hz) cfg.gamma_c_hz = *c.gamma_c_hz;
  if (c.omega_hz) cfg.omega_hz = *c.omega_hz;
  if (c.delta_hz) cfg.delta_hz = *c.delta_hz;
  if (c.sigma_hz) cfg.diffusion_sigma_hz = *c.sigma_hz;
  if (c.mean_hz) cfg.diffusion_mean_hz = *c.mean_hz;
  if (c.jump_rate) cfg.jump_rate = *c.jump_rate;
  if (c.diffusion_kind)
    cfg.diffusion_kind = *c.diffusion_kind == "jump_process"
                             ? DiffusionKind::jump_process
                             : DiffusionKind::frozen_gaussian;
  if (c.seed) cfg.seed = *c.seed;
  validate(cfg);
  return cfg;
}

fs::path resolve_output_dir(const Common& c, const Config& cfg) {
  std::string dir = cfg.output_dir;
  if (const char* env = std::getenv("RABIKIT_OUTPUT_DIR"))
    if (*env) dir = env;
  if (c.output_dir) dir = *c.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw ValidationError("cannot create output directory '" + dir +
                          "': " + ec.message());
  return dir;
}

double need_omega(const Config& cfg) {
  if (cfg.omega_hz) return to_angular(*cfg.omega_hz);
  throw ValidationError(
      "no drive strength configured: set emitter.omega_hz or pass "
      "--omega-hz");
}

std::uint64_t need_seed(const Config& cfg, const std::string& command) {
  if (cfg.seed) return *cfg.seed;
  throw ValidationError(command +
                        ": a random seed is required; set 'seed' in the "
                        "config or pass --seed");
}

EmitterParams emitter_from(const Config& cfg) {
  EmitterParams p;
  p.gamma = config_gamma(cfg);
  p.gamma_c = to_angular(cfg.gamma_c_hz);
  p.omega = cfg.omega_hz ? to_angular(*cfg.omega_hz) : 0.0;
  p.delta = to_angular(cfg.delta_hz);
  return p;
}

// Ordinary-frequency decay rate as configured, before the angular round trip
// (an FTL linewidth and a decay rate in Hz are the same number).
double config_gamma_hz(const Config& cfg) {
  if (cfg.ftl_hz) return *cfg.ftl_hz;
  if (cfg.gamma_hz) return *cfg.gamma_hz;
  return 0.0;  // callers establish a source via config_gamma first
}

ordered_json emitter_block(const Config& cfg, const EmitterParams& p) {
  return ordered_json{{"gamma_hz", config_gamma_hz(cfg)},
                      {"gamma_c_hz", cfg.gamma_c_hz},
                      {"omega_hz", cfg.omega_hz ? *cfg.omega_hz
                                                : to_ordinary(p.omega)},
                      {"delta_hz", cfg.delta_hz}};
}

const char* damping_name(DampingRegime r) {
  switch (r) {
    case DampingRegime::oscillatory:
      return "oscillatory";
    case DampingRegime::critically_damped:
      return "critically_damped";
    case DampingRegime::overdamped:
      return "overdamped";
  }
  return "oscillatory";
}

const char* driving_name(DrivingRegime r) {
  switch (r) {
    case DrivingRegime::fully_coherent_pi_capable:
      return "fully_coherent_pi_capable";
    case DrivingRegime::coherent_pi2_only:
      return "coherent_pi2_only";
    case DrivingRegime::incoherent_underdamped:
      return "incoherent_underdamped";
    case DrivingRegime::overdamped:
      return "overdamped";
  }
  return "overdamped";
}

void announce(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

void write_result(const fs::path& dir, const std::string& label,
                  const ordered_json& doc) {
  check_schema(result_schema(), doc);  // belt and braces before emitting
  const fs::path path = dir / (label + ".json");
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw ValidationError("write failed on '" + path.string() + "'");
  announce(path);
}

void write_plot(const fs::path& dir, const std::string& name,
                const PlotData& plot) {
  const fs::path path = dir / name;
  save_plot_csv(path.string(), plot);
  announce(path);
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

// Confidence band of a fitted model on an arbitrary grid by first-order
// propagation of the fit covariance through a central-difference Jacobian.
PlotData model_band_on_grid(const std::string& model_name,
                            const FitResult& res,
                            const std::vector<double>& grid,
                            double sigma_level) {
  const FitModel& model = fit_model(model_name);
  const std::size_t n = grid.size();
  const Eigen::Index np = res.params.size();
  std::vector<double> y(n), yp(n), ym(n);
  model.eval(grid, res.params, y);
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n), np);
  for (Eigen::Index k = 0; k < np; ++k) {
    if (res.covariance(k, k) == 0.0) {  // fixed or pinned parameter
      J.col(k).setZero();
      continue;
    }
    double h = 6e-6 * std::fabs(res.params[k]);
    if (h == 0.0) h = 6e-6;
    Eigen::VectorXd p = res.params;
    p[k] = res.params[k] + h;
    model.eval(grid, p, yp);
    p[k] = res.params[k] - h;
    model.eval(grid, p, ym);
    for (std::size_t i = 0; i < n; ++i)
      J(static_cast<Eigen::Index>(i), k) = (yp[i] - ym[i]) / (2.0 * h);
  }
  PlotData plot;
  plot.x = grid;
  plot.y = y;
  plot.band_lo.resize(n);
  plot.band_hi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const double var = (J.row(ii) * res.covariance * J.row(ii).transpose())(0);
    const double half = sigma_level * std::sqrt(std::max(var, 0.0));
    plot.band_lo[i] = y[i] - half;
    plot.band_hi[i] = y[i] + half;
  }
  return plot;
}

// ---------------------------------------------------------------------
// subcommands

struct SimulateG2Opts {
  double tau_max = 0.0;
  int points = 400;
};

void run_simulate_g2(const Common& common, const SimulateG2Opts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);
  if (!(opt.tau_max > 0.0) || !std::isfinite(opt.tau_max))
    throw ValidationError("--tau-max must be positive");
  if (opt.points < 2) throw ValidationError("--points must be at least 2");

  EmitterParams p = emitter_from(cfg);
  p.omega = need_omega(cfg);
  validate(p);
  const DetuningDistribution dist{to_angular(cfg.diffusion_sigma_hz),
                                  to_angular(cfg.diffusion_mean_hz)};
  const std::vector<double> taus = linspace(0.0, opt.tau_max, opt.points);

  std::vector<double> g2;
  if (dist.sigma > 0.0) {
    g2 = g2_diffused_grid(p, dist, taus, cfg.quadrature);
  } else {
    EmitterParams shifted = p;
    shifted.delta += dist.mean;  // a pure offset is just extra detuning
    g2.resize(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i)
      g2[i] = g2_detuned(shifted, taus[i]);
  }

  const std::string label = common.label.empty() ? "simulate-g2" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "simulate-g2";
  doc["config"] = emitter_block(cfg, p);
  doc["config"]["diffusion_sigma_hz"] = cfg.diffusion_sigma_hz;
  doc["config"]["diffusion_mean_hz"] = cfg.diffusion_mean_hz;
  if (dist.sigma > 0.0)
    doc["config"]["quadrature"] = ordered_json{
        {"scheme", cfg.quadrature.scheme == QuadratureScheme::gauss_hermite
                       ? "gauss_hermite"
                       : "adaptive_trapezoid"},
        {"nodes", cfg.quadrature.node_count},
        {"range_sigmas", cfg.quadrature.range_sigmas}};
  doc["config"]["frequency_unit"] = cfg.frequency_unit;
  doc["inputs"] =
      ordered_json{{"tau_max_s", opt.tau_max}, {"points", opt.points}};
  doc["results"] = ordered_json{
      {"tau_s", taus},
      {"g2", g2},
      {"regime", damping_name(lambda_pair(p).regime)},
      {"gamma_perp_hz", to_ordinary(gamma_perp(p))},
      {"effective_rabi_hz", to_ordinary(effective_rabi(p))}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv", PlotData{taus, g2, g2, g2});
  write_result(dir, label, doc);
}

struct SimulatePulseOpts {
  double duration = 0.0;
  std::optional<double> peak_omega_hz;
  double rise_time = 0.0;
  std::string shape = "ideal_square";
  std::optional<double> t_max;
  int points = 400;
};

void run_simulate_pulse(const Common& common, const SimulatePulseOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);
  if (opt.points < 2) throw ValidationError("--points must be at least 2");

  EmitterParams p = emitter_from(cfg);
  validate(p);

  PulseEnvelope env;
  env.duration = opt.duration;
  env.rise_time = opt.rise_time;
  env.shape = opt.shape == "exponential_rise" ? PulseShape::exponential_rise
                                              : PulseShape::ideal_square;
  if (opt.peak_omega_hz)
    env.peak_omega = to_angular(*opt.peak_omega_hz);
  else
    env.peak_omega = need_omega(cfg);
  validate(env);

  const double t_max =
      opt.t_max ? *opt.t_max : env.duration + 5.0 / p.gamma;
  if (!(t_max > 0.0) || !std::isfinite(t_max))
    throw ValidationError("--t-max must be positive");
  const std::vector<double> grid = linspace(0.0, t_max, opt.points);

  const std::vector<BlochState> states =
      evolve_pulse(p, env, grid, cfg.solver);
  std::vector<double> rho_ee(states.size()), rho_eg_abs(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    rho_ee[i] = states[i].rho_ee;
    rho_eg_abs[i] = std::abs(states[i].rho_eg);
  }

  EmitterParams steady = p;
  steady.omega = env.peak_omega;

  const std::string label =
      common.label.empty() ? "simulate-pulse" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "simulate-pulse";
  doc["config"] = emitter_block(cfg, p);
  doc["config"]["solver"] = ordered_json{{"rtol", cfg.solver.rtol},
                                         {"atol", cfg.solver.atol},
                                         {"invariant_tol",
                                          cfg.solver.invariant_tol}};
  doc["config"]["frequency_unit"] = cfg.frequency_unit;
  doc["inputs"] = ordered_json{
      {"duration_s", env.duration},
      {"rise_time_s", env.rise_time},
      {"shape", env.shape == PulseShape::exponential_rise
                    ? "exponential_rise"
                    : "ideal_square"},
      {"peak_omega_hz", opt.peak_omega_hz ? *opt.peak_omega_hz : *cfg.omega_hz},
      {"t_max_s", t_max},
      {"points", opt.points}};
  doc["results"] = ordered_json{
      {"t_s", grid},
      {"rho_ee", rho_ee},
      {"rho_eg_abs", rho_eg_abs},
      {"driven_steady_state_rho_ee", emission_rate(steady)}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv",
             PlotData{grid, rho_ee, rho_ee, rho_ee});
  write_result(dir, label, doc);
}

struct SimulateStreamOpts {
  double duration = 0.0;
  double efficiency = 1.0;
  double background_cps = 0.0;
};

void run_simulate_stream(const Common& common, const SimulateStreamOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  EmitterParams p = emitter_from(cfg);
  p.omega = need_omega(cfg);
  validate(p);
  DiffusionProcess proc;
  proc.kind = cfg.diffusion_kind;
  proc.sigma = to_angular(cfg.diffusion_sigma_hz);
  proc.jump_rate = cfg.jump_rate;
  proc.seed = need_seed(cfg, "simulate-stream");

  const PhotonStream stream =
      simulate_stream(p, proc, opt.duration, opt.efficiency,
                      opt.background_cps);

  // detected rate in coarse time chunks, Poisson one-sigma band
  const int n_chunks = 50;
  const double dt = stream.total_duration / n_chunks;
  std::vector<double> chunk_counts(n_chunks, 0.0);
  for (double t : stream.arrival_times) {
    int k = static_cast<int>(t / dt);
    chunk_counts[static_cast<std::size_t>(std::clamp(k, 0, n_chunks - 1))] +=
        1.0;
  }
  PlotData plot;
  for (int k = 0; k < n_chunks; ++k) {
    const double n = chunk_counts[static_cast<std::size_t>(k)];
    plot.x.push_back((k + 0.5) * dt);
    plot.y.push_back(n / dt);
    plot.band_lo.push_back(std::max(0.0, n - std::sqrt(n)) / dt);
    plot.band_hi.push_back((n + std::sqrt(n)) / dt);
  }

  const std::string label =
      common.label.empty() ? "simulate-stream" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "simulate-stream";
  doc["config"] = emitter_block(cfg, p);
  doc["config"]["diffusion"] = ordered_json{
      {"kind", proc.kind == DiffusionKind::jump_process ? "jump_process"
                                                        : "frozen_gaussian"},
      {"sigma_hz", cfg.diffusion_sigma_hz},
      {"jump_rate", proc.jump_rate}};
  doc["config"]["seed"] = proc.seed;
  doc["config"]["frequency_unit"] = cfg.frequency_unit;
  doc["inputs"] = ordered_json{{"duration_s", opt.duration},
                               {"detection_efficiency", opt.efficiency},
                               {"background_cps", opt.background_cps}};
  doc["results"] = ordered_json{
      {"n_photons", stream.arrival_times.size()},
      {"duration_s", stream.total_duration},
      {"detected_rate_cps", static_cast<double>(stream.arrival_times.size()) /
                                stream.total_duration}};
  if (proc.sigma == 0.0)
    doc["results"]["expected_rate_cps"] =
        p.gamma * emission_rate(p) * opt.efficiency + opt.background_cps;
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})},
                   {"data", ordered_json::array({label + ".ttag"})}};

  save_time_tags((dir / (label + ".ttag")).string(), stream);
  announce(dir / (label + ".ttag"));
  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct CorrelateOpts {
  std::string input;
  double bin_width = 0.0;
  double max_tau = 0.0;
};

void run_correlate(const Common& common, const CorrelateOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const PhotonStream stream = load_time_tags(opt.input);
  const CorrelationCurve curve =
      correlate(stream, opt.bin_width, opt.max_tau);

  PlotData plot;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double g2 = curve.g2_at(i);
    const double err =
        curve.normalization * std::sqrt(std::max(curve.counts[i], 1.0));
    plot.x.push_back(curve.tau_bins[i]);
    plot.y.push_back(g2);
    plot.band_lo.push_back(g2 - err);
    plot.band_hi.push_back(g2 + err);
  }

  const std::string label = common.label.empty() ? "correlate" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "correlate";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"input", fs::path(opt.input).filename().string()},
      {"bin_width_s", opt.bin_width},
      {"max_tau_s", opt.max_tau}};
  doc["results"] = ordered_json{
      {"n_photons", stream.arrival_times.size()},
      {"n_bins", curve.size()},
      {"bin_width_s", curve.bin_width},
      {"max_tau_s", opt.max_tau},
      {"normalization", curve.normalization}};
  doc["artifacts"] = ordered_json{
      {"plots", ordered_json::array({label + ".plot.csv"})},
      {"data", ordered_json::array({label + ".correlation.csv"})}};

  save_correlation_csv((dir / (label + ".correlation.csv")).string(), curve);
  announce(dir / (label + ".correlation.csv"));
  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct FitG2Opts {
  std::string input;
  std::optional<double> omega_guess_hz;
  std::optional<double> gamma_c_guess_hz;
};

void run_fit_g2(const Common& common, const FitG2Opts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const CorrelationCurve curve = load_correlation_csv(opt.input);
  const double gamma = config_gamma(cfg);
  const double sigma = to_angular(cfg.diffusion_sigma_hz);
  std::optional<double> w0, g0;
  if (opt.omega_guess_hz) w0 = to_angular(*opt.omega_guess_hz);
  if (opt.gamma_c_guess_hz) g0 = to_angular(*opt.gamma_c_guess_hz);

  const G2Fit res = fit_g2(curve, gamma, sigma, w0, g0);
  const FitResult& fit = res.fit;

  // fitted curve on the data abscissae with the propagated band
  const FitModel& model =
      fit_model(sigma > 0.0 ? "g2_diffused" : "g2_resonant");
  std::vector<double> y(fit.band.x.size());
  model.eval(fit.band.x, fit.params, y);
  PlotData plot{fit.band.x, y, fit.band.lo, fit.band.hi};

  const double gperp = 0.5 * gamma + fit.value("gamma_c");

  const std::string label = common.label.empty() ? "fit-g2" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "fit-g2";
  doc["config"] = ordered_json{{"gamma_hz", config_gamma_hz(cfg)},
                               {"diffusion_sigma_hz", cfg.diffusion_sigma_hz},
                               {"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"input", fs::path(opt.input).filename().string()},
      {"n_bins", curve.size()}};
  if (opt.omega_guess_hz) doc["inputs"]["omega_guess_hz"] = *opt.omega_guess_hz;
  if (opt.gamma_c_guess_hz)
    doc["inputs"]["gamma_c_guess_hz"] = *opt.gamma_c_guess_hz;
  doc["results"] = ordered_json{
      {"omega_hz", to_ordinary(fit.value("omega"))},
      {"omega_sigma_hz", to_ordinary(fit.sigma("omega"))},
      {"gamma_c_hz", to_ordinary(fit.value("gamma_c"))},
      {"gamma_c_sigma_hz", to_ordinary(fit.sigma("gamma_c"))},
      {"gamma_perp_hz", to_ordinary(gperp)},
      {"gamma_perp_sigma_hz", to_ordinary(fit.sigma("gamma_c"))},
      {"scale", fit.value("scale")},
      {"scale_sigma", fit.sigma("scale")},
      {"regime", damping_name(res.regime)},
      {"pinned_dephasing_floor", res.pinned_dephasing_floor},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"residual_norm", fit.residual_norm},
      {"dof", fit.dof},
      {"band_sigma_level", fit.band.sigma_level}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct FitLinewidthOpts {
  std::string input;
  std::string shape;
};

void run_fit_linewidth(const Common& common, const FitLinewidthOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const std::vector<PleScan> scans = load_ple_scans(opt.input);
  const LineShape shape =
      opt.shape == "gaussian" ? LineShape::gaussian : LineShape::lorentzian;
  const LinewidthSummary summary = histogram_line_fit(scans, shape);

  const std::string label =
      common.label.empty() ? "fit-linewidth" : common.label;

  // per-scan widths are always available; the center-histogram band only
  // when the sample was large enough to fit one
  PlotData widths;
  for (std::size_t i = 0; i < summary.scan_fwhm.size(); ++i) {
    widths.x.push_back(static_cast<double>(i));
    widths.y.push_back(summary.scan_fwhm[i]);
    widths.band_lo.push_back(summary.scan_fwhm[i]);
    widths.band_hi.push_back(summary.scan_fwhm[i]);
  }
  ordered_json plots = ordered_json::array({label + ".plot.csv"});

  const FitResult& hist = summary.center_histogram_fit;
  const bool has_hist = !hist.band.x.empty();
  PlotData centers;
  if (has_hist) {
    std::vector<double> y(hist.band.x.size());
    fit_model("gaussian").eval(hist.band.x, hist.params, y);
    centers = PlotData{hist.band.x, y, hist.band.lo, hist.band.hi};
    plots.push_back(label + ".centers.plot.csv");
  }

  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "fit-linewidth";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"input", fs::path(opt.input).filename().string()},
      {"shape", opt.shape}};
  doc["results"] = ordered_json{
      {"n_scans", scans.size()},
      {"dark_scans", summary.dark_scans},
      {"mean_single_fwhm_hz", summary.mean_single_fwhm},
      {"mean_single_fwhm_sigma_hz", summary.mean_single_fwhm_sigma},
      {"inhom_fwhm_hz", summary.inhom_fwhm},
      {"inhom_fwhm_sigma_hz", summary.inhom_fwhm_sigma},
      {"scan_center_hz", summary.scan_center},
      {"scan_fwhm_hz", summary.scan_fwhm}};
  if (has_hist)
    doc["results"]["center_fit"] = ordered_json{
        {"amplitude", hist.value("amplitude")},
        {"center_hz", hist.value("center")},
        {"center_sigma_hz", hist.sigma("center")},
        {"fwhm_hz", hist.value("fwhm")},
        {"fwhm_sigma_hz", hist.sigma("fwhm")},
        {"offset", hist.value("offset")},
        {"converged", hist.converged}};
  doc["artifacts"] = ordered_json{{"plots", plots}};

  write_plot(dir, label + ".plot.csv", widths);
  if (has_hist) write_plot(dir, label + ".centers.plot.csv", centers);
  write_result(dir, label, doc);
}

struct FitSaturationOpts {
  std::string input;
};

void run_fit_saturation(const Common& common, const FitSaturationOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const auto cols = load_numeric_csv(
      opt.input, {"power_w", "counts_per_s", "sigma"}, 2);
  const std::vector<double>& power = cols[0];
  const std::vector<double>& counts = cols[1];

  double i0 = *std::max_element(counts.begin(), counts.end());
  if (!(i0 > 0.0)) i0 = 1.0;
  double p0 = 0.0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (counts[i] >= 0.5 * i0 && power[i] > 0.0) {
      p0 = power[i];
      break;
    }
  }
  if (p0 == 0.0) {
    const double pmax = *std::max_element(power.begin(), power.end());
    p0 = pmax > 0.0 ? 0.5 * pmax : 1.0;
  }

  FitProblem problem;
  problem.model = "saturation";
  problem.x = power;
  problem.y = counts;
  problem.y_sigma = cols[2];
  problem.initial_guess = Eigen::Vector2d(i0, p0);
  const FitResult fit = rabikit::fit(problem);

  std::vector<double> y(fit.band.x.size());
  fit_model("saturation").eval(fit.band.x, fit.params, y);
  PlotData plot{fit.band.x, y, fit.band.lo, fit.band.hi};

  const std::string label =
      common.label.empty() ? "fit-saturation" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "fit-saturation";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"input", fs::path(opt.input).filename().string()},
      {"n_points", power.size()}};
  doc["results"] = ordered_json{{"i_inf", fit.value("i_inf")},
                                {"i_inf_sigma", fit.sigma("i_inf")},
                                {"p_sat_w", fit.value("p_sat")},
                                {"p_sat_sigma_w", fit.sigma("p_sat")},
                                {"converged", fit.converged},
                                {"iterations", fit.iterations},
                                {"residual_norm", fit.residual_norm},
                                {"dof", fit.dof}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct DiffusionRateOpts {
  double ul = 0.0;      // scan speed, Hz/s
  double ftl = 0.0;     // transform-limited linewidth, Hz
  double single = 0.0;  // single-scan linewidth, Hz
};

void run_diffusion_rate(const Common& common, const DiffusionRateOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const double rate = diffusion_rate(opt.ul, opt.ftl, opt.single);

  // sensitivity of the bound to the measured single-scan width
  PlotData plot;
  for (double f : linspace(0.8, 1.2, 41)) {
    plot.x.push_back(f * opt.single);
    plot.y.push_back(diffusion_rate(opt.ul, opt.ftl, f * opt.single));
    plot.band_lo.push_back(plot.y.back());
    plot.band_hi.push_back(plot.y.back());
  }

  const std::string label =
      common.label.empty() ? "diffusion-rate" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "diffusion-rate";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{{"scan_speed_hz_per_s", opt.ul},
                               {"ftl_hz", opt.ftl},
                               {"single_scan_hz", opt.single}};
  doc["results"] = ordered_json{{"rate_hz", rate}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct GapClosingOpts {
  std::string down;
  std::string up;
  double sigma_level = 2.0;
};

FitResult fit_boltzmann_csv(const std::string& path) {
  const auto cols =
      load_numeric_csv(path, {"temperature_k", "value", "sigma"}, 2);
  const std::vector<double>& T = cols[0];
  const std::vector<double>& v = cols[1];
  for (double t : T)
    if (!(t > 0.0))
      throw ValidationError(path + ": temperatures must be positive");

  std::vector<std::size_t> order(T.size());
  for (std::size_t i = 0; i < T.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return T[a] < T[b]; });
  const double a0 = v[order.front()];
  double b0 = v[order.back()] - a0;
  if (b0 == 0.0) b0 = 0.5 * (*std::max_element(v.begin(), v.end()) -
                             *std::min_element(v.begin(), v.end()));
  if (b0 == 0.0) b0 = 1.0;
  const std::size_t mid = order[order.size() / 2];
  const double r = (v[mid] - a0) / b0;
  const double c0 = (r > 1e-9 && r < 0.999999)
                        ? -k_boltzmann * T[mid] * std::log(r)
                        : k_boltzmann * 30.0;

  FitProblem problem;
  problem.model = "boltzmann";
  problem.x = T;
  problem.y = v;
  problem.y_sigma = cols[2];
  problem.initial_guess = Eigen::Vector3d(a0, b0, c0);
  return fit(problem);
}

ordered_json boltzmann_block(const FitResult& fit) {
  return ordered_json{{"a", fit.value("A")},
                      {"a_sigma", fit.sigma("A")},
                      {"b", fit.value("B")},
                      {"b_sigma", fit.sigma("B")},
                      {"c_joule", fit.value("C")},
                      {"c_sigma_joule", fit.sigma("C")},
                      {"converged", fit.converged}};
}

void run_gap_closing(const Common& common, const GapClosingOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);
  if (!(opt.sigma_level > 0.0) || !std::isfinite(opt.sigma_level))
    throw ValidationError("--sigma-level must be positive");

  const FitResult fit_down = fit_boltzmann_csv(opt.down);
  const FitResult fit_up = fit_boltzmann_csv(opt.up);
  const TemperatureInterval interval =
      gap_closing_range(fit_down, fit_up, opt.sigma_level);

  const std::vector<double> grid = linspace(4.0, 300.0, 297);
  const PlotData plot_down =
      model_band_on_grid("boltzmann", fit_down, grid, opt.sigma_level);
  const PlotData plot_up =
      model_band_on_grid("boltzmann", fit_up, grid, opt.sigma_level);

  const std::string label =
      common.label.empty() ? "gap-closing" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "gap-closing";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"down", fs::path(opt.down).filename().string()},
      {"up", fs::path(opt.up).filename().string()},
      {"sigma_level", opt.sigma_level}};
  doc["results"] = ordered_json{{"empty", interval.empty},
                                {"lo_k", nullptr},
                                {"hi_k", nullptr},
                                {"down", boltzmann_block(fit_down)},
                                {"up", boltzmann_block(fit_up)}};
  if (!interval.empty) {
    doc["results"]["lo_k"] = interval.lo;
    doc["results"]["hi_k"] = interval.hi;
  }
  doc["artifacts"] = ordered_json{
      {"plots", ordered_json::array(
                    {label + ".down.plot.csv", label + ".up.plot.csv"})}};

  write_plot(dir, label + ".down.plot.csv", plot_down);
  write_plot(dir, label + ".up.plot.csv", plot_up);
  write_result(dir, label, doc);
}

struct ClassifyOpts {
  std::string input;
  double temperature_k = 0.0;
};

void run_classify(const Common& common, const ClassifyOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  const PowerSeries series =
      load_power_series_csv(opt.input, opt.temperature_k);
  const double gamma = config_gamma(cfg);
  const RegimeReport report = classify(series, gamma);

  PlotData plot;  // measured dephasing against drive, one-sigma bars
  for (const PowerEntry& e : series.entries) {
    plot.x.push_back(to_ordinary(e.omega));
    plot.y.push_back(to_ordinary(e.gamma_perp));
    plot.band_lo.push_back(to_ordinary(e.gamma_perp - e.gamma_perp_sigma));
    plot.band_hi.push_back(to_ordinary(e.gamma_perp + e.gamma_perp_sigma));
  }

  const std::string label = common.label.empty() ? "classify" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "classify";
  doc["config"] = ordered_json{{"gamma_hz", config_gamma_hz(cfg)},
                               {"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{
      {"input", fs::path(opt.input).filename().string()},
      {"temperature_k", opt.temperature_k},
      {"n_powers", series.entries.size()}};
  doc["results"] = ordered_json{
      {"temperature_k", report.temperature},
      {"slope_m", report.slope_m},
      {"slope_m_sigma", report.slope_m_sigma},
      {"offset_hz", to_ordinary(report.offset)},
      {"offset_sigma_hz", to_ordinary(report.offset_sigma)},
      {"offset_consistent_with_gamma_over_2",
       report.offset_consistent_with_gamma_over_2},
      {"regime", driving_name(report.regime)},
      {"rabi_slope_hz_per_sqrt_w", to_ordinary(report.rabi_slope)},
      {"rabi_slope_sigma_hz_per_sqrt_w",
       to_ordinary(report.rabi_slope_sigma)},
      {"class_probabilities",
       ordered_json{
           {"fully_coherent_pi_capable", report.class_probabilities[0]},
           {"coherent_pi2_only", report.class_probabilities[1]},
           {"incoherent_underdamped", report.class_probabilities[2]},
           {"overdamped", report.class_probabilities[3]}}}};
  doc["artifacts"] =
      ordered_json{{"plots", ordered_json::array({label + ".plot.csv"})}};

  write_plot(dir, label + ".plot.csv", plot);
  write_result(dir, label, doc);
}

struct ReportOpts {
  std::vector<std::string> inputs;
};

void run_report(const Common& common, const ReportOpts& opt) {
  const Config cfg = effective_config(common);
  const fs::path dir = resolve_output_dir(common, cfg);

  ordered_json runs = ordered_json::array();
  ordered_json svgs = ordered_json::array();
  ordered_json files = ordered_json::array();
  for (const std::string& input : opt.inputs) {
    std::ifstream in(input);
    if (!in) throw ValidationError("cannot open '" + input + "'");
    ordered_json doc;
    try {
      doc = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(input + ": not valid JSON (" +
                            std::string(e.what()) + ")");
    }
    try {
      check_schema(result_schema(), doc);
    } catch (const ValidationError& e) {
      throw ValidationError(input + ": not a result document: " + e.what());
    }

    const std::string base = fs::path(input).filename().string();
    files.push_back(base);
    runs.push_back(ordered_json{{"file", base},
                                {"command", doc["command"]},
                                {"results", doc["results"]}});

    for (const auto& plot_name : doc["artifacts"]["plots"]) {
      const fs::path plot_path =
          fs::path(input).parent_path() / plot_name.get<std::string>();
      if (!fs::exists(plot_path))
        throw ValidationError(input + ": missing plot artifact '" +
                              plot_path.string() + "'");
      const PlotData plot = load_plot_csv(plot_path.string());
      const std::string svg_name =
          fs::path(plot_name.get<std::string>()).stem().string() + ".svg";
      save_plot_svg((dir / svg_name).string(), plot,
                    doc["command"].get<std::string>() + ": " +
                        plot_name.get<std::string>());
      announce(dir / svg_name);
      svgs.push_back(svg_name);
    }
  }

  const std::string label = common.label.empty() ? "report" : common.label;
  ordered_json doc;
  doc["schema"] = kSchemaVersion;
  doc["command"] = "report";
  doc["config"] = ordered_json{{"frequency_unit", cfg.frequency_unit}};
  doc["inputs"] = ordered_json{{"files", files}};
  doc["results"] = ordered_json{{"runs", runs}};
  doc["artifacts"] = ordered_json{{"plots", svgs}};
  write_result(dir, label, doc);
}

}  // namespace

// ---------------------------------------------------------------------

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{
      "simulation, fitting, and classification toolkit for the optical "
      "coherence of a resonantly driven two-level emitter"};
  app.require_subcommand(1);

  Common common;
  app.add_option("--config", common.config_path,
                 "flat key = value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--output-dir", common.output_dir,
                 "artifact directory (overrides RABIKIT_OUTPUT_DIR and the "
                 "config)");
  app.add_option("--seed", common.seed, "random seed for stochastic commands");
  app.add_option("--label", common.label,
                 "output file stem (defaults to the subcommand name)");
  app.add_option("--ftl-hz", common.ftl_hz,
                 "transform-limited linewidth, Hz (decay rate source)");
  app.add_option("--gamma-hz", common.gamma_hz,
                 "decay rate as an ordinary frequency, Hz");
  app.add_option("--gamma-c-hz", common.gamma_c_hz, "pure dephasing rate, Hz");
  app.add_option("--omega-hz", common.omega_hz, "drive strength, Hz");
  app.add_option("--delta-hz", common.delta_hz, "laser detuning, Hz");
  app.add_option("--sigma-hz", common.sigma_hz,
                 "detuning diffusion width, Hz");
  app.add_option("--mean-hz", common.mean_hz,
                 "detuning distribution center offset, Hz");
  app.add_option("--jump-rate", common.jump_rate,
                 "detuning jump rate, events/s");
  app.add_option("--diffusion-kind", common.diffusion_kind,
                 "frozen_gaussian or jump_process")
      ->check(CLI::IsMember({"frozen_gaussian", "jump_process"}));

  SimulateG2Opts g2_opt;
  CLI::App* sim_g2 = app.add_subcommand(
      "simulate-g2", "closed-form correlation curve on a tau grid");
  sim_g2->fallthrough();
  sim_g2->add_option("--tau-max", g2_opt.tau_max, "grid end, s")->required();
  sim_g2->add_option("--points", g2_opt.points, "grid size (default 400)");

  SimulatePulseOpts pulse_opt;
  CLI::App* sim_pulse = app.add_subcommand(
      "simulate-pulse", "driven-then-free population dynamics");
  sim_pulse->fallthrough();
  sim_pulse->add_option("--duration", pulse_opt.duration, "pulse length, s")
      ->required();
  sim_pulse->add_option("--peak-omega-hz", pulse_opt.peak_omega_hz,
                        "pulse peak drive, Hz (default: emitter.omega_hz)");
  sim_pulse->add_option("--rise-time", pulse_opt.rise_time,
                        "10-90% rise time, s");
  sim_pulse->add_option("--shape", pulse_opt.shape,
                        "ideal_square or exponential_rise")
      ->check(CLI::IsMember({"ideal_square", "exponential_rise"}));
  sim_pulse->add_option("--t-max", pulse_opt.t_max,
                        "grid end, s (default: duration + 5 lifetimes)");
  sim_pulse->add_option("--points", pulse_opt.points,
                        "grid size (default 400)");

  SimulateStreamOpts stream_opt;
  CLI::App* sim_stream = app.add_subcommand(
      "simulate-stream", "photon time tags from the jump unraveling");
  sim_stream->fallthrough();
  sim_stream->add_option("--duration", stream_opt.duration,
                         "acquisition time, s")
      ->required();
  sim_stream->add_option("--efficiency", stream_opt.efficiency,
                         "detection efficiency in (0, 1]");
  sim_stream->add_option("--background-cps", stream_opt.background_cps,
                         "uniform background rate, counts/s");

  CorrelateOpts corr_opt;
  CLI::App* corr = app.add_subcommand(
      "correlate", "coincidence histogram of a time-tag file");
  corr->fallthrough();
  corr->add_option("--input", corr_opt.input, "time-tag file")
      ->required()
      ->check(CLI::ExistingFile);
  corr->add_option("--bin-width", corr_opt.bin_width, "bin width, s")
      ->required();
  corr->add_option("--max-tau", corr_opt.max_tau, "histogram half-range, s")
      ->required();

  FitG2Opts fitg2_opt;
  CLI::App* fitg2 = app.add_subcommand(
      "fit-g2", "drive strength and dephasing from a correlation curve");
  fitg2->fallthrough();
  fitg2->add_option("--input", fitg2_opt.input, "correlation CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fitg2->add_option("--omega-guess-hz", fitg2_opt.omega_guess_hz,
                    "drive strength start value, Hz");
  fitg2->add_option("--gamma-c-guess-hz", fitg2_opt.gamma_c_guess_hz,
                    "dephasing start value, Hz");

  FitLinewidthOpts lw_opt;
  CLI::App* fitlw = app.add_subcommand(
      "fit-linewidth", "per-scan and inhomogeneous linewidths from "
                       "excitation scans");
  fitlw->fallthrough();
  fitlw->add_option("--input", lw_opt.input, "scan CSV")
      ->required()
      ->check(CLI::ExistingFile);
  fitlw->add_option("--shape", lw_opt.shape, "lorentzian or gaussian")
      ->required()
      ->check(CLI::IsMember({"lorentzian", "gaussian"}));

  FitSaturationOpts sat_opt;
  CLI::App* fitsat = app.add_subcommand(
      "fit-saturation", "saturation power from intensity vs power");
  fitsat->fallthrough();
  fitsat->add_option("--input", sat_opt.input, "power/intensity CSV")
      ->required()
      ->check(CLI::ExistingFile);

  DiffusionRateOpts diff_opt;
  CLI::App* diff = app.add_subcommand(
      "diffusion-rate", "spectral diffusion rate bound from scan statistics");
  diff->fallthrough();
  diff->add_option("--ul", diff_opt.ul, "laser scan speed, Hz/s")->required();
  diff->add_option("--ftl", diff_opt.ftl,
                   "transform-limited linewidth, Hz")
      ->required();
  diff->add_option("--single", diff_opt.single,
                   "single-scan linewidth, Hz")
      ->required();

  GapClosingOpts gap_opt;
  CLI::App* gap = app.add_subcommand(
      "gap-closing", "temperature range where two thermally activated "
                     "bands overlap");
  gap->fallthrough();
  gap->add_option("--down", gap_opt.down, "shrinking-gap CSV")
      ->required()
      ->check(CLI::ExistingFile);
  gap->add_option("--up", gap_opt.up, "growing-gap CSV")
      ->required()
      ->check(CLI::ExistingFile);
  gap->add_option("--sigma-level", gap_opt.sigma_level,
                  "confidence band width (default 2)");

  ClassifyOpts cls_opt;
  CLI::App* cls = app.add_subcommand(
      "classify", "coherent-driving regime from per-power fits");
  cls->fallthrough();
  cls->add_option("--input", cls_opt.input, "power series CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cls->add_option("--temperature-k", cls_opt.temperature_k,
                  "series temperature, K")
      ->required();

  ReportOpts rep_opt;
  CLI::App* rep = app.add_subcommand(
      "report", "merge result documents and render their plots to SVG");
  rep->fallthrough();
  rep->add_option("inputs", rep_opt.inputs, "result JSON files")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (sim_g2->parsed())
      run_simulate_g2(common, g2_opt);
    else if (sim_pulse->parsed())
      run_simulate_pulse(common, pulse_opt);
    else if (sim_stream->parsed())
      run_simulate_stream(common, stream_opt);
    else if (corr->parsed())
      run_correlate(common, corr_opt);
    else if (fitg2->parsed())
      run_fit_g2(common, fitg2_opt);
    else if (fitlw->parsed())
      run_fit_linewidth(common, lw_opt);
    else if (fitsat->parsed())
      run_fit_saturation(common, sat_opt);
    else if (diff->parsed())
      run_diffusion_rate(common, diff_opt);
    else if (gap->parsed())
      run_gap_closing(common, gap_opt);
    else if (cls->parsed())
      run_classify(common, cls_opt);
    else if (rep->parsed())
      run_report(common, rep_opt);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace rabikit
