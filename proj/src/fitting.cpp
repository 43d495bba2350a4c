#include "rabikit/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rabikit/diffusion.hpp"
#include "rabikit/errors.hpp"
#include "rabikit/units.hpp"

namespace rabikit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd bounds_vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Registry evaluators work on raw parameter vectors with no domain-struct
// validation: the minimizer probes trial points freely inside the box
// bounds, and non-finite outputs are handled by step rejection.
std::vector<FitModel> build_registry() {
  std::vector<FitModel> models;

  models.push_back(
      {"line",
       {"slope", "intercept"},
       bounds_vec({-kInf, -kInf}),
       bounds_vec({kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i) out[i] = p[0] * x[i] + p[1];
       }});

  models.push_back(
      {"gaussian",
       {"amplitude", "center", "fwhm", "offset"},
       bounds_vec({-kInf, -kInf, 0.0, -kInf}),
       bounds_vec({kInf, kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         const double k = 4.0 * std::numbers::ln2;
         for (std::size_t i = 0; i < x.size(); ++i) {
           if (p[2] <= 0.0) {
             out[i] = p[3];
             continue;
           }
           const double u = (x[i] - p[1]) / p[2];
           out[i] = p[3] + p[0] * std::exp(-k * u * u);
         }
       }});

  models.push_back(
      {"lorentzian",
       {"amplitude", "center", "fwhm", "offset"},
       bounds_vec({-kInf, -kInf, 0.0, -kInf}),
       bounds_vec({kInf, kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i) {
           if (p[2] <= 0.0) {
             out[i] = p[3];
             continue;
           }
           const double u = 2.0 * (x[i] - p[1]) / p[2];
           out[i] = p[3] + p[0] / (1.0 + u * u);
         }
       }});

  // Thermally activated linewidth, A + B exp(-C / kB T); T in kelvin.
  models.push_back(
      {"boltzmann",
       {"A", "B", "C"},
       bounds_vec({-kInf, -kInf, -kInf}),
       bounds_vec({kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i)
           out[i] = p[0] + p[1] * std::exp(-p[2] / (k_boltzmann * x[i]));
       }});

  models.push_back(
      {"cubic_linewidth",
       {"A", "B"},
       bounds_vec({0.0, 0.0}),
       bounds_vec({kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i)
           out[i] = p[0] + p[1] * x[i] * x[i] * x[i];
       }});

  // Generalized logistic in log-temperature; positive-T grids only.
  models.push_back(
      {"logistic_linewidth",
       {"A", "D", "B", "C", "E"},
       bounds_vec({-kInf, -kInf, 0.0, -kInf, 1e-12}),
       bounds_vec({kInf, kInf, kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i) {
           const double u = std::exp(p[2] * (std::log(x[i]) - p[3]));
           out[i] = p[1] + (p[0] - p[1]) / std::pow(1.0 + u, p[4]);
         }
       }});

  models.push_back(
      {"saturation",
       {"i_inf", "p_sat"},
       bounds_vec({0.0, 0.0}),
       bounds_vec({kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         for (std::size_t i = 0; i < x.size(); ++i) {
           if (p[1] <= 0.0) {
             out[i] = x[i] > 0.0 ? p[0] : 0.0;
             continue;
           }
           const double v = x[i] / p[1];
           out[i] = p[0] * v / (1.0 + v);
         }
       }});

  // Resonant correlation with a free histogram scale (model plateau is 1,
  // so `scale` absorbs the raw normalization). gamma is usually pinned via
  // fixed_params; its lower bound keeps trial points physical.
  models.push_back(
      {"g2_resonant",
       {"omega", "gamma_c", "scale", "gamma"},
       bounds_vec({0.0, 0.0, 0.0, 1e-12}),
       bounds_vec({kInf, kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         const double gperp = 0.5 * p[3] + p[1];
         const double s = 0.5 * (p[3] + gperp);
         const double d = 0.5 * (p[3] - gperp);
         const double q2 = p[0] * p[0] - d * d;
         for (std::size_t i = 0; i < x.size(); ++i)
           out[i] = p[2] * detail::g2_core(s, q2, std::fabs(x[i]));
       }});

  // Same law averaged over a quasi-static Gaussian detuning of width sigma
  // (rad/s); gamma and sigma are usually pinned via fixed_params.
  models.push_back(
      {"g2_diffused",
       {"omega", "gamma_c", "scale", "gamma", "sigma"},
       bounds_vec({0.0, 0.0, 0.0, 1e-12, 0.0}),
       bounds_vec({kInf, kInf, kInf, kInf, kInf}),
       [](std::span<const double> x, const Eigen::VectorXd& p,
          std::span<double> out) {
         const EmitterParams params{p[3], p[1], p[0], 0.0};
         const DetuningDistribution dist{p[4], 0.0};
         const std::vector<double> curve =
             g2_diffused_grid(params, dist, x, QuadratureSpec{});
         for (std::size_t i = 0; i < x.size(); ++i) out[i] = p[2] * curve[i];
       }});

  return models;
}

const std::vector<FitModel>& registry() {
  static const std::vector<FitModel> models = build_registry();
  return models;
}

std::string format_combination(const std::vector<std::string>& names,
                               const Eigen::VectorXd& v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  std::ostringstream os;
  bool first = true;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (std::fabs(v[k]) < 0.3 * vmax) continue;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", std::fabs(v[k]));
    os << (first ? (v[k] < 0 ? "-" : "") : (v[k] < 0 ? " - " : " + "));
    os << buf << "*" << names[k];
    first = false;
  }
  return os.str();
}

struct Workspace {
  const FitModel* model = nullptr;
  std::span<const double> x;
  Eigen::VectorXd y;
  Eigen::VectorXd inv_sigma;
  std::vector<int> free_idx;                // full-vector index per free slot
  Eigen::VectorXd p0;                       // effective initial point
  std::vector<double> scratch;

  bool eval(const Eigen::VectorXd& p, Eigen::VectorXd& f) {
    try {
      model->eval(x, p, std::span<double>(scratch.data(), scratch.size()));
    } catch (const std::exception&) {
      return false;
    }
    for (std::size_t i = 0; i < scratch.size(); ++i) {
      if (!std::isfinite(scratch[i])) return false;
      f[static_cast<Eigen::Index>(i)] = scratch[i];
    }
    return true;
  }

  // Weighted residual (y - f)/sigma; returns false on non-finite model.
  bool residual(const Eigen::VectorXd& p, Eigen::VectorXd& f,
                Eigen::VectorXd& r) {
    if (!eval(p, f)) return false;
    r = (y - f).cwiseProduct(inv_sigma);
    return true;
  }

  // Weighted Jacobian of the model over the free parameters, by central
  // differences where the bounds allow and one-sided at a bound.
  bool jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
    const Eigen::Index n = y.size();
    Eigen::VectorXd fp(n), fm(n), f0(n);
    bool have_f0 = false;
    for (std::size_t j = 0; j < free_idx.size(); ++j) {
      const int k = free_idx[j];
      double scale = std::max(std::fabs(p[k]), std::fabs(p0[k]));
      if (scale == 0.0) scale = 1.0;
      const double h = 6e-6 * scale;
      const bool up_ok = p[k] + h <= model->upper[k];
      const bool dn_ok = p[k] - h >= model->lower[k];
      Eigen::VectorXd pt = p;
      if (up_ok && dn_ok) {
        pt[k] = p[k] + h;
        if (!eval(pt, fp)) return false;
        pt[k] = p[k] - h;
        if (!eval(pt, fm)) return false;
        J.col(static_cast<Eigen::Index>(j)) =
            ((fp - fm) / (2.0 * h)).cwiseProduct(inv_sigma);
      } else if (up_ok || dn_ok) {
        if (!have_f0) {
          if (!eval(p, f0)) return false;
          have_f0 = true;
        }
        const double step = up_ok ? h : -h;
        pt[k] = p[k] + step;
        if (!eval(pt, fp)) return false;
        J.col(static_cast<Eigen::Index>(j)) =
            ((fp - f0) / step).cwiseProduct(inv_sigma);
      } else {
        J.col(static_cast<Eigen::Index>(j)).setZero();
      }
    }
    return true;
  }
};

Eigen::VectorXd clamp_to_bounds(const FitModel& model, Eigen::VectorXd p,
                                const std::vector<int>& free_idx) {
  for (int k : free_idx)
    p[k] = std::clamp(p[k], model.lower[k], model.upper[k]);
  return p;
}

}  // namespace

const FitModel& fit_model(const std::string& name) {
  for (const FitModel& m : registry())
    if (m.name == name) return m;
  throw ValidationError("unknown fit model '" + name + "'");
}

std::vector<std::string> fit_model_names() {
  std::vector<std::string> names;
  for (const FitModel& m : registry()) names.push_back(m.name);
  return names;
}

FitResult fit(const FitProblem& problem) {
  const FitModel& model = fit_model(problem.model);
  const Eigen::Index n_par = static_cast<Eigen::Index>(model.param_names.size());
  const std::size_t n = problem.x.size();

  if (n == 0) throw ValidationError("fit: empty data");
  if (problem.y.size() != n)
    throw ValidationError("fit: x and y lengths differ");
  if (!problem.y_sigma.empty() && problem.y_sigma.size() != n)
    throw ValidationError("fit: y_sigma length differs from data");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(problem.x[i]) || !std::isfinite(problem.y[i]))
      throw ValidationError("fit: non-finite data at point " +
                            std::to_string(i));
    if (!problem.y_sigma.empty() &&
        !(problem.y_sigma[i] > 0.0 && std::isfinite(problem.y_sigma[i])))
      throw ValidationError("fit: y_sigma must be positive at point " +
                            std::to_string(i));
  }
  if (problem.initial_guess.size() != n_par)
    throw ValidationError("fit: initial_guess has " +
                          std::to_string(problem.initial_guess.size()) +
                          " entries, model '" + model.name + "' has " +
                          std::to_string(n_par) + " parameters");
  if (!(problem.band_sigma_level > 0.0))
    throw ValidationError("fit: band_sigma_level must be positive");

  // Pin fixed parameters, collect the free set, and validate the effective
  // starting point against the box bounds.
  Eigen::VectorXd p = problem.initial_guess;
  std::vector<bool> is_fixed(static_cast<std::size_t>(n_par), false);
  for (const auto& [name, value] : problem.fixed_params) {
    Eigen::Index k = -1;
    for (Eigen::Index i = 0; i < n_par; ++i)
      if (model.param_names[static_cast<std::size_t>(i)] == name) k = i;
    if (k < 0)
      throw ValidationError("fit: fixed parameter '" + name +
                            "' is not a parameter of model '" + model.name +
                            "'");
    if (!std::isfinite(value) || value < model.lower[k] ||
        value > model.upper[k])
      throw ValidationError("fit: fixed value for '" + name +
                            "' violates the model bounds");
    p[k] = value;
    is_fixed[static_cast<std::size_t>(k)] = true;
  }
  std::vector<int> free_idx;
  for (Eigen::Index k = 0; k < n_par; ++k) {
    if (is_fixed[static_cast<std::size_t>(k)]) continue;
    if (!std::isfinite(p[k]))
      throw ValidationError("fit: non-finite initial guess for '" +
                            model.param_names[static_cast<std::size_t>(k)] +
                            "'");
    if (p[k] < model.lower[k] || p[k] > model.upper[k])
      throw ValidationError("fit: initial guess for '" +
                            model.param_names[static_cast<std::size_t>(k)] +
                            "' is outside the model bounds");
    free_idx.push_back(static_cast<int>(k));
  }
  const Eigen::Index n_free = static_cast<Eigen::Index>(free_idx.size());
  const int dof = static_cast<int>(n) - static_cast<int>(n_free);
  if (dof < 1)
    throw ValidationError("fit: need at least " + std::to_string(n_free + 1) +
                          " points for " + std::to_string(n_free) +
                          " free parameters");

  Workspace ws;
  ws.model = &model;
  ws.x = std::span<const double>(problem.x.data(), n);
  ws.y = Eigen::Map<const Eigen::VectorXd>(problem.y.data(),
                                           static_cast<Eigen::Index>(n));
  ws.inv_sigma.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    ws.inv_sigma[static_cast<Eigen::Index>(i)] =
        problem.y_sigma.empty() ? 1.0 : 1.0 / problem.y_sigma[i];
  ws.free_idx = free_idx;
  ws.p0 = p;
  ws.scratch.resize(n);

  Eigen::VectorXd f(static_cast<Eigen::Index>(n)),
      r(static_cast<Eigen::Index>(n));
  if (!ws.residual(p, f, r))
    throw NumericalError(
        "fit: model is not evaluable at the initial guess");
  double cost = r.squaredNorm();

  // Levenberg-Marquardt on the equilibrated normal equations: with
  // D = sqrt(diag(JtJ)), solve (Dinv JtJ Dinv + lambda I) u = Dinv Jt r and
  // step Dinv u, which keeps the solve well-conditioned across wildly
  // different parameter scales.
  Eigen::MatrixXd J(static_cast<Eigen::Index>(n), n_free);
  double lambda = 1e-3;
  bool converged = n_free == 0;
  int iterations = 0;
  const int max_iterations = 500;

  while (!converged && iterations < max_iterations) {
    if (!ws.jacobian(p, J))
      throw NumericalError("fit: model became non-evaluable near iterate " +
                           std::to_string(iterations));
    const Eigen::MatrixXd N = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::VectorXd d(n_free);
    for (Eigen::Index j = 0; j < n_free; ++j)
      d[j] = N(j, j) > 0.0 ? std::sqrt(N(j, j)) : 1.0;
    const Eigen::MatrixXd Nhat =
        d.cwiseInverse().asDiagonal() * N * d.cwiseInverse().asDiagonal();
    const Eigen::VectorXd ghat = g.cwiseQuotient(d);

    bool accepted = false;
    while (iterations < max_iterations) {
      ++iterations;
      Eigen::MatrixXd A = Nhat;
      A.diagonal().array() += lambda;
      const Eigen::VectorXd u = A.ldlt().solve(ghat);
      Eigen::VectorXd p_trial = p;
      for (Eigen::Index j = 0; j < n_free; ++j)
        p_trial[free_idx[static_cast<std::size_t>(j)]] += u[j] / d[j];
      p_trial = clamp_to_bounds(model, p_trial, free_idx);

      Eigen::VectorXd f_trial(static_cast<Eigen::Index>(n)),
          r_trial(static_cast<Eigen::Index>(n));
      double cost_trial = kInf;
      if (u.allFinite() && ws.residual(p_trial, f_trial, r_trial))
        cost_trial = r_trial.squaredNorm();

      if (cost_trial <= cost) {
        double step2 = 0.0, base2 = 0.0;
        for (int k : free_idx) {
          step2 += (p_trial[k] - p[k]) * (p_trial[k] - p[k]);
          base2 += p[k] * p[k];
        }
        const double rel_param = std::sqrt(step2 / std::max(base2, 1e-300));
        const double rel_cost = (cost - cost_trial) / std::max(cost, 1e-300);
        const double lambda_used = lambda;
        p = p_trial;
        f = f_trial;
        r = r_trial;
        cost = cost_trial;
        lambda = std::max(lambda / 5.0, 1e-14);
        // a heavily damped step is short no matter how far the minimum is,
        // so only a near-Gauss-Newton step may declare convergence
        if (rel_param < 1e-8 && rel_cost < 1e-10 && lambda_used <= 1e-3)
          converged = true;
        accepted = true;
        break;
      }
      // a rejected step this small means even an arbitrarily damped move no
      // longer improves the cost at working precision: the iterate is a
      // minimum at the cost's numerical resolution
      if (std::isfinite(cost_trial)) {
        double step2 = 0.0, base2 = 0.0;
        for (int k : free_idx) {
          step2 += (p_trial[k] - p[k]) * (p_trial[k] - p[k]);
          base2 += p[k] * p[k];
        }
        if (step2 <= 1e-22 * std::max(base2, 1e-300)) {
          converged = true;
          break;
        }
      }
      lambda *= 4.0;
      if (lambda > 1e15) break;  // stalled: report best-so-far unconverged
    }
    if (!accepted) break;
  }

  // A parameter whose optimum sits at (or within rounding of) a bound can
  // converge a hair inside it, since near the end the steps are globally
  // negligible. Snap it onto the bound when that leaves the cost unchanged,
  // so bound pinning is reported exactly.
  for (int k : free_idx) {
    for (double bound : {model.lower[k], model.upper[k]}) {
      if (!std::isfinite(bound) || p[k] == bound) continue;
      Eigen::VectorXd p_snap = p;
      p_snap[k] = bound;
      Eigen::VectorXd f_snap(static_cast<Eigen::Index>(n)),
          r_snap(static_cast<Eigen::Index>(n));
      if (!ws.residual(p_snap, f_snap, r_snap)) continue;
      const double cost_snap = r_snap.squaredNorm();
      if (cost_snap <= cost + 1e-9 * (1.0 + cost)) {
        p = std::move(p_snap);
        f = std::move(f_snap);
        r = std::move(r_snap);
        cost = cost_snap;
        break;
      }
    }
  }

  FitResult result;
  result.param_names = model.param_names;
  result.params = p;
  result.residual_norm = cost;
  result.dof = dof;
  result.converged = converged;
  result.iterations = iterations;
  for (int k : free_idx)
    if (p[k] == model.lower[k] || p[k] == model.upper[k])
      result.pinned_params.push_back(
          model.param_names[static_cast<std::size_t>(k)]);

  // Covariance: residual-variance-scaled inverse of JtJ at the solution,
  // computed on the equilibrated matrix so the rank test is scale-free.
  result.covariance = Eigen::MatrixXd::Zero(n_par, n_par);
  Eigen::MatrixXd cov_free = Eigen::MatrixXd::Zero(n_free, n_free);
  if (n_free > 0) {
    if (!ws.jacobian(p, J))
      throw NumericalError("fit: model not evaluable at the solution");
    const Eigen::MatrixXd N = J.transpose() * J;
    std::vector<std::string> free_names;
    for (int k : free_idx)
      free_names.push_back(model.param_names[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < n_free; ++j) {
      if (N(j, j) > 0.0) continue;
      throw RankDeficiencyError(
          "fit: normal matrix is singular; the data carry no information "
          "on parameter '" +
          free_names[static_cast<std::size_t>(j)] + "'");
    }
    Eigen::VectorXd d(n_free);
    for (Eigen::Index j = 0; j < n_free; ++j) d[j] = std::sqrt(N(j, j));
    const Eigen::MatrixXd Nhat =
        d.cwiseInverse().asDiagonal() * N * d.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Nhat);
    const Eigen::VectorXd evals = es.eigenvalues();
    const double emax = evals[n_free - 1];
    if (!(emax > 0.0) || evals[0] <= 1e-12 * emax)
      throw RankDeficiencyError(
          "fit: normal matrix is singular; unidentifiable parameter "
          "combination " +
          format_combination(free_names, es.eigenvectors().col(0)));
    const Eigen::MatrixXd Nhat_inv =
        es.eigenvectors() *
        evals.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    const double sigma2 = cost / dof;
    cov_free = sigma2 * d.cwiseInverse().asDiagonal() * Nhat_inv *
               d.cwiseInverse().asDiagonal();
    for (Eigen::Index a = 0; a < n_free; ++a)
      for (Eigen::Index b = 0; b < n_free; ++b)
        result.covariance(free_idx[static_cast<std::size_t>(a)],
                          free_idx[static_cast<std::size_t>(b)]) =
            cov_free(a, b);
  }

  // First-order confidence band on the data abscissae. J holds the
  // weighted partials, so unweight each row before propagating.
  result.band.sigma_level = problem.band_sigma_level;
  result.band.x = problem.x;
  result.band.lo.resize(n);
  result.band.hi.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    double var = 0.0;
    if (n_free > 0) {
      const Eigen::VectorXd row =
          J.row(ii).transpose() / ws.inv_sigma[ii];
      var = row.dot(cov_free * row);
    }
    const double half = problem.band_sigma_level * std::sqrt(std::max(var, 0.0));
    result.band.lo[i] = f[ii] - half;
    result.band.hi[i] = f[ii] + half;
  }
  return result;
}

namespace {

// Fold a (possibly two-sided) correlation curve onto |tau| and lightly
// smooth it, for initial-guess extraction only.
struct FoldedCurve {
  std::vector<double> tau;  // ascending |tau|
  std::vector<double> y;    // smoothed g2 values
  double plateau = 1.0;
};

FoldedCurve fold_curve(const CorrelationCurve& curve) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i)
    pts.emplace_back(std::fabs(curve.tau_bins[i]), curve.g2_at(i));
  std::sort(pts.begin(), pts.end());

  FoldedCurve folded;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < pts.size() &&
           pts[j].first - pts[i].first < 0.5 * curve.bin_width)
      sum += pts[j++].second;
    folded.tau.push_back(pts[i].first);
    folded.y.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  // moving-average smoothing, window 5
  std::vector<double> smooth(folded.y.size());
  const int m = static_cast<int>(folded.y.size());
  for (int i = 0; i < m; ++i) {
    double sum = 0.0;
    int cnt = 0;
    for (int k = std::max(0, i - 2); k <= std::min(m - 1, i + 2); ++k) {
      sum += folded.y[static_cast<std::size_t>(k)];
      ++cnt;
    }
    smooth[static_cast<std::size_t>(i)] = sum / cnt;
  }
  folded.y = std::move(smooth);

  const std::size_t tail = std::max<std::size_t>(1, folded.y.size() / 5);
  double acc = 0.0;
  for (std::size_t i = folded.y.size() - tail; i < folded.y.size(); ++i)
    acc += folded.y[i];
  folded.plateau = acc / static_cast<double>(tail);
  return folded;
}

}  // namespace

G2Fit fit_g2(const CorrelationCurve& curve, double gamma, double sigma,
             std::optional<double> omega_guess,
             std::optional<double> gamma_c_guess) {
  validate(curve);
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ValidationError("fit_g2: gamma must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ValidationError("fit_g2: sigma must be non-negative");

  const FoldedCurve folded = fold_curve(curve);
  const double plateau = std::max(folded.plateau, 1e-12);

  // Drive-strength guess from the oscillation structure: the first local
  // minimum after the first peak sits one full period 2 pi / omega out.
  // Without a peak (overdamped), the rise time to the plateau sets the
  // only available rate scale.
  double omega0 = 0.0;
  {
    const std::vector<double>& ys = folded.y;
    const std::vector<double>& ts = folded.tau;
    std::size_t peak = 0;
    for (std::size_t i = 1; i + 1 < ys.size(); ++i) {
      if (ys[i] >= ys[i - 1] && ys[i] >= ys[i + 1] &&
          ys[i] > 1.02 * plateau) {
        peak = i;
        break;
      }
    }
    if (peak > 0) {
      for (std::size_t i = peak + 1; i + 1 < ys.size(); ++i) {
        if (ys[i] <= ys[i - 1] && ys[i] <= ys[i + 1]) {
          omega0 = 2.0 * std::numbers::pi / ts[i];
          break;
        }
      }
      if (omega0 == 0.0)  // peak but no minimum resolved: half period
        omega0 = std::numbers::pi / ts[peak];
    } else {
      double t_rise = 0.0;
      for (std::size_t i = 0; i < ys.size(); ++i) {
        if (ys[i] >= 0.63 * plateau && ts[i] > 0.0) {
          t_rise = ts[i];
          break;
        }
      }
      omega0 = t_rise > 0.0 ? std::max(1.0 / t_rise, 0.05 * gamma) : gamma;
    }
  }

  // Dephasing guess from the antibunching dip width: for small tau,
  // g2 ~ (omega^2 + gamma*gperp) tau^2 / 2.
  double gamma_c0 = 0.0;
  {
    double t_half = 0.0;
    for (std::size_t i = 0; i < folded.y.size(); ++i) {
      if (folded.y[i] >= 0.5 * plateau && folded.tau[i] > 0.0) {
        t_half = folded.tau[i];
        break;
      }
    }
    if (t_half > 0.0) {
      const double curvature = 1.0 / (t_half * t_half);
      const double gperp0 =
          std::max((curvature - omega0 * omega0) / gamma, 0.5 * gamma);
      gamma_c0 = std::max(gperp0 - 0.5 * gamma, 0.0);
    }
  }

  std::vector<double> gc_starts =
      gamma_c_guess ? std::vector<double>{*gamma_c_guess}
                    : std::vector<double>{gamma_c0, 0.0, 2.0 * gamma};

  // The cost is multimodal in the drive strength (fitting a frequency to
  // an oscillating curve), so a local minimizer needs its start inside the
  // right basin. Seed with the best points of a coarse log-spaced scan
  // between "half an oscillation over the record" and the bin Nyquist,
  // evaluated at the guessed dephasing and plateau scale.
  std::vector<double> omega_starts;
  if (omega_guess) {
    omega_starts = {*omega_guess};
  } else {
    const double tau_span = folded.tau.back() > 0.0 ? folded.tau.back() : 1.0;
    const double w_lo = std::numbers::pi / tau_span;
    // the correlation oscillates at q ~ omega, so omega is resolvable up
    // to the angular Nyquist rate pi / bin_width
    const double w_hi =
        std::max(std::numbers::pi / curve.bin_width, 4.0 * w_lo);
    const FitModel& scan_model =
        fit_model(sigma > 0.0 ? "g2_diffused" : "g2_resonant");
    Eigen::VectorXd ps(sigma > 0.0 ? 5 : 4);
    ps[1] = gamma_c0;
    ps[2] = plateau;
    ps[3] = gamma;
    if (sigma > 0.0) ps[4] = sigma;
    std::vector<double> model_y(curve.size());
    std::vector<std::pair<double, double>> scanned;  // (cost, omega)
    const int n_scan = 25;
    for (int k = 0; k < n_scan; ++k) {
      const double w =
          w_lo * std::pow(w_hi / w_lo,
                          static_cast<double>(k) / (n_scan - 1));
      ps[0] = w;
      try {
        scan_model.eval(
            std::span<const double>(curve.tau_bins.data(), curve.size()), ps,
            std::span<double>(model_y.data(), model_y.size()));
      } catch (const std::exception&) {
        continue;
      }
      double c = 0.0;
      for (std::size_t i = 0; i < curve.size(); ++i) {
        const double rr = (curve.g2_at(i) - model_y[i]) /
                          (curve.normalization *
                           std::sqrt(std::max(curve.counts[i], 1.0)));
        c += rr * rr;
      }
      if (std::isfinite(c)) scanned.emplace_back(c, w);
    }
    std::sort(scanned.begin(), scanned.end());
    for (const auto& [c, w] : scanned) {
      const bool near_existing =
          std::any_of(omega_starts.begin(), omega_starts.end(), [&](double v) {
            return w > 0.7 * v && w < 1.4 * v;
          });
      if (!near_existing) omega_starts.push_back(w);
      if (omega_starts.size() == 3) break;
    }
    omega_starts.push_back(omega0);  // oscillation-spacing reading of the data
  }

  FitProblem problem;
  problem.model = sigma > 0.0 ? "g2_diffused" : "g2_resonant";
  problem.x = curve.tau_bins;
  problem.y.resize(curve.size());
  problem.y_sigma.resize(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    problem.y[i] = curve.g2_at(i);
    // Poisson counting weights with a floor of one raw count.
    problem.y_sigma[i] =
        curve.normalization * std::sqrt(std::max(curve.counts[i], 1.0));
  }
  problem.fixed_params["gamma"] = gamma;
  if (sigma > 0.0) problem.fixed_params["sigma"] = sigma;

  const FitModel& model = fit_model(problem.model);
  const Eigen::Index n_par = static_cast<Eigen::Index>(model.param_names.size());

  bool have_result = false;
  FitResult best;
  std::string last_error;
  // A start that converges with the weighted residual inside the Poisson
  // noise band cannot be beaten by a different basin: a wrong oscillation
  // frequency leaves residuals far above counting noise at any usable
  // statistics, so remaining starts could only re-find the same minimum.
  const auto noise_level = [](const FitResult& r) {
    return r.converged && r.dof > 0 &&
           r.residual_norm <=
               r.dof * (1.0 + 4.0 * std::sqrt(2.0 / r.dof));
  };
  bool accepted = false;
  for (std::size_t wi = 0; wi < omega_starts.size() && !accepted; ++wi) {
    for (std::size_t gi = 0; gi < gc_starts.size() && !accepted; ++gi) {
      problem.initial_guess = Eigen::VectorXd::Zero(n_par);
      problem.initial_guess[0] = std::max(omega_starts[wi], 0.0);
      problem.initial_guess[1] = std::max(gc_starts[gi], 0.0);
      problem.initial_guess[2] = plateau;
      problem.initial_guess[3] = gamma;
      if (sigma > 0.0) problem.initial_guess[4] = sigma;
      try {
        FitResult candidate = fit(problem);
        const bool better =
            !have_result ||
            (candidate.converged && !best.converged) ||
            (candidate.converged == best.converged &&
             candidate.residual_norm < best.residual_norm);
        if (better) best = std::move(candidate);
        have_result = true;
        accepted = noise_level(best);
      } catch (const NumericalError& e) {
        last_error = e.what();
      }
    }
  }
  if (!have_result)
    throw NumericalError("fit_g2: every start point failed (" + last_error +
                         ")");

  G2Fit out;
  out.pinned_dephasing_floor =
      std::find(best.pinned_params.begin(), best.pinned_params.end(),
                "gamma_c") != best.pinned_params.end();
  out.regime =
      lambda_pair({gamma, best.value("gamma_c"), best.value("omega"), 0.0})
          .regime;
  out.fit = std::move(best);
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LinewidthSummary histogram_line_fit(const std::vector<PleScan>& scans,
                                    LineShape shape) {
  if (scans.empty()) throw ValidationError("histogram_line_fit: no scans");

  LinewidthSummary summary;
  for (const PleScan& scan : scans) {
    if (scan.freq_hz.size() != scan.counts.size())
      throw ValidationError("histogram_line_fit: scan " +
                            std::to_string(scan.id) +
                            " has mismatched columns");
    if (scan.freq_hz.size() < 6) {
      ++summary.dark_scans;  // too short to resolve a line
      continue;
    }

    std::vector<std::size_t> order(scan.freq_hz.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scan.freq_hz[a] < scan.freq_hz[b];
    });
    std::vector<double> freq, counts;
    for (std::size_t k : order) {
      freq.push_back(scan.freq_hz[k]);
      counts.push_back(scan.counts[k]);
    }

    const double base = median(counts);
    double peak = counts[0];
    std::size_t peak_at = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
      if (counts[i] > peak) peak = counts[peak_at = i];
    // Dark period: no excursion beyond counting noise on the baseline.
    if (peak - base < 5.0 * std::sqrt(base + 1.0)) {
      ++summary.dark_scans;
      continue;
    }

    const double span = freq.back() - freq.front();
    std::size_t above = 0;
    for (double c : counts)
      if (c >= base + 0.5 * (peak - base)) ++above;
    const double spacing = span / static_cast<double>(freq.size() - 1);
    const double fwhm0 =
        std::max(static_cast<double>(above), 1.0) * spacing;

    FitProblem problem;
    problem.model = shape == LineShape::lorentzian ? "lorentzian" : "gaussian";
    problem.x = freq;
    problem.y = counts;
    problem.y_sigma.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      problem.y_sigma[i] = std::sqrt(std::max(counts[i], 1.0));
    problem.initial_guess = Eigen::VectorXd(4);
    problem.initial_guess << peak - base, freq[peak_at], fwhm0, base;

    try {
      const FitResult res = fit(problem);
      const double amp = res.value("amplitude");
      const double center = res.value("center");
      const double width = res.value("fwhm");
      if (amp <= 0.0 || width <= 0.0 || center < freq.front() ||
          center > freq.back()) {
        ++summary.dark_scans;
        continue;
      }
      summary.scan_center.push_back(center);
      summary.scan_fwhm.push_back(width);
    } catch (const NumericalError&) {
      ++summary.dark_scans;
    }
  }

  const std::size_t n = summary.scan_fwhm.size();
  if (n == 0)
    throw NumericalError("histogram_line_fit: all " +
                         std::to_string(scans.size()) +
                         " scans are dark; no line to fit");

  double mean_w = 0.0;
  for (double w : summary.scan_fwhm) mean_w += w;
  mean_w /= static_cast<double>(n);
  double var_w = 0.0;
  for (double w : summary.scan_fwhm) var_w += (w - mean_w) * (w - mean_w);
  summary.mean_single_fwhm = mean_w;
  summary.mean_single_fwhm_sigma =
      n > 1 ? std::sqrt(var_w / static_cast<double>(n - 1) /
                        static_cast<double>(n))
            : 0.0;

  // Center spread: Gaussian fit to the histogram of line centers when the
  // sample supports one, sample statistics otherwise.
  double mean_c = 0.0;
  for (double c : summary.scan_center) mean_c += c;
  mean_c /= static_cast<double>(n);
  double var_c = 0.0;
  for (double c : summary.scan_center) var_c += (c - mean_c) * (c - mean_c);
  const double std_c = n > 1 ? std::sqrt(var_c / static_cast<double>(n - 1))
                             : 0.0;

  double spread = 0.0, spread_sigma = 0.0;
  bool histogram_done = false;
  if (n >= 12 && std_c > 0.0) {
    const int bins = std::clamp(
        static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))), 5,
        64);
    const double lo = *std::min_element(summary.scan_center.begin(),
                                        summary.scan_center.end());
    const double hi = *std::max_element(summary.scan_center.begin(),
                                        summary.scan_center.end());
    const double width = (hi - lo) / bins;
    std::vector<double> bx(static_cast<std::size_t>(bins)),
        by(static_cast<std::size_t>(bins), 0.0);
    for (int b = 0; b < bins; ++b)
      bx[static_cast<std::size_t>(b)] = lo + (b + 0.5) * width;
    for (double c : summary.scan_center) {
      int b = static_cast<int>((c - lo) / width);
      by[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
    }
    FitProblem hp;
    hp.model = "gaussian";
    hp.x = bx;
    hp.y = by;
    hp.y_sigma.resize(by.size());
    for (std::size_t i = 0; i < by.size(); ++i)
      hp.y_sigma[i] = std::sqrt(std::max(by[i], 1.0));
    hp.initial_guess = Eigen::VectorXd(4);
    hp.initial_guess << *std::max_element(by.begin(), by.end()), mean_c,
        sigma_to_fwhm(std_c), 0.0;
    hp.fixed_params["offset"] = 0.0;
    try {
      FitResult hist_fit = fit(hp);
      if (hist_fit.value("fwhm") > 0.0 && hist_fit.value("amplitude") > 0.0) {
        spread = hist_fit.value("fwhm");
        spread_sigma = hist_fit.sigma("fwhm");
        summary.center_histogram_fit = std::move(hist_fit);
        histogram_done = true;
      }
    } catch (const NumericalError&) {
    }
  }
  if (!histogram_done && std_c > 0.0) {
    spread = sigma_to_fwhm(std_c);
    spread_sigma =
        n > 1 ? spread / std::sqrt(2.0 * static_cast<double>(n - 1)) : 0.0;
  }

  // Inhomogeneous width as the quadrature convolution of the center-spread
  // FWHM with the mean single-scan width; identical centers then degrade
  // to the single-scan floor instead of zero.
  summary.inhom_fwhm = std::hypot(spread, summary.mean_single_fwhm);
  if (summary.inhom_fwhm > 0.0) {
    const double ds = spread / summary.inhom_fwhm;
    const double dw = summary.mean_single_fwhm / summary.inhom_fwhm;
    summary.inhom_fwhm_sigma =
        std::hypot(ds * spread_sigma, dw * summary.mean_single_fwhm_sigma);
  }
  return summary;
}

}  // namespace rabikit
