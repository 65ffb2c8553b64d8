#pragma once

// MAP estimation of attenuation (alpha) and density (beta) from attenuated
// Poisson views u_j ~ P(w beta exp(-A_j alpha)):
//
//   F(alpha, beta) = sum_ij [w beta e^{-(A_j alpha)_i} + u_j (A_j alpha - log beta)_i]
//                    + lambda_alpha TV(alpha) + lambda_beta TV(beta),   alpha, beta >= 0
//
// Pipeline: convex warm start in alpha (beta eliminated in closed form),
// TV-regularised density correction, then optional alternating rounds.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "maec/errors.hpp"
#include "maec/field.hpp"
#include "maec/operators.hpp"
#include "maec/scalar_kernels.hpp"
#include "maec/sdmm.hpp"
#include "maec/simulate.hpp"

namespace maec {

/// Regularisation defaults scale with the mean total count m = mean(u1 + ... + um):
/// lambda_alpha = 3.5 sqrt(m) and lambda_beta = 1.7 / sqrt(m). Both were tuned on
/// 64x64 blocks phantoms (beta <= 100, alpha <= 0.03) and are instance-dependent.
struct SolverConfig {
  std::optional<double> lambda_alpha;
  std::optional<double> lambda_beta;
  double gamma = 1.0;
  double c1 = 1.0;
  /// TV balance for the attenuation problems; defaults to n^(1/d), the
  /// growth rate of the path operators' norm.
  std::optional<double> c2;
  /// TV balance for the density problem, whose data operator is c1 I;
  /// defaults to c1.
  std::optional<double> c2_beta;
  double c3 = 1.0;
  /// Alternating (alpha, beta) rounds after the warm start + density step.
  int nit = 0;
  int warm_start_iters = 500;
  int alpha_iters = 500;
  int beta_iters = 300;
  double cg_tol = 1e-10;
  /// Defaults to 10 n^(1/d) when <= 0.
  int cg_maxit = 0;
  double residual_tol = 1e-9;
  std::uint64_t seed = 0;
};

/// Config with every default made explicit for the given views.
inline SolverConfig resolve_config(SolverConfig cfg, const std::vector<ScalarField>& views) {
  const auto& dims = views.front().dims();
  const double side = std::pow(static_cast<double>(dims_size(dims)), 1.0 / static_cast<double>(dims.size()));
  if (!cfg.c2) cfg.c2 = side;
  if (!cfg.c2_beta) cfg.c2_beta = cfg.c1;
  if (cfg.cg_maxit <= 0) cfg.cg_maxit = static_cast<int>(std::ceil(10.0 * side));
  double counts = 0.0;
  for (const auto& u : views) counts += mean_value(u);
  if (!cfg.lambda_alpha) cfg.lambda_alpha = 3.5 * std::sqrt(counts);
  if (!cfg.lambda_beta) cfg.lambda_beta = counts > 0.0 ? 1.7 / std::sqrt(counts) : 0.0;
  if (!(cfg.gamma > 0.0) || !(cfg.c1 > 0.0) || !(*cfg.c2 > 0.0) || !(*cfg.c2_beta > 0.0) || !(cfg.c3 > 0.0))
    throw ValidationError("gamma, c1, c2 and c3 must be positive");
  if (*cfg.lambda_alpha < 0.0 || *cfg.lambda_beta < 0.0) throw ValidationError("regularization weights must be >= 0");
  if (cfg.nit < 0) throw ValidationError("nit must be >= 0");
  return cfg;
}

struct EstimationResult {
  ScalarField alpha_hat;
  ScalarField beta_hat;
  ScalarField warm_start_alpha;
  /// Unregularised density (closed form) at the warm-start attenuation.
  ScalarField closed_form_beta;
  /// F after the density correction, then after every half-step of each round.
  std::vector<double> objective_trace;
  std::vector<SdmmTraceRow> warm_start_trace;
  SolverConfig config;
};

namespace detail {

inline void check_views(const std::vector<ScalarField>& views, const ForwardModel& model) {
  if (views.empty()) throw ValidationError("at least one view is required");
  if (views.size() != model.views.size())
    throw ValidationError("got " + std::to_string(views.size()) + " views for a " +
                          std::to_string(model.views.size()) + "-view model");
  for (const auto& u : views) {
    require_same_shape(u, views.front(), "views");
    require_nonnegative(u, "counts");
  }
  validate_model(model, views.front().dims());
}

/// u log(beta) with 0 log 0 = 0.
inline double u_log(double u, double beta) {
  if (u == 0.0) return 0.0;
  if (beta <= 0.0) return -std::numeric_limits<double>::infinity();
  return u * std::log(beta);
}

inline double lse_neg(std::span<const double> t) {
  double lo = t[0];
  for (double v : t) lo = std::min(lo, v);
  double s = 0.0;
  for (double v : t) s += std::exp(lo - v);
  return -lo + std::log(s);
}

/// L alpha = c [A_1 alpha; ...; A_m alpha]
inline LinearMap stacked_paths(const ForwardModel& model, const Dims& dims, double c) {
  return [&model, dims, c](const Vec& x) {
    const ScalarField f(dims, x);
    Vec out;
    out.reserve(x.size() * model.views.size());
    for (const auto& op : model.views) {
      const auto y = path_apply(op, f);
      for (double v : y.values()) out.push_back(c * v);
    }
    return out;
  };
}

inline LinearMap stacked_paths_adjoint(const ForwardModel& model, const Dims& dims, double c) {
  return [&model, dims, c](const Vec& y) {
    const auto n = dims_size(dims);
    Vec out(n, 0.0);
    for (std::size_t j = 0; j < model.views.size(); ++j) {
      const ScalarField part(dims, Vec(y.begin() + j * n, y.begin() + (j + 1) * n));
      const auto back = path_adjoint(model.views[j], part);
      for (std::size_t i = 0; i < n; ++i) out[i] += c * back[i];
    }
    return out;
  };
}

inline SplitTerm tv_term(const Dims& dims, double c2, double lambda) {
  SplitTerm t;
  t.name = "tv";
  t.apply = [dims, c2](const Vec& x) {
    const auto g = grad(ScalarField(dims, x));
    Vec out;
    out.reserve(x.size() * g.ncomp());
    for (std::size_t k = 0; k < g.ncomp(); ++k)
      for (double v : g[k].values()) out.push_back(c2 * v);
    return out;
  };
  t.adjoint = [dims, c2](const Vec& y) {
    const auto n = dims_size(dims);
    std::vector<ScalarField> comps;
    for (std::size_t k = 0; k < dims.size(); ++k)
      comps.emplace_back(dims, Vec(y.begin() + k * n, y.begin() + (k + 1) * n));
    auto d = div(VectorField(std::move(comps)));
    for (auto& v : d.values()) v *= -c2;
    return d.data();
  };
  t.prox = [dims, c2, lambda](Vec& v, double gamma) {
    const auto n = dims_size(dims);
    const auto d = dims.size();
    const double threshold = gamma * lambda / c2;
    double buf[3];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) buf[k] = v[k * n + i];
      group_soft_threshold(std::span<double>(buf, d), threshold);
      for (std::size_t k = 0; k < d; ++k) v[k * n + i] = buf[k];
    }
  };
  return t;
}

inline SplitTerm scaled_identity_term(double c, ProxOracle prox, std::string name) {
  SplitTerm t;
  t.name = std::move(name);
  t.apply = [c](const Vec& x) {
    Vec out(x);
    for (auto& v : out) v *= c;
    return out;
  };
  t.adjoint = t.apply;
  t.prox = std::move(prox);
  return t;
}

inline SplitTerm nonneg_term(double c3) {
  return scaled_identity_term(
      c3, [](Vec& v, double) { for (auto& x : v) x = project_nonneg(x); }, "nonneg");
}

inline SdmmOptions sdmm_options(const SolverConfig& cfg, int iterations) {
  SdmmOptions opt;
  opt.gamma = cfg.gamma;
  opt.iterations = iterations;
  opt.cg_tol = cfg.cg_tol;
  opt.cg_maxit = cfg.cg_maxit;
  opt.residual_tol = cfg.residual_tol;
  return opt;
}

/// y_i = L_i x0, z_i = 0: restart the splitting at a known point.
inline void start_at(SdmmOptions& opt, const std::vector<SplitTerm>& terms, const Vec& x0) {
  opt.y0.clear();
  opt.z0.clear();
  for (const auto& t : terms) {
    opt.y0.push_back(t.apply(x0));
    opt.z0.emplace_back(opt.y0.back().size(), 0.0);
  }
}

inline ScalarField clamp_nonneg(const Dims& dims, Vec x) {
  for (auto& v : x) v = project_nonneg(v);
  return ScalarField(dims, std::move(x));
}

}  // namespace detail

/// Poisson part of F (no regularisers, no positivity check).
inline double data_fidelity(const ScalarField& alpha, const ScalarField& beta, const std::vector<ScalarField>& views,
                            const ForwardModel& model) {
  const auto gain = model_gain(model, alpha.dims());
  const auto depths = optical_depths(model, alpha);
  double f = 0.0;
  for (std::size_t j = 0; j < views.size(); ++j) {
    const auto& u = views[j];
    const auto& t = depths[j];
    for (std::size_t i = 0; i < u.size(); ++i)
      f += gain[i] * beta[i] * std::exp(-t[i]) + u[i] * t[i] - detail::u_log(u[i], beta[i]);
  }
  return f;
}

/// F(alpha, beta); +inf outside the nonnegative orthant or where u > 0 and beta = 0.
inline double objective_F(const ScalarField& alpha, const ScalarField& beta, const std::vector<ScalarField>& views,
                          const ForwardModel& model, double lambda_alpha, double lambda_beta) {
  detail::check_views(views, model);
  require_same_shape(alpha, views.front(), "objective_F alpha");
  require_same_shape(beta, views.front(), "objective_F beta");
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (alpha[i] < 0.0 || beta[i] < 0.0) return inf;
  double f = data_fidelity(alpha, beta, views, model);
  if (lambda_alpha > 0.0) f += lambda_alpha * total_variation(alpha);
  if (lambda_beta > 0.0) f += lambda_beta * total_variation(beta);
  return f;
}

/// sum_ij u_j[(A_j alpha) + log sum_j e^{-(A_j alpha)}] + lambda_alpha TV(alpha),
/// i.e. F with beta replaced by its closed-form optimum, up to a constant.
inline double warm_start_objective(const ScalarField& alpha, const std::vector<ScalarField>& views,
                                   const ForwardModel& model, double lambda_alpha) {
  detail::check_views(views, model);
  for (double a : alpha.values())
    if (a < 0.0) return std::numeric_limits<double>::infinity();
  const auto depths = optical_depths(model, alpha);
  const auto m = views.size();
  std::vector<double> t(m);
  double f = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      t[j] = depths[j][i];
      total += views[j][i];
      f += views[j][i] * t[j];
    }
    if (total > 0.0) f += total * detail::lse_neg(t);
  }
  if (lambda_alpha > 0.0) f += lambda_alpha * total_variation(alpha);
  return f;
}

/// beta = sum_j u_j / (w sum_j e^{-A_j alpha}): the minimiser of F in beta
/// without density regularisation.
inline ScalarField beta_closed_form(const std::vector<ScalarField>& views, const ScalarField& alpha,
                                    const ForwardModel& model) {
  detail::check_views(views, model);
  require_same_shape(alpha, views.front(), "beta_closed_form alpha");
  const auto gain = model_gain(model, alpha.dims());
  const auto depths = optical_depths(model, alpha);
  ScalarField beta(alpha.dims());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < views.size(); ++j) {
      num += views[j][i];
      den += std::exp(-depths[j][i]);
    }
    beta[i] = num == 0.0 ? 0.0 : num / (gain[i] * den);
  }
  return beta;
}

struct SubproblemResult {
  ScalarField field;
  SdmmState state;
};

/// Convex warm start: minimise warm_start_objective over alpha >= 0 with
/// SDMM terms c1 [A1; A2] (logsumexp prox), c2 grad (TV) and c3 I (positivity).
inline SubproblemResult warm_start_alpha_detailed(const std::vector<ScalarField>& views, const ForwardModel& model,
                                                  double lambda_alpha, SolverConfig cfg) {
  detail::check_views(views, model);
  if (views.size() != 2) throw ValidationError("the warm start needs exactly two views");
  cfg = resolve_config(cfg, views);
  const auto& dims = views.front().dims();
  const auto n = dims_size(dims);
  const double c1 = cfg.c1;

  std::vector<SplitTerm> terms;
  SplitTerm data;
  data.name = "logsumexp";
  data.apply = detail::stacked_paths(model, dims, c1);
  data.adjoint = detail::stacked_paths_adjoint(model, dims, c1);
  data.prox = [&views, n, c1](Vec& v, double gamma) {
    const auto& u1 = views[0];
    const auto& u2 = views[1];
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = prox_g1_pixel(v[i], v[n + i], u1[i], u2[i], gamma, c1);
      v[i] = p.x1;
      v[n + i] = p.x2;
    }
  };
  terms.push_back(std::move(data));
  terms.push_back(detail::tv_term(dims, *cfg.c2, lambda_alpha));
  terms.push_back(detail::nonneg_term(cfg.c3));

  auto opt = detail::sdmm_options(cfg, cfg.warm_start_iters);
  auto st = sdmm_solve(terms, Vec(n, 0.0), opt);
  return {detail::clamp_nonneg(dims, st.x), std::move(st)};
}

inline ScalarField warm_start_alpha(const std::vector<ScalarField>& views, const ForwardModel& model,
                                    double lambda_alpha, const SolverConfig& cfg) {
  return warm_start_alpha_detailed(views, model, lambda_alpha, cfg).field;
}

/// argmin_{alpha >= 0} F(alpha, beta) for one or more views (m = 1 is the
/// lidar inversion). The per-coordinate data prox is the Lambert-W closed form.
inline SubproblemResult alpha_step_detailed(const std::vector<ScalarField>& views, const ScalarField& beta,
                                            const ForwardModel& model, double lambda_alpha, SolverConfig cfg,
                                            const std::optional<ScalarField>& alpha_init = std::nullopt) {
  detail::check_views(views, model);
  require_same_shape(beta, views.front(), "alpha_step beta");
  require_nonnegative(beta, "beta");
  cfg = resolve_config(cfg, views);
  const auto& dims = views.front().dims();
  const auto n = dims_size(dims);
  const double c1 = cfg.c1;
  const auto gain = model_gain(model, dims);
  Vec weighted_beta(n);
  for (std::size_t i = 0; i < n; ++i) weighted_beta[i] = gain[i] * beta[i];

  std::vector<SplitTerm> terms;
  SplitTerm data;
  data.name = "exponential";
  data.apply = detail::stacked_paths(model, dims, c1);
  data.adjoint = detail::stacked_paths_adjoint(model, dims, c1);
  data.prox = [&views, weighted_beta, n, c1](Vec& v, double gamma) {
    for (std::size_t j = 0; j < views.size(); ++j)
      for (std::size_t i = 0; i < n; ++i)
        v[j * n + i] = prox_h1_pixel(v[j * n + i], views[j][i], weighted_beta[i], gamma, c1);
  };
  terms.push_back(std::move(data));
  terms.push_back(detail::tv_term(dims, *cfg.c2, lambda_alpha));
  terms.push_back(detail::nonneg_term(cfg.c3));

  const Vec x0 = alpha_init ? alpha_init->data() : Vec(n, 0.0);
  auto opt = detail::sdmm_options(cfg, cfg.alpha_iters);
  detail::start_at(opt, terms, x0);
  auto st = sdmm_solve(terms, x0, opt);
  return {detail::clamp_nonneg(dims, st.x), std::move(st)};
}

inline ScalarField alpha_step(const std::vector<ScalarField>& views, const ScalarField& beta,
                              const ForwardModel& model, double lambda_alpha, const SolverConfig& cfg,
                              const std::optional<ScalarField>& alpha_init = std::nullopt) {
  return alpha_step_detailed(views, beta, model, lambda_alpha, cfg, alpha_init).field;
}

/// argmin_{beta >= 0} sum_i a_i beta_i - u_i log beta_i + lambda_beta TV(beta)
/// with a = w sum_j e^{-A_j alpha}, u = sum_j u_j. Starts from `beta_init`,
/// or from a constant field at level = mean(u)/mean(a) when none is given.
/// The SDMM step is cfg.gamma * level.
inline SubproblemResult beta_step_detailed(const std::vector<ScalarField>& views, const ScalarField& alpha,
                                           const ForwardModel& model, double lambda_beta, SolverConfig cfg,
                                           const std::optional<ScalarField>& beta_init = std::nullopt) {
  detail::check_views(views, model);
  require_same_shape(alpha, views.front(), "beta_step alpha");
  require_nonnegative(alpha, "alpha");
  cfg = resolve_config(cfg, views);
  const auto& dims = views.front().dims();
  const auto n = dims_size(dims);
  const double c1 = cfg.c1;
  const auto gain = model_gain(model, dims);
  const auto depths = optical_depths(model, alpha);
  Vec a(n, 0.0);
  Vec u(n, 0.0);
  for (std::size_t j = 0; j < views.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) {
      a[i] += gain[i] * std::exp(-depths[j][i]);
      u[i] += views[j][i];
    }

  std::vector<SplitTerm> terms;
  terms.push_back(detail::scaled_identity_term(
      c1,
      [a, u, c1](Vec& v, double gamma) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = prox_j1_pixel(v[i], a[i], u[i], gamma, c1);
      },
      "poisson"));
  terms.push_back(detail::tv_term(dims, *cfg.c2_beta, lambda_beta));

  double sa = 0.0;
  double su = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    su += u[i];
  }
  const double level = sa > 0.0 && su > 0.0 ? su / sa : 1.0;
  const Vec x0 = beta_init ? beta_init->data() : Vec(n, su > 0.0 ? level : 0.0);
  auto opt = detail::sdmm_options(cfg, cfg.beta_iters);
  // Solving in beta / level with step gamma is the same as solving in beta
  // with step gamma * level; this keeps convergence independent of the count scale.
  opt.gamma *= level;
  detail::start_at(opt, terms, x0);
  auto st = sdmm_solve(terms, x0, opt);
  return {detail::clamp_nonneg(dims, st.x), std::move(st)};
}

inline ScalarField beta_step(const std::vector<ScalarField>& views, const ScalarField& alpha,
                             const ForwardModel& model, double lambda_beta, const SolverConfig& cfg,
                             const std::optional<ScalarField>& beta_init = std::nullopt) {
  return beta_step_detailed(views, alpha, model, lambda_beta, cfg, beta_init).field;
}

/// Warm start, density correction, then cfg.nit alternating rounds.
///
/// Each half-step keeps its previous iterate if the inexact subproblem solve
/// would increase F, so the recorded objective never increases.
inline EstimationResult estimate(const std::vector<ScalarField>& views, const ForwardModel& model,
                                 const SolverConfig& config) {
  detail::check_views(views, model);
  if (views.size() != 2) throw ValidationError("estimate needs exactly two views");
  EstimationResult res;
  res.config = resolve_config(config, views);
  const auto& cfg = res.config;
  const double la = *cfg.lambda_alpha;
  const double lb = *cfg.lambda_beta;

  auto warm = warm_start_alpha_detailed(views, model, la, cfg);
  res.warm_start_alpha = warm.field;
  res.warm_start_trace = std::move(warm.state.trace);
  res.closed_form_beta = beta_closed_form(views, res.warm_start_alpha, model);

  ScalarField alpha = res.warm_start_alpha;
  ScalarField beta = beta_step(views, alpha, model, lb, cfg, res.closed_form_beta);
  double f = objective_F(alpha, beta, views, model, la, lb);
  res.objective_trace.push_back(f);

  for (int k = 0; k < cfg.nit; ++k) {
    auto next_alpha = alpha_step(views, beta, model, la, cfg, alpha);
    if (const double fa = objective_F(next_alpha, beta, views, model, la, lb); fa <= f) {
      alpha = std::move(next_alpha);
      f = fa;
    }
    res.objective_trace.push_back(f);

    auto next_beta = beta_step(views, alpha, model, lb, cfg, beta);
    if (const double fb = objective_F(alpha, next_beta, views, model, la, lb); fb <= f) {
      beta = std::move(next_beta);
      f = fb;
    }
    res.objective_trace.push_back(f);
  }
  res.alpha_hat = std::move(alpha);
  res.beta_hat = std::move(beta);
  return res;
}

struct DirectInversion {
  ScalarField alpha;
  ScalarField beta;
};

/// Two-view inversion without regularisation:
///   v = log((u2 + floor) / (u1 + floor)),  alpha_i = (v_{i+1} - v_i) / 2
/// along the path axis (last entry replicated, clamped at 0), and
/// beta = u1 exp(A1 alpha) / w. Unstable under noise.
inline DirectInversion direct_inversion(const std::vector<ScalarField>& views, const ForwardModel& model,
                                        double floor = 0.5) {
  detail::check_views(views, model);
  if (views.size() != 2) throw ValidationError("direct inversion needs two views");
  if (!(floor > 0.0)) throw ValidationError("direct inversion floor must be positive");
  auto op1 = model.views[0];
  auto op2 = model.views[1];
  std::size_t i1 = 0;
  std::size_t i2 = 1;
  if (op1.axis != op2.axis || op1.direction == op2.direction || op1.scale != op2.scale)
    throw ValidationError("direct inversion needs two opposite views along one axis");
  if (op1.direction == Direction::Reverse) {
    std::swap(op1, op2);
    std::swap(i1, i2);
  }
  const auto& u1 = views[i1];
  const auto& u2 = views[i2];
  const auto& dims = u1.dims();

  ScalarField v(dims);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log((u2[i] + floor) / (u1[i] + floor));

  ScalarField alpha(dims);
  const double path_scale = op1.scale;
  detail::for_each_line(dims, op1.axis, [&](std::size_t base, std::size_t stride, std::size_t extent) {
    for (std::size_t k = 0; k + 1 < extent; ++k) {
      const auto i = base + k * stride;
      alpha[i] = project_nonneg((v[i + stride] - v[i]) / (2.0 * path_scale));
    }
    const auto last = base + (extent - 1) * stride;
    alpha[last] = extent > 1 ? alpha[last - stride] : 0.0;
  });

  const auto gain = model_gain(model, dims);
  const auto depth = path_apply(op1, alpha);
  ScalarField beta(dims);
  for (std::size_t i = 0; i < beta.size(); ++i) beta[i] = u1[i] * std::exp(depth[i]) / gain[i];
  return {std::move(alpha), std::move(beta)};
}

}  // namespace maec
