#pragma once

// Per-pixel proximal kernels.
//
//   lambert_w_exp   W(e^z) without ever forming e^z for large z
//   prox_lse2       prox of a*logsumexp in 2D by a 1D Newton solve
//   prox_g1_pixel   warm-start data term (logsumexp of the two views)
//   prox_h1_pixel   attenuation data term, closed form through W
//   prox_j1_pixel   density data term, positive root of a quadratic
//   group_soft_threshold, project_nonneg   TV and positivity proxes

#include <cfloat>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maec/errors.hpp"

namespace maec {

struct ProxStats {
  int iterations = 0;
  double residual = 0.0;
};

inline constexpr int kMaxKernelIterations = 100;
/// Newton/Halley step tolerance.
inline constexpr double kKernelEps = 1e-16;
/// Below this the Newton iterate of prox_lse2 saturates at lambda = 1.
inline const double kLogKernelEps = std::log(kKernelEps);

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite");
}

inline void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite and >= 0");
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite and > 0");
}

[[noreturn]] inline void iteration_cap(const char* kernel) {
  throw NumericalError(std::string(kernel) + ": no convergence within " + std::to_string(kMaxKernelIterations) +
                       " iterations");
}

}  // namespace detail

struct LambertResult {
  double w = 0.0;
  ProxStats stats;
};

/// Solves w e^w = e^z for the principal branch, w > 0.
///
/// For z > 0.5 Newton runs on log(w) + w = z from w0 = z - log z, so
/// arguments far beyond the double range (z > 709) are handled. Otherwise
/// Halley's method runs on w e^w = t, t = e^z, from the branch-point Pade
/// start sqrt(5.43 t + 2) - 1, or from the series t - t^2 when t < 1e-3.
inline LambertResult lambert_w_exp(double z) {
  detail::require_finite(z, "lambert_w_exp argument");
  LambertResult r;
  double prev_step = HUGE_VAL;
  if (z > 0.5) {
    double w = z - std::log(z);
    for (;;) {
      const double step = (std::log(w) + w - z) / (1.0 / w + 1.0);
      const double size = std::abs(step);
      if (size <= 4.0 * DBL_EPSILON * std::max(1.0, w)) break;
      if (size < 1e-10 * w && size >= prev_step) break;
      if (++r.stats.iterations > kMaxKernelIterations) detail::iteration_cap("lambert_w_exp");
      w -= step;
      prev_step = size;
    }
    r.w = w;
    r.stats.residual = std::abs(std::log(w) + w - z);
    return r;
  }

  const double t = std::exp(z);
  double w = t < 1e-3 ? t - t * t : std::sqrt(5.43 * t + 2.0) - 1.0;
  for (;;) {
    const double ew = std::exp(w);
    const double f = w * ew - t;
    const double step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
    const double size = std::abs(step);
    if (size <= 4.0 * DBL_EPSILON * std::abs(w)) break;
    if (size < 1e-10 * std::abs(w) && size >= prev_step) break;
    if (++r.stats.iterations > kMaxKernelIterations) detail::iteration_cap("lambert_w_exp");
    w -= step;
    prev_step = size;
  }
  r.w = w;
  r.stats.residual = std::abs(w * std::exp(w) - t);
  return r;
}

struct Lse2Result {
  double x1 = 0.0;
  double x2 = 0.0;
  /// Weight of the larger coordinate in the simplex parametrisation
  /// x = y - a * (lambda, 1 - lambda) (after ordering y1 >= y2).
  double lambda = 0.5;
  ProxStats stats;
};

/// prox_{a lse}(y1, y2) = argmin_x a log(e^x1 + e^x2) + |x - y|^2 / 2.
///
/// With y1 >= y2 the minimizer is x = (y1 - a l, y2 - a (1 - l)) where l
/// is the root in [1/2, 1) of
///   f(l) = y2 - y1 - a + 2 a l - log(1 - l) + log(l).
/// Newton runs from the upper bracket 1/(1 + e^(y2 - y1)) and decreases
/// monotonically to the root; iterates are stored as mu = 1 - l so that
/// values of l close to 1 keep full precision. When y2 - y1 + a < log(1e-16)
/// the root equals 1 to machine precision and x = (y1 - a, y2).
///
/// stats.residual is |f(l) / f'(l)| at the returned l (for the saturated
/// case, the width 1 - 1/(1 + e^(y2 - y1 + a)) of the bracket).
inline Lse2Result prox_lse2(double y1, double y2, double a) {
  detail::require_finite(y1, "prox_lse2 y1");
  detail::require_finite(y2, "prox_lse2 y2");
  detail::require_nonneg(a, "prox_lse2 a");

  const bool swapped = y1 < y2;
  if (swapped) std::swap(y1, y2);
  const double delta = y2 - y1;  // <= 0

  Lse2Result r;
  if (a == 0.0) {
    r.x1 = y1;
    r.x2 = y2;
    r.lambda = 1.0 / (1.0 + std::exp(delta));
  } else if (delta + a < kLogKernelEps) {
    r.x1 = y1 - a;
    r.x2 = y2;
    r.lambda = 1.0;
    r.stats.residual = -std::expm1(-std::log1p(std::exp(delta + a)));
  } else {
    auto f = [&](double mu) { return delta + a * (1.0 - 2.0 * mu) - std::log(mu) + std::log1p(-mu); };
    auto fprime = [&](double mu) { return 2.0 * a + 1.0 / (mu * (1.0 - mu)); };
    double mu = std::min(1.0 / (1.0 + std::exp(-delta)) + kKernelEps, 0.5);
    double prev_step = HUGE_VAL;
    for (;;) {
      const double step = f(mu) / fprime(mu);
      const double size = std::abs(step);
      if (size <= kKernelEps) break;
      if (size < 1e-8 * mu && size >= prev_step) break;
      if (++r.stats.iterations > kMaxKernelIterations) detail::iteration_cap("prox_lse2");
      mu = std::clamp(mu + step, DBL_MIN, 0.5);
      prev_step = size;
    }
    r.lambda = 1.0 - mu;
    r.x1 = y1 - a * (1.0 - mu);
    r.x2 = y2 - a * mu;
    r.stats.residual = std::abs(f(mu) / fprime(mu));
  }
  if (swapped) std::swap(r.x1, r.x2);
  return r;
}

struct PixelPair {
  double x1 = 0.0;
  double x2 = 0.0;
  ProxStats stats;
};

/// prox of gamma * g where, for one pixel,
///   g(x) = u1 x1/c1 + u2 x2/c1 + (u1 + u2) log(e^(-x1/c1) + e^(-x2/c1)).
/// For c1 = 1 this is -prox_{a lse}(gamma u - z) with a = gamma (u1 + u2).
inline PixelPair prox_g1_pixel(double z1, double z2, double u1, double u2, double gamma, double c1) {
  detail::require_nonneg(u1, "prox_g1_pixel u1");
  detail::require_nonneg(u2, "prox_g1_pixel u2");
  detail::require_positive(gamma, "prox_g1_pixel gamma");
  detail::require_positive(c1, "prox_g1_pixel c1");
  // prox_{gamma G(./c)}(z) = c prox_{(gamma/c^2) G}(z/c)
  const double g = gamma / (c1 * c1);
  const auto p = prox_lse2(g * u1 - z1 / c1, g * u2 - z2 / c1, g * (u1 + u2));
  return {-c1 * p.x1, -c1 * p.x2, p.stats};
}

/// argmin_z gamma (u z/c1 + beta e^(-z/c1)) + (z - z0)^2 / 2.
///
/// For c1 = 1, z* = s + W(gamma beta e^(-s)) with s = z0 - gamma u; the
/// Lambert argument is passed in log form so that e^(-s) never overflows.
inline double prox_h1_pixel(double z0, double u, double beta, double gamma, double c1) {
  detail::require_finite(z0, "prox_h1_pixel z0");
  detail::require_nonneg(u, "prox_h1_pixel u");
  detail::require_nonneg(beta, "prox_h1_pixel beta");
  detail::require_positive(gamma, "prox_h1_pixel gamma");
  detail::require_positive(c1, "prox_h1_pixel c1");
  const double g = gamma / (c1 * c1);
  const double shift = z0 / c1 - g * u;
  if (beta == 0.0) return c1 * shift;
  return c1 * (shift + lambert_w_exp(std::log(g * beta) - shift).w);
}

/// argmin_{z >= 0} (z - z0)^2 / 2 + gamma (a z/c1 - u log(z/c1)).
inline double prox_j1_pixel(double z0, double a, double u, double gamma, double c1) {
  detail::require_finite(z0, "prox_j1_pixel z0");
  detail::require_nonneg(a, "prox_j1_pixel a");
  detail::require_nonneg(u, "prox_j1_pixel u");
  detail::require_positive(gamma, "prox_j1_pixel gamma");
  detail::require_positive(c1, "prox_j1_pixel c1");
  const double b = gamma * a / c1 - z0;
  if (u == 0.0) return std::max(-b, 0.0);
  const double disc = std::sqrt(b * b + 4.0 * gamma * u);
  // Positive root of z^2 + b z - gamma u, in the cancellation-free form.
  return b >= 0.0 ? 2.0 * gamma * u / (b + disc) : 0.5 * (disc - b);
}

/// v * max(0, 1 - t/|v|), in place.
inline void group_soft_threshold(std::span<double> v, double t) {
  if (!(t >= 0.0)) throw ValidationError("group_soft_threshold needs t >= 0");
  double s = 0.0;
  for (double x : v) s += x * x;
  const double norm = std::sqrt(s);
  const double factor = norm > t ? 1.0 - t / norm : 0.0;
  for (double& x : v) x *= factor;
}

inline std::vector<double> group_soft_threshold(std::vector<double> v, double t) {
  group_soft_threshold(std::span<double>(v), t);
  return v;
}

inline double project_nonneg(double z) { return z > 0.0 ? z : 0.0; }

}  // namespace maec
