#pragma once

// Beer-Lambert forward model, Poisson sampling and synthetic phantoms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maec/errors.hpp"
#include "maec/field.hpp"
#include "maec/operators.hpp"
#include "maec/random.hpp"

namespace maec {

/// lambda_j = C w beta exp(-A_j alpha), one A_j per view.
/// w = 1/(i + 1/2)^2 along the first view's axis when range_squared is set
/// (lidar range attenuation), else 1.
struct ForwardModel {
  std::vector<PathOperator> views;
  double scale = 1.0;
  bool range_squared = false;

  /// Two opposite views along `axis`: A1 forward, A2 reverse.
  static ForwardModel two_view(std::size_t axis = 0, double path_scale = 1.0) {
    return {{{axis, Direction::Forward, path_scale}, {axis, Direction::Reverse, path_scale}}, 1.0, false};
  }

  static ForwardModel lidar(std::size_t axis = 0, double scale = 1.0) {
    return {{{axis, Direction::Forward, 1.0}}, scale, true};
  }
};

inline void validate_model(const ForwardModel& model, const Dims& dims) {
  if (model.views.empty()) throw ValidationError("forward model needs at least one view");
  if (!(model.scale > 0.0)) throw ValidationError("forward model scale must be positive");
  for (const auto& op : model.views) {
    if (op.axis >= dims.size()) throw ValidationError("view axis out of range");
    if (!(op.scale > 0.0)) throw ValidationError("path scale must be positive");
  }
}

/// Per-pixel factor C w multiplying beta.
inline ScalarField model_gain(const ForwardModel& model, const Dims& dims) {
  validate_model(model, dims);
  ScalarField gain(dims, model.scale);
  if (!model.range_squared) return gain;
  const auto axis = model.views.front().axis;
  detail::for_each_line(dims, axis, [&](std::size_t base, std::size_t stride, std::size_t extent) {
    for (std::size_t k = 0; k < extent; ++k) {
      const double r = static_cast<double>(k) + 0.5;
      gain[base + k * stride] = model.scale / (r * r);
    }
  });
  return gain;
}

/// Optical depths A_j alpha, one per view.
inline std::vector<ScalarField> optical_depths(const ForwardModel& model, const ScalarField& alpha) {
  std::vector<ScalarField> out;
  out.reserve(model.views.size());
  for (const auto& op : model.views) out.push_back(path_apply(op, alpha));
  return out;
}

inline std::vector<ScalarField> intensity(const ForwardModel& model, const ScalarField& beta,
                                          const ScalarField& alpha) {
  require_same_shape(beta, alpha, "intensity");
  require_nonnegative(beta, "beta");
  require_nonnegative(alpha, "alpha");
  const auto gain = model_gain(model, beta.dims());
  auto views = optical_depths(model, alpha);
  for (auto& v : views)
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = gain[i] * beta[i] * std::exp(-v[i]);
  return views;
}

/// One Poisson draw. Inversion by sequential search below 30, otherwise
/// Hormann's transformed rejection with squeeze (PTRS).
inline double poisson_draw(double lam, RandomStream& rng) {
  if (lam == 0.0) return 0.0;
  if (lam < 30.0) {
    const double u = rng.uniform();
    double p = std::exp(-lam);
    double cdf = p;
    double k = 0.0;
    while (u > cdf && k < 1000.0) {
      k += 1.0;
      p *= lam / k;
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(lam);
  const double loglam = std::log(lam);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lam + 0.43);
    if (us >= 0.07 && v <= vr) return k;
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -lam + k * loglam - std::lgamma(k + 1.0))
      return k;
  }
}

/// Independent Poisson counts per pixel. Pixel i draws from stream
/// `stream_base + i` of `seed`, so the result does not depend on traversal
/// order; distinct views should use disjoint bases (see view_stream_base).
inline ScalarField poisson_sample(const ScalarField& lam, std::uint64_t seed, std::uint64_t stream_base = 0) {
  ScalarField counts(lam.dims());
  for (std::size_t i = 0; i < lam.size(); ++i) {
    const double l = lam[i];
    if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("Poisson intensity must be finite and >= 0");
    RandomStream rng(seed, stream_base + i);
    counts[i] = poisson_draw(l, rng);
  }
  return counts;
}

inline constexpr std::uint64_t view_stream_base(std::size_t view) { return std::uint64_t{view + 1} << 40; }

/// Poisson counts for every view of `lam`, each view on its own stream range.
inline std::vector<ScalarField> sample_views(const std::vector<ScalarField>& lam, std::uint64_t seed) {
  std::vector<ScalarField> out;
  for (std::size_t j = 0; j < lam.size(); ++j) out.push_back(poisson_sample(lam[j], seed, view_stream_base(j)));
  return out;
}

enum class PhantomKind { Blocks, Disks, Stripes };

inline PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "blocks") return PhantomKind::Blocks;
  if (s == "disks") return PhantomKind::Disks;
  if (s == "stripes") return PhantomKind::Stripes;
  throw ValidationError("unknown phantom kind '" + s + "' (expected blocks, disks or stripes)");
}

inline const char* to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::Blocks: return "blocks";
    case PhantomKind::Disks: return "disks";
    case PhantomKind::Stripes: return "stripes";
  }
  return "?";
}

struct Phantom {
  ScalarField beta;
  ScalarField alpha;
};

namespace detail {

inline std::vector<std::size_t> unravel(std::size_t flat, const Dims& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    idx[k] = flat % dims[k];
    flat /= dims[k];
  }
  return idx;
}

/// Affine rescale so that min -> 0 and max -> peak.
inline void normalize_to(ScalarField& f, double peak) {
  const double lo = min_value(f);
  const double hi = max_value(f);
  for (auto& v : f.values()) v = hi > lo ? (v - lo) / (hi - lo) * peak : peak;
}

/// Grid of max(2, extent/16) blocks per axis, one random level per block.
inline ScalarField blocks_pattern(const Dims& dims, RandomStream& rng) {
  Dims nblocks(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) nblocks[k] = std::min(dims[k], std::max<std::size_t>(2, dims[k] / 16));
  std::vector<double> levels(dims_size(nblocks));
  for (auto& l : levels) l = rng.uniform();
  ScalarField f(dims);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto idx = unravel(i, dims);
    std::size_t b = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) b = b * nblocks[k] + idx[k] * nblocks[k] / dims[k];
    f[i] = levels[b];
  }
  return f;
}

/// Random balls with random levels on a zero background.
inline ScalarField disks_pattern(const Dims& dims, RandomStream& rng) {
  const double smallest = static_cast<double>(*std::min_element(dims.begin(), dims.end()));
  ScalarField f(dims);
  const int count = 6;
  for (int d = 0; d < count; ++d) {
    std::vector<double> center(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) center[k] = rng.uniform() * static_cast<double>(dims[k]);
    const double radius = std::max(1.0, smallest * (0.08 + 0.22 * rng.uniform()));
    const double level = 0.2 + 0.8 * rng.uniform();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto idx = unravel(i, dims);
      double r2 = 0.0;
      for (std::size_t k = 0; k < dims.size(); ++k) {
        const double dx = static_cast<double>(idx[k]) + 0.5 - center[k];
        r2 += dx * dx;
      }
      if (r2 <= radius * radius) f[i] = level;
    }
  }
  return f;
}

/// Bands along the last axis whose widths shrink from extent/4 down to a
/// single pixel, so the finest bands sit at the Nyquist limit.
inline ScalarField stripes_pattern(const Dims& dims, RandomStream& rng) {
  const auto axis = dims.size() - 1;
  const auto extent = dims[axis];
  std::vector<double> profile(extent);
  std::size_t pos = 0;
  std::size_t width = std::max<std::size_t>(1, extent / 4);
  bool on = true;
  const double hi = 0.6 + 0.4 * rng.uniform();
  const double lo = 0.3 * rng.uniform();
  while (pos < extent) {
    for (std::size_t k = 0; k < width && pos < extent; ++k) profile[pos++] = on ? hi : lo;
    on = !on;
    if (on) width = std::max<std::size_t>(1, width / 2);
  }
  ScalarField f(dims);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = profile[i % extent];
  return f;
}

inline ScalarField phantom_pattern(PhantomKind kind, const Dims& dims, RandomStream& rng) {
  switch (kind) {
    case PhantomKind::Blocks: return blocks_pattern(dims, rng);
    case PhantomKind::Disks: return disks_pattern(dims, rng);
    case PhantomKind::Stripes: return stripes_pattern(dims, rng);
  }
  throw ValidationError("invalid phantom kind");
}

}  // namespace detail

/// Piecewise-constant (beta, alpha) pair with min 0 and the requested maxima.
/// Beta and alpha use independent streams 0 and 1 of `seed`.
inline Phantom make_phantom(PhantomKind kind, const Dims& dims, double beta_max, double alpha_max,
                            std::uint64_t seed) {
  check_dims(dims);
  if (!(beta_max > 0.0) || !(alpha_max > 0.0)) throw ValidationError("phantom maxima must be positive");
  RandomStream beta_rng(seed, 0);
  RandomStream alpha_rng(seed, 1);
  Phantom p{detail::phantom_pattern(kind, dims, beta_rng), detail::phantom_pattern(kind, dims, alpha_rng)};
  detail::normalize_to(p.beta, beta_max);
  detail::normalize_to(p.alpha, alpha_max);
  return p;
}

}  // namespace maec
