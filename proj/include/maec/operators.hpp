#pragma once

// Axis-aligned integral operators (inclusive cumulative sums), the forward
// difference gradient with Neumann boundary, its negative adjoint, and a
// power-iteration probe for operator norms.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maec/errors.hpp"
#include "maec/field.hpp"
#include "maec/random.hpp"

namespace maec {

enum class Direction { Forward, Reverse };

inline Direction opposite(Direction d) {
  return d == Direction::Forward ? Direction::Reverse : Direction::Forward;
}

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "reverse"; }

/// Cumulative sum along one axis. Forward sums indices 0..i (unit diagonal),
/// reverse sums i..N-1. `scale` multiplies the whole sum.
struct PathOperator {
  std::size_t axis = 0;
  Direction direction = Direction::Forward;
  double scale = 1.0;

  PathOperator mirrored() const { return {axis, opposite(direction), scale}; }
};

namespace detail {

/// Calls fn(base, stride, extent) once per 1D line along `axis`.
template <typename Fn>
void for_each_line(const Dims& dims, std::size_t axis, Fn&& fn) {
  std::size_t inner = 1;
  for (std::size_t k = axis + 1; k < dims.size(); ++k) inner *= dims[k];
  std::size_t outer = 1;
  for (std::size_t k = 0; k < axis; ++k) outer *= dims[k];
  const std::size_t extent = dims[axis];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t r = 0; r < inner; ++r) fn(o * extent * inner + r, inner, extent);
}

inline void cumsum_lines(const Dims& dims, std::size_t axis, Direction dir, double scale,
                         std::span<const double> x, std::span<double> y) {
  for_each_line(dims, axis, [&](std::size_t base, std::size_t stride, std::size_t extent) {
    double acc = 0.0;
    if (dir == Direction::Forward) {
      for (std::size_t k = 0; k < extent; ++k) {
        acc += x[base + k * stride];
        y[base + k * stride] = scale * acc;
      }
    } else {
      for (std::size_t k = extent; k-- > 0;) {
        acc += x[base + k * stride];
        y[base + k * stride] = scale * acc;
      }
    }
  });
}

inline void check_axis(const PathOperator& op, const Dims& dims) {
  if (op.axis >= dims.size())
    throw ValidationError("path axis " + std::to_string(op.axis) + " out of range for " +
                          std::to_string(dims.size()) + "D field");
}

}  // namespace detail

inline ScalarField path_apply(const PathOperator& op, const ScalarField& x) {
  detail::check_axis(op, x.dims());
  ScalarField y(x.dims());
  detail::cumsum_lines(x.dims(), op.axis, op.direction, op.scale, x.values(), y.values());
  return y;
}

/// Transpose of path_apply: the mirrored cumulative sum with the same scale.
inline ScalarField path_adjoint(const PathOperator& op, const ScalarField& y) {
  detail::check_axis(op, y.dims());
  ScalarField x(y.dims());
  detail::cumsum_lines(y.dims(), op.axis, opposite(op.direction), op.scale, y.values(), x.values());
  return x;
}

/// Forward differences per axis; the last difference along each axis is zero.
inline VectorField grad(const ScalarField& x) {
  VectorField g(x.dims());
  for (std::size_t axis = 0; axis < x.ndim(); ++axis) {
    auto& out = g[axis];
    detail::for_each_line(x.dims(), axis, [&](std::size_t base, std::size_t stride, std::size_t extent) {
      for (std::size_t k = 0; k + 1 < extent; ++k) {
        const auto i = base + k * stride;
        out[i] = x[i + stride] - x[i];
      }
      out[base + (extent - 1) * stride] = 0.0;
    });
  }
  return g;
}

/// Negative adjoint of grad: <grad x, v> = -<x, div v>.
inline ScalarField div(const VectorField& v) {
  ScalarField out(v.dims());
  for (std::size_t axis = 0; axis < v.ncomp(); ++axis) {
    const auto& p = v[axis];
    detail::for_each_line(v.dims(), axis, [&](std::size_t base, std::size_t stride, std::size_t extent) {
      if (extent == 1) return;
      out[base] += p[base];
      for (std::size_t k = 1; k + 1 < extent; ++k) {
        const auto i = base + k * stride;
        out[i] += p[i] - p[i - stride];
      }
      const auto last = base + (extent - 1) * stride;
      out[last] -= p[last - stride];
    });
  }
  return out;
}

/// Isotropic total variation: sum over pixels of the Euclidean norm of grad x.
inline double total_variation(const ScalarField& x) {
  const auto g = grad(x);
  double tv = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.ncomp(); ++k) s += g[k][i] * g[k][i];
    tv += std::sqrt(s);
  }
  return tv;
}

/// Flat-vector linear map; the SDMM and power iteration work on these.
using LinearMap = std::function<std::vector<double>(const std::vector<double>&)>;

/// Largest singular value estimate of A via power iteration on A^T A.
/// Returns the running maximum of ||A x_k|| over unit iterates x_k, which
/// never decreases with `iters`.
inline double power_iteration(const LinearMap& apply, const LinearMap& adjoint, const Dims& dims,
                              int iters, std::uint64_t seed) {
  if (iters < 1) throw ValidationError("power_iteration needs iters >= 1");
  const auto n = dims_size(dims);
  RandomStream rng(seed, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform();
  double best = 0.0;
  for (int it = 0; it < iters; ++it) {
    const double nx = norm2(x);
    if (nx == 0.0) break;
    for (auto& v : x) v /= nx;
    const auto ax = apply(x);
    best = std::max(best, norm2(ax));
    x = adjoint(ax);
  }
  return best;
}

/// Flat-vector wrappers over path_apply / path_adjoint.
inline LinearMap path_map(const PathOperator& op, const Dims& dims) {
  return [op, dims](const std::vector<double>& x) { return path_apply(op, ScalarField(dims, x)).data(); };
}

inline LinearMap path_adjoint_map(const PathOperator& op, const Dims& dims) {
  return [op, dims](const std::vector<double>& y) { return path_adjoint(op, ScalarField(dims, y)).data(); };
}

}  // namespace maec
