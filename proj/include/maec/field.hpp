#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "maec/errors.hpp"

namespace maec {

using Dims = std::vector<std::size_t>;

inline std::size_t dims_size(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::string s;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k) s += 'x';
    s += std::to_string(dims[k]);
  }
  return s;
}

inline void check_dims(const Dims& dims) {
  if (dims.empty() || dims.size() > 3)
    throw ValidationError("field dimension must be 1, 2 or 3, got " + std::to_string(dims.size()));
  for (auto e : dims)
    if (e == 0) throw ValidationError("field extents must be positive");
}

/// Row-major real raster of dimension 1 to 3. Axis 0 is the slowest-varying.
class ScalarField {
 public:
  ScalarField() = default;

  explicit ScalarField(Dims dims, double fill = 0.0) : dims_(std::move(dims)) {
    check_dims(dims_);
    data_.assign(dims_size(dims_), fill);
  }

  ScalarField(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != dims_size(dims_))
      throw ValidationError("field data length " + std::to_string(data_.size()) +
                            " does not match dims " + dims_string(dims_));
  }

  const Dims& dims() const { return dims_; }
  std::size_t ndim() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Distance in flat index between neighbours along `axis`.
  std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t k = axis + 1; k < dims_.size(); ++k) s *= dims_[k];
    return s;
  }

  bool same_shape(const ScalarField& other) const { return dims_ == other.dims_; }

  bool operator==(const ScalarField&) const = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

/// One ScalarField per spatial axis, all with the same dims.
class VectorField {
 public:
  VectorField() = default;

  explicit VectorField(const Dims& dims) {
    check_dims(dims);
    components_.assign(dims.size(), ScalarField(dims));
  }

  explicit VectorField(std::vector<ScalarField> components) : components_(std::move(components)) {
    if (components_.empty()) throw ValidationError("vector field needs at least one component");
    for (const auto& c : components_)
      if (!c.same_shape(components_.front()))
        throw ValidationError("vector field components must share dims");
  }

  const Dims& dims() const { return components_.front().dims(); }
  std::size_t ncomp() const { return components_.size(); }
  ScalarField& operator[](std::size_t k) { return components_[k]; }
  const ScalarField& operator[](std::size_t k) const { return components_[k]; }

 private:
  std::vector<ScalarField> components_;
};

inline void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what) {
  if (!a.same_shape(b))
    throw ValidationError(std::string(what) + ": dims mismatch " + dims_string(a.dims()) + " vs " +
                          dims_string(b.dims()));
}

inline void require_nonnegative(const ScalarField& f, const char* what) {
  for (double v : f.values())
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(what) + " must be finite and nonnegative");
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_value(const ScalarField& f) {
  return *std::max_element(f.data().begin(), f.data().end());
}

inline double min_value(const ScalarField& f) {
  return *std::min_element(f.data().begin(), f.data().end());
}

inline double mean_value(const ScalarField& f) {
  return std::accumulate(f.data().begin(), f.data().end(), 0.0) / static_cast<double>(f.size());
}

}  // namespace maec
