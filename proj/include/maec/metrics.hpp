#pragma once

#include <cmath>
#include <limits>

#include "maec/errors.hpp"
#include "maec/field.hpp"

namespace maec {

/// 10 log10(||reference||^2 / ||estimate - reference||^2); +inf on exact match.
inline double snr_db(const ScalarField& estimate, const ScalarField& reference) {
  require_same_shape(estimate, reference, "snr_db");
  double signal = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    signal += reference[i] * reference[i];
    const double e = estimate[i] - reference[i];
    error += e * e;
  }
  if (signal == 0.0) throw ValidationError("snr_db: reference is identically zero");
  if (error == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / error);
}

}  // namespace maec
