#pragma once

// Simultaneous Direction Method of Multipliers for
//
//     min_x  sum_i g_i(L_i x),       Q = sum_i L_i^T L_i invertible,
//
// iterating, with y_i, z_i initialised by the caller (zero by default):
//
//     x   = Q^{-1} sum_i L_i^T (y_i - z_i)        (conjugate gradient)
//     s_i = L_i x
//     y_i = prox_{gamma g_i}(s_i + z_i)
//     z_i = z_i + s_i - y_i

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "maec/errors.hpp"
#include "maec/field.hpp"
#include "maec/operators.hpp"

namespace maec {

using Vec = std::vector<double>;

/// Replaces v by prox_{gamma g}(v).
using ProxOracle = std::function<void(Vec& v, double gamma)>;

struct SplitTerm {
  LinearMap apply;
  LinearMap adjoint;
  ProxOracle prox;
  std::string name;
};

struct CgResult {
  Vec x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient for symmetric positive definite `q`, warm-started at x0.
/// Stops when ||q(x) - rhs|| <= tol ||rhs|| or after maxit iterations
/// (converged = false).
inline CgResult cg_solve(const LinearMap& q, const Vec& rhs, Vec x0, double tol, int maxit) {
  if (!(tol > 0.0)) throw ValidationError("cg_solve needs tol > 0");
  if (x0.size() != rhs.size()) throw ValidationError("cg_solve: x0 and rhs sizes differ");
  CgResult res;
  const double rhs_norm = norm2(rhs);
  if (!std::isfinite(rhs_norm)) throw NumericalError("cg_solve: non-finite right-hand side");
  if (rhs_norm == 0.0) {
    res.x.assign(rhs.size(), 0.0);
    res.converged = true;
    return res;
  }
  Vec x = std::move(x0);
  Vec r = q(x);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
  Vec p = r;
  double rr = dot(r, r);
  const double target = tol * rhs_norm;
  int it = 0;
  while (std::sqrt(rr) > target && it < maxit) {
    const Vec qp = q(p);
    const double pqp = dot(p, qp);
    if (!std::isfinite(pqp)) throw NumericalError("cg_solve: non-finite matrix-vector product");
    if (pqp <= 0.0) break;
    const double step = rr / pqp;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += step * p[i];
      r[i] -= step * qp[i];
    }
    const double rr_next = dot(r, r);
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    ++it;
  }
  res.x = std::move(x);
  res.iterations = it;
  res.relative_residual = std::sqrt(rr) / rhs_norm;
  res.converged = res.relative_residual <= tol;
  return res;
}

struct SdmmOptions {
  double gamma = 1.0;
  int iterations = 500;
  double cg_tol = 1e-10;
  int cg_maxit = 1000;
  /// Early exit once the primal residual drops to this value (<= 0 disables).
  double residual_tol = 1e-9;
  /// Optional objective evaluated on every iterate for the trace.
  std::function<double(const Vec&)> objective;
  /// Optional initial auxiliaries, one per term; zero when empty.
  std::vector<Vec> y0;
  std::vector<Vec> z0;
};

struct SdmmTraceRow {
  int iteration = 0;
  double primal_residual = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int cg_iterations = 0;
};

struct SdmmState {
  Vec x;
  std::vector<Vec> y;
  std::vector<Vec> z;
  int iteration = 0;
  /// max_i ||L_i x - y_i|| / (1 + ||y_i||)
  double primal_residual = HUGE_VAL;
  std::vector<SdmmTraceRow> trace;
};

/// x -> sum_i L_i^T L_i x
inline LinearMap normal_operator(const std::vector<SplitTerm>& terms) {
  return [&terms](const Vec& x) {
    Vec out(x.size(), 0.0);
    for (const auto& t : terms) {
      const Vec back = t.adjoint(t.apply(x));
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += back[i];
    }
    return out;
  };
}

inline SdmmState sdmm_solve(const std::vector<SplitTerm>& terms, const Vec& x0, const SdmmOptions& opt) {
  if (terms.empty()) throw ValidationError("sdmm_solve needs at least one term");
  if (!(opt.gamma > 0.0)) throw ValidationError("sdmm_solve needs gamma > 0");

  SdmmState st;
  st.x = x0;
  const auto m = terms.size();
  st.y.resize(m);
  st.z.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto range = terms[i].apply(x0).size();
    st.y[i] = opt.y0.empty() ? Vec(range, 0.0) : opt.y0[i];
    st.z[i] = opt.z0.empty() ? Vec(range, 0.0) : opt.z0[i];
    if (st.y[i].size() != range || st.z[i].size() != range)
      throw ValidationError("sdmm_solve: initial auxiliaries do not match term '" + terms[i].name + "'");
  }

  const auto q = normal_operator(terms);
  for (int k = 1; k <= opt.iterations; ++k) {
    Vec rhs(st.x.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      Vec diff(st.y[i].size());
      for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = st.y[i][j] - st.z[i][j];
      const Vec back = terms[i].adjoint(diff);
      for (std::size_t j = 0; j < rhs.size(); ++j) rhs[j] += back[j];
    }
    auto cg = cg_solve(q, rhs, st.x, opt.cg_tol, opt.cg_maxit);
    st.x = std::move(cg.x);
    for (double v : st.x)
      if (!std::isfinite(v)) throw NumericalError("sdmm_solve: non-finite iterate");

    double residual = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Vec s = terms[i].apply(st.x);
      Vec& y = st.y[i];
      Vec& z = st.z[i];
      for (std::size_t j = 0; j < y.size(); ++j) y[j] = s[j] + z[j];
      terms[i].prox(y, opt.gamma);
      for (double v : y)
        if (!std::isfinite(v)) throw NumericalError("sdmm_solve: prox of term '" + terms[i].name + "' is not finite");
      double gap = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) {
        const double d = s[j] - y[j];
        z[j] += d;
        gap += d * d;
      }
      residual = std::max(residual, std::sqrt(gap) / (1.0 + norm2(y)));
    }
    st.iteration = k;
    st.primal_residual = residual;

    SdmmTraceRow row{k, residual, std::numeric_limits<double>::quiet_NaN(), cg.iterations};
    if (opt.objective) row.objective = opt.objective(st.x);
    st.trace.push_back(row);
    if (opt.residual_tol > 0.0 && residual <= opt.residual_tol) break;
  }
  return st;
}

/// CSV with header "iteration,primal_residual,objective"; NaN cells are left empty.
inline std::string trace_csv(const std::vector<SdmmTraceRow>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,primal_residual,objective\n";
  auto cell = [&out](double v) {
    if (!std::isnan(v)) out << v;
  };
  for (const auto& row : trace) {
    out << row.iteration << ',';
    cell(row.primal_residual);
    out << ',';
    cell(row.objective);
    out << '\n';
  }
  return out.str();
}

inline void write_trace_csv(const std::vector<SdmmTraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << trace_csv(trace);
}

}  // namespace maec
