// maec: simulate attenuated two-view Poisson data and recover attenuation
// and density maps.
//
// Every command writes a JSON run manifest next to its first output (or to
// --manifest); `maec replay <manifest>` re-runs the recorded command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "maec/estimators.hpp"
#include "maec/io.hpp"
#include "maec/metrics.hpp"
#include "maec/scalar_kernels.hpp"
#include "maec/simulate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// "N", "WxH" or "WxHxD" -> row-major dims (slowest axis first).
maec::Dims parse_size(const std::string& text) {
  std::vector<std::size_t> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, 'x')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw UsageError("bad --size '" + text + "' (expected N, WxH or WxHxD)");
    }
    if (pos != item.size() || v == 0) throw UsageError("bad --size '" + text + "' (expected N, WxH or WxHxD)");
    parts.push_back(v);
  }
  if (parts.empty() || parts.size() > 3) throw UsageError("bad --size '" + text + "' (expected N, WxH or WxHxD)");
  return maec::Dims(parts.rbegin(), parts.rend());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json dims_json(const maec::Dims& d) { return json(std::vector<std::size_t>(d.begin(), d.end())); }

json model_json(const maec::ForwardModel& m) {
  json views = json::array();
  for (const auto& op : m.views)
    views.push_back({{"axis", op.axis}, {"direction", maec::to_string(op.direction)}, {"scale", op.scale}});
  return {{"views", views}, {"scale", m.scale}, {"range_squared", m.range_squared}};
}

json config_json(const maec::SolverConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"lambda_alpha", opt(c.lambda_alpha)},
          {"lambda_beta", opt(c.lambda_beta)},
          {"gamma", c.gamma},
          {"c1", c.c1},
          {"c2", opt(c.c2)},
          {"c2_beta", opt(c.c2_beta)},
          {"c3", c.c3},
          {"nit", c.nit},
          {"warm_start_iters", c.warm_start_iters},
          {"alpha_iters", c.alpha_iters},
          {"beta_iters", c.beta_iters},
          {"cg_tol", c.cg_tol},
          {"cg_maxit", c.cg_maxit},
          {"residual_tol", c.residual_tol}};
}

/// Collected while a command runs, then serialised.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  json inputs = json::object();
  json outputs = json::object();
  std::optional<std::uint64_t> seed;

  json to_json() const {
    json j{{"tool", "maec"},
           {"version", MAEC_VERSION},
           {"rng", std::string(maec::kRngName) + "/v" + std::to_string(maec::kRngVersion)},
           {"command", command},
           {"cwd", fs::current_path().string()},
           {"args", args},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    return j;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw maec::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw maec::IoError("write failed for " + path.string());
}

struct MetricRow {
  std::string field;
  double snr = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double seconds = 0.0;
};

/// CSV: command,field,snr_db,iterations,wall_seconds
void write_metrics(const fs::path& path, const std::string& command, const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "command,field,snr_db,iterations,wall_seconds\n";
  for (const auto& r : rows) {
    out << command << ',' << r.field << ',';
    if (!std::isnan(r.snr)) out << r.snr;
    out << ',' << r.iterations << ',' << r.seconds << '\n';
  }
  write_text(path, out.str());
}

/// Writes `field` and records it in the manifest; optionally a PGM sibling.
void emit_field(RunManifest& manifest, const std::string& key, const maec::ScalarField& field, const fs::path& path,
                bool pgm) {
  maec::write_field(field, path);
  manifest.outputs[key] = path.string();
  if (pgm && field.ndim() == 2) {
    const double hi = maec::max_value(field);
    const double lo = std::min(0.0, maec::min_value(field));
    auto pgm_path = path;
    pgm_path += ".pgm";
    maec::export_pgm(field, pgm_path, lo, hi > lo ? hi : lo + 1.0);
    manifest.outputs[key + "_pgm"] = pgm_path.string();
  }
}

maec::ScalarField load(RunManifest& manifest, const std::string& key, const std::string& path) {
  manifest.inputs[key] = path;
  return maec::read_field(path);
}

/// Options shared by commands that describe the acquisition geometry.
struct ModelOptions {
  int views = 2;
  std::size_t axis = 0;
  double scale = 1.0;
  double path_scale = 1.0;
  bool range_squared = false;

  void add_to(CLI::App* app) {
    app->add_option("--views", views, "number of views (1: forward only, 2: forward + reverse)")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    app->add_option("--axis", axis, "path axis (0 = slowest-varying)")->capture_default_str();
    app->add_option("--scale", scale, "intensity constant C")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--path-scale", path_scale, "factor on the cumulative sums")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_flag("--range-squared", range_squared, "lidar 1/(i+1/2)^2 range weight along the path axis");
  }

  maec::ForwardModel model() const {
    maec::ForwardModel m;
    m.views.push_back({axis, maec::Direction::Forward, path_scale});
    if (views == 2) m.views.push_back({axis, maec::Direction::Reverse, path_scale});
    m.scale = scale;
    m.range_squared = range_squared;
    return m;
  }
};

/// Solver flags; unset optionals fall back to SolverConfig defaults.
struct SolverOptions {
  std::optional<double> lambda_alpha;
  std::optional<double> lambda_beta;
  double gamma = 1.0;
  double c1 = 1.0;
  std::optional<double> c2;
  std::optional<double> c2_beta;
  double c3 = 1.0;
  int nit = 0;
  std::optional<int> sdmm_iters;
  int warm_start_iters = maec::SolverConfig{}.warm_start_iters;
  int alpha_iters = maec::SolverConfig{}.alpha_iters;
  int beta_iters = maec::SolverConfig{}.beta_iters;
  double cg_tol = 1e-10;
  int cg_maxit = 0;

  void add_to(CLI::App* app) {
    app->add_option("--lambda-alpha", lambda_alpha, "TV weight on attenuation [default: 3.5 sqrt(mean counts)]");
    app->add_option("--lambda-beta", lambda_beta, "TV weight on density [default: 1.7 / sqrt(mean counts)]");
    app->add_option("--gamma", gamma, "SDMM step")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--c1", c1, "data-term balance constant")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--c2", c2, "TV balance for attenuation [default: n^(1/d)]")->check(CLI::PositiveNumber);
    app->add_option("--c2-beta", c2_beta, "TV balance for density [default: c1]")->check(CLI::PositiveNumber);
    app->add_option("--c3", c3, "positivity balance constant")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--nit", nit, "alternating rounds after warm start + density step")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--sdmm-iters", sdmm_iters, "SDMM iterations for every subproblem (overrides the three below)")
        ->check(CLI::PositiveNumber);
    app->add_option("--warm-start-iters", warm_start_iters)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--alpha-iters", alpha_iters)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--beta-iters", beta_iters)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--cg-tol", cg_tol, "relative CG tolerance")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--cg-maxit", cg_maxit, "CG iteration cap [default: 10 n^(1/d)]")->capture_default_str();
  }

  maec::SolverConfig config() const {
    maec::SolverConfig c;
    c.lambda_alpha = lambda_alpha;
    c.lambda_beta = lambda_beta;
    c.gamma = gamma;
    c.c1 = c1;
    c.c2 = c2;
    c.c2_beta = c2_beta;
    c.c3 = c3;
    c.nit = nit;
    c.warm_start_iters = sdmm_iters.value_or(warm_start_iters);
    c.alpha_iters = sdmm_iters.value_or(alpha_iters);
    c.beta_iters = sdmm_iters.value_or(beta_iters);
    c.cg_tol = cg_tol;
    c.cg_maxit = cg_maxit;
    return c;
  }
};

double snr_or_nan(const maec::ScalarField& estimate, const std::optional<maec::ScalarField>& truth) {
  if (!truth) return std::numeric_limits<double>::quiet_NaN();
  return maec::snr_db(estimate, *truth);
}

std::optional<maec::ScalarField> load_optional(RunManifest& m, const std::string& key, const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load(m, key, path);
}

std::vector<maec::ScalarField> load_views(RunManifest& m, const std::string& u1, const std::string& u2, int count) {
  std::vector<maec::ScalarField> views{load(m, "u1", u1)};
  if (count == 2) {
    if (u2.empty()) throw UsageError("--u2 is required with --views 2");
    views.push_back(load(m, "u2", u2));
    if (!views[0].same_shape(views[1]))
      throw maec::ValidationError("u1 and u2 dims differ: " + maec::dims_string(views[0].dims()) + " vs " +
                                  maec::dims_string(views[1].dims()));
  }
  return views;
}

int total_iterations(const maec::SdmmState& st) { return st.iteration; }

class Cli {
 public:
  Cli() : app_("Attenuation and density recovery from attenuated Poisson views", "maec") {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", MAEC_VERSION);
    add_phantom();
    add_simulate();
    add_estimate();
    add_correct_density();
    add_estimate_attenuation();
    add_prox_bench();
    add_replay();
  }

  int run(const std::vector<std::string>& args) {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
      app_.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app_.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app_.exit(e);
    } catch (const CLI::ParseError& e) {
      std::cerr << "maec: usage error: " << e.what() << '\n';
      return 2;
    }
    args_ = std::vector<std::string>(args.begin() + 1, args.end());
    try {
      action_();
    } catch (const UsageError& e) {
      std::cerr << "maec: usage error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "maec: error: " << e.what() << '\n';
      return 1;
    }
    return 0;
  }

 private:
  RunManifest start(const std::string& command) const {
    RunManifest m;
    m.command = command;
    m.args = args_;
    return m;
  }

  void finish(const RunManifest& m, const std::string& first_output) const {
    fs::path path = manifest_path_.empty() ? fs::path(first_output + ".manifest.json") : fs::path(manifest_path_);
    write_text(path, m.to_json().dump(2) + "\n");
  }

  void add_common(CLI::App* sub) {
    sub->add_option("--manifest", manifest_path_, "run manifest path [default: <first output>.manifest.json]");
  }

  void add_phantom() {
    auto* sub = app_.add_subcommand("phantom", "write a synthetic (beta, alpha) pair");
    sub->add_option("--kind", ph_.kind, "blocks | disks | stripes")->capture_default_str();
    sub->add_option("--size", ph_.size, "N, WxH or WxHxD")->capture_default_str();
    sub->add_option("--beta-max", ph_.beta_max)->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--alpha-max", ph_.alpha_max)->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--seed", ph_.seed)->capture_default_str();
    sub->add_option("--out-beta", ph_.out_beta)->required();
    sub->add_option("--out-alpha", ph_.out_alpha)->required();
    sub->add_flag("--export-pgm", export_pgm_, "also write <output>.pgm for 2D fields");
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_phantom(); }; });
  }

  void run_phantom() {
    auto m = start("phantom");
    const auto kind = parse_kind(ph_.kind);
    const auto dims = parse_size(ph_.size);
    const auto p = maec::make_phantom(kind, dims, ph_.beta_max, ph_.alpha_max, ph_.seed);
    m.seed = ph_.seed;
    m.config = {{"kind", maec::to_string(kind)}, {"dims", dims_json(dims)}, {"beta_max", ph_.beta_max},
                {"alpha_max", ph_.alpha_max}};
    emit_field(m, "beta", p.beta, ph_.out_beta, export_pgm_);
    emit_field(m, "alpha", p.alpha, ph_.out_alpha, export_pgm_);
    finish(m, ph_.out_beta);
  }

  static maec::PhantomKind parse_kind(const std::string& s) {
    try {
      return maec::parse_phantom_kind(s);
    } catch (const maec::ValidationError& e) {
      throw UsageError(e.what());
    }
  }

  void add_simulate() {
    auto* sub = app_.add_subcommand("simulate", "Beer-Lambert intensities and Poisson counts");
    sub->add_option("--beta", sim_.beta, "density field")->required();
    sub->add_option("--alpha", sim_.alpha, "attenuation field")->required();
    sub->add_option("--out-u1", sim_.out_u1, "forward view")->required();
    sub->add_option("--out-u2", sim_.out_u2, "reverse view (required with --views 2)");
    sub->add_option("--seed", sim_.seed)->capture_default_str();
    sub->add_flag("--noiseless", sim_.noiseless, "write the intensities instead of Poisson counts");
    sub->add_flag("--export-pgm", export_pgm_, "also write <output>.pgm for 2D fields");
    sim_.model.add_to(sub);
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_simulate(); }; });
  }

  void run_simulate() {
    auto m = start("simulate");
    if (sim_.model.views == 2 && sim_.out_u2.empty()) throw UsageError("--out-u2 is required with --views 2");
    const auto beta = load(m, "beta", sim_.beta);
    const auto alpha = load(m, "alpha", sim_.alpha);
    const auto model = sim_.model.model();
    auto lam = maec::intensity(model, beta, alpha);
    const auto views = sim_.noiseless ? lam : maec::sample_views(lam, sim_.seed);
    m.seed = sim_.seed;
    m.config = {{"model", model_json(model)}, {"noiseless", sim_.noiseless}};
    emit_field(m, "u1", views[0], sim_.out_u1, export_pgm_);
    if (views.size() == 2) emit_field(m, "u2", views[1], sim_.out_u2, export_pgm_);
    finish(m, sim_.out_u1);
  }

  void add_estimate() {
    auto* sub = app_.add_subcommand("estimate", "joint attenuation + density recovery from two views");
    sub->add_option("--u1", est_.u1, "forward view counts")->required();
    sub->add_option("--u2", est_.u2, "reverse view counts")->required();
    sub->add_option("--out-alpha", est_.out_alpha)->required();
    sub->add_option("--out-beta", est_.out_beta)->required();
    sub->add_option("--out-warm-alpha", est_.out_warm_alpha, "also write the warm-start attenuation");
    sub->add_option("--truth-alpha", est_.truth_alpha, "reference attenuation for SNR metrics");
    sub->add_option("--truth-beta", est_.truth_beta, "reference density for SNR metrics");
    sub->add_option("--metrics", est_.metrics, "metrics CSV path");
    sub->add_option("--trace", est_.trace, "objective trace CSV path");
    sub->add_option("--axis", est_.model.axis, "path axis")->capture_default_str();
    sub->add_option("--scale", est_.model.scale, "intensity constant C")->check(CLI::PositiveNumber);
    sub->add_option("--path-scale", est_.model.path_scale)->check(CLI::PositiveNumber);
    sub->add_flag("--export-pgm", export_pgm_, "also write <output>.pgm for 2D fields");
    est_.solver.add_to(sub);
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_estimate(); }; });
  }

  void run_estimate() {
    auto m = start("estimate");
    const auto t0 = std::chrono::steady_clock::now();
    const auto views = load_views(m, est_.u1, est_.u2, 2);
    const auto truth_alpha = load_optional(m, "truth_alpha", est_.truth_alpha);
    const auto truth_beta = load_optional(m, "truth_beta", est_.truth_beta);
    const auto model = est_.model.model();
    const auto res = maec::estimate(views, model, est_.solver.config());
    const double secs = seconds_since(t0);

    m.config = {{"model", model_json(model)}, {"solver", config_json(res.config)}};
    emit_field(m, "alpha", res.alpha_hat, est_.out_alpha, export_pgm_);
    emit_field(m, "beta", res.beta_hat, est_.out_beta, export_pgm_);
    if (!est_.out_warm_alpha.empty()) emit_field(m, "warm_alpha", res.warm_start_alpha, est_.out_warm_alpha, false);

    const int iters = static_cast<int>(res.warm_start_trace.size());
    if (!est_.metrics.empty()) {
      std::vector<MetricRow> rows{
          {"alpha", snr_or_nan(res.alpha_hat, truth_alpha), iters, secs},
          {"beta", snr_or_nan(res.beta_hat, truth_beta), iters, secs},
          {"warm_start_alpha", snr_or_nan(res.warm_start_alpha, truth_alpha), iters, secs},
          {"closed_form_beta", snr_or_nan(res.closed_form_beta, truth_beta), iters, secs},
      };
      write_metrics(est_.metrics, "estimate", rows);
      m.outputs["metrics"] = est_.metrics;
    }
    if (!est_.trace.empty()) {
      std::vector<maec::SdmmTraceRow> rows;
      for (std::size_t k = 0; k < res.objective_trace.size(); ++k)
        rows.push_back({static_cast<int>(k), std::numeric_limits<double>::quiet_NaN(), res.objective_trace[k], 0});
      maec::write_trace_csv(rows, est_.trace);
      m.outputs["trace"] = est_.trace;
    }
    finish(m, est_.out_alpha);
    if (truth_beta) std::printf("beta SNR %.2f dB\n", maec::snr_db(res.beta_hat, *truth_beta));
    if (truth_alpha) std::printf("alpha SNR %.2f dB\n", maec::snr_db(res.alpha_hat, *truth_alpha));
  }

  void add_correct_density() {
    auto* sub = app_.add_subcommand("correct-density", "density recovery for a known attenuation");
    sub->add_option("--u1", cd_.u1)->required();
    sub->add_option("--u2", cd_.u2);
    sub->add_option("--alpha", cd_.alpha, "known attenuation")->required();
    sub->add_option("--out-beta", cd_.out_beta)->required();
    sub->add_option("--truth-beta", cd_.truth_beta);
    sub->add_option("--metrics", cd_.metrics);
    sub->add_option("--trace", cd_.trace, "SDMM trace CSV path");
    sub->add_flag("--export-pgm", export_pgm_);
    cd_.model.add_to(sub);
    cd_.solver.add_to(sub);
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_correct_density(); }; });
  }

  void run_correct_density() {
    auto m = start("correct-density");
    const auto t0 = std::chrono::steady_clock::now();
    const auto views = load_views(m, cd_.u1, cd_.u2, cd_.model.views);
    const auto alpha = load(m, "alpha", cd_.alpha);
    const auto truth = load_optional(m, "truth_beta", cd_.truth_beta);
    const auto model = cd_.model.model();
    const auto cfg = maec::resolve_config(cd_.solver.config(), views);
    const auto init = maec::beta_closed_form(views, alpha, model);
    const auto res = maec::beta_step_detailed(views, alpha, model, *cfg.lambda_beta, cfg, init);
    const double secs = seconds_since(t0);
    m.config = {{"model", model_json(model)}, {"solver", config_json(cfg)}};
    emit_field(m, "beta", res.field, cd_.out_beta, export_pgm_);
    if (!cd_.metrics.empty()) {
      write_metrics(cd_.metrics, "correct-density",
                    {{"beta", snr_or_nan(res.field, truth), total_iterations(res.state), secs},
                     {"closed_form_beta", snr_or_nan(init, truth), 0, secs}});
      m.outputs["metrics"] = cd_.metrics;
    }
    if (!cd_.trace.empty()) {
      maec::write_trace_csv(res.state.trace, cd_.trace);
      m.outputs["trace"] = cd_.trace;
    }
    finish(m, cd_.out_beta);
  }

  void add_estimate_attenuation() {
    auto* sub = app_.add_subcommand("estimate-attenuation", "attenuation recovery for a known density (lidar mode)");
    sub->add_option("--u1", ea_.u1)->required();
    sub->add_option("--u2", ea_.u2);
    sub->add_option("--beta", ea_.beta, "known density")->required();
    sub->add_option("--out-alpha", ea_.out_alpha)->required();
    sub->add_option("--truth-alpha", ea_.truth_alpha);
    sub->add_option("--metrics", ea_.metrics);
    sub->add_option("--trace", ea_.trace, "SDMM trace CSV path");
    sub->add_flag("--export-pgm", export_pgm_);
    ea_.model.add_to(sub);
    ea_.solver.add_to(sub);
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_estimate_attenuation(); }; });
  }

  void run_estimate_attenuation() {
    auto m = start("estimate-attenuation");
    const auto t0 = std::chrono::steady_clock::now();
    const auto views = load_views(m, ea_.u1, ea_.u2, ea_.model.views);
    const auto beta = load(m, "beta", ea_.beta);
    const auto truth = load_optional(m, "truth_alpha", ea_.truth_alpha);
    const auto model = ea_.model.model();
    const auto cfg = maec::resolve_config(ea_.solver.config(), views);
    const auto res = maec::alpha_step_detailed(views, beta, model, *cfg.lambda_alpha, cfg);
    const double secs = seconds_since(t0);
    m.config = {{"model", model_json(model)}, {"solver", config_json(cfg)}};
    emit_field(m, "alpha", res.field, ea_.out_alpha, export_pgm_);
    if (!ea_.metrics.empty()) {
      write_metrics(ea_.metrics, "estimate-attenuation",
                    {{"alpha", snr_or_nan(res.field, truth), total_iterations(res.state), secs}});
      m.outputs["metrics"] = ea_.metrics;
    }
    if (!ea_.trace.empty()) {
      maec::write_trace_csv(res.state.trace, ea_.trace);
      m.outputs["trace"] = ea_.trace;
    }
    finish(m, ea_.out_alpha);
  }

  void add_prox_bench() {
    auto* sub = app_.add_subcommand("prox-bench", "Newton iteration counts of the logsumexp prox on a dyadic grid");
    sub->add_option("--out", pb_.out, "per-cell CSV")->required();
    sub->add_option("--min-exp", pb_.min_exp)->capture_default_str();
    sub->add_option("--max-exp", pb_.max_exp)->capture_default_str();
    add_common(sub);
    sub->callback([this] { action_ = [this] { run_prox_bench(); }; });
  }

  void run_prox_bench() {
    auto m = start("prox-bench");
    if (pb_.min_exp > pb_.max_exp) throw UsageError("--min-exp must not exceed --max-exp");
    std::ostringstream csv;
    csv.precision(17);
    csv << "y1_minus_y2,a,lambda,iterations,residual\n";
    int max_it = 0;
    long total = 0;
    long cells = 0;
    double max_res = 0.0;
    for (int e1 = pb_.min_exp; e1 <= pb_.max_exp; ++e1)
      for (int e2 = pb_.min_exp; e2 <= pb_.max_exp; ++e2)
        for (double sign : {1.0, -1.0}) {
          const double diff = sign * std::ldexp(1.0, e1);
          const double a = std::ldexp(1.0, e2);
          const auto r = maec::prox_lse2(diff, 0.0, a);
          csv << diff << ',' << a << ',' << r.lambda << ',' << r.stats.iterations << ',' << r.stats.residual << '\n';
          max_it = std::max(max_it, r.stats.iterations);
          max_res = std::max(max_res, r.stats.residual);
          total += r.stats.iterations;
          ++cells;
        }
    write_text(pb_.out, csv.str());
    m.config = {{"min_exp", pb_.min_exp}, {"max_exp", pb_.max_exp}};
    m.outputs["csv"] = pb_.out;
    finish(m, pb_.out);
    std::printf("cells %ld  max iterations %d  mean iterations %.3f  max residual %.3g\n", cells, max_it,
                static_cast<double>(total) / static_cast<double>(cells), max_res);
  }

  void add_replay() {
    auto* sub = app_.add_subcommand("replay", "re-run the command recorded in a manifest");
    sub->add_option("manifest", replay_path_)->required();
    sub->callback([this] { action_ = [this] { run_replay(); }; });
  }

  void run_replay() {
    std::ifstream in(replay_path_);
    if (!in) throw maec::IoError("cannot open " + replay_path_);
    const auto j = json::parse(in);
    if (j.value("tool", "") != "maec") throw UsageError(replay_path_ + " is not a maec manifest");
    if (j.value("version", "") != std::string(MAEC_VERSION))
      std::cerr << "maec: warning: manifest written by version " << j.value("version", "?") << '\n';
    std::vector<std::string> args{"maec"};
    for (const auto& a : j.at("args")) args.push_back(a.get<std::string>());
    if (j.contains("cwd")) fs::current_path(j.at("cwd").get<std::string>());
    Cli inner;
    if (const int rc = inner.run(args); rc != 0) throw std::runtime_error("replayed command failed");
  }

  struct PhantomArgs {
    std::string kind = "blocks";
    std::string size = "64x64";
    double beta_max = 100.0;
    double alpha_max = 0.03;
    std::uint64_t seed = 0;
    std::string out_beta, out_alpha;
  };
  struct SimulateArgs {
    std::string beta, alpha, out_u1, out_u2;
    std::uint64_t seed = 0;
    bool noiseless = false;
    ModelOptions model;
  };
  struct EstimateArgs {
    std::string u1, u2, out_alpha, out_beta, out_warm_alpha, truth_alpha, truth_beta, metrics, trace;
    ModelOptions model;
    SolverOptions solver;
  };
  struct CorrectDensityArgs {
    std::string u1, u2, alpha, out_beta, truth_beta, metrics, trace;
    ModelOptions model;
    SolverOptions solver;
  };
  struct EstimateAttenuationArgs {
    std::string u1, u2, beta, out_alpha, truth_alpha, metrics, trace;
    ModelOptions model;
    SolverOptions solver;
  };
  struct ProxBenchArgs {
    std::string out;
    int min_exp = -10;
    int max_exp = 20;
  };

  CLI::App app_;
  std::function<void()> action_;
  std::vector<std::string> args_;
  std::string manifest_path_;
  std::string replay_path_;
  bool export_pgm_ = false;
  PhantomArgs ph_;
  SimulateArgs sim_;
  EstimateArgs est_;
  CorrectDensityArgs cd_;
  EstimateAttenuationArgs ea_;
  ProxBenchArgs pb_;
};

}  // namespace

int main(int argc, char** argv) {
  Cli cli;
  return cli.run(std::vector<std::string>(argv, argv + argc));
}
