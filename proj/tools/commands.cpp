#include "commands.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "mollify/estimator.hpp"
#include "mollify/harness.hpp"
#include "mollify/kernels.hpp"
#include "mollify/metrics.hpp"
#include "mollify/model_io.hpp"
#include "mollify/models.hpp"
#include "mollify/oracle.hpp"

namespace mollify::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Formatting and output

std::string num(double v) { return fmt::format("{:.17g}", v); }

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json json_vector(const Vector& v) {
  json a = json::array();
  for (double x : v) a.push_back(json_number(x));
  return a;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error("failed writing '" + path.string() + "'");
}

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  if (with_seed) sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();
  sub->add_option("--out", c.out, "Output file (default: stdout, no manifest)");
}

/// Writes the primary output to --out (plus its manifest) or to stdout.
void emit(const Common& c, std::ostream& out, const std::string& content, RunManifest manifest) {
  if (c.out.empty()) {
    out << content;
    return;
  }
  write_file(c.out, content);
  manifest.outputs.insert(manifest.outputs.begin(), c.out);
  write_manifest(manifest, manifest_path_for(c.out));
}

std::size_t grid_count(double from, double to, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw UsageError("--step must be positive");
  if (!std::isfinite(from) || !std::isfinite(to) || to < from) {
    throw UsageError("--from/--to must be finite with from <= to");
  }
  return static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
}

KernelKind kernel_arg(const std::string& name) {
  try {
    return parse_kernel_kind(name);
  } catch (const ConfigInvalid& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// kernel-table

struct KernelTableFlags {
  Common common;
  std::string kind;
  double epsilon = 1.0;
  double from = -4.0;
  double to = 4.0;
  double step = 0.01;
};

int cmd_kernel_table(const KernelTableFlags& f, const std::vector<std::string>& argv,
                     std::ostream& out) {
  const KernelSpec k(kernel_arg(f.kind), f.epsilon);
  const std::size_t n = grid_count(f.from, f.to, f.step);
  std::string csv = "x,pdf,cdf\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double x = f.from + static_cast<double>(i) * f.step;
    csv += num(x) + "," + num(k.pdf(x)) + "," + num(k.cdf(x)) + "\n";
  }
  RunManifest m{"kernel-table", argv, json::object(), 0, {}, json::object()};
  m.config = {{"kind", f.kind}, {"epsilon", f.epsilon}, {"from", f.from},
              {"to", f.to},     {"step", f.step},       {"rows", n}};
  emit(f.common, out, csv, std::move(m));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// epsilon

struct EpsilonFlags {
  Common common;
  std::string kind;
  double r = 1.0;
  double alpha = 0.9;
};

int cmd_epsilon(const EpsilonFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const KernelKind kind = kernel_arg(f.kind);
  const ConfidenceSpec c{f.r, f.alpha};
  const double eps = solve_epsilon(kind, c);
  const double printed = printed_closed_form_epsilon(kind, c);
  const double printed_residual = std::abs(confidence_residual(kind, printed, c));
  json j;
  j["kind"] = f.kind;
  j["r"] = f.r;
  j["alpha"] = f.alpha;
  j["epsilon"] = eps;
  j["residual"] = std::abs(confidence_residual(kind, eps, c));
  j["closed_form"] = json_number(printed);
  j["closed_form_residual"] = json_number(printed_residual);
  j["closed_form_agrees"] = printed_residual <= 1e-9;
  RunManifest m{"epsilon", argv, {{"kind", f.kind}, {"r", f.r}, {"alpha", f.alpha}}, 0, {}, {}};
  emit(f.common, out, dump(j), std::move(m));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Smoothing commands: smooth, smooth-value, converge

struct LegFlags {
  double epsilon = 0.0;
  double alpha = 0.9;
  double r = 0.0;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* r_opt = nullptr;

  bool any() const { return epsilon_opt->count() + alpha_opt->count() + r_opt->count() > 0; }
};

struct SmoothFlags {
  Common common;
  std::string model;
  std::string input;
  std::vector<double> x;
  std::string mode = "SG";
  std::string kernel = "gaussian";
  std::string param_kernel;
  LegFlags leg;
  LegFlags param_leg;
  std::size_t n = 50;
  std::size_t m = 50;
  std::string nan_policy;
  std::string param_scaling = "relative";
  // converge only
  std::vector<std::size_t> schedule{10, 100, 1000, 10000};
  std::string reference = "auto";
};

void add_leg(CLI::App* sub, LegFlags& leg, const std::string& prefix, const std::string& what) {
  leg.epsilon_opt = sub->add_option("--" + prefix + "epsilon", leg.epsilon,
                                    "Kernel scale for the " + what + " leg");
  leg.alpha_opt = sub->add_option("--" + prefix + "alpha", leg.alpha,
                                  "Confidence level for the " + what + " leg (default 0.9)");
  leg.r_opt = sub->add_option("--" + prefix + "r", leg.r,
                              "Confidence radius for the " + what + " leg");
}

void add_smoothing_flags(CLI::App* sub, SmoothFlags& f, bool value_only) {
  add_common(sub, f.common, true);
  sub->add_option("--model", f.model, "Model JSON file, or 'toy' for the built-in toy function")
      ->required();
  sub->add_option("--input", f.input, "Input point as a JSON array file");
  sub->add_option("--x", f.x, "Input point inline, comma separated")->delimiter(',');
  if (!value_only) sub->add_option("--mode", f.mode, "SG, NG or FG")->capture_default_str();
  sub->add_option("--kernel", f.kernel, "Kernel of the input leg (NG: of the parameter leg)")
      ->capture_default_str();
  add_leg(sub, f.leg, "", "primary");
  sub->add_option("--n", f.n, "Input-leg sample count")->capture_default_str();
  sub->add_option("--nan-policy", f.nan_policy, "error or drop (default: error for SG, drop otherwise)");
  if (!value_only) {
    sub->add_option("--param-kernel", f.param_kernel, "FG parameter-leg kernel (default: --kernel)");
    add_leg(sub, f.param_leg, "param-", "FG parameter");
    sub->add_option("--m", f.m, "Parameter-leg sample count")->capture_default_str();
    sub->add_option("--param-scaling", f.param_scaling, "relative or absolute")
        ->capture_default_str();
  }
}

struct LegResolution {
  KernelSpec kernel;
  json config;
};

LegResolution resolve_leg(KernelKind kind, const LegFlags& leg, double default_r,
                          const std::string& default_r_rule, bool required,
                          const std::string& prefix) {
  const bool has_eps = leg.epsilon_opt->count() > 0;
  const bool has_pair = leg.alpha_opt->count() + leg.r_opt->count() > 0;
  if (has_eps && has_pair) {
    throw UsageError("give either --" + prefix + "epsilon or --" + prefix + "alpha/--" + prefix +
                     "r, not both");
  }
  if (required && !has_eps && !has_pair) {
    throw UsageError("one of --" + prefix + "epsilon or --" + prefix + "alpha/--" + prefix +
                     "r is required");
  }
  json cfg;
  cfg["kind"] = std::string(kernel_name(kind));
  if (has_eps) {
    cfg["epsilon"] = leg.epsilon;
    cfg["epsilon_source"] = "explicit";
    try {
      return {KernelSpec(kind, leg.epsilon), cfg};
    } catch (const ConfigInvalid& e) {
      throw UsageError(e.what());
    }
  }
  const double r = leg.r_opt->count() > 0 ? leg.r : default_r;
  const ConfidenceSpec c{r, leg.alpha};
  double eps = 0.0;
  try {
    eps = solve_epsilon(kind, c);
  } catch (const ConfigInvalid& e) {
    throw UsageError(e.what());
  }
  cfg["epsilon"] = eps;
  cfg["epsilon_source"] = "confidence";
  cfg["alpha"] = leg.alpha;
  cfg["r"] = r;
  if (leg.r_opt->count() == 0) cfg["r_rule"] = default_r_rule;
  return {KernelSpec(kind, eps), cfg};
}

struct LoadedFunction {
  std::unique_ptr<DifferentiableFunction> f;
  const MlpModel* mlp = nullptr;
};

LoadedFunction load_function(const std::string& spec) {
  LoadedFunction out;
  if (spec == "toy") {
    out.f = std::make_unique<ToyFunction>();
    return out;
  }
  try {
    auto m = std::make_unique<MlpModel>(load_model(spec));
    out.mlp = m.get();
    out.f = std::move(m);
    return out;
  } catch (const DimensionError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

Vector load_point(const SmoothFlags& f) {
  const bool has_file = !f.input.empty();
  const bool has_inline = !f.x.empty();
  if (has_file == has_inline) throw UsageError("give exactly one of --input or --x");
  if (has_inline) {
    for (double v : f.x) {
      if (!std::isfinite(v)) throw UsageError("--x values must be finite");
    }
    return f.x;
  }
  try {
    return load_vector(f.input);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

struct SmoothSetup {
  LoadedFunction fn;
  Vector x0;
  SmoothingConfig cfg;
  json config;
};

SmoothSetup setup_smoothing(const SmoothFlags& f, bool value_only) {
  SmoothSetup s;
  s.fn = load_function(f.model);
  s.x0 = load_point(f);
  if (s.x0.size() != s.fn.f->input_dim()) {
    throw DimensionError("input has " + std::to_string(s.x0.size()) + " features, model expects " +
                         std::to_string(s.fn.f->input_dim()));
  }
  SmoothingConfig& cfg = s.cfg;
  try {
    cfg.mode = value_only ? SmoothingMode::sg : parse_mode(f.mode);
    if (!f.nan_policy.empty()) cfg.nan_policy = parse_nan_policy(f.nan_policy);
    if (!value_only) cfg.param_scaling = parse_param_scaling(f.param_scaling);
  } catch (const ConfigInvalid& e) {
    throw UsageError(e.what());
  }
  if (f.n == 0 || f.m == 0) throw UsageError("sample counts must be >= 1");
  cfg.n_input = f.n;
  cfg.n_params = f.m;
  cfg.seed = f.common.seed;
  cfg.threads = f.common.threads;
  const KernelKind kind = kernel_arg(f.kernel);

  json legs;
  if (cfg.mode == SmoothingMode::ng) {
    if (!value_only && f.param_leg.any()) {
      throw UsageError("NG uses --epsilon/--alpha/--r for its parameter leg; --param-* apply to FG");
    }
    auto leg = resolve_leg(kind, f.leg, 0.01, "default 0.01", true, "");
    cfg.kernel_params = leg.kernel;
    legs["params"] = leg.config;
  } else {
    auto leg = resolve_leg(kind, f.leg, default_input_radius(s.x0), "max(x) - mean(x)", true, "");
    cfg.kernel_input = leg.kernel;
    legs["input"] = leg.config;
    if (cfg.mode == SmoothingMode::fg) {
      const KernelKind pkind = f.param_kernel.empty() ? kind : kernel_arg(f.param_kernel);
      auto pleg = resolve_leg(pkind, f.param_leg, 0.01, "default 0.01", false, "param-");
      cfg.kernel_params = pleg.kernel;
      legs["params"] = pleg.config;
    } else if (!value_only && (f.param_leg.any() || !f.param_kernel.empty())) {
      throw UsageError("--param-* flags apply to FG only");
    }
  }
  cfg.validate();

  json& c = s.config;
  c["model"] = f.model;
  c["x0"] = s.x0;
  c["mode"] = std::string(mode_name(cfg.mode));
  c["kernels"] = legs;
  c["n_input"] = cfg.mode == SmoothingMode::ng ? json(nullptr) : json(cfg.n_input);
  c["n_params"] = cfg.mode == SmoothingMode::sg ? json(nullptr) : json(cfg.n_params);
  c["nan_policy"] = std::string(nan_policy_name(cfg.effective_nan_policy()));
  c["param_scaling"] = std::string(param_scaling_name(cfg.param_scaling));
  c["seed"] = cfg.seed;
  c["threads"] = cfg.threads;
  return s;
}

json gradient_json(const MollifiedGradient& g) {
  json j;
  j["estimate"] = json_vector(g.estimate);
  j["std_error"] = g.std_error_known() ? json_vector(g.std_error) : json("unknown");
  j["n_used"] = g.n_used;
  j["n_dropped"] = g.n_dropped;
  return j;
}

int cmd_smooth(const SmoothFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  const SmoothSetup s = setup_smoothing(f, false);
  const MollifiedGradient g = smooth_gradient(*s.fn.f, s.x0, s.cfg);
  json j = gradient_json(g);
  j["mode"] = std::string(mode_name(s.cfg.mode));
  j["kernels"] = s.config["kernels"];
  RunManifest m{"smooth", argv, s.config, f.common.seed, {}, {}};
  emit(f.common, out, dump(j), std::move(m));
  return kExitOk;
}

int cmd_smooth_value(const SmoothFlags& f, const std::vector<std::string>& argv,
                     std::ostream& out) {
  const SmoothSetup s = setup_smoothing(f, true);
  const SmoothedValue v = smooth_value(*s.fn.f, s.x0, s.cfg);
  json j;
  j["estimate"] = json_number(v.estimate);
  j["std_error"] = v.n_used >= 2 ? json_number(v.std_error) : json("unknown");
  j["n_used"] = v.n_used;
  j["n_dropped"] = v.n_dropped;
  j["kernels"] = s.config["kernels"];
  RunManifest m{"smooth-value", argv, s.config, f.common.seed, {}, {}};
  emit(f.common, out, dump(j), std::move(m));
  return kExitOk;
}

int cmd_converge(const SmoothFlags& f, const std::vector<std::string>& argv, std::ostream& out,
                 std::ostream& err) {
  if (f.reference != "auto" && f.reference != "quadrature" && f.reference != "largest") {
    throw UsageError("--reference must be auto, quadrature or largest");
  }
  SmoothSetup s = setup_smoothing(f, false);
  const std::size_t dim = s.x0.size();

  std::optional<Vector> reference;
  std::string reference_kind = "largest_n";
  const bool quadrature_possible = s.cfg.mode == SmoothingMode::sg && dim <= 2;
  if (f.reference == "quadrature" && !quadrature_possible) {
    throw UsageError("a quadrature reference needs SG mode and an input of dimension 1 or 2");
  }
  if (f.reference != "largest" && quadrature_possible) {
    std::vector<double> kinks;
    if (f.model == "toy") kinks.assign(kToyBreakpoints.begin(), kToyBreakpoints.end());
    QuadratureOptions opts;
    opts.abs_tol = dim == 1 ? 1e-9 : 1e-7;
    opts.max_evaluations = dim == 1 ? 2'000'000 : 4'000'000;
    try {
      reference = mollified_gradient_quadrature(*s.fn.f, s.x0, *s.cfg.kernel_input, opts, kinks);
      reference_kind = "quadrature";
    } catch (const ConvergenceFailure& e) {
      if (f.reference == "quadrature") throw;
      err << "warning: quadrature reference failed (" << e.what()
          << "); using the largest-N estimate\n";
    }
  }

  const ConvergenceStudy study = convergence_study(*s.fn.f, s.x0, s.cfg, f.schedule, reference);
  std::string csv = "n";
  for (const char* col : {"estimate", "std_error", "abs_error"}) {
    for (std::size_t j = 0; j < dim; ++j) csv += fmt::format(",{}_{}", col, j);
  }
  csv += "\n";
  for (const auto& row : study.rows) {
    csv += std::to_string(row.n);
    for (double v : row.result.estimate) csv += "," + num(v);
    for (double v : row.result.std_error) csv += "," + num(v);
    for (double v : row.error_vs_reference) csv += "," + num(v);
    csv += "\n";
  }
  s.config["schedule"] = f.schedule;
  s.config["schedule_applies_to"] = s.cfg.mode == SmoothingMode::ng ? "n_params" : "n_input";
  s.config["reference"] = f.reference;
  RunManifest m{"converge", argv, s.config, f.common.seed, {}, {}};
  m.summary["reference_kind"] = reference_kind;
  m.summary["reference"] = json_vector(study.reference);
  emit(f.common, out, csv, std::move(m));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// toy

struct ToyFlags {
  Common common;
  std::vector<double> eps{0.1, 0.3, 1.0};
  double from = -1.0;
  double to = 5.0;
  double step = 0.01;
  std::size_t n = 10000;
};

int cmd_toy(const ToyFlags& f, const std::vector<std::string>& argv, std::ostream& out) {
  if (f.eps.empty()) throw UsageError("--eps needs at least one value");
  for (double e : f.eps) {
    if (!(e > 0.0) || !std::isfinite(e)) throw UsageError("every --eps value must be positive");
  }
  if (f.n == 0) throw UsageError("--n must be >= 1");
  const std::size_t rows = grid_count(f.from, f.to, f.step);
  std::string csv = "x,f";
  for (double e : f.eps) csv += fmt::format(",f_eps_{}", e);
  for (double e : f.eps) csv += fmt::format(",mc_f_eps_{}", e);
  csv += "\n";

  const ToyFunction toy;
  std::vector<SmoothingConfig> cfgs;
  for (double e : f.eps) {
    SmoothingConfig cfg;
    cfg.kernel_input = KernelSpec(KernelKind::gaussian, e);
    cfg.n_input = f.n;
    cfg.seed = f.common.seed;
    cfg.threads = f.common.threads;
    cfgs.push_back(cfg);
  }
  for (std::size_t i = 0; i < rows; ++i) {
    const double x = f.from + static_cast<double>(i) * f.step;
    csv += num(x) + "," + num(toy_eval(x));
    for (double e : f.eps) csv += "," + num(toy_mollified(x, e));
    for (const auto& cfg : cfgs) {
      const Vector x0{x};
      csv += "," + num(smooth_value(toy, x0, cfg).estimate);
    }
    csv += "\n";
  }
  RunManifest m{"toy", argv, json::object(), f.common.seed, {}, {}};
  m.config = {{"eps", f.eps},   {"from", f.from},         {"to", f.to},
              {"step", f.step}, {"rows", rows},           {"n", f.n},
              {"kernel", "gaussian"}, {"seed", f.common.seed}, {"threads", f.common.threads}};
  emit(f.common, out, csv, std::move(m));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics

struct MetricsFlags {
  Common common;
  std::string suite = "all";
  bool grid = false;
  std::string mode;
  std::string kernel;
  std::string out_dir = "metrics_out";
  double alpha = 0.9;
  double r = 0.0;
  CLI::Option* r_opt = nullptr;
  double param_r = 0.01;
  std::size_t n = 50;
  std::size_t m = 50;
  std::size_t cases = 20;
  std::size_t top_k = 5;
  bool whole_grid_boxes = false;
};

const char* const kMetricNames[] = {"consistency", "invariance", "localization", "sparseness"};

json report_json(const MetricReport& r, const std::string& mode, const std::string& kernel) {
  json j;
  j["metric"] = r.metric;
  j["mode"] = mode;
  j["kernel"] = kernel;
  j["value"] = json_number(r.value);
  j["valid"] = r.valid_count();
  j["degenerate"] = r.degenerate_count();
  j["failed"] = r.failure_count();
  json cases = json::array();
  for (const MetricCase& c : r.cases) {
    json e;
    e["input_id"] = c.input_id;
    if (c.value) {
      e["value"] = *c.value;
    } else if (c.degenerate) {
      e["degenerate"] = true;
    } else {
      e["failure"] = c.failure;
    }
    cases.push_back(e);
  }
  j["cases"] = cases;
  return j;
}

std::string report_csv(const MetricReport& r) {
  std::string csv = "input_id,value,status\n";
  for (const MetricCase& c : r.cases) {
    csv += std::to_string(c.input_id) + ",";
    if (c.value) {
      csv += num(*c.value) + ",ok\n";
    } else {
      csv += c.degenerate ? ",degenerate\n" : ",failure\n";
    }
  }
  return csv;
}

int cmd_metrics(const MetricsFlags& f, const std::vector<std::string>& argv, std::ostream& out,
                std::ostream& err) {
  if (!f.common.out.empty()) throw UsageError("metrics writes into --out-dir; --out is not used");
  std::vector<std::pair<SmoothingMode, KernelKind>> combos;
  if (f.grid) {
    if (!f.mode.empty() || !f.kernel.empty()) {
      throw UsageError("--grid runs all 15 combinations; drop --mode/--kernel");
    }
    for (SmoothingMode mode : {SmoothingMode::sg, SmoothingMode::ng, SmoothingMode::fg}) {
      for (KernelKind k : kAllKernelKinds) combos.emplace_back(mode, k);
    }
  } else {
    if (f.mode.empty() || f.kernel.empty()) {
      throw UsageError("give --mode and --kernel, or --grid");
    }
    SmoothingMode mode;
    try {
      mode = parse_mode(f.mode);
    } catch (const ConfigInvalid& e) {
      throw UsageError(e.what());
    }
    combos.emplace_back(mode, kernel_arg(f.kernel));
  }
  if (f.n == 0 || f.m == 0 || f.cases == 0) throw UsageError("counts must be >= 1");
  if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
  if (!(f.param_r > 0.0)) throw UsageError("--param-r must be positive");
  if (f.r_opt->count() > 0 && !(f.r > 0.0)) throw UsageError("--r must be positive");

  const bool want_cons = f.suite == "all" || f.suite == "consistency";
  const bool want_inv = f.suite == "all" || f.suite == "invariance";
  const bool want_loc = f.suite == "all" || f.suite == "localization";
  const bool want_sparse = f.suite == "all" || f.suite == "sparseness";

  std::optional<BlobsHarness> blobs;
  std::optional<ImageHarness> images;
  if (want_cons || want_inv) {
    BlobsOptions o;
    o.cases = f.cases;
    blobs = make_blobs_harness(o);
  }
  if (want_loc || want_sparse) {
    ImageOptions o;
    o.cases = f.cases;
    o.whole_grid_boxes = f.whole_grid_boxes;
    images = make_image_harness(o);
    if (f.top_k == 0 || f.top_k > images->rows * images->cols) {
      throw UsageError("--top-k must lie in [1, number of pixels]");
    }
  }

  const fs::path dir(f.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  std::string summary = "mode,kernel";
  const bool wanted[] = {want_cons, want_inv, want_loc, want_sparse};
  for (std::size_t i = 0; i < 4; ++i) {
    if (wanted[i]) summary += std::string(",") + kMetricNames[i];
  }
  summary += "\n";
  std::size_t failures = 0;
  std::size_t degenerate = 0;

  for (const auto& [mode, kind] : combos) {
    ExplainerSpec spec;
    spec.mode = mode;
    spec.kernel = kind;
    spec.alpha = f.alpha;
    if (f.r_opt->count() > 0) spec.input_radius = f.r;
    spec.param_radius = f.param_r;
    spec.n_input = f.n;
    spec.n_params = f.m;
    spec.seed = f.common.seed;
    const Explainer e = smoothing_explainer(spec);

    std::vector<MetricReport> reports;
    if (want_cons) reports.push_back(run_consistency(*blobs, e, f.common.threads));
    if (want_inv) reports.push_back(run_invariance(*blobs, e, f.common.threads));
    if (want_loc || want_sparse) {
      ImageReports ir = run_image_metrics(*images, e, f.top_k, want_loc, want_sparse,
                                          f.common.threads);
      if (want_loc) reports.push_back(std::move(ir.localization));
      if (want_sparse) reports.push_back(std::move(ir.sparseness));
    }

    const std::string mode_s(mode_name(mode));
    const std::string kernel_s(kernel_name(kind));
    summary += mode_s + "," + kernel_s;
    for (const MetricReport& r : reports) {
      summary += "," + (std::isfinite(r.value) ? num(r.value) : std::string());
      failures += r.failure_count();
      degenerate += r.degenerate_count();
      if (r.degenerate_count() > 0) {
        err << "warning: " << r.metric << " " << mode_s << "/" << kernel_s << ": "
            << r.degenerate_count() << " degenerate case(s) excluded\n";
      }
      if (r.failure_count() > 0) {
        err << "warning: " << r.metric << " " << mode_s << "/" << kernel_s << ": "
            << r.failure_count() << " case(s) failed\n";
      }
      const std::string stem = r.metric + "_" + mode_s + "_" + kernel_s;
      write_file(dir / (stem + ".json"), dump(report_json(r, mode_s, kernel_s)));
      write_file(dir / (stem + ".csv"), report_csv(r));
      outputs.push_back((dir / (stem + ".json")).string());
      outputs.push_back((dir / (stem + ".csv")).string());
    }
    summary += "\n";
  }

  const fs::path summary_path = dir / (f.grid ? "grid.csv" : "summary.csv");
  write_file(summary_path, summary);
  RunManifest m{"metrics", argv, json::object(), f.common.seed, {}, {}};
  m.outputs.push_back(summary_path.string());
  m.outputs.insert(m.outputs.end(), outputs.begin(), outputs.end());
  m.config = {{"suite", f.suite},
              {"grid", f.grid},
              {"combinations", combos.size()},
              {"alpha", f.alpha},
              {"input_r", f.r_opt->count() > 0 ? json(f.r) : json("max(x) - mean(x)")},
              {"param_r", f.param_r},
              {"n_input", f.n},
              {"n_params", f.m},
              {"cases", f.cases},
              {"top_k", f.top_k},
              {"whole_grid_boxes", f.whole_grid_boxes},
              {"param_scaling", "relative"},
              {"seed", f.common.seed},
              {"threads", f.common.threads}};
  if (blobs) m.summary["blobs_train_accuracy"] = blobs->train_accuracy;
  m.summary["failed_cases"] = failures;
  m.summary["degenerate_cases"] = degenerate;
  write_manifest(m, manifest_path_for(summary_path));
  out << summary;
  return failures > 0 ? kExitPartialFailure : kExitOk;
}

// ---------------------------------------------------------------------------
// model-init, model-train

struct ModelInitFlags {
  Common common;
  std::vector<std::size_t> dims{2, 16, 1};
  std::string activation = "relu";
  std::size_t target = 0;
};

int cmd_model_init(const ModelInitFlags& f, const std::vector<std::string>& argv,
                   std::ostream& out) {
  Activation act;
  try {
    act = parse_activation(f.activation);
  } catch (const ConfigInvalid& e) {
    throw UsageError(e.what());
  }
  MlpModel model = [&] {
    try {
      return MlpModel::initialize(f.dims, act, {f.common.seed, 0}, f.target);
    } catch (const DimensionError& e) {
      throw UsageError(e.what());
    }
  }();
  RunManifest m{"model-init", argv, json::object(), f.common.seed, {}, {}};
  m.config = {{"dims", f.dims}, {"activation", f.activation}, {"target", f.target},
              {"seed", f.common.seed}};
  emit(f.common, out, model_to_json(model).dump(1) + "\n", std::move(m));
  return kExitOk;
}

struct ModelTrainFlags {
  Common common;
  std::string model;
  std::size_t epochs = 200;
  double lr = 0.1;
  std::size_t per_class = 200;
  double shift = 0.0;
};

int cmd_model_train(const ModelTrainFlags& f, const std::vector<std::string>& argv,
                    std::ostream& out) {
  if (f.per_class == 0) throw UsageError("--per-class must be >= 1");
  if (!(f.lr > 0.0)) throw UsageError("--lr must be positive");
  const LoadedFunction fn = load_function(f.model);
  if (!fn.mlp) throw UsageError("model-train needs an MLP model file");
  const std::size_t dim = fn.mlp->input_dim();
  const Vector shift(dim, f.shift);
  const Dataset data = make_blobs(dim, f.per_class, f.common.seed, shift);
  const MlpModel trained = train(*fn.mlp, data, {f.epochs, f.lr});
  RunManifest m{"model-train", argv, json::object(), f.common.seed, {}, {}};
  m.config = {{"model", f.model},         {"epochs", f.epochs}, {"learning_rate", f.lr},
              {"per_class", f.per_class}, {"shift", f.shift},   {"data_seed", f.common.seed},
              {"dataset", "blobs"}};
  m.summary["train_accuracy"] = accuracy(trained, data);
  emit(f.common, out, model_to_json(trained).dump(1) + "\n", std::move(m));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// replay

struct ReplayFlags {
  std::string manifest;
  std::string out;
};

std::vector<std::string> redirect_output(std::vector<std::string> args, const std::string& to) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    for (const std::string flag : {"--out", "--out-dir"}) {
      if (args[i] == flag && i + 1 < args.size()) {
        args[i + 1] = to;
        return args;
      }
      if (args[i].rfind(flag + "=", 0) == 0) {
        args[i] = flag + "=" + to;
        return args;
      }
    }
  }
  const bool is_metrics = !args.empty() && args.front() == "metrics";
  args.push_back(is_metrics ? "--out-dir" : "--out");
  args.push_back(to);
  return args;
}

}  // namespace

// ---------------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte Carlo gradient mollification", "mollify"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(artifact_version()));

  KernelTableFlags kt;
  auto* kt_cmd = app.add_subcommand("kernel-table", "Tabulate a kernel's pdf and cdf as CSV");
  add_common(kt_cmd, kt.common, false);
  kt_cmd->add_option("--kind", kt.kind, "gaussian, poisson, hyperbolic, sigmoid or rect")
      ->required();
  kt_cmd->add_option("--epsilon", kt.epsilon, "Kernel scale")->capture_default_str();
  kt_cmd->add_option("--from", kt.from)->capture_default_str();
  kt_cmd->add_option("--to", kt.to)->capture_default_str();
  kt_cmd->add_option("--step", kt.step)->capture_default_str();

  EpsilonFlags ep;
  auto* ep_cmd = app.add_subcommand("epsilon", "Solve the kernel scale from a confidence pair");
  add_common(ep_cmd, ep.common, false);
  ep_cmd->add_option("--kind", ep.kind, "Kernel name")->required();
  ep_cmd->add_option("--r", ep.r, "Confidence radius")->required();
  ep_cmd->add_option("--alpha", ep.alpha, "Confidence level")->required();

  SmoothFlags sm;
  auto* sm_cmd = app.add_subcommand("smooth", "Monte Carlo mollified gradient at one point");
  add_smoothing_flags(sm_cmd, sm, false);

  SmoothFlags sv;
  auto* sv_cmd = app.add_subcommand("smooth-value", "Monte Carlo mollified value (SG)");
  add_smoothing_flags(sv_cmd, sv, true);

  SmoothFlags cv;
  auto* cv_cmd = app.add_subcommand("converge", "Estimator error against sample count");
  add_smoothing_flags(cv_cmd, cv, false);
  cv_cmd->add_option("--schedule", cv.schedule, "Strictly increasing sample counts")
      ->delimiter(',')
      ->capture_default_str();
  cv_cmd->add_option("--reference", cv.reference, "auto, quadrature or largest")
      ->capture_default_str();

  ToyFlags ty;
  auto* ty_cmd = app.add_subcommand("toy", "Toy function, its Gaussian mollification and MC check");
  add_common(ty_cmd, ty.common, true);
  ty_cmd->add_option("--eps", ty.eps, "Kernel scales, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  ty_cmd->add_option("--from", ty.from)->capture_default_str();
  ty_cmd->add_option("--to", ty.to)->capture_default_str();
  ty_cmd->add_option("--step", ty.step)->capture_default_str();
  ty_cmd->add_option("--n", ty.n, "Monte Carlo samples per point")->capture_default_str();

  MetricsFlags mt;
  auto* mt_cmd = app.add_subcommand("metrics", "Explanation metrics on the bundled harness");
  add_common(mt_cmd, mt.common, true);
  mt_cmd->add_option("--suite", mt.suite)
      ->check(CLI::IsMember({"consistency", "invariance", "localization", "sparseness", "all"}))
      ->capture_default_str();
  mt_cmd->add_flag("--grid", mt.grid, "All 3 modes x 5 kernels");
  mt_cmd->add_option("--mode", mt.mode, "SG, NG or FG");
  mt_cmd->add_option("--kernel", mt.kernel, "Kernel name");
  mt_cmd->add_option("--out-dir", mt.out_dir)->capture_default_str();
  mt_cmd->add_option("--alpha", mt.alpha, "Confidence level for both legs")->capture_default_str();
  mt.r_opt = mt_cmd->add_option("--r", mt.r, "Input-leg radius (default: max(x) - mean(x))");
  mt_cmd->add_option("--param-r", mt.param_r, "Parameter-leg radius")->capture_default_str();
  mt_cmd->add_option("--n", mt.n, "Input-leg samples")->capture_default_str();
  mt_cmd->add_option("--m", mt.m, "Parameter-leg samples")->capture_default_str();
  mt_cmd->add_option("--cases", mt.cases, "Inputs per metric")->capture_default_str();
  mt_cmd->add_option("--top-k", mt.top_k, "Point-game k")->capture_default_str();
  mt_cmd->add_flag("--whole-grid-boxes", mt.whole_grid_boxes,
                   "Use the whole image as every localization box");

  ModelInitFlags mi;
  auto* mi_cmd = app.add_subcommand("model-init", "Seeded MLP as JSON");
  add_common(mi_cmd, mi.common, true);
  mi_cmd->add_option("--dims", mi.dims, "Layer widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  mi_cmd->add_option("--activation", mi.activation, "relu or tanh")->capture_default_str();
  mi_cmd->add_option("--target", mi.target, "Scored output index")->capture_default_str();

  ModelTrainFlags mtr;
  auto* mtr_cmd =
      app.add_subcommand("model-train", "Gradient descent on the synthetic blobs dataset");
  add_common(mtr_cmd, mtr.common, true);
  mtr_cmd->add_option("--model", mtr.model, "Model JSON file")->required();
  mtr_cmd->add_option("--epochs", mtr.epochs)->capture_default_str();
  mtr_cmd->add_option("--lr", mtr.lr)->capture_default_str();
  mtr_cmd->add_option("--per-class", mtr.per_class)->capture_default_str();
  mtr_cmd->add_option("--shift", mtr.shift, "Constant offset added to every feature")
      ->capture_default_str();

  ReplayFlags rp;
  auto* rp_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rp_cmd->add_option("--manifest", rp.manifest, "Manifest JSON file")->required();
  rp_cmd->add_option("--out", rp.out, "Redirect the output (file, or directory for metrics)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (kt_cmd->parsed()) return cmd_kernel_table(kt, args, out);
    if (ep_cmd->parsed()) return cmd_epsilon(ep, args, out);
    if (sm_cmd->parsed()) return cmd_smooth(sm, args, out);
    if (sv_cmd->parsed()) return cmd_smooth_value(sv, args, out);
    if (cv_cmd->parsed()) return cmd_converge(cv, args, out, err);
    if (ty_cmd->parsed()) return cmd_toy(ty, args, out);
    if (mt_cmd->parsed()) return cmd_metrics(mt, args, out, err);
    if (mi_cmd->parsed()) return cmd_model_init(mi, args, out);
    if (mtr_cmd->parsed()) return cmd_model_train(mtr, args, out);
    if (rp_cmd->parsed()) {
      RunManifest m;
      try {
        m = read_manifest(rp.manifest);
      } catch (const std::exception& e) {
        throw DataError(e.what());
      }
      if (m.argv.empty() || m.argv.front() == "replay") {
        throw DataError("manifest does not record a replayable command");
      }
      return run(rp.out.empty() ? m.argv : redirect_output(m.argv, rp.out), out, err);
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigInvalid& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CapabilityMissing& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace mollify::cli
