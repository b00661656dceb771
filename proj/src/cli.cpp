#include "wtvf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "wtvf/core.hpp"
#include "wtvf/data.hpp"
#include "wtvf/io.hpp"
#include "wtvf/pipeline.hpp"

namespace wtvf {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

/// Thrown for flag combinations CLI11 cannot express on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags shared by filter, calibrate and compare.
struct SolverFlags {
  std::optional<double> gamma;
  double alpha = 0.05;
  int sinkhorn_iters = 100;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::optional<double> truncation_radius;
  bool dense = false;
  bool log_domain = false;
  double start_blend = 0.5;
  std::optional<int> threads;

  std::vector<CLI::Option*> wtv_only;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* max_iters_opt = nullptr;

  void add_to(CLI::App& cmd, bool gamma_default_one) {
    auto* g = cmd.add_option("--gamma", gamma, "Entropic regularization weight (wtv)");
    if (gamma_default_one) g->description("Entropic regularization weight (wtv, default 1)");
    wtv_only.push_back(g);
    wtv_only.push_back(cmd.add_option("--alpha", alpha, "Gradient step size (wtv)")->capture_default_str());
    wtv_only.push_back(
        cmd.add_option("--sinkhorn-iters", sinkhorn_iters, "Sinkhorn iterations per transition (wtv)")
            ->capture_default_str());
    tol_opt = cmd.add_option("--tol", tol,
                             "wtv: outer tolerance on ||Y(k)-Y(k-1)||_F (default 1e-6*d*T); "
                             "l1: optimality certificate tolerance (default 1e-8)");
    max_iters_opt = cmd.add_option("--max-iters", max_iters,
                                   "wtv: outer iteration cap (default 500); l1: per-pixel cap (default 50000)");
    wtv_only.push_back(cmd.add_option("--truncation-radius", truncation_radius,
                                      "Drop transport between pixels farther apart than this (wtv)"));
    wtv_only.push_back(cmd.add_flag("--dense", dense, "Use the full kernel with no truncation (wtv)"));
    wtv_only.push_back(cmd.add_flag("--log-domain", log_domain, "Log-domain Sinkhorn updates (wtv)"));
    wtv_only.push_back(cmd.add_option("--start-blend", start_blend,
                                      "Blend toward uniform for frames starting on the boundary (wtv)")
                           ->capture_default_str());
    cmd.add_option("--threads", threads, "Worker threads (falls back to WTV_THREADS, then 1)");
  }

  /// Rejects wtv-only flags for the baselines and --tol/--max-iters for l2.
  void check_for(FilterMethod method) const {
    if (method != FilterMethod::Wtv) {
      for (const auto* opt : wtv_only) {
        if (opt->count() > 0) throw UsageError(opt->get_name() + " applies only to --method wtv");
      }
    }
    if (method == FilterMethod::L2) {
      if (tol_opt->count() > 0) throw UsageError("--tol does not apply to --method l2");
      if (max_iters_opt->count() > 0) throw UsageError("--max-iters does not apply to --method l2");
    }
    if (dense && truncation_radius) throw UsageError("--dense and --truncation-radius are exclusive");
  }

  MethodSettings settings(FilterMethod method, bool gamma_default_one) const {
    MethodSettings s;
    s.threads = resolve_threads(threads);
    s.wtv.threads = s.threads;
    s.wtv.alpha = alpha;
    s.wtv.sinkhorn_iters = sinkhorn_iters;
    s.wtv.log_domain = log_domain;
    s.wtv.start_blend = start_blend;
    if (dense) {
      s.wtv.kernel_truncation_radius = std::numeric_limits<double>::infinity();
    } else {
      s.wtv.kernel_truncation_radius = truncation_radius;
    }
    if (gamma) {
      s.wtv.gamma = *gamma;
    } else if (gamma_default_one) {
      s.wtv.gamma = 1.0;
    }
    if (method == FilterMethod::Wtv || method == FilterMethod::L1) {
      if (method == FilterMethod::Wtv) {
        s.wtv.tolerance = tol;
        if (max_iters) s.wtv.max_outer_iters = *max_iters;
      } else {
        if (tol) s.l1_tol = *tol;
        if (max_iters) s.l1_max_iters = *max_iters;
      }
    }
    if (!(s.l1_tol > 0.0)) throw UsageError("--tol must be > 0");
    if (s.l1_max_iters < 1) throw UsageError("--max-iters must be >= 1");
    s.wtv.lambda = 0.0;
    s.wtv.validate();
    return s;
  }
};

/// Effective config echo. An infinite truncation radius means dense.
json config_json(FilterMethod method, double lambda, const MethodSettings& s, const FrameSeries& input) {
  json c;
  c["lambda"] = lambda;
  c["threads"] = s.threads;
  if (method == FilterMethod::Wtv) {
    FilterConfig cfg = s.wtv;
    cfg.lambda = lambda;
    const auto radius = effective_truncation_radius(cfg, lambda);
    c["gamma"] = cfg.gamma;
    c["alpha"] = cfg.alpha;
    c["sinkhorn_iters"] = cfg.sinkhorn_iters;
    c["tolerance"] = cfg.resolved_tolerance(input.pixels(), input.frames());
    c["max_outer_iters"] = cfg.max_outer_iters;
    c["truncation_radius"] = (radius && std::isfinite(*radius)) ? json(*radius) : json(nullptr);
    c["log_domain"] = cfg.log_domain;
    c["start_blend"] = cfg.start_blend;
    c["mass_floor"] = cfg.mass_floor;
  } else if (method == FilterMethod::L1) {
    c["tolerance"] = s.l1_tol;
    c["max_iters"] = s.l1_max_iters;
  }
  return c;
}

json seed_from_metadata(const std::optional<std::string>& metadata) {
  if (!metadata) return nullptr;
  const json meta = json::parse(*metadata, nullptr, false);
  if (meta.is_object() && meta.contains("seed")) return meta["seed"];
  return nullptr;
}

json run_summary(const FilterRun& run) {
  json r;
  r["fidelity"] = run.fidelity;
  r["converged"] = run.converged;
  r["iterations"] = run.iterations;
  if (run.wtv_report) {
    const auto& rep = *run.wtv_report;
    r["objective"] = {{"final", rep.objective},
                      {"fidelity_term", rep.fidelity},
                      {"transport_term", rep.transport_total},
                      {"entropy_term", rep.entropy_total},
                      {"trace", rep.objective_trace},
                      {"last_change", rep.last_change},
                      {"tolerance", rep.tolerance},
                      {"max_mass_drift", rep.max_mass_drift}};
  }
  return r;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_manifest(const fs::path& path, json manifest, const Stopwatch& clock) {
  manifest["version"] = kVersion;
  manifest["wall_time_s"] = clock.seconds();
  write_text(path, manifest.dump(2) + "\n");
}

fs::path manifest_path(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

FilterMethod method_flag(const std::string& name) {
  try {
    return parse_filter_method(name);
  } catch (const Error&) {
    throw UsageError("--method must be one of l1, l2, wtv");
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSpec:
      return kExitUsage;
    case ErrorCode::IoError:
      return kExitIo;
    case ErrorCode::MalformedFile:
      return kExitMalformed;
    case ErrorCode::NoConvergence:
      return kExitNoConvergence;
    case ErrorCode::BracketInvalid:
      return kExitBracket;
    default:
      return kExitFailure;
  }
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// ---- simulate ---------------------------------------------------------------

struct SimulateFlags {
  std::size_t size = 256;
  std::optional<std::size_t> height, width;
  std::size_t frames = 20;
  std::optional<double> radius, thickness, walk_std;
  std::optional<double> center_row, center_col;
  std::uint64_t seed = 1;
  std::string output, manifest;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  Stopwatch clock;
  RingSpec spec = RingSpec::scaled(f.size);
  spec.frames = f.frames;
  spec.seed = f.seed;
  if (f.height) spec.height = *f.height;
  if (f.width) spec.width = *f.width;
  if (f.height || f.width) spec.center_start = {(spec.height - 1) / 2.0, (spec.width - 1) / 2.0};
  if (f.radius) spec.radius = *f.radius;
  if (f.thickness) spec.thickness = *f.thickness;
  if (f.walk_std) spec.walk_std = *f.walk_std;
  if (f.center_row) spec.center_start.row = *f.center_row;
  if (f.center_col) spec.center_start.col = *f.center_col;
  spec.validate();

  const FrameSeries series = simulate_ring(spec);
  json spec_json = {{"generator", "ring"},
                    {"height", spec.height},
                    {"width", spec.width},
                    {"frames", spec.frames},
                    {"center_start", {spec.center_start.row, spec.center_start.col}},
                    {"radius", spec.radius},
                    {"thickness", spec.thickness},
                    {"walk_std", spec.walk_std},
                    {"seed", spec.seed}};
  write_fst(f.output, series, spec_json.dump());

  json manifest = {{"command", "simulate"},
                   {"method", nullptr},
                   {"config", spec_json},
                   {"seed", spec.seed},
                   {"input", nullptr},
                   {"output", f.output}};
  write_manifest(manifest_path(f.manifest, f.output + ".json"), manifest, clock);
  out << spec.height << " x " << spec.width << " x " << spec.frames << " -> " << f.output << "\n";
  return kExitOk;
}

// ---- filter -----------------------------------------------------------------

struct FilterFlags {
  std::string method;
  double lambda = 0.0;
  SolverFlags solver;
  std::string input, output, manifest;
};

int cmd_filter(const FilterFlags& f, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  const FilterMethod method = method_flag(f.method);
  f.solver.check_for(method);
  if (method == FilterMethod::Wtv && !f.solver.gamma) throw UsageError("--gamma is required for --method wtv");
  if (!(f.lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
  const MethodSettings settings = f.solver.settings(method, false);

  const FrameStack in = read_fst(f.input);
  json manifest = {{"command", "filter"},
                   {"method", to_string(method)},
                   {"config", config_json(method, f.lambda, settings, in.series)},
                   {"seed", seed_from_metadata(in.metadata)},
                   {"input", f.input},
                   {"output", f.output}};
  const fs::path mpath = manifest_path(f.manifest, f.output + ".json");

  FilterRun run;
  try {
    run = run_filter(in.series, method, f.lambda, settings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoConvergence) throw;
    manifest["output"] = nullptr;
    manifest["converged"] = false;
    manifest["error"] = e.what();
    write_manifest(mpath, manifest, clock);
    err << e.what() << "\n";
    return kExitNoConvergence;
  }
  json meta = {{"source", f.input}, {"method", to_string(method)}, {"lambda", f.lambda}};
  write_fst(f.output, run.output, meta.dump());
  manifest.update(run_summary(run));
  write_manifest(mpath, manifest, clock);

  out << to_string(method) << " lambda=" << format_double(f.lambda) << " fidelity=" << format_double(run.fidelity);
  if (run.wtv_report) out << " objective=" << format_double(run.wtv_report->objective);
  out << " iterations=" << run.iterations << " converged=" << (run.converged ? "true" : "false") << "\n";
  if (!run.converged) {
    err << "WTV stopped at the iteration cap before meeting its tolerance\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

// ---- calibrate --------------------------------------------------------------

struct CalibrateFlags {
  std::string method;
  double target = 0.0;
  std::vector<double> bracket{0.0, 1000.0};
  double tol = 1e-3;
  SolverFlags solver;
  std::string input, manifest;
};

int cmd_calibrate(const CalibrateFlags& f, std::ostream& out) {
  Stopwatch clock;
  const FilterMethod method = method_flag(f.method);
  f.solver.check_for(method);
  if (method == FilterMethod::Wtv && !f.solver.gamma) throw UsageError("--gamma is required for --method wtv");
  if (f.bracket.size() != 2) throw UsageError("--bracket takes lo,hi");
  const double lo = f.bracket[0];
  const double hi = f.bracket[1];
  if (!(lo >= 0.0) || !(lo < hi)) throw UsageError("--bracket needs 0 <= lo < hi");
  if (!(f.target >= 0.0)) throw UsageError("--target-fidelity must be >= 0");
  if (!(f.tol > 0.0)) throw UsageError("--calibration-tol must be > 0");
  const MethodSettings settings = f.solver.settings(method, false);

  const FrameStack in = read_fst(f.input);
  json manifest = {{"command", "calibrate"},
                   {"method", to_string(method)},
                   {"config", config_json(method, lo, settings, in.series)},
                   {"seed", seed_from_metadata(in.metadata)},
                   {"input", f.input},
                   {"output", nullptr},
                   {"target_fidelity", f.target},
                   {"bracket", {lo, hi}},
                   {"calibration_tol", f.tol}};
  manifest["config"].erase("lambda");
  const fs::path mpath = manifest_path(f.manifest, f.input + ".calibrate.json");
  try {
    const CalibrationResult result = calibrate_method(in.series, method, f.target, lo, hi, f.tol, settings);
    manifest["lambda"] = result.lambda;
    manifest["fidelity"] = result.fidelity;
    manifest["steps"] = result.steps;
    manifest["converged"] = true;
    write_manifest(mpath, manifest, clock);
    out << format_double(result.lambda) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    manifest["lambda"] = nullptr;
    manifest["converged"] = false;
    manifest["error"] = e.what();
    write_manifest(mpath, manifest, clock);
    throw;
  }
}

// ---- compare ----------------------------------------------------------------

struct CompareFlags {
  std::string input, out_dir;
  std::optional<double> l1_lambda, l2_lambda;
  double wtv_lambda = 1.0;
  bool calibrate = false;
  std::vector<double> bracket{0.0, 1000.0};
  double calibration_tol = 1e-2;
  std::optional<std::size_t> downsample_factor;
  bool remove_bg = false;
  SolverFlags solver;
  std::string manifest;
};

constexpr std::size_t kSeparator = 2;

int cmd_compare(const CompareFlags& f, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  if (f.bracket.size() != 2 || !(f.bracket[0] >= 0.0) || !(f.bracket[0] < f.bracket[1])) {
    throw UsageError("--bracket needs 0 <= lo < hi");
  }
  if (!f.calibrate && (!f.l1_lambda || !f.l2_lambda)) {
    throw UsageError("--l1-lambda and --l2-lambda are required unless --calibrate is given");
  }
  if (f.calibrate && (f.l1_lambda || f.l2_lambda)) {
    throw UsageError("--calibrate chooses the l1/l2 lambdas; drop --l1-lambda/--l2-lambda");
  }
  const MethodSettings wtv_settings = f.solver.settings(FilterMethod::Wtv, true);
  MethodSettings base_settings = wtv_settings;
  if (f.solver.tol_opt->count() > 0 || f.solver.max_iters_opt->count() > 0) {
    // --tol/--max-iters configure wtv here; the l1 baseline keeps its defaults.
    base_settings.l1_tol = MethodSettings{}.l1_tol;
    base_settings.l1_max_iters = MethodSettings{}.l1_max_iters;
  }

  FrameStack in = read_fst(f.input);
  FrameSeries x = std::move(in.series);
  if (f.remove_bg) x = remove_background(x);
  if (f.downsample_factor) {
    if (*f.downsample_factor < 1) throw UsageError("--downsample must be >= 1");
    x = downsample(x, *f.downsample_factor).series;
  }

  const fs::path dir(f.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const FilterRun wtv = run_filter(x, FilterMethod::Wtv, f.wtv_lambda, wtv_settings);
  double l1_lambda = f.l1_lambda.value_or(0.0);
  double l2_lambda = f.l2_lambda.value_or(0.0);
  json calibration = nullptr;
  // The second-difference penalty has no rows below three frames, so the
  // baselines reduce to the identity there.
  const bool passthrough = x.frames() < 3;
  if (passthrough) err << "fewer than 3 frames: l1/l2 rows show the input unchanged\n";
  if (f.calibrate && !passthrough) {
    const auto c1 = calibrate_method(x, FilterMethod::L1, wtv.fidelity, f.bracket[0], f.bracket[1],
                                     f.calibration_tol, base_settings);
    const auto c2 = calibrate_method(x, FilterMethod::L2, wtv.fidelity, f.bracket[0], f.bracket[1],
                                     f.calibration_tol, base_settings);
    l1_lambda = c1.lambda;
    l2_lambda = c2.lambda;
    calibration = {{"target_fidelity", wtv.fidelity},
                   {"bracket", f.bracket},
                   {"tol", f.calibration_tol},
                   {"l1", {{"lambda", c1.lambda}, {"fidelity", c1.fidelity}, {"steps", c1.steps}}},
                   {"l2", {{"lambda", c2.lambda}, {"fidelity", c2.fidelity}, {"steps", c2.steps}}}};
  }
  auto baseline = [&](FilterMethod method, double lambda) {
    if (!passthrough) return run_filter(x, method, lambda, base_settings);
    FilterRun run;
    run.output = x;
    return run;
  };
  const FilterRun l1 = baseline(FilterMethod::L1, l1_lambda);
  const FilterRun l2 = baseline(FilterMethod::L2, l2_lambda);

  const std::vector<std::pair<std::string, const FrameSeries*>> rows = {
      {"raw", &x}, {"l1", &l1.output}, {"l2", &l2.output}, {"wtv", &wtv.output}};
  const std::size_t h = x.height(), w = x.width(), frames = x.frames(), px = x.pixels();
  const std::size_t mw = frames * w + (frames > 0 ? (frames - 1) * kSeparator : 0);
  const std::size_t mh = rows.size() * h + (rows.size() - 1) * kSeparator;
  std::vector<std::uint8_t> montage(mw * mh, 255);

  std::ostringstream csv;
  csv << "frame,method,fidelity,mass,contrast\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [name, series] = rows[r];
    const auto gray = to_gray8(*series);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::span<const std::uint8_t> frame_px(gray.data() + t * px, px);
      std::ostringstream file;
      file << name << "_t" << std::setw(3) << std::setfill('0') << t << ".pgm";
      write_pgm(dir / file.str(), w, h, frame_px);
      for (std::size_t i = 0; i < h; ++i) {
        std::copy_n(frame_px.data() + i * w, w, montage.data() + (r * (h + kSeparator) + i) * mw + t * (w + kSeparator));
      }
    }
    if (r > 0) write_fst(dir / (name + ".fst"), *series, json({{"method", name}}).dump());
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (const auto& [name, series] : rows) {
      double fid = 0.0;
      const auto xt = x.frame(t);
      const auto yt = series->frame(t);
      for (std::size_t i = 0; i < px; ++i) fid += (xt[i] - yt[i]) * (xt[i] - yt[i]);
      csv << t << "," << name << "," << format_double(fid) << "," << format_double(series->frame_sum(t)) << ","
          << format_double(frame_contrast(yt)) << "\n";
    }
  }
  write_pgm(dir / "montage.pgm", mw, mh, montage);
  write_text(dir / "metrics.csv", csv.str());

  json config = {{"wtv", config_json(FilterMethod::Wtv, f.wtv_lambda, wtv_settings, x)},
                 {"l1", config_json(FilterMethod::L1, l1_lambda, base_settings, x)},
                 {"l2", config_json(FilterMethod::L2, l2_lambda, base_settings, x)},
                 {"remove_background", f.remove_bg},
                 {"downsample", f.downsample_factor ? json(*f.downsample_factor) : json(nullptr)},
                 {"separator_px", kSeparator}};
  json results = {{"wtv", run_summary(wtv)}, {"l1", run_summary(l1)}, {"l2", run_summary(l2)}};
  json manifest = {{"command", "compare"},
                   {"method", {"l1", "l2", "wtv"}},
                   {"config", config},
                   {"seed", seed_from_metadata(in.metadata)},
                   {"input", f.input},
                   {"output", f.out_dir},
                   {"calibration", calibration},
                   {"baselines_passthrough", passthrough},
                   {"results", results},
                   {"fidelity", {{"l1", l1.fidelity}, {"l2", l2.fidelity}, {"wtv", wtv.fidelity}}},
                   {"converged", wtv.converged}};
  write_manifest(manifest_path(f.manifest, (dir / "manifest.json").string()), manifest, clock);

  out << "wtv fidelity=" << format_double(wtv.fidelity) << " l1 lambda=" << format_double(l1_lambda)
      << " fidelity=" << format_double(l1.fidelity) << " l2 lambda=" << format_double(l2_lambda)
      << " fidelity=" << format_double(l2.fidelity) << "\n";
  if (!wtv.converged) {
    err << "WTV stopped at the iteration cap before meeting its tolerance\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

// ---- info -------------------------------------------------------------------

int cmd_info(const std::string& input, const std::string& manifest_flag, std::ostream& out) {
  Stopwatch clock;
  const FrameStack in = read_fst(input);
  const FrameSeries& s = in.series;
  out << s.height() << " x " << s.width() << " x " << s.frames() << "\n";
  json masses = json::array();
  if (s.frames() > 0) {
    double lo = s.frame_sum(0), hi = lo, total = 0.0;
    for (std::size_t t = 0; t < s.frames(); ++t) {
      const double m = s.frame_sum(t);
      masses.push_back(m);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
      total += m;
    }
    out << "frame mass: min " << lo << " max " << hi << " mean " << total / static_cast<double>(s.frames()) << "\n";
  }
  if (in.metadata) out << "metadata: " << *in.metadata << "\n";

  json manifest = {{"command", "info"},
                   {"method", nullptr},
                   {"config", json::object()},
                   {"seed", seed_from_metadata(in.metadata)},
                   {"input", input},
                   {"output", nullptr},
                   {"dimensions", {s.height(), s.width(), s.frames()}},
                   {"frame_mass", masses}};
  write_manifest(manifest_path(manifest_flag, input + ".info.json"), manifest, clock);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wasserstein total variation and trend filtering for frame stacks", "wtvf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Write a simulated moving-ring stack");
  simulate->add_option("--size", sim.size, "Square frame size; ring geometry scales with it")->capture_default_str();
  simulate->add_option("--height", sim.height, "Frame height (overrides --size)");
  simulate->add_option("--width", sim.width, "Frame width (overrides --size)");
  simulate->add_option("--frames", sim.frames, "Number of frames")->capture_default_str();
  simulate->add_option("--radius", sim.radius, "Ring radius in pixels (default 40 * size / 256)");
  simulate->add_option("--thickness", sim.thickness, "Ring thickness in pixels (default 6 * size / 256)");
  simulate->add_option("--walk-std", sim.walk_std, "Random-walk step std per axis (default 5 * size / 256)");
  simulate->add_option("--center-row", sim.center_row, "Starting center row (default: frame center)");
  simulate->add_option("--center-col", sim.center_col, "Starting center column (default: frame center)");
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("-o,--output", sim.output, "Output FST1 file")->required();
  simulate->add_option("--manifest", sim.manifest, "Manifest path (default <output>.json)");

  FilterFlags flt;
  auto* filter = app.add_subcommand("filter", "Filter a stack with l1, l2 or wtv");
  filter->add_option("--method", flt.method, "l1 | l2 | wtv")->required();
  filter->add_option("--lambda", flt.lambda, "Regularization weight")->required();
  flt.solver.add_to(*filter, false);
  filter->add_option("input", flt.input, "Input FST1 file")->required();
  filter->add_option("-o,--output", flt.output, "Output FST1 file")->required();
  filter->add_option("--manifest", flt.manifest, "Manifest path (default <output>.json)");

  CalibrateFlags cal;
  auto* calibrate = app.add_subcommand("calibrate", "Find lambda whose filtered fidelity matches a target");
  calibrate->add_option("--method", cal.method, "l1 | l2 | wtv")->required();
  calibrate->add_option("--target-fidelity", cal.target, "Target sum_t ||X_t - Y_t||^2")->required();
  calibrate->add_option("--bracket", cal.bracket, "lo,hi search interval")
      ->delimiter(',')
      ->expected(2)
      ->capture_default_str();
  calibrate->add_option("--calibration-tol", cal.tol, "Relative fidelity tolerance")->capture_default_str();
  cal.solver.add_to(*calibrate, false);
  calibrate->add_option("input", cal.input, "Input FST1 file")->required();
  calibrate->add_option("--manifest", cal.manifest, "Manifest path (default <input>.calibrate.json)");

  CompareFlags cmp;
  auto* compare = app.add_subcommand("compare", "Run all three filters and write PGM montages and metrics");
  compare->add_option("input", cmp.input, "Input FST1 file")->required();
  compare->add_option("--out-dir", cmp.out_dir, "Output directory")->required();
  compare->add_option("--wtv-lambda", cmp.wtv_lambda, "WTV lambda")->capture_default_str();
  compare->add_option("--l1-lambda", cmp.l1_lambda, "l1 lambda");
  compare->add_option("--l2-lambda", cmp.l2_lambda, "l2 lambda");
  compare->add_flag("--calibrate", cmp.calibrate, "Match l1 and l2 fidelity to the WTV result");
  compare->add_option("--bracket", cmp.bracket, "lo,hi calibration interval")
      ->delimiter(',')
      ->expected(2)
      ->capture_default_str();
  compare->add_option("--calibration-tol", cmp.calibration_tol, "Relative fidelity tolerance")
      ->capture_default_str();
  compare->add_flag("--remove-background", cmp.remove_bg, "Zero Otsu background pixels first");
  compare->add_option("--downsample", cmp.downsample_factor, "Block-average by this factor first");
  cmp.solver.add_to(*compare, true);
  compare->add_option("--manifest", cmp.manifest, "Manifest path (default <out-dir>/manifest.json)");

  std::string info_input, info_manifest;
  auto* info = app.add_subcommand("info", "Print stack dimensions, frame masses and metadata");
  info->add_option("input", info_input, "Input FST1 file")->required();
  info->add_option("--manifest", info_manifest, "Manifest path (default <input>.info.json)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.back()->help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n" << (subs.empty() ? app.help() : subs.back()->help());
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (filter->parsed()) return cmd_filter(flt, out, err);
    if (calibrate->parsed()) return cmd_calibrate(cal, out);
    if (compare->parsed()) return cmd_compare(cmp, out, err);
    if (info->parsed()) return cmd_info(info_input, info_manifest, out);
  } catch (const UsageError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << "\n" << (subs.empty() ? app.help() : subs.back()->help());
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace wtvf
