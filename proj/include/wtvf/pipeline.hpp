#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wtvf/core.hpp"
#include "wtvf/data.hpp"
#include "wtvf/ot.hpp"
#include "wtvf/wtv.hpp"

namespace wtvf {

struct MethodSettings {
  /// gamma, alpha, Sinkhorn iterations, outer tolerance, truncation, threads.
  /// Its lambda is ignored; run_filter takes lambda explicitly.
  FilterConfig wtv;
  double l1_tol = 1e-8;
  int l1_max_iters = 50000;
  int threads = 1;
};

struct FilterRun {
  FrameSeries output;
  /// sum_t ||X_t - Y_t||^2 in input units.
  double fidelity = 0.0;
  bool converged = true;
  int iterations = 0;
  /// Set for the wtv method only.
  std::optional<WtvReport> wtv_report;
  /// Normalized WTV estimate before de-normalization.
  std::optional<FrameSeries> wtv_normalized;
  /// Truncation radius actually used (wtv only; nullopt means dense).
  std::optional<double> truncation_radius;
};

/// Radius the wtv path uses: the configured one (infinity means dense), else
/// the default for lambda/gamma.
std::optional<double> effective_truncation_radius(const FilterConfig& config, double lambda);

/// Dispatches to the per-pixel l1 / l2 filters or to WTV. The WTV path
/// normalizes each frame on ingest and restores the frame masses on emit.
/// A WTV run that stops at its iteration cap returns converged = false; an l1
/// pixel that misses its certificate throws NoConvergence.
FilterRun run_filter(const FrameSeries& x, FilterMethod method, double lambda, const MethodSettings& settings);

/// calibrate_lambda with fidelity measured by run_filter.
CalibrationResult calibrate_method(const FrameSeries& x, FilterMethod method, double target, double lo, double hi,
                                   double tol, const MethodSettings& settings);

/// 95th percentile (linear interpolation) of the frame after scaling it to
/// unit sum. An all-zero frame has contrast 0.
double frame_contrast(std::span<const double> frame);

/// Min-max scaling of the whole series to 0..255; a constant series maps to 0.
std::vector<std::uint8_t> to_gray8(const FrameSeries& series);

}  // namespace wtvf
