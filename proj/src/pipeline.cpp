#include "wtvf/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "wtvf/trend.hpp"

namespace wtvf {

std::optional<double> effective_truncation_radius(const FilterConfig& config, double lambda) {
  if (config.kernel_truncation_radius) {
    if (std::isinf(*config.kernel_truncation_radius)) return std::nullopt;
    return config.kernel_truncation_radius;
  }
  return default_truncation_radius(lambda, config.gamma);
}

FilterRun run_filter(const FrameSeries& x, FilterMethod method, double lambda, const MethodSettings& settings) {
  FilterRun run;
  switch (method) {
    case FilterMethod::L2:
      run.output = l2_filter_series(x, lambda, settings.threads);
      break;
    case FilterMethod::L1:
      run.output = l1_filter_series(x, lambda, settings.l1_tol, settings.threads, settings.l1_max_iters);
      break;
    case FilterMethod::Wtv: {
      FilterConfig config = settings.wtv;
      config.lambda = lambda;
      config.threads = settings.threads;
      run.truncation_radius = effective_truncation_radius(config, lambda);
      const FrameSeries normalized = normalize(x);
      const GroundCost cost = euclidean_cost(PixelGrid::rectangular(x.height(), x.width()), run.truncation_radius);
      WtvResult result = wtv_filter(normalized, cost, config);
      run.output = denormalize(result.estimate);
      run.output.clear_mass_scale();
      run.converged = result.report.converged;
      run.iterations = result.report.iterations;
      run.wtv_report = std::move(result.report);
      run.wtv_normalized = std::move(result.estimate);
      break;
    }
  }
  run.fidelity = series_fidelity(x, run.output);
  return run;
}

CalibrationResult calibrate_method(const FrameSeries& x, FilterMethod method, double target, double lo, double hi,
                                   double tol, const MethodSettings& settings) {
  return calibrate_lambda([&](double lambda) { return run_filter(x, method, lambda, settings).fidelity; }, target, lo,
                          hi, tol);
}

double frame_contrast(std::span<const double> frame) {
  if (frame.empty()) return 0.0;
  double total = 0.0;
  for (double v : frame) total += v;
  std::vector<double> sorted(frame.begin(), frame.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = 0.95 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double value = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  return total > 0.0 ? value / total : 0.0;
}

std::vector<std::uint8_t> to_gray8(const FrameSeries& series) {
  const auto& v = series.values();
  std::vector<std::uint8_t> out(v.size(), 0);
  if (v.empty()) return out;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double lo = *mn;
  const double span = *mx - *mn;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (v[i] - lo) / span));
  }
  return out;
}

}  // namespace wtvf
