#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wtvf/core.hpp"

namespace wtvf {

struct RingSpec {
  std::size_t height = 256;
  std::size_t width = 256;
  std::size_t frames = 20;
  GridPoint center_start{127.5, 127.5};
  double radius = 40.0;
  double thickness = 6.0;
  /// Per-axis standard deviation of each random-walk step, in pixels.
  double walk_std = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
  /// Defaults scaled from the 256 x 256 setup to a square `size` grid.
  static RingSpec scaled(std::size_t size);
};

/// Ring whose center follows a seeded Gaussian random walk, reflected so the
/// ring stays inside the frame. Pixels at distance within radius +- thickness/2
/// of the center are 1, all others 0.
FrameSeries simulate_ring(const RingSpec& spec);

/// Centers used by `simulate_ring`, one per frame.
std::vector<GridPoint> ring_centers(const RingSpec& spec);

struct OtsuResult {
  double threshold = 0.0;
  /// Index of the last background bin.
  std::size_t cut_bin = 0;
  /// Foreground flags: pixels falling in bins above `cut_bin`.
  std::vector<std::uint8_t> mask;
};

/// Otsu's between-class variance threshold on a min-max scaled histogram.
/// `threshold` is the lower edge of the first foreground bin.
OtsuResult otsu_threshold(std::span<const double> frame, std::size_t bins = 256);

/// Zero every pixel Otsu classifies as background, frame by frame.
FrameSeries remove_background(const FrameSeries& series, std::size_t bins = 256);

struct DownsampleResult {
  FrameSeries series;
  std::size_t padded_rows = 0;
  std::size_t padded_cols = 0;
};

/// Block-mean pooling over factor x factor blocks, zero-padding ragged edges.
DownsampleResult downsample(const FrameSeries& series, std::size_t factor);

/// sum_t ||X_t - Y_t||^2 (no 1/2).
double series_fidelity(const FrameSeries& x, const FrameSeries& y);

enum class FilterMethod { L1, L2, Wtv };

const char* to_string(FilterMethod method);
FilterMethod parse_filter_method(const std::string& name);

struct CalibrationResult {
  double lambda = 0.0;
  double fidelity = 0.0;
  int steps = 0;
};

/// Bisection on lambda until |fidelity(lambda) - target| <= tol * target.
/// `fidelity_at` must be nondecreasing in lambda.
CalibrationResult calibrate_lambda(const std::function<double(double)>& fidelity_at, double target, double lo,
                                   double hi, double tol, int max_steps = 60);

}  // namespace wtvf
