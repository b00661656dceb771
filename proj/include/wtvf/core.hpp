#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wtvf {

enum class ErrorCode {
  AllZeroFrame,
  MissingScale,
  LengthMismatch,
  SeriesTooShort,
  NoConvergence,
  DimensionMismatch,
  NumericUnderflow,
  NotNormalized,
  InvalidSpec,
  ConstantFrame,
  BracketInvalid,
  InvalidArgument,
  MalformedFile,
  IoError,
};

const char* to_string(ErrorCode code);

/// Library error. `index` carries the offending frame / transition / iteration
/// count when the code has one (e.g. NoConvergence, NumericUnderflow).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index = {});

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

/// T frames over a height x width grid. Pixels are flattened row-major and
/// frames are stored contiguously (frame-major).
class FrameSeries {
 public:
  FrameSeries() = default;
  FrameSeries(std::size_t height, std::size_t width, std::size_t frames);
  FrameSeries(std::size_t height, std::size_t width, std::size_t frames, std::vector<double> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t frames() const noexcept { return frames_; }
  std::size_t pixels() const noexcept { return height_ * width_; }

  std::span<const double> frame(std::size_t t) const;
  std::span<double> frame(std::size_t t);
  double& at(std::size_t t, std::size_t pixel) { return values_[t * pixels() + pixel]; }
  double at(std::size_t t, std::size_t pixel) const { return values_[t * pixels() + pixel]; }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  /// Time series of a single pixel (one row of the d x T matrix).
  std::vector<double> pixel_series(std::size_t pixel) const;
  void set_pixel_series(std::size_t pixel, std::span<const double> series);

  const std::optional<std::vector<double>>& mass_scale() const noexcept { return mass_scale_; }
  void set_mass_scale(std::vector<double> scale);
  void clear_mass_scale() { mass_scale_.reset(); }

  double frame_sum(std::size_t t) const;
  bool same_shape(const FrameSeries& other) const noexcept;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t frames_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<double>> mass_scale_;
};

struct GridPoint {
  double row = 0.0;
  double col = 0.0;
};

/// Lattice coordinates of every pixel; coordinate i is flattened pixel i.
class PixelGrid {
 public:
  static PixelGrid rectangular(std::size_t height, std::size_t width);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  const GridPoint& operator[](std::size_t i) const { return points_[i]; }
  std::span<const GridPoint> points() const noexcept { return points_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<GridPoint> points_;
};

struct FilterConfig {
  double lambda = 0.0;
  double gamma = 1.0;
  double alpha = 0.05;
  int sinkhorn_iters = 100;
  /// Outer-loop tolerance on ||Y(k) - Y(k-1)||_F. Unset means 1e-6 * d * T.
  std::optional<double> tolerance;
  int max_outer_iters = 500;
  std::optional<double> kernel_truncation_radius;
  bool log_domain = false;
  /// Blend weight toward the uniform frame applied to starting frames that
  /// touch zero; strictly positive frames start exactly at X. A single-frame
  /// series is returned unchanged.
  double start_blend = 0.5;
  /// Lower bound kept on every estimate entry so dual potentials stay finite.
  double mass_floor = 1e-300;
  int threads = 1;

  double resolved_tolerance(std::size_t pixels, std::size_t frames) const;
  void validate() const;
};

/// Clamp negatives to zero and scale each frame onto the probability simplex.
FrameSeries normalize(const FrameSeries& series);

/// Multiply each frame by its recorded mass scale.
FrameSeries denormalize(const FrameSeries& series);

/// True when every frame is nonnegative and sums to one within `tol`.
bool is_normalized(const FrameSeries& series, double tol = 1e-9);

/// Worker count from an explicit request, falling back to WTV_THREADS, then 1.
int resolve_threads(std::optional<int> requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent; results are identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn);

}  // namespace wtvf

#include "wtvf/detail/parallel.hpp"
