#include "wtvf/core.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace wtvf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZeroFrame: return "AllZeroFrame";
    case ErrorCode::MissingScale: return "MissingScale";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericUnderflow: return "NumericUnderflow";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConstantFrame: return "ConstantFrame";
    case ErrorCode::BracketInvalid: return "BracketInvalid";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<std::size_t> index)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), index_(index) {}

FrameSeries::FrameSeries(std::size_t height, std::size_t width, std::size_t frames)
    : height_(height), width_(width), frames_(frames), values_(height * width * frames, 0.0) {}

FrameSeries::FrameSeries(std::size_t height, std::size_t width, std::size_t frames,
                         std::vector<double> values)
    : height_(height), width_(width), frames_(frames), values_(std::move(values)) {
  if (values_.size() != height_ * width_ * frames_) {
    throw Error(ErrorCode::LengthMismatch, "payload has " + std::to_string(values_.size()) +
                                               " values, header implies " +
                                               std::to_string(height_ * width_ * frames_));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "frame values must be finite");
  }
}

std::span<const double> FrameSeries::frame(std::size_t t) const {
  return std::span<const double>(values_).subspan(t * pixels(), pixels());
}

std::span<double> FrameSeries::frame(std::size_t t) {
  return std::span<double>(values_).subspan(t * pixels(), pixels());
}

std::vector<double> FrameSeries::pixel_series(std::size_t pixel) const {
  std::vector<double> out(frames_);
  for (std::size_t t = 0; t < frames_; ++t) out[t] = at(t, pixel);
  return out;
}

void FrameSeries::set_pixel_series(std::size_t pixel, std::span<const double> series) {
  if (series.size() != frames_) throw Error(ErrorCode::LengthMismatch, "pixel series length");
  for (std::size_t t = 0; t < frames_; ++t) at(t, pixel) = series[t];
}

void FrameSeries::set_mass_scale(std::vector<double> scale) {
  if (scale.size() != frames_) throw Error(ErrorCode::LengthMismatch, "mass_scale needs one entry per frame");
  mass_scale_ = std::move(scale);
}

double FrameSeries::frame_sum(std::size_t t) const {
  double s = 0.0;
  for (double v : frame(t)) s += v;
  return s;
}

bool FrameSeries::same_shape(const FrameSeries& other) const noexcept {
  return height_ == other.height_ && width_ == other.width_ && frames_ == other.frames_;
}

PixelGrid PixelGrid::rectangular(std::size_t height, std::size_t width) {
  PixelGrid grid;
  grid.height_ = height;
  grid.width_ = width;
  grid.points_.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      grid.points_.push_back({static_cast<double>(r), static_cast<double>(c)});
    }
  }
  return grid;
}

double FilterConfig::resolved_tolerance(std::size_t pixels, std::size_t frames) const {
  return tolerance ? *tolerance : 1e-6 * static_cast<double>(pixels) * static_cast<double>(frames);
}

void FilterConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be > 0");
  if (sinkhorn_iters < 1) throw Error(ErrorCode::InvalidArgument, "sinkhorn_iters must be >= 1");
  if (max_outer_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_outer_iters must be >= 1");
  if (tolerance && !(*tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be > 0");
  if (kernel_truncation_radius && !(*kernel_truncation_radius >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "truncation radius must be >= 0");
  }
  if (!(start_blend >= 0.0 && start_blend <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "start_blend must lie in [0, 1]");
  }
  if (!(mass_floor >= 0.0)) throw Error(ErrorCode::InvalidArgument, "mass_floor must be >= 0");
}

FrameSeries normalize(const FrameSeries& series) {
  FrameSeries out = series;
  std::vector<double> scale(series.frames());
  for (std::size_t t = 0; t < series.frames(); ++t) {
    auto f = out.frame(t);
    double total = 0.0;
    for (double& v : f) {
      v = std::max(v, 0.0);
      total += v;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::AllZeroFrame, "frame has no positive mass", t);
    for (double& v : f) v /= total;
    scale[t] = total;
  }
  out.set_mass_scale(std::move(scale));
  return out;
}

FrameSeries denormalize(const FrameSeries& series) {
  if (!series.mass_scale()) throw Error(ErrorCode::MissingScale, "series carries no mass_scale");
  FrameSeries out = series;
  const auto& scale = *series.mass_scale();
  for (std::size_t t = 0; t < series.frames(); ++t) {
    for (double& v : out.frame(t)) v *= scale[t];
  }
  out.clear_mass_scale();
  return out;
}

bool is_normalized(const FrameSeries& series, double tol) {
  for (std::size_t t = 0; t < series.frames(); ++t) {
    double total = 0.0;
    for (double v : series.frame(t)) {
      if (v < 0.0) return false;
      total += v;
    }
    if (std::abs(total - 1.0) > tol) return false;
  }
  return true;
}

int resolve_threads(std::optional<int> requested) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("WTV_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return static_cast<int>(n);
  }
  return 1;
}

}  // namespace wtvf
