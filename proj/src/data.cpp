#include "wtvf/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace wtvf {

namespace {

// Triangle-wave reflection of x into [lo, hi].
double reflect(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0.0) return 0.5 * (lo + hi);
  double r = std::fmod(x - lo, 2.0 * span);
  if (r < 0.0) r += 2.0 * span;
  return r <= span ? lo + r : lo + 2.0 * span - r;
}

}  // namespace

void RingSpec::validate() const {
  if (height == 0 || width == 0 || frames == 0) throw Error(ErrorCode::InvalidSpec, "ring dimensions must be positive");
  if (!(radius > 0.0) || !(thickness > 0.0)) throw Error(ErrorCode::InvalidSpec, "radius and thickness must be positive");
  if (!(radius + thickness < 0.5 * static_cast<double>(std::min(height, width)))) {
    throw Error(ErrorCode::InvalidSpec, "radius + thickness must stay below half the frame size");
  }
  if (!(walk_std >= 0.0)) throw Error(ErrorCode::InvalidSpec, "walk_std must be >= 0");
}

RingSpec RingSpec::scaled(std::size_t size) {
  RingSpec spec;
  const double s = static_cast<double>(size) / 256.0;
  spec.height = size;
  spec.width = size;
  spec.center_start = {0.5 * static_cast<double>(size - 1), 0.5 * static_cast<double>(size - 1)};
  spec.radius = 40.0 * s;
  spec.thickness = 6.0 * s;
  spec.walk_std = 5.0 * s;
  return spec;
}

std::vector<GridPoint> ring_centers(const RingSpec& spec) {
  spec.validate();
  const double margin = spec.radius + 0.5 * spec.thickness;
  const double row_hi = static_cast<double>(spec.height - 1) - margin;
  const double col_hi = static_cast<double>(spec.width - 1) - margin;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<GridPoint> centers(spec.frames);
  GridPoint c{reflect(spec.center_start.row, margin, row_hi), reflect(spec.center_start.col, margin, col_hi)};
  for (std::size_t t = 0; t < spec.frames; ++t) {
    centers[t] = c;
    const double dr = spec.walk_std * step(rng);
    const double dc = spec.walk_std * step(rng);
    c.row = reflect(c.row + dr, margin, row_hi);
    c.col = reflect(c.col + dc, margin, col_hi);
  }
  return centers;
}

FrameSeries simulate_ring(const RingSpec& spec) {
  const auto centers = ring_centers(spec);
  FrameSeries out(spec.height, spec.width, spec.frames);
  const double inner = spec.radius - 0.5 * spec.thickness;
  const double outer = spec.radius + 0.5 * spec.thickness;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    auto f = out.frame(t);
    for (std::size_t r = 0; r < spec.height; ++r) {
      for (std::size_t c = 0; c < spec.width; ++c) {
        const double dist = std::hypot(static_cast<double>(r) - centers[t].row, static_cast<double>(c) - centers[t].col);
        f[r * spec.width + c] = (dist >= inner && dist <= outer) ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

OtsuResult otsu_threshold(std::span<const double> frame, std::size_t bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidArgument, "Otsu needs at least two bins");
  if (frame.empty()) throw Error(ErrorCode::InvalidArgument, "empty frame");
  const auto [min_it, max_it] = std::minmax_element(frame.begin(), frame.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw Error(ErrorCode::InvalidArgument, "frame must be finite");
  if (!(hi > lo)) throw Error(ErrorCode::ConstantFrame, "frame is constant");

  const double range = hi - lo;
  std::vector<std::size_t> bin_of(frame.size());
  std::vector<double> hist(bins, 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double s = (frame[i] - lo) / range;
    const auto b = std::min(static_cast<std::size_t>(s * static_cast<double>(bins)), bins - 1);
    bin_of[i] = b;
    hist[b] += 1.0;
  }
  const double n = static_cast<double>(frame.size());
  double total_mean = 0.0;
  for (std::size_t b = 0; b < bins; ++b) total_mean += static_cast<double>(b) * hist[b] / n;

  double w0 = 0.0;
  double m0 = 0.0;
  double best = -1.0;
  std::size_t best_cut = 0;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    w0 += hist[k] / n;
    m0 += static_cast<double>(k) * hist[k] / n;
    const double w1 = 1.0 - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double mu0 = m0 / w0;
    const double mu1 = (total_mean - m0) / w1;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_cut = k;
    }
  }

  OtsuResult result;
  result.cut_bin = best_cut;
  result.threshold = lo + range * static_cast<double>(best_cut + 1) / static_cast<double>(bins);
  result.mask.resize(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) result.mask[i] = bin_of[i] > best_cut ? 1 : 0;
  return result;
}

FrameSeries remove_background(const FrameSeries& series, std::size_t bins) {
  FrameSeries out = series;
  for (std::size_t t = 0; t < series.frames(); ++t) {
    const auto otsu = otsu_threshold(series.frame(t), bins);
    auto f = out.frame(t);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!otsu.mask[i]) f[i] = 0.0;
    }
  }
  return out;
}

DownsampleResult downsample(const FrameSeries& series, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::InvalidArgument, "downsample factor must be positive");
  DownsampleResult result;
  if (factor == 1) {
    result.series = series;
    return result;
  }
  const std::size_t h = (series.height() + factor - 1) / factor;
  const std::size_t w = (series.width() + factor - 1) / factor;
  result.padded_rows = h * factor - series.height();
  result.padded_cols = w * factor - series.width();
  FrameSeries out(h, w, series.frames());
  const double area = static_cast<double>(factor * factor);
  for (std::size_t t = 0; t < series.frames(); ++t) {
    const auto in = series.frame(t);
    auto o = out.frame(t);
    for (std::size_t r = 0; r < series.height(); ++r) {
      for (std::size_t c = 0; c < series.width(); ++c) {
        o[(r / factor) * w + c / factor] += in[r * series.width() + c];
      }
    }
    for (double& v : o) v /= area;
  }
  result.series = std::move(out);
  return result;
}

double series_fidelity(const FrameSeries& x, const FrameSeries& y) {
  if (!x.same_shape(y)) throw Error(ErrorCode::DimensionMismatch, "series differ in shape");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    const double r = x.values()[i] - y.values()[i];
    acc += r * r;
  }
  return acc;
}

const char* to_string(FilterMethod method) {
  switch (method) {
    case FilterMethod::L1: return "l1";
    case FilterMethod::L2: return "l2";
    case FilterMethod::Wtv: return "wtv";
  }
  return "unknown";
}

FilterMethod parse_filter_method(const std::string& name) {
  if (name == "l1") return FilterMethod::L1;
  if (name == "l2") return FilterMethod::L2;
  if (name == "wtv") return FilterMethod::Wtv;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "' (expected l1, l2 or wtv)");
}

CalibrationResult calibrate_lambda(const std::function<double(double)>& fidelity_at, double target, double lo,
                                   double hi, double tol, int max_steps) {
  if (!(lo >= 0.0) || !(hi > lo)) throw Error(ErrorCode::InvalidArgument, "bracket must satisfy 0 <= lo < hi");
  if (!(target >= 0.0)) throw Error(ErrorCode::InvalidArgument, "target fidelity must be >= 0");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be > 0");
  const double slack = tol * target;
  CalibrationResult result;
  const double f_lo = fidelity_at(lo);
  if (std::abs(f_lo - target) <= slack) return {lo, f_lo, 0};
  const double f_hi = fidelity_at(hi);
  if (std::abs(f_hi - target) <= slack) return {hi, f_hi, 0};
  if (target < f_lo || target > f_hi) {
    throw Error(ErrorCode::BracketInvalid, "target " + std::to_string(target) + " lies outside [" +
                                               std::to_string(f_lo) + ", " + std::to_string(f_hi) + "]");
  }
  double best_gap = std::abs(f_lo - target);
  result = {lo, f_lo, 0};
  for (int step = 1; step <= max_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = fidelity_at(mid);
    if (std::abs(f_mid - target) < best_gap) {
      best_gap = std::abs(f_mid - target);
      result = {mid, f_mid, step};
    }
    if (std::abs(f_mid - target) <= slack) return {mid, f_mid, step};
    (f_mid < target ? lo : hi) = mid;
  }
  throw Error(ErrorCode::NoConvergence,
              "bisection stopped after " + std::to_string(max_steps) + " steps at lambda " +
                  std::to_string(result.lambda),
              static_cast<std::size_t>(max_steps));
}

}  // namespace wtvf
