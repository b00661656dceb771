#include "wtvf/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wtvf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_marginal(std::span<const double> m, std::size_t d, const char* name) {
  if (m.size() != d) throw Error(ErrorCode::DimensionMismatch, std::string(name) + " length differs from kernel size");
  double total = 0.0;
  for (double x : m) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error(ErrorCode::NotNormalized, std::string(name) + " has a negative or non-finite entry");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-8) {
    throw Error(ErrorCode::NotNormalized, std::string(name) + " does not sum to one (sum = " + std::to_string(total) + ")");
  }
}

// Log-sum-exp of log_k[idx] - pot[col] / gamma over one stored row.
double row_log_sum_exp(const GibbsKernel& kernel, std::size_t row, std::span<const double> pot) {
  const auto& pat = kernel.pattern();
  const auto logk = kernel.log_values();
  const double inv_gamma = 1.0 / kernel.gamma();
  double peak = -kInf;
  for (std::size_t idx = pat.row_begin(row); idx < pat.row_end(row); ++idx) {
    const double p = pot[pat.col(idx)];
    if (p == kInf) continue;
    peak = std::max(peak, logk[idx] - p * inv_gamma);
  }
  if (peak == -kInf) return -kInf;
  double acc = 0.0;
  for (std::size_t idx = pat.row_begin(row); idx < pat.row_end(row); ++idx) {
    const double p = pot[pat.col(idx)];
    if (p == kInf) continue;
    acc += std::exp(logk[idx] - p * inv_gamma - peak);
  }
  return peak + std::log(acc);
}

}  // namespace

bool SparsityPattern::same_as(const SparsityPattern& other) const noexcept {
  if (this == &other) return true;
  return d == other.d && dense == other.dense && row_start == other.row_start && cols == other.cols;
}

GroundCost::GroundCost(PatternPtr pattern, std::vector<double> values, std::optional<double> truncation_radius)
    : pattern_(std::move(pattern)), values_(std::move(values)), radius_(truncation_radius) {
  if (!pattern_ || values_.size() != pattern_->nnz()) {
    throw Error(ErrorCode::DimensionMismatch, "cost values do not match the sparsity pattern");
  }
}

std::optional<double> GroundCost::at(std::size_t i, std::size_t j) const {
  const auto& pat = *pattern_;
  if (pat.dense) return values_[i * pat.d + j];
  const auto first = pat.cols.begin() + static_cast<std::ptrdiff_t>(pat.row_start[i]);
  const auto last = pat.cols.begin() + static_cast<std::ptrdiff_t>(pat.row_start[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
  if (it == last || *it != j) return std::nullopt;
  return values_[static_cast<std::size_t>(it - pat.cols.begin())];
}

GroundCost euclidean_cost(const PixelGrid& grid, std::optional<double> truncation_radius) {
  const std::size_t d = grid.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "grid is empty");
  auto pattern = std::make_shared<SparsityPattern>();
  pattern->d = d;
  std::vector<double> values;
  const auto pts = grid.points();
  if (!truncation_radius) {
    pattern->dense = true;
    values.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        values[i * d + j] = std::hypot(pts[i].row - pts[j].row, pts[i].col - pts[j].col);
      }
    }
    return GroundCost(std::move(pattern), std::move(values), std::nullopt);
  }
  const double radius = *truncation_radius;
  if (!(radius >= 0.0)) throw Error(ErrorCode::InvalidArgument, "truncation radius must be >= 0");
  pattern->dense = false;
  pattern->row_start.reserve(d + 1);
  pattern->row_start.push_back(0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dr = pts[i].row - pts[j].row;
      const double dc = pts[i].col - pts[j].col;
      if (std::abs(dr) > radius || std::abs(dc) > radius) continue;
      const double c = std::hypot(dr, dc);
      if (c > radius) continue;
      pattern->cols.push_back(static_cast<std::uint32_t>(j));
      values.push_back(c);
    }
    pattern->row_start.push_back(pattern->cols.size());
  }
  return GroundCost(std::move(pattern), std::move(values), radius);
}

std::optional<double> default_truncation_radius(double lambda, double gamma, double threshold) {
  if (!(lambda > 0.0)) return std::nullopt;
  return gamma * std::log(1.0 / threshold) / lambda;
}

GibbsKernel::GibbsKernel(const GroundCost& cost, double lambda, double gamma)
    : pattern_(cost.pattern_ptr()), lambda_(lambda), gamma_(gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  const auto c = cost.values();
  values_.resize(c.size());
  log_values_.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    log_values_[i] = lambda == 0.0 ? 0.0 : -lambda * c[i] / gamma;
    values_[i] = std::exp(log_values_[i]);
    min_entry_ = std::min(min_entry_, values_[i]);
  }
}

void GibbsKernel::multiply(std::span<const double> x, std::span<double> y) const {
  const auto& pat = *pattern_;
  if (pat.dense) {
    const std::size_t d = pat.d;
    for (std::size_t i = 0; i < d; ++i) {
      const double* row = values_.data() + i * d;
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
      y[i] = acc;
    }
    return;
  }
  for (std::size_t i = 0; i < pat.d; ++i) {
    double acc = 0.0;
    for (std::size_t idx = pat.row_start[i]; idx < pat.row_start[i + 1]; ++idx) acc += values_[idx] * x[pat.cols[idx]];
    y[i] = acc;
  }
}

GibbsKernel gibbs_kernel(const GroundCost& cost, double lambda, double gamma) {
  return GibbsKernel(cost, lambda, gamma);
}

DualState DualState::uniform(std::size_t d, double gamma, double potential) {
  DualState s;
  s.gamma = gamma;
  s.a.assign(d, potential);
  s.b.assign(d, potential);
  s.u.assign(d, std::exp(-potential / gamma));
  s.v.assign(d, std::exp(-potential / gamma));
  return s;
}

double TransportPlan::at(std::size_t i, std::size_t j) const {
  const auto& pat = *pattern;
  if (pat.dense) return values[i * pat.d + j];
  for (std::size_t idx = pat.row_start[i]; idx < pat.row_start[i + 1]; ++idx) {
    if (pat.cols[idx] == j) return values[idx];
  }
  return 0.0;
}

DualState sinkhorn(std::span<const double> mu, std::span<const double> nu, const GibbsKernel& kernel,
                   int iterations, const DualState* warm, bool log_domain) {
  const std::size_t d = kernel.size();
  check_marginal(mu, d, "mu");
  check_marginal(nu, d, "nu");
  if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "Sinkhorn needs at least one iteration");
  if (warm && (warm->v.size() != d || warm->b.size() != d)) {
    throw Error(ErrorCode::DimensionMismatch, "warm-start state has the wrong size");
  }
  const double gamma = kernel.gamma();
  DualState s;
  s.gamma = gamma;
  s.log_domain = log_domain;
  s.u.assign(d, 0.0);
  s.a.assign(d, kInf);

  if (!log_domain) {
    s.v = warm ? warm->v : std::vector<double>(d, 1.0);
    std::vector<double> kv(d);
    for (int it = 0; it < iterations; ++it) {
      kernel.multiply(s.v, kv);
      for (std::size_t i = 0; i < d; ++i) {
        if (mu[i] == 0.0) {
          s.u[i] = 0.0;
          continue;
        }
        if (!(kv[i] > 0.0) || !std::isfinite(kv[i])) {
          throw Error(ErrorCode::NumericUnderflow, "K v vanished at pixel " + std::to_string(i) +
                                                       "; enable log-domain updates or raise gamma");
        }
        s.u[i] = mu[i] / kv[i];
      }
      kernel.multiply(s.u, kv);
      for (std::size_t j = 0; j < d; ++j) {
        if (nu[j] == 0.0) {
          s.v[j] = 0.0;
          continue;
        }
        if (!(kv[j] > 0.0) || !std::isfinite(kv[j])) {
          throw Error(ErrorCode::NumericUnderflow, "K^T u vanished at pixel " + std::to_string(j) +
                                                       "; enable log-domain updates or raise gamma");
        }
        s.v[j] = nu[j] / kv[j];
      }
    }
    s.b.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      s.a[i] = s.u[i] > 0.0 ? -gamma * std::log(s.u[i]) : kInf;
      s.b[i] = s.v[i] > 0.0 ? -gamma * std::log(s.v[i]) : kInf;
    }
    return s;
  }

  s.b = warm ? warm->b : std::vector<double>(d, 0.0);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < d; ++i) {
      if (mu[i] == 0.0) {
        s.a[i] = kInf;
        continue;
      }
      const double lse = row_log_sum_exp(kernel, i, s.b);
      if (!std::isfinite(lse)) {
        throw Error(ErrorCode::NumericUnderflow, "no reachable column mass for pixel " + std::to_string(i));
      }
      s.a[i] = -gamma * std::log(mu[i]) + gamma * lse;
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (nu[j] == 0.0) {
        s.b[j] = kInf;
        continue;
      }
      const double lse = row_log_sum_exp(kernel, j, s.a);
      if (!std::isfinite(lse)) {
        throw Error(ErrorCode::NumericUnderflow, "no reachable row mass for pixel " + std::to_string(j));
      }
      s.b[j] = -gamma * std::log(nu[j]) + gamma * lse;
    }
  }
  s.v.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    s.u[i] = std::exp(-s.a[i] / gamma);
    s.v[i] = std::exp(-s.b[i] / gamma);
  }
  return s;
}

TransportPlan plan_from_duals(const DualState& state, const GibbsKernel& kernel) {
  const std::size_t d = kernel.size();
  if (state.u.size() != d || state.v.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "dual state size differs from kernel size");
  }
  TransportPlan plan;
  plan.pattern = kernel.pattern_ptr();
  const auto& pat = kernel.pattern();
  plan.values.resize(pat.nnz());
  plan.row_marginal.assign(d, 0.0);
  plan.col_marginal.assign(d, 0.0);
  const auto k = kernel.values();
  const auto logk = kernel.log_values();
  const double inv_gamma = 1.0 / state.gamma;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t idx = pat.row_begin(i); idx < pat.row_end(i); ++idx) {
      const std::size_t j = pat.col(idx);
      double p = 0.0;
      if (state.log_domain) {
        if (state.a[i] != kInf && state.b[j] != kInf) p = std::exp(logk[idx] - (state.a[i] + state.b[j]) * inv_gamma);
      } else {
        p = state.u[i] * k[idx] * state.v[j];
      }
      plan.values[idx] = p;
      plan.row_marginal[i] += p;
      plan.col_marginal[j] += p;
    }
  }
  return plan;
}

double transport_cost(const TransportPlan& plan, const GroundCost& cost) {
  if (!plan.pattern || !plan.pattern->same_as(cost.pattern())) {
    throw Error(ErrorCode::DimensionMismatch, "plan and cost use different layouts");
  }
  const auto c = cost.values();
  double total = 0.0;
  for (std::size_t idx = 0; idx < plan.values.size(); ++idx) total += c[idx] * plan.values[idx];
  return total;
}

double plan_entropy(const TransportPlan& plan) {
  double h = 0.0;
  for (double p : plan.values) {
    if (p > 0.0) h += p * std::log(p);
  }
  return h - 1.0;
}

double hilbert_distance(std::span<const double> x, std::span<const double> y) {
  double hi = -kInf;
  double lo = kInf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0 || y[i] <= 0.0) continue;
    const double r = std::log(x[i]) - std::log(y[i]);
    hi = std::max(hi, r);
    lo = std::min(lo, r);
  }
  return hi == -kInf ? 0.0 : hi - lo;
}

}  // namespace wtvf
