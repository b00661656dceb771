#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "wtvf/core.hpp"

namespace wtvf {

/// Storage layout shared by a ground cost and everything derived from it.
/// Dense patterns store all d*d entries row-major; sparse patterns are CSR
/// with the (symmetric) set of pairs within the truncation radius.
struct SparsityPattern {
  std::size_t d = 0;
  bool dense = true;
  std::vector<std::size_t> row_start;  // sparse only, size d + 1
  std::vector<std::uint32_t> cols;     // sparse only

  std::size_t nnz() const noexcept { return dense ? d * d : cols.size(); }
  std::size_t row_begin(std::size_t i) const noexcept { return dense ? i * d : row_start[i]; }
  std::size_t row_end(std::size_t i) const noexcept { return dense ? (i + 1) * d : row_start[i + 1]; }
  std::size_t col(std::size_t idx) const noexcept { return dense ? idx % d : cols[idx]; }
  bool same_as(const SparsityPattern& other) const noexcept;
};

using PatternPtr = std::shared_ptr<const SparsityPattern>;

/// Pairwise transport cost between pixels.
class GroundCost {
 public:
  GroundCost(PatternPtr pattern, std::vector<double> values, std::optional<double> truncation_radius);

  std::size_t size() const noexcept { return pattern_->d; }
  const SparsityPattern& pattern() const noexcept { return *pattern_; }
  const PatternPtr& pattern_ptr() const noexcept { return pattern_; }
  std::span<const double> values() const noexcept { return values_; }
  std::optional<double> truncation_radius() const noexcept { return radius_; }
  bool is_dense() const noexcept { return pattern_->dense; }

  /// Stored cost for (i, j), or nullopt when the pair was truncated away.
  std::optional<double> at(std::size_t i, std::size_t j) const;

 private:
  PatternPtr pattern_;
  std::vector<double> values_;
  std::optional<double> radius_;
};

/// c_ij = ||p_i - p_j||_2; pairs with c_ij > radius are dropped when a radius is given.
GroundCost euclidean_cost(const PixelGrid& grid, std::optional<double> truncation_radius = {});

/// Radius beyond which exp(-lambda c / gamma) < threshold; nullopt when lambda = 0.
std::optional<double> default_truncation_radius(double lambda, double gamma, double threshold = 1e-12);

/// K = exp(-lambda C / gamma) on the cost's pattern; truncated pairs are exact zeros.
class GibbsKernel {
 public:
  GibbsKernel(const GroundCost& cost, double lambda, double gamma);

  std::size_t size() const noexcept { return pattern_->d; }
  const SparsityPattern& pattern() const noexcept { return *pattern_; }
  const PatternPtr& pattern_ptr() const noexcept { return pattern_; }
  std::span<const double> values() const noexcept { return values_; }
  /// -lambda c / gamma per stored entry, used by the log-domain solver.
  std::span<const double> log_values() const noexcept { return log_values_; }
  double lambda() const noexcept { return lambda_; }
  double gamma() const noexcept { return gamma_; }
  double min_entry() const noexcept { return min_entry_; }
  /// Set when some stored entry is below 1e-300 (multiplicative Sinkhorn may underflow).
  bool underflow_risk() const noexcept { return min_entry_ < 1e-300; }

  /// y = K x. K is symmetric, so this also computes K^T x.
  void multiply(std::span<const double> x, std::span<double> y) const;

 private:
  PatternPtr pattern_;
  std::vector<double> values_;
  std::vector<double> log_values_;
  double lambda_;
  double gamma_;
  double min_entry_ = 1.0;
};

GibbsKernel gibbs_kernel(const GroundCost& cost, double lambda, double gamma);

/// Sinkhorn scalings and the matching dual potentials a = -gamma log u,
/// b = -gamma log v. Zero-mass marginal entries carry u = 0 and a = +inf.
struct DualState {
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> a;
  std::vector<double> b;
  double gamma = 1.0;
  bool log_domain = false;

  /// State with b = potential everywhere (v = exp(-potential / gamma)).
  static DualState uniform(std::size_t d, double gamma, double potential);
};

struct TransportPlan {
  PatternPtr pattern;
  std::vector<double> values;
  std::vector<double> row_marginal;
  std::vector<double> col_marginal;

  std::size_t size() const noexcept { return pattern->d; }
  /// Entry (i, j), zero when (i, j) is not stored.
  double at(std::size_t i, std::size_t j) const;
};

/// Runs `iterations` alternating updates u <- mu / K v, v <- nu / K^T u starting
/// from `warm` (or v = 1). The log-domain variant iterates on (a, b) with a
/// streamed log-sum-exp and never forms K v.
DualState sinkhorn(std::span<const double> mu, std::span<const double> nu, const GibbsKernel& kernel,
                   int iterations, const DualState* warm = nullptr, bool log_domain = false);

/// P = diag(u) K diag(v), with row/column marginals cached.
TransportPlan plan_from_duals(const DualState& state, const GibbsKernel& kernel);

/// sum_ij c_ij P_ij over the shared pattern.
double transport_cost(const TransportPlan& plan, const GroundCost& cost);

/// sum_ij P_ij log P_ij - 1 with 0 log 0 = 0.
double plan_entropy(const TransportPlan& plan);

/// Hilbert projective distance log max(x/y) - log min(x/y) over positive entries.
double hilbert_distance(std::span<const double> x, std::span<const double> y);

}  // namespace wtvf
