#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wtvf/core.hpp"

namespace wtvf {

/// k-th order forward difference over a length-T series, (T - k) x T.
/// Row j holds the stencil (-1)^i C(k, i) at columns j..j+k, so D1 rows read
/// [1, -1] and D2 rows read [1, -2, 1].
class DiffOperator {
 public:
  DiffOperator(std::size_t order, std::size_t length);

  std::size_t order() const noexcept { return order_; }
  std::size_t rows() const noexcept { return length_ - order_; }
  std::size_t cols() const noexcept { return length_; }
  std::span<const double> stencil() const noexcept { return stencil_; }

  std::vector<double> apply(std::span<const double> y) const;
  std::vector<double> apply_transpose(std::span<const double> g) const;

 private:
  std::size_t order_;
  std::size_t length_;
  std::vector<double> stencil_;
};

std::vector<double> apply_diff(const DiffOperator& op, std::span<const double> y);

/// Symmetric positive-definite band matrix stored by lower diagonals, with an
/// in-place LDL^T factorization.
class BandedSpd {
 public:
  BandedSpd(std::size_t n, std::size_t bandwidth);

  std::size_t size() const noexcept { return n_; }
  std::size_t bandwidth() const noexcept { return bw_; }
  /// Entry (i, j) with i >= j and i - j <= bandwidth.
  double& lower(std::size_t i, std::size_t j) { return band_[(i - j) * n_ + j]; }
  double lower(std::size_t i, std::size_t j) const { return band_[(i - j) * n_ + j]; }

  /// D^T D scaled by `weight` plus `diagonal` * I.
  static BandedSpd gram(const DiffOperator& op, double weight, double diagonal);

  void factorize();
  std::vector<double> solve(std::span<const double> rhs) const;
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  std::size_t n_;
  std::size_t bw_;
  std::vector<double> band_;
  bool factored_ = false;
};

/// Hodrick-Prescott filter: solves (I + 2 lambda D2^T D2) y = x.
std::vector<double> l2_trend_filter(std::span<const double> x, double lambda);

struct L1Result {
  std::vector<double> trend;
  std::vector<double> dual;  // g in [-1, 1]^(T-2), trend = x - lambda D2^T g
  int iterations = 0;
};

/// Smallest lambda whose l1 trend is globally affine: ||(D D^T)^-1 D x||_inf.
double l1_lambda_max(std::span<const double> x);

/// l1 trend filter with a checked optimality certificate. Throws
/// NoConvergence if the certificate is not met within `max_iters`.
L1Result l1_trend_filter_detailed(std::span<const double> x, double lambda, double tol,
                                  int max_iters = 50000);
std::vector<double> l1_trend_filter(std::span<const double> x, double lambda, double tol,
                                    int max_iters = 50000);

/// Residual ||y - x + lambda D2^T g||_inf for the subgradient g built from
/// `dual` (sign of D2 y where it is clearly nonzero, clipped dual elsewhere).
double l1_certificate_residual(std::span<const double> x, std::span<const double> y,
                               std::span<const double> dual, double lambda, double zero_tol);

double l2_objective(std::span<const double> x, std::span<const double> y, double lambda);
double l1_objective(std::span<const double> x, std::span<const double> y, double lambda);

/// Per-pixel filtering of a whole series.
FrameSeries l2_filter_series(const FrameSeries& x, double lambda, int threads = 1);
FrameSeries l1_filter_series(const FrameSeries& x, double lambda, double tol, int threads = 1,
                             int max_iters = 50000);

}  // namespace wtvf
