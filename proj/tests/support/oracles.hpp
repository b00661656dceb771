#pragma once

// Independent reference solvers used only by the tests. They favor obvious
// correctness over speed and share no code with the library's solvers.

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

/// Dense (I + 2 lambda D2^T D2) y = x by full-pivot LU.
std::vector<double> l2_dense(const std::vector<double>& x, double lambda);

/// Dual box QP min_{|g|<=1} 0.5 ||x - lambda D2^T g||^2 solved by cyclic
/// coordinate descent; returns y = x - lambda D2^T g.
std::vector<double> l1_dual_cd(const std::vector<double>& x, double lambda, int max_sweeps = 4000000,
                               double tol = 1e-15);

/// Exact min <C, P> over the transportation polytope U(mu, nu) for tiny d, by
/// enumerating every basis of 2d - 1 cells.
double transport_lp(const std::vector<double>& cost, const std::vector<double>& mu, const std::vector<double>& nu);

struct WtvOptimum {
  std::vector<double> plan;  // d x d row-major
  std::vector<double> y1;
  std::vector<double> y2;
  double objective = 0.0;
};

/// Two-frame WTV problem eliminated onto the plan:
///   min_P 0.5||x1 - P1||^2 + 0.5||x2 - P^T 1||^2 + lambda <C,P> + gamma (sum P log P - 1)
///   s.t. sum(P) = 1,
/// solved by damped Newton on the equality-constrained problem (the entropy
/// keeps iterates strictly positive).
WtvOptimum wtv_two_frame(const std::vector<double>& x1, const std::vector<double>& x2, const std::vector<double>& cost,
                         double lambda, double gamma);

/// Otsu cut by brute force: tries every split of the bin-index histogram and
/// computes both class variances directly from the samples.
std::size_t otsu_cut(const std::vector<std::size_t>& bin_of_pixel, std::size_t bins);

/// Mean over each factor x factor block, zero-padding out-of-range pixels.
std::vector<double> block_mean(const std::vector<double>& frame, std::size_t h, std::size_t w, std::size_t factor);

/// Random probability vector with entries in [lo, hi) before normalization.
std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t d, double lo = 0.05, double hi = 1.0);

/// ||a - b||_inf
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace oracle
