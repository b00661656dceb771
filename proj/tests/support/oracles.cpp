#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

namespace {

Eigen::MatrixXd second_difference(std::size_t n) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n - 2), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -2.0;
    d(i, i + 2) = 1.0;
  }
  return d;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::vector<double> l2_dense(const std::vector<double>& x, double lambda) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::MatrixXd d = second_difference(x.size());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) + 2.0 * lambda * d.transpose() * d;
  return to_std(a.fullPivLu().solve(to_eigen(x)));
}

std::vector<double> l1_dual_cd(const std::vector<double>& x, double lambda, int max_sweeps, double tol) {
  const std::size_t n = x.size();
  const std::size_t m = n - 2;
  const double stencil[3] = {1.0, -2.0, 1.0};
  // r = x - lambda D^T g, kept in sync with g.
  std::vector<double> g(m, 0.0);
  std::vector<double> r = x;
  const double curvature = lambda * lambda * 6.0;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double biggest = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      // d/dg_j of 0.5 ||r||^2 is -lambda (D r)_j.
      double dr = 0.0;
      for (int k = 0; k < 3; ++k) dr += stencil[k] * r[j + k];
      const double target = std::clamp(g[j] + lambda * dr / curvature, -1.0, 1.0);
      const double delta = target - g[j];
      if (delta == 0.0) continue;
      for (int k = 0; k < 3; ++k) r[j + k] -= lambda * stencil[k] * delta;
      g[j] = target;
      biggest = std::max(biggest, std::abs(delta));
    }
    if (biggest < tol) break;
  }
  // Recompute from g to avoid drift in r.
  std::vector<double> y = x;
  for (std::size_t j = 0; j < m; ++j) {
    for (int k = 0; k < 3; ++k) y[j + k] -= lambda * stencil[k] * g[j];
  }
  return y;
}

double transport_lp(const std::vector<double>& cost, const std::vector<double>& mu, const std::vector<double>& nu) {
  const std::size_t d = mu.size();
  const std::size_t cells = d * d;
  const std::size_t basis = 2 * d - 1;
  if (cells > 25) throw std::invalid_argument("transport_lp is exhaustive; keep d <= 5");
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(2 * d));
  for (std::size_t i = 0; i < d; ++i) {
    rhs(static_cast<Eigen::Index>(i)) = mu[i];
    rhs(static_cast<Eigen::Index>(d + i)) = nu[i];
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(cells, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(basis), true);
  do {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * d), static_cast<Eigen::Index>(basis));
    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < cells; ++c) {
      if (!pick[c]) continue;
      const auto col = static_cast<Eigen::Index>(chosen.size());
      a(static_cast<Eigen::Index>(c / d), col) = 1.0;
      a(static_cast<Eigen::Index>(d + c % d), col) = 1.0;
      chosen.push_back(c);
    }
    const auto qr = a.colPivHouseholderQr();
    if (qr.rank() < static_cast<Eigen::Index>(basis)) continue;
    const Eigen::VectorXd sol = qr.solve(rhs);
    if ((a * sol - rhs).cwiseAbs().maxCoeff() > 1e-12) continue;
    if (sol.minCoeff() < -1e-13) continue;
    double value = 0.0;
    for (std::size_t k = 0; k < basis; ++k) value += cost[chosen[k]] * std::max(0.0, sol(static_cast<Eigen::Index>(k)));
    best = std::min(best, value);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

WtvOptimum wtv_two_frame(const std::vector<double>& x1, const std::vector<double>& x2, const std::vector<double>& cost,
                         double lambda, double gamma) {
  const std::size_t d = x1.size();
  const auto n = static_cast<Eigen::Index>(d * d);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), n);
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), n);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i * d + j)) = 1.0;
      cols(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i * d + j)) = 1.0;
    }
  }
  const Eigen::VectorXd ex1 = to_eigen(x1);
  const Eigen::VectorXd ex2 = to_eigen(x2);
  const Eigen::VectorXd c = to_eigen(cost);

  auto objective = [&](const Eigen::VectorXd& p) {
    const double fid = 0.5 * (ex1 - rows * p).squaredNorm() + 0.5 * (ex2 - cols * p).squaredNorm();
    double ent = -1.0;
    for (Eigen::Index k = 0; k < n; ++k) ent += p(k) * std::log(p(k));
    return fid + lambda * c.dot(p) + gamma * ent;
  };

  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd quad = rows.transpose() * rows + cols.transpose() * cols;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd grad = rows.transpose() * (rows * p - ex1) + cols.transpose() * (cols * p - ex2) + lambda * c;
    for (Eigen::Index k = 0; k < n; ++k) grad(k) += gamma * (std::log(p(k)) + 1.0);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = quad;
    for (Eigen::Index k = 0; k < n; ++k) kkt(k, k) += gamma / p(k);
    kkt.block(0, n, n, 1).setOnes();
    kkt.block(n, 0, 1, n).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs.head(n) = -grad;
    const Eigen::VectorXd step = kkt.fullPivLu().solve(rhs).head(n);
    const double decrement = -grad.dot(step);
    if (decrement < 1e-26) break;
    double t = 1.0;
    while (((p + t * step).array() <= 0.0).any()) t *= 0.5;
    const double f0 = objective(p);
    while (objective(p + t * step) > f0 - 0.25 * t * decrement && t > 1e-20) t *= 0.5;
    p += t * step;
  }
  WtvOptimum out;
  out.plan = to_std(p);
  out.y1 = to_std(rows * p);
  out.y2 = to_std(cols * p);
  out.objective = objective(p);
  return out;
}

std::size_t otsu_cut(const std::vector<std::size_t>& bin_of_pixel, std::size_t bins) {
  double best = -1.0;
  std::size_t best_cut = 0;
  for (std::size_t k = 0; k + 1 < bins; ++k) {
    std::vector<double> lower, upper;
    for (std::size_t b : bin_of_pixel) (b <= k ? lower : upper).push_back(static_cast<double>(b));
    if (lower.empty() || upper.empty()) continue;
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double e : v) s += e;
      return s / static_cast<double>(v.size());
    };
    // Between-class variance = total variance - within-class variance.
    std::vector<double> all(bin_of_pixel.begin(), bin_of_pixel.end());
    const double mall = mean(all);
    const double m0 = mean(lower);
    const double m1 = mean(upper);
    double total = 0.0, within = 0.0;
    for (double e : all) total += (e - mall) * (e - mall);
    for (double e : lower) within += (e - m0) * (e - m0);
    for (double e : upper) within += (e - m1) * (e - m1);
    const double between = (total - within) / static_cast<double>(all.size());
    if (between > best + 1e-12) {
      best = between;
      best_cut = k;
    }
  }
  return best_cut;
}

std::vector<double> block_mean(const std::vector<double>& frame, std::size_t h, std::size_t w, std::size_t factor) {
  const std::size_t oh = (h + factor - 1) / factor;
  const std::size_t ow = (w + factor - 1) / factor;
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t br = 0; br < oh; ++br) {
    for (std::size_t bc = 0; bc < ow; ++bc) {
      double s = 0.0;
      for (std::size_t r = br * factor; r < (br + 1) * factor; ++r) {
        for (std::size_t c = bc * factor; c < (bc + 1) * factor; ++c) {
          if (r < h && c < w) s += frame[r * w + c];
        }
      }
      out[br * ow + bc] = s / static_cast<double>(factor * factor);
    }
  }
  return out;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t d, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(d);
  double s = 0.0;
  for (double& e : v) s += (e = dist(rng));
  for (double& e : v) e /= s;
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
