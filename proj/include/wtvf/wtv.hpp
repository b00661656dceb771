#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wtvf/core.hpp"
#include "wtvf/ot.hpp"

namespace wtvf {

struct ObjectiveTerms {
  double fidelity = 0.0;   // 0.5 * sum_t ||X_t - Y_t||^2
  double transport = 0.0;  // lambda * sum_t <C, P_t>
  double entropy = 0.0;    // gamma * sum_t H(P_t)
  double total() const noexcept { return fidelity + transport + entropy; }
};

struct WtvReport {
  /// Objective at the estimate entering each outer iteration, evaluated with
  /// the plans that iteration's Sinkhorn sweep produced.
  std::vector<double> objective_trace;
  /// Terms at the returned estimate (one extra warm-started sweep).
  double fidelity = 0.0;
  double transport_total = 0.0;
  double entropy_total = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  double tolerance = 0.0;
  /// Largest |sum(Y_t) - 1| seen before a frame was handed to Sinkhorn.
  double max_mass_drift = 0.0;
  /// The final frame is stepped with its incoming dual only (it has no outgoing transition).
  bool last_frame_updated = true;
};

struct WtvResult {
  FrameSeries estimate;
  WtvReport report;
  /// duals[t] pairs frames (t, t + 1).
  std::vector<DualState> duals;
};

/// max(0, y + alpha (x - y + a + b_prev)); absent duals contribute zero.
std::vector<double> gradient_step(std::span<const double> y, std::span<const double> x,
                                  std::optional<std::span<const double>> a,
                                  std::optional<std::span<const double>> b_prev, double alpha);

/// Euclidean projection onto { y : y >= floor, sum(y) = 1 }.
std::vector<double> project_simplex(std::span<const double> z, double floor = 0.0);

ObjectiveTerms wtv_objective_terms(const FrameSeries& x, const FrameSeries& y,
                                   std::span<const TransportPlan> plans, const GroundCost& cost,
                                   const FilterConfig& config);

double wtv_objective(const FrameSeries& x, const FrameSeries& y, std::span<const TransportPlan> plans,
                     const GroundCost& cost, const FilterConfig& config);

/// Wasserstein total variation filtering of a normalized series: warm-started
/// Sinkhorn solves per frame transition alternating with projected gradient
/// steps on the estimate. Each frame is projected back onto the probability
/// simplex, which keeps the transport marginals balanced.
WtvResult wtv_filter(const FrameSeries& x, const GroundCost& cost, const FilterConfig& config);

}  // namespace wtvf
