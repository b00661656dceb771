#include "wtvf/wtv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace wtvf {

namespace {

std::vector<double> to_simplex(std::span<const double> frame, double& drift) {
  double total = 0.0;
  for (double v : frame) total += v;
  drift = std::max(drift, std::abs(total - 1.0));
  std::vector<double> out(frame.begin(), frame.end());
  for (double& v : out) v /= total;
  return out;
}

struct Sweep {
  std::vector<DualState> duals;
  std::vector<TransportPlan> plans;
};

// One Sinkhorn solve per transition against the current estimate.
Sweep solve_transitions(const FrameSeries& y, const GibbsKernel& kernel, const std::vector<DualState>& warm,
                        const FilterConfig& config, double& drift) {
  const std::size_t transitions = y.frames() > 0 ? y.frames() - 1 : 0;
  std::vector<std::vector<double>> marginals(y.frames());
  for (std::size_t t = 0; t < y.frames(); ++t) marginals[t] = to_simplex(y.frame(t), drift);

  Sweep sweep;
  sweep.duals.resize(transitions);
  sweep.plans.resize(transitions);
  parallel_for(transitions, config.threads, [&](std::size_t t) {
    try {
      sweep.duals[t] = sinkhorn(marginals[t], marginals[t + 1], kernel, config.sinkhorn_iters, &warm[t],
                                config.log_domain);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NumericUnderflow) {
        throw Error(ErrorCode::NumericUnderflow, "transition " + std::to_string(t) + ": " + e.what(), t);
      }
      throw;
    }
    for (std::size_t i = 0; i < kernel.size(); ++i) {
      if (!std::isfinite(sweep.duals[t].a[i]) || !std::isfinite(sweep.duals[t].b[i])) {
        throw Error(ErrorCode::NumericUnderflow,
                    "transition " + std::to_string(t) + ": dual potential is not finite at pixel " +
                        std::to_string(i),
                    t);
      }
    }
    sweep.plans[t] = plan_from_duals(sweep.duals[t], kernel);
  });
  return sweep;
}

}  // namespace

std::vector<double> gradient_step(std::span<const double> y, std::span<const double> x,
                                  std::optional<std::span<const double>> a,
                                  std::optional<std::span<const double>> b_prev, double alpha) {
  if (x.size() != y.size() || (a && a->size() != y.size()) || (b_prev && b_prev->size() != y.size())) {
    throw Error(ErrorCode::DimensionMismatch, "gradient step operands differ in length");
  }
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double g = x[i] - y[i];
    if (a) g += (*a)[i];
    if (b_prev) g += (*b_prev)[i];
    out[i] = std::max(0.0, y[i] + alpha * g);
  }
  return out;
}

std::vector<double> project_simplex(std::span<const double> z, double floor) {
  const std::size_t n = z.size();
  if (n == 0) return {};
  const double budget = 1.0 - static_cast<double>(n) * floor;
  if (budget < 0.0) throw Error(ErrorCode::InvalidArgument, "simplex floor too large for the frame size");
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // tau comes from the largest prefix whose smallest shifted entry stays above it.
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    prefix += sorted[k] - floor;
    const double candidate = (prefix - budget) / static_cast<double>(k + 1);
    if (sorted[k] - floor - candidate > 0.0) tau = candidate;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(z[i] - floor - tau, 0.0) + floor;
  return out;
}

ObjectiveTerms wtv_objective_terms(const FrameSeries& x, const FrameSeries& y,
                                   std::span<const TransportPlan> plans, const GroundCost& cost,
                                   const FilterConfig& config) {
  if (!x.same_shape(y)) throw Error(ErrorCode::DimensionMismatch, "X and Y differ in shape");
  const std::size_t transitions = x.frames() > 0 ? x.frames() - 1 : 0;
  if (plans.size() != transitions) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(transitions) + " plans");
  }
  if (cost.size() != x.pixels()) throw Error(ErrorCode::DimensionMismatch, "cost size differs from frame size");
  ObjectiveTerms terms;
  double fid = 0.0;
  for (std::size_t i = 0; i < x.values().size(); ++i) {
    const double r = x.values()[i] - y.values()[i];
    fid += r * r;
  }
  terms.fidelity = 0.5 * fid;
  for (const auto& plan : plans) {
    if (plan.size() != x.pixels()) throw Error(ErrorCode::DimensionMismatch, "plan size differs from frame size");
    terms.transport += config.lambda * transport_cost(plan, cost);
    terms.entropy += config.gamma * plan_entropy(plan);
  }
  return terms;
}

double wtv_objective(const FrameSeries& x, const FrameSeries& y, std::span<const TransportPlan> plans,
                     const GroundCost& cost, const FilterConfig& config) {
  return wtv_objective_terms(x, y, plans, cost, config).total();
}

WtvResult wtv_filter(const FrameSeries& x, const GroundCost& cost, const FilterConfig& config) {
  config.validate();
  if (!is_normalized(x, 1e-9)) {
    throw Error(ErrorCode::NotNormalized, "input frames must be nonnegative and sum to one");
  }
  if (cost.size() != x.pixels()) throw Error(ErrorCode::DimensionMismatch, "cost size differs from frame size");

  const std::size_t d = x.pixels();
  const std::size_t frames = x.frames();
  const std::size_t transitions = frames > 0 ? frames - 1 : 0;
  const GibbsKernel kernel(cost, config.lambda, config.gamma);

  WtvResult result;
  auto& report = result.report;
  report.tolerance = config.resolved_tolerance(d, frames);

  // Start at X; frames touching the floor are blended toward uniform first so
  // the entropic potentials start finite.
  FrameSeries y = x;
  y.clear_mass_scale();
  if (transitions == 0) {
    result.estimate = std::move(y);
    report.iterations = 1;
    report.converged = true;
    report.objective_trace.push_back(0.0);
    return result;
  }
  for (std::size_t t = 0; t < frames; ++t) {
    auto f = y.frame(t);
    if (*std::min_element(f.begin(), f.end()) > config.mass_floor) continue;
    for (double& v : f) v = (1.0 - config.start_blend) * v + config.start_blend / static_cast<double>(d);
    const auto projected = project_simplex(f, config.mass_floor);
    std::copy(projected.begin(), projected.end(), f.begin());
  }

  // Potentials start at zero (v = 1). Any other constant only shifts each
  // frame's gradient uniformly, which the simplex projection removes, and a
  // unit potential would underflow v = exp(-1 / gamma) for small gamma.
  std::vector<DualState> duals(transitions, DualState::uniform(d, config.gamma, 0.0));

  for (int k = 1; k <= config.max_outer_iters; ++k) {
    Sweep sweep = solve_transitions(y, kernel, duals, config, report.max_mass_drift);
    duals = std::move(sweep.duals);
    report.objective_trace.push_back(wtv_objective(x, y, sweep.plans, cost, config));

    FrameSeries next = y;
    double change = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const auto yt = y.frame(t);
      const auto xt = x.frame(t);
      std::vector<double> z(d);
      for (std::size_t i = 0; i < d; ++i) {
        double g = xt[i] - yt[i];
        if (t < transitions) g += duals[t].a[i];
        if (t > 0) g += duals[t - 1].b[i];
        z[i] = yt[i] + config.alpha * g;
      }
      const auto projected = project_simplex(z, config.mass_floor);
      auto nt = next.frame(t);
      for (std::size_t i = 0; i < d; ++i) {
        change += (projected[i] - yt[i]) * (projected[i] - yt[i]);
        nt[i] = projected[i];
      }
    }
    y = std::move(next);
    report.iterations = k;
    report.last_change = std::sqrt(change);
    if (!std::isfinite(report.last_change)) {
      throw Error(ErrorCode::NumericUnderflow, "estimate became non-finite; reduce alpha",
                  static_cast<std::size_t>(k));
    }
    if (report.last_change <= report.tolerance) {
      report.converged = true;
      break;
    }
  }

  Sweep final_sweep = solve_transitions(y, kernel, duals, config, report.max_mass_drift);
  const auto terms = wtv_objective_terms(x, y, final_sweep.plans, cost, config);
  report.fidelity = terms.fidelity;
  report.transport_total = terms.transport;
  report.entropy_total = terms.entropy;
  report.objective = terms.total();
  result.duals = std::move(final_sweep.duals);
  if (x.mass_scale()) y.set_mass_scale(*x.mass_scale());
  result.estimate = std::move(y);
  return result;
}

}  // namespace wtvf
