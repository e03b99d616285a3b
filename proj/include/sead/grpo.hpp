#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sead/error.hpp"
#include "sead/softmax.hpp"
#include "sead/user_model.hpp"

namespace sead {

/// Binary task reward: 1 iff the user agreed.
inline double task_reward(DialogueOutcome outcome) {
  if (outcome == DialogueOutcome::Ongoing) throw ContractViolation("task_reward: dialogue not finished");
  return outcome == DialogueOutcome::Success ? 1.0 : 0.0;
}

/// Group-relative advantages: each reward minus the group mean.
inline std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw ContractViolation("group_advantages: empty group");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = rewards[i] - mean;
  return out;
}

/// One trajectory as seen by the estimator: its advantage and the decisions
/// taken along the way.
struct WeightedTrajectory {
  double advantage = 0.0;
  std::span<const PolicyStep> steps;
};

/// How per-trajectory contributions are combined.
enum class Reduction : std::uint8_t {
  Mean,  // expectation estimate: divide by the number of trajectories
  Sum,
};

inline constexpr double kLogProbTolerance = 1e-9;

/// Score-function gradient of sum_t A * log pi(a_t | row_t) with respect to
/// every logit. For a softmax row the per-step contribution is
/// A * (onehot(a_t) - probs). Recorded log-probabilities must match the
/// current parameters, otherwise the trajectories are stale.
inline LogitTable policy_gradient(const LogitTable& params, std::span<const WeightedTrajectory> trajectories,
                                  Reduction reduction = Reduction::Mean) {
  LogitTable grad(params.rows(), params.cols(), 0.0);
  std::vector<double> probs(params.cols());
  for (const WeightedTrajectory& traj : trajectories) {
    for (const PolicyStep& step : traj.steps) {
      if (step.row < 0 || static_cast<std::size_t>(step.row) >= params.rows() || step.action < 0 ||
          static_cast<std::size_t>(step.action) >= params.cols())
        throw ContractViolation("policy_gradient: step outside the parameter table");
      const auto logits = params.row(static_cast<std::size_t>(step.row));
      softmax(logits, probs);
      const double recomputed = std::log(probs[static_cast<std::size_t>(step.action)]);
      if (!(std::abs(recomputed - step.log_prob) <= kLogProbTolerance))
        throw ContractViolation("policy_gradient: stale log-probability at row " + std::to_string(step.row) +
                                " (recorded " + std::to_string(step.log_prob) + ", current " +
                                std::to_string(recomputed) + ")");
      if (traj.advantage == 0.0) continue;
      auto g = grad.row(static_cast<std::size_t>(step.row));
      for (std::size_t a = 0; a < probs.size(); ++a)
        g[a] += traj.advantage * ((static_cast<int>(a) == step.action ? 1.0 : 0.0) - probs[a]);
    }
  }
  if (reduction == Reduction::Mean && !trajectories.empty())
    for (double& v : grad.flat()) v /= static_cast<double>(trajectories.size());
  return grad;
}

inline double l2_norm(const LogitTable& t) {
  double s = 0.0;
  for (double v : t.flat()) s += v * v;
  return std::sqrt(s);
}

class NonFiniteUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gradient ascent step: params + lr * gradient.
inline LogitTable apply_update(const LogitTable& params, const LogitTable& gradient, double lr) {
  if (!(lr > 0.0)) throw ContractViolation("apply_update: learning rate must be positive");
  if (params.rows() != gradient.rows() || params.cols() != gradient.cols())
    throw ContractViolation("apply_update: shape mismatch");
  LogitTable out = params;
  auto p = out.flat();
  const auto g = gradient.flat();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i]))
      throw NonFiniteUpdate("apply_update: non-finite gradient at row " + std::to_string(i / params.cols()) +
                            ", column " + std::to_string(i % params.cols()));
    p[i] += lr * g[i];
  }
  if (!out.all_finite()) throw NonFiniteUpdate("apply_update: update produced non-finite parameters");
  return out;
}

}  // namespace sead
