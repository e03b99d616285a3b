#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <variant>
#include <vector>

#include "sead/agent.hpp"
#include "sead/behavior_library.hpp"
#include "sead/config.hpp"
#include "sead/grpo.hpp"
#include "sead/metrics.hpp"
#include "sead/profile_controller.hpp"
#include "sead/random.hpp"
#include "sead/trajectory.hpp"
#include "sead/user_model.hpp"

namespace sead {

template <typename P>
concept DialoguePolicy = requires(const P& p, const TurnContext& ctx, Rng& rng) {
  { p.act(ctx, rng) } -> std::same_as<ActionSample>;
};

using AnyPolicy = std::variant<TabularPolicy, ScriptedAgent>;

/// Plays one dialogue from session start to a terminal outcome.
template <DialoguePolicy Policy>
Trajectory run_dialogue(const Policy& policy, const UserProfile& profile, Rng& rng, const UserDynamics& dyn = {},
                        const LogitTable* acceptance = nullptr) {
  Trajectory traj;
  traj.profile = profile;
  traj.stream = rng.id();
  UserSession session = init_session(profile, dyn);
  Observation obs = open_session(session, dyn, rng);
  StateEstimate est = initial_estimate(obs.levels);
  ContextTracker tracker;
  UserState hidden = session.state;
  traj.turns.reserve(static_cast<std::size_t>(session.t_max));
  while (!session.closed()) {
    const ContextFlags flags = tracker.flags(session.turn);
    const ActionSample sample = policy.act(TurnContext{est, flags, session.turn, &session}, rng);
    const UserStep step = step_user(session, sample.action, rng, dyn, acceptance);
    traj.turns.push_back(Turn{obs.token, obs.levels, hidden, est.point, sample.action, sample.log_prob, sample.row,
                              flags.bits(), step.override_step});
    tracker.observe(sample.action, step.token);
    hidden = session.state;
    obs = step.observation;
    est = update_estimate(est, obs.levels);
  }
  traj.final_token = obs.token;
  traj.final_state = session.state;
  traj.outcome = session.outcome;
  return traj;
}

inline Trajectory run_dialogue(const AnyPolicy& policy, const UserProfile& profile, Rng& rng,
                               const UserDynamics& dyn = {}, const LogitTable* acceptance = nullptr) {
  return std::visit([&](const auto& p) { return run_dialogue(p, profile, rng, dyn, acceptance); }, policy);
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  MetricBundle metrics;
  std::vector<Trajectory> trajectories;
};

/// Frozen-policy rollouts over the full state grid, `reps` dialogues per
/// initial state with trait subsets drawn uniformly from the consistent ones.
/// Streams use the evaluation purpose tag, disjoint from training streams,
/// keyed by (state, rep) so that a run with more reps extends one with fewer.
inline Evaluation evaluate(const AnyPolicy& policy, int reps, std::uint64_t seed, const UserDynamics& dyn = {},
                           const LogitTable* acceptance = nullptr, int workers = 1) {
  if (reps < 1) throw ContractViolation("evaluate: reps must be >= 1");
  static const std::vector<std::vector<TraitSet>> subsets = [] {
    std::vector<std::vector<TraitSet>> out;
    for (const UserState& s : enumerate_states()) out.push_back(consistent_subsets(s));
    return out;
  }();
  const std::size_t n = static_cast<std::size_t>(kNumStates) * static_cast<std::size_t>(reps);
  Evaluation out;
  out.trajectories.resize(n);
  parallel_for(n, workers, [&](std::size_t k) {
    const std::size_t state = k / static_cast<std::size_t>(reps);
    const std::size_t rep = k % static_cast<std::size_t>(reps);
    Rng rng(derive_stream(seed, StreamPurpose::Evaluation, {state, rep}));
    const auto& options = subsets[state];
    const UserProfile profile = build_profile(index_state(static_cast<int>(state)), options[rng.below(options.size())]);
    out.trajectories[k] = run_dialogue(policy, profile, rng, dyn, acceptance);
    out.trajectories[k].rollout = static_cast<int>(k);
  });
  out.metrics = compute_metrics(out.trajectories);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainingState {
  ArenaConfig config;
  PolicyParams params = make_policy_params();
  LogitTable urm_acceptance;  // turn x {role-play, accept, hang up}
  LogitTable urm_states;      // 1 x state; initial-state choice of the adversarial user side
  CompletionStats stats;
  int iteration = 0;
};

inline TrainingState make_training_state(const ArenaConfig& config) {
  TrainingState s;
  s.config = config;
  s.urm_acceptance = LogitTable(static_cast<std::size_t>(config.dynamics.t_max), kNumOverrides, 0.0);
  for (std::size_t r = 0; r < s.urm_acceptance.rows(); ++r) {
    s.urm_acceptance.at(r, static_cast<std::size_t>(UserOverride::Accept)) = config.urm_initial_override_logit;
    s.urm_acceptance.at(r, static_cast<std::size_t>(UserOverride::HangUp)) = config.urm_initial_override_logit;
  }
  s.urm_states = LogitTable(1, kNumStates, 0.0);
  s.stats = CompletionStats(kNumStates, config.stats_window);
  return s;
}

inline AnyPolicy rollout_policy(const TrainingState& s) {
  switch (s.config.agent) {
    case AgentKind::Learned: return TabularPolicy{&s.params};
    case AgentKind::Expert: return scripted_agent(AgentSkill::Expert, &s.config.dynamics.effects);
    case AgentKind::Mediocre: return scripted_agent(AgentSkill::Mediocre, &s.config.dynamics.effects);
    case AgentKind::Random: return scripted_agent(AgentSkill::Random, &s.config.dynamics.effects);
  }
  throw ContractViolation("unknown agent kind");
}

struct IterationReport {
  int iteration = 0;
  std::vector<UserProfile> profiles;
  std::vector<Trajectory> trajectories;  // profile-major: group g occupies [g*G, (g+1)*G)
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double grad_norm = 0.0;
  double urm_grad_norm = 0.0;
  int too_easy = 0;
  int ideal = 0;
  int too_difficult = 0;
  int unvisited = kNumStates;
  double mean_turns = 0.0;
};

/// Reward with the optional shaping term: lambda times the summed level
/// change from the initial to the final state.
inline double shaped_reward(const Trajectory& t, double lambda) {
  double r = task_reward(t.outcome);
  if (lambda != 0.0) {
    const int change = (t.final_state.c - t.profile.initial.c) + (t.final_state.e - t.profile.initial.e) +
                       (t.final_state.tr - t.profile.initial.tr);
    r += lambda * change;
  }
  return r;
}

/// Phase 1 for a given iteration: curriculum weights, uniform draws over the
/// consistent universe, or the adversarial user side's state choice.
inline std::vector<UserProfile> sample_profiles(const ArenaConfig& cfg, const CompletionStats& stats,
                                                const LogitTable& urm_states, int iteration) {
  Rng rng(derive_stream(cfg.seed, StreamPurpose::Sampling, {static_cast<std::uint64_t>(iteration)}));
  if (cfg.train_urm) return sample_batch_from_weights(softmax(urm_states.row(0)), cfg.batch_size, rng, {cfg.n_max});
  if (cfg.disable_profile_sampling) return sample_universe(cfg.batch_size, rng);
  return sample_batch(stats, cfg.batch_size, rng, {cfg.n_max});
}

inline std::uint64_t rollout_stream(std::uint64_t seed, int iteration, std::size_t rollout) {
  return derive_stream(seed, StreamPurpose::Rollout, {static_cast<std::uint64_t>(iteration), rollout});
}

/// Replaces the built-in simulator in Phase 2 (e.g. an external backend).
using RolloutFn = std::function<Trajectory(const AnyPolicy&, const UserProfile&, Rng&, const LogitTable*)>;

/// One pass of the loop: sample profiles, roll out groups, update the agent
/// (and the adversarial user side when enabled), then refresh statistics.
/// Nothing in `st` changes if Phase 2 throws.
inline IterationReport train_iteration(TrainingState& st, const RolloutFn* rollout = nullptr) {
  const ArenaConfig& cfg = st.config;
  IterationReport rep;
  rep.iteration = st.iteration;

  // Phase 1: profiles.
  rep.profiles = sample_profiles(cfg, st.stats, st.urm_states, st.iteration);
  const std::vector<double> urm_state_probs = cfg.train_urm ? softmax(st.urm_states.row(0)) : std::vector<double>{};

  // Phase 2: G rollouts per profile, each on its own substream.
  const std::size_t groups = rep.profiles.size();
  const std::size_t group_size = static_cast<std::size_t>(cfg.group_size);
  const AnyPolicy policy = rollout_policy(st);
  const LogitTable* acceptance = cfg.train_urm ? &st.urm_acceptance : nullptr;
  rep.trajectories.resize(groups * group_size);
  parallel_for(rep.trajectories.size(), cfg.workers, [&](std::size_t k) {
    Rng rng(rollout_stream(cfg.seed, st.iteration, k));
    const UserProfile& profile = rep.profiles[k / group_size];
    Trajectory t = rollout ? (*rollout)(policy, profile, rng, acceptance)
                           : run_dialogue(policy, profile, rng, cfg.dynamics, acceptance);
    t.iteration = st.iteration;
    t.rollout = static_cast<int>(k);
    rep.trajectories[k] = std::move(t);
  });

  // Phase 3: rewards, group-relative advantages, ascent step.
  rep.rewards.resize(rep.trajectories.size());
  rep.advantages.resize(rep.trajectories.size());
  for (std::size_t k = 0; k < rep.trajectories.size(); ++k)
    rep.rewards[k] = shaped_reward(rep.trajectories[k], cfg.shaping_lambda);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::span<const double> r(rep.rewards.data() + g * group_size, group_size);
    const std::vector<double> a = group_advantages(r);
    std::copy(a.begin(), a.end(), rep.advantages.begin() + static_cast<std::ptrdiff_t>(g * group_size));
  }
  double reward_sum = 0.0, adv_sum = 0.0, turn_sum = 0.0;
  for (std::size_t k = 0; k < rep.trajectories.size(); ++k) {
    reward_sum += rep.rewards[k];
    adv_sum += std::abs(rep.advantages[k]);
    turn_sum += rep.trajectories[k].length();
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, rep.trajectories.size()));
  rep.mean_reward = reward_sum / n;
  rep.mean_abs_advantage = adv_sum / n;
  rep.mean_turns = turn_sum / n;

  if (cfg.agent == AgentKind::Learned) {
    std::vector<std::vector<PolicyStep>> steps(rep.trajectories.size());
    std::vector<WeightedTrajectory> weighted(rep.trajectories.size());
    for (std::size_t k = 0; k < rep.trajectories.size(); ++k) {
      steps[k] = rep.trajectories[k].agent_steps();
      weighted[k] = {rep.advantages[k], steps[k]};
    }
    const LogitTable grad = policy_gradient(st.params, weighted, cfg.reduction);
    rep.grad_norm = l2_norm(grad);
    st.params = apply_update(st.params, grad, cfg.lr);
  }

  if (cfg.train_urm) {
    // The user side is rewarded for agent failure: its advantages are the
    // negated agent advantages within each group.
    std::vector<std::vector<PolicyStep>> steps(rep.trajectories.size());
    std::vector<WeightedTrajectory> weighted(rep.trajectories.size());
    for (std::size_t k = 0; k < rep.trajectories.size(); ++k) {
      steps[k] = rep.trajectories[k].override_steps();
      weighted[k] = {-rep.advantages[k], steps[k]};
    }
    const LogitTable accept_grad = policy_gradient(st.urm_acceptance, weighted, cfg.reduction);

    // Initial-state choice: the batch of profiles forms one group whose
    // rewards are the per-group failure rates.
    std::vector<double> failure(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      double s = 0.0;
      for (std::size_t j = 0; j < group_size; ++j) s += task_reward(rep.trajectories[g * group_size + j].outcome);
      failure[g] = 1.0 - s / static_cast<double>(group_size);
    }
    const std::vector<double> state_adv = group_advantages(failure);
    std::vector<PolicyStep> state_steps(groups);
    std::vector<WeightedTrajectory> state_weighted(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      const int s = state_index(rep.profiles[g].initial);
      state_steps[g] = {0, s, std::log(urm_state_probs[static_cast<std::size_t>(s)])};
      state_weighted[g] = {state_adv[g], std::span<const PolicyStep>(&state_steps[g], 1)};
    }
    const LogitTable state_grad = policy_gradient(st.urm_states, state_weighted, cfg.reduction);
    rep.urm_grad_norm = std::sqrt(l2_norm(accept_grad) * l2_norm(accept_grad) + l2_norm(state_grad) * l2_norm(state_grad));
    st.urm_acceptance = apply_update(st.urm_acceptance, accept_grad, cfg.urm_lr);
    st.urm_states = apply_update(st.urm_states, state_grad, cfg.urm_lr);
  }

  // Phase 4: completion statistics and difficulty classes.
  if (!cfg.disable_mistake_analysis)
    for (const Trajectory& t : rep.trajectories) st.stats.record(state_index(t.profile.initial), t.outcome);
  rep.unvisited = 0;
  for (int i = 0; i < kNumStates; ++i) {
    const auto cr = st.stats.cr(i);
    if (!cr) {
      ++rep.unvisited;
      continue;
    }
    switch (classify(*cr)) {
      case DifficultyClass::TooEasy: ++rep.too_easy; break;
      case DifficultyClass::Ideal: ++rep.ideal; break;
      case DifficultyClass::TooDifficult: ++rep.too_difficult; break;
    }
  }

  st.iteration += 1;
  return rep;
}

}  // namespace sead
