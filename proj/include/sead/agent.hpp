#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sead/error.hpp"
#include "sead/random.hpp"
#include "sead/softmax.hpp"
#include "sead/state_space.hpp"
#include "sead/user_model.hpp"

namespace sead {

// ---------------------------------------------------------------------------
// State estimation

inline constexpr double kDefaultSmoothing = 0.6;

/// Agent-side belief about the hidden user state.
struct StateEstimate {
  UserState point;
  std::array<double, 3> confidence = {0.5, 0.5, 0.5};
};

inline StateEstimate initial_estimate(UserState first_observation) { return {first_observation}; }

/// Exponential smoothing toward the observation, rounded to the nearest
/// grid level. Confidence moves halfway toward 1 on agreement, toward 0 otherwise.
inline StateEstimate update_estimate(const StateEstimate& est, UserState obs, double beta = kDefaultSmoothing) {
  StateEstimate out = est;
  for (int dim = 0; dim < 3; ++dim) {
    const double smoothed = est.point[dim] + beta * (obs[dim] - est.point[dim]);
    out.point[dim] = clamp_level(dim, static_cast<int>(std::lround(smoothed)));
    const double agree = obs[dim] == est.point[dim] ? 1.0 : 0.0;
    auto& conf = out.confidence[static_cast<std::size_t>(dim)];
    conf += 0.5 * (agree - conf);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dialogue context visible to the agent

inline constexpr int kNumContextFlags = 16;

struct ContextFlags {
  bool offer_presented = false;
  bool objection_pending = false;
  bool ai_question_pending = false;
  bool late = false;  // turn > 7

  constexpr std::uint8_t bits() const noexcept {
    return static_cast<std::uint8_t>((offer_presented ? 1 : 0) | (objection_pending ? 2 : 0) |
                                     (ai_question_pending ? 4 : 0) | (late ? 8 : 0));
  }
  static constexpr ContextFlags from_bits(std::uint8_t b) noexcept {
    return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0, (b & 8) != 0};
  }
};

/// Derives ContextFlags from the agent's own actions and the user's tokens.
class ContextTracker {
 public:
  void observe(AgentAction action, UserToken reply) {
    const bool heard = reply != UserToken::Distracted;
    if (action == AgentAction::PresentOffer &&
        (reply == UserToken::Positive || reply == UserToken::CostObjection))
      offer_presented_ = true;
    if (reply == UserToken::CostObjection) cost_pending_ = true;
    if (action == AgentAction::AddressCostConcern && heard && reply != UserToken::CostObjection)
      cost_pending_ = false;
    if (reply == UserToken::AiQuestion) ai_pending_ = true;
    else if (action == AgentAction::IdentityDefense && heard) ai_pending_ = false;
    last_reply_ = reply;
  }

  ContextFlags flags(int turn) const {
    const bool objection = last_reply_ == UserToken::Objection || last_reply_ == UserToken::CostObjection;
    return {offer_presented_, objection || cost_pending_, ai_pending_, turn > 7};
  }

 private:
  bool offer_presented_ = false;
  bool cost_pending_ = false;
  bool ai_pending_ = false;
  UserToken last_reply_ = UserToken::Neutral;
};

// ---------------------------------------------------------------------------
// Policies

inline constexpr int kNumPolicyRows = kNumStates * kNumContextFlags;

inline constexpr int policy_row(int bucket, ContextFlags f) { return bucket * kNumContextFlags + f.bits(); }

/// Logits per (estimated-state bucket, context flags) row over the actions.
using PolicyParams = LogitTable;

inline PolicyParams make_policy_params(double fill = 0.0) {
  return PolicyParams(kNumPolicyRows, kNumActions, fill);
}

struct ActionSample {
  AgentAction action = AgentAction::Greet;
  double log_prob = 0.0;
  std::array<double, kNumActions> probs{};
  int row = 0;
};

/// Everything a policy may look at when choosing the next action. `session`
/// is ground truth and is read only by the scripted (oracle) agents.
struct TurnContext {
  const StateEstimate& estimate;
  ContextFlags flags;
  int turn = 0;
  const UserSession* session = nullptr;
};

inline ActionSample select_action(const PolicyParams& params, const StateEstimate& est, ContextFlags flags,
                                  Rng& rng) {
  ActionSample out;
  out.row = policy_row(state_index(est.point), flags);
  const auto logits = params.row(static_cast<std::size_t>(out.row));
  softmax(logits, out.probs);
  out.action = static_cast<AgentAction>(rng.categorical(out.probs));
  out.log_prob = std::log(out.probs[static_cast<std::size_t>(out.action)]);
  return out;
}

/// Softmax policy over a PolicyParams table (non-owning).
struct TabularPolicy {
  const PolicyParams* params;

  ActionSample act(const TurnContext& ctx, Rng& rng) const {
    return select_action(*params, ctx.estimate, ctx.flags, rng);
  }
};

enum class AgentSkill : std::uint8_t { Expert, Mediocre, Random };

inline constexpr std::string_view name(AgentSkill s) {
  switch (s) {
    case AgentSkill::Expert: return "expert";
    case AgentSkill::Mediocre: return "mediocre";
    case AgentSkill::Random: return "random";
  }
  return "?";
}

/// Greedy best response to the true session under the effect table.
inline AgentAction expert_action(const UserSession& s, const EffectTable& t) {
  const UserState& st = s.state;
  const SessionFlags& f = s.flags;
  if (f.ai_question_pending()) return AgentAction::IdentityDefense;
  if (f.cost_concern_pending()) return AgentAction::AddressCostConcern;
  if (close_conditions_met(s, t)) return AgentAction::CloseDeal;
  if (s.turn == 0 && st.e <= t.greet_max_emotion) return AgentAction::Greet;
  if (st.e == 0) return AgentAction::Apologize;
  const bool after_objection = s.last_token == UserToken::Objection || s.last_token == UserToken::CostObjection;
  if (after_objection && st.c < kCooperationLevels - 1) return AgentAction::HandleObjection;
  if (!f.asked_needs_used && st.c < kCooperationLevels - 1) return AgentAction::AskNeeds;
  if (!f.offer_presented && st.c >= t.offer_min_cooperation) return AgentAction::PresentOffer;
  if (st.tr < t.close_min_trust)
    return st.e >= t.evidence_min_emotion ? AgentAction::ProvideEvidence : AgentAction::BuildRapport;
  if (st.c < t.close_min_cooperation || st.c < t.offer_min_cooperation) {
    // Cooperation only rises after an objection: provoke one at the cost of
    // a trust level, then handle it next turn.
    if (st.tr >= 1) return AgentAction::IdentityDefense;
  }
  return AgentAction::BuildRapport;
}

/// Calibration opponents: expert plays expert_action, mediocre plays it with
/// probability 0.5 and a uniform action otherwise, random is uniform.
struct ScriptedAgent {
  AgentSkill skill = AgentSkill::Expert;
  const EffectTable* effects = nullptr;

  ActionSample act(const TurnContext& ctx, Rng& rng) const {
    static const EffectTable kDefault{};
    if (ctx.session == nullptr && skill != AgentSkill::Random)
      throw ContractViolation("scripted agent needs oracle access to the session");
    ActionSample out;
    out.row = policy_row(state_index(ctx.estimate.point), ctx.flags);
    int optimal = -1;
    if (skill != AgentSkill::Random) optimal = static_cast<int>(expert_action(*ctx.session, effects ? *effects : kDefault));
    switch (skill) {
      case AgentSkill::Expert:
        out.probs.fill(0.0);
        out.probs[static_cast<std::size_t>(optimal)] = 1.0;
        out.action = static_cast<AgentAction>(optimal);
        break;
      case AgentSkill::Mediocre:
        out.probs.fill(0.5 / kNumActions);
        out.probs[static_cast<std::size_t>(optimal)] += 0.5;
        out.action = rng.uniform() < 0.5 ? static_cast<AgentAction>(optimal)
                                         : static_cast<AgentAction>(rng.below(kNumActions));
        break;
      case AgentSkill::Random:
        out.probs.fill(1.0 / kNumActions);
        out.action = static_cast<AgentAction>(rng.below(kNumActions));
        break;
    }
    out.log_prob = std::log(out.probs[static_cast<std::size_t>(out.action)]);
    return out;
  }
};

inline ScriptedAgent scripted_agent(AgentSkill skill, const EffectTable* effects = nullptr) {
  return {skill, effects};
}

}  // namespace sead
