#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sead/agent.hpp"
#include "sead/behavior_library.hpp"
#include "sead/softmax.hpp"
#include "sead/state_space.hpp"
#include "sead/user_model.hpp"

namespace sead {

/// One agent turn: what the agent saw, what it believed, what it did.
struct Turn {
  UserToken token = UserToken::Neutral;  // user utterance the agent answered
  UserState observed;                    // noisy levels shown with that utterance
  UserState hidden;                      // true state the levels were read from
  UserState estimate;                    // agent belief after reading them
  AgentAction action = AgentAction::Greet;
  double log_prob = 0.0;
  int row = 0;  // policy row (state bucket, context flags)
  std::uint8_t flags = 0;
  std::optional<PolicyStep> user_override;  // adversarial acceptance head, when trained

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// Full dialogue record: initial profile, per-turn records, terminal outcome.
struct Trajectory {
  UserProfile profile;
  std::vector<Turn> turns;
  UserToken final_token = UserToken::Neutral;
  UserState final_state;
  DialogueOutcome outcome = DialogueOutcome::Ongoing;

  int iteration = 0;
  int rollout = 0;
  std::uint64_t stream = 0;

  int length() const noexcept { return static_cast<int>(turns.size()); }
  bool success() const noexcept { return outcome == DialogueOutcome::Success; }

  std::vector<PolicyStep> agent_steps() const {
    std::vector<PolicyStep> out;
    out.reserve(turns.size());
    for (const Turn& t : turns) out.push_back({t.row, static_cast<int>(t.action), t.log_prob});
    return out;
  }

  std::vector<PolicyStep> override_steps() const {
    std::vector<PolicyStep> out;
    for (const Turn& t : turns)
      if (t.user_override) out.push_back(*t.user_override);
    return out;
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace sead
