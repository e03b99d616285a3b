#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "sead/behavior_library.hpp"
#include "sead/error.hpp"
#include "sead/keyvalue.hpp"
#include "sead/random.hpp"
#include "sead/softmax.hpp"
#include "sead/state_space.hpp"

namespace sead {

enum class AgentAction : std::uint8_t {
  Greet = 0,
  AskNeeds,
  PresentOffer,
  BuildRapport,  // the empathy strategy
  ProvideEvidence,
  AddressCostConcern,
  IdentityDefense,
  HandleObjection,
  Apologize,
  CloseDeal,
};
inline constexpr int kNumActions = 10;

inline constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "Greet",           "AskNeeds",        "PresentOffer",    "BuildRapport", "ProvideEvidence",
    "AddressCostConcern", "IdentityDefense", "HandleObjection", "Apologize",    "CloseDeal"};

enum class UserToken : std::uint8_t {
  Positive = 0,
  Neutral,
  Objection,
  CostObjection,
  AiQuestion,
  Distracted,
  Angry,
  Agree,
  Refuse,
};
inline constexpr int kNumTokens = 9;

inline constexpr std::array<std::string_view, kNumTokens> kTokenNames = {
    "Positive", "Neutral", "Objection", "CostObjection", "AiQuestion",
    "Distracted", "Angry", "Agree", "Refuse"};

enum class DialogueOutcome : std::uint8_t { Ongoing = 0, Success, Refusal, Timeout };

inline constexpr std::array<std::string_view, 4> kOutcomeNames = {"Ongoing", "Success", "Refusal",
                                                                  "Timeout"};

inline constexpr std::string_view name(AgentAction a) { return kActionNames[static_cast<std::size_t>(a)]; }
inline constexpr std::string_view name(UserToken t) { return kTokenNames[static_cast<std::size_t>(t)]; }
inline constexpr std::string_view name(DialogueOutcome o) { return kOutcomeNames[static_cast<std::size_t>(o)]; }

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == text) return static_cast<Enum>(i);
  throw ParseError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

inline AgentAction parse_action(std::string_view s) { return parse_enum<AgentAction>(s, kActionNames, "action"); }
inline UserToken parse_token(std::string_view s) { return parse_enum<UserToken>(s, kTokenNames, "token"); }
inline DialogueOutcome parse_outcome(std::string_view s) {
  return parse_enum<DialogueOutcome>(s, kOutcomeNames, "outcome");
}

// ---------------------------------------------------------------------------
// Effect table

/// Which branch of an action's rule fired.
enum class EffectCase : std::uint8_t {
  GreetOpening = 0,    // first agent turn, e <= greet_max_emotion
  GreetOpeningCalm,    // first agent turn, e above the threshold
  GreetRepeat,         // any later turn
  AskNeedsFirst,
  AskNeedsRepeat,
  BuildRapport,
  EvidenceReceptive,   // e >= evidence_min_emotion
  EvidenceUnreceptive,
  OfferReady,          // c >= offer_min_cooperation; marks the offer presented
  OfferPremature,
  CostAddressed,       // a raised cost concern is pending
  CostNotRaised,
  IdentityQuestioned,  // an AI-identity question is pending
  IdentityUnprompted,
  ObjectionHandled,    // previous token was Objection or CostObjection
  ObjectionAbsent,
  ApologyUpset,        // e == 0
  ApologyCalm,
  CloseReady,          // success condition holds
  ClosePremature,
};
inline constexpr int kNumEffectCases = 20;

enum class EffectKind : std::uint8_t { Helpful, Neutral, Misuse };

struct EffectCaseInfo {
  std::string_view key;
  AgentAction action;
  EffectKind kind;
};

inline constexpr std::array<EffectCaseInfo, kNumEffectCases> kEffectCases = {{
    {"greet_opening", AgentAction::Greet, EffectKind::Helpful},
    {"greet_opening_calm", AgentAction::Greet, EffectKind::Neutral},
    {"greet_repeat", AgentAction::Greet, EffectKind::Misuse},
    {"ask_needs_first", AgentAction::AskNeeds, EffectKind::Helpful},
    {"ask_needs_repeat", AgentAction::AskNeeds, EffectKind::Neutral},
    {"build_rapport", AgentAction::BuildRapport, EffectKind::Helpful},
    {"evidence_receptive", AgentAction::ProvideEvidence, EffectKind::Helpful},
    {"evidence_unreceptive", AgentAction::ProvideEvidence, EffectKind::Neutral},
    {"offer_ready", AgentAction::PresentOffer, EffectKind::Neutral},
    {"offer_premature", AgentAction::PresentOffer, EffectKind::Misuse},
    {"cost_addressed", AgentAction::AddressCostConcern, EffectKind::Helpful},
    {"cost_not_raised", AgentAction::AddressCostConcern, EffectKind::Neutral},
    {"identity_questioned", AgentAction::IdentityDefense, EffectKind::Helpful},
    {"identity_unprompted", AgentAction::IdentityDefense, EffectKind::Misuse},
    {"objection_handled", AgentAction::HandleObjection, EffectKind::Helpful},
    {"objection_absent", AgentAction::HandleObjection, EffectKind::Neutral},
    {"apology_upset", AgentAction::Apologize, EffectKind::Helpful},
    {"apology_calm", AgentAction::Apologize, EffectKind::Neutral},
    {"close_ready", AgentAction::CloseDeal, EffectKind::Neutral},
    {"close_premature", AgentAction::CloseDeal, EffectKind::Misuse},
}};

inline constexpr const EffectCaseInfo& info(EffectCase c) { return kEffectCases[static_cast<std::size_t>(c)]; }

/// Per-case state deltas plus the thresholds that select between cases.
struct EffectTable {
  std::array<StateDelta, kNumEffectCases> delta = {{
      {0, 1, 0},   // greet_opening
      {0, 0, 0},   // greet_opening_calm
      {-1, 0, 0},  // greet_repeat
      {1, 0, 0},   // ask_needs_first
      {0, 0, 0},   // ask_needs_repeat
      {0, 1, 0},   // build_rapport
      {0, 0, 1},   // evidence_receptive
      {0, 0, 0},   // evidence_unreceptive
      {0, 0, 0},   // offer_ready
      {-1, 0, 0},  // offer_premature
      {1, 0, 0},   // cost_addressed
      {0, 0, 0},   // cost_not_raised
      {0, 0, 1},   // identity_questioned
      {0, 0, -1},  // identity_unprompted
      {1, 0, 0},   // objection_handled
      {0, 0, 0},   // objection_absent
      {0, 1, 0},   // apology_upset
      {0, 0, 0},   // apology_calm
      {0, 0, 0},   // close_ready
      {-1, 0, 0},  // close_premature
  }};
  int greet_max_emotion = 1;
  int evidence_min_emotion = 1;
  int offer_min_cooperation = 2;
  int close_min_cooperation = 3;
  int close_min_trust = 4;

  const StateDelta& operator[](EffectCase c) const { return delta[static_cast<std::size_t>(c)]; }
  StateDelta& operator[](EffectCase c) { return delta[static_cast<std::size_t>(c)]; }

  friend bool operator==(const EffectTable&, const EffectTable&) = default;
};

/// Loads an effect table from "key = dc,de,dtr" lines (threshold keys take a
/// single integer). Missing keys keep their defaults.
inline EffectTable parse_effect_table(std::string_view text) {
  EffectTable table;
  for (const kv::Entry& e : kv::parse(text)) {
    if (e.key == "greet_max_emotion") table.greet_max_emotion = kv::to_number<int>(e);
    else if (e.key == "evidence_min_emotion") table.evidence_min_emotion = kv::to_number<int>(e);
    else if (e.key == "offer_min_cooperation") table.offer_min_cooperation = kv::to_number<int>(e);
    else if (e.key == "close_min_cooperation") table.close_min_cooperation = kv::to_number<int>(e);
    else if (e.key == "close_min_trust") table.close_min_trust = kv::to_number<int>(e);
    else {
      bool found = false;
      for (int i = 0; i < kNumEffectCases; ++i) {
        if (kEffectCases[static_cast<std::size_t>(i)].key != e.key) continue;
        StateDelta d;
        std::string_view rest = e.value;
        int dim = 0;
        for (;; ++dim) {
          const auto comma = rest.find(',');
          if (dim >= 3) throw ParseError("expected three comma-separated deltas for " + e.key, e.line);
          kv::Entry part{e.key, std::string(kv::trim(rest.substr(0, comma))), e.line};
          if (!part.value.empty() && part.value.front() == '+') part.value.erase(0, 1);
          d[dim] = kv::to_number<int>(part);
          if (comma == std::string_view::npos) break;
          rest = rest.substr(comma + 1);
        }
        if (dim != 2) throw ParseError("expected three comma-separated deltas for " + e.key, e.line);
        table.delta[static_cast<std::size_t>(i)] = d;
        found = true;
      }
      if (!found) throw ParseError("unknown effect-table key '" + e.key + "'", e.line);
    }
  }
  return table;
}

inline std::string format_effect_table(const EffectTable& t) {
  std::string out;
  for (int i = 0; i < kNumEffectCases; ++i) {
    const StateDelta& d = t.delta[static_cast<std::size_t>(i)];
    out += std::string(kEffectCases[static_cast<std::size_t>(i)].key) + " = " + std::to_string(d.dc) + "," +
           std::to_string(d.de) + "," + std::to_string(d.dtr) + "\n";
  }
  out += "greet_max_emotion = " + std::to_string(t.greet_max_emotion) + "\n";
  out += "evidence_min_emotion = " + std::to_string(t.evidence_min_emotion) + "\n";
  out += "offer_min_cooperation = " + std::to_string(t.offer_min_cooperation) + "\n";
  out += "close_min_cooperation = " + std::to_string(t.close_min_cooperation) + "\n";
  out += "close_min_trust = " + std::to_string(t.close_min_trust) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Dynamics configuration

struct UserDynamics {
  EffectTable effects;
  int t_max = 15;
  int busy_t_max = 10;
  double observation_epsilon = 0.2;
  double drift_probability = 0.1;
  double lapse_probability = 0.15;
  int skeptic_latest_turn = 3;
  int negative_multiplier_irritable = 2;
  /// Disables drift and attention lapses. Observation noise is controlled by
  /// observation_epsilon alone.
  bool deterministic = false;

  friend bool operator==(const UserDynamics&, const UserDynamics&) = default;
};

/// Choices of the trainable acceptance head used only when the user side is
/// trained adversarially.
enum class UserOverride : std::uint8_t { RolePlay = 0, Accept, HangUp };
inline constexpr int kNumOverrides = 3;

// ---------------------------------------------------------------------------
// Session

/// Noisy readout of the hidden state plus the utterance token.
struct Observation {
  UserState levels;
  UserToken token = UserToken::Neutral;

  friend bool operator==(const Observation&, const Observation&) = default;
};

struct SessionFlags {
  bool offer_presented = false;
  bool cost_concern_raised = false;
  bool cost_concern_cleared = false;
  bool ai_question_raised = false;
  bool ai_question_cleared = false;
  bool asked_needs_used = false;

  bool cost_concern_pending() const noexcept { return cost_concern_raised && !cost_concern_cleared; }
  bool ai_question_pending() const noexcept { return ai_question_raised && !ai_question_cleared; }

  friend bool operator==(const SessionFlags&, const SessionFlags&) = default;
};

struct UserSession {
  UserProfile profile;
  UserState state;
  int turn = 0;
  int t_max = 15;
  int ai_question_turn = 0;  // 0 when the profile is not skeptical
  SessionFlags flags;
  UserToken last_token = UserToken::Neutral;
  DialogueOutcome outcome = DialogueOutcome::Ongoing;

  bool closed() const noexcept { return outcome != DialogueOutcome::Ongoing; }
};

/// Result of one user turn.
struct UserStep {
  UserToken token = UserToken::Neutral;
  Observation observation;
  DialogueOutcome outcome = DialogueOutcome::Ongoing;
  EffectCase effect = EffectCase::GreetOpening;
  bool lapsed = false;
  std::optional<PolicyStep> override_step;
};

inline UserSession init_session(const UserProfile& p, const UserDynamics& dyn = {}) {
  if (const auto v = check_consistency(p); !v.empty())
    throw ContractViolation("init_session: inconsistent profile (" + v.front() + ")");
  UserSession s;
  s.profile = p;
  s.state = p.initial;
  s.t_max = p.has(BehaviorTrait::Busy) ? dyn.busy_t_max : dyn.t_max;
  if (p.has(BehaviorTrait::AiSkeptic) && dyn.skeptic_latest_turn > 0)
    s.ai_question_turn = 1 + static_cast<int>(p.profile_id % static_cast<std::uint64_t>(dyn.skeptic_latest_turn));
  return s;
}

/// Each level is reported exactly with probability 1 - epsilon, otherwise
/// shifted by +-1 and clamped, independently per dimension.
inline UserState observe_state(UserState s, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw ContractViolation("observe_state: epsilon outside [0, 1]");
  UserState out = s;
  for (int dim = 0; dim < 3; ++dim) {
    if (epsilon > 0.0 && rng.bernoulli(epsilon)) {
      const int shift = rng.below(2) == 0 ? -1 : 1;
      out[dim] = clamp_level(dim, s[dim] + shift);
    }
  }
  return out;
}

inline bool close_conditions_met(const UserSession& s, const EffectTable& t) {
  return s.flags.offer_presented && s.state.c >= t.close_min_cooperation && s.state.tr >= t.close_min_trust &&
         !s.flags.cost_concern_pending();
}

/// Selects the effect-table branch for an action in the current session.
inline EffectCase effect_case(const UserSession& s, AgentAction a, const EffectTable& t) {
  switch (a) {
    case AgentAction::Greet:
      if (s.turn == 0)
        return s.state.e <= t.greet_max_emotion ? EffectCase::GreetOpening : EffectCase::GreetOpeningCalm;
      return EffectCase::GreetRepeat;
    case AgentAction::AskNeeds:
      return s.flags.asked_needs_used ? EffectCase::AskNeedsRepeat : EffectCase::AskNeedsFirst;
    case AgentAction::BuildRapport:
      return EffectCase::BuildRapport;
    case AgentAction::ProvideEvidence:
      return s.state.e >= t.evidence_min_emotion ? EffectCase::EvidenceReceptive : EffectCase::EvidenceUnreceptive;
    case AgentAction::PresentOffer:
      return s.state.c >= t.offer_min_cooperation ? EffectCase::OfferReady : EffectCase::OfferPremature;
    case AgentAction::AddressCostConcern:
      return s.flags.cost_concern_pending() ? EffectCase::CostAddressed : EffectCase::CostNotRaised;
    case AgentAction::IdentityDefense:
      return s.flags.ai_question_pending() ? EffectCase::IdentityQuestioned : EffectCase::IdentityUnprompted;
    case AgentAction::HandleObjection:
      return (s.last_token == UserToken::Objection || s.last_token == UserToken::CostObjection)
                 ? EffectCase::ObjectionHandled
                 : EffectCase::ObjectionAbsent;
    case AgentAction::Apologize:
      return s.state.e == 0 ? EffectCase::ApologyUpset : EffectCase::ApologyCalm;
    case AgentAction::CloseDeal:
      return close_conditions_met(s, t) ? EffectCase::CloseReady : EffectCase::ClosePremature;
  }
  throw ContractViolation("effect_case: unknown action");
}

/// Opening utterance: the agent's first look at the user before acting.
inline Observation open_session(const UserSession& s, const UserDynamics& dyn, Rng& rng) {
  return {observe_state(s.state, dyn.observation_epsilon, rng), UserToken::Neutral};
}

/// One user turn in response to agent action `a`.
///
/// Draw order on `rng` is fixed: lapse, drift, override, observation.
/// `acceptance` is the adversarial acceptance head (rows = turns); pass null
/// for the frozen role-play model.
inline UserStep step_user(UserSession& s, AgentAction a, Rng& rng, const UserDynamics& dyn = {},
                          const LogitTable* acceptance = nullptr) {
  if (s.closed()) throw ContractViolation("step_user: session already closed");
  if (s.turn >= s.t_max) throw ContractViolation("step_user: turn limit reached");

  const EffectTable& t = dyn.effects;
  UserStep out;
  out.effect = effect_case(s, a, t);
  out.lapsed = !dyn.deterministic && s.profile.has(BehaviorTrait::AttentionLapse) &&
               rng.bernoulli(dyn.lapse_probability);

  StateDelta delta;
  bool success = false;
  bool cost_raised_now = false;
  if (!out.lapsed) {
    delta = t[out.effect];
    switch (out.effect) {
      case EffectCase::AskNeedsFirst:
        s.flags.asked_needs_used = true;
        break;
      case EffectCase::OfferReady:
        s.flags.offer_presented = true;
        if (s.profile.has(BehaviorTrait::CostConcern) && !s.flags.cost_concern_raised) {
          s.flags.cost_concern_raised = true;
          cost_raised_now = true;
        }
        break;
      case EffectCase::CostAddressed:
        s.flags.cost_concern_cleared = true;
        break;
      case EffectCase::IdentityQuestioned:
        s.flags.ai_question_cleared = true;
        break;
      case EffectCase::CloseReady:
        success = true;
        break;
      case EffectCase::EvidenceReceptive:
        if (s.flags.ai_question_pending() && delta.dtr > 0) delta.dtr /= 2;
        break;
      default:
        break;
    }
    if (s.profile.has(BehaviorTrait::Irritable))
      for (int dim = 0; dim < 3; ++dim)
        if (delta[dim] < 0) delta[dim] *= dyn.negative_multiplier_irritable;
  }

  const UserState before = s.state;
  s.state = apply_delta(s.state, delta);
  const StateDelta effective{s.state.c - before.c, s.state.e - before.e, s.state.tr - before.tr};

  if (!dyn.deterministic && rng.bernoulli(dyn.drift_probability)) {
    const int dim = static_cast<int>(rng.below(3));
    s.state[dim] = clamp_level(dim, s.state[dim] - 1);
  }

  s.turn += 1;
  bool ai_raised_now = false;
  if (s.ai_question_turn == s.turn && !s.flags.ai_question_raised) {
    s.flags.ai_question_raised = true;
    ai_raised_now = true;
  }

  UserOverride override_choice = UserOverride::RolePlay;
  if (acceptance != nullptr) {
    const std::size_t row = static_cast<std::size_t>(std::min<int>(s.turn - 1, static_cast<int>(acceptance->rows()) - 1));
    const RowSample pick = sample_row(*acceptance, row, rng);
    override_choice = static_cast<UserOverride>(pick.choice);
    out.override_step = PolicyStep{static_cast<int>(row), pick.choice, pick.log_prob};
  }

  if (override_choice == UserOverride::Accept || (override_choice == UserOverride::RolePlay && success)) {
    s.outcome = DialogueOutcome::Success;
    out.token = UserToken::Agree;
  } else if (override_choice == UserOverride::HangUp || (s.turn > 2 && s.state.c == 0 && s.state.e == 0)) {
    s.outcome = DialogueOutcome::Refusal;
    out.token = UserToken::Refuse;
  } else {
    if (out.lapsed) out.token = UserToken::Distracted;
    else if (ai_raised_now) out.token = UserToken::AiQuestion;
    else if (cost_raised_now) out.token = UserToken::CostObjection;
    else if (effective.any_negative()) out.token = s.state.e == 0 ? UserToken::Angry : UserToken::Objection;
    else if (effective.any_positive() || out.effect == EffectCase::OfferReady) out.token = UserToken::Positive;
    else out.token = UserToken::Neutral;
    if (s.turn >= s.t_max) s.outcome = DialogueOutcome::Timeout;
  }

  s.last_token = out.token;
  out.outcome = s.outcome;
  out.observation = {observe_state(s.state, dyn.observation_epsilon, rng), out.token};
  return out;
}

}  // namespace sead
