#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "sead/agent.hpp"
#include "sead/error.hpp"
#include "sead/format.hpp"
#include "sead/grpo.hpp"
#include "sead/keyvalue.hpp"
#include "sead/user_model.hpp"

namespace sead {

/// Which agent acts in Phase 2. Scripted agents are never updated.
enum class AgentKind : std::uint8_t { Learned, Expert, Mediocre, Random };

inline constexpr std::array<std::string_view, 4> kAgentKindNames = {"learned", "expert", "mediocre", "random"};

struct ArenaConfig {
  int batch_size = 60;
  int group_size = 8;
  int iterations = 100;
  std::uint64_t seed = 0;

  // Ablation switches.
  bool train_urm = false;
  bool disable_mistake_analysis = false;
  bool disable_profile_sampling = false;

  UserDynamics dynamics;
  std::string effect_table_path;  // empty: built-in table

  AgentKind agent = AgentKind::Learned;
  double lr = 0.2;
  Reduction reduction = Reduction::Sum;
  double shaping_lambda = 0.0;

  double urm_lr = 0.2;
  double urm_initial_override_logit = -4.0;

  int stats_window = 200;
  int n_max = 200;

  int workers = 1;
  int eval_reps = 4;
  int eval_interval = 0;  // 0: no periodic evaluation
  int early_stop_patience = 0;
  double early_stop_min_delta = 0.005;

  friend bool operator==(const ArenaConfig&, const ArenaConfig&) = default;
};

namespace detail {
inline void validate(const ArenaConfig& c) {
  if (c.batch_size < 1) throw ParseError("batch_size must be >= 1");
  if (c.group_size < 1) throw ParseError("group_size must be >= 1");
  if (c.iterations < 0) throw ParseError("iterations must be >= 0");
  if (c.dynamics.t_max < 1) throw ParseError("t_max must be >= 1");
  if (c.dynamics.observation_epsilon < 0.0 || c.dynamics.observation_epsilon > 1.0)
    throw ParseError("epsilon must be in [0, 1]");
  if (!(c.lr > 0.0) || !(c.urm_lr > 0.0)) throw ParseError("learning rates must be positive");
  if (c.workers < 1) throw ParseError("workers must be >= 1");
  if (c.eval_reps < 1) throw ParseError("eval_reps must be >= 1");
  if (c.stats_window < 1 || c.n_max < 1) throw ParseError("stats_window and n_max must be >= 1");
}
}  // namespace detail

/// Parses "key = value" configuration text. Missing keys keep their
/// defaults; unknown keys are an error.
inline ArenaConfig parse_config(std::string_view text) {
  ArenaConfig c;
  for (const kv::Entry& e : kv::parse(text)) {
    const std::string& k = e.key;
    if (k == "batch_size") c.batch_size = kv::to_number<int>(e);
    else if (k == "group_size") c.group_size = kv::to_number<int>(e);
    else if (k == "iterations") c.iterations = kv::to_number<int>(e);
    else if (k == "seed") c.seed = kv::to_number<std::uint64_t>(e);
    else if (k == "train_urm") c.train_urm = kv::to_bool(e);
    else if (k == "disable_mistake_analysis") c.disable_mistake_analysis = kv::to_bool(e);
    else if (k == "disable_profile_sampling") c.disable_profile_sampling = kv::to_bool(e);
    else if (k == "t_max") c.dynamics.t_max = kv::to_number<int>(e);
    else if (k == "busy_t_max") c.dynamics.busy_t_max = kv::to_number<int>(e);
    else if (k == "epsilon") c.dynamics.observation_epsilon = kv::to_number<double>(e);
    else if (k == "drift_probability") c.dynamics.drift_probability = kv::to_number<double>(e);
    else if (k == "lapse_probability") c.dynamics.lapse_probability = kv::to_number<double>(e);
    else if (k == "deterministic") c.dynamics.deterministic = kv::to_bool(e);
    else if (k == "effect_table") c.effect_table_path = e.value;
    else if (k == "agent") c.agent = parse_enum<AgentKind>(e.value, kAgentKindNames, "agent");
    else if (k == "lr") c.lr = kv::to_number<double>(e);
    else if (k == "reduction") {
      if (e.value == "sum") c.reduction = Reduction::Sum;
      else if (e.value == "mean") c.reduction = Reduction::Mean;
      else throw ParseError("reduction must be 'sum' or 'mean'", e.line);
    }
    else if (k == "shaping_lambda") c.shaping_lambda = kv::to_number<double>(e);
    else if (k == "urm_lr") c.urm_lr = kv::to_number<double>(e);
    else if (k == "urm_initial_override_logit") c.urm_initial_override_logit = kv::to_number<double>(e);
    else if (k == "stats_window") c.stats_window = kv::to_number<int>(e);
    else if (k == "n_max") c.n_max = kv::to_number<int>(e);
    else if (k == "workers") c.workers = kv::to_number<int>(e);
    else if (k == "eval_reps") c.eval_reps = kv::to_number<int>(e);
    else if (k == "eval_interval") c.eval_interval = kv::to_number<int>(e);
    else if (k == "early_stop_patience") c.early_stop_patience = kv::to_number<int>(e);
    else if (k == "early_stop_min_delta") c.early_stop_min_delta = kv::to_number<double>(e);
    else throw ParseError("unknown key '" + k + "'", e.line);
  }
  try {
    detail::validate(c);
  } catch (const ParseError& err) {
    throw ParseError(std::string("invalid config: ") + err.what());
  }
  if (!c.effect_table_path.empty())
    c.dynamics.effects = parse_effect_table(kv::read_file(c.effect_table_path));
  return c;
}

inline ArenaConfig load_config(const std::string& path) { return parse_config(kv::read_file(path)); }

/// Canonical text form; parse_config(format_config(c)) == c. `workers` is
/// omitted because it never changes outputs.
inline std::string format_config(const ArenaConfig& c) {
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::string s;
  s += "batch_size = " + std::to_string(c.batch_size) + "\n";
  s += "group_size = " + std::to_string(c.group_size) + "\n";
  s += "iterations = " + std::to_string(c.iterations) + "\n";
  s += "seed = " + std::to_string(c.seed) + "\n";
  s += std::string("train_urm = ") + b(c.train_urm) + "\n";
  s += std::string("disable_mistake_analysis = ") + b(c.disable_mistake_analysis) + "\n";
  s += std::string("disable_profile_sampling = ") + b(c.disable_profile_sampling) + "\n";
  s += "t_max = " + std::to_string(c.dynamics.t_max) + "\n";
  s += "busy_t_max = " + std::to_string(c.dynamics.busy_t_max) + "\n";
  s += "epsilon = " + format_double(c.dynamics.observation_epsilon) + "\n";
  s += "drift_probability = " + format_double(c.dynamics.drift_probability) + "\n";
  s += "lapse_probability = " + format_double(c.dynamics.lapse_probability) + "\n";
  s += std::string("deterministic = ") + b(c.dynamics.deterministic) + "\n";
  if (!c.effect_table_path.empty()) s += "effect_table = " + c.effect_table_path + "\n";
  s += "agent = " + std::string(kAgentKindNames[static_cast<std::size_t>(c.agent)]) + "\n";
  s += "lr = " + format_double(c.lr) + "\n";
  s += std::string("reduction = ") + (c.reduction == Reduction::Sum ? "sum" : "mean") + "\n";
  s += "shaping_lambda = " + format_double(c.shaping_lambda) + "\n";
  s += "urm_lr = " + format_double(c.urm_lr) + "\n";
  s += "urm_initial_override_logit = " + format_double(c.urm_initial_override_logit) + "\n";
  s += "stats_window = " + std::to_string(c.stats_window) + "\n";
  s += "n_max = " + std::to_string(c.n_max) + "\n";
  s += "eval_reps = " + std::to_string(c.eval_reps) + "\n";
  s += "eval_interval = " + std::to_string(c.eval_interval) + "\n";
  s += "early_stop_patience = " + std::to_string(c.early_stop_patience) + "\n";
  s += "early_stop_min_delta = " + format_double(c.early_stop_min_delta) + "\n";
  return s;
}

}  // namespace sead
