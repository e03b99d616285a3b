#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sead/config.hpp"
#include "sead/error.hpp"
#include "sead/format.hpp"
#include "sead/softmax.hpp"
#include "sead/trajectory.hpp"

namespace sead {

inline constexpr std::string_view kTrajectorySchema = "sead-trajectory-log";
inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "sead-checkpoint";
inline constexpr int kCheckpointVersion = 1;
inline constexpr std::string_view kCodeVersion = "0.1.0";

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || p != s.data() + s.size() || s.size() != 16) throw ParseError("bad hex id '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Trajectory log: a header line, then one JSON object per dialogue.

struct LogHeader {
  ArenaConfig config;
  std::string config_text;
  std::string effect_table_text;
};

inline std::string log_header_line(const ArenaConfig& config) {
  nlohmann::ordered_json j;
  j["schema"] = kTrajectorySchema;
  j["version"] = kTrajectorySchemaVersion;
  j["config"] = format_config(config);
  j["effect_table"] = format_effect_table(config.dynamics.effects);
  return j.dump();
}

inline LogHeader parse_log_header(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trajectory log header: ") + e.what(), 1);
  }
  if (!j.is_object() || j.value("schema", "") != kTrajectorySchema)
    throw ParseError("not a trajectory log (missing schema header)", 1);
  if (j.value("version", 0) != kTrajectorySchemaVersion)
    throw ParseError("unsupported trajectory log version", 1);
  LogHeader h;
  h.config_text = j.at("config").get<std::string>();
  h.effect_table_text = j.at("effect_table").get<std::string>();
  // The embedded table wins over any path recorded in the config.
  std::string text = h.config_text;
  std::string filtered;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (l.rfind("effect_table", 0) != 0) filtered += l + "\n";
  h.config = parse_config(filtered);
  h.config.dynamics.effects = parse_effect_table(h.effect_table_text);
  h.config.effect_table_path = [&] {
    std::istringstream again(text);
    for (std::string l; std::getline(again, l);)
      if (l.rfind("effect_table", 0) == 0) return std::string(kv::trim(l.substr(l.find('=') + 1)));
    return std::string();
  }();
  return h;
}

inline nlohmann::ordered_json to_json(const Trajectory& t, double reward) {
  nlohmann::ordered_json j;
  j["iteration"] = t.iteration;
  j["rollout"] = t.rollout;
  j["stream"] = hex64(t.stream);
  nlohmann::ordered_json profile;
  profile["initial"] = to_string(t.profile.initial);
  profile["traits"] = nlohmann::ordered_json::array();
  for (BehaviorTrait b : t.profile.traits.sorted()) profile["traits"].push_back(trait_name(b));
  profile["id"] = hex64(t.profile.profile_id);
  j["profile"] = profile;
  j["turns"] = nlohmann::ordered_json::array();
  for (const Turn& turn : t.turns) {
    nlohmann::ordered_json tj;
    tj["token"] = name(turn.token);
    tj["observed"] = to_string(turn.observed);
    tj["hidden"] = to_string(turn.hidden);
    tj["estimate"] = to_string(turn.estimate);
    tj["action"] = name(turn.action);
    tj["log_prob"] = turn.log_prob;
    tj["row"] = turn.row;
    tj["flags"] = turn.flags;
    if (turn.user_override) {
      tj["override"] = {{"row", turn.user_override->row},
                        {"choice", turn.user_override->action},
                        {"log_prob", turn.user_override->log_prob}};
    }
    j["turns"].push_back(tj);
  }
  j["final_token"] = name(t.final_token);
  j["final_state"] = to_string(t.final_state);
  j["outcome"] = name(t.outcome);
  j["length"] = t.length();
  j["reward"] = reward;
  return j;
}

inline std::string serialize_trajectory(const Trajectory& t, double reward) { return to_json(t, reward).dump(); }

struct LoggedTrajectory {
  Trajectory trajectory;
  double reward = 0.0;
};

inline LoggedTrajectory parse_trajectory(const std::string& line) {
  LoggedTrajectory out;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    Trajectory& t = out.trajectory;
    t.iteration = j.at("iteration").get<int>();
    t.rollout = j.at("rollout").get<int>();
    t.stream = parse_hex64(j.at("stream").get<std::string>());
    const auto& p = j.at("profile");
    TraitSet traits;
    for (const auto& name : p.at("traits")) traits.insert(parse_trait(name.get<std::string>()));
    t.profile = build_profile(parse_state(p.at("initial").get<std::string>()), traits);
    if (hex64(t.profile.profile_id) != p.at("id").get<std::string>())
      throw ParseError("profile id does not match profile content");
    for (const auto& tj : j.at("turns")) {
      Turn turn;
      turn.token = parse_token(tj.at("token").get<std::string>());
      turn.observed = parse_state(tj.at("observed").get<std::string>());
      turn.hidden = parse_state(tj.at("hidden").get<std::string>());
      turn.estimate = parse_state(tj.at("estimate").get<std::string>());
      turn.action = parse_action(tj.at("action").get<std::string>());
      turn.log_prob = tj.at("log_prob").get<double>();
      turn.row = tj.at("row").get<int>();
      turn.flags = tj.at("flags").get<std::uint8_t>();
      if (tj.contains("override")) {
        const auto& o = tj.at("override");
        turn.user_override = PolicyStep{o.at("row").get<int>(), o.at("choice").get<int>(), o.at("log_prob").get<double>()};
      }
      t.turns.push_back(turn);
    }
    t.final_token = parse_token(j.at("final_token").get<std::string>());
    t.final_state = parse_state(j.at("final_state").get<std::string>());
    t.outcome = parse_outcome(j.at("outcome").get<std::string>());
    if (j.at("length").get<int>() != t.length()) throw ParseError("length field does not match turn count");
    out.reward = j.at("reward").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("trajectory record: ") + e.what());
  }
  return out;
}

/// Reads a whole log: header plus every record, in file order.
struct TrajectoryLog {
  LogHeader header;
  std::vector<std::string> lines;  // raw record lines

  LoggedTrajectory record(std::size_t index) const {
    if (index >= lines.size())
      throw ContractViolation("trajectory log has " + std::to_string(lines.size()) + " records, index " +
                              std::to_string(index) + " requested");
    return parse_trajectory(lines[index]);
  }
};

inline TrajectoryLog read_trajectory_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory log '" + path + "'");
  TrajectoryLog log;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty trajectory log '" + path + "'");
  log.header = parse_log_header(line);
  while (std::getline(in, line))
    if (!line.empty()) log.lines.push_back(line);
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text tables, one line per non-zero row.

struct Checkpoint {
  int iteration = 0;
  PolicyParams policy = make_policy_params();
  LogitTable urm_acceptance;
  LogitTable urm_states;
};

namespace detail {
inline void write_table(std::ostream& out, std::string_view name, const LogitTable& t) {
  out << "table " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    bool any = false;
    for (double v : row) any = any || v != 0.0;
    if (!any) continue;
    out << r;
    for (double v : row) out << ' ' << format_double(v);
    out << '\n';
  }
  out << "end\n";
}

inline LogitTable read_table(std::istream& in, std::string_view expected_name, int& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint truncated", line_no);
  ++line_no;
  std::istringstream head(line);
  std::string word, name;
  std::size_t rows = 0, cols = 0;
  if (!(head >> word >> name >> rows >> cols) || word != "table" || name != expected_name)
    throw ParseError("expected 'table " + std::string(expected_name) + "'", line_no);
  LogitTable t(rows, cols, 0.0);
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "end") return t;
    std::istringstream row(line);
    std::size_t r = 0;
    if (!(row >> r) || r >= rows) throw ParseError("bad checkpoint row", line_no);
    for (std::size_t c = 0; c < cols; ++c) {
      std::string v;
      if (!(row >> v)) throw ParseError("short checkpoint row", line_no);
      kv::Entry e{"logit", v, line_no};
      t.at(r, c) = kv::to_number<double>(e);
    }
  }
  throw ParseError("checkpoint table not terminated", line_no);
}
}  // namespace detail

inline std::string format_checkpoint(const Checkpoint& c) {
  std::ostringstream out;
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "iteration " << c.iteration << '\n';
  detail::write_table(out, "policy", c.policy);
  detail::write_table(out, "urm_acceptance", c.urm_acceptance);
  detail::write_table(out, "urm_states", c.urm_states);
  return out.str();
}

inline Checkpoint parse_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion))
    throw ParseError("not a checkpoint (bad version header)", 1);
  Checkpoint c;
  if (!std::getline(in, line) || line.rfind("iteration ", 0) != 0) throw ParseError("missing iteration", 2);
  ++line_no;
  c.iteration = std::stoi(line.substr(10));
  c.policy = detail::read_table(in, "policy", line_no);
  if (c.policy.rows() != kNumPolicyRows || c.policy.cols() != kNumActions)
    throw ParseError("policy table has the wrong shape");
  c.urm_acceptance = detail::read_table(in, "urm_acceptance", line_no);
  c.urm_states = detail::read_table(in, "urm_states", line_no);
  return c;
}

inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(kv::read_file(path)); }

inline std::string checkpoint_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%04d.txt", iteration);
  return buf;
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace sead
