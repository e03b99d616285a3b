#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sead/behavior_library.hpp"
#include "sead/error.hpp"
#include "sead/format.hpp"
#include "sead/random.hpp"
#include "sead/state_space.hpp"
#include "sead/user_model.hpp"

namespace sead {

enum class DifficultyClass : std::uint8_t { TooEasy, Ideal, TooDifficult };

inline constexpr std::string_view name(DifficultyClass c) {
  switch (c) {
    case DifficultyClass::TooEasy: return "too_easy";
    case DifficultyClass::Ideal: return "ideal";
    case DifficultyClass::TooDifficult: return "too_difficult";
  }
  return "?";
}

/// Mistake-analysis partition: > 0.6 too easy, < 0.4 too difficult, ideal on
/// the closed interval in between.
constexpr DifficultyClass classify(double cr) {
  if (cr > 0.6) return DifficultyClass::TooEasy;
  if (cr < 0.4) return DifficultyClass::TooDifficult;
  return DifficultyClass::Ideal;
}

/// Unnormalized sampling weight, peaked at a 50% completion rate.
constexpr double raw_weight(double cr) { return 1.0 - (cr > 0.5 ? cr - 0.5 : 0.5 - cr); }

/// Normalizes raw weights of the given completion rates to a probability vector.
inline std::vector<double> normalized_weights(std::span<const double> crs) {
  std::vector<double> w(crs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < crs.size(); ++i) total += (w[i] = raw_weight(crs[i]));
  for (double& x : w) x /= total;
  return w;
}

inline constexpr int kLaplaceBelow = 5;
inline constexpr int kDefaultStatsWindow = 200;

/// Outcome record for one initial state over a sliding window.
struct StateStats {
  std::int64_t attempts_total = 0;
  std::int64_t successes_total = 0;
  std::deque<bool> window;
  int window_successes = 0;

  int attempts() const noexcept { return static_cast<int>(window.size()); }
  int successes() const noexcept { return window_successes; }
};

/// Per-initial-state completion statistics.
class CompletionStats {
 public:
  explicit CompletionStats(int num_states = kNumStates, int window = kDefaultStatsWindow)
      : states_(static_cast<std::size_t>(num_states)), window_(window) {
    if (window < 1) throw ContractViolation("CompletionStats: window must be positive");
  }

  int size() const noexcept { return static_cast<int>(states_.size()); }
  int window() const noexcept { return window_; }
  const StateStats& at(int index) const { return states_.at(static_cast<std::size_t>(index)); }

  void record(int index, DialogueOutcome outcome) {
    if (index < 0 || index >= size()) throw ContractViolation("update_stats: state index out of range");
    if (outcome == DialogueOutcome::Ongoing) throw ContractViolation("update_stats: outcome is Ongoing");
    const bool success = outcome == DialogueOutcome::Success;
    StateStats& s = states_[static_cast<std::size_t>(index)];
    s.attempts_total += 1;
    s.successes_total += success ? 1 : 0;
    s.window.push_back(success);
    s.window_successes += success ? 1 : 0;
    if (static_cast<int>(s.window.size()) > window_) {
      s.window_successes -= s.window.front() ? 1 : 0;
      s.window.pop_front();
    }
  }

  /// Seeds a state with windowed counts, as read back from an exported table.
  void set_counts(int index, int attempts, int successes) {
    if (successes < 0 || attempts < successes) throw ContractViolation("set_counts: successes > attempts");
    StateStats& s = states_.at(static_cast<std::size_t>(index));
    s = {};
    for (int i = 0; i < attempts; ++i) record(index, i < successes ? DialogueOutcome::Success : DialogueOutcome::Refusal);
  }

  /// Measured completion rate over the window; empty when unvisited.
  std::optional<double> cr(int index) const {
    const StateStats& s = at(index);
    if (s.attempts() == 0) return std::nullopt;
    return static_cast<double>(s.successes()) / s.attempts();
  }

  /// Rate fed to the sampler: Laplace-smoothed below five attempts, so an
  /// unvisited state counts as 0.5.
  double estimated_cr(int index) const {
    const StateStats& s = at(index);
    if (s.attempts() < kLaplaceBelow) return (s.successes() + 1.0) / (s.attempts() + 2.0);
    return static_cast<double>(s.successes()) / s.attempts();
  }

  bool empty() const noexcept {
    for (const StateStats& s : states_)
      if (s.attempts_total > 0) return false;
    return true;
  }

 private:
  std::vector<StateStats> states_;
  int window_;
};

inline CompletionStats update_stats(CompletionStats stats, int state_index, DialogueOutcome outcome) {
  stats.record(state_index, outcome);
  return stats;
}

inline std::vector<double> sampling_weights(const CompletionStats& stats) {
  std::vector<double> crs(static_cast<std::size_t>(stats.size()));
  for (int i = 0; i < stats.size(); ++i) crs[static_cast<std::size_t>(i)] = stats.estimated_cr(i);
  return normalized_weights(crs);
}

struct SampleOptions {
  int n_max = 200;  // cap on distinct behavior combinations per state in one batch
};

/// Draws B distinct consistent profiles with initial states distributed by
/// `state_weights` and trait subsets uniform over the consistent ones.
/// Duplicates are rejected and redrawn; a state stops being eligible once it
/// has contributed min(n_max, #consistent subsets) profiles.
/// `state_draws`, when given, receives the state index of every emitted profile.
inline std::vector<UserProfile> sample_batch_from_weights(std::vector<double> state_weights, int batch_size,
                                                          Rng& rng, SampleOptions opt = {}) {
  if (batch_size < 1) throw ContractViolation("sample_batch: batch size must be >= 1");
  if (state_weights.size() != static_cast<std::size_t>(kNumStates))
    throw ContractViolation("sample_batch: expected one weight per state");
  static const std::vector<std::vector<TraitSet>> subsets = [] {
    std::vector<std::vector<TraitSet>> out;
    for (const UserState& s : enumerate_states()) out.push_back(consistent_subsets(s));
    return out;
  }();

  std::vector<UserProfile> batch;
  std::unordered_set<ProfileId> seen;
  std::vector<int> per_state(kNumStates, 0);
  while (static_cast<int>(batch.size()) < batch_size) {
    double remaining = 0.0;
    for (double w : state_weights) remaining += w;
    if (!(remaining > 0.0)) break;
    const std::size_t s = rng.categorical(state_weights);
    const auto& options = subsets[s];
    const TraitSet traits = options[rng.below(options.size())];
    UserProfile p = build_profile(index_state(static_cast<int>(s)), traits);
    if (!seen.insert(p.profile_id).second) continue;
    batch.push_back(p);
    const int cap = std::min<int>(opt.n_max, static_cast<int>(options.size()));
    if (++per_state[s] >= cap) state_weights[s] = 0.0;
  }
  return batch;
}

inline std::vector<UserProfile> sample_batch(const CompletionStats& stats, int batch_size, Rng& rng,
                                             SampleOptions opt = {}) {
  return sample_batch_from_weights(sampling_weights(stats), batch_size, rng, opt);
}

/// Uniform draws (with replacement) from the whole consistent profile
/// universe; the controller-free sampling path.
inline std::vector<UserProfile> sample_universe(int batch_size, Rng& rng) {
  static const std::vector<UserProfile> universe = consistent_universe();
  std::vector<UserProfile> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) out.push_back(universe[rng.below(universe.size())]);
  return out;
}

// ---------------------------------------------------------------------------
// Comma-separated table: one row per initial state.

inline std::string stats_to_csv(const CompletionStats& stats) {
  const std::vector<double> w = sampling_weights(stats);
  std::ostringstream out;
  out << "index,c,e,tr,attempts,successes,cr,class,weight\n";
  for (int i = 0; i < stats.size(); ++i) {
    const UserState s = index_state(i);
    const auto cr = stats.cr(i);
    out << i << ',' << s.c << ',' << s.e << ',' << s.tr << ',' << stats.at(i).attempts() << ','
        << stats.at(i).successes() << ',' << (cr ? format_fixed(*cr, 6) : std::string()) << ','
        << (cr ? name(classify(*cr)) : std::string_view("unvisited")) << ','
        << format_fixed(w[static_cast<std::size_t>(i)], 8) << '\n';
  }
  return out.str();
}

/// Reads the windowed counts back from a table written by stats_to_csv.
inline CompletionStats stats_from_csv(std::string_view text, int window = kDefaultStatsWindow) {
  CompletionStats stats(kNumStates, window);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("index,", 0) != 0) throw ParseError("missing stats header", line_no);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 6) throw ParseError("expected at least 6 columns", line_no);
    try {
      const int index = std::stoi(f[0]);
      if (index < 0 || index >= kNumStates) throw ParseError("state index out of range", line_no);
      stats.set_counts(index, std::stoi(f[4]), std::stoi(f[5]));
    } catch (const std::logic_error&) {
      throw ParseError("bad stats row", line_no);
    }
    ++rows;
  }
  if (rows != kNumStates) throw ParseError("expected " + std::to_string(kNumStates) + " stats rows");
  return stats;
}

}  // namespace sead
