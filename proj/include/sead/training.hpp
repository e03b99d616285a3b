#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sead/arena.hpp"
#include "sead/backend.hpp"
#include "sead/io.hpp"
#include "sead/log.hpp"

namespace sead {

inline constexpr const char* kLogFile = "trajectories.jsonl";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kStatsFile = "stats.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCheckpointDir = "checkpoints";

/// One row of metrics.csv.
struct MetricsRow {
  int iteration = 0;
  bool skipped = false;
  double mean_reward = 0.0;
  double completion_rate = 0.0;
  double mean_turns = 0.0;
  double mean_abs_advantage = 0.0;
  double grad_norm = 0.0;
  double urm_grad_norm = 0.0;
  int too_easy = 0;
  int ideal = 0;
  int too_difficult = 0;
  int unvisited = 0;
  std::optional<double> eval_cr;
};

inline constexpr const char* kMetricsHeader =
    "iteration,skipped,mean_reward,completion_rate,mean_turns,mean_abs_advantage,grad_norm,urm_grad_norm,"
    "too_easy,ideal,too_difficult,unvisited,eval_cr\n";

inline std::string format_metrics_row(const MetricsRow& r) {
  std::string s = std::to_string(r.iteration) + "," + (r.skipped ? "1" : "0");
  for (double v : {r.mean_reward, r.completion_rate, r.mean_turns, r.mean_abs_advantage, r.grad_norm, r.urm_grad_norm})
    s += "," + format_double(v);
  for (int v : {r.too_easy, r.ideal, r.too_difficult, r.unvisited}) s += "," + std::to_string(v);
  s += "," + (r.eval_cr ? format_double(*r.eval_cr) : std::string());
  return s + "\n";
}

inline MetricsRow metrics_row(const IterationReport& rep) {
  MetricsRow r;
  r.iteration = rep.iteration;
  r.mean_reward = rep.mean_reward;
  std::size_t successes = 0;
  for (const Trajectory& t : rep.trajectories) successes += t.success() ? 1 : 0;
  r.completion_rate = rep.trajectories.empty() ? 0.0 : static_cast<double>(successes) / rep.trajectories.size();
  r.mean_turns = rep.mean_turns;
  r.mean_abs_advantage = rep.mean_abs_advantage;
  r.grad_norm = rep.grad_norm;
  r.urm_grad_norm = rep.urm_grad_norm;
  r.too_easy = rep.too_easy;
  r.ideal = rep.ideal;
  r.too_difficult = rep.too_difficult;
  r.unvisited = rep.unvisited;
  return r;
}

inline Checkpoint checkpoint_of(const TrainingState& st) {
  return {st.iteration, st.params, st.urm_acceptance, st.urm_states};
}

struct TrainOptions {
  bool write_checkpoints = true;
  bool write_log = true;
  std::optional<BackendEndpoint> user_backend;  // external user side for Phase 2
};

struct RunResult {
  TrainingState state;
  std::vector<MetricsRow> rows;
  bool stopped_early = false;
  std::filesystem::path out_dir;
};

/// Tracks the best periodic evaluation CR and signals a plateau.
class EarlyStop {
 public:
  EarlyStop(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true when training should stop.
  bool observe(double cr) {
    if (!has_best_ || cr > best_ + min_delta_) {
      best_ = cr;
      has_best_ = true;
      stale_ = 0;
      return false;
    }
    ++stale_;
    return patience_ > 0 && stale_ >= patience_;
  }

 private:
  int patience_;
  double min_delta_;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

/// Runs the full loop and writes the run directory:
///   trajectories.jsonl  header line + one record per dialogue
///   metrics.csv         one row per iteration
///   stats.csv           final 120-row completion table
///   checkpoints/        ckpt_0000 (initial) .. ckpt_N (after iteration N-1)
///   manifest.json       config, seed, paths, timings
/// Every file except the manifest is a pure function of the config.
inline RunResult run_training(const ArenaConfig& config, const std::filesystem::path& out_dir,
                              const TrainOptions& opt = {}) {
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  fs::create_directories(out_dir);
  if (opt.write_checkpoints) fs::create_directories(out_dir / kCheckpointDir);

  RunResult result;
  result.out_dir = out_dir;
  result.state = make_training_state(config);
  TrainingState& st = result.state;

  std::ofstream log_out;
  if (opt.write_log) {
    log_out.open(out_dir / kLogFile, std::ios::binary | std::ios::trunc);
    if (!log_out) throw std::runtime_error("cannot write " + (out_dir / kLogFile).string());
    log_out << log_header_line(config) << '\n';
  }
  std::ofstream metrics_out(out_dir / kMetricsFile, std::ios::binary | std::ios::trunc);
  if (!metrics_out) throw std::runtime_error("cannot write " + (out_dir / kMetricsFile).string());
  metrics_out << kMetricsHeader;

  std::vector<std::string> checkpoints;
  auto save_checkpoint = [&] {
    if (!opt.write_checkpoints) return;
    const std::string rel = std::string(kCheckpointDir) + "/" + checkpoint_name(st.iteration);
    write_text(out_dir / rel, format_checkpoint(checkpoint_of(st)));
    checkpoints.push_back(rel);
  };
  save_checkpoint();

  std::optional<RolloutFn> backend_rollout;
  if (opt.user_backend) {
    backend_rollout = [ep = *opt.user_backend, &config](const AnyPolicy& policy, const UserProfile& profile, Rng& rng,
                                                         const LogitTable*) {
      ChatBackend backend(ep);
      return run_backend_dialogue(policy, profile, rng, backend, BackendSides{true, false}, config.dynamics);
    };
  }

  EarlyStop early(config.early_stop_patience, config.early_stop_min_delta);
  std::vector<double> iteration_seconds;
  for (int i = 0; i < config.iterations; ++i) {
    const auto t0 = clock::now();
    MetricsRow row;
    try {
      const IterationReport rep = train_iteration(st, backend_rollout ? &*backend_rollout : nullptr);
      row = metrics_row(rep);
      if (opt.write_log) {
        for (std::size_t k = 0; k < rep.trajectories.size(); ++k)
          log_out << serialize_trajectory(rep.trajectories[k], rep.rewards[k]) << '\n';
        log_out.flush();
      }
    } catch (const BackendUnavailable& e) {
      log().error("iteration {} skipped: {}", i, e.what());
      row.iteration = st.iteration;
      row.skipped = true;
      st.iteration += 1;
    }
    bool stop = false;
    if (config.eval_interval > 0 && st.iteration % config.eval_interval == 0) {
      const Evaluation ev =
          evaluate(rollout_policy(st), config.eval_reps, config.seed, config.dynamics, nullptr, config.workers);
      row.eval_cr = ev.metrics.cr.mean;
      stop = early.observe(*row.eval_cr);
    }
    metrics_out << format_metrics_row(row);
    metrics_out.flush();
    result.rows.push_back(row);
    save_checkpoint();
    iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    log().info("iteration {}: reward {:.3f}, ideal {}, unvisited {}", row.iteration, row.mean_reward, row.ideal,
               row.unvisited);
    if (stop) {
      log().info("early stop after iteration {}: evaluation CR plateaued", row.iteration);
      result.stopped_early = true;
      break;
    }
  }

  write_text(out_dir / kStatsFile, stats_to_csv(st.stats));

  nlohmann::ordered_json manifest;
  manifest["schema"] = "sead-run-manifest";
  manifest["version"] = 1;
  manifest["code_version"] = kCodeVersion;
  manifest["seed"] = config.seed;
  manifest["config"] = format_config(config);
  manifest["effect_table"] = format_effect_table(config.dynamics.effects);
  manifest["workers"] = config.workers;
  manifest["trajectory_log"] = opt.write_log ? kLogFile : "";
  manifest["metrics"] = kMetricsFile;
  manifest["stats"] = kStatsFile;
  manifest["checkpoints"] = checkpoints;
  manifest["iterations_completed"] = st.iteration;
  manifest["stopped_early"] = result.stopped_early;
  manifest["timings"] = {{"total_seconds", std::chrono::duration<double>(clock::now() - t_start).count()},
                         {"iteration_seconds", iteration_seconds}};
  write_text(out_dir / kManifestFile, manifest.dump(2) + "\n");
  return result;
}

// ---------------------------------------------------------------------------
// Reconstruction from a log

/// Completion statistics as Phase 4 saw them before `before_iteration`
/// (all records when empty).
inline CompletionStats stats_from_log(const TrajectoryLog& log, std::optional<int> before_iteration = std::nullopt) {
  const ArenaConfig& cfg = log.header.config;
  CompletionStats stats(kNumStates, cfg.stats_window);
  if (cfg.disable_mistake_analysis) return stats;
  for (const std::string& line : log.lines) {
    const LoggedTrajectory rec = parse_trajectory(line);
    if (before_iteration && rec.trajectory.iteration >= *before_iteration) break;
    stats.record(state_index(rec.trajectory.profile.initial), rec.trajectory.outcome);
  }
  return stats;
}

struct ReplayResult {
  bool ok = false;
  std::string message;
};

/// Re-simulates logged dialogues from the run's checkpoints and substreams
/// and compares the re-serialized record byte for byte. Also re-runs Phase 1
/// to confirm the logged profile is the one the sampler chose.
class Replayer {
 public:
  Replayer(TrajectoryLog log, std::filesystem::path run_dir) : log_(std::move(log)), dir_(std::move(run_dir)) {}

  const TrajectoryLog& log() const noexcept { return log_; }
  std::size_t size() const noexcept { return log_.lines.size(); }

  ReplayResult verify(std::size_t index) {
    const ArenaConfig& cfg = log_.header.config;
    const LoggedTrajectory rec = log_.record(index);
    const Trajectory& logged = rec.trajectory;
    const std::size_t k = static_cast<std::size_t>(logged.rollout);
    const std::size_t group_size = static_cast<std::size_t>(cfg.group_size);

    const std::uint64_t expected_stream = rollout_stream(cfg.seed, logged.iteration, k);
    if (logged.stream != expected_stream)
      return {false, "stream " + hex64(logged.stream) + " is not the derived substream " + hex64(expected_stream)};

    load_iteration(logged.iteration);
    if (k / group_size >= profiles_.size())
      return {false, "rollout index " + std::to_string(k) + " outside the sampled batch"};
    if (!(profiles_[k / group_size] == logged.profile))
      return {false, "profile differs from the Phase 1 sample for this rollout"};

    TrainingState st = make_training_state(cfg);
    st.params = ckpt_->policy;
    Rng rng(expected_stream);
    Trajectory t = run_dialogue(rollout_policy(st), logged.profile, rng, cfg.dynamics,
                                cfg.train_urm ? &ckpt_->urm_acceptance : nullptr);
    t.iteration = logged.iteration;
    t.rollout = logged.rollout;
    const std::string again = serialize_trajectory(t, shaped_reward(t, cfg.shaping_lambda));
    if (again != log_.lines[index]) return {false, "re-simulated record differs from the log"};
    return {true, "verified"};
  }

  /// Verifies every record; returns the number that failed.
  std::size_t verify_all(std::vector<std::string>* failures = nullptr) {
    std::size_t bad = 0;
    for (std::size_t i = 0; i < size(); ++i) {
      const ReplayResult r = verify(i);
      if (r.ok) continue;
      ++bad;
      if (failures) failures->push_back("record " + std::to_string(i) + ": " + r.message);
    }
    return bad;
  }

 private:
  void load_iteration(int iteration) {
    if (loaded_ == iteration) return;
    const ArenaConfig& cfg = log_.header.config;
    ckpt_ = load_checkpoint((dir_ / kCheckpointDir / checkpoint_name(iteration)).string());
    if (ckpt_->iteration != iteration) throw ParseError("checkpoint iteration mismatch");
    // Stats are replayed incrementally when iterations are visited in order.
    if (!stats_ || iteration < stats_iteration_) {
      stats_ = CompletionStats(kNumStates, cfg.stats_window);
      stats_iteration_ = 0;
      cursor_ = 0;
    }
    while (cursor_ < log_.lines.size()) {
      const LoggedTrajectory rec = parse_trajectory(log_.lines[cursor_]);
      if (rec.trajectory.iteration >= iteration) break;
      if (!cfg.disable_mistake_analysis)
        stats_->record(state_index(rec.trajectory.profile.initial), rec.trajectory.outcome);
      ++cursor_;
    }
    stats_iteration_ = iteration;
    profiles_ = sample_profiles(cfg, *stats_, ckpt_->urm_states, iteration);
    loaded_ = iteration;
  }

  TrajectoryLog log_;
  std::filesystem::path dir_;
  int loaded_ = -1;
  std::optional<Checkpoint> ckpt_;
  std::optional<CompletionStats> stats_;
  int stats_iteration_ = 0;
  std::size_t cursor_ = 0;
  std::vector<UserProfile> profiles_;
};

inline Replayer open_replayer(const std::filesystem::path& log_path) {
  return Replayer(read_trajectory_log(log_path.string()), log_path.parent_path());
}

}  // namespace sead
