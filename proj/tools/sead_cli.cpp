#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sead/sead.hpp"

namespace {

std::optional<sead::BackendEndpoint> parse_endpoint(const std::string& spec) {
  if (spec.empty()) return std::nullopt;
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) throw sead::ParseError("backend must be host:port");
  sead::BackendEndpoint ep;
  ep.host = spec.substr(0, colon);
  ep.port = std::stoi(spec.substr(colon + 1));
  return ep;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, std::string out, int workers,
              std::optional<int> iterations, const std::string& backend) {
  sead::ArenaConfig cfg = config_path.empty() ? sead::ArenaConfig{} : sead::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (workers > 0) cfg.workers = workers;
  if (iterations) cfg.iterations = *iterations;
  if (out.empty()) out = "runs/seed-" + std::to_string(cfg.seed);
  sead::TrainOptions opt;
  opt.user_backend = parse_endpoint(backend);
  const sead::RunResult r = sead::run_training(cfg, out, opt);
  std::cout << "trained " << r.state.iteration << " iterations" << (r.stopped_early ? " (early stop)" : "")
            << "; outputs in " << out << "\n";
  if (!r.rows.empty()) std::cout << sead::kMetricsHeader << sead::format_metrics_row(r.rows.back());
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, int reps, const std::string& config_path, std::uint64_t seed,
                 const std::string& agent, int workers) {
  sead::ArenaConfig cfg = config_path.empty() ? sead::ArenaConfig{} : sead::load_config(config_path);
  cfg.agent = sead::parse_enum<sead::AgentKind>(agent, sead::kAgentKindNames, "agent");
  sead::TrainingState st = sead::make_training_state(cfg);
  if (!checkpoint.empty()) st.params = sead::load_checkpoint(checkpoint).policy;
  else if (cfg.agent == sead::AgentKind::Learned) throw sead::ContractViolation("evaluate: --checkpoint is required for the learned agent");
  const sead::Evaluation ev = sead::evaluate(sead::rollout_policy(st), reps, seed, cfg.dynamics, nullptr, workers);
  std::cout << sead::metrics_table(ev.metrics);
  return 0;
}

int cmd_sample(const std::string& stats_path, int n, std::uint64_t seed, int n_max) {
  const sead::CompletionStats stats = sead::stats_from_csv(sead::kv::read_file(stats_path));
  sead::Rng rng(sead::derive_stream(seed, sead::StreamPurpose::Sampling, {0}));
  std::cout << "state,traits,profile_id\n";
  for (const sead::UserProfile& p : sead::sample_batch(stats, n, rng, {n_max})) {
    std::cout << '"' << sead::to_string(p.initial) << "\"," << sead::traits_to_string(p.traits) << ','
              << sead::hex64(p.profile_id) << '\n';
  }
  return 0;
}

int cmd_replay(const std::string& log_path, std::optional<std::size_t> index) {
  sead::Replayer replayer = sead::open_replayer(log_path);
  if (index) {
    const sead::ReplayResult r = replayer.verify(*index);
    std::cout << "record " << *index << ": " << r.message << "\n";
    return r.ok ? 0 : 1;
  }
  std::vector<std::string> failures;
  const std::size_t bad = replayer.verify_all(&failures);
  for (const std::string& f : failures) std::cout << f << "\n";
  std::cout << (replayer.size() - bad) << "/" << replayer.size() << " records verified\n";
  return bad == 0 ? 0 : 1;
}

int cmd_stats(const std::string& log_path) {
  std::cout << sead::stats_to_csv(sead::stats_from_log(sead::read_trajectory_log(log_path)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-evolving service-dialogue arena"};
  app.require_subcommand(1);

  std::string config_path, out, backend, checkpoint, agent = "learned", stats_path, log_path;
  std::optional<std::uint64_t> seed;
  std::uint64_t eval_seed = 0, sample_seed = 0;
  std::optional<int> iterations;
  std::optional<std::size_t> index;
  int workers = 0, reps = 4, n = 60, n_max = 200;

  auto* train = app.add_subcommand("train", "Run the training loop and write a run directory");
  train->add_option("--config", config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  train->add_option("--seed", seed, "Root seed (overrides the config)");
  train->add_option("--out", out, "Output directory (default runs/seed-S)");
  train->add_option("--workers", workers, "Rollout threads; never changes outputs")->check(CLI::PositiveNumber);
  train->add_option("--iterations", iterations, "Iteration count (overrides the config)");
  train->add_option("--backend", backend, "External user endpoint host:port");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a frozen policy on the 120-state grid");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("--reps", reps, "Dialogues per initial state")->check(CLI::PositiveNumber);
  eval->add_option("--config", config_path, "Config file for user dynamics")->check(CLI::ExistingFile);
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_option("--agent", agent, "learned, expert, mediocre or random");
  eval->add_option("--workers", workers, "Rollout threads")->check(CLI::PositiveNumber);

  auto* sample = app.add_subcommand("sample-profiles", "Print a profile batch drawn from a stats table");
  sample->add_option("--stats", stats_path, "stats.csv from a run")->required()->check(CLI::ExistingFile);
  sample->add_option("--n", n, "Batch size")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--n-max", n_max, "Per-state cap")->check(CLI::PositiveNumber);

  auto* replay = app.add_subcommand("replay", "Re-simulate logged dialogues and verify them");
  replay->add_option("--log", log_path, "trajectories.jsonl inside a run directory")->required()->check(CLI::ExistingFile);
  replay->add_option("--index", index, "Record index (default: all records)");

  auto* stats = app.add_subcommand("stats", "Rebuild the 120-row completion table from a log");
  stats->add_option("--log", log_path, "trajectories.jsonl")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    const int code = app.exit(e);
    return code == 0 ? 2 : code;
  }

  try {
    if (*train) return cmd_train(config_path, seed, out, workers, iterations, backend);
    if (*eval) return cmd_evaluate(checkpoint, reps, config_path, eval_seed, agent, std::max(1, workers));
    if (*sample) return cmd_sample(stats_path, n, sample_seed, n_max);
    if (*replay) return cmd_replay(log_path, index);
    if (*stats) return cmd_stats(log_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
