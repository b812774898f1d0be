#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoforest/agents.hpp"
#include "evoforest/elite_pool.hpp"
#include "evoforest/executor.hpp"
#include "evoforest/forest.hpp"
#include "evoforest/pruning.hpp"
#include "evoforest/sampling.hpp"

namespace evoforest {

struct MacroThresholds {
  std::uint64_t plateau = 15;
  double diversity = 0.15;
  std::uint64_t cooldown = 20;
};

struct PruningParams {
  std::uint64_t stagnation_rounds = 10;
  double percentile = 25.0;
};

enum class GateKind { DeltaPositive, AbsolutePositive };

struct BackendConfig {
  std::string kind = "hill_climb";  // hill_climb | replay | http
  std::string replay_path;
  HttpBackendConfig http;
  double hill_climb_rate = 0.7;
};

struct RunConfig {
  std::uint64_t seed = 0;  // rng seed; mandatory in config files
  std::uint64_t epochs = 50;
  std::uint64_t warmup_epochs = 10;
  std::string task;
  std::vector<std::string> seed_codes;
  std::vector<std::string> constraints;

  SamplingParams sampling;
  TreeScoreWeights tree_weights;
  RetentionWeights retention;
  std::size_t forest_capacity = 8;
  std::size_t elite_k = 16;
  PruningParams pruning;
  ModeThresholds modes;
  MacroThresholds macro;
  ResourceLimits limits;
  ContextOptions context;
  GateKind gate = GateKind::DeltaPositive;
  int reask_limit = 2;
  int debug_retries = 3;
  std::uint64_t summarize_interval = 10;
  std::uint64_t checkpoint_interval = 10;
  std::size_t islands = 1;
  std::uint64_t tombstone_horizon = 1000000;  // epochs tombstones are kept
  std::string output_dir;

  std::map<std::string, BackendConfig> backends;  // per role, optional

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j, std::string* error = nullptr);
  std::string hash() const;
};

struct BackendSet {
  std::shared_ptr<CompletionBackend> next_step;
  std::shared_ptr<CompletionBackend> modify;
  std::shared_ptr<CompletionBackend> design;
  std::shared_ptr<CompletionBackend> summarize;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AbortedError : public std::runtime_error {
 public:
  AbortedError(const std::string& msg, std::string checkpoint_path)
      : std::runtime_error(msg), checkpoint_path(std::move(checkpoint_path)) {}
  std::string checkpoint_path;
};

struct BestResult {
  std::string tree_id;
  std::string node_id;
  std::string code;
  double reward = 0.0;
};

class Orchestrator {
 public:
  Orchestrator(RunConfig config, BackendSet backends, std::shared_ptr<Executor> executor);

  // Evaluates the configured seeds and plants the initial trees.
  void initialize();

  // Runs `epochs` additional epochs of the micro/macro loop; returns the best
  // candidate found so far.
  BestResult run(std::uint64_t epochs);
  BestResult best() const;

  void checkpoint(const std::string& path) const;
  static Orchestrator restore(const std::string& path, BackendSet backends,
                              std::shared_ptr<Executor> executor);

  void open_event_log(const std::string& path);

  const RunConfig& config() const { return config_; }
  const Forest& forest() const { return forest_; }
  const ElitePool& pool() const { return pool_; }
  const SummaryStore& summaries() const { return summaries_; }
  std::uint64_t epoch() const { return epoch_; }
  Mode mode() const { return mode_; }
  const std::vector<double>& best_history() const { return best_history_; }

  bool trigger_redesign() const;

 private:
  void event(std::uint64_t epoch, const std::string& kind, const std::string& tree,
             const std::string& node, const nlohmann::json& payload);
  void run_one_commit(std::uint64_t commit_epoch, const std::string& tree_id,
                      const std::string& node_id, const Proposal& proposal,
                      const ModifyOutcome& outcome);
  void after_epoch_housekeeping(std::uint64_t e);
  std::optional<std::string> pick_tree(std::uint64_t e, const std::set<std::string>& exclude);
  void macro_step();
  void maybe_summarize();
  nlohmann::json state_json() const;
  void load_state(const nlohmann::json& body);

  RunConfig config_;
  BackendSet backends_;
  std::shared_ptr<Executor> executor_;

  Forest forest_;
  ElitePool pool_;
  SummaryStore summaries_;
  std::mt19937_64 rng_;
  std::uint64_t epoch_ = 0;
  Mode mode_ = Mode::Warmup;
  std::uint64_t plateau_ = 0;
  std::uint64_t gain_streak_ = 0;
  double best_reward_ = kFailureSentinel;
  std::int64_t last_redesign_epoch_ = -1;
  std::vector<double> best_history_;
  std::set<std::string> summarized_;  // tree:node keys already distilled
  bool initialized_ = false;

  std::ofstream event_log_;
};

// Stable 64-bit FNV-1a, used for config hashes and checkpoint checksums.
std::string fnv1a_hex(const std::string& data);

}  // namespace evoforest
