#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evoforest/elite_pool.hpp"
#include "evoforest/executor.hpp"
#include "evoforest/forest.hpp"

namespace evoforest {

// ---------------------------------------------------------------------------
// Completion backends

struct DecodeParams {
  double temperature = 0.2;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                               const DecodeParams& params) = 0;
  // Checkpoint support for stateful backends (replay position etc.).
  virtual std::string state() const { return ""; }
  virtual void restore_state(const std::string&) {}
};

// Replays a fixed ordered list of responses; fully deterministic.
class ScriptedReplayBackend : public CompletionBackend {
 public:
  explicit ScriptedReplayBackend(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}
  // JSON-lines file, one {"response": "..."} object per line.
  static ScriptedReplayBackend load(const std::string& path);

  std::string complete(const std::string&, const std::string&, const DecodeParams&) override;
  std::string state() const override { return std::to_string(position_); }
  void restore_state(const std::string& s) override { position_ = std::stoull(s); }
  std::size_t position() const { return position_; }

 private:
  std::vector<std::string> responses_;
  std::size_t position_ = 0;
};

// Chat-style HTTP completion endpoint with timeout and bounded retries.
struct HttpBackendConfig {
  std::string base_url;  // e.g. http://localhost:8080
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env;  // credential read from this environment variable
  int timeout_s = 60;
  int retries = 2;
};

class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodeParams& params) override;

 private:
  HttpBackendConfig config_;
};

// ---------------------------------------------------------------------------
// Context assembly

enum class Mode { Warmup, Explore, Exploit };

std::string mode_name(Mode m);

struct OptimizationTarget {
  std::string metric = "score";
  std::string direction = "maximize";
  std::vector<std::string> constraints;
};

struct Summary {
  std::string text;
  struct PatternStats {
    double frequency = 0.0;
    double mean_gain = 0.0;
    double variance = 0.0;
  } pattern_stats;
  FeatureVector feature_vector;
};

// Distilled-knowledge store with near-duplicate dedup and a value-based cap.
class SummaryStore {
 public:
  explicit SummaryStore(std::size_t cap = 32, double dedup_cosine = 0.95)
      : cap_(cap), dedup_cosine_(dedup_cosine) {}

  // Returns false when the summary was dropped (duplicate of a better entry
  // or below the cap cutoff).
  bool add(Summary summary);
  std::vector<Summary> retrieve(const FeatureVector& query, std::size_t count) const;
  const std::vector<Summary>& entries() const { return entries_; }
  std::size_t cap() const { return cap_; }
  void restore_entry(Summary s) { entries_.push_back(std::move(s)); }  // checkpoint support

 private:
  std::size_t cap_;
  double dedup_cosine_;
  std::vector<Summary> entries_;
};

struct SiblingDigestEntry {
  std::string summary;
  double delta_reward = 0.0;
  bool success = true;
};

struct Context {
  OptimizationTarget target;
  Mode mode = Mode::Warmup;
  std::uint64_t remaining_epochs = 0;

  std::string state_id;
  std::string state_code;
  double state_reward = 0.0;
  int state_depth = 0;

  Trajectory trajectory;
  std::vector<SiblingDigestEntry> sibling_digest;
  std::vector<EliteTrajectory> elite_trajectories;
  std::vector<EliteModificationStats> elite_modifications;
  std::vector<Summary> summaries;

  std::size_t token_budget = 2000;

  // Renders the prompt, truncating sections in fixed priority order until the
  // budget holds: summaries, then least-similar elite trajectories, then the
  // sibling digest, then trajectory middle steps. State and target are never
  // truncated.
  std::string render() const;
};

std::size_t token_count(const std::string& text);

struct ContextOptions {
  std::size_t token_budget = 2000;
  std::size_t elite_trajectory_count = 4;
  std::size_t elite_modification_count = 4;
  std::size_t summary_count = 3;
};

Context build_context(const AlgorithmNode& node, const PhyloTree& tree, const Forest& forest,
                      const ElitePool& pool, const SummaryStore& summaries, Mode mode,
                      const OptimizationTarget& target, const ContextOptions& opts,
                      std::uint64_t remaining_epochs, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Mode selection

struct ModeThresholds {
  std::uint64_t warmup_epochs = 10;
  std::uint64_t plateau = 8;       // epochs without best-reward improvement
  double diversity = 0.2;          // explore below this forest diversity
  std::uint64_t gain_streak = 3;   // consecutive accepted improvements
  double top_value = 0.1;          // exploit at/above this elite-mod value
};

struct ModeSignals {
  std::uint64_t epoch = 0;
  std::uint64_t plateau_epochs = 0;
  double forest_diversity = 1.0;
  std::uint64_t gain_streak = 0;
  double top_modification_value = 0.0;
  Mode previous = Mode::Warmup;
};

Mode select_mode(const ModeSignals& signals, const ModeThresholds& thresholds);

// ---------------------------------------------------------------------------
// Agents

struct Proposal {
  std::string high_level;
  std::string detailed_spec;
  struct Analysis {
    std::string expected_gain;
    std::string risks;
    std::string fallback;
  } analysis;
  std::string analysis_text;
};

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public AgentError {
 public:
  using AgentError::AgentError;
};

// In-context policy: renders the context, queries the backend, parses the
// two-layer output; malformed replies are re-asked up to `reask_limit` times.
Proposal next_step(const Context& context, CompletionBackend& backend, int reask_limit = 2);

struct ModifyOutcome {
  std::string code;
  EvalResult result;
  int debug_attempts = 0;        // repair rounds used (<= 3)
  double edit_distance = 0.0;    // normalized distance to the parent artifact
};

// Full pipeline: generate replacement code, dry-run, full sandboxed
// evaluation; on failure diagnose and request a targeted repair, up to three
// debug retries. Failures come back as values.
ModifyOutcome modify(const Proposal& proposal, const AlgorithmNode& parent,
                     CompletionBackend& backend, const Executor& executor,
                     const std::string& task_ref, const ResourceLimits& limits,
                     int debug_retries = 3);

// Structural redesign seeded from the elite pool's best node.
std::string design(const EliteTrajectory& elite, const std::string& elite_code,
                   const std::vector<Summary>& summaries,
                   const std::vector<EliteTrajectory>& similar, CompletionBackend& backend,
                   int reask_limit = 2);

// Distills trajectories into summaries and merges them into the store.
// Backend failures skip the cycle and leave the store unchanged.
std::vector<Summary> summarize(const std::vector<Trajectory>& trajectories,
                               CompletionBackend& backend, SummaryStore& store);

// Normalized Levenshtein distance, used as the logged minimal-diff metric.
double normalized_edit_distance(const std::string& a, const std::string& b);

// Shared prompt helpers (exposed for scripted backends and tests).
std::string extract_code_block(const std::string& reply);
std::optional<Proposal> parse_proposal(const std::string& reply);

}  // namespace evoforest
