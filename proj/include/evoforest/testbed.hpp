#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "evoforest/agents.hpp"
#include "evoforest/executor.hpp"

namespace evoforest {

// Decoded candidate artifact: `name = value` lines, numeric or string.
struct ParamSet {
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> strings;
};

ParamSet decode_params(const std::string& code);
std::string encode_params(const ParamSet& params);

// Deterministic synthetic task with a documented closed-form score and a
// known optimum; scores never depend on measured runtime.
struct SyntheticTask {
  std::string id;
  std::string kind;  // harness dispatch key
  std::string description;
  std::vector<std::string> param_names;
  std::function<double(const ParamSet&)> score_fn;
  double optimum = 0.0;
  ParamSet optimum_params;
  std::vector<std::string> constraints;  // human-readable
  ConstraintChecker checker;
  std::string seed_code;
  std::string extra_task_config;  // merged into task.json (e.g. hidden target)
};

// (a) 1-D quadratic, (b) 2-D bimodal, (c) discrete token-overlap edit task.
std::vector<SyntheticTask> builtin_tasks();
SyntheticTask find_task(const std::string& id);

// Writes the harness script + task.json under base_dir/<task id>/ and
// registers the task with the executor. Returns the task directory.
std::string install_task(const SyntheticTask& task, Executor& executor,
                         const std::string& base_dir);

// Deterministic stand-in for the completion backend: answers every agent role
// by nudging numeric parameters toward the known optimum with a decaying step.
class HillClimbBackend : public CompletionBackend {
 public:
  explicit HillClimbBackend(SyntheticTask task, double rate = 0.7)
      : task_(std::move(task)), rate_(rate) {}
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodeParams& params) override;

 private:
  SyntheticTask task_;
  double rate_;
};

enum class FaultKind { MalformedProposal, TimeoutArtifact, GarbageArtifact };

// Wraps a backend and substitutes faulty replies at scheduled call indices,
// exercising the re-ask, debug-retry, and pruning paths.
class FaultInjectingBackend : public CompletionBackend {
 public:
  FaultInjectingBackend(std::shared_ptr<CompletionBackend> inner,
                        std::map<std::size_t, FaultKind> faults, double timeout_sleep_ms = 60000)
      : inner_(std::move(inner)), faults_(std::move(faults)), timeout_sleep_ms_(timeout_sleep_ms) {}

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodeParams& params) override;
  std::string state() const override { return std::to_string(calls_) + ";" + inner_->state(); }
  void restore_state(const std::string& s) override;

 private:
  std::shared_ptr<CompletionBackend> inner_;
  std::map<std::size_t, FaultKind> faults_;
  double timeout_sleep_ms_;
  std::size_t calls_ = 0;
};

std::shared_ptr<CompletionBackend> scripted_hill_climber(const SyntheticTask& task,
                                                         double rate = 0.7);

}  // namespace evoforest
