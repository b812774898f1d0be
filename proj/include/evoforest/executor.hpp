#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "evoforest/eval_result.hpp"

namespace evoforest {

struct ResourceLimits {
  double wall_clock_s = 10.0;
  std::uint64_t memory_bytes = 512ull * 1024 * 1024;
};

enum class EvalMode { DryRun, Full };

struct EvalRequest {
  std::string code;
  std::string task_ref;
  ResourceLimits limits;
  EvalMode mode = EvalMode::Full;
};

struct ConstraintResult {
  bool ok = true;
  std::string reason;
};

using ConstraintChecker = std::function<ConstraintResult(const std::string& code)>;

// A registered evaluation harness. The child receives the candidate artifact
// path as argv[1] and the task data directory as argv[2]; success means exit 0
// plus a final stdout line `SCORE <decimal>`.
struct TaskBinding {
  std::vector<std::string> harness_argv;  // harness executable (plus fixed options)
  std::string task_dir;
  ConstraintChecker constraints;  // optional
};

// Optional container backend: harness runs inside `docker run`.
struct ContainerConfig {
  std::string image;
  std::vector<std::string> mounts;        // host:container pairs
  std::vector<std::string> env_allowlist; // names passed through
};

class Executor {
 public:
  void register_task(const std::string& task_ref, TaskBinding binding);
  bool has_task(const std::string& task_ref) const;

  // Runs the candidate in an isolated child process with both limits
  // enforced. Thread-safe; all failures are returned as values.
  EvalResult evaluate(const EvalRequest& request) const;

  void set_container(std::optional<ContainerConfig> config) { container_ = std::move(config); }

 private:
  std::map<std::string, TaskBinding> tasks_;
  std::optional<ContainerConfig> container_;
  mutable std::mutex mutex_;
};

}  // namespace evoforest
