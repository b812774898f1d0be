#pragma once

#include <string>

namespace evoforest {

// Reward assigned to failed candidates; low enough that max-based selection
// never picks them.
inline constexpr double kFailureSentinel = -1e18;

enum class EvalStatus { Success, Failure };

// Structured outcome of one sandboxed evaluation: a scalar score on success,
// a reason on failure.
struct EvalResult {
  EvalStatus status = EvalStatus::Failure;
  std::string reason;    // required iff Failure
  double score = 0.0;    // required iff Success
  double runtime_ms = 0.0;
  bool constraint_ok = true;
  std::string logs;      // bounded tail of child output

  bool ok() const { return status == EvalStatus::Success; }

  static EvalResult success(double score, double runtime_ms = 0.0) {
    EvalResult r;
    r.status = EvalStatus::Success;
    r.score = score;
    r.runtime_ms = runtime_ms;
    return r;
  }
  static EvalResult failure(std::string reason, double runtime_ms = 0.0) {
    EvalResult r;
    r.status = EvalStatus::Failure;
    r.reason = std::move(reason);
    r.runtime_ms = runtime_ms;
    return r;
  }
};

// Maps an evaluation onto (r, delta_r) against the parent's reward.
inline std::pair<double, double> reward_from(const EvalResult& result, double parent_reward) {
  const double r = result.ok() ? result.score : kFailureSentinel;
  return {r, r - parent_reward};
}

}  // namespace evoforest
