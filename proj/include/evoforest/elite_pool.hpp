#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "evoforest/features.hpp"
#include "evoforest/forest.hpp"

namespace evoforest {

struct EliteTrajectory {
  Trajectory trajectory;
  std::string source_tree;
  std::uint64_t admitted_epoch = 0;
  FeatureVector feature_vector;
};

struct EliteModificationStats {
  std::string key;
  double mean_gain = 0.0;
  double variance = 0.0;  // population variance of observed delta rewards
  std::uint64_t count = 0;
  double value = 0.0;
};

// Modification value combining effectiveness, consistency, and confidence:
//   value = mean * (0.5 + 0.5 * sigmoid(-var + ln(1 + n)))
double modification_value(double mean, double variance, std::uint64_t count);

struct AdmissionResult {
  bool admitted = false;
  std::string reason;  // set when rejected
};

// Global cross-lineage memory: top-k trajectories forest-wide plus
// statistically scored modification keys.
class ElitePool {
 public:
  explicit ElitePool(std::size_t k = 16, std::size_t stats_cap = 0)
      : k_(k), stats_cap_(stats_cap) {}

  const EliteModificationStats& record_modification(const std::string& key, double delta_reward);

  AdmissionResult maybe_admit_trajectory(const Trajectory& traj, std::uint64_t epoch = 0);

  // Draws up to `count` trajectories without replacement, weight
  // max(cosine(query, fv), eps). Deterministic under a fixed rng.
  std::vector<EliteTrajectory> sample_trajectories(const FeatureVector& query, std::size_t count,
                                                   std::mt19937_64& rng) const;

  std::vector<EliteModificationStats> top_modifications(std::size_t count) const;

  const std::vector<EliteTrajectory>& trajectories() const { return entries_; }
  const std::map<std::string, EliteModificationStats>& modification_stats() const {
    return stats_;
  }
  std::size_t k() const { return k_; }
  double min_final_reward() const;
  std::optional<EliteTrajectory> best() const;

  // Checkpoint support.
  void restore_trajectory(EliteTrajectory t) { entries_.push_back(std::move(t)); }
  void restore_stats(EliteModificationStats s, double m2) {
    welford_m2_[s.key] = m2;
    stats_[s.key] = std::move(s);
  }
  double welford_m2(const std::string& key) const { return welford_m2_.at(key); }
  std::uint64_t admissions() const { return admissions_; }
  void set_admissions(std::uint64_t a) { admissions_ = a; }

 private:
  std::size_t k_;
  std::size_t stats_cap_;  // 0 = unbounded
  std::vector<EliteTrajectory> entries_;
  std::map<std::string, EliteModificationStats> stats_;
  std::map<std::string, double> welford_m2_;
  std::uint64_t admissions_ = 0;  // admission order for tie-breaking
};

FeatureVector trajectory_features(const Trajectory& traj);

}  // namespace evoforest
