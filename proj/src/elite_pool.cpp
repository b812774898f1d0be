#include "evoforest/elite_pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evoforest {

namespace {
constexpr double kSimilarityFloor = 1e-6;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace

double modification_value(double mean, double variance, std::uint64_t count) {
  const double x = -variance + std::log(1.0 + static_cast<double>(count));
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return mean * (0.5 + 0.5 * sig);
}

FeatureVector trajectory_features(const Trajectory& traj) {
  std::string text;
  for (const auto& step : traj.steps) {
    text += step.modification_summary;
    text += ' ';
  }
  return feature_vector(text);
}

const EliteModificationStats& ElitePool::record_modification(const std::string& key,
                                                             double delta_reward) {
  if (key.empty()) throw std::invalid_argument("empty modification key");
  auto& s = stats_[key];
  if (s.count == 0) s.key = key;
  // Welford one-pass update; variance is population (divide by n).
  s.count += 1;
  const double d1 = delta_reward - s.mean_gain;
  s.mean_gain += d1 / static_cast<double>(s.count);
  const double d2 = delta_reward - s.mean_gain;
  welford_m2_[key] += d1 * d2;
  s.variance = welford_m2_[key] / static_cast<double>(s.count);
  s.value = modification_value(s.mean_gain, s.variance, s.count);

  if (stats_cap_ > 0 && stats_.size() > stats_cap_) {
    auto worst = stats_.begin();
    for (auto it = stats_.begin(); it != stats_.end(); ++it) {
      if (it->second.value < worst->second.value) worst = it;
    }
    welford_m2_.erase(worst->first);
    const bool erased_key = worst->first == key;
    stats_.erase(worst);
    if (erased_key) {
      static const EliteModificationStats kGone{};
      return kGone;
    }
  }
  return stats_.at(key);
}

double ElitePool::min_final_reward() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) m = std::min(m, e.trajectory.final_reward);
  return m;
}

std::optional<EliteTrajectory> ElitePool::best() const {
  const EliteTrajectory* best = nullptr;
  for (const auto& e : entries_) {
    if (!best || e.trajectory.final_reward > best->trajectory.final_reward) best = &e;
  }
  if (!best) return std::nullopt;
  return *best;
}

AdmissionResult ElitePool::maybe_admit_trajectory(const Trajectory& traj, std::uint64_t epoch) {
  if (!traj.terminal_success)
    return {false, "trajectory ends at a failed node"};
  if (entries_.size() >= k_) {
    // Weakest = lowest final reward, latest admission on ties.
    auto weakest = entries_.begin();
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->trajectory.final_reward < weakest->trajectory.final_reward ||
          (it->trajectory.final_reward == weakest->trajectory.final_reward &&
           it->admitted_epoch > weakest->admitted_epoch)) {
        weakest = it;
      }
    }
    if (traj.final_reward <= weakest->trajectory.final_reward)
      return {false, "below current k-th best"};
    entries_.erase(weakest);
  }
  EliteTrajectory e;
  e.trajectory = traj;
  e.source_tree = traj.tree_id;
  e.admitted_epoch = epoch * 1000000 + admissions_++;  // admission order within an epoch
  e.feature_vector = trajectory_features(traj);
  entries_.push_back(std::move(e));
  return {true, ""};
}

std::vector<EliteTrajectory> ElitePool::sample_trajectories(const FeatureVector& query,
                                                            std::size_t count,
                                                            std::mt19937_64& rng) const {
  std::vector<EliteTrajectory> out;
  if (entries_.empty() || count == 0) return out;
  std::vector<std::size_t> idx(entries_.size());
  std::vector<double> weight(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    idx[i] = i;
    weight[i] = std::max(cosine(query, entries_[i].feature_vector), kSimilarityFloor);
  }
  std::size_t remaining = idx.size();
  while (out.size() < count && remaining > 0) {
    double total = 0.0;
    for (std::size_t i = 0; i < remaining; ++i) total += weight[i];
    double u = uniform01(rng) * total;
    std::size_t pick = remaining - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < remaining; ++i) {
      acc += weight[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out.push_back(entries_[idx[pick]]);
    std::swap(idx[pick], idx[remaining - 1]);
    std::swap(weight[pick], weight[remaining - 1]);
    --remaining;
  }
  return out;
}

std::vector<EliteModificationStats> ElitePool::top_modifications(std::size_t count) const {
  std::vector<EliteModificationStats> all;
  all.reserve(stats_.size());
  for (const auto& [_, s] : stats_) all.push_back(s);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });
  if (all.size() > count) all.resize(count);
  return all;
}

}  // namespace evoforest
