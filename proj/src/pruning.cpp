#include "evoforest/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace evoforest {

namespace {

bool live(const AlgorithmNode& n) { return !n.status.pruned(); }

// all_neg[id]: every live node in the subtree has delta_reward < 0.
void compute_all_neg(const PhyloTree& tree, const std::string& id,
                     std::map<std::string, bool>& all_neg) {
  const AlgorithmNode& n = tree.node(id);
  bool neg = live(n) && n.delta_reward < 0.0;
  for (const auto& c : tree.children_of(id)) {
    compute_all_neg(tree, c, all_neg);
    if (live(tree.node(c)) && !all_neg.at(c)) neg = false;
  }
  all_neg[id] = neg;
}

void collect_live(const PhyloTree& tree, const std::string& id, std::vector<std::string>& out) {
  if (live(tree.node(id))) out.push_back(id);
  for (const auto& c : tree.children_of(id)) collect_live(tree, c, out);
}

struct TreeRewardStats {
  double r_best;
  double r_weighted;
};

TreeRewardStats reward_stats(const PhyloTree& tree, double depth_decay) {
  double best = -std::numeric_limits<double>::infinity();
  int max_depth = 0;
  bool any = false;
  for (const auto& [_, n] : tree.nodes) {
    if (!n.status.success()) continue;
    any = true;
    best = std::max(best, n.reward);
    max_depth = std::max(max_depth, n.depth);
  }
  if (!any) return {kFailureSentinel, kFailureSentinel};
  double num = 0.0, den = 0.0;
  for (const auto& [_, n] : tree.nodes) {
    if (!n.status.success()) continue;
    const double w = std::pow(depth_decay, max_depth - n.depth);
    num += w * n.reward;
    den += w;
  }
  return {best, num / den};
}

// min-max over the forest; all values equal => 0.5.
double min_max_norm(double v, double lo, double hi) {
  if (hi <= lo) return 0.5;
  return (v - lo) / (hi - lo);
}

}  // namespace

std::vector<PruneEvent> prune_hopeless(Forest& forest, const std::string& tree_id) {
  PhyloTree& tree = forest.tree(tree_id);
  std::map<std::string, bool> all_neg;
  compute_all_neg(tree, tree.root_id, all_neg);

  // Maximal all-negative subtrees strictly below the root.
  std::vector<std::string> roots;
  std::vector<std::string> stack{tree.root_id};
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    for (const auto& c : tree.children_of(id)) {
      if (!live(tree.node(c))) continue;
      if (all_neg.at(c)) {
        roots.push_back(c);
      } else {
        stack.push_back(c);
      }
    }
  }

  std::vector<PruneEvent> events;
  for (const auto& sub_root : roots) {
    std::vector<std::string> members;
    collect_live(tree, sub_root, members);
    if (members.empty()) continue;
    // Keep the most informative failure: largest |delta|, earliest on ties.
    std::string keep = members.front();
    for (const auto& id : members) {
      const AlgorithmNode& n = tree.node(id);
      const AlgorithmNode& k = tree.node(keep);
      if (std::fabs(n.delta_reward) > std::fabs(k.delta_reward) ||
          (std::fabs(n.delta_reward) == std::fabs(k.delta_reward) && n.created_at < k.created_at)) {
        keep = id;
      }
    }
    for (const auto& id : members) {
      AlgorithmNode& n = tree.node(id);
      if (id == keep) {
        n.status = {NodeState::Failed, "retained informative failure (hopeless branch)"};
      } else {
        n.status = {NodeState::Pruned, "hopeless"};
        n.pruned_epoch = forest.epoch();
      }
    }
    events.push_back({tree_id, sub_root, "hopeless"});
  }
  return events;
}

std::vector<PruneEvent> prune_low_potential(Forest& forest, const std::string& tree_id,
                                            std::uint64_t stagnation_rounds, double percentile) {
  PhyloTree& tree = forest.tree(tree_id);
  std::vector<double> rewards;
  for (const auto& [_, n] : tree.nodes) {
    if (n.status.success()) rewards.push_back(n.reward);
  }
  if (rewards.empty()) return {};
  std::sort(rewards.begin(), rewards.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(rewards.size())));
  const double threshold = rewards[rank == 0 ? 0 : rank - 1];

  std::vector<PruneEvent> events;
  for (auto& [id, n] : tree.nodes) {
    if (id == tree.root_id || !n.status.success()) continue;
    if (!tree.children_of(id).empty()) continue;
    if (n.delta_reward < 0.0) continue;
    if (n.reward >= threshold) continue;
    if (forest.epoch() < n.created_epoch + stagnation_rounds) continue;
    n.status = {NodeState::Pruned, "low_potential"};
    n.pruned_epoch = forest.epoch();
    events.push_back({tree_id, id, "low_potential"});
  }
  return events;
}

double retain_score(const PhyloTree& tree, const Forest& forest, const RetentionWeights& weights) {
  double best_lo = std::numeric_limits<double>::infinity();
  double best_hi = -std::numeric_limits<double>::infinity();
  double wavg_lo = std::numeric_limits<double>::infinity();
  double wavg_hi = -std::numeric_limits<double>::infinity();
  TreeRewardStats own{};
  for (const auto& [tid, t] : forest.trees()) {
    const TreeRewardStats s = reward_stats(t, weights.depth_decay);
    best_lo = std::min(best_lo, s.r_best);
    best_hi = std::max(best_hi, s.r_best);
    wavg_lo = std::min(wavg_lo, s.r_weighted);
    wavg_hi = std::max(wavg_hi, s.r_weighted);
    if (tid == tree.id) own = s;
  }
  const double potential = tree_potential(tree, weights.window);
  return weights.alpha * min_max_norm(own.r_best, best_lo, best_hi) +
         weights.beta * min_max_norm(own.r_weighted, wavg_lo, wavg_hi) +
         weights.gamma * potential;
}

std::vector<std::string> prune_forest(Forest& forest, const RetentionWeights& weights) {
  std::vector<std::string> removed;
  while (forest.trees().size() > forest.capacity()) {
    std::string protected_tree;
    if (auto best = forest.best_in_forest()) protected_tree = best->first;

    std::string victim;
    double victim_score = 0.0;
    std::uint64_t victim_epoch = 0;
    for (const auto& [tid, t] : forest.trees()) {
      if (tid == protected_tree) continue;
      const double score = retain_score(t, forest, weights);
      const bool better = victim.empty() || score < victim_score ||
                          (score == victim_score && t.meta.creation_epoch < victim_epoch);
      if (better) {
        victim = tid;
        victim_score = score;
        victim_epoch = t.meta.creation_epoch;
      }
    }
    if (victim.empty()) break;  // only the protected tree remains
    forest.remove_tree(victim);
    removed.push_back(victim);
  }
  return removed;
}

}  // namespace evoforest
