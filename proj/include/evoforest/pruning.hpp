#pragma once

#include <string>
#include <vector>

#include "evoforest/forest.hpp"
#include "evoforest/sampling.hpp"

namespace evoforest {

// Retention-score weights; depth_decay drives the recency weighting of r_weighted.
struct RetentionWeights {
  double alpha = 0.5;
  double beta = 0.3;
  double gamma = 0.2;
  double depth_decay = 0.8;  // lambda in (0, 1]
  std::size_t window = 5;    // potential-term window, as in tree scoring
};

struct PruneEvent {
  std::string tree_id;
  std::string node_id;
  std::string reason;  // {hopeless, low_potential}
};

// Tombstones every maximal subtree (strictly below the root) whose live nodes
// all have delta_reward < 0, keeping one node per subtree -- the failure with
// the largest |delta_reward| -- as an annotated Failed retention example.
// Returns the pruned subtree roots.
std::vector<PruneEvent> prune_hopeless(Forest& forest, const std::string& tree_id);

// Tombstones stale success leaves: delta_reward >= 0, reward below the p-th
// percentile of the tree's success rewards, and childless for at least
// `stagnation_rounds` epochs since creation.
std::vector<PruneEvent> prune_low_potential(Forest& forest, const std::string& tree_id,
                                            std::uint64_t stagnation_rounds, double percentile);

// Composite retention score: alpha*norm(r_best) + beta*norm(r_weighted) +
// gamma*potential, min-max normalized across the forest (all-equal => 0.5).
double retain_score(const PhyloTree& tree, const Forest& forest, const RetentionWeights& weights);

// Removes lowest-retention trees until |trees| <= capacity; never removes the
// tree holding the forest-wide best node. Ties evict the older tree first.
std::vector<std::string> prune_forest(Forest& forest, const RetentionWeights& weights);

}  // namespace evoforest
