#include "evoforest/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace evoforest {

namespace {
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Key>
Key draw_weighted(const std::vector<std::pair<Key, double>>& weighted, std::mt19937_64& rng) {
  double total = 0.0;
  for (const auto& [_, w] : weighted) total += w;
  double u = uniform01(rng) * total;
  double acc = 0.0;
  for (const auto& [key, w] : weighted) {
    acc += w;
    if (u < acc) return key;
  }
  return weighted.back().first;
}
}  // namespace

bool node_sampleable(const AlgorithmNode& node) {
  return node.status.success();
}

std::map<std::string, double> node_probabilities(const PhyloTree& tree,
                                                 const SamplingParams& params) {
  std::vector<std::pair<std::string, double>> logits;
  for (const auto& [id, n] : tree.nodes) {
    if (!node_sampleable(n)) continue;
    const double depth_bonus = 1.0 / (static_cast<double>(n.depth) + 1.0);
    logits.emplace_back(
        id, (params.alpha * n.reward + params.beta * n.delta_reward + params.gamma * depth_bonus) /
                params.temperature);
  }
  if (logits.empty()) throw SamplingError("tree " + tree.id + " has no sampleable node");

  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& [_, l] : logits) max_logit = std::max(max_logit, l);
  double total = 0.0;
  std::map<std::string, double> probs;
  for (const auto& [id, l] : logits) {
    const double e = std::exp(l - max_logit);
    probs[id] = e;
    total += e;
  }
  for (auto& [_, p] : probs) p /= total;
  return probs;
}

std::string sample_node(const PhyloTree& tree, const SamplingParams& params,
                        std::mt19937_64& rng) {
  auto probs = node_probabilities(tree, params);
  std::vector<std::pair<std::string, double>> weighted(probs.begin(), probs.end());
  return draw_weighted(weighted, rng);
}

FeatureVector tree_features(const PhyloTree& tree) {
  std::string text;
  for (const auto& [_, n] : tree.nodes) {
    if (!n.status.success()) continue;
    text += n.modification_summary;
    text += ' ';
  }
  return feature_vector(text);
}

double tree_potential(const PhyloTree& tree, std::size_t window) {
  std::vector<const AlgorithmNode*> added;
  for (const auto& [_, n] : tree.nodes) {
    if (n.parent_id && n.status.success()) added.push_back(&n);
  }
  if (added.empty() || window == 0) return 0.0;
  std::sort(added.begin(), added.end(),
            [](const AlgorithmNode* a, const AlgorithmNode* b) { return a->created_at < b->created_at; });
  const std::size_t take = std::min(window, added.size());
  double sum = 0.0;
  for (std::size_t i = added.size() - take; i < added.size(); ++i) sum += added[i]->delta_reward;
  return sum / static_cast<double>(take);
}

double tree_score(const PhyloTree& tree, const Forest& forest, const TreeScoreWeights& weights) {
  double perf = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [_, n] : tree.nodes) {
    if (n.status.success()) best = std::max(best, n.reward);
  }
  if (best > -std::numeric_limits<double>::infinity()) perf = best;

  const double potential = tree_potential(tree, weights.window);

  double diversity = 1.0;
  if (forest.trees().size() > 1) {
    const FeatureVector own = tree_features(tree);
    double max_sim = 0.0;
    for (const auto& [tid, other] : forest.trees()) {
      if (tid == tree.id) continue;
      max_sim = std::max(max_sim, cosine(own, tree_features(other)));
    }
    diversity = 1.0 - max_sim;
  }

  return weights.w1 * perf + weights.w2 * potential + weights.w3 * diversity;
}

std::string sample_tree(const Forest& forest, const TreeScoreWeights& weights,
                        const SamplingParams& params, std::mt19937_64& rng) {
  std::vector<std::pair<std::string, double>> scores;
  for (const auto& [tid, tree] : forest.trees()) {
    bool viable = false;
    for (const auto& [_, n] : tree.nodes) {
      if (node_sampleable(n)) {
        viable = true;
        break;
      }
    }
    if (viable) scores.emplace_back(tid, tree_score(tree, forest, weights) / params.temperature);
  }
  if (scores.empty()) throw SamplingError("no viable tree in forest");

  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& [_, s] : scores) max_logit = std::max(max_logit, s);
  for (auto& [_, s] : scores) s = std::exp(s - max_logit);
  return draw_weighted(scores, rng);
}

double forest_diversity(const Forest& forest) {
  const auto& trees = forest.trees();
  if (trees.size() <= 1) return 1.0;
  std::vector<FeatureVector> fvs;
  fvs.reserve(trees.size());
  for (const auto& [_, t] : trees) fvs.push_back(tree_features(t));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < fvs.size(); ++i) {
    for (std::size_t j = i + 1; j < fvs.size(); ++j) {
      sum += 1.0 - cosine(fvs[i], fvs[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace evoforest
