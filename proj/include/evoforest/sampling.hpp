#pragma once

#include <map>
#include <random>
#include <string>

#include "evoforest/features.hpp"
#include "evoforest/forest.hpp"

namespace evoforest {

// Node selection: p(n) ~ exp((alpha*r + beta*dr + gamma/(d+1)) / T).
struct SamplingParams {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.25;
  double temperature = 1.0;
};

// Tree selection: score = w1*perf + w2*potential + w3*diversity.
struct TreeScoreWeights {
  double w1 = 0.5;
  double w2 = 0.3;
  double w3 = 0.2;
  std::size_t window = 5;  // trailing-delta window for the potential term
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool node_sampleable(const AlgorithmNode& node);

// Softmax over sampleable nodes, max-subtracted for stability. Throws
// SamplingError when the tree has no sampleable node.
std::map<std::string, double> node_probabilities(const PhyloTree& tree,
                                                 const SamplingParams& params);

std::string sample_node(const PhyloTree& tree, const SamplingParams& params,
                        std::mt19937_64& rng);

// Aggregate term-frequency vector over a tree's success-node summaries.
FeatureVector tree_features(const PhyloTree& tree);

// Mean delta reward over the last `window` non-root success additions; 0 if none.
double tree_potential(const PhyloTree& tree, std::size_t window);

double tree_score(const PhyloTree& tree, const Forest& forest, const TreeScoreWeights& weights);

// Softmax over tree scores at params.temperature, restricted to trees with a
// sampleable node. Throws SamplingError when no tree is viable.
std::string sample_tree(const Forest& forest, const TreeScoreWeights& weights,
                        const SamplingParams& params, std::mt19937_64& rng);

// Mean pairwise (1 - cosine) across tree feature vectors; 1 for a single tree.
double forest_diversity(const Forest& forest);

}  // namespace evoforest
