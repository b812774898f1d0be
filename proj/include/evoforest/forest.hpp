#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evoforest/eval_result.hpp"

namespace evoforest {

enum class NodeState { Success, Failed, Pruned };

struct NodeStatus {
  NodeState state = NodeState::Success;
  std::string reason;  // set for Failed and Pruned

  bool success() const { return state == NodeState::Success; }
  bool pruned() const { return state == NodeState::Pruned; }
};

// One concrete candidate: code artifact plus the modification that produced
// it and its reward bookkeeping.
struct AlgorithmNode {
  std::string id;
  std::optional<std::string> parent_id;
  std::string code;
  std::string modification_summary;
  std::string modification_key;
  std::string detailed_spec;
  double reward = 0.0;
  double delta_reward = 0.0;
  std::map<std::string, double> metrics;
  NodeStatus status;
  int depth = 0;
  bool constraint_ok = true;
  std::uint64_t created_at = 0;     // monotonic per-forest counter
  std::uint64_t created_epoch = 0;  // orchestration epoch at creation
  std::uint64_t pruned_epoch = 0;   // epoch at tombstoning (0 if live)
};

enum class TreeOrigin { Seed, Redesign };

struct TreeMeta {
  std::string label;
  std::uint64_t creation_epoch = 0;
  TreeOrigin origin = TreeOrigin::Seed;
};

struct PhyloTree {
  std::string id;
  std::string root_id;
  std::map<std::string, AlgorithmNode> nodes;
  std::map<std::string, std::vector<std::string>> children;  // creation order
  TreeMeta meta;

  const AlgorithmNode& node(const std::string& node_id) const;
  AlgorithmNode& node(const std::string& node_id);
  bool contains(const std::string& node_id) const { return nodes.count(node_id) != 0; }
  const std::vector<std::string>& children_of(const std::string& node_id) const;
};

struct TrajectoryStep {
  std::string node_id;
  std::string modification_summary;
  double delta_reward = 0.0;
};

// Root-to-node path: the in-context learning signal.
struct Trajectory {
  std::string tree_id;
  std::vector<TrajectoryStep> steps;  // root first
  double final_reward = 0.0;
  bool terminal_success = false;
};

struct ChildSpec {
  std::string modification_summary;
  std::string modification_key;
  std::string detailed_spec;
};

class ForestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SexprParseError : public std::runtime_error {
 public:
  SexprParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Lowercase, whitespace-collapsed first sentence, truncated to 120 chars.
std::string normalize_modification_key(const std::string& summary);

class Forest {
 public:
  explicit Forest(std::size_t capacity = 8) : capacity_(capacity) {}

  std::string create_tree(const std::string& seed_code, const EvalResult& eval, TreeOrigin origin,
                          const std::string& label = "");
  std::string add_child(const std::string& tree_id, const std::string& parent_id,
                        const std::string& code, const ChildSpec& spec, const EvalResult& eval);

  Trajectory trajectory(const std::string& tree_id, const std::string& node_id) const;
  std::vector<const AlgorithmNode*> siblings(const std::string& tree_id,
                                             const std::string& node_id) const;

  std::optional<std::string> best_node(const std::string& tree_id) const;
  std::optional<std::pair<std::string, std::string>> best_in_forest() const;

  // Tombstones a whole subtree in place; nodes stay for audit.
  void tombstone_subtree(const std::string& tree_id, const std::string& node_id,
                         const std::string& reason);
  // Physically removes Pruned subtrees tombstoned at or before `horizon_epoch`.
  void compact_tombstones(std::uint64_t horizon_epoch);
  void remove_tree(const std::string& tree_id);

  const PhyloTree& tree(const std::string& tree_id) const;
  PhyloTree& tree(const std::string& tree_id);
  const std::map<std::string, PhyloTree>& trees() const { return trees_; }
  std::map<std::string, PhyloTree>& trees() { return trees_; }

  std::size_t capacity() const { return capacity_; }
  void set_capacity(std::size_t c) { capacity_ = c; }
  std::uint64_t epoch() const { return epoch_; }
  void set_epoch(std::uint64_t e) { epoch_ = e; }

  // Id counters are exposed for checkpointing.
  std::uint64_t next_node_counter() const { return next_node_; }
  std::uint64_t next_tree_counter() const { return next_tree_; }
  std::uint64_t created_counter() const { return created_counter_; }
  void restore_counters(std::uint64_t next_node, std::uint64_t next_tree,
                        std::uint64_t created_counter) {
    next_node_ = next_node;
    next_tree_ = next_tree;
    created_counter_ = created_counter;
  }
  void adopt_tree(PhyloTree tree);

 private:
  std::map<std::string, PhyloTree> trees_;
  std::size_t capacity_;
  std::uint64_t epoch_ = 0;
  std::uint64_t next_node_ = 0;
  std::uint64_t next_tree_ = 0;
  std::uint64_t created_counter_ = 0;
};

// Canonical S-expression view:
//   (node :id n0 :r 1.000000 :dr 0.000000 :mod "seed" :status success (child...) ...)
// Children in creation order, rewards at fixed 6 decimals, Pruned nodes
// omitted unless include_pruned is set.
std::string to_sexpr(const PhyloTree& tree, bool include_pruned = false);
PhyloTree parse_sexpr(const std::string& text);

// DOT export for inspection tooling.
std::string to_dot(const PhyloTree& tree);

}  // namespace evoforest
