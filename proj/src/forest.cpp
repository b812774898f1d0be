#include "evoforest/forest.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <functional>
#include <sstream>

namespace evoforest {

namespace {

std::string format_reward(double r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", r);
  return buf;
}

std::string escape_quoted(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string status_token(const NodeStatus& st) {
  switch (st.state) {
    case NodeState::Success: return "success";
    case NodeState::Failed: return "failed";
    case NodeState::Pruned: return "pruned";
  }
  return "success";
}

}  // namespace

const AlgorithmNode& PhyloTree::node(const std::string& node_id) const {
  auto it = nodes.find(node_id);
  if (it == nodes.end()) throw ForestError("unknown node: " + node_id);
  return it->second;
}

AlgorithmNode& PhyloTree::node(const std::string& node_id) {
  auto it = nodes.find(node_id);
  if (it == nodes.end()) throw ForestError("unknown node: " + node_id);
  return it->second;
}

const std::vector<std::string>& PhyloTree::children_of(const std::string& node_id) const {
  static const std::vector<std::string> kEmpty;
  auto it = children.find(node_id);
  return it == children.end() ? kEmpty : it->second;
}

std::string normalize_modification_key(const std::string& summary) {
  std::string key;
  key.reserve(summary.size());
  bool pending_space = false;
  for (unsigned char c : summary) {
    if (c == '.' || c == '!' || c == '?') break;  // first sentence only
    if (std::isspace(c)) {
      pending_space = !key.empty();
      continue;
    }
    if (pending_space) {
      key.push_back(' ');
      pending_space = false;
    }
    key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key.size() > 120) key.resize(120);
  return key;
}

std::string Forest::create_tree(const std::string& seed_code, const EvalResult& eval,
                                TreeOrigin origin, const std::string& label) {
  PhyloTree tree;
  tree.id = "t" + std::to_string(next_tree_++);
  tree.meta.label = label.empty() ? tree.id : label;
  tree.meta.creation_epoch = epoch_;
  tree.meta.origin = origin;

  AlgorithmNode root;
  root.id = "n" + std::to_string(next_node_++);
  root.code = seed_code;
  root.modification_summary = "seed";
  root.modification_key = "seed";
  root.reward = eval.ok() ? eval.score : kFailureSentinel;
  root.delta_reward = 0.0;  // root convention
  root.depth = 0;
  root.constraint_ok = eval.constraint_ok;
  root.created_at = created_counter_++;
  root.created_epoch = epoch_;
  if (eval.ok()) {
    root.metrics["score"] = eval.score;
  } else {
    root.status = {NodeState::Failed, eval.reason};
  }
  root.metrics["runtime_ms"] = eval.runtime_ms;

  tree.root_id = root.id;
  tree.children[root.id] = {};
  tree.nodes.emplace(root.id, std::move(root));
  const std::string id = tree.id;
  trees_.emplace(id, std::move(tree));
  return id;
}

std::string Forest::add_child(const std::string& tree_id, const std::string& parent_id,
                              const std::string& code, const ChildSpec& spec,
                              const EvalResult& eval) {
  PhyloTree& t = tree(tree_id);
  const AlgorithmNode& parent = t.node(parent_id);
  if (parent.status.pruned())
    throw ForestError("parent " + parent_id + " is pruned; resample");

  AlgorithmNode child;
  child.id = "n" + std::to_string(next_node_++);
  child.parent_id = parent_id;
  child.code = code;
  child.modification_summary = spec.modification_summary;
  child.modification_key = spec.modification_key.empty()
                               ? normalize_modification_key(spec.modification_summary)
                               : spec.modification_key;
  child.detailed_spec = spec.detailed_spec;
  auto [r, dr] = reward_from(eval, parent.reward);
  child.reward = r;
  child.delta_reward = dr;
  child.depth = parent.depth + 1;
  child.constraint_ok = eval.constraint_ok;
  child.created_at = created_counter_++;
  child.created_epoch = epoch_;
  if (eval.ok()) {
    child.metrics["score"] = eval.score;
  } else {
    child.status = {NodeState::Failed, eval.reason};
  }
  child.metrics["runtime_ms"] = eval.runtime_ms;

  const std::string id = child.id;
  t.children[parent_id].push_back(id);
  t.children[id] = {};
  t.nodes.emplace(id, std::move(child));
  return id;
}

Trajectory Forest::trajectory(const std::string& tree_id, const std::string& node_id) const {
  const PhyloTree& t = tree(tree_id);
  std::vector<const AlgorithmNode*> path;
  const AlgorithmNode* cur = &t.node(node_id);
  path.push_back(cur);
  while (cur->parent_id) {
    cur = &t.node(*cur->parent_id);
    path.push_back(cur);
  }
  std::reverse(path.begin(), path.end());

  Trajectory traj;
  traj.tree_id = tree_id;
  for (const AlgorithmNode* n : path)
    traj.steps.push_back({n->id, n->modification_summary, n->delta_reward});
  traj.final_reward = path.back()->reward;
  traj.terminal_success = path.back()->status.success();
  return traj;
}

std::vector<const AlgorithmNode*> Forest::siblings(const std::string& tree_id,
                                                   const std::string& node_id) const {
  const PhyloTree& t = tree(tree_id);
  const AlgorithmNode& n = t.node(node_id);
  std::vector<const AlgorithmNode*> out;
  if (!n.parent_id) return out;
  for (const auto& sib_id : t.children_of(*n.parent_id)) {
    if (sib_id != node_id) out.push_back(&t.node(sib_id));
  }
  return out;
}

std::optional<std::string> Forest::best_node(const std::string& tree_id) const {
  const PhyloTree& t = tree(tree_id);
  const AlgorithmNode* best = nullptr;
  for (const auto& [id, n] : t.nodes) {
    if (!n.status.success()) continue;
    if (!best || n.reward > best->reward ||
        (n.reward == best->reward && n.created_at < best->created_at)) {
      best = &n;
    }
  }
  if (!best) return std::nullopt;
  return best->id;
}

std::optional<std::pair<std::string, std::string>> Forest::best_in_forest() const {
  std::optional<std::pair<std::string, std::string>> best;
  const AlgorithmNode* best_node_ptr = nullptr;
  for (const auto& [tid, t] : trees_) {
    auto nid = best_node(tid);
    if (!nid) continue;
    const AlgorithmNode& n = t.node(*nid);
    if (!best_node_ptr || n.reward > best_node_ptr->reward ||
        (n.reward == best_node_ptr->reward && n.created_at < best_node_ptr->created_at)) {
      best_node_ptr = &n;
      best = {{tid, *nid}};
    }
  }
  return best;
}

void Forest::tombstone_subtree(const std::string& tree_id, const std::string& node_id,
                               const std::string& reason) {
  PhyloTree& t = tree(tree_id);
  std::vector<std::string> stack{node_id};
  while (!stack.empty()) {
    std::string id = stack.back();
    stack.pop_back();
    AlgorithmNode& n = t.node(id);
    if (!n.status.pruned()) {
      n.status = {NodeState::Pruned, reason};
      n.pruned_epoch = epoch_;
    }
    for (const auto& c : t.children_of(id)) stack.push_back(c);
  }
}

void Forest::compact_tombstones(std::uint64_t horizon_epoch) {
  for (auto& [tid, t] : trees_) {
    // A subtree is removable only when every node in it is an old tombstone;
    // retained informative failures keep their pruned ancestors in place.
    std::map<std::string, bool> removable;
    std::function<void(const std::string&)> scan = [&](const std::string& id) {
      const AlgorithmNode& n = t.node(id);
      bool r = n.status.pruned() && n.pruned_epoch <= horizon_epoch;
      for (const auto& c : t.children_of(id)) {
        scan(c);
        if (!removable.at(c)) r = false;
      }
      removable[id] = r;
    };
    scan(t.root_id);

    std::vector<std::string> to_remove;
    for (const auto& [id, n] : t.nodes) {
      if (id == t.root_id || !removable.at(id)) continue;
      if (removable.at(*n.parent_id)) continue;  // not maximal
      to_remove.push_back(id);
    }
    for (const auto& root : to_remove) {
      std::vector<std::string> stack{root};
      std::vector<std::string> subtree;
      while (!stack.empty()) {
        std::string id = stack.back();
        stack.pop_back();
        subtree.push_back(id);
        for (const auto& c : t.children_of(id)) stack.push_back(c);
      }
      auto& sibs = t.children[*t.node(root).parent_id];
      sibs.erase(std::remove(sibs.begin(), sibs.end(), root), sibs.end());
      for (const auto& id : subtree) {
        t.children.erase(id);
        t.nodes.erase(id);
      }
    }
  }
}

void Forest::remove_tree(const std::string& tree_id) {
  if (trees_.erase(tree_id) == 0) throw ForestError("unknown tree: " + tree_id);
}

const PhyloTree& Forest::tree(const std::string& tree_id) const {
  auto it = trees_.find(tree_id);
  if (it == trees_.end()) throw ForestError("unknown tree: " + tree_id);
  return it->second;
}

PhyloTree& Forest::tree(const std::string& tree_id) {
  auto it = trees_.find(tree_id);
  if (it == trees_.end()) throw ForestError("unknown tree: " + tree_id);
  return it->second;
}

void Forest::adopt_tree(PhyloTree tree) {
  if (trees_.count(tree.id)) throw ForestError("duplicate tree id: " + tree.id);
  trees_.emplace(tree.id, std::move(tree));
}

// ---------------------------------------------------------------------------
// S-expression serialization

namespace {

void write_node(const PhyloTree& tree, const std::string& id, bool include_pruned, int indent,
                std::string& out) {
  const AlgorithmNode& n = tree.node(id);
  out.append(static_cast<std::size_t>(indent), ' ');
  out += "(node :id " + n.id + " :r " + format_reward(n.reward) + " :dr " +
         format_reward(n.delta_reward) + " :mod \"" + escape_quoted(n.modification_summary) +
         "\" :status " + status_token(n.status);
  std::vector<std::string> kids;
  for (const auto& c : tree.children_of(id)) {
    if (include_pruned || !tree.node(c).status.pruned()) kids.push_back(c);
  }
  for (const auto& c : kids) {
    out += "\n";
    write_node(tree, c, include_pruned, indent + 2, out);
  }
  out += ")";
}

struct SexprParser {
  const std::string& text;
  std::size_t pos = 0;

  explicit SexprParser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  char peek() {
    if (pos >= text.size()) throw SexprParseError("unexpected end of input", pos);
    return text[pos];
  }
  void expect(char c) {
    if (pos >= text.size() || text[pos] != c)
      throw SexprParseError(std::string("expected '") + c + "'", pos);
    ++pos;
  }
  std::string atom() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')') {
      ++pos;
    }
    if (pos == start) throw SexprParseError("expected atom", pos);
    return text.substr(start, pos - start);
  }
  std::string quoted() {
    skip_ws();
    expect('"');
    std::string out;
    while (true) {
      if (pos >= text.size()) throw SexprParseError("unterminated string", pos);
      char c = text[pos++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos >= text.size()) throw SexprParseError("bad escape", pos);
        char e = text[pos++];
        if (e == 'n') out.push_back('\n');
        else out.push_back(e);
      } else {
        out.push_back(c);
      }
    }
    return out;
  }
  double number(const std::string& field) {
    std::size_t at = pos;
    std::string a = atom();
    try {
      std::size_t used = 0;
      double v = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      return v;
    } catch (const std::exception&) {
      throw SexprParseError("malformed number for " + field, at);
    }
  }

  // Parses one (node ...) form; returns its id.
  std::string node(PhyloTree& tree, const std::optional<std::string>& parent_id, int depth) {
    skip_ws();
    std::size_t open_at = pos;
    expect('(');
    if (atom() != "node") throw SexprParseError("expected 'node'", open_at);

    AlgorithmNode n;
    n.parent_id = parent_id;
    n.depth = depth;
    bool have_id = false, have_r = false, have_dr = false, have_mod = false, have_status = false;
    while (true) {
      skip_ws();
      if (peek() != ':') break;
      std::size_t key_at = pos;
      std::string key = atom();
      if (key == ":id") {
        n.id = atom();
        have_id = true;
      } else if (key == ":r") {
        n.reward = number(":r");
        have_r = true;
      } else if (key == ":dr") {
        n.delta_reward = number(":dr");
        have_dr = true;
      } else if (key == ":mod") {
        n.modification_summary = quoted();
        have_mod = true;
      } else if (key == ":status") {
        std::string s = atom();
        if (s == "success") n.status = {NodeState::Success, ""};
        else if (s == "failed") n.status = {NodeState::Failed, ""};
        else if (s == "pruned") n.status = {NodeState::Pruned, ""};
        else throw SexprParseError("unknown status '" + s + "'", key_at);
        have_status = true;
      } else {
        throw SexprParseError("unknown field '" + key + "'", key_at);
      }
    }
    if (!have_id || !have_r || !have_dr || !have_mod || !have_status)
      throw SexprParseError("missing required node field", open_at);
    if (tree.nodes.count(n.id)) throw SexprParseError("duplicate id '" + n.id + "'", open_at);
    n.modification_key = normalize_modification_key(n.modification_summary);
    n.created_at = tree.nodes.size();
    const std::string id = n.id;
    tree.children[id] = {};
    tree.nodes.emplace(id, std::move(n));

    while (true) {
      skip_ws();
      char c = peek();
      if (c == ')') {
        ++pos;
        break;
      }
      if (c != '(') throw SexprParseError("expected child node or ')'", pos);
      std::string child_id = node(tree, id, depth + 1);
      tree.children[id].push_back(child_id);
    }
    return id;
  }
};

}  // namespace

std::string to_sexpr(const PhyloTree& tree, bool include_pruned) {
  std::string out;
  write_node(tree, tree.root_id, include_pruned, 0, out);
  return out;
}

PhyloTree parse_sexpr(const std::string& text) {
  PhyloTree tree;
  SexprParser p(text);
  tree.root_id = p.node(tree, std::nullopt, 0);
  p.skip_ws();
  if (p.pos != text.size()) throw SexprParseError("trailing content", p.pos);
  tree.id = "t0";
  tree.meta.label = tree.id;
  return tree;
}

std::string to_dot(const PhyloTree& tree) {
  std::ostringstream out;
  out << "digraph tree {\n";
  for (const auto& [id, n] : tree.nodes) {
    out << "  \"" << id << "\" [label=\"" << id << "\\nr=" << format_reward(n.reward) << "\"];\n";
  }
  for (const auto& [id, kids] : tree.children) {
    for (const auto& c : kids) out << "  \"" << id << "\" -> \"" << c << "\";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace evoforest
