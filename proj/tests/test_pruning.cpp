#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evoforest/pruning.hpp"

using namespace evoforest;

namespace {

ChildSpec spec(const std::string& summary) {
  return {summary, normalize_modification_key(summary), ""};
}

std::string add(Forest& f, const std::string& tid, const std::string& parent, double score,
                const std::string& summary = "step") {
  return f.add_child(tid, parent, "code", spec(summary), EvalResult::success(score));
}

}  // namespace

TEST_CASE("hopeless branch keeps exactly one informative failure") {
  Forest forest;
  forest.set_epoch(3);
  const std::string tid = forest.create_tree("seed", EvalResult::success(5.0), TreeOrigin::Seed);
  const std::string root = forest.tree(tid).root_id;
  // A productive branch that must survive.
  const std::string good = add(forest, tid, root, 6.0);
  // An all-negative branch: deltas -1, -2, -0.5.
  const std::string b1 = add(forest, tid, root, 4.0);
  const std::string b2 = add(forest, tid, b1, 2.0);
  const std::string b3 = add(forest, tid, b1, 3.5);

  const auto events = prune_hopeless(forest, tid);
  REQUIRE(events.size() == 1);
  CHECK(events[0].node_id == b1);

  const PhyloTree& t = forest.tree(tid);
  CHECK(t.node(good).status.success());
  CHECK(t.node(root).status.success());
  // b2 has the largest |delta| and is kept as a Failed retention example.
  CHECK(t.node(b2).status.state == NodeState::Failed);
  CHECK(t.node(b2).status.reason.find("retained") != std::string::npos);
  CHECK(t.node(b1).status.pruned());
  CHECK(t.node(b3).status.pruned());
  CHECK(t.node(b1).pruned_epoch == 3);

  // Post-scan: no live all-negative subtree remains below the root.
  CHECK(prune_hopeless(forest, tid).empty());
}

TEST_CASE("a positive descendant shields its ancestors from hopeless pruning") {
  Forest forest;
  const std::string tid = forest.create_tree("seed", EvalResult::success(5.0), TreeOrigin::Seed);
  const std::string root = forest.tree(tid).root_id;
  const std::string down = add(forest, tid, root, 4.0);   // delta -1
  const std::string up = add(forest, tid, down, 7.0);     // delta +3 rescues the branch
  CHECK(prune_hopeless(forest, tid).empty());
  CHECK(forest.tree(tid).node(down).status.success());
  CHECK(forest.tree(tid).node(up).status.success());
}

TEST_CASE("the root is never part of a hopeless subtree") {
  Forest forest;
  const std::string tid = forest.create_tree("seed", EvalResult::success(5.0), TreeOrigin::Seed);
  const std::string root = forest.tree(tid).root_id;
  add(forest, tid, root, 1.0);
  const auto events = prune_hopeless(forest, tid);
  CHECK(events.size() == 1);
  CHECK(forest.tree(tid).node(root).status.success());
}

TEST_CASE("low-potential pruning removes stale weak leaves only") {
  Forest forest;
  forest.set_epoch(0);
  const std::string tid = forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  const std::string root = forest.tree(tid).root_id;
  const std::string weak = add(forest, tid, root, 1.0);    // delta 0, low reward leaf
  const std::string mid = add(forest, tid, root, 5.0);
  const std::string strong = add(forest, tid, mid, 9.0);

  // Not yet stale: nothing goes.
  forest.set_epoch(3);
  CHECK(prune_low_potential(forest, tid, 10, 75.0).empty());

  forest.set_epoch(20);
  const auto events = prune_low_potential(forest, tid, 10, 75.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].node_id == weak);
  CHECK(events[0].reason == "low_potential");
  CHECK(forest.tree(tid).node(weak).status.pruned());
  CHECK(forest.tree(tid).node(strong).status.success());
  CHECK(forest.tree(tid).node(root).status.success());  // root exempt
}

TEST_CASE("negative-delta leaves are left for hopeless pruning") {
  Forest forest;
  const std::string tid = forest.create_tree("seed", EvalResult::success(5.0), TreeOrigin::Seed);
  add(forest, tid, forest.tree(tid).root_id, 1.0);  // delta -4 leaf
  forest.set_epoch(100);
  CHECK(prune_low_potential(forest, tid, 10, 99.0).empty());
}

TEST_CASE("retention scores match the hand-walked fixture") {
  Forest forest;
  const std::string ta = forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  const std::string ra = forest.tree(ta).root_id;
  const std::string a1 = add(forest, ta, ra, 2.0, "increase cache blocking");
  add(forest, ta, a1, 4.0, "vectorize inner loop");
  const std::string tb = forest.create_tree("seed", EvalResult::success(2.0), TreeOrigin::Seed);
  add(forest, tb, forest.tree(tb).root_id, 3.0, "increase cache blocking");

  const RetentionWeights w{};  // 0.5/0.3/0.2, decay 0.8, window 5
  CHECK(retain_score(forest.tree(ta), forest, w) == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(retain_score(forest.tree(tb), forest, w) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("all-equal forests normalize each term to one half") {
  Forest forest;
  forest.create_tree("seed", EvalResult::success(3.0), TreeOrigin::Seed);
  forest.create_tree("seed", EvalResult::success(3.0), TreeOrigin::Seed);
  const RetentionWeights w{};
  // potential is 0 for root-only trees: 0.5*0.5 + 0.3*0.5 + 0.2*0 = 0.4.
  CHECK(retain_score(forest.tree("t0"), forest, w) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(retain_score(forest.tree("t1"), forest, w) == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("forest pruning enforces capacity and never evicts the best tree") {
  Forest forest(2);
  forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);   // t0
  forest.create_tree("seed", EvalResult::success(9.0), TreeOrigin::Seed);   // t1: global best
  forest.create_tree("seed", EvalResult::success(2.0), TreeOrigin::Seed);   // t2
  forest.create_tree("seed", EvalResult::success(3.0), TreeOrigin::Seed);   // t3

  const auto removed = prune_forest(forest, RetentionWeights{});
  CHECK(forest.trees().size() == 2);
  CHECK(forest.trees().count("t1") == 1);
  REQUIRE(removed.size() == 2);
  CHECK(removed[0] == "t0");  // lowest retention first
  CHECK(removed[1] == "t2");
}

TEST_CASE("capacity one keeps only the best tree") {
  Forest forest(1);
  forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  forest.create_tree("seed", EvalResult::success(9.0), TreeOrigin::Seed);
  prune_forest(forest, RetentionWeights{});
  REQUIRE(forest.trees().size() == 1);
  CHECK(forest.trees().begin()->first == "t1");
}
