// Acceptance gate: every release criterion runs here, one pass/fail line
// each. The binary exits nonzero if any criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evoforest/features.hpp"
#include "evoforest/orchestrator.hpp"
#include "evoforest/testbed.hpp"

using namespace evoforest;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const char* name, bool ok, const std::string& detail = "") {
  std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name, detail.empty() ? "" : " -- ",
              detail.c_str());
  if (!ok) ++g_failures;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

ChildSpec spec(const std::string& summary) {
  return {summary, normalize_modification_key(summary), ""};
}

// ---------------------------------------------------------------------------
// Criterion 1: modification value statistic.
// Oracle written independently of the library: tanh-based sigmoid.
void criterion_value_statistic() {
  Timer timer;
  auto oracle = [](double mean, double var, double n) {
    const double x = -var + std::log1p(n);
    const double sig = 0.5 * (1.0 + std::tanh(0.5 * x));
    return mean * (0.5 + 0.5 * sig);
  };

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> means(-5.0, 5.0);
  std::uniform_real_distribution<double> vars(0.0, 10.0);
  std::uniform_int_distribution<std::uint64_t> counts(1, 1000);

  bool ok = true;
  std::string detail;
  for (int i = 0; i < 10000 && ok; ++i) {
    const double m = means(rng), v = vars(rng);
    const std::uint64_t n = counts(rng);
    const double got = modification_value(m, v, n);
    const double want = oracle(m, v, static_cast<double>(n));
    if (!close(got, want, 1e-9)) {
      ok = false;
      detail = "mismatch at mean=" + std::to_string(m) + " var=" + std::to_string(v) +
               " n=" + std::to_string(n);
    }
  }

  // Monotone in evidence; strictly inside (mean/2, mean) for positive means.
  for (double m : {0.5, 2.0}) {
    for (double v : {0.0, 1.0, 4.0}) {
      double prev = -1e300;
      for (std::uint64_t n = 1; n <= 512; n *= 2) {
        const double val = modification_value(m, v, n);
        if (val <= prev || val <= 0.5 * m || val >= m) {
          ok = false;
          detail = "bounds/monotonicity violated";
        }
        prev = val;
      }
    }
  }
  if (timer.seconds() >= 5.0) {
    ok = false;
    detail = "exceeded 5s budget";
  }
  report("value statistic matches the oracle within 1e-9, monotone, bounded", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: node selection distribution.
void criterion_node_sampling() {
  Timer timer;
  Forest forest;
  const std::string tid = forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  const std::string n0 = forest.tree(tid).root_id;
  const std::string n1 = forest.add_child(tid, n0, "a", spec("one"), EvalResult::success(2.0));
  const std::string n2 = forest.add_child(tid, n0, "b", spec("two"), EvalResult::success(0.5));
  const std::string n3 = forest.add_child(tid, n1, "c", spec("three"), EvalResult::success(3.0));
  forest.add_child(tid, n1, "d", spec("four"), EvalResult::failure("exit code 1"));
  const PhyloTree& tree = forest.tree(tid);

  // Analytic softmax computed here, not by the library.
  const SamplingParams params{};
  std::map<std::string, double> logits;
  for (const auto& [id, n] : tree.nodes) {
    if (!n.status.success()) continue;
    logits[id] = (params.alpha * n.reward + params.beta * n.delta_reward +
                  params.gamma / (n.depth + 1.0)) /
                 params.temperature;
  }
  double mx = -1e300;
  for (const auto& [_, l] : logits) mx = std::max(mx, l);
  double z = 0.0;
  for (const auto& [_, l] : logits) z += std::exp(l - mx);
  std::map<std::string, double> want;
  for (const auto& [id, l] : logits) want[id] = std::exp(l - mx) / z;

  bool ok = true;
  std::string detail;

  std::mt19937_64 rng(31337);
  std::map<std::string, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[sample_node(tree, params, rng)]++;
  for (const auto& [id, p] : want) {
    const double freq = static_cast<double>(counts[id]) / draws;
    if (std::fabs(freq - p) > 0.01) {
      ok = false;
      detail = "frequency off for " + id;
    }
  }
  if (counts.size() != want.size()) {
    ok = false;
    detail = "failed node was sampled";
  }

  // Shift invariance: adding a constant to every reward preserves the law.
  {
    Forest shifted;
    const double c = 1000.0;
    const std::string t2 =
        shifted.create_tree("seed", EvalResult::success(1.0 + c), TreeOrigin::Seed);
    const std::string m0 = shifted.tree(t2).root_id;
    const std::string m1 =
        shifted.add_child(t2, m0, "a", spec("one"), EvalResult::success(2.0 + c));
    shifted.add_child(t2, m0, "b", spec("two"), EvalResult::success(0.5 + c));
    shifted.add_child(t2, m1, "c", spec("three"), EvalResult::success(3.0 + c));
    const auto base = node_probabilities(tree, params);
    const auto moved = node_probabilities(shifted.tree(t2), params);
    if (base.size() != moved.size()) {
      ok = false;
      detail = "shifted tree has a different support";
    } else {
      for (auto ita = base.begin(), itb = moved.begin(); ita != base.end(); ++ita, ++itb) {
        if (!close(ita->second, itb->second, 1e-9)) {
          ok = false;
          detail = "shift changed the distribution";
        }
      }
    }
  }

  // Temperature limits.
  SamplingParams cold = params;
  cold.temperature = 1e-9;
  if (!close(node_probabilities(tree, cold).at(n3), 1.0, 1e-9)) {
    ok = false;
    detail = "T->0 is not greedy";
  }
  SamplingParams hot = params;
  hot.temperature = 1e12;
  for (const auto& [_, p] : node_probabilities(tree, hot)) {
    if (!close(p, 0.25, 1e-9)) {
      ok = false;
      detail = "T->inf is not uniform";
    }
  }
  (void)n2;
  if (timer.seconds() >= 10.0) {
    ok = false;
    detail = "exceeded 10s budget";
  }
  report("node sampling matches the analytic softmax within 0.01", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: tree scoring, retention, capacity.
void criterion_tree_scores() {
  bool ok = true;
  std::string detail;

  Forest forest;
  const std::string ta = forest.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  const std::string ra = forest.tree(ta).root_id;
  const std::string a1 =
      forest.add_child(ta, ra, "x", spec("increase cache blocking"), EvalResult::success(2.0));
  forest.add_child(ta, a1, "y", spec("vectorize inner loop"), EvalResult::success(4.0));
  const std::string tb = forest.create_tree("seed", EvalResult::success(2.0), TreeOrigin::Seed);
  forest.add_child(tb, forest.tree(tb).root_id, "z", spec("increase cache blocking"),
                   EvalResult::success(3.0));

  // Hand-walked composite: perf 4 / 3, potential 1.5 / 1.0, shared-vocabulary
  // cosine 0.755928946018454 on both sides.
  if (!close(tree_score(forest.tree(ta), forest, TreeScoreWeights{}), 2.498814210796309, 1e-9)) {
    ok = false;
    detail = "tree A score off";
  }
  if (!close(tree_score(forest.tree(tb), forest, TreeScoreWeights{}), 1.848814210796309, 1e-9)) {
    ok = false;
    detail = "tree B score off";
  }
  if (!close(retain_score(forest.tree(ta), forest, RetentionWeights{}), 1.1, 1e-9)) {
    ok = false;
    detail = "tree A retention off";
  }
  if (!close(retain_score(forest.tree(tb), forest, RetentionWeights{}), 0.2, 1e-9)) {
    ok = false;
    detail = "tree B retention off";
  }

  // Capacity enforcement protects the global best.
  Forest big(2);
  big.create_tree("seed", EvalResult::success(1.0), TreeOrigin::Seed);
  big.create_tree("seed", EvalResult::success(9.0), TreeOrigin::Seed);
  big.create_tree("seed", EvalResult::success(2.0), TreeOrigin::Seed);
  big.create_tree("seed", EvalResult::success(3.0), TreeOrigin::Seed);
  prune_forest(big, RetentionWeights{});
  if (big.trees().size() != 2 || big.trees().count("t1") == 0) {
    ok = false;
    detail = "capacity pruning evicted the wrong trees";
  }
  report("tree scoring and retention match hand-walked fixtures within 1e-9", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 4: hopeless-branch pruning.
void criterion_hopeless_pruning() {
  bool ok = true;
  std::string detail;

  std::mt19937_64 rng(555);
  for (int iter = 0; iter < 50 && ok; ++iter) {
    Forest forest;
    const std::string tid =
        forest.create_tree("seed", EvalResult::success(10.0), TreeOrigin::Seed);
    const std::string root = forest.tree(tid).root_id;
    std::vector<std::string> ids{root};
    for (int i = 0; i < 20; ++i) {
      const std::string parent = ids[rng() % ids.size()];
      const double parent_reward = forest.tree(tid).node(parent).reward;
      const double delta = static_cast<double>(rng() % 200) / 25.0 - 4.0;  // [-4, 4)
      ids.push_back(forest.add_child(tid, parent, "c", spec("mod " + std::to_string(i)),
                                     EvalResult::success(parent_reward + delta)));
    }

    prune_hopeless(forest, tid);
    const PhyloTree& tree = forest.tree(tid);

    // Post-scan: below the root no live subtree may be all-negative, and
    // every pruned subtree keeps exactly one informative failure.
    std::function<bool(const std::string&)> all_neg = [&](const std::string& id) -> bool {
      const AlgorithmNode& n = tree.node(id);
      bool neg = n.status.pruned() || n.delta_reward < 0.0;
      for (const auto& c : tree.children_of(id)) {
        if (!all_neg(c)) neg = false;
      }
      return neg;
    };
    std::function<void(const std::string&)> scan = [&](const std::string& id) {
      for (const auto& c : tree.children_of(id)) {
        const AlgorithmNode& n = tree.node(c);
        if (n.status.success() && all_neg(c)) {
          ok = false;
          detail = "a live all-negative subtree survived";
        }
        scan(c);
      }
    };
    scan(root);

    // Each maximal pruned region retains exactly one failed representative
    // with the largest |delta| among its members.
    std::function<void(const std::string&, std::vector<const AlgorithmNode*>&)> collect =
        [&](const std::string& id, std::vector<const AlgorithmNode*>& out) {
          out.push_back(&tree.node(id));
          for (const auto& c : tree.children_of(id)) collect(c, out);
        };
    for (const auto& [id, n] : tree.nodes) {
      if (!n.parent_id) continue;
      const bool parent_live = !tree.node(*n.parent_id).status.pruned() &&
                               tree.node(*n.parent_id).status.reason.find("retained") ==
                                   std::string::npos;
      const bool region_root = (n.status.pruned() || n.status.reason.find("retained") !=
                                                         std::string::npos) &&
                               parent_live && tree.node(*n.parent_id).status.success();
      if (!region_root) continue;
      std::vector<const AlgorithmNode*> members;
      collect(id, members);
      int retained = 0;
      double max_abs = 0.0;
      for (const auto* m : members) {
        if (!m->status.success()) max_abs = std::max(max_abs, std::fabs(m->delta_reward));
        if (m->status.state == NodeState::Failed &&
            m->status.reason.find("retained") != std::string::npos) {
          ++retained;
          if (std::fabs(m->delta_reward) < max_abs - 1e-12) {
            // A later member may still raise max_abs; final check below.
          }
        }
      }
      if (retained != 1) {
        ok = false;
        detail = "pruned region retained " + std::to_string(retained) + " failures";
      } else {
        const AlgorithmNode* keeper = nullptr;
        for (const auto* m : members) {
          if (m->status.state == NodeState::Failed &&
              m->status.reason.find("retained") != std::string::npos) {
            keeper = m;
          }
        }
        for (const auto* m : members) {
          if (std::fabs(m->delta_reward) > std::fabs(keeper->delta_reward) + 1e-12) {
            ok = false;
            detail = "keeper is not the largest-|delta| failure";
          }
        }
      }
    }
  }
  report("hopeless pruning keeps exactly one informative failure per subtree", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end hill climb on the quadratic task.
struct Rig {
  fs::path base;
  std::shared_ptr<Executor> executor;
  RunConfig config;
  explicit Rig(std::uint64_t seed) {
    static int counter = 0;
    base = fs::temp_directory_path() /
           ("accept_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(base);
    executor = std::make_shared<Executor>();
    install_task(find_task("quad1d"), *executor, (base / "tasks").string());
    config.seed = seed;
    config.task = "quad1d";
    config.seed_codes = {find_task("quad1d").seed_code};
    config.limits.wall_clock_s = 20.0;
  }
  ~Rig() { fs::remove_all(base); }
  BackendSet backends() const {
    auto b = scripted_hill_climber(find_task("quad1d"));
    return {b, b, b, b};
  }
  Orchestrator make() const { return Orchestrator(config, backends(), executor); }
};

std::string forest_sexpr(const Orchestrator& orch) {
  std::string out;
  for (const auto& [_, tree] : orch.forest().trees()) out += to_sexpr(tree, true) + "\n";
  return out;
}

void criterion_hill_climb() {
  Timer timer;
  Rig rig(42);
  Orchestrator orch = rig.make();
  const BestResult best = orch.run(50);

  bool ok = best.reward >= 9.999;
  std::string detail = "best " + std::to_string(best.reward);
  const auto& hist = orch.best_history();
  for (std::size_t i = 1; i < hist.size(); ++i) {
    if (hist[i] < hist[i - 1]) {
      ok = false;
      detail = "best-reward trace decreased";
    }
  }
  if (timer.seconds() >= 30.0) {
    ok = false;
    detail = "exceeded 30s budget";
  }
  report("50-epoch hill climb reaches >= 9.999 with a monotone best trace", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 6 (determinism): identical runs and split runs agree.
void criterion_determinism() {
  bool ok = true;
  std::string detail;

  Rig rig_a(7), rig_b(7);
  rig_a.config.output_dir = (rig_a.base / "out").string();
  rig_b.config.output_dir = (rig_b.base / "out").string();
  fs::create_directories(rig_a.config.output_dir);
  fs::create_directories(rig_b.config.output_dir);

  Orchestrator a = rig_a.make();
  Orchestrator b = rig_b.make();
  a.open_event_log((rig_a.base / "out" / "events.jsonl").string());
  b.open_event_log((rig_b.base / "out" / "events.jsonl").string());
  a.run(30);
  b.run(30);

  auto slurp = [](const fs::path& p) {
    std::ostringstream s;
    std::ifstream in(p);
    s << in.rdbuf();
    return s.str();
  };
  if (forest_sexpr(a) != forest_sexpr(b)) {
    ok = false;
    detail = "forests differ between identical runs";
  }
  if (slurp(rig_a.base / "out" / "events.jsonl") != slurp(rig_b.base / "out" / "events.jsonl")) {
    ok = false;
    detail = "event logs differ between identical runs";
  }

  // Split run: 15 epochs, checkpoint, restore, 15 more.
  Rig rig_c(7);
  Orchestrator first = rig_c.make();
  first.run(15);
  const std::string ckpt = (rig_c.base / "ckpt.json").string();
  first.checkpoint(ckpt);
  Orchestrator second = Orchestrator::restore(ckpt, rig_c.backends(), rig_c.executor);
  second.run(15);
  if (forest_sexpr(second) != forest_sexpr(a)) {
    ok = false;
    detail = "split run forest differs from the straight run";
  }
  if (second.best().reward != a.best().reward) {
    ok = false;
    detail = "split run best differs";
  }
  if (second.pool().trajectories().size() != a.pool().trajectories().size()) {
    ok = false;
    detail = "split run pool differs";
  }
  report("identical and checkpoint-split runs produce identical artifacts", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 7: sandboxed execution failure taxonomy.
void criterion_executor() {
  bool ok = true;
  std::string detail;

  Executor executor;
  const fs::path base = fs::temp_directory_path() / ("accept_exe_" + std::to_string(::getpid()));
  install_task(find_task("quad1d"), executor, base.string());

  auto eval = [&](const std::string& code, double wall = 10.0,
                  std::uint64_t mem = 512ull << 20) {
    EvalRequest req;
    req.code = code;
    req.task_ref = "quad1d";
    req.limits = {wall, mem};
    return executor.evaluate(req);
  };

  const EvalResult good = eval("x = 5\n");
  if (!good.ok() || !close(good.score, 6.0, 1e-9)) {
    ok = false;
    detail = "healthy candidate misreported";
  }
  const EvalResult slow = eval("sleep_ms = 30000\n", 1.0);
  if (slow.ok() || slow.reason != "timeout after 1s") {
    ok = false;
    detail = "timeout misreported: " + slow.reason;
  }
  const EvalResult hog = eval("alloc_mb = 4096\nx = 1\n", 10.0, 256ull << 20);
  if (hog.ok() || hog.reason != "memory limit") {
    ok = false;
    detail = "memory failure misreported: " + hog.reason;
  }
  const EvalResult garbled = eval("emit = garbage\n");
  if (garbled.ok() || garbled.reason != "malformed result") {
    ok = false;
    detail = "malformed output misreported: " + garbled.reason;
  }

  // The modify pipeline stops at the debug-retry cap.
  struct Broken : CompletionBackend {
    int calls = 0;
    std::string complete(const std::string&, const std::string&, const DecodeParams&) override {
      ++calls;
      return "```\nemit = garbage\n```";
    }
  } backend;
  AlgorithmNode parent;
  parent.code = "x = 0\n";
  Proposal proposal;
  proposal.high_level = "improve";
  proposal.detailed_spec = "set x = 2";
  const ModifyOutcome out =
      modify(proposal, parent, backend, executor, "quad1d", ResourceLimits{}, 3);
  if (out.result.ok() || out.debug_attempts != 3 || backend.calls != 4) {
    ok = false;
    detail = "debug retries not capped at 3";
  }
  fs::remove_all(base);
  report("executor classifies timeout/memory/malformed and caps repairs at 3", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: elite pool consistency and cross-lineage retrieval.
void criterion_elite_pool() {
  bool ok = true;
  std::string detail;

  // Streaming top-k equals a full-sort oracle over 100 keys.
  ElitePool pool;
  std::mt19937_64 rng(808);
  std::map<std::string, std::vector<double>> observed;
  for (int i = 0; i < 100; ++i) {
    const std::string key = "mod " + std::to_string(i);
    const int obs = 1 + static_cast<int>(rng() % 5);
    for (int j = 0; j < obs; ++j) {
      const double delta = static_cast<double>(rng() % 1000) / 100.0 - 5.0;
      observed[key].push_back(delta);
      pool.record_modification(key, delta);
    }
  }
  struct Row {
    std::string key;
    double value;
    std::size_t count;
  };
  std::vector<Row> oracle;
  for (const auto& [key, deltas] : observed) {
    double mean = 0.0;
    for (double d : deltas) mean += d;
    mean /= static_cast<double>(deltas.size());
    double var = 0.0;
    for (double d : deltas) var += (d - mean) * (d - mean);
    var /= static_cast<double>(deltas.size());
    oracle.push_back({key, modification_value(mean, var, deltas.size()), deltas.size()});
  }
  std::sort(oracle.begin(), oracle.end(), [](const Row& a, const Row& b) {
    if (a.value != b.value) return a.value > b.value;
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });
  const auto top = pool.top_modifications(10);
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (top[i].key != oracle[i].key || !close(top[i].value, oracle[i].value, 1e-9)) {
      ok = false;
      detail = "top-k disagrees with the sort oracle at rank " + std::to_string(i);
    }
  }

  // Cross-lineage retrieval: a two-seed run admits trajectories from both
  // trees, and similarity queries can reach either lineage.
  Rig rig(11);
  rig.config.seed_codes = {"# candidate parameters\nx = 0\n", "# candidate parameters\nx = 5\n"};
  Orchestrator orch = rig.make();
  orch.run(30);
  std::set<std::string> sources;
  for (const auto& e : orch.pool().trajectories()) sources.insert(e.source_tree);
  if (sources.size() < 2) {
    ok = false;
    detail = "pool holds trajectories from only one lineage";
  } else {
    std::mt19937_64 sample_rng(3);
    const auto picks = orch.pool().sample_trajectories(
        feature_vector("nudge parameters toward improvement"), 8, sample_rng);
    std::set<std::string> picked;
    for (const auto& e : picks) picked.insert(e.source_tree);
    if (picked.size() < 2) {
      ok = false;
      detail = "sampling never crossed lineages";
    }
  }
  report("elite pool top-k matches the sort oracle; retrieval spans lineages", ok, detail);
}

// ---------------------------------------------------------------------------
// Criterion 9: serialization round-trips and parse diagnostics.
void criterion_serialization() {
  bool ok = true;
  std::string detail;

  std::mt19937_64 rng(4242);
  for (int iter = 0; iter < 100 && ok; ++iter) {
    Forest forest;
    const std::string tid =
        forest.create_tree("seed", EvalResult::success(0.0), TreeOrigin::Seed);
    std::vector<std::string> ids{forest.tree(tid).root_id};
    const std::size_t n = 1 + rng() % 49;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string parent = ids[rng() % ids.size()];
      const double score = static_cast<double>(rng() % 2000) / 7.0 - 100.0;
      const bool success = rng() % 5 != 0;
      std::string summary = "mod " + std::to_string(i);
      if (rng() % 3 == 0) summary += " with \"quotes\" and \\ backslash";
      if (rng() % 4 == 0) summary += "\nsecond line";
      ids.push_back(forest.add_child(tid, parent, "code", spec(summary),
                                     success ? EvalResult::success(score)
                                             : EvalResult::failure("exit code 1")));
    }
    const std::string text = to_sexpr(forest.tree(tid));
    PhyloTree parsed;
    try {
      parsed = parse_sexpr(text);
    } catch (const SexprParseError& e) {
      ok = false;
      detail = std::string("round-trip parse failed: ") + e.what();
      break;
    }
    if (to_sexpr(parsed) != text) {
      ok = false;
      detail = "round-trip not byte-identical";
    }
  }

  const char* malformed[] = {
      "",
      "(",
      "(node)",
      "(node :id n0)",
      "(node :id n0 :r oops :dr 0.0 :mod \"m\" :status success)",
      "(node :id n0 :r 1.000000 :dr 0.000000 :mod \"m\" :status success",
      "(node :id n0 :r 1.000000 :dr 0.000000 :mod \"unterminated :status success)",
      "(node :id n0 :r 1.000000 :dr 0.000000 :mod \"m\" :status bogus)",
      "(node :id n0 :r 1.0 :dr 0.0 :mod \"m\" :status success) trailing",
      "(node :id n0 :r 1.0 :dr 0.0 :mod \"m\" :status success "
      "(node :id n0 :r 1.0 :dr 0.0 :mod \"m\" :status success))",
  };
  for (const char* text : malformed) {
    try {
      parse_sexpr(text);
      ok = false;
      detail = std::string("malformed input accepted: ") + text;
    } catch (const SexprParseError& e) {
      if (e.offset() > std::string(text).size()) {
        ok = false;
        detail = "reported offset is out of range";
      }
    }
  }
  report("sexpr round-trips 100 random trees; malformed inputs carry offsets", ok, detail);
}

}  // namespace

int main() {
  criterion_value_statistic();
  criterion_node_sampling();
  criterion_tree_scores();
  criterion_hopeless_pruning();
  criterion_hill_climb();
  criterion_determinism();
  criterion_executor();
  criterion_elite_pool();
  criterion_serialization();
  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
