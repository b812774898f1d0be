#include "evoforest/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <future>
#include <sstream>

namespace evoforest {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// RunConfig serialization

namespace {

json backend_to_json(const BackendConfig& b) {
  return json{{"kind", b.kind},
              {"replay_path", b.replay_path},
              {"hill_climb_rate", b.hill_climb_rate},
              {"http",
               {{"base_url", b.http.base_url},
                {"path", b.http.path},
                {"model", b.http.model},
                {"api_key_env", b.http.api_key_env},
                {"timeout_s", b.http.timeout_s},
                {"retries", b.http.retries}}}};
}

BackendConfig backend_from_json(const json& j) {
  BackendConfig b;
  b.kind = j.value("kind", b.kind);
  b.replay_path = j.value("replay_path", b.replay_path);
  b.hill_climb_rate = j.value("hill_climb_rate", b.hill_climb_rate);
  if (j.contains("http")) {
    const auto& h = j["http"];
    b.http.base_url = h.value("base_url", b.http.base_url);
    b.http.path = h.value("path", b.http.path);
    b.http.model = h.value("model", b.http.model);
    b.http.api_key_env = h.value("api_key_env", b.http.api_key_env);
    b.http.timeout_s = h.value("timeout_s", b.http.timeout_s);
    b.http.retries = h.value("retries", b.http.retries);
  }
  return b;
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["format_version"] = 1;
  j["seed"] = seed;
  j["epochs"] = epochs;
  j["warmup_epochs"] = warmup_epochs;
  j["task"] = task;
  j["seed_codes"] = seed_codes;
  j["constraints"] = constraints;
  j["sampling"] = {{"alpha", sampling.alpha},
                   {"beta", sampling.beta},
                   {"gamma", sampling.gamma},
                   {"temperature", sampling.temperature}};
  j["tree_weights"] = {{"w1", tree_weights.w1},
                       {"w2", tree_weights.w2},
                       {"w3", tree_weights.w3},
                       {"window", tree_weights.window}};
  j["retention"] = {{"alpha", retention.alpha},
                    {"beta", retention.beta},
                    {"gamma", retention.gamma},
                    {"depth_decay", retention.depth_decay},
                    {"window", retention.window}};
  j["forest_capacity"] = forest_capacity;
  j["elite_k"] = elite_k;
  j["pruning"] = {{"stagnation_rounds", pruning.stagnation_rounds},
                  {"percentile", pruning.percentile}};
  j["modes"] = {{"plateau", modes.plateau},
                {"diversity", modes.diversity},
                {"gain_streak", modes.gain_streak},
                {"top_value", modes.top_value}};
  j["macro"] = {{"plateau", macro.plateau},
                {"diversity", macro.diversity},
                {"cooldown", macro.cooldown}};
  j["limits"] = {{"wall_clock_s", limits.wall_clock_s}, {"memory_bytes", limits.memory_bytes}};
  j["context"] = {{"token_budget", context.token_budget},
                  {"elite_trajectories", context.elite_trajectory_count},
                  {"elite_modifications", context.elite_modification_count},
                  {"summaries", context.summary_count}};
  j["gate"] = gate == GateKind::DeltaPositive ? "delta" : "absolute";
  j["reask_limit"] = reask_limit;
  j["debug_retries"] = debug_retries;
  j["summarize_interval"] = summarize_interval;
  j["checkpoint_interval"] = checkpoint_interval;
  j["islands"] = islands;
  j["tombstone_horizon"] = tombstone_horizon;
  j["output_dir"] = output_dir;
  json bk = json::object();
  for (const auto& [role, b] : backends) bk[role] = backend_to_json(b);
  j["backends"] = bk;
  return j;
}

RunConfig RunConfig::from_json(const json& j, std::string* error) {
  auto fail = [&](const std::string& msg) {
    if (error) *error = msg;
    return RunConfig{};
  };
  RunConfig c;
  if (!j.contains("seed")) return fail("missing required field: seed");
  if (!j.contains("task") || j["task"].get<std::string>().empty())
    return fail("missing required field: task");
  c.seed = j["seed"].get<std::uint64_t>();
  c.task = j["task"].get<std::string>();
  c.epochs = j.value("epochs", c.epochs);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.seed_codes = j.value("seed_codes", c.seed_codes);
  c.constraints = j.value("constraints", c.constraints);
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    c.sampling.alpha = s.value("alpha", c.sampling.alpha);
    c.sampling.beta = s.value("beta", c.sampling.beta);
    c.sampling.gamma = s.value("gamma", c.sampling.gamma);
    c.sampling.temperature = s.value("temperature", c.sampling.temperature);
  }
  if (c.sampling.temperature <= 0.0) return fail("sampling.temperature must be > 0");
  if (j.contains("tree_weights")) {
    const auto& s = j["tree_weights"];
    c.tree_weights.w1 = s.value("w1", c.tree_weights.w1);
    c.tree_weights.w2 = s.value("w2", c.tree_weights.w2);
    c.tree_weights.w3 = s.value("w3", c.tree_weights.w3);
    c.tree_weights.window = s.value("window", c.tree_weights.window);
  }
  if (c.tree_weights.window < 1) return fail("tree_weights.window must be >= 1");
  if (j.contains("retention")) {
    const auto& s = j["retention"];
    c.retention.alpha = s.value("alpha", c.retention.alpha);
    c.retention.beta = s.value("beta", c.retention.beta);
    c.retention.gamma = s.value("gamma", c.retention.gamma);
    c.retention.depth_decay = s.value("depth_decay", c.retention.depth_decay);
    c.retention.window = s.value("window", c.retention.window);
  }
  if (c.retention.depth_decay <= 0.0 || c.retention.depth_decay > 1.0)
    return fail("retention.depth_decay must be in (0, 1]");
  c.forest_capacity = j.value("forest_capacity", c.forest_capacity);
  if (c.forest_capacity == 0) return fail("forest_capacity must be positive");
  c.elite_k = j.value("elite_k", c.elite_k);
  if (c.elite_k == 0) return fail("elite_k must be positive");
  if (j.contains("pruning")) {
    const auto& s = j["pruning"];
    c.pruning.stagnation_rounds = s.value("stagnation_rounds", c.pruning.stagnation_rounds);
    c.pruning.percentile = s.value("percentile", c.pruning.percentile);
  }
  if (c.pruning.stagnation_rounds < 1) return fail("pruning.stagnation_rounds must be >= 1");
  if (c.pruning.percentile <= 0.0 || c.pruning.percentile >= 100.0)
    return fail("pruning.percentile must be in (0, 100)");
  if (j.contains("modes")) {
    const auto& s = j["modes"];
    c.modes.plateau = s.value("plateau", c.modes.plateau);
    c.modes.diversity = s.value("diversity", c.modes.diversity);
    c.modes.gain_streak = s.value("gain_streak", c.modes.gain_streak);
    c.modes.top_value = s.value("top_value", c.modes.top_value);
  }
  c.modes.warmup_epochs = c.warmup_epochs;
  if (j.contains("macro")) {
    const auto& s = j["macro"];
    c.macro.plateau = s.value("plateau", c.macro.plateau);
    c.macro.diversity = s.value("diversity", c.macro.diversity);
    c.macro.cooldown = s.value("cooldown", c.macro.cooldown);
  }
  if (j.contains("limits")) {
    const auto& s = j["limits"];
    c.limits.wall_clock_s = s.value("wall_clock_s", c.limits.wall_clock_s);
    c.limits.memory_bytes = s.value("memory_bytes", c.limits.memory_bytes);
  }
  if (c.limits.wall_clock_s <= 0.0) return fail("limits.wall_clock_s must be > 0");
  if (c.limits.memory_bytes == 0) return fail("limits.memory_bytes must be > 0");
  if (j.contains("context")) {
    const auto& s = j["context"];
    c.context.token_budget = s.value("token_budget", c.context.token_budget);
    c.context.elite_trajectory_count =
        s.value("elite_trajectories", c.context.elite_trajectory_count);
    c.context.elite_modification_count =
        s.value("elite_modifications", c.context.elite_modification_count);
    c.context.summary_count = s.value("summaries", c.context.summary_count);
  }
  const std::string gate = j.value("gate", std::string("delta"));
  if (gate == "delta") c.gate = GateKind::DeltaPositive;
  else if (gate == "absolute") c.gate = GateKind::AbsolutePositive;
  else return fail("gate must be 'delta' or 'absolute'");
  c.reask_limit = j.value("reask_limit", c.reask_limit);
  c.debug_retries = j.value("debug_retries", c.debug_retries);
  c.summarize_interval = j.value("summarize_interval", c.summarize_interval);
  c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
  c.islands = j.value("islands", c.islands);
  if (c.islands == 0) return fail("islands must be >= 1");
  c.tombstone_horizon = j.value("tombstone_horizon", c.tombstone_horizon);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("backends")) {
    for (const auto& [role, b] : j["backends"].items())
      c.backends[role] = backend_from_json(b);
  }
  if (error) error->clear();
  return c;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

// ---------------------------------------------------------------------------
// Orchestrator

Orchestrator::Orchestrator(RunConfig config, BackendSet backends,
                           std::shared_ptr<Executor> executor)
    : config_(std::move(config)),
      backends_(std::move(backends)),
      executor_(std::move(executor)),
      forest_(config_.forest_capacity),
      pool_(config_.elite_k),
      rng_(config_.seed) {}

void Orchestrator::event(std::uint64_t epoch, const std::string& kind, const std::string& tree,
                         const std::string& node, const json& payload) {
  if (!event_log_.is_open()) return;
  json record{{"epoch", epoch}, {"kind", kind}, {"tree", tree}, {"node", node},
              {"payload", payload}};
  event_log_ << record.dump() << "\n";
  event_log_.flush();
}

void Orchestrator::open_event_log(const std::string& path) {
  event_log_.open(path, std::ios::binary | std::ios::trunc);
  if (!event_log_) throw std::runtime_error("cannot open event log: " + path);
}

void Orchestrator::initialize() {
  if (initialized_) return;
  if (config_.seed_codes.empty()) throw std::runtime_error("no seed candidates configured");
  forest_.set_epoch(0);
  for (const auto& code : config_.seed_codes) {
    EvalRequest req{code, config_.task, config_.limits, EvalMode::Full};
    const EvalResult result = executor_->evaluate(req);
    const std::string tid = forest_.create_tree(code, result, TreeOrigin::Seed);
    event(0, "seed", tid, forest_.tree(tid).root_id,
          {{"status", result.ok() ? "success" : "failed"},
           {"score", result.ok() ? result.score : kFailureSentinel}});
  }
  if (auto best = forest_.best_in_forest())
    best_reward_ = forest_.tree(best->first).node(best->second).reward;
  best_history_.push_back(best_reward_);
  initialized_ = true;
}

BestResult Orchestrator::best() const {
  auto b = forest_.best_in_forest();
  if (!b) throw SamplingError("no viable candidate in forest");
  const AlgorithmNode& n = forest_.tree(b->first).node(b->second);
  return {b->first, b->second, n.code, n.reward};
}

bool Orchestrator::trigger_redesign() const {
  if (pool_.trajectories().empty()) return false;
  const bool cooled =
      last_redesign_epoch_ < 0 ||
      static_cast<std::int64_t>(epoch_) - last_redesign_epoch_ >=
          static_cast<std::int64_t>(config_.macro.cooldown);
  if (!cooled) return false;
  return plateau_ >= config_.macro.plateau || forest_diversity(forest_) < config_.macro.diversity;
}

std::optional<std::string> Orchestrator::pick_tree(std::uint64_t e,
                                                   const std::set<std::string>& exclude) {
  auto viable = [&](const PhyloTree& t) {
    for (const auto& [_, n] : t.nodes) {
      if (node_sampleable(n)) return true;
    }
    return false;
  };
  std::vector<std::string> candidates;
  for (const auto& [tid, t] : forest_.trees()) {
    if (!exclude.count(tid) && viable(t)) candidates.push_back(tid);
  }
  if (candidates.empty()) return std::nullopt;

  if (e < config_.warmup_epochs) {
    // Phase one: per-seed round robin to establish the initial frontier.
    return candidates[e % candidates.size()];
  }
  for (int attempt = 0; attempt < 16; ++attempt) {
    const std::string tid = sample_tree(forest_, config_.tree_weights, config_.sampling, rng_);
    if (!exclude.count(tid)) return tid;
  }
  return candidates.front();
}

void Orchestrator::run_one_commit(std::uint64_t commit_epoch, const std::string& tree_id,
                                  const std::string& node_id, const Proposal& proposal,
                                  const ModifyOutcome& outcome) {
  const PhyloTree& tree = forest_.tree(tree_id);
  const AlgorithmNode& parent = tree.node(node_id);
  auto [r, dr] = reward_from(outcome.result, parent.reward);
  const bool improved = outcome.result.ok() &&
                        (config_.gate == GateKind::DeltaPositive ? dr > 0.0 : r > 0.0);

  ChildSpec spec{proposal.high_level, normalize_modification_key(proposal.high_level),
                 proposal.detailed_spec};
  if (improved) {
    const std::string child =
        forest_.add_child(tree_id, node_id, outcome.code, spec, outcome.result);
    const Trajectory traj = forest_.trajectory(tree_id, child);
    pool_.maybe_admit_trajectory(traj, commit_epoch);
    pool_.record_modification(spec.modification_key, dr);
    gain_streak_ += 1;
    event(commit_epoch, "add_child", tree_id, child,
          {{"parent", node_id}, {"reward", r}, {"delta", dr},
           {"debug_attempts", outcome.debug_attempts}});
  } else {
    EvalResult failed = outcome.result;
    if (outcome.result.ok()) {
      failed = EvalResult::failure("no improvement");
      failed.runtime_ms = outcome.result.runtime_ms;
    }
    const std::string child = forest_.add_child(tree_id, node_id, outcome.code, spec, failed);
    forest_.tree(tree_id).node(child).metrics["score"] =
        outcome.result.ok() ? outcome.result.score : kFailureSentinel;
    gain_streak_ = 0;
    event(commit_epoch, "failed_child", tree_id, child,
          {{"parent", node_id}, {"reason", failed.reason},
           {"debug_attempts", outcome.debug_attempts}});
  }

  for (const auto& ev : prune_hopeless(forest_, tree_id))
    event(commit_epoch, "prune", ev.tree_id, ev.node_id, {{"reason", ev.reason}});
  for (const auto& ev : prune_low_potential(forest_, tree_id, config_.pruning.stagnation_rounds,
                                            config_.pruning.percentile))
    event(commit_epoch, "prune", ev.tree_id, ev.node_id, {{"reason", ev.reason}});
}

void Orchestrator::macro_step() {
  auto elite = pool_.best();
  if (!elite) return;
  // The elite node's artifact may already have left the forest.
  std::string elite_code;
  const std::string src_tree = elite->source_tree;
  const std::string terminal = elite->trajectory.steps.back().node_id;
  if (forest_.trees().count(src_tree) && forest_.tree(src_tree).contains(terminal)) {
    elite_code = forest_.tree(src_tree).node(terminal).code;
  } else {
    event(epoch_, "redesign_skipped", src_tree, terminal, {{"reason", "elite artifact evicted"}});
    last_redesign_epoch_ = static_cast<std::int64_t>(epoch_);
    return;
  }

  const FeatureVector query = elite->feature_vector;
  const auto similar = pool_.sample_trajectories(query, 3, rng_);
  const auto sums = summaries_.retrieve(query, 3);

  std::string seed_code;
  try {
    seed_code = design(*elite, elite_code, sums, similar, *backends_.design, config_.reask_limit);
  } catch (const FormatError&) {
    event(epoch_, "redesign_failed", src_tree, terminal, {{"reason", "format error"}});
    last_redesign_epoch_ = static_cast<std::int64_t>(epoch_);
    return;
  }

  EvalRequest req{seed_code, config_.task, config_.limits, EvalMode::Full};
  const EvalResult result = executor_->evaluate(req);
  last_redesign_epoch_ = static_cast<std::int64_t>(epoch_);

  // Admission: above the median of current root rewards.
  std::vector<double> roots;
  for (const auto& [_, t] : forest_.trees()) roots.push_back(t.node(t.root_id).reward);
  std::sort(roots.begin(), roots.end());
  const std::size_t n = roots.size();
  const double median = n % 2 == 1 ? roots[n / 2] : 0.5 * (roots[n / 2 - 1] + roots[n / 2]);

  if (result.ok() && result.score > median) {
    const std::string tid = forest_.create_tree(seed_code, result, TreeOrigin::Redesign);
    event(epoch_, "redesign_admitted", tid, forest_.tree(tid).root_id,
          {{"score", result.score}, {"median", median}});
    for (const auto& removed : prune_forest(forest_, config_.retention))
      event(epoch_, "prune_tree", removed, "", {{"reason", "forest_capacity"}});
  } else {
    event(epoch_, "redesign_rejected", "", "",
          {{"score", result.ok() ? result.score : kFailureSentinel}, {"median", median}});
  }
}

void Orchestrator::maybe_summarize() {
  std::vector<Trajectory> fresh;
  for (const auto& e : pool_.trajectories()) {
    const std::string key = e.source_tree + ":" + e.trajectory.steps.back().node_id;
    if (!summarized_.count(key)) fresh.push_back(e.trajectory);
  }
  if (fresh.empty()) return;
  const auto produced = summarize(fresh, *backends_.summarize, summaries_);
  if (produced.empty()) return;  // backend failure skips the cycle
  for (const auto& e : pool_.trajectories())
    summarized_.insert(e.source_tree + ":" + e.trajectory.steps.back().node_id);
  event(epoch_, "summarize", "", "", {{"count", produced.size()}});
}

void Orchestrator::after_epoch_housekeeping(std::uint64_t e) {
  double best = kFailureSentinel;
  if (auto b = forest_.best_in_forest())
    best = forest_.tree(b->first).node(b->second).reward;
  if (best > best_reward_) {
    best_reward_ = best;
    plateau_ = 0;
  } else {
    plateau_ += 1;
  }
  best_history_.push_back(best_reward_);

  if (config_.summarize_interval > 0 && (e + 1) % config_.summarize_interval == 0)
    maybe_summarize();
  if (config_.checkpoint_interval > 0 && !config_.output_dir.empty() &&
      (e + 1) % config_.checkpoint_interval == 0) {
    fs::create_directories(config_.output_dir);
    checkpoint((fs::path(config_.output_dir) / "checkpoint.json").string());
    event(e, "checkpoint", "", "", json::object());
  }
}

BestResult Orchestrator::run(std::uint64_t epochs) {
  initialize();
  const std::uint64_t end_epoch = epoch_ + epochs;

  while (epoch_ < end_epoch) {
    const std::size_t width = std::min<std::size_t>(config_.islands, end_epoch - epoch_);
    forest_.set_epoch(epoch_);

    // Mode for the batch.
    ModeSignals signals;
    signals.epoch = epoch_;
    signals.plateau_epochs = plateau_;
    signals.forest_diversity = forest_diversity(forest_);
    signals.gain_streak = gain_streak_;
    const auto top = pool_.top_modifications(1);
    signals.top_modification_value = top.empty() ? 0.0 : top.front().value;
    signals.previous = mode_;
    mode_ = select_mode(signals, config_.modes);

    // Selection + context building is sequential (single rng stream); agent
    // calls for distinct trees may run concurrently.
    struct Job {
      std::string tree_id;
      std::string node_id;
      Context context;
    };
    std::vector<Job> jobs;
    std::set<std::string> chosen;
    const OptimizationTarget target{"score", "maximize", config_.constraints};
    for (std::size_t i = 0; i < width; ++i) {
      auto tid = pick_tree(epoch_ + i, chosen);
      if (!tid) break;
      chosen.insert(*tid);
      const PhyloTree& tree = forest_.tree(*tid);
      const std::string nid = sample_node(tree, config_.sampling, rng_);
      Context ctx = build_context(tree.node(nid), tree, forest_, pool_, summaries_, mode_,
                                  target, config_.context, end_epoch - epoch_, rng_);
      jobs.push_back({*tid, nid, std::move(ctx)});
      event(epoch_ + i, "sample", *tid, nid, {{"mode", mode_name(mode_)}});
    }
    if (jobs.empty()) throw SamplingError("no viable tree in forest");

    struct JobResult {
      bool format_error = false;
      Proposal proposal;
      ModifyOutcome outcome;
    };
    auto run_job = [&](const Job& job) -> JobResult {
      JobResult r;
      try {
        r.proposal = next_step(job.context, *backends_.next_step, config_.reask_limit);
      } catch (const FormatError&) {
        r.format_error = true;
        return r;
      }
      const PhyloTree& tree = forest_.tree(job.tree_id);
      r.outcome = modify(r.proposal, tree.node(job.node_id), *backends_.modify, *executor_,
                         config_.task, config_.limits, config_.debug_retries);
      return r;
    };

    std::vector<JobResult> results(jobs.size());
    try {
      if (jobs.size() == 1) {
        results[0] = run_job(jobs[0]);
      } else {
        std::vector<std::future<JobResult>> futures;
        futures.reserve(jobs.size());
        for (const auto& job : jobs)
          futures.push_back(std::async(std::launch::async, run_job, std::cref(job)));
        for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
      }
    } catch (const BackendError& e) {
      // Unrecoverable outage: checkpoint, then abort with resumable state.
      const fs::path dir = config_.output_dir.empty() ? fs::temp_directory_path()
                                                      : fs::path(config_.output_dir);
      fs::create_directories(dir);
      const std::string path = (dir / "checkpoint.json").string();
      checkpoint(path);
      throw AbortedError(std::string("backend outage: ") + e.what(), path);
    }

    // Commit in deterministic tree-id order.
    std::vector<std::size_t> order(jobs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return jobs[a].tree_id < jobs[b].tree_id;
    });

    std::uint64_t committed = 0;
    for (std::size_t idx : order) {
      const std::uint64_t e = epoch_ + committed;
      forest_.set_epoch(e);
      if (results[idx].format_error) {
        event(e, "format_error", jobs[idx].tree_id, jobs[idx].node_id, json::object());
      } else {
        run_one_commit(e, jobs[idx].tree_id, jobs[idx].node_id, results[idx].proposal,
                       results[idx].outcome);
      }
      after_epoch_housekeeping(e);
      ++committed;
    }
    epoch_ += committed;
    forest_.set_epoch(epoch_);

    // Macro-loop: structural innovation.
    if (trigger_redesign()) macro_step();
  }

  return best();
}

// ---------------------------------------------------------------------------
// Checkpointing

namespace {

json node_to_json(const AlgorithmNode& n) {
  json j{{"id", n.id},
         {"code", n.code},
         {"summary", n.modification_summary},
         {"key", n.modification_key},
         {"detailed_spec", n.detailed_spec},
         {"reward", n.reward},
         {"delta", n.delta_reward},
         {"metrics", n.metrics},
         {"depth", n.depth},
         {"constraint_ok", n.constraint_ok},
         {"created_at", n.created_at},
         {"created_epoch", n.created_epoch},
         {"pruned_epoch", n.pruned_epoch},
         {"status", static_cast<int>(n.status.state)},
         {"status_reason", n.status.reason}};
  if (n.parent_id) j["parent"] = *n.parent_id;
  return j;
}

AlgorithmNode node_from_json(const json& j) {
  AlgorithmNode n;
  n.id = j["id"].get<std::string>();
  if (j.contains("parent")) n.parent_id = j["parent"].get<std::string>();
  n.code = j["code"].get<std::string>();
  n.modification_summary = j["summary"].get<std::string>();
  n.modification_key = j["key"].get<std::string>();
  n.detailed_spec = j["detailed_spec"].get<std::string>();
  n.reward = j["reward"].get<double>();
  n.delta_reward = j["delta"].get<double>();
  n.metrics = j["metrics"].get<std::map<std::string, double>>();
  n.depth = j["depth"].get<int>();
  n.constraint_ok = j["constraint_ok"].get<bool>();
  n.created_at = j["created_at"].get<std::uint64_t>();
  n.created_epoch = j["created_epoch"].get<std::uint64_t>();
  n.pruned_epoch = j["pruned_epoch"].get<std::uint64_t>();
  n.status.state = static_cast<NodeState>(j["status"].get<int>());
  n.status.reason = j["status_reason"].get<std::string>();
  return n;
}

json trajectory_to_json(const Trajectory& t) {
  json steps = json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"node", s.node_id}, {"summary", s.modification_summary},
                     {"delta", s.delta_reward}});
  return json{{"tree", t.tree_id},
              {"steps", steps},
              {"final_reward", t.final_reward},
              {"terminal_success", t.terminal_success}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.tree_id = j["tree"].get<std::string>();
  for (const auto& s : j["steps"])
    t.steps.push_back({s["node"].get<std::string>(), s["summary"].get<std::string>(),
                       s["delta"].get<double>()});
  t.final_reward = j["final_reward"].get<double>();
  t.terminal_success = j["terminal_success"].get<bool>();
  return t;
}

}  // namespace

json Orchestrator::state_json() const {
  json body;
  body["config"] = config_.to_json();
  body["epoch"] = epoch_;
  body["mode"] = static_cast<int>(mode_);
  body["plateau"] = plateau_;
  body["gain_streak"] = gain_streak_;
  body["best_reward"] = best_reward_;
  body["last_redesign_epoch"] = last_redesign_epoch_;
  body["best_history"] = best_history_;
  body["summarized"] = std::vector<std::string>(summarized_.begin(), summarized_.end());
  body["initialized"] = initialized_;

  std::ostringstream rng_stream;
  rng_stream << rng_;
  body["rng"] = rng_stream.str();

  json forest;
  forest["capacity"] = forest_.capacity();
  forest["epoch"] = forest_.epoch();
  forest["next_node"] = forest_.next_node_counter();
  forest["next_tree"] = forest_.next_tree_counter();
  forest["created_counter"] = forest_.created_counter();
  json trees = json::array();
  for (const auto& [tid, t] : forest_.trees()) {
    json nodes = json::array();
    for (const auto& [_, n] : t.nodes) nodes.push_back(node_to_json(n));
    trees.push_back({{"id", t.id},
                     {"root", t.root_id},
                     {"label", t.meta.label},
                     {"creation_epoch", t.meta.creation_epoch},
                     {"origin", t.meta.origin == TreeOrigin::Seed ? "seed" : "redesign"},
                     {"nodes", nodes},
                     {"children", t.children}});
  }
  forest["trees"] = trees;
  body["forest"] = forest;

  json pool;
  pool["k"] = pool_.k();
  pool["admissions"] = pool_.admissions();
  json trajs = json::array();
  for (const auto& e : pool_.trajectories()) {
    trajs.push_back({{"trajectory", trajectory_to_json(e.trajectory)},
                     {"source_tree", e.source_tree},
                     {"admitted_epoch", e.admitted_epoch},
                     {"features", e.feature_vector}});
  }
  pool["trajectories"] = trajs;
  json stats = json::array();
  for (const auto& [key, s] : pool_.modification_stats()) {
    stats.push_back({{"key", s.key}, {"mean", s.mean_gain}, {"variance", s.variance},
                     {"count", s.count}, {"value", s.value}, {"m2", pool_.welford_m2(key)}});
  }
  pool["stats"] = stats;
  body["pool"] = pool;

  json sums = json::array();
  for (const auto& s : summaries_.entries()) {
    sums.push_back({{"text", s.text},
                    {"frequency", s.pattern_stats.frequency},
                    {"mean_gain", s.pattern_stats.mean_gain},
                    {"variance", s.pattern_stats.variance},
                    {"features", s.feature_vector}});
  }
  body["summaries"] = sums;

  json backend_states = json::object();
  backend_states["next_step"] = backends_.next_step ? backends_.next_step->state() : "";
  backend_states["modify"] = backends_.modify ? backends_.modify->state() : "";
  backend_states["design"] = backends_.design ? backends_.design->state() : "";
  backend_states["summarize"] = backends_.summarize ? backends_.summarize->state() : "";
  body["backend_states"] = backend_states;
  return body;
}

void Orchestrator::checkpoint(const std::string& path) const {
  // Tombstones older than the retention horizon are compacted at checkpoint
  // time; the in-memory forest is compacted too so the persisted and live
  // states agree.
  auto* self = const_cast<Orchestrator*>(this);
  if (epoch_ >= config_.tombstone_horizon)
    self->forest_.compact_tombstones(epoch_ - config_.tombstone_horizon);

  json body = state_json();
  const std::string body_dump = body.dump();
  json file;
  file["header"] = {{"format_version", 1},
                    {"created_at", static_cast<std::uint64_t>(
                                       std::chrono::duration_cast<std::chrono::seconds>(
                                           std::chrono::system_clock::now().time_since_epoch())
                                           .count())},
                    {"config_hash", config_.hash()},
                    {"checksum", fnv1a_hex(body_dump)}};
  file["body"] = body;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out << file.dump(2) << "\n";
}

void Orchestrator::load_state(const json& body) {
  epoch_ = body["epoch"].get<std::uint64_t>();
  mode_ = static_cast<Mode>(body["mode"].get<int>());
  plateau_ = body["plateau"].get<std::uint64_t>();
  gain_streak_ = body["gain_streak"].get<std::uint64_t>();
  best_reward_ = body["best_reward"].get<double>();
  last_redesign_epoch_ = body["last_redesign_epoch"].get<std::int64_t>();
  best_history_ = body["best_history"].get<std::vector<double>>();
  for (const auto& k : body["summarized"]) summarized_.insert(k.get<std::string>());
  initialized_ = body["initialized"].get<bool>();

  std::istringstream rng_stream(body["rng"].get<std::string>());
  rng_stream >> rng_;

  const auto& fj = body["forest"];
  forest_ = Forest(fj["capacity"].get<std::size_t>());
  forest_.set_epoch(fj["epoch"].get<std::uint64_t>());
  forest_.restore_counters(fj["next_node"].get<std::uint64_t>(),
                           fj["next_tree"].get<std::uint64_t>(),
                           fj["created_counter"].get<std::uint64_t>());
  for (const auto& tj : fj["trees"]) {
    PhyloTree t;
    t.id = tj["id"].get<std::string>();
    t.root_id = tj["root"].get<std::string>();
    t.meta.label = tj["label"].get<std::string>();
    t.meta.creation_epoch = tj["creation_epoch"].get<std::uint64_t>();
    t.meta.origin =
        tj["origin"].get<std::string>() == "seed" ? TreeOrigin::Seed : TreeOrigin::Redesign;
    for (const auto& nj : tj["nodes"]) {
      AlgorithmNode n = node_from_json(nj);
      t.nodes.emplace(n.id, std::move(n));
    }
    t.children = tj["children"].get<std::map<std::string, std::vector<std::string>>>();
    forest_.adopt_tree(std::move(t));
  }

  const auto& pj = body["pool"];
  pool_ = ElitePool(pj["k"].get<std::size_t>());
  for (const auto& ej : pj["trajectories"]) {
    EliteTrajectory e;
    e.trajectory = trajectory_from_json(ej["trajectory"]);
    e.source_tree = ej["source_tree"].get<std::string>();
    e.admitted_epoch = ej["admitted_epoch"].get<std::uint64_t>();
    e.feature_vector = ej["features"].get<FeatureVector>();
    pool_.restore_trajectory(std::move(e));
  }
  for (const auto& sj : pj["stats"]) {
    EliteModificationStats s;
    s.key = sj["key"].get<std::string>();
    s.mean_gain = sj["mean"].get<double>();
    s.variance = sj["variance"].get<double>();
    s.count = sj["count"].get<std::uint64_t>();
    s.value = sj["value"].get<double>();
    pool_.restore_stats(std::move(s), sj["m2"].get<double>());
  }
  pool_.set_admissions(pj["admissions"].get<std::uint64_t>());

  summaries_ = SummaryStore();
  for (const auto& sj : body["summaries"]) {
    Summary s;
    s.text = sj["text"].get<std::string>();
    s.pattern_stats.frequency = sj["frequency"].get<double>();
    s.pattern_stats.mean_gain = sj["mean_gain"].get<double>();
    s.pattern_stats.variance = sj["variance"].get<double>();
    s.feature_vector = sj["features"].get<FeatureVector>();
    summaries_.restore_entry(std::move(s));
  }

  const auto& bs = body["backend_states"];
  auto restore = [&](const char* role, std::shared_ptr<CompletionBackend>& b) {
    if (b && bs.contains(role)) {
      const std::string s = bs[role].get<std::string>();
      if (!s.empty()) b->restore_state(s);
    }
  };
  restore("next_step", backends_.next_step);
  restore("modify", backends_.modify);
  restore("design", backends_.design);
  restore("summarize", backends_.summarize);
}

Orchestrator Orchestrator::restore(const std::string& path, BackendSet backends,
                                   std::shared_ptr<Executor> executor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json file = json::parse(buf.str(), nullptr, false);
  if (file.is_discarded() || !file.contains("header") || !file.contains("body"))
    throw CheckpointError("integrity error: checkpoint is not valid JSON");
  const auto& header = file["header"];
  if (header.value("format_version", -1) != 1)
    throw CheckpointError("version mismatch: expected format_version 1");
  if (header.value("checksum", std::string()) != fnv1a_hex(file["body"].dump()))
    throw CheckpointError("integrity error: checksum mismatch");

  std::string cfg_error;
  RunConfig config = RunConfig::from_json(file["body"]["config"], &cfg_error);
  if (!cfg_error.empty()) throw CheckpointError("bad embedded config: " + cfg_error);

  Orchestrator orch(std::move(config), std::move(backends), std::move(executor));
  orch.load_state(file["body"]);
  return orch;
}

}  // namespace evoforest
