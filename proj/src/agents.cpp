#include "evoforest/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace evoforest {

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// Backends

ScriptedReplayBackend ScriptedReplayBackend::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BackendError("cannot open replay file: " + path);
  std::vector<std::string> responses;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("response"))
      throw BackendError("bad replay line: " + line);
    responses.push_back(j["response"].get<std::string>());
  }
  return ScriptedReplayBackend(std::move(responses));
}

std::string ScriptedReplayBackend::complete(const std::string&, const std::string&,
                                            const DecodeParams&) {
  if (position_ >= responses_.size()) throw BackendError("replay script exhausted");
  return responses_[position_++];
}

std::string HttpBackend::complete(const std::string& system_prompt,
                                  const std::string& user_prompt, const DecodeParams& params) {
  nlohmann::json body{
      {"model", config_.model},
      {"messages",
       {{{"role", "system"}, {"content", system_prompt}},
        {{"role", "user"}, {"content", user_prompt}}}},
      {"temperature", params.temperature},
  };
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_s);
    client.set_read_timeout(config_.timeout_s);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str()))
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
      last_error = "malformed response body";
      continue;
    }
    return j["choices"][0]["message"]["content"].get<std::string>();
  }
  throw BackendError("backend unavailable: " + last_error);
}

// ---------------------------------------------------------------------------
// Summary store

bool SummaryStore::add(Summary summary) {
  for (auto& existing : entries_) {
    if (cosine(existing.feature_vector, summary.feature_vector) > dedup_cosine_) {
      if (summary.pattern_stats.mean_gain > existing.pattern_stats.mean_gain)
        existing = std::move(summary);
      return false;  // near-duplicate collapsed
    }
  }
  entries_.push_back(std::move(summary));
  if (entries_.size() > cap_) {
    auto worst = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      return a.pattern_stats.mean_gain < b.pattern_stats.mean_gain;
    });
    const bool dropped_new = &*worst == &entries_.back();
    entries_.erase(worst);
    return !dropped_new;
  }
  return true;
}

std::vector<Summary> SummaryStore::retrieve(const FeatureVector& query, std::size_t count) const {
  std::vector<std::pair<double, const Summary*>> scored;
  scored.reserve(entries_.size());
  for (const auto& s : entries_) scored.emplace_back(cosine(query, s.feature_vector), &s);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->pattern_stats.mean_gain > b.second->pattern_stats.mean_gain;
  });
  std::vector<Summary> out;
  for (const auto& [_, s] : scored) {
    if (out.size() >= count) break;
    out.push_back(*s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Context

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Warmup: return "warmup";
    case Mode::Explore: return "explore";
    case Mode::Exploit: return "exploit";
  }
  return "warmup";
}

std::size_t token_count(const std::string& text) {
  std::size_t n = 0;
  bool in_tok = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_tok = false;
    } else if (!in_tok) {
      in_tok = true;
      ++n;
    }
  }
  return n;
}

namespace {

std::string trajectory_line(const TrajectoryStep& step, std::size_t index) {
  return "  " + std::to_string(index) + ". " + step.modification_summary + " (dr " +
         fmt6(step.delta_reward) + ")";
}

// Truncation stages, applied in order until the render fits the budget.
enum TruncStage {
  kFull = 0,
  kDropSummaries,
  kTrimEliteTrajectories,
  kDropSiblings,
  kElideTrajectoryMiddle,
  kStageCount
};

std::string render_at(const Context& ctx, int stage, std::size_t elite_keep) {
  std::ostringstream out;
  out << "[TARGET]\n";
  out << "metric: " << ctx.target.metric << " (" << ctx.target.direction << ")\n";
  for (const auto& c : ctx.target.constraints) out << "constraint: " << c << "\n";
  out << "[MODE]\n" << mode_name(ctx.mode) << "\n";
  out << "[BUDGET]\nremaining epochs: " << ctx.remaining_epochs << "\n";

  out << "[STATE]\n";
  out << "id: " << ctx.state_id << "\n";
  out << "reward: " << fmt6(ctx.state_reward) << "\n";
  out << "depth: " << ctx.state_depth << "\n";
  out << "code:\n" << ctx.state_code;
  if (!ctx.state_code.empty() && ctx.state_code.back() != '\n') out << "\n";

  out << "[TRAJECTORY]\n";
  const auto& steps = ctx.trajectory.steps;
  if (stage >= kElideTrajectoryMiddle && steps.size() > 6) {
    for (std::size_t i = 0; i < 3; ++i) out << trajectory_line(steps[i], i + 1) << "\n";
    out << "  ... (" << steps.size() - 6 << " steps elided)\n";
    for (std::size_t i = steps.size() - 3; i < steps.size(); ++i)
      out << trajectory_line(steps[i], i + 1) << "\n";
  } else {
    for (std::size_t i = 0; i < steps.size(); ++i) out << trajectory_line(steps[i], i + 1) << "\n";
  }
  out << "final reward: " << fmt6(ctx.trajectory.final_reward) << "\n";

  if (stage < kDropSiblings && !ctx.sibling_digest.empty()) {
    out << "[SIBLINGS]\n";
    for (const auto& s : ctx.sibling_digest) {
      out << "  - " << (s.success ? "" : "[failed] ") << s.summary << " (dr "
          << fmt6(s.delta_reward) << ")\n";
    }
  }

  const std::size_t n_elite =
      stage >= kTrimEliteTrajectories ? std::min(elite_keep, ctx.elite_trajectories.size())
                                      : ctx.elite_trajectories.size();
  if (n_elite > 0) {
    out << "[ELITE-TRAJECTORIES]\n";
    for (std::size_t i = 0; i < n_elite; ++i) {
      const auto& e = ctx.elite_trajectories[i];
      out << "  - final " << fmt6(e.trajectory.final_reward) << " [tree " << e.source_tree
          << "]: ";
      for (std::size_t j = 0; j < e.trajectory.steps.size(); ++j) {
        if (j) out << " -> ";
        out << e.trajectory.steps[j].modification_summary;
      }
      out << "\n";
    }
  }

  if (!ctx.elite_modifications.empty()) {
    out << "[ELITE-MODIFICATIONS]\n";
    for (const auto& m : ctx.elite_modifications) {
      out << "  - \"" << m.key << "\" value " << fmt6(m.value) << " mean " << fmt6(m.mean_gain)
          << " var " << fmt6(m.variance) << " n " << m.count << "\n";
    }
  }

  if (stage < kDropSummaries && !ctx.summaries.empty()) {
    out << "[SUMMARIES]\n";
    for (const auto& s : ctx.summaries)
      out << "  - " << s.text << " (mean gain " << fmt6(s.pattern_stats.mean_gain) << ")\n";
  }
  return out.str();
}

}  // namespace

std::string Context::render() const {
  std::string best;
  for (int stage = 0; stage < kStageCount; ++stage) {
    // Within the elite-trim stage, shed least-similar entries one at a time.
    std::size_t keep = elite_trajectories.size();
    while (true) {
      best = render_at(*this, stage, keep);
      if (token_count(best) <= token_budget) return best;
      if (stage == kTrimEliteTrajectories && keep > 1) {
        --keep;
        continue;
      }
      break;
    }
  }
  return best;  // state and target are never truncated
}

Context build_context(const AlgorithmNode& node, const PhyloTree& tree, const Forest& forest,
                      const ElitePool& pool, const SummaryStore& summaries, Mode mode,
                      const OptimizationTarget& target, const ContextOptions& opts,
                      std::uint64_t remaining_epochs, std::mt19937_64& rng) {
  Context ctx;
  ctx.target = target;
  ctx.mode = mode;
  ctx.remaining_epochs = remaining_epochs;
  ctx.token_budget = opts.token_budget;

  ctx.state_id = node.id;
  ctx.state_code = node.code;
  ctx.state_reward = node.reward;
  ctx.state_depth = node.depth;

  ctx.trajectory = [&] {
    // Walk root-to-node within the tree snapshot.
    std::vector<const AlgorithmNode*> path;
    const AlgorithmNode* cur = &node;
    path.push_back(cur);
    while (cur->parent_id) {
      cur = &tree.node(*cur->parent_id);
      path.push_back(cur);
    }
    std::reverse(path.begin(), path.end());
    Trajectory t;
    t.tree_id = tree.id;
    for (const auto* n : path) t.steps.push_back({n->id, n->modification_summary, n->delta_reward});
    t.final_reward = path.back()->reward;
    t.terminal_success = path.back()->status.success();
    return t;
  }();

  if (node.parent_id) {
    for (const auto& sid : tree.children_of(*node.parent_id)) {
      if (sid == node.id) continue;
      const AlgorithmNode& sib = tree.node(sid);
      if (sib.status.pruned()) continue;
      ctx.sibling_digest.push_back(
          {sib.modification_summary, sib.delta_reward, sib.status.success()});
    }
  }

  std::size_t traj_count = opts.elite_trajectory_count;
  std::size_t mod_count = opts.elite_modification_count;
  switch (mode) {
    case Mode::Warmup:
      traj_count = std::min<std::size_t>(1, traj_count);
      mod_count = std::min<std::size_t>(1, mod_count);
      break;
    case Mode::Explore:
      break;  // diversity handled below
    case Mode::Exploit:
      mod_count *= 2;
      traj_count = std::max<std::size_t>(1, traj_count / 2);
      break;
  }

  const FeatureVector query = trajectory_features(ctx.trajectory);
  if (mode == Mode::Explore) {
    // Oversample, then greedily keep a maximally dissimilar subset.
    auto cand = pool.sample_trajectories(query, traj_count * 2, rng);
    std::vector<EliteTrajectory> chosen;
    while (chosen.size() < traj_count && !cand.empty()) {
      std::size_t pick = 0;
      if (!chosen.empty()) {
        double best_minsim = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cand.size(); ++i) {
          double minsim = std::numeric_limits<double>::infinity();
          for (const auto& c : chosen)
            minsim = std::min(minsim, cosine(cand[i].feature_vector, c.feature_vector));
          if (minsim < best_minsim) {
            best_minsim = minsim;
            pick = i;
          }
        }
      }
      chosen.push_back(cand[pick]);
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    ctx.elite_trajectories = std::move(chosen);
  } else {
    ctx.elite_trajectories = pool.sample_trajectories(query, traj_count, rng);
  }
  // Most-similar-first so budget truncation sheds the least relevant.
  std::stable_sort(ctx.elite_trajectories.begin(), ctx.elite_trajectories.end(),
                   [&](const EliteTrajectory& a, const EliteTrajectory& b) {
                     return cosine(query, a.feature_vector) > cosine(query, b.feature_vector);
                   });

  ctx.elite_modifications = pool.top_modifications(mod_count);
  ctx.summaries = summaries.retrieve(query, opts.summary_count);
  (void)forest;
  return ctx;
}

// ---------------------------------------------------------------------------
// Mode selection

Mode select_mode(const ModeSignals& s, const ModeThresholds& t) {
  if (s.epoch < t.warmup_epochs) return Mode::Warmup;
  if (s.plateau_epochs >= t.plateau || s.forest_diversity < t.diversity) return Mode::Explore;
  if (s.gain_streak >= t.gain_streak && s.top_modification_value >= t.top_value)
    return Mode::Exploit;
  return s.previous;
}

// ---------------------------------------------------------------------------
// Output parsing

std::optional<Proposal> parse_proposal(const std::string& reply) {
  auto section = [&](const char* tag, const char* next1,
                     const char* next2) -> std::optional<std::string> {
    std::size_t at = reply.find(tag);
    if (at == std::string::npos) return std::nullopt;
    std::size_t begin = at + std::strlen(tag);
    std::size_t end = reply.size();
    for (const char* nxt : {next1, next2}) {
      if (!nxt) continue;
      std::size_t p = reply.find(nxt, begin);
      if (p != std::string::npos) end = std::min(end, p);
    }
    std::string body = trim(reply.substr(begin, end - begin));
    if (body.empty()) return std::nullopt;
    return body;
  };

  auto high = section("[HIGH-LEVEL]", "[DETAILED]", "[ANALYSIS]");
  auto detailed = section("[DETAILED]", "[ANALYSIS]", "[HIGH-LEVEL]");
  auto analysis = section("[ANALYSIS]", "[HIGH-LEVEL]", "[DETAILED]");
  if (!high || !detailed || !analysis) return std::nullopt;

  Proposal p;
  p.high_level = *high;
  p.detailed_spec = *detailed;
  p.analysis_text = *analysis;
  std::istringstream lines(*analysis);
  std::string line;
  while (std::getline(lines, line)) {
    line = trim(line);
    auto grab = [&](const char* key) -> std::optional<std::string> {
      std::string k = key;
      if (line.size() > k.size() && line.compare(0, k.size(), k) == 0)
        return trim(line.substr(k.size()));
      return std::nullopt;
    };
    if (auto v = grab("expected_gain:")) p.analysis.expected_gain = *v;
    else if (auto v = grab("risks:")) p.analysis.risks = *v;
    else if (auto v = grab("fallback:")) p.analysis.fallback = *v;
  }
  return p;
}

std::string extract_code_block(const std::string& reply) {
  std::size_t open = reply.find("```");
  if (open == std::string::npos) return trim(reply);
  std::size_t body_start = reply.find('\n', open);
  if (body_start == std::string::npos) return trim(reply);
  ++body_start;
  std::size_t close = reply.find("```", body_start);
  if (close == std::string::npos) return trim(reply.substr(body_start));
  return reply.substr(body_start, close - body_start);
}

// ---------------------------------------------------------------------------
// Agents

namespace {

const char* kNextStepSystem =
    "ROLE: next-step\n"
    "You propose the next modification for an iteratively optimized algorithm. "
    "Study the trajectory, siblings, elite exemplars, and summaries, then reply with exactly "
    "three sections:\n"
    "[HIGH-LEVEL]\n<one-sentence semantic summary of the modification>\n"
    "[DETAILED]\n<execution-ready instructions for the editor>\n"
    "[ANALYSIS]\nexpected_gain: <...>\nrisks: <...>\nfallback: <...>";

const char* kFormatReminder =
    "\n\nFORMAT REMINDER: the previous reply was malformed. Reply again with the three tagged "
    "sections [HIGH-LEVEL], [DETAILED], [ANALYSIS], each non-empty.";

const char* kModifySystem =
    "ROLE: modify\n"
    "You are a careful code editor. Apply the detailed specification to the given artifact with "
    "a minimal diff: change only what the specification requires, keep interfaces stable. "
    "Reply with the complete replacement artifact inside a ``` fenced block.";

const char* kDesignSystem =
    "ROLE: design\n"
    "You perform holistic redesigns. Starting from the elite artifact below, produce a full "
    "replacement seed artifact embodying a structurally different approach informed by the "
    "summaries and exemplar trajectories. Reply with the complete artifact inside a ``` fenced "
    "block.";

const char* kSummarizeSystem =
    "ROLE: summarize\n"
    "Distill the given optimization trajectory into one short reusable insight describing the "
    "productive modification pattern. Reply with a single sentence.";

}  // namespace

Proposal next_step(const Context& context, CompletionBackend& backend, int reask_limit) {
  std::string user = context.render();
  DecodeParams decode;
  for (int attempt = 0; attempt <= reask_limit; ++attempt) {
    const std::string reply = backend.complete(kNextStepSystem, user, decode);
    if (auto p = parse_proposal(reply)) return *p;
    user += kFormatReminder;
  }
  throw FormatError("next_step: unparseable reply after " + std::to_string(reask_limit) +
                    " re-asks");
}

double normalized_edit_distance(const std::string& a_in, const std::string& b_in) {
  // Capped to keep the O(n*m) table small; artifacts here are short.
  constexpr std::size_t kCap = 4000;
  std::string a = a_in.substr(0, kCap);
  std::string b = b_in.substr(0, kCap);
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

ModifyOutcome modify(const Proposal& proposal, const AlgorithmNode& parent,
                     CompletionBackend& backend, const Executor& executor,
                     const std::string& task_ref, const ResourceLimits& limits,
                     int debug_retries) {
  ModifyOutcome outcome;
  DecodeParams decode;

  std::string user = "[PARENT ARTIFACT]\n" + parent.code + "\n[SPECIFICATION]\n" +
                     proposal.detailed_spec + "\n[INTENT]\n" + proposal.high_level + "\n";
  std::string code;
  EvalResult result = EvalResult::failure("not evaluated");

  for (int attempt = 0; attempt <= debug_retries; ++attempt) {
    try {
      code = extract_code_block(backend.complete(kModifySystem, user, decode));
    } catch (const BackendError& e) {
      outcome.code = code;
      outcome.result = EvalResult::failure(std::string("backend error: ") + e.what());
      outcome.debug_attempts = attempt;
      return outcome;
    }

    EvalRequest dry{code, task_ref, limits, EvalMode::DryRun};
    result = executor.evaluate(dry);
    if (result.ok()) {
      EvalRequest full{code, task_ref, limits, EvalMode::Full};
      result = executor.evaluate(full);
    }
    outcome.debug_attempts = attempt;
    if (result.ok()) break;
    if (attempt == debug_retries) break;

    // Targeted repair: keep the original intent, fix the diagnosed failure.
    user = "[PARENT ARTIFACT]\n" + parent.code + "\n[SPECIFICATION]\n" + proposal.detailed_spec +
           "\n[INTENT]\n" + proposal.high_level + "\n[PREVIOUS ATTEMPT]\n" + code +
           "\n[FAILURE]\n" + result.reason +
           "\nRepair the artifact with the smallest change that fixes this failure while "
           "preserving the original modification intent.\n";
  }

  outcome.code = code;
  outcome.result = result;
  outcome.edit_distance = normalized_edit_distance(parent.code, code);
  return outcome;
}

std::string design(const EliteTrajectory& elite, const std::string& elite_code,
                   const std::vector<Summary>& summaries,
                   const std::vector<EliteTrajectory>& similar, CompletionBackend& backend,
                   int reask_limit) {
  std::ostringstream user;
  user << "[ELITE ARTIFACT] (final reward " << fmt6(elite.trajectory.final_reward) << ")\n"
       << elite_code << "\n[TRAJECTORY SUMMARIES]\n";
  for (const auto& s : summaries) user << "  - " << s.text << "\n";
  user << "[EXEMPLAR TRAJECTORIES]\n";
  for (const auto& e : similar) {
    user << "  - final " << fmt6(e.trajectory.final_reward) << " [tree " << e.source_tree << "]: ";
    for (std::size_t j = 0; j < e.trajectory.steps.size(); ++j) {
      if (j) user << " -> ";
      user << e.trajectory.steps[j].modification_summary;
    }
    user << "\n";
  }

  std::string prompt = user.str();
  DecodeParams decode;
  for (int attempt = 0; attempt <= reask_limit; ++attempt) {
    const std::string reply = backend.complete(kDesignSystem, prompt, decode);
    const std::string code = extract_code_block(reply);
    if (!code.empty()) return code;
    prompt += "\n\nFORMAT REMINDER: reply with the complete artifact in a ``` fenced block.";
  }
  throw FormatError("design: empty artifact after re-asks");
}

std::vector<Summary> summarize(const std::vector<Trajectory>& trajectories,
                               CompletionBackend& backend, SummaryStore& store) {
  if (trajectories.empty()) throw AgentError("summarize: no trajectories");
  std::vector<Summary> produced;
  DecodeParams decode;
  for (const auto& traj : trajectories) {
    std::ostringstream user;
    user << "[TRAJECTORY] final reward " << fmt6(traj.final_reward) << "\n";
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
      user << "  " << i + 1 << ". " << traj.steps[i].modification_summary << " (dr "
           << fmt6(traj.steps[i].delta_reward) << ")\n";
    }
    std::string text;
    try {
      text = trim(backend.complete(kSummarizeSystem, user.str(), decode));
    } catch (const BackendError&) {
      return {};  // skip the cycle, store unchanged
    }
    if (text.empty()) continue;

    Summary s;
    s.text = text;
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < traj.steps.size(); ++i) {  // non-root deltas
      ++n;
      const double d1 = traj.steps[i].delta_reward - mean;
      mean += d1 / static_cast<double>(n);
      m2 += d1 * (traj.steps[i].delta_reward - mean);
    }
    s.pattern_stats.frequency = static_cast<double>(n);
    s.pattern_stats.mean_gain = mean;
    s.pattern_stats.variance = n > 0 ? m2 / static_cast<double>(n) : 0.0;
    std::string fv_text = text;
    for (const auto& step : traj.steps) fv_text += ' ' + step.modification_summary;
    s.feature_vector = feature_vector(fv_text);
    produced.push_back(s);
  }
  for (auto& s : produced) store.add(s);
  return produced;
}

}  // namespace evoforest
