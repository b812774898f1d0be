#include "evoforest/testbed.hpp"

#include <sys/stat.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace evoforest {

namespace fs = std::filesystem;

namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Harness obeying the executor protocol: argv[1] = artifact, argv[2] = task
// dir, final stdout line `SCORE <decimal>`. Directives in the artifact
// (sleep_ms, alloc_mb, emit = garbage) exist for fault-injection tests.
const char* kHarnessScript = R"PY(#!/usr/bin/env python3
import json, math, os, sys, time

def main():
    artifact, task_dir = sys.argv[1], sys.argv[2]
    with open(artifact) as f:
        text = f.read()
    nums, strs = {}, {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith('#') or '=' not in line:
            continue
        k, v = line.split('=', 1)
        k, v = k.strip(), v.strip()
        try:
            nums[k] = float(v)
        except ValueError:
            strs[k] = v
    if os.environ.get('EVOFOREST_DRY_RUN') == '1':
        print('SCORE 0.0')
        return
    if nums.get('sleep_ms'):
        time.sleep(nums['sleep_ms'] / 1000.0)
    if nums.get('alloc_mb'):
        blob = bytearray(int(nums['alloc_mb'] * 1024 * 1024))
        blob[0] = 1
    if strs.get('emit') == 'garbage':
        print('no score on this line')
        return
    with open(os.path.join(task_dir, 'task.json')) as f:
        spec = json.load(f)
    kind = spec['kind']
    if kind == 'quad1d':
        x = nums.get('x', 0.0)
        score = 10.0 - (x - 3.0) ** 2
    elif kind == 'bimodal2d':
        x, y = nums.get('x', 0.0), nums.get('y', 0.0)
        g1 = 5.0 * math.exp(-((x - 1.0) ** 2 + (y - 1.0) ** 2) / 2.0)
        g2 = 8.0 * math.exp(-((x - 6.0) ** 2 + (y - 6.0) ** 2) / 2.0)
        score = max(g1, g2)
    elif kind == 'string_edit':
        target = spec['target'].split()
        cand = set((strs.get('s') or '').split())
        score = float(sum(1 for t in target if t in cand))
    else:
        print('unknown task kind: %s' % kind, file=sys.stderr)
        sys.exit(1)
    print('SCORE %.12g' % score)

main()
)PY";

}  // namespace

ParamSet decode_params(const std::string& code) {
  ParamSet out;
  std::istringstream in(code);
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      std::size_t used = 0;
      double v = std::stod(value, &used);
      if (used == value.size()) {
        out.numbers[key] = v;
        continue;
      }
    } catch (const std::exception&) {
    }
    out.strings[key] = value;
  }
  return out;
}

std::string encode_params(const ParamSet& params) {
  std::string out = "# candidate parameters\n";
  for (const auto& [k, v] : params.numbers) out += k + " = " + fmt_num(v) + "\n";
  for (const auto& [k, v] : params.strings) out += k + " = " + v + "\n";
  return out;
}

std::vector<SyntheticTask> builtin_tasks() {
  std::vector<SyntheticTask> tasks;

  {
    SyntheticTask t;
    t.id = "quad1d";
    t.kind = "quad1d";
    t.description = "1-D quadratic: score = 10 - (x - 3)^2, optimum 10 at x = 3";
    t.param_names = {"x"};
    t.score_fn = [](const ParamSet& p) {
      const double x = p.numbers.count("x") ? p.numbers.at("x") : 0.0;
      return 10.0 - (x - 3.0) * (x - 3.0);
    };
    t.optimum = 10.0;
    t.optimum_params.numbers["x"] = 3.0;
    t.constraints = {"|x| <= 100"};
    t.checker = [](const std::string& code) -> ConstraintResult {
      const ParamSet p = decode_params(code);
      const double x = p.numbers.count("x") ? p.numbers.at("x") : 0.0;
      if (std::fabs(x) > 100.0) return {false, "|x| exceeds 100"};
      return {true, ""};
    };
    ParamSet seed;
    seed.numbers["x"] = 0.0;
    t.seed_code = encode_params(seed);
    tasks.push_back(std::move(t));
  }

  {
    SyntheticTask t;
    t.id = "bimodal2d";
    t.kind = "bimodal2d";
    t.description =
        "2-D bimodal: score = max(5*exp(-(dist to (1,1))^2/2), 8*exp(-(dist to (6,6))^2/2)), "
        "optimum 8 at (6,6)";
    t.param_names = {"x", "y"};
    t.score_fn = [](const ParamSet& p) {
      const double x = p.numbers.count("x") ? p.numbers.at("x") : 0.0;
      const double y = p.numbers.count("y") ? p.numbers.at("y") : 0.0;
      const double g1 = 5.0 * std::exp(-((x - 1) * (x - 1) + (y - 1) * (y - 1)) / 2.0);
      const double g2 = 8.0 * std::exp(-((x - 6) * (x - 6) + (y - 6) * (y - 6)) / 2.0);
      return std::max(g1, g2);
    };
    t.optimum = 8.0;
    t.optimum_params.numbers["x"] = 6.0;
    t.optimum_params.numbers["y"] = 6.0;
    t.constraints = {"|x| <= 100", "|y| <= 100"};
    t.checker = [](const std::string& code) -> ConstraintResult {
      const ParamSet p = decode_params(code);
      for (const char* name : {"x", "y"}) {
        const double v = p.numbers.count(name) ? p.numbers.at(name) : 0.0;
        if (std::fabs(v) > 100.0) return {false, std::string("|") + name + "| exceeds 100"};
      }
      return {true, ""};
    };
    ParamSet seed;
    seed.numbers["x"] = 0.0;
    seed.numbers["y"] = 0.0;
    t.seed_code = encode_params(seed);
    tasks.push_back(std::move(t));
  }

  {
    SyntheticTask t;
    const std::string target = "fast stable cache friendly kernel";
    t.id = "string_edit";
    t.kind = "string_edit";
    t.description = "discrete edit task: score = token overlap with a hidden target, optimum 5";
    t.score_fn = [target](const ParamSet& p) {
      std::set<std::string> cand;
      if (p.strings.count("s")) {
        std::istringstream in(p.strings.at("s"));
        std::string tok;
        while (in >> tok) cand.insert(tok);
      }
      std::istringstream want(target);
      std::string tok;
      double score = 0.0;
      while (want >> tok) {
        if (cand.count(tok)) score += 1.0;
      }
      return score;
    };
    t.optimum = 5.0;
    t.optimum_params.strings["s"] = target;
    t.constraints = {"len(s) <= 200"};
    t.checker = [](const std::string& code) -> ConstraintResult {
      const ParamSet p = decode_params(code);
      if (p.strings.count("s") && p.strings.at("s").size() > 200)
        return {false, "s longer than 200 chars"};
      return {true, ""};
    };
    ParamSet seed;
    seed.strings["s"] = "slow kernel";
    t.seed_code = encode_params(seed);
    nlohmann::json extra{{"target", target}};
    t.extra_task_config = extra.dump();
    tasks.push_back(std::move(t));
  }

  return tasks;
}

SyntheticTask find_task(const std::string& id) {
  for (auto& t : builtin_tasks()) {
    if (t.id == id) return t;
  }
  throw std::runtime_error("unknown builtin task: " + id);
}

std::string install_task(const SyntheticTask& task, Executor& executor,
                         const std::string& base_dir) {
  const fs::path dir = fs::path(base_dir) / task.id;
  fs::create_directories(dir);

  const fs::path harness = dir / "harness.py";
  {
    std::ofstream out(harness, std::ios::binary);
    out << kHarnessScript;
  }
  ::chmod(harness.c_str(), 0755);

  nlohmann::json spec{{"kind", task.kind}};
  if (!task.extra_task_config.empty()) {
    auto extra = nlohmann::json::parse(task.extra_task_config);
    for (auto& [k, v] : extra.items()) spec[k] = v;
  }
  {
    std::ofstream out(dir / "task.json", std::ios::binary);
    out << spec.dump(2) << "\n";
  }

  TaskBinding binding;
  binding.harness_argv = {harness.string()};
  binding.task_dir = dir.string();
  binding.constraints = task.checker;
  executor.register_task(task.id, std::move(binding));
  return dir.string();
}

// ---------------------------------------------------------------------------
// Scripted hill climber

namespace {

std::string section_between(const std::string& text, const std::string& begin,
                            const std::vector<std::string>& ends) {
  std::size_t at = text.find(begin);
  if (at == std::string::npos) return "";
  std::size_t start = at + begin.size();
  std::size_t end = text.size();
  for (const auto& e : ends) {
    std::size_t p = text.find(e, start);
    if (p != std::string::npos) end = std::min(end, p);
  }
  return text.substr(start, end - start);
}

std::string role_of(const std::string& system_prompt) {
  if (system_prompt.rfind("ROLE: ", 0) != 0) return "";
  std::size_t nl = system_prompt.find('\n');
  return trim(system_prompt.substr(6, nl == std::string::npos ? std::string::npos : nl - 6));
}

}  // namespace

std::string HillClimbBackend::complete(const std::string& system_prompt,
                                       const std::string& user_prompt, const DecodeParams&) {
  const std::string role = role_of(system_prompt);

  if (role == "next-step") {
    const std::string code =
        section_between(user_prompt, "code:\n", {"[TRAJECTORY]"});
    ParamSet current = decode_params(code);
    std::ostringstream detailed;
    for (const auto& name : task_.param_names) {
      const double cur = current.numbers.count(name) ? current.numbers.at(name) : 0.0;
      const double target = task_.optimum_params.numbers.count(name)
                                ? task_.optimum_params.numbers.at(name)
                                : cur;
      detailed << "set " << name << " = " << fmt_num(cur + rate_ * (target - cur)) << "\n";
    }
    for (const auto& [name, target] : task_.optimum_params.strings) {
      detailed << "set " << name << " = " << target << "\n";
    }
    return std::string("[HIGH-LEVEL]\nnudge parameters toward improvement with a decaying step\n") +
           "[DETAILED]\n" + detailed.str() +
           "[ANALYSIS]\nexpected_gain: shrinks the optimality gap by the step fraction\n"
           "risks: none on a smooth landscape\nfallback: keep the parent artifact\n";
  }

  if (role == "modify") {
    const std::string parent_code =
        section_between(user_prompt, "[PARENT ARTIFACT]\n", {"[SPECIFICATION]"});
    const std::string spec = section_between(user_prompt, "[SPECIFICATION]\n", {"[INTENT]"});
    ParamSet params = decode_params(parent_code);
    std::istringstream lines(spec);
    std::string line;
    while (std::getline(lines, line)) {
      line = trim(line);
      if (line.rfind("set ", 0) != 0) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string name = trim(line.substr(4, eq - 4));
      const std::string value = trim(line.substr(eq + 1));
      try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used == value.size()) {
          params.numbers[name] = v;
          continue;
        }
      } catch (const std::exception&) {
      }
      params.strings[name] = value;
    }
    return "```\n" + encode_params(params) + "```\n";
  }

  if (role == "design") {
    const std::string elite_code =
        section_between(user_prompt, ")\n", {"[TRAJECTORY SUMMARIES]"});
    ParamSet params = decode_params(elite_code);
    for (const auto& name : task_.param_names) {
      const double cur = params.numbers.count(name) ? params.numbers.at(name) : 0.0;
      const double target = task_.optimum_params.numbers.count(name)
                                ? task_.optimum_params.numbers.at(name)
                                : cur;
      params.numbers[name] = cur + rate_ * (target - cur);
    }
    return "```\n" + encode_params(params) + "```\n";
  }

  if (role == "summarize") {
    return "repeatedly nudge parameters toward the optimum with decaying steps";
  }

  throw BackendError("hill climber: unknown role in system prompt");
}

std::string FaultInjectingBackend::complete(const std::string& system_prompt,
                                            const std::string& user_prompt,
                                            const DecodeParams& params) {
  const std::size_t index = calls_++;
  auto it = faults_.find(index);
  if (it == faults_.end()) return inner_->complete(system_prompt, user_prompt, params);
  switch (it->second) {
    case FaultKind::MalformedProposal:
      return "I cannot structure this reply properly.";
    case FaultKind::TimeoutArtifact:
      return "```\n# candidate parameters\nsleep_ms = " + fmt_num(timeout_sleep_ms_) + "\n```\n";
    case FaultKind::GarbageArtifact:
      return "```\n# candidate parameters\nemit = garbage\n```\n";
  }
  return inner_->complete(system_prompt, user_prompt, params);
}

void FaultInjectingBackend::restore_state(const std::string& s) {
  std::size_t sep = s.find(';');
  calls_ = std::stoull(s.substr(0, sep));
  if (sep != std::string::npos) inner_->restore_state(s.substr(sep + 1));
}

std::shared_ptr<CompletionBackend> scripted_hill_climber(const SyntheticTask& task, double rate) {
  return std::make_shared<HillClimbBackend>(task, rate);
}

}  // namespace evoforest
