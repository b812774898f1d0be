// Command-line front end: run, resume, inspect, report.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "evoforest/orchestrator.hpp"
#include "evoforest/testbed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace evoforest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitLookup = 5;

std::shared_ptr<CompletionBackend> make_backend(const BackendConfig& cfg,
                                                const std::string& task_id) {
  if (cfg.kind == "hill_climb") return scripted_hill_climber(find_task(task_id), cfg.hill_climb_rate);
  if (cfg.kind == "replay")
    return std::make_shared<ScriptedReplayBackend>(ScriptedReplayBackend::load(cfg.replay_path));
  if (cfg.kind == "http") return std::make_shared<HttpBackend>(cfg.http);
  throw std::runtime_error("unknown backend kind: " + cfg.kind);
}

BackendSet make_backends(const RunConfig& config) {
  BackendConfig fallback;  // hill_climb default
  auto pick = [&](const char* role) {
    auto it = config.backends.find(role);
    return make_backend(it != config.backends.end() ? it->second : fallback, config.task);
  };
  return {pick("next_step"), pick("modify"), pick("design"), pick("summarize")};
}

std::shared_ptr<Executor> make_executor(const RunConfig& config, const std::string& task_base) {
  auto executor = std::make_shared<Executor>();
  install_task(find_task(config.task), *executor, task_base);
  return executor;
}

RunConfig read_config(const std::string& path, std::string* error) {
  std::ifstream in(path);
  if (!in) {
    *error = "cannot open config file: " + path;
    return {};
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    *error = "config is not valid JSON: " + path;
    return {};
  }
  RunConfig config = RunConfig::from_json(j, error);
  if (error->empty() && config.seed_codes.empty())
    config.seed_codes = {find_task(config.task).seed_code};
  return config;
}

void write_outputs(Orchestrator& orch, const std::string& out_dir) {
  fs::create_directories(out_dir);
  orch.checkpoint((fs::path(out_dir) / "checkpoint.json").string());

  std::ofstream sx(fs::path(out_dir) / "forest.sexpr", std::ios::binary);
  for (const auto& [tid, tree] : orch.forest().trees()) sx << to_sexpr(tree) << "\n";

  std::ofstream csv(fs::path(out_dir) / "report.csv", std::ios::binary);
  csv << "epoch,best_reward\n";
  const auto& hist = orch.best_history();
  for (std::size_t i = 0; i < hist.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu,%.6f\n", i, hist[i]);
    csv << line;
  }
}

void print_report(const Orchestrator& orch) {
  std::printf("best per tree:\n");
  std::printf("%-8s %-8s %12s %6s\n", "tree", "node", "reward", "nodes");
  for (const auto& [tid, tree] : orch.forest().trees()) {
    auto best = orch.forest().best_node(tid);
    if (!best) continue;
    const auto& n = tree.node(*best);
    std::printf("%-8s %-8s %12.6f %6zu\n", tid.c_str(), best->c_str(), n.reward,
                tree.nodes.size());
  }
  std::printf("\ntop modifications:\n");
  std::printf("%6s %6s %10s  %s\n", "value", "n", "mean", "modification");
  for (const auto& s : orch.pool().top_modifications(10))
    std::printf("%6.3f %6llu %10.4f  %s\n", s.value, static_cast<unsigned long long>(s.count),
                s.mean_gain, s.key.c_str());
  std::printf("\nepochs completed: %llu\n", static_cast<unsigned long long>(orch.epoch()));
}

int do_run(const std::string& config_path, std::int64_t epochs_override) {
  std::string error;
  RunConfig config = read_config(config_path, &error);
  if (!error.empty()) {
    std::cerr << "config error: " << error << "\n";
    return kExitConfig;
  }
  if (epochs_override >= 0) config.epochs = static_cast<std::uint64_t>(epochs_override);
  if (config.output_dir.empty()) config.output_dir = "evoforest_out";

  SyntheticTask task;
  try {
    task = find_task(config.task);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  (void)task;

  fs::create_directories(config.output_dir);
  auto executor = make_executor(config, (fs::path(config.output_dir) / "tasks").string());
  Orchestrator orch(config, make_backends(config), executor);
  orch.open_event_log((fs::path(config.output_dir) / "events.jsonl").string());

  try {
    const BestResult best = orch.run(config.epochs);
    write_outputs(orch, config.output_dir);
    std::printf("best: tree=%s node=%s reward=%.6f\n", best.tree_id.c_str(),
                best.node_id.c_str(), best.reward);
    return kExitOk;
  } catch (const AbortedError& e) {
    std::cerr << "aborted: " << e.what() << " (resume from " << e.checkpoint_path << ")\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

int do_resume(const std::string& checkpoint_path, std::uint64_t epochs,
              const std::string& out_override) {
  std::ifstream probe(checkpoint_path);
  if (!probe) {
    std::cerr << "checkpoint error: cannot open " << checkpoint_path << "\n";
    return kExitCheckpoint;
  }
  probe.close();
  try {
    // Bootstrap read to recover the config before constructing backends.
    std::ifstream in(checkpoint_path, std::ios::binary);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.contains("body") || !file["body"].contains("config"))
      throw CheckpointError("integrity error: malformed checkpoint");
    std::string error;
    RunConfig config = RunConfig::from_json(file["body"]["config"], &error);
    if (!error.empty()) throw CheckpointError("bad embedded config: " + error);
    if (!out_override.empty()) config.output_dir = out_override;
    if (config.output_dir.empty()) config.output_dir = "evoforest_out";

    auto executor = make_executor(config, (fs::path(config.output_dir) / "tasks").string());
    Orchestrator orch = Orchestrator::restore(checkpoint_path, make_backends(config), executor);
    orch.open_event_log((fs::path(config.output_dir) / "events.jsonl").string());
    const BestResult best = orch.run(epochs);
    write_outputs(orch, config.output_dir);
    std::printf("best: tree=%s node=%s reward=%.6f\n", best.tree_id.c_str(),
                best.node_id.c_str(), best.reward);
    return kExitOk;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const AbortedError& e) {
    std::cerr << "aborted: " << e.what() << " (resume from " << e.checkpoint_path << ")\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
}

std::optional<Orchestrator> load_readonly(const std::string& checkpoint_path, int* rc) {
  try {
    // Inspection needs no live backends or tasks; stubs suffice.
    BackendSet stubs{std::make_shared<ScriptedReplayBackend>(std::vector<std::string>{}),
                     std::make_shared<ScriptedReplayBackend>(std::vector<std::string>{}),
                     std::make_shared<ScriptedReplayBackend>(std::vector<std::string>{}),
                     std::make_shared<ScriptedReplayBackend>(std::vector<std::string>{})};
    return Orchestrator::restore(checkpoint_path, std::move(stubs),
                                 std::make_shared<Executor>());
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    *rc = kExitCheckpoint;
    return std::nullopt;
  }
}

int do_inspect(const std::string& checkpoint_path, const std::string& tree_id, bool all,
               const std::string& format) {
  int rc = kExitOk;
  auto orch = load_readonly(checkpoint_path, &rc);
  if (!orch) return rc;
  if (format != "sexpr" && format != "dot") {
    std::cerr << "config error: --format must be sexpr or dot\n";
    return kExitConfig;
  }
  std::vector<const PhyloTree*> targets;
  if (all) {
    for (const auto& [_, t] : orch->forest().trees()) targets.push_back(&t);
  } else {
    if (!orch->forest().trees().count(tree_id)) {
      std::cerr << "lookup error: no such tree: " << tree_id << "\n";
      return kExitLookup;
    }
    targets.push_back(&orch->forest().tree(tree_id));
  }
  for (const PhyloTree* t : targets)
    std::cout << (format == "sexpr" ? to_sexpr(*t) : to_dot(*t)) << "\n";
  return kExitOk;
}

int do_report(const std::string& checkpoint_path, const std::string& csv_path) {
  int rc = kExitOk;
  auto orch = load_readonly(checkpoint_path, &rc);
  if (!orch) return rc;
  print_report(*orch);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
      std::cerr << "error: cannot write " << csv_path << "\n";
      return kExitConfig;
    }
    csv << "epoch,best_reward\n";
    const auto& hist = orch->best_history();
    for (std::size_t i = 0; i < hist.size(); ++i) {
      char line[64];
      std::snprintf(line, sizeof(line), "%zu,%.6f\n", i, hist[i]);
      csv << line;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolutionary program-search orchestrator"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, tree_id, format = "sexpr", out_dir, csv_path;
  std::int64_t epochs_override = -1;
  std::uint64_t resume_epochs = 10;
  bool all_trees = false;

  auto* run = app.add_subcommand("run", "start a fresh optimization run");
  run->add_option("--config", config_path, "run configuration JSON")->required();
  run->add_option("--epochs", epochs_override, "override configured epoch count");

  auto* resume = app.add_subcommand("resume", "continue from a checkpoint");
  resume->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  resume->add_option("--epochs", resume_epochs, "additional epochs to run");
  resume->add_option("--output-dir", out_dir, "override output directory");

  auto* inspect = app.add_subcommand("inspect", "print trees from a checkpoint");
  inspect->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  inspect->add_option("--tree", tree_id, "tree id to print");
  inspect->add_flag("--all", all_trees, "print every tree");
  inspect->add_option("--format", format, "sexpr or dot");

  auto* report = app.add_subcommand("report", "summarize a checkpoint");
  report->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  report->add_option("--csv", csv_path, "also write epoch,best_reward CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed()) return do_run(config_path, epochs_override);
  if (resume->parsed()) return do_resume(checkpoint_path, resume_epochs, out_dir);
  if (inspect->parsed()) {
    if (!all_trees && tree_id.empty()) {
      std::cerr << "config error: inspect needs --tree or --all\n";
      return kExitConfig;
    }
    return do_inspect(checkpoint_path, tree_id, all_trees, format);
  }
  if (report->parsed()) return do_report(checkpoint_path, csv_path);
  return kExitConfig;
}
