#include "evoforest/executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace evoforest {

namespace {

constexpr std::size_t kLogTailBytes = 64 * 1024;
constexpr double kGraceSeconds = 2.0;

namespace fs = std::filesystem;

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "evoforest-eval-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

std::string read_tail(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return "";
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  const std::size_t take = std::min(size, kLogTailBytes);
  in.seekg(static_cast<std::streamoff>(size - take));
  std::string out(take, '\0');
  in.read(out.data(), static_cast<std::streamsize>(take));
  return out;
}

// Final non-empty line must be `SCORE <decimal>`.
std::optional<double> parse_score(const std::string& stdout_text) {
  std::size_t end = stdout_text.size();
  while (end > 0 && (stdout_text[end - 1] == '\n' || stdout_text[end - 1] == '\r')) --end;
  if (end == 0) return std::nullopt;
  std::size_t start = stdout_text.rfind('\n', end - 1);
  start = (start == std::string::npos) ? 0 : start + 1;
  std::string line = stdout_text.substr(start, end - start);
  if (line.rfind("SCORE ", 0) != 0) return std::nullopt;
  const std::string num = line.substr(6);
  try {
    std::size_t used = 0;
    double v = std::stod(num, &used);
    while (used < num.size() && std::isspace(static_cast<unsigned char>(num[used]))) ++used;
    if (used != num.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool mentions_memory_failure(const std::string& log) {
  return log.find("MemoryError") != std::string::npos ||
         log.find("bad_alloc") != std::string::npos ||
         log.find("Cannot allocate memory") != std::string::npos;
}

}  // namespace

void Executor::register_task(const std::string& task_ref, TaskBinding binding) {
  std::lock_guard lock(mutex_);
  tasks_[task_ref] = std::move(binding);
}

bool Executor::has_task(const std::string& task_ref) const {
  std::lock_guard lock(mutex_);
  return tasks_.count(task_ref) != 0;
}

EvalResult Executor::evaluate(const EvalRequest& request) const {
  TaskBinding binding;
  std::optional<ContainerConfig> container;
  {
    std::lock_guard lock(mutex_);
    auto it = tasks_.find(request.task_ref);
    if (it == tasks_.end()) return EvalResult::failure("unknown task: " + request.task_ref);
    binding = it->second;
    container = container_;
  }

  ScratchDir scratch;
  const fs::path artifact = scratch.path / "candidate.txt";
  {
    std::ofstream out(artifact, std::ios::binary);
    out << request.code;
    if (!out) return EvalResult::failure("cannot write artifact");
  }
  const fs::path stdout_file = scratch.path / "stdout";
  const fs::path stderr_file = scratch.path / "stderr";

  std::vector<std::string> argv;
  if (container) {
    argv = {"docker", "run", "--rm", "--network=none",
            "--memory=" + std::to_string(request.limits.memory_bytes)};
    for (const auto& m : container->mounts) {
      argv.push_back("-v");
      argv.push_back(m);
    }
    for (const auto& name : container->env_allowlist) {
      if (const char* v = std::getenv(name.c_str())) {
        argv.push_back("-e");
        argv.push_back(name + "=" + v);
      }
    }
    argv.push_back("-v");
    argv.push_back(scratch.path.string() + ":" + scratch.path.string());
    argv.push_back(container->image);
  }
  argv.insert(argv.end(), binding.harness_argv.begin(), binding.harness_argv.end());
  argv.push_back(artifact.string());
  argv.push_back(binding.task_dir);

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) return EvalResult::failure("fork failed");
  if (pid == 0) {
    int out_fd = open(stdout_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    int err_fd = open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (out_fd < 0 || err_fd < 0) _exit(126);
    dup2(out_fd, STDOUT_FILENO);
    dup2(err_fd, STDERR_FILENO);
    if (!container) {
      rlimit mem{request.limits.memory_bytes, request.limits.memory_bytes};
      setrlimit(RLIMIT_AS, &mem);
    }
    if (request.mode == EvalMode::DryRun) setenv("EVOFOREST_DRY_RUN", "1", 1);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }

  // Watchdog: SIGKILL at the wall-clock limit; the grace margin only covers
  // reaping the killed child.
  int status = 0;
  bool timed_out = false;
  const double limit = request.limits.wall_clock_s;
  while (true) {
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) return EvalResult::failure("waitpid failed");
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!timed_out && elapsed >= limit) {
      kill(pid, SIGKILL);
      timed_out = true;
    }
    if (elapsed >= limit + kGraceSeconds) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const double runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::string out_text = read_tail(stdout_file);
  std::string err_text = read_tail(stderr_file);
  std::string logs = out_text;
  if (!err_text.empty()) logs += "\n[stderr]\n" + err_text;
  if (logs.size() > kLogTailBytes) logs = logs.substr(logs.size() - kLogTailBytes);

  auto finish = [&](EvalResult r) {
    r.runtime_ms = runtime_ms;
    r.logs = logs;
    return r;
  };

  if (timed_out) {
    std::ostringstream reason;
    reason << "timeout after " << limit << "s";
    return finish(EvalResult::failure(reason.str()));
  }
  if (WIFSIGNALED(status)) {
    const int sig = WTERMSIG(status);
    if (sig == SIGKILL || mentions_memory_failure(logs))
      return finish(EvalResult::failure("memory limit"));
    return finish(EvalResult::failure("killed by signal " + std::to_string(sig)));
  }
  const int exit_code = WEXITSTATUS(status);
  if (exit_code != 0) {
    if (mentions_memory_failure(logs)) return finish(EvalResult::failure("memory limit"));
    return finish(EvalResult::failure("exit code " + std::to_string(exit_code)));
  }
  auto score = parse_score(out_text);
  if (!score) return finish(EvalResult::failure("malformed result"));

  EvalResult result = EvalResult::success(*score);
  if (binding.constraints) {
    const ConstraintResult c = binding.constraints(request.code);
    result.constraint_ok = c.ok;
    if (!c.ok) {
      EvalResult fail = EvalResult::failure("constraint violation: " + c.reason);
      fail.constraint_ok = false;
      return finish(fail);
    }
  }
  return finish(result);
}

}  // namespace evoforest
