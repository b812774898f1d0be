#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include "evoforest/executor.hpp"
#include "evoforest/testbed.hpp"

using namespace evoforest;
namespace fs = std::filesystem;

namespace {

struct Env {
  Executor executor;
  fs::path base;
  Env() {
    base = fs::temp_directory_path() / ("exe_test_" + std::to_string(::getpid()));
    install_task(find_task("quad1d"), executor, base.string());
  }
  ~Env() { fs::remove_all(base); }

  EvalResult eval(const std::string& code, double wall_s = 10.0,
                  std::uint64_t mem = 512ull << 20, EvalMode mode = EvalMode::Full) {
    EvalRequest req;
    req.code = code;
    req.task_ref = "quad1d";
    req.limits = {wall_s, mem};
    req.mode = mode;
    return executor.evaluate(req);
  }
};

}  // namespace

TEST_CASE("a healthy candidate returns its parsed score") {
  Env env;
  const EvalResult r = env.eval("x = 5\n");
  REQUIRE(r.ok());
  CHECK(r.score == doctest::Approx(10.0 - 4.0).epsilon(1e-9));
  CHECK(r.runtime_ms > 0.0);
}

TEST_CASE("dry-run mode exercises the harness without scoring") {
  Env env;
  const EvalResult r = env.eval("x = 5\n", 10.0, 512ull << 20, EvalMode::DryRun);
  REQUIRE(r.ok());
  CHECK(r.score == doctest::Approx(0.0));
}

TEST_CASE("unknown task references fail as values") {
  Executor executor;
  EvalRequest req;
  req.code = "x = 1\n";
  req.task_ref = "nonexistent";
  const EvalResult r = executor.evaluate(req);
  CHECK(!r.ok());
  CHECK(r.reason.find("nonexistent") != std::string::npos);
}

TEST_CASE("wall-clock overrun is killed and reported as a timeout") {
  Env env;
  const auto start = std::chrono::steady_clock::now();
  const EvalResult r = env.eval("sleep_ms = 30000\n", 1.0);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(!r.ok());
  CHECK(r.reason == "timeout after 1s");
  CHECK(elapsed < 10.0);  // watchdog, not the sleep, decided
}

TEST_CASE("address-space exhaustion maps to a memory failure") {
  Env env;
  const EvalResult r = env.eval("alloc_mb = 4096\nx = 1\n", 10.0, 256ull << 20);
  CHECK(!r.ok());
  CHECK(r.reason == "memory limit");
}

TEST_CASE("output without a SCORE line is malformed") {
  Env env;
  const EvalResult r = env.eval("emit = garbage\n");
  CHECK(!r.ok());
  CHECK(r.reason == "malformed result");
  CHECK(r.logs.find("no score on this line") != std::string::npos);
}

TEST_CASE("constraint violations fail after a successful run") {
  Env env;
  const EvalResult r = env.eval("x = 500\n");
  CHECK(!r.ok());
  CHECK(r.reason.rfind("constraint violation", 0) == 0);
  CHECK(r.reason.find("exceeds 100") != std::string::npos);
}

TEST_CASE("failure reasons never embed scratch paths") {
  Env env;
  for (const char* code : {"emit = garbage\n", "x = 500\n"}) {
    const EvalResult r = env.eval(code);
    CHECK(!r.ok());
    CHECK(r.reason.find("/tmp") == std::string::npos);
    CHECK(r.reason.find("scratch") == std::string::npos);
  }
}

TEST_CASE("scratch directories are cleaned up") {
  Env env;
  for (int i = 0; i < 3; ++i) env.eval("x = 1\n");
  int leftovers = 0;
  for (const auto& entry : fs::directory_iterator(fs::temp_directory_path())) {
    if (entry.path().filename().string().rfind("evoforest-eval-", 0) == 0) ++leftovers;
  }
  CHECK(leftovers == 0);
}

TEST_CASE("evaluate is safe to call from concurrent threads") {
  Env env;
  std::vector<std::thread> workers;
  std::vector<EvalResult> results(4);
  for (int i = 0; i < 4; ++i) {
    workers.emplace_back([&env, &results, i] {
      results[i] = env.eval("x = " + std::to_string(i) + "\n");
    });
  }
  for (auto& w : workers) w.join();
  for (int i = 0; i < 4; ++i) {
    REQUIRE(results[i].ok());
    const double x = i;
    CHECK(results[i].score == doctest::Approx(10.0 - (x - 3.0) * (x - 3.0)).epsilon(1e-9));
  }
}
