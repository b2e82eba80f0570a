#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"

namespace fs = std::filesystem;
using blenda::testing::slurp;
using blenda::testing::TempDir;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  fs::path run_dir;  // last stdout line
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(BLENDA_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe) != nullptr) {
    r.out += buf.data();
  }
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) {
      r.run_dir = line;
    }
  }
  return r;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    lines.push_back(line);
  }
  return lines;
}

// Small but complete: two seeds, short runs.
const char* kSmallConfig = R"({
  "benchmark": {"source_count": 6, "target_count": 6},
  "pretrain": {"epochs": 1},
  "finetune": {"iterations": 12},
  "ablation": {"seeds": 2}
})";

}  // namespace

TEST_CASE("schedule writes the curve up to just below beta") {
  TempDir dir("cli-schedule");
  std::ofstream(dir.path() / "c.json") << R"({"schedule": {"alpha": 20, "beta": 1.0}})";
  const auto r = run_cli("--config " + (dir.path() / "c.json").string() + " --out " +
                         dir.path().string() + " schedule --samples 11");
  REQUIRE(r.exit_code == 0);
  const auto lines = read_lines(r.run_dir / "schedule.csv");
  REQUIRE(lines.size() == 12);
  CHECK(lines[0] == "gamma,delta");
  CHECK(lines[1] == "0,0");
  const double last = std::stod(lines.back().substr(lines.back().find(',') + 1));
  CHECK(1.0 - last < 5e-9);
  CHECK(last < 1.0);
  CHECK(fs::exists(r.run_dir / "resolved_config.json"));
}

TEST_CASE("generate, translate and blend produce consistent artifacts") {
  TempDir dir("cli-data");
  std::ofstream(dir.path() / "c.json") << kSmallConfig;
  const std::string base =
      "--config " + (dir.path() / "c.json").string() + " --out " + dir.path().string();
  const auto gen = run_cli(base + " generate");
  REQUIRE(gen.exit_code == 0);
  const fs::path dataset = gen.run_dir / "dataset";
  CHECK(fs::exists(dataset / "benchmark.manifest"));
  CHECK(fs::exists(dataset / "source" / "scene_0000.png"));
  CHECK(fs::exists(dataset / "target" / "target_0005.png"));

  const auto blend0 = run_cli(base + " --dataset " + dataset.string() + " blend --delta 0");
  REQUIRE(blend0.exit_code == 0);
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", i);
    CHECK(slurp(blend0.run_dir / "blended" / (std::string(name) + ".blended.png")) ==
          slurp(dataset / "source" / (std::string(name) + ".png")));
  }
  const auto blend1 = run_cli(base + " --dataset " + dataset.string() + " blend --delta 1");
  REQUIRE(blend1.exit_code == 0);
  CHECK(slurp(blend1.run_dir / "blended" / "scene_0002.blended.png") ==
        slurp(dataset / "source" / "scene_0002.translated.png"));
  const auto manifest = slurp(blend1.run_dir / "blended.manifest");
  CHECK(manifest.find("\"schema_version\":1") != std::string::npos);

  const auto tr = run_cli(base + " --dataset " + dataset.string() + " translate");
  REQUIRE(tr.exit_code == 0);
  CHECK(read_lines(tr.run_dir / "translated.manifest").size() == 7);

  fs::remove(dataset / "source" / "scene_0001.translated.png");
  const auto broken = run_cli(base + " --dataset " + dataset.string() + " blend --delta 0.5");
  CHECK(broken.exit_code == 3);
  CHECK(broken.out.find("blenda: error: io:") != std::string::npos);
  CHECK(broken.out.find("scene_0001.translated.png") != std::string::npos);
}

TEST_CASE("pretrain, finetune with resume, and eval") {
  TempDir dir("cli-train");
  std::ofstream(dir.path() / "c.json") << kSmallConfig;
  const std::string base =
      "--config " + (dir.path() / "c.json").string() + " --out " + dir.path().string();
  const auto gen = run_cli(base + " generate");
  REQUIRE(gen.exit_code == 0);
  const std::string data = " --dataset " + (gen.run_dir / "dataset").string();

  const auto pre = run_cli(base + data + " pretrain");
  REQUIRE(pre.exit_code == 0);
  const fs::path ckpt = pre.run_dir / "pretrained.ckpt";
  CHECK(read_lines(pre.run_dir / "metrics.csv").size() == 2);

  const auto full = run_cli(base + data + " finetune --checkpoint " + ckpt.string());
  REQUIRE(full.exit_code == 0);
  const auto half =
      run_cli(base + data + " finetune --checkpoint " + ckpt.string() + " --stop-at 5");
  REQUIRE(half.exit_code == 0);
  const auto rest = run_cli(base + data + " finetune --checkpoint " +
                            (half.run_dir / "final.ckpt").string());
  REQUIRE(rest.exit_code == 0);
  CHECK(slurp(rest.run_dir / "final.ckpt") == slurp(full.run_dir / "final.ckpt"));
  CHECK(fs::exists(full.run_dir / "best.ckpt"));
  CHECK(read_lines(full.run_dir / "metrics.csv")[0] == "epoch,l_sup,l_sp,l_ch,l_ins,delta,map");

  const auto ev = run_cli(base + data + " eval --checkpoint " + (full.run_dir / "final.ckpt").string());
  REQUIRE(ev.exit_code == 0);
  const auto eval_lines = read_lines(ev.run_dir / "eval.csv");
  REQUIRE(eval_lines.size() == 5);
  CHECK(eval_lines.back().rfind("mean,", 0) == 0);
}

TEST_CASE("ablate emits the full table and is reproducible") {
  TempDir dir("cli-ablate");
  std::ofstream(dir.path() / "c.json") << kSmallConfig;
  const std::string base =
      "--config " + (dir.path() / "c.json").string() + " --out " + dir.path().string();
  const auto a = run_cli(base + " ablate");
  REQUIRE(a.exit_code == 0);
  const auto table = read_lines(a.run_dir / "ablation.csv");
  REQUIRE(table.size() == 9);
  CHECK(table[0] == "config,mode,seed_7,seed_8,median");
  CHECK(read_lines(a.run_dir / "baseline.csv").size() == 2);
  const auto summary = slurp(a.run_dir / "summary.md");
  CHECK(summary.find("hard labels") != std::string::npos);
  CHECK(summary.find("mixed labels") != std::string::npos);

  const auto b = run_cli(base + " ablate");
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(a.run_dir / "ablation.csv") == slurp(b.run_dir / "ablation.csv"));
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.run_dir / "runs")) {
    CHECK(slurp(entry.path()) == slurp(b.run_dir / "runs" / entry.path().filename()));
    ++compared;
  }
  CHECK(compared == 2 * 11);
}

TEST_CASE("bad invocations fail with one error line") {
  TempDir dir("cli-bad");
  std::ofstream(dir.path() / "c.json") << R"({"schedule": {"betta": 1}})";
  const auto r = run_cli("--config " + (dir.path() / "c.json").string() + " --out " +
                         dir.path().string() + " schedule");
  CHECK(r.exit_code == 2);
  CHECK(r.out == "blenda: error: invalid: unknown config key schedule.betta\n");

  const auto no_data = run_cli("--out " + dir.path().string() + " blend");
  CHECK(no_data.exit_code == 2);
  const auto no_ckpt = run_cli("--out " + dir.path().string() + " --dataset " +
                               dir.path().string() + " eval");
  CHECK(no_ckpt.exit_code == 3);
}
