// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "blenda/autodiff.hpp"
#include "blenda/image.hpp"
#include "blenda/losses.hpp"
#include "blenda/schedule.hpp"
#include "gradcheck.hpp"
#include "minmax.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace blenda;
using blenda::testing::slurp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------- 1, 2

Outcome schedule_exactness() {
  std::mt19937_64 rng(20240101);
  std::uniform_real_distribution<double> g(0.0, 1.0);
  // alpha * gamma stays below ~36, where delta < beta is representable
  std::uniform_real_distribution<double> a(1e-3, 30.0);
  std::uniform_real_distribution<double> b(1e-3, 1.0);
  double worst = 0.0;
  bool zero_ok = true;
  bool increasing = true;
  bool below = true;
  for (int i = 0; i < 1000; ++i) {
    const BlendSchedule s{a(rng), b(rng), 1};
    const double gamma = g(rng);
    const double d = compute_delta(gamma, s);
    const double ref = s.beta * std::tanh(s.alpha * gamma / 2.0);
    if (ref != 0.0) {
      worst = std::max(worst, std::abs(d - ref) / std::abs(ref));
    }
    zero_ok = zero_ok && compute_delta(0.0, s) == 0.0;
    below = below && d < s.beta && compute_delta(1.0, s) < s.beta;
    double prev = -1.0;
    for (int k = 0; k <= 64; ++k) {
      const double v = compute_delta(k / 64.0, s);
      increasing = increasing && v > prev;
      prev = v;
    }
  }
  return {worst < 1e-12 && zero_ok && increasing && below,
          "max rel err " + fmt(worst) + ", delta(0)=0 " + (zero_ok ? "yes" : "no") +
              ", increasing " + (increasing ? "yes" : "no") + ", below beta " +
              (below ? "yes" : "no")};
}

Outcome schedule_spot_values() {
  const double d1 = compute_delta(1.0, BlendSchedule{20.0, 1.0, 1});
  const double d2 = compute_delta(1.0, BlendSchedule{20.0, 0.5, 1});
  const bool ok1 = d1 > 1.0 - 5e-9 && d1 < 1.0;
  const bool ok2 = d2 > 0.5 - 3e-9 && d2 < 0.5;
  std::ostringstream s;
  s << std::setprecision(17) << "delta(1; 20, 1.0) = " << d1 << ", delta(1; 20, 0.5) = " << d2;
  return {ok1 && ok2, s.str()};
}

// ---------------------------------------------------------------- 3

Outcome blend_identities() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int identity_failures = 0;
  std::size_t bound_failures = 0;
  for (int i = 0; i < 100; ++i) {
    const auto s = blenda::testing::random_image(rng, 32, 32);
    const auto t = blenda::testing::random_image(rng, 32, 32);
    identity_failures += !(blend_images(s, t, 0.0) == s);
    identity_failures += !(blend_images(s, t, 1.0) == t);
    const double d = u(rng);
    const auto b = blend_images(s, t, d);
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double lo = std::min(s.data()[k], t.data()[k]);
      const double hi = std::max(s.data()[k], t.data()[k]);
      bound_failures += b.data()[k] < lo || b.data()[k] > hi;
    }
  }
  return {identity_failures == 0 && bound_failures == 0,
          std::to_string(identity_failures) + " identity mismatches, " +
              std::to_string(bound_failures) + " pixels outside the convex hull"};
}

// ---------------------------------------------------------------- 4

Outcome loss_reduction() {
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double d = (i + 0.5) / 10000.0;
    worst = std::max(worst, std::abs(adversarial_loss_mixed(0.0, d) - adversarial_loss_hard(0, d)));
    worst = std::max(worst, std::abs(adversarial_loss_mixed(1.0, d) - adversarial_loss_hard(1, d)));
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_arg = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double label = u(rng);
    double best = -INFINITY;
    double arg = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const double d = (i + 0.5) / 100000.0;
      const double v = adversarial_loss_mixed(label, d);
      if (v > best) {
        best = v;
        arg = d;
      }
    }
    worst_arg = std::max(worst_arg, std::abs(arg - label));
  }
  return {worst <= 1e-15 && worst_arg < 1e-3,
          "max |mixed - hard| " + fmt(worst) + ", max |argmax - label| " + fmt(worst_arg)};
}

// ---------------------------------------------------------------- 5

ad::Matrix randn(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  ad::Matrix m(r, c);
  for (auto& v : m.values) v = n(rng);
  return m;
}

ad::Matrix bounded(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo, double hi,
                   bool random_sign) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::bernoulli_distribution coin(0.5);
  ad::Matrix m(r, c);
  for (auto& v : m.values) v = u(rng) * (random_sign && coin(rng) ? -1.0 : 1.0);
  return m;
}

ad::Var contract(ad::Tape& t, ad::Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(x, t.constant(randn(rng, x.rows(), x.cols()))));
}

Outcome gradient_correctness() {
  using ad::Tape;
  using ad::Var;
  using Inputs = std::vector<Var>;
  std::mt19937_64 rng(5);
  const auto a = randn(rng, 3, 4);
  const auto b = randn(rng, 3, 4);
  const auto row = randn(rng, 1, 4);
  const auto col = randn(rng, 3, 1);
  const auto pos = bounded(rng, 3, 4, 0.2, 2.0, false);
  const auto kinked = bounded(rng, 3, 4, 0.05, 2.0, true);
  auto clampable = bounded(rng, 3, 4, 0.0, 0.3, true);
  clampable.values[0] = 1.3;
  clampable.values[5] = -1.1;
  const auto left = randn(rng, 4, 3);
  const auto right = randn(rng, 3, 5);

  struct Case {
    std::string name;
    blenda::testing::ScalarFn fn;
    std::vector<ad::Matrix> inputs;
  };
  std::vector<Case> cases{
      {"matmul", [](Tape& t, const Inputs& v) { return contract(t, ad::matmul(v[0], v[1]), 1); }, {left, right}},
      {"add", [](Tape& t, const Inputs& v) { return contract(t, ad::add(v[0], v[1]), 2); }, {a, b}},
      {"add/row", [](Tape& t, const Inputs& v) { return contract(t, ad::add(v[0], v[1]), 3); }, {a, row}},
      {"sub", [](Tape& t, const Inputs& v) { return contract(t, ad::sub(v[0], v[1]), 4); }, {a, b}},
      {"sub/col", [](Tape& t, const Inputs& v) { return contract(t, ad::sub(v[1], v[0]), 5); }, {a, col}},
      {"mul", [](Tape& t, const Inputs& v) { return contract(t, ad::mul(v[0], v[1]), 6); }, {a, b}},
      {"mul/row", [](Tape& t, const Inputs& v) { return contract(t, ad::mul(v[0], v[1]), 7); }, {a, row}},
      {"relu", [](Tape& t, const Inputs& v) { return contract(t, ad::relu(v[0]), 8); }, {kinked}},
      {"sigmoid", [](Tape& t, const Inputs& v) { return contract(t, ad::sigmoid(v[0]), 9); }, {a}},
      {"exp", [](Tape& t, const Inputs& v) { return contract(t, ad::exp(v[0]), 10); }, {a}},
      {"log", [](Tape& t, const Inputs& v) { return contract(t, ad::log(v[0]), 11); }, {pos}},
      {"mean", [](Tape&, const Inputs& v) { return ad::mean(v[0]); }, {a}},
      {"sum", [](Tape&, const Inputs& v) { return ad::sum(v[0]); }, {a}},
      {"row_mean", [](Tape& t, const Inputs& v) { return contract(t, ad::row_mean(v[0]), 12); }, {a}},
      {"col_mean", [](Tape& t, const Inputs& v) { return contract(t, ad::col_mean(v[0]), 13); }, {a}},
      {"transpose", [](Tape& t, const Inputs& v) { return contract(t, ad::transpose(v[0]), 14); }, {a}},
      {"scale", [](Tape& t, const Inputs& v) { return contract(t, ad::scale(v[0], -1.7), 15); }, {a}},
      {"rsub", [](Tape& t, const Inputs& v) { return contract(t, ad::rsub(1.0, v[0]), 16); }, {a}},
      {"clamp", [](Tape& t, const Inputs& v) { return contract(t, ad::clamp(v[0], -0.5, 0.5), 17); }, {clampable}},
      {"log_softmax", [](Tape& t, const Inputs& v) { return contract(t, ad::log_softmax(v[0]), 18); }, {a}},
  };
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    std::mt19937_64 r(seed);
    cases.push_back({"net" + std::to_string(seed - 100),
                     [](Tape&, const Inputs& v) {
                       const Var h = ad::relu(ad::add(ad::matmul(v[0], v[1]), v[2]));
                       const Var logits = ad::matmul(h, v[3]);
                       const Var q = ad::col_mean(h);
                       const Var d = ad::sigmoid(ad::matmul(q, v[4]));
                       const Var like = ad::log(ad::clamp(d, 1e-7, 1.0 - 1e-7));
                       return ad::add(ad::mean(ad::log_softmax(logits)), ad::scale(like, 0.1));
                     },
                     {randn(r, 6, 5), randn(r, 5, 7, 0.5), randn(r, 1, 7, 0.1), randn(r, 7, 4, 0.5),
                      randn(r, 7, 1, 0.5)}});
  }

  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    const double err = blenda::testing::gradcheck(c.fn, c.inputs);
    if (err >= worst) {
      worst = err;
      worst_name = c.name;
    }
  }

  // gradient reversal against the identity layer
  double grl_err = 0.0;
  {
    const auto x = randn(rng, 4, 4);
    const auto w = randn(rng, 4, 4);
    Tape ti;
    const Var xi = ti.variable(x);
    ti.backward(ad::sum(ad::mul(ad::sigmoid(xi), ti.constant(w))));
    Tape tg;
    const Var xg = tg.variable(x);
    tg.backward(ad::sum(ad::mul(ad::sigmoid(ad::grl(xg)), tg.constant(w))));
    for (std::size_t i = 0; i < x.size(); ++i) {
      grl_err = std::max(grl_err, std::abs(xg.grad().values[i] + xi.grad().values[i]));
    }
  }
  return {worst < 1e-5 && grl_err <= 1e-10,
          std::to_string(cases.size()) + " checks, max rel err " + fmt(worst) + " (" + worst_name +
              "), grl deviation " + fmt(grl_err)};
}

// ---------------------------------------------------------------- 6

Outcome min_max_realization() {
  double disc = 1.0;
  double backbone = 1.0;
  std::size_t counted = 0;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    for (double label : {0.0, 0.35, 0.8, 1.0}) {
      const auto r = blenda::testing::check_min_max(seed, label);
      disc = std::min(disc, r.discriminator.fraction());
      backbone = std::min(backbone, r.backbone.fraction());
      counted += r.discriminator.counted + r.backbone.counted;
    }
  }
  return {disc >= 0.99 && backbone >= 0.99,
          "min sign agreement: discriminators " + fmt(disc, 4) + ", backbone " + fmt(backbone, 4) +
              " over " + std::to_string(counted) + " coordinates"};
}

// ---------------------------------------------------------------- 7, 8, 9

struct CliRun {
  int exit_code = -1;
  fs::path dir;
};

CliRun run_ablate(const fs::path& out) {
  const std::string cmd = std::string(BLENDA_CLI_PATH) + " --out " + out.string() + " ablate";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::string last;
  while (fgets(buf, sizeof buf, pipe) != nullptr) {
    std::string line(buf);
    while (!line.empty() && line.back() == '\n') line.pop_back();
    if (!line.empty()) last = line;
  }
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.dir = last;
  return r;
}

// "config/mode" -> median, from ablation.csv and baseline.csv
std::map<std::string, double> read_medians(const fs::path& dir) {
  std::map<std::string, double> out;
  for (const char* name : {"ablation.csv", "baseline.csv"}) {
    std::ifstream in(dir / name);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      if (cells.size() < 3) continue;
      out[cells[0] + "/" + cells[1]] = std::stod(cells.back());
    }
  }
  return out;
}

struct AblationRuns {
  CliRun first;
  CliRun second;
  double seconds_first = 0.0;
};

AblationRuns& ablation_runs() {
  static AblationRuns runs = [] {
    AblationRuns r;
    const fs::path root = fs::temp_directory_path() / "blenda-acceptance";
    fs::remove_all(root);
    const auto t0 = std::chrono::steady_clock::now();
    r.first = run_ablate(root / "a");
    r.seconds_first = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.second = run_ablate(root / "b");
    return r;
  }();
  return runs;
}

Outcome adaptation_effect() {
  const auto& runs = ablation_runs();
  if (runs.first.exit_code != 0) {
    return {false, "ablate exited with " + std::to_string(runs.first.exit_code)};
  }
  auto m = read_medians(runs.first.dir);
  for (const char* key : {"source_only/none", "static_0.7/hard", "static_1/hard", "dynamic/hard"}) {
    if (!m.contains(key)) return {false, std::string("missing row ") + key};
  }
  const double src = 100.0 * m["source_only/none"];
  const double s07 = 100.0 * m["static_0.7/hard"];
  const double s10 = 100.0 * m["static_1/hard"];
  const double dyn = 100.0 * m["dynamic/hard"];
  const bool ok = dyn > s07 && s07 > src && s10 < s07 && dyn - src >= 5.0 &&
                  runs.seconds_first <= 20.0 * 60.0;
  return {ok, "median mAP: dynamic " + fmt(dyn, 4) + " > static 0.7 " + fmt(s07, 4) +
                  " > source-only " + fmt(src, 4) + "; static 1.0 " + fmt(s10, 4) +
                  "; gain " + fmt(dyn - src, 3) + " points; " + fmt(runs.seconds_first, 3) + " s"};
}

Outcome mixed_vs_hard() {
  const auto& runs = ablation_runs();
  if (runs.first.exit_code != 0 || runs.second.exit_code != 0) {
    return {false, "ablate failed"};
  }
  auto m = read_medians(runs.first.dir);
  int hard = 0;
  int mixed = 0;
  bool finite = true;
  for (const auto& [key, v] : m) {
    hard += key.ends_with("/hard");
    mixed += key.ends_with("/mixed");
    finite = finite && std::isfinite(v);
  }
  const std::string summary = slurp(runs.first.dir / "summary.md");
  const bool compared = summary.find("hard labels") != std::string::npos &&
                        summary.find("mixed labels") != std::string::npos &&
                        summary.find("mixed - hard") != std::string::npos;
  const bool same = slurp(runs.first.dir / "ablation.csv") == slurp(runs.second.dir / "ablation.csv");
  const double gap = 100.0 * (m["dynamic/mixed"] - m["dynamic/hard"]);
  return {hard == 4 && mixed == 4 && finite && compared && same,
          std::to_string(hard) + " hard and " + std::to_string(mixed) +
              " mixed rows, deterministic " + (same ? "yes" : "no") + ", comparison reported " +
              (compared ? "yes" : "no") + "; dynamic mixed - hard = " + fmt(gap, 3) + " points"};
}

Outcome reproducibility() {
  const auto& runs = ablation_runs();
  if (runs.first.exit_code != 0 || runs.second.exit_code != 0) {
    return {false, "ablate failed"};
  }
  std::size_t files = 0;
  std::size_t differ = 0;
  auto compare = [&](const fs::path& rel) {
    ++files;
    if (!fs::exists(runs.second.dir / rel) ||
        slurp(runs.first.dir / rel) != slurp(runs.second.dir / rel)) {
      ++differ;
    }
  };
  compare("ablation.csv");
  compare("baseline.csv");
  for (const auto& e : fs::directory_iterator(runs.first.dir / "runs")) {
    compare(fs::path("runs") / e.path().filename());
  }
  return {differ == 0 && files > 2,
          std::to_string(files) + " CSV files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> check;
    double budget_seconds;  // <= 0: no runtime bound
  };
  const std::vector<Criterion> criteria{
      {1, "schedule exactness", schedule_exactness, 1.0},
      {2, "hyperparameter spot values", schedule_spot_values, 0.0},
      {3, "blend identities", blend_identities, 5.0},
      {4, "mixed loss reduction", loss_reduction, 0.0},
      {5, "gradient correctness", gradient_correctness, 30.0},
      {6, "min-max realization", min_max_realization, 0.0},
      {7, "desk-scale adaptation effect", adaptation_effect, 0.0},
      {8, "mixed vs hard adversarial loss", mixed_vs_hard, 0.0},
      {9, "ablation reproducibility", reproducibility, 0.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0.0 && secs > c.budget_seconds) {
      o.pass = false;
      o.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
    }
    failed += !o.pass;
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.title
              << ": " << o.detail << " [" << std::fixed << std::setprecision(2) << secs << " s]"
              << std::defaultfloat << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed;
}
