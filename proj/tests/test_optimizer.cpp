#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "blenda/checkpoint.hpp"
#include "blenda/error.hpp"
#include "blenda/optimizer.hpp"
#include "support.hpp"

using namespace blenda;
using namespace blenda::ad;
using blenda::testing::TempDir;

namespace {

// Scalar AdamW written out independently of the library.
struct ReferenceAdamW {
  double m = 0.0;
  double v = 0.0;
  int t = 0;

  double step(double theta, double g, const AdamWConfig& c) {
    ++t;
    theta *= 1.0 - c.learning_rate * c.weight_decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(c.beta1, t));
    const double vhat = v / (1.0 - std::pow(c.beta2, t));
    return theta - c.learning_rate * mhat / (std::sqrt(vhat) + c.eps);
  }
};

}  // namespace

TEST_CASE("adamw matches an independent scalar implementation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  const AdamWConfig cfg{1e-2, 1e-2, 0.9, 0.999, 1e-8};
  Parameter a("a", Matrix(2, 3));
  Parameter b("b", Matrix(1, 1));
  for (auto& x : a.value.values) {
    x = n(rng);
  }
  b.value.values[0] = n(rng);
  std::vector<Parameter*> params{&a, &b};
  auto state = AdamWState::zeros_like(params);

  std::vector<double> ref_theta;
  for (auto* p : params) {
    ref_theta.insert(ref_theta.end(), p->value.values.begin(), p->value.values.end());
  }
  std::vector<ReferenceAdamW> ref(ref_theta.size());

  for (int step = 0; step < 25; ++step) {
    std::size_t k = 0;
    for (auto* p : params) {
      for (auto& g : p->grad.values) {
        g = n(rng);
        ref_theta[k] = ref[k].step(ref_theta[k], g, cfg);
        ++k;
      }
    }
    adamw_step(params, state, cfg);
    k = 0;
    for (auto* p : params) {
      for (double x : p->value.values) {
        CHECK(x == doctest::Approx(ref_theta[k++]).epsilon(1e-13));
      }
    }
  }
  CHECK(state.step == 25);
}

TEST_CASE("the first adamw step moves by about the learning rate") {
  Parameter p("p", Matrix(1, 3, std::vector<double>{1.0, -1.0, 0.5}));
  p.grad = Matrix(1, 3, std::vector<double>{0.3, -7.0, 1e-3});
  std::vector<Parameter*> params{&p};
  auto state = AdamWState::zeros_like(params);
  const AdamWConfig cfg{2e-5, 0.0, 0.9, 0.999, 1e-8};
  adamw_step(params, state, cfg);
  CHECK(p.value.values[0] == doctest::Approx(1.0 - 2e-5).epsilon(1e-9));
  CHECK(p.value.values[1] == doctest::Approx(-1.0 + 2e-5).epsilon(1e-9));
}

TEST_CASE("weight decay is decoupled from the gradient") {
  Parameter p("p", Matrix(1, 1, 2.0));
  std::vector<Parameter*> params{&p};
  auto state = AdamWState::zeros_like(params);
  adamw_step(params, state, AdamWConfig{0.1, 0.5, 0.9, 0.999, 1e-8});
  CHECK(p.value.values[0] == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));
}

TEST_CASE("non-finite gradients abort the step untouched") {
  Parameter a("a", Matrix(1, 2, 1.0));
  Parameter b("bad", Matrix(1, 2, 1.0));
  a.grad = Matrix(1, 2, 0.5);
  b.grad = Matrix(1, 2, std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()});
  std::vector<Parameter*> params{&a, &b};
  auto state = AdamWState::zeros_like(params);
  try {
    adamw_step(params, state, AdamWConfig{});
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK(a.value == Matrix(1, 2, 1.0));
  CHECK(state.step == 0);
  CHECK(state.first_moment[0] == Matrix(1, 2, 0.0));
}

TEST_CASE("optimizer configuration and state are validated") {
  CHECK_THROWS_AS(AdamWConfig({-1.0, 0.0, 0.9, 0.999, 1e-8}).validate(), InvalidArgument);
  CHECK_THROWS_AS(AdamWConfig({1e-3, -1.0, 0.9, 0.999, 1e-8}).validate(), InvalidArgument);
  CHECK_THROWS_AS(AdamWConfig({1e-3, 0.0, 1.0, 0.999, 1e-8}).validate(), InvalidArgument);
  CHECK_THROWS_AS(AdamWConfig({1e-3, 0.0, 0.9, 1.0, 1e-8}).validate(), InvalidArgument);
  CHECK_THROWS_AS(AdamWConfig({1e-3, 0.0, 0.9, 0.999, 0.0}).validate(), InvalidArgument);

  Parameter a("a", Matrix(2, 2));
  Parameter b("b", Matrix(3, 1));
  std::vector<Parameter*> one{&a};
  std::vector<Parameter*> two{&a, &b};
  auto state = AdamWState::zeros_like(one);
  CHECK_THROWS_AS(adamw_step(two, state, AdamWConfig{}), ShapeError);
}

TEST_CASE("checkpoint arrays round trip bit for bit") {
  TempDir dir("ckpt");
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Matrix> arrays{Matrix(3, 4), Matrix(1, 1), Matrix(0, 5)};
  for (auto& m : arrays) {
    for (auto& v : m.values) {
      v = n(rng);
    }
  }
  arrays[1].values[0] = -0.0;
  const auto path = dir.path() / "a.ckpt";
  write_arrays(path, arrays);
  const auto back = read_arrays(path);
  REQUIRE(back.size() == arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    CHECK(back[i] == arrays[i]);
  }
  CHECK(std::signbit(back[1].values[0]));
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir("ckptbad");
  const auto good = dir.path() / "good.ckpt";
  write_arrays(good, std::vector<Matrix>{Matrix(2, 2, 1.0)});
  const std::string bytes = blenda::testing::slurp(good);

  auto write = [&](const std::string& name, const std::string& content) {
    const auto p = dir.path() / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  };
  CHECK_THROWS_AS(read_arrays(dir.path() / "none.ckpt"), IoError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(read_arrays(write("magic.ckpt", bad_magic)), IoError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  CHECK_THROWS_AS(read_arrays(write("version.ckpt", bad_version)), IoError);
  CHECK_THROWS_AS(read_arrays(write("short.ckpt", bytes.substr(0, bytes.size() - 3))), IoError);
  CHECK_THROWS_AS(read_arrays(write("long.ckpt", bytes + "x")), IoError);
}
