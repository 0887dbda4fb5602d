#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "peerloss/error.hpp"
#include "peerloss/model.hpp"
#include "peerloss/random.hpp"

using namespace peerloss;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// Straight loop re-evaluation of the MLP from the documented layout.
std::vector<double> naive_mlp(const Classifier& c, const std::vector<double>& x) {
  const std::size_t d = c.arch.input_dim, h = c.arch.hidden, k = c.arch.outputs;
  const double* w1 = c.params.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + k * h;
  std::vector<double> hid(h), out(k);
  for (std::size_t j = 0; j < h; ++j) {
    double a = b1[j];
    for (std::size_t i = 0; i < d; ++i) a += w1[j * d + i] * x[i];
    hid[j] = std::max(a, 0.0);
  }
  for (std::size_t o = 0; o < k; ++o) {
    double a = b2[o];
    for (std::size_t j = 0; j < h; ++j) a += w2[o * h + j] * hid[j];
    out[o] = a;
  }
  return out;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("architectures") {
  CHECK(Arch::linear(2).param_count() == 3);
  CHECK(Arch::linear(4, 3).param_count() == 15);
  CHECK(Arch::mlp(20, 32).param_count() == 705);
  CHECK(Arch::mlp(2, 8, 3).param_count() == 2 * 8 + 8 + 8 * 3 + 3);
  CHECK(code_of([] { init_classifier(Arch::linear(0), 1); }) == ErrorCode::BadArch);
  CHECK(code_of([] { init_classifier(Arch::mlp(3, 0), 1); }) == ErrorCode::BadArch);
}

TEST_CASE("initialisation") {
  const Classifier a = init_classifier(Arch::linear(2), 5);
  REQUIRE(a.params.size() == 3);
  CHECK(a.params[2] == 0.0);
  CHECK(init_classifier(Arch::linear(2), 5).params == a.params);
  CHECK(init_classifier(Arch::linear(2), 6).params != a.params);

  const Classifier m = init_classifier(Arch::mlp(16, 10), 3);
  const double bound1 = 1.0 / std::sqrt(16.0), bound2 = 1.0 / std::sqrt(10.0);
  for (std::size_t i = 0; i < 160; ++i) CHECK(std::abs(m.params[i]) <= bound1);
  for (std::size_t i = 160; i < 170; ++i) CHECK(m.params[i] == 0.0);
  for (std::size_t i = 170; i < 180; ++i) CHECK(std::abs(m.params[i]) <= bound2);
  CHECK(m.params[180] == 0.0);
}

TEST_CASE("forward") {
  Classifier zero{Arch::mlp(3, 4), std::vector<double>(Arch::mlp(3, 4).param_count(), 0.0)};
  CHECK(forward(zero, std::vector<double>{1, 2, 3}) == 0.0);

  Classifier lin{Arch::linear(2), {1.0, -1.0, 0.5}};
  CHECK(forward(lin, std::vector<double>{2.0, 1.0}) == 1.5);
  CHECK(code_of([&] { forward(lin, std::vector<double>{1.0}); }) == ErrorCode::DimensionMismatch);

  Rng rng(42);
  for (int t = 0; t < 50; ++t) {
    const Classifier c = init_classifier(Arch::mlp(5, 7, t % 2 ? 3 : 1), rng.next());
    const auto x = random_vec(rng, 5);
    const auto got = forward_scores(c, x);
    const auto want = naive_mlp(c, x);
    for (std::size_t o = 0; o < got.size(); ++o) CHECK(got[o] == doctest::Approx(want[o]).epsilon(1e-13));
  }
}

TEST_CASE("last-layer homogeneity") {
  Rng rng(7);
  Classifier c = init_classifier(Arch::mlp(4, 6), 9);
  for (std::size_t i = 0; i < 24; ++i) c.params[i] = rng.normal();
  Classifier doubled = c;
  for (std::size_t i = 30; i < 36; ++i) doubled.params[i] *= 2.0;
  for (int t = 0; t < 20; ++t) {
    const auto x = random_vec(rng, 4);
    CHECK(forward(doubled, x) == doctest::Approx(2.0 * forward(c, x)).epsilon(1e-14));
  }
}

TEST_CASE("backward") {
  Classifier lin{Arch::linear(3), {0.3, -0.2, 0.1, 0.4}};
  const std::vector<double> x{1.5, -2.0, 0.5};
  const auto g = backward(lin, x, 2.0);
  CHECK(g == std::vector<double>{3.0, -4.0, 1.0, 2.0});
  const auto z = backward(init_classifier(Arch::mlp(3, 5), 1), x, 0.0);
  CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));

  // Central differences on random MLPs, one random output direction each.
  Rng rng(99);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = t % 3 == 0 ? 3 : 1;
    Classifier c = init_classifier(Arch::mlp(4, 6, k), rng.next());
    for (double& p : c.params) p = rng.normal();
    const auto xp = random_vec(rng, 4);
    const auto up = random_vec(rng, k);
    const auto grad = backward(c, xp, up);
    auto value = [&](const Classifier& cc) {
      const auto s = forward_scores(cc, xp);
      double v = 0.0;
      for (std::size_t o = 0; o < k; ++o) v += up[o] * s[o];
      return v;
    };
    for (std::size_t i = 0; i < c.params.size(); ++i) {
      const double h = 1e-6;
      Classifier a = c, b = c;
      a.params[i] += h;
      b.params[i] -= h;
      const double fd = (value(a) - value(b)) / (2 * h);
      // A ReLU kink inside the stencil makes the difference meaningless.
      if (std::abs(fd - grad[i]) > 1e-5 * std::max(1.0, std::abs(fd))) {
        const double h2 = 1e-7;
        a = c;
        b = c;
        a.params[i] += h2;
        b.params[i] -= h2;
        const double fd2 = (value(a) - value(b)) / (2 * h2);
        CHECK(std::abs(fd2 - grad[i]) <= 1e-5 * std::max(1.0, std::abs(fd2)));
      }
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("predict") {
  Classifier lin{Arch::linear(1), {1.0, 0.0}};
  CHECK(predict(lin, std::vector<double>{0.0}) == 1);
  CHECK(predict(lin, std::vector<double>{-0.2}) == -1);
  Classifier multi{Arch::linear(1, 3), {0.0, 0.0, 0.0, 1.0, 1.0, 0.0}};
  CHECK(predict(multi, std::vector<double>{5.0}) == 0);
}

TEST_CASE("optimizers") {
  Classifier c{Arch::linear(1), {1.0, 0.0}};
  const std::vector<double> g{2.0, 0.0};
  const StepResult r = step(init_optimizer(OptimizerConfig::sgd(0.1), 2), c, g);
  CHECK(r.classifier.params[0] == doctest::Approx(0.8));
  CHECK(r.state.step_count == 1);
  CHECK(c.params[0] == 1.0);

  const std::vector<double> g2{0.3, -5.0};
  const StepResult a = step(init_optimizer(OptimizerConfig::adam(0.01), 2), c, g2);
  CHECK(a.classifier.params[0] - 1.0 == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(a.classifier.params[1] == doctest::Approx(0.01).epsilon(1e-6));

  const std::vector<double> zero{0.0, 0.0};
  for (const auto& cfg : {OptimizerConfig::sgd(0.1, 0.9), OptimizerConfig::adam()}) {
    const StepResult s = step(init_optimizer(cfg, 2), c, zero);
    CHECK(s.classifier.params == c.params);
    CHECK(s.state.step_count == 1);
  }

  // Momentum accumulates: m = 0.9 m + g.
  OptimizerState st = init_optimizer(OptimizerConfig::sgd(0.1, 0.9), 2);
  Classifier w = c;
  step_inplace(st, w, g);
  step_inplace(st, w, g);
  CHECK(w.params[0] == doctest::Approx(1.0 - 0.1 * 2.0 - 0.1 * 3.8));

  const std::vector<double> bad{NAN, 0.0};
  CHECK(code_of([&] { step(init_optimizer(OptimizerConfig::adam(), 2), c, bad); }) ==
        ErrorCode::NonFiniteGradient);
  CHECK(code_of([&] { step(init_optimizer(OptimizerConfig::adam(), 2), c, std::vector<double>{1.0}); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(1);
  Classifier c = init_classifier(Arch::mlp(3, 5, 2), 8);
  for (double& p : c.params) p = rng.normal() * 1e-3 + 1.0 / 3.0;
  const Classifier back = from_checkpoint(to_checkpoint(c));
  CHECK(back.arch == c.arch);
  REQUIRE(back.params.size() == c.params.size());
  for (std::size_t i = 0; i < c.params.size(); ++i) CHECK(back.params[i] == c.params[i]);

  CHECK(code_of([] { from_checkpoint("not a checkpoint"); }) == ErrorCode::ParseError);
  std::string truncated = to_checkpoint(c);
  truncated.resize(truncated.size() / 2);
  CHECK(code_of([&] { from_checkpoint(truncated); }) == ErrorCode::ParseError);
}
