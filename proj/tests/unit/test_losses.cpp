#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <doctest.h>

#include "peerloss/error.hpp"
#include "peerloss/losses.hpp"
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

double logistic(double t, int y) { return std::log1p(std::exp(-t * y)); }

double chi_square_p(const std::vector<double>& observed, double expected_each) {
  double stat = 0.0;
  for (double o : observed) stat += (o - expected_each) * (o - expected_each) / expected_each;
  boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST_CASE("base losses") {
  CHECK(eval_base(BaseLossKind::ZeroOne, 0.0, 1).value == 0.0);
  CHECK(eval_base(BaseLossKind::ZeroOne, 0.0, -1).value == 1.0);
  CHECK(eval_base(BaseLossKind::ZeroOne, -0.5, -1).value == 0.0);
  CHECK_FALSE(eval_base(BaseLossKind::ZeroOne, 1.0, 1).differentiable);

  for (double t : {-30.0, -2.0, -0.1, 0.0, 0.7, 3.0, 30.0}) {
    for (int y : {-1, 1}) {
      const LossEval l = eval_base(BaseLossKind::Logistic, t, y);
      CHECK(l.value == doctest::Approx(logistic(t, y)).epsilon(1e-12));
      const double h = 1e-6;
      const double fd = (logistic(t + h, y) - logistic(t - h, y)) / (2 * h);
      CHECK(l.grad == doctest::Approx(fd).epsilon(1e-6));
      const double s = eval_base(BaseLossKind::SigmoidSymmetric, t, y).value;
      CHECK(s + eval_base(BaseLossKind::SigmoidSymmetric, t, -y).value == doctest::Approx(1.0));
    }
  }
  // Large margins stay finite.
  CHECK(eval_base(BaseLossKind::Logistic, -800.0, 1).value == doctest::Approx(800.0));
  CHECK(code_of([] { eval_base(BaseLossKind::Logistic, 0.0, 0); }) == ErrorCode::LabelOutOfRange);
}

TEST_CASE("multiclass cross entropy") {
  const std::vector<double> s{1.0, 2.0, 0.5};
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
  const MultiLossEval l = eval_base(BaseLossKind::CrossEntropyMulticlass, s, 1);
  CHECK(l.value == doctest::Approx(-std::log(std::exp(2.0) / z)));
  CHECK(l.grad[0] == doctest::Approx(std::exp(1.0) / z));
  CHECK(l.grad[1] == doctest::Approx(std::exp(2.0) / z - 1.0));
  CHECK(eval_base(BaseLossKind::ZeroOne, s, 1).value == 0.0);
  CHECK(eval_base(BaseLossKind::ZeroOne, std::vector<double>{1.0, 1.0, 0.0}, 1).value == 1.0);
  CHECK(argmax(std::vector<double>{3.0, 3.0, 1.0}) == 0);
  CHECK(code_of([&] { eval_base(BaseLossKind::CrossEntropyMulticlass, s, 3); }) ==
        ErrorCode::LabelOutOfRange);
}

TEST_CASE("peer pairing structure") {
  const PeerPairing pp = draw_pairing(50, 9);
  REQUIRE(pp.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(pp.n1[i] != pp.n2[i]);
    CHECK(pp.n1[i] != i);
    CHECK(pp.n2[i] != i);
    CHECK(pp.n1[i] < 50);
  }
  const PeerPairing again = draw_pairing(50, 9);
  CHECK(again.n1 == pp.n1);
  CHECK(again.n2 == pp.n2);
  CHECK(draw_pairing(50, 10).n1 != pp.n1);
  CHECK(draw_pairing(3, 1).size() == 3);
  CHECK(code_of([] { draw_pairing(2, 1); }) == ErrorCode::TooFewSamples);
}

TEST_CASE("peer pairs are uniform over ordered distinct pairs") {
  // n = 5, sample 0: 12 ordered pairs from {1,2,3,4}.
  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  const int draws = 12000;
  for (int s = 0; s < draws; ++s) {
    const PeerPairing pp = draw_pairing(5, derive_seed(77, 1, s));
    counts[{pp.n1[0], pp.n2[0]}] += 1.0;
  }
  REQUIRE(counts.size() == 12);
  std::vector<double> observed;
  for (const auto& [k, v] : counts) observed.push_back(v);
  CHECK(chi_square_p(observed, draws / 12.0) > 1e-3);
}

TEST_CASE("peer features and peer labels are drawn independently") {
  // Contingency of n1 against n2 parity across samples of one large pairing.
  const std::size_t n = 20000;
  const PeerPairing pp = draw_pairing(n, 4);
  double table[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < n; ++i) table[pp.n1[i] % 2][pp.n2[i] % 2] += 1.0;
  double stat = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double row = table[a][0] + table[a][1];
      const double col = table[0][b] + table[1][b];
      const double e = row * col / n;
      stat += (table[a][b] - e) * (table[a][b] - e) / e;
    }
  }
  boost::math::chi_squared dist(1.0);
  CHECK(boost::math::cdf(boost::math::complement(dist, stat)) > 1e-3);
}

TEST_CASE("loss spec validation") {
  CHECK_NOTHROW(validate(LossSpec::peer(1.0)));
  CHECK(LossSpec::peer(0.3).peer_alpha() == 0.3);
  CHECK(LossSpec::plain().peer_alpha() == 0.0);
  CHECK(LossSpec::surrogate({0.1, 0.2}).family_name() == "surrogate");
  CHECK(code_of([] { validate(LossSpec::peer(NAN)); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] {
          validate(LossSpec::surrogate({0.1, 0.1}, BaseLossKind::CrossEntropyMulticlass));
        }) == ErrorCode::InvalidArgument);
  LossSpec s = LossSpec::symmetric();
  CHECK_NOTHROW(validate(s));
  s.base = BaseLossKind::Logistic;
  CHECK(code_of([&] { validate(s); }) == ErrorCode::InvalidArgument);
  LossSpec capped = LossSpec::plain();
  capped.cap = 0.0;
  CHECK(code_of([&] { validate(capped); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("peer sample loss") {
  const SampleLoss s = sample_loss(LossSpec::peer(0.5), 1.2, -1, -0.4, 1);
  CHECK(s.value == doctest::Approx(logistic(1.2, -1) - 0.5 * logistic(-0.4, 1)));
  CHECK(s.grad_own == doctest::Approx(eval_base(BaseLossKind::Logistic, 1.2, -1).grad));
  CHECK(s.grad_peer == doctest::Approx(-0.5 * eval_base(BaseLossKind::Logistic, -0.4, 1).grad));

  LossSpec capped = LossSpec::peer(1.0);
  capped.cap = 0.5;
  const SampleLoss c = sample_loss(capped, 5.0, 1, 5.0, -1);
  CHECK(c.value == -0.5);
  CHECK(c.grad_own == 0.0);
  CHECK(c.grad_peer == 0.0);
}

TEST_CASE("batch loss gradient matches finite differences") {
  Rng rng(3);
  const std::size_t n = 12;
  for (const LossSpec& spec :
       {LossSpec::plain(), LossSpec::peer(1.0), LossSpec::peer(0.4), LossSpec::peer(1.7),
        LossSpec::surrogate({0.2, 0.35}), LossSpec::symmetric()}) {
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = 2.0 * rng.normal();
      labels[i] = rng.uniform() < 0.5 ? -1 : 1;
    }
    const PeerPairing pp = draw_pairing(n, rng.next());
    const BatchLoss b = batch_loss(spec, scores, labels, &pp);
    double mean = 0.0;
    for (double v : b.per_sample) mean += v;
    CHECK(b.mean == doctest::Approx(mean / n));
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6;
      auto up = scores, dn = scores;
      up[j] += h;
      dn[j] -= h;
      const double fd = (batch_loss(spec, up, labels, &pp).mean - batch_loss(spec, dn, labels, &pp).mean) / (2 * h);
      CHECK(b.score_grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
    }
  }
}

TEST_CASE("peer batch per-sample definition") {
  const std::vector<double> s{0.5, -1.0, 2.0, 0.1};
  const std::vector<int> y{1, -1, -1, 1};
  PeerPairing pp{{1, 2, 3, 0}, {2, 3, 0, 1}, 0};
  const BatchLoss b = peer_loss_batch(LossSpec::peer(1.0), s, y, pp);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b.per_sample[i] == doctest::Approx(logistic(s[i], y[i]) - logistic(s[pp.n1[i]], y[pp.n2[i]])));
  }
  CHECK(code_of([&] { peer_loss_batch(LossSpec::plain(), s, y, pp); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { peer_loss_batch(LossSpec::peer(1.0), s, std::vector<int>{1, 1}, pp); }) ==
        ErrorCode::ShapeMismatch);
}

TEST_CASE("generic peer score") {
  const ScoreMatrix id = ScoreMatrix::identity(2);
  CHECK(generic_peer_score(id, 1, 1, 1, -1) == -1.0);
  CHECK(generic_peer_score(id, 1, -1, 1, 1) == 1.0);
  CHECK(generic_peer_score(id, -1, -1, 1, 1) == 0.0);
  const ScoreMatrix id3 = ScoreMatrix::identity(3);
  CHECK(generic_peer_score(id3, 2, 2, 0, 1) == -1.0);
  CHECK(code_of([&] { generic_peer_score(id3, 3, 0, 0, 0); }) == ErrorCode::ClassOutOfRange);
}

TEST_CASE("surrogate is unbiased under the noise") {
  for (BaseLossKind base : {BaseLossKind::Logistic, BaseLossKind::ZeroOne, BaseLossKind::SigmoidSymmetric}) {
    for (double em : {0.0, 0.1, 0.3, 0.45}) {
      for (double ep : {0.0, 0.2, 0.4}) {
        const NoiseModel nm{em, ep};
        for (double t = -4.0; t <= 4.0; t += 0.5) {
          for (int y : {-1, 1}) {
            const double ey = nm.rate_for(y);
            const double expect = (1.0 - ey) * surrogate_loss(base, t, y, nm).value +
                                  ey * surrogate_loss(base, t, -y, nm).value;
            CHECK(std::abs(expect - eval_base(base, t, y).value) <= 1e-10);
          }
        }
      }
    }
    for (double t = -3.0; t <= 3.0; t += 0.25) {
      CHECK(surrogate_loss(base, t, 1, {0.0, 0.0}).value == eval_base(base, t, 1).value);
    }
  }
}

TEST_CASE("multiclass peer loss gradient") {
  Rng rng(8);
  const std::size_t n = 7, k = 3;
  std::vector<double> s(n * k);
  for (double& v : s) v = rng.normal();
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(k));
  const PeerPairing pp = draw_pairing(n, 12);
  const MultiBatchLoss b = peer_loss_multiclass(BaseLossKind::CrossEntropyMulticlass, s, k, y, pp, 0.8);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double h = 1e-6;
    auto up = s, dn = s;
    up[j] += h;
    dn[j] -= h;
    const double fd = (peer_loss_multiclass(BaseLossKind::CrossEntropyMulticlass, up, k, y, pp, 0.8).mean -
                       peer_loss_multiclass(BaseLossKind::CrossEntropyMulticlass, dn, k, y, pp, 0.8).mean) /
                      (2 * h);
    CHECK(b.score_grad[j] == doctest::Approx(fd).epsilon(1e-5).scale(1e-3));
  }
}
