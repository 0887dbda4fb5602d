#include <cmath>
#include <vector>

#include <doctest.h>

#include "peerloss/error.hpp"
#include "peerloss/noise.hpp"
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

// P(noisy = +1) straight from the definition of the flip rates.
double noisy_pos(double p, double em, double ep) { return p * (1.0 - ep) + (1.0 - p) * em; }

}  // namespace

TEST_CASE("noise model validation") {
  CHECK(make_noise_model(0.2, 0.3).sum() == doctest::Approx(0.5));
  CHECK(make_noise_model(0.0, 0.0).signal() == 1.0);
  CHECK(code_of([] { make_noise_model(0.5, 0.5); }) == ErrorCode::SumNotLessThanOne);
  CHECK(code_of([] { make_noise_model(0.6, 0.45); }) == ErrorCode::SumNotLessThanOne);
  CHECK(code_of([] { make_noise_model(-0.1, 0.2); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { make_noise_model(1.0, 0.0); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { make_noise_model(NAN, 0.0); }) == ErrorCode::OutOfRange);
}

TEST_CASE("transition matrices") {
  const TransitionMatrix q = uniform_transition(4, 0.3);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += q(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q(i, i) == doctest::Approx(0.7));
  }
  CHECK(q(0, 3) == doctest::Approx(0.1));
  auto rates = q.column_rates();
  REQUIRE(rates.has_value());
  CHECK((*rates)[2] == doctest::Approx(0.1));

  CHECK(!TransitionMatrix(3, {0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.1, 0.1, 0.8}).column_rates());
  CHECK(code_of([] { TransitionMatrix(2, {0.5, 0.6, 0.5, 0.5}); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { TransitionMatrix(2, {1.0, 0.0}); }) == ErrorCode::ShapeMismatch);

  const TransitionMatrix b = to_transition({0.2, 0.3});
  CHECK(b(0, 1) == 0.2);
  CHECK(b(1, 0) == 0.3);
  CHECK(b(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("noisy prior matches the flip definition") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(0.01, 0.99);
    const double em = rng.uniform(0.0, 0.49);
    const double ep = rng.uniform(0.0, 0.49);
    CHECK(noisy_prior(p, {em, ep}) == doctest::Approx(noisy_pos(p, em, ep)).epsilon(1e-14));
  }
  CHECK(noisy_prior(0.6, {0.3, 0.4}) == doctest::Approx(0.48).epsilon(1e-14));
  CHECK(noisy_prior(0.5, {0.27, 0.27}) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(noisy_prior(0.7, {0.1, 0.2}) == doctest::Approx(0.59).epsilon(1e-14));
  std::size_t pos = 0;
  const std::size_t n = 1000000;
  for (std::size_t i = 0; i < n; ++i) {
    const bool clean_pos = rng.uniform() < 0.7;
    const bool flip = rng.uniform() < (clean_pos ? 0.2 : 0.1);
    pos += clean_pos != flip;
  }
  CHECK(std::abs(static_cast<double>(pos) / n - 0.59) <= 0.002);

  const std::vector<double> prior{0.2, 0.3, 0.5};
  const auto m = noisy_marginal(prior, uniform_transition(3, 0.3));
  CHECK(m[0] == doctest::Approx(0.2 * 0.7 + 0.3 * 0.15 + 0.5 * 0.15));
  CHECK(m[0] + m[1] + m[2] == doctest::Approx(1.0));
}

TEST_CASE("worked example agreement matrix") {
  const AgreementJoint j = agreement_joint(0.6, {0.2, 0.3}, {0.3, 0.4});
  CHECK(j.pred_marginal[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(j.label_marginal[0] == doctest::Approx(0.52).epsilon(1e-12));
  CHECK(j.joint[0][0] == doctest::Approx(0.296).epsilon(1e-12));

  const DeltaMatrix d = delta_matrix(0.6, {0.2, 0.3}, {0.3, 0.4});
  CHECK(std::abs(d(0, 0) - 0.036) <= 1e-12);
  CHECK(std::abs(d(0, 1) + 0.036) <= 1e-12);
  CHECK(std::abs(d(1, 0) + 0.036) <= 1e-12);
  CHECK(std::abs(d(1, 1) - 0.036) <= 1e-12);
  const ScoreMatrix m = sign_matrix(d);
  CHECK(m(0, 0) == 1);
  CHECK(m(0, 1) == 0);
  CHECK(m(1, 1) == 1);
}

TEST_CASE("delta matrix rows and columns sum to zero") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(0.05, 0.95);
    const NoiseModel c{rng.uniform(0.0, 0.45), rng.uniform(0.0, 0.45)};
    const NoiseModel l{rng.uniform(0.0, 0.45), rng.uniform(0.0, 0.45)};
    const DeltaMatrix d = delta_matrix(p, c, l);
    CHECK(std::abs(d(0, 0) + d(0, 1)) < 1e-14);
    CHECK(std::abs(d(0, 0) + d(1, 0)) < 1e-14);
    // Both better than chance: agreement is positively correlated.
    CHECK(sign_matrix(d).entries == ScoreMatrix::identity(2).entries);
  }
}

TEST_CASE("delta from an arbitrary joint") {
  const std::vector<double> joint{0.3, 0.1, 0.1, 0.1, 0.2, 0.05, 0.05, 0.05, 0.05};
  const DeltaMatrix d = delta_from_joint(3, joint);
  // Row marginals 0.5, 0.35, 0.15; column marginals 0.45, 0.35, 0.2.
  CHECK(d(0, 0) == doctest::Approx(0.3 - 0.5 * 0.45));
  CHECK(d(2, 1) == doctest::Approx(0.05 - 0.15 * 0.35));
  CHECK(code_of([&] { delta_from_joint(2, joint); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("alpha star") {
  CHECK(alpha_star(0.5, {0.1, 0.3}) == 1.0);
  CHECK(alpha_star(0.5, {0.0, 0.0}) == 1.0);
  CHECK(alpha_star(0.5, {0.4, 0.4}) == 1.0);
  CHECK(std::abs(alpha_star(0.6, {0.3, 0.4}) - 2.5) <= 1e-12);
  CHECK(std::abs(alpha_star(0.7, {0.0, 0.0})) <= 1e-12);

  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    double p = rng.uniform(0.01, 0.99);
    if (std::abs(p - 0.5) < 1e-6) continue;
    const double e = rng.uniform(0.0, 0.499);
    CHECK(std::abs(alpha_star(p, {e, e})) <= 1e-12);
  }
  for (int i = 0; i < 300; ++i) {
    const double p = rng.uniform(0.05, 0.95);
    const double em = rng.uniform(0.0, 0.45);
    const double ep = rng.uniform(0.0, 0.45);
    const double dpt = 2.0 * noisy_pos(p, em, ep) - 1.0;
    if (std::abs(dpt) < 1e-3) continue;
    const double expected = 1.0 - (1.0 - em - ep) * (2.0 * p - 1.0) / dpt;
    CHECK(alpha_star(p, {em, ep}) == doctest::Approx(expected).epsilon(1e-10));
  }
  // delta_p~ = 0 while delta_p != 0: p(1 - 0.3 - 0.1) + 0.1 = 0.5 at p = 2/3.
  CHECK(code_of([] { alpha_star(2.0 / 3.0, {0.1, 0.3}); }) == ErrorCode::DegenerateNoisyPrior);
}

TEST_CASE("risk bound") {
  const double b = risk_bound(1.0, {0.1, 0.2}, 1000, 0.05);
  CHECK(b == doctest::Approx(2.0 / 0.7 * std::sqrt(2.0 * std::log(40.0) / 1000.0)));
  CHECK(risk_bound(0.0, {0.0, 0.0}, 4000, 0.05) < risk_bound(0.0, {0.0, 0.0}, 1000, 0.05));
  CHECK(code_of([] { risk_bound(1.0, {0.1, 0.1}, 0, 0.05); }) == ErrorCode::OutOfRange);
  CHECK(code_of([] { risk_bound(1.0, {0.1, 0.1}, 10, 1.0); }) == ErrorCode::OutOfRange);
}

TEST_CASE("calibration condition") {
  // Symmetric noise and p = 0.5 satisfy it for every alpha < 1.
  CHECK(calibration_condition_holds(0.3, 0.5, {0.2, 0.2}));
  CHECK_FALSE(calibration_condition_holds(1.0, 0.5, {0.2, 0.2}));
  CHECK_FALSE(calibration_condition_holds(0.3, 0.5, {0.2, 0.3}));
  CHECK_FALSE(calibration_condition_holds(0.3, 0.5, {0.6, 0.2}));
  // alpha (1-2p)(1-e+-e-) = (1-alpha)(e+ - e-) at p = 0.4, alpha = 0.5 and e- = 0.1:
  // e+ - 0.1 = 0.2 (0.9 - e+), so e+ = 0.28 / 1.2.
  CHECK(calibration_condition_holds(0.5, 0.4, {0.1, 0.28 / 1.2}));
  CHECK_FALSE(calibration_condition_holds(0.5, 0.4, {0.1, 0.25}));
}

TEST_CASE("categorical condition") {
  CHECK(is_categorical(0.6, {0.2, 0.3}, {0.3, 0.4}));
  CHECK(is_categorical(0.3, {0.45, 0.45}, {0.2, 0.1}));
}

TEST_CASE("label index") {
  CHECK(label_index(-1) == 0);
  CHECK(label_index(1) == 1);
  CHECK(index_label(0) == -1);
  CHECK(code_of([] { label_index(0); }) == ErrorCode::LabelOutOfRange);
}
