#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "peerloss/error.hpp"
#include "peerloss/oracle.hpp"

namespace peerloss {

namespace {

constexpr std::size_t kMaxDumps = 5;

std::size_t random_m(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

NoiseModel random_noise(Rng& rng, double max_rate = 0.9) {
  const double em = rng.uniform(0.0, max_rate);
  const double ep = rng.uniform(0.0, std::min(max_rate, 0.98 - em));
  return make_noise_model(em, ep);
}

Assignment random_assignment(Rng& rng, std::size_t k, std::size_t m) {
  Assignment f(m);
  for (int& c : f) c = static_cast<int>(rng.below(k));
  return f;
}

void record(SuiteReport& r, bool pass, double residual, const std::string& dump) {
  r.max_residual = std::max(r.max_residual, residual);
  if (pass) return;
  r.pass = false;
  if (r.failures.size() < kMaxDumps) r.failures.push_back(dump);
}

SuiteReport suite_lemma2(Rng& rng, std::size_t count) {
  SuiteReport r{"lemma2", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const DiscreteInstance inst =
        random_binary_instance(rng, random_m(rng, 2, 10), rng.uniform(0.05, 0.95), random_noise(rng));
    for (int c = 0; c < 5; ++c) {
      const IdentityCheck zo = verify_affine_invariance(inst, zero_one_loss(random_assignment(rng, 2, inst.m)));
      record(r, zo.pass, zo.residual, fmt::format("0-1 lhs={} rhs={}\n{}", zo.lhs, zo.rhs, describe(inst)));
      std::vector<double> scores(inst.m);
      for (double& s : scores) s = 2.0 * rng.normal();
      const IdentityCheck lg = verify_affine_invariance(inst, score_loss(scores, BaseLossKind::Logistic));
      record(r, lg.pass, lg.residual, fmt::format("logistic lhs={} rhs={}\n{}", lg.lhs, lg.rhs, describe(inst)));
    }
    ++r.instances;
  }
  return r;
}

SuiteReport suite_thm2(Rng& rng, std::size_t count) {
  SuiteReport r{"thm2", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const DiscreteInstance inst =
        random_binary_instance(rng, random_m(rng, 2, 10), 0.5, random_noise(rng));
    const SetCheck c = verify_theorem2(inst);
    record(r, c.pass, c.residual,
           fmt::format("argmin sizes noisy={} clean={}\n{}", c.noisy_count, c.clean_count, describe(inst)));
    ++r.instances;
  }
  return r;
}

// Unequal prior whose noisy prior stays away from 0.5 so alpha* is finite.
DiscreteInstance unequal_instance(Rng& rng, std::size_t m_hi) {
  while (true) {
    double p = rng.uniform(0.3, 0.7);
    if (std::abs(p - 0.5) < 0.02) continue;
    const NoiseModel nm = random_noise(rng, 0.45);
    if (std::abs(2.0 * noisy_prior(p, nm) - 1.0) < 0.05) continue;
    return random_binary_instance(rng, random_m(rng, 2, m_hi), p, nm);
  }
}

SuiteReport suite_thm4(Rng& rng, std::size_t count) {
  SuiteReport r{"thm4", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const DiscreteInstance inst = unequal_instance(rng, 10);
    const SetCheck c = verify_theorem4(inst);
    record(r, c.pass, c.residual,
           fmt::format("alpha*={} argmin sizes noisy={} clean={}\n{}",
                       alpha_star(inst.p(), inst.binary_noise()), c.noisy_count, c.clean_count,
                       describe(inst)));
    ++r.instances;
  }
  return r;
}

SuiteReport suite_prop_a1(Rng& rng, std::size_t count) {
  SuiteReport r{"prop-a1", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const DiscreteInstance inst = unequal_instance(rng, 10);
    const double alpha = alpha_star(inst.p(), inst.binary_noise());
    const ProportionalityCheck c = verify_proposition_a1(inst, alpha);
    record(r, c.pass, c.residual,
           fmt::format("alpha={} constant={} expected={}\n{}", alpha, c.constant, c.expected,
                       describe(inst)));
    ++r.instances;
  }
  return r;
}

SuiteReport suite_thm3(Rng& rng, std::size_t count) {
  SuiteReport r{"thm3", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const bool symmetric = i % 5 == 4;
    const double p = rng.uniform(0.3, 0.7);
    NoiseModel nm = random_noise(rng, 0.45);
    if (symmetric) nm = make_noise_model(nm.e_minus, nm.e_minus);
    const DiscreteInstance inst = random_binary_instance(rng, random_m(rng, 2, 10), p, nm);
    const BoundCheck c = verify_theorem3_bound(inst);
    record(r, c.pass, std::max(0.0, c.gap - c.bound),
           fmt::format("gap={} bound={}\n{}", c.gap, c.bound, describe(inst)));
    if (symmetric) {
      // alpha* = 0: the plain noisy 0-1 minimisers are Bayes optimal, and the
      // alpha = 1 gap matches the noiseless instance's gap.
      DiscreteInstance clean = inst;
      clean.noise = uniform_transition(2, 0.0);
      const BoundCheck noiseless = verify_theorem3_bound(clean);
      const double drift = std::abs(noiseless.gap - c.gap);
      record(r, drift <= 1e-12, drift,
             fmt::format("symmetric noise gap={} noiseless gap={}\n{}", c.gap, noiseless.gap, describe(inst)));
      const SetCheck zero = [&] {
        const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
        SetCheck s;
        const MinimizerSet a = brute_force_minimizers(inst, [&](const Assignment& f) {
          return exact_risk(inst, f, Objective::plain(), RiskChannel::Noisy);
        });
        const MinimizerSet b = brute_force_minimizers(inst, [&](const Assignment& f) {
          return exact_risk(inst, f, Objective::plain(), RiskChannel::Clean);
        });
        s.pass = std::all_of(a.argmin.begin(), a.argmin.end(), [&](const Assignment& f) {
          return std::find(b.argmin.begin(), b.argmin.end(), f) != b.argmin.end();
        });
        s.residual = s.pass ? 0.0 : 1.0;
        return s;
      }();
      record(r, zero.pass, zero.residual,
             fmt::format("symmetric noise: alpha*=0 minimiser not Bayes optimal\n{}", describe(inst)));
    }
    ++r.instances;
  }
  return r;
}

SuiteReport suite_lemma3(Rng& rng, std::size_t count) {
  SuiteReport r{"lemma3", 0, 0.0, true, {}};
  for (std::size_t i = 0; i < count; ++i) {
    const DiscreteInstance inst =
        random_binary_instance(rng, random_m(rng, 2, 10), rng.uniform(0.05, 0.95), random_noise(rng));
    const SlopeCheck c = verify_lemma3(inst);
    const double slope_err = std::isnan(c.slope) ? 0.0 : std::abs(c.slope - c.expected);
    record(r, c.pass, std::max(c.residual, slope_err),
           fmt::format("slope={} expected={} residual={}\n{}", c.slope, c.expected, c.residual,
                       describe(inst)));
    ++r.instances;
  }
  return r;
}

SuiteReport suite_multiclass(Rng& rng, std::size_t count) {
  SuiteReport r{"multiclass", 0, 0.0, true, {}};
  const std::size_t k = 3;
  for (std::size_t i = 0; i < count; ++i) {
    const double eps = rng.uniform(0.0, 0.6);
    const TransitionMatrix q = uniform_transition(k, eps);
    std::vector<double> prior(k);
    for (double& v : prior) v = 0.2 + rng.uniform();
    double total = prior[0] + prior[1] + prior[2];
    for (double& v : prior) v /= total;
    prior[2] = 1.0 - prior[0] - prior[1];
    const DiscreteInstance inst = random_multiclass_instance(rng, k, random_m(rng, 2, 7), prior, q);
    for (int c = 0; c < 3; ++c) {
      const IdentityCheck id = verify_multiclass_affine(inst, random_assignment(rng, k, inst.m));
      record(r, id.pass, id.residual,
             fmt::format("lhs={} rhs={}\n{}", id.lhs, id.rhs, describe(inst)));
    }
    DiscreteInstance balanced = inst;
    balanced.prior.assign(k, 1.0 / 3.0);
    const SetCheck s = verify_multiclass_balanced(balanced);
    record(r, s.pass, s.residual,
           fmt::format("balanced argmin sizes noisy={} clean={}\n{}", s.noisy_count, s.clean_count,
                       describe(balanced)));
    ++r.instances;
  }
  return r;
}

SuiteReport suite_truthfulness(Rng& rng, std::size_t count) {
  SuiteReport r{"truthfulness", 0, 0.0, true, {}};
  while (r.instances < count) {
    const bool balanced = r.instances % 2 == 0;
    const double p = balanced ? 0.5 : rng.uniform(0.2, 0.8);
    const DiscreteInstance inst =
        random_binary_instance(rng, random_m(rng, 2, 10), p, random_noise(rng, 0.45));
    const Assignment bayes = bayes_assignment(inst);
    if (std::all_of(bayes.begin(), bayes.end(), [&](int c) { return c == bayes[0]; })) continue;
    if (!instance_is_categorical(inst, bayes)) continue;
    const TruthCheck c = verify_ca_truthfulness(inst, balanced);
    const bool pass = c.status == TruthStatus::Pass && c.sign_is_identity;
    record(r, pass, std::max(0.0, c.bayes_score - c.best_other),
           fmt::format("status={} identity={} bayes={} best_other={}\n{}", to_string(c.status),
                       c.sign_is_identity, c.bayes_score, c.best_other, describe(inst)));
    ++r.instances;
  }
  return r;
}

SuiteReport suite_convexity(Rng& rng, std::size_t count) {
  SuiteReport r{"convexity", 0, 0.0, true, {}};
  while (r.instances < count) {
    const double p = rng.uniform(0.1, 0.9);
    const double em = rng.uniform(0.0, 0.45);
    const double alpha = rng.uniform(0.0, 0.95);
    const double den = (1.0 - alpha) + alpha * (1.0 - 2.0 * p);
    if (den <= 1e-6) continue;
    const double ep = (alpha * (1.0 - 2.0 * p) * (1.0 - em) + (1.0 - alpha) * em) / den;
    if (!(ep >= 0.0 && ep < 0.5)) continue;
    const NoiseModel nm = make_noise_model(em, ep);
    if (!calibration_condition_holds(alpha, p, nm)) continue;
    const ConvexityCheck c = verify_convexity_condition(alpha, p, nm);
    record(r, c.pass, std::max(0.0, -c.min_second_difference),
           fmt::format("alpha={} p={} e=({},{}) min second difference={}", alpha, p, em, ep,
                       c.min_second_difference));
    ++r.instances;
  }
  return r;
}

std::size_t pick(std::size_t requested, std::size_t fallback) {
  return requested ? requested : fallback;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"lemma2", "thm2", "thm3", "thm4", "prop-a1",
                                                 "multiclass", "truthfulness", "convexity", "all"};
  return names;
}

std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed,
                                   std::size_t instances) {
  const auto names = suite_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    raise(ErrorCode::InvalidArgument, fmt::format("unknown suite '{}'", name));
  }
  std::vector<SuiteReport> out;
  const bool all = name == "all";
  std::uint64_t stream = 0;
  const auto run = [&](const std::string& id, auto fn, std::size_t fallback) {
    ++stream;
    if (!all && name != id) return;
    Rng rng(derive_seed(seed, stream));
    out.push_back(fn(rng, pick(instances, fallback)));
  };
  run("lemma2", suite_lemma2, 200);
  run("thm2", suite_thm2, 200);
  run("thm3", suite_thm3, 500);
  ++stream;
  if (all || name == "thm3") {
    Rng rng(derive_seed(seed, stream));
    out.push_back(suite_lemma3(rng, pick(instances, 100)));
  }
  run("thm4", suite_thm4, 200);
  run("prop-a1", suite_prop_a1, 100);
  run("multiclass", suite_multiclass, 100);
  run("truthfulness", suite_truthfulness, 100);
  run("convexity", suite_convexity, 50);
  return out;
}

std::string format_report(const std::vector<SuiteReport>& reports) {
  std::string out = fmt::format("{:<14} {:>9} {:>14}  {}\n", "theorem", "instances", "max_residual", "result");
  bool all_pass = true;
  for (const SuiteReport& r : reports) {
    out += fmt::format("{:<14} {:>9} {:>14.3e}  {}\n", r.theorem, r.instances, r.max_residual,
                       r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  for (const SuiteReport& r : reports) {
    for (const std::string& f : r.failures) out += fmt::format("\n[{}] failing instance:\n{}\n", r.theorem, f);
  }
  out += all_pass ? "all suites passed\n" : "some suites FAILED\n";
  return out;
}

std::string format_report_csv(const std::vector<SuiteReport>& reports) {
  std::string out = "theorem,instances,max_residual,pass\n";
  for (const SuiteReport& r : reports) {
    out += fmt::format("{},{},{},{}\n", r.theorem, r.instances, r.max_residual, r.pass ? "true" : "false");
  }
  return out;
}

}  // namespace peerloss
