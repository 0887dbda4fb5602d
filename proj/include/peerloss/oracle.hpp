#pragma once

// Exact verification on finite discrete instances. Every expectation is a sum
// over the finite joint law, the peer term uses the product of marginals, and
// minimizers are found by enumerating all K^m deterministic classifiers.
//
// Class indices follow the noise module: for binary instances index 0 is
// label -1 and index 1 is label +1.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "peerloss/losses.hpp"
#include "peerloss/noise.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

/// Largest hypothesis space (K^m) the enumeration accepts.
inline constexpr std::size_t kEnumerationBudget = 4096;
inline constexpr double kTieTolerance = 1e-12;

struct DiscreteInstance {
  std::size_t k = 2;
  std::size_t m = 0;
  std::vector<std::vector<double>> px_given_y;  // [class][point]
  std::vector<double> prior;                    // [class]
  TransitionMatrix noise = uniform_transition(2, 0.0);

  /// P(Y = +1) of a binary instance.
  double p() const { return prior[1]; }
  /// (e_minus, e_plus) of a binary instance.
  NoiseModel binary_noise() const { return {noise(0, 1), noise(1, 0)}; }
};

/// Checks distributions (1e-12) and the enumeration budget (BudgetExceeded).
void validate(const DiscreteInstance& inst);

DiscreteInstance make_binary_instance(double p, std::vector<double> px_neg,
                                      std::vector<double> px_pos, const NoiseModel& nm);

/// Class per support point.
using Assignment = std::vector<int>;

enum class RiskChannel { Clean, Noisy };

/// joint[x * k + y] = P(X = x, Y = y) on the chosen channel.
std::vector<double> joint_law(const DiscreteInstance& inst, RiskChannel ch);

/// Loss at support point x against class index y.
using PointLoss = std::function<double(std::size_t x, std::size_t y)>;

/// 0-1 loss of an assignment.
PointLoss zero_one_loss(const Assignment& f);
/// Binary base loss of per-point real scores.
PointLoss score_loss(const std::vector<double>& scores, BaseLossKind base);

struct Objective {
  enum class Kind { Plain, Peer, Surrogate } kind = Kind::Plain;
  double alpha = 1.0;

  static Objective plain() { return {Kind::Plain, 0.0}; }
  static Objective peer(double alpha = 1.0) { return {Kind::Peer, alpha}; }
  /// Unbiased correction with the instance's own (binary) noise rates.
  static Objective surrogate() { return {Kind::Surrogate, 0.0}; }
};

/// Exact expected loss. Peer: E[l(X, Y)] - alpha * sum_x P(x) sum_y P(y) l(x, y).
double exact_risk(const DiscreteInstance& inst, const PointLoss& loss, Objective obj,
                  RiskChannel ch);
double exact_risk(const DiscreteInstance& inst, const Assignment& f, Objective obj,
                  RiskChannel ch);

/// Assignment `code` in base K, point 0 as the least significant digit.
Assignment decode_assignment(std::size_t code, std::size_t k, std::size_t m);
std::size_t hypothesis_count(const DiscreteInstance& inst);

struct MinimizerSet {
  double min_value = 0.0;
  std::vector<Assignment> argmin;
};

/// Every assignment within kTieTolerance of the minimum.
MinimizerSet brute_force_minimizers(const DiscreteInstance& inst,
                                    const std::function<double(const Assignment&)>& objective,
                                    bool reverse = false);

/// Per-point argmax of P(x, y), lowest index on ties.
Assignment bayes_assignment(const DiscreteInstance& inst);

// --- verifiers ----------------------------------------------------------------

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  bool pass = false;
};

struct SetCheck {
  bool pass = false;
  std::size_t noisy_count = 0;
  std::size_t clean_count = 0;
  double residual = 0.0;  // 0 on pass, else 1
};

/// Noisy alpha=1 peer risk against (1 - e_minus - e_plus) times the clean one.
IdentityCheck verify_affine_invariance(const DiscreteInstance& inst, const PointLoss& loss,
                                       double tol = 1e-10);

/// Balanced prior: argmin of the noisy 0-1 peer risk equals the clean 0-1 argmin.
SetCheck verify_theorem2(const DiscreteInstance& inst);

/// alpha = alpha*: argmin of the noisy 0-1 alpha-peer risk inside the clean 0-1 argmin.
SetCheck verify_theorem4(const DiscreteInstance& inst);

struct BoundCheck {
  double gap = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/// Worst clean excess risk over the noisy 0-1 peer argmin against |2p - 1|.
BoundCheck verify_theorem3_bound(const DiscreteInstance& inst);

struct SlopeCheck {
  double slope = 0.0;     // least-squares fit, NaN if R_-1 + R_+1 is constant
  double expected = 0.0;  // 2 (1 - e_minus - e_plus) p (1 - p)
  double residual = 0.0;  // max |peer - expected * (R_-1 + R_+1 - 1)|
  bool pass = false;
};

/// R_-1(f) = P(f = +1 | Y = -1), R_+1(f) = P(f = -1 | Y = +1).
std::pair<double, double> class_error_rates(const DiscreteInstance& inst, const Assignment& f);

SlopeCheck verify_lemma3(const DiscreteInstance& inst, double tol = 1e-10);

struct ProportionalityCheck {
  double constant = 0.0;  // fitted across all assignments
  double expected = 0.0;  // 1 - e_minus - e_plus
  double residual = 0.0;
  bool pass = false;
};

/// Differences of noisy alpha-peer risks against differences of clean 0-1
/// risks over every assignment pair.
ProportionalityCheck verify_proposition_a1(const DiscreteInstance& inst, double alpha,
                                           double tol = 1e-10);

/// K-class: noisy 0-1 peer risk against (1 - sum_j e_j) times the clean one.
/// Throws ConditionViolated unless every off-diagonal column is constant.
IdentityCheck verify_multiclass_affine(const DiscreteInstance& inst, const Assignment& f,
                                       double tol = 1e-10);
/// Uniform prior: noisy 0-1 peer argmin equals the clean 0-1 argmin.
SetCheck verify_multiclass_balanced(const DiscreteInstance& inst);

enum class TruthStatus { Pass, Fail, ConstantOptimal };
std::string to_string(TruthStatus s);

struct TruthCheck {
  TruthStatus status = TruthStatus::Fail;
  bool sign_is_identity = false;
  double bayes_score = 0.0;   // -S of the Bayes assignment
  double best_other = 0.0;    // smallest -S among the comparison set
  std::size_t compared = 0;
};

/// Correlated-agreement truthfulness: with M = Sgn(Delta) from the exact joint
/// of (f*(X), noisy Y), -S of f* is no larger than -S of every report in
/// {f*, -f*, +1, -1}. `full_enumeration` compares against all 2^m assignments.
TruthCheck verify_ca_truthfulness(const DiscreteInstance& inst, bool full_enumeration = false);

/// P(noisy = -y | f* = y) < P(noisy = -y) for both y, on the exact joint.
bool instance_is_categorical(const DiscreteInstance& inst, const Assignment& f);

struct ConvexityCheck {
  double min_second_difference = 0.0;
  bool pass = false;
};

/// Logistic alpha-peer: second central differences of the constant-score
/// noisy risk and of the conditional risks eta r_+(t) + (1 - eta) r_-(t),
/// eta in {0, 0.1, ..., 1}, on t in [-5, 5] with step 0.05.
/// Throws ConditionNotMet unless calibration_condition_holds.
ConvexityCheck verify_convexity_condition(double alpha, double p, const NoiseModel& nm);

// --- random instances ----------------------------------------------------------

/// Random binary instance with m points; Dirichlet(1) conditionals.
DiscreteInstance random_binary_instance(Rng& rng, std::size_t m, double p, const NoiseModel& nm);
DiscreteInstance random_multiclass_instance(Rng& rng, std::size_t k, std::size_t m,
                                            std::vector<double> prior,
                                            const TransitionMatrix& q);
std::string describe(const DiscreteInstance& inst);

// --- suites --------------------------------------------------------------------

struct SuiteReport {
  std::string theorem;
  std::size_t instances = 0;
  double max_residual = 0.0;
  bool pass = true;
  std::vector<std::string> failures;
};

/// lemma2 | thm2 | thm3 | thm4 | prop-a1 | multiclass | truthfulness | convexity | all
const std::vector<std::string>& suite_names();
/// `instances` = 0 uses each suite's default count. "thm3" also reports lemma3.
std::vector<SuiteReport> run_suite(const std::string& name, std::uint64_t seed,
                                   std::size_t instances = 0);

std::string format_report(const std::vector<SuiteReport>& reports);
std::string format_report_csv(const std::vector<SuiteReport>& reports);

}  // namespace peerloss
