#pragma once

// Label-noise models and the closed-form quantities built on them: noisy
// priors, the agreement (Delta) matrix between a predictor and the noisy
// label, its sign matrix, the optimal peer weight, and the risk-bound and
// calibration-condition calculators.
//
// Binary labels are +1 / -1. Wherever a 2x2 matrix is indexed, index 0 is
// label -1 and index 1 is label +1.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peerloss {

/// Class-conditional binary flip rates.
///   e_minus = P(noisy = +1 | clean = -1)
///   e_plus  = P(noisy = -1 | clean = +1)
/// Valid models have both rates in [0, 1) and e_minus + e_plus < 1.
struct NoiseModel {
  double e_minus = 0.0;
  double e_plus = 0.0;

  double sum() const noexcept { return e_minus + e_plus; }
  /// 1 - e_minus - e_plus, the factor by which noise shrinks peer risk.
  double signal() const noexcept { return 1.0 - e_minus - e_plus; }
  /// Flip rate out of the given clean label.
  double rate_for(int label) const noexcept { return label > 0 ? e_plus : e_minus; }

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

NoiseModel make_noise_model(double e_minus, double e_plus);

/// Row-stochastic K x K matrix, entry (i, j) = P(noisy = j | clean = i).
class TransitionMatrix {
 public:
  /// Validates shape, entry range and row sums (1e-12).
  TransitionMatrix(std::size_t k, std::vector<double> row_major);

  std::size_t k() const noexcept { return k_; }
  double operator()(std::size_t from, std::size_t to) const { return q_[from * k_ + to]; }
  std::span<const double> row(std::size_t from) const {
    return {q_.data() + from * k_, k_};
  }
  const std::vector<double>& entries() const noexcept { return q_; }

  /// Per-target rates e_j when every off-diagonal column is constant
  /// (q_ij == q_kj for i, k != j, within tol); empty otherwise.
  std::optional<std::vector<double>> column_rates(double tol = 1e-12) const;

 private:
  std::size_t k_;
  std::vector<double> q_;
};

/// Binary model as a 2x2 transition (index 0 = label -1).
TransitionMatrix to_transition(const NoiseModel& nm);

/// q_ii = 1 - epsilon, q_ij = epsilon / (k - 1).
TransitionMatrix uniform_transition(std::size_t k, double epsilon);

/// Throws OutOfRange unless 0 < p < 1.
void check_prior(double p);
/// Throws OutOfRange unless entries are in (0,1) and sum to 1 (1e-12).
void check_prior(std::span<const double> prior);

/// P(noisy = +1) = p (1 - e_plus) + (1 - p) e_minus.
double noisy_prior(double p, const NoiseModel& nm);

/// P(noisy = j) for a K-class prior.
std::vector<double> noisy_marginal(std::span<const double> prior,
                                   const TransitionMatrix& q);

/// Joint law of (predictor, noisy label) when both are conditionally
/// independent given the clean label. `classifier_rates` are the
/// predictor's own error rates (e*_-1, e*_+1).
struct AgreementJoint {
  double joint[2][2]{};        // [pred index][noisy index]
  double pred_marginal[2]{};
  double label_marginal[2]{};
};

AgreementJoint agreement_joint(double p, const NoiseModel& classifier_rates,
                               const NoiseModel& label_rates);

struct DeltaMatrix {
  std::size_t k = 2;
  std::vector<double> entries;  // row-major, k x k

  double operator()(std::size_t i, std::size_t j) const { return entries[i * k + j]; }
};

struct ScoreMatrix {
  std::size_t k = 2;
  std::vector<std::uint8_t> entries;

  int operator()(std::size_t i, std::size_t j) const { return entries[i * k + j]; }
  static ScoreMatrix identity(std::size_t k);
};

/// Delta_{k,l} = P(f* = g(k), noisy = g(l)) - P(f* = g(k)) P(noisy = g(l)).
DeltaMatrix delta_matrix(double p, const NoiseModel& classifier_rates,
                         const NoiseModel& label_rates);

/// Delta from an arbitrary K x K joint distribution.
DeltaMatrix delta_from_joint(std::size_t k, std::span<const double> joint);

/// Elementwise Sgn with Sgn(x) = 1 iff x > 0.
ScoreMatrix sign_matrix(const DeltaMatrix& d);

/// alpha* = 1 - (1 - e_minus - e_plus) delta_p / delta_p~ .
/// Returns exactly 1 when p == 0.5. Throws DegenerateNoisyPrior when the
/// noisy prior is balanced (|delta_p~| < 1e-12) but the clean one is not.
double alpha_star(double p, const NoiseModel& nm);

/// (1 + alpha) / (1 - e_minus - e_plus) * sqrt(2 ln(2/delta) / n).
double risk_bound(double alpha, const NoiseModel& nm, std::size_t n, double delta);

inline constexpr double kCalibrationTolerance = 1e-9;

/// Condition under which alpha-weighted peer loss with a base loss whose
/// second derivative is label-symmetric (logistic, square) is calibrated
/// and has convex expected risk: alpha < 1, both rates < 0.5, and
/// alpha (1 - 2p)(1 - e_plus - e_minus) == (1 - alpha)(e_plus - e_minus).
bool calibration_condition_holds(double alpha, double p, const NoiseModel& nm,
                                 double tol = kCalibrationTolerance);

/// P(noisy = -y | f* = y) < P(noisy = -y) for both labels.
bool is_categorical(double p, const NoiseModel& classifier_rates,
                    const NoiseModel& label_rates);

/// Maps +1/-1 to matrix index 1/0; throws LabelOutOfRange otherwise.
std::size_t label_index(int label);
inline int index_label(std::size_t index) { return index == 0 ? -1 : +1; }

}  // namespace peerloss
