#include "peerloss/noise.hpp"

#include <cmath>

#include <fmt/core.h>

#include "peerloss/error.hpp"

namespace peerloss {

NoiseModel make_noise_model(double e_minus, double e_plus) {
  const auto in_range = [](double e) { return e >= 0.0 && e < 1.0; };
  if (!in_range(e_minus) || !in_range(e_plus)) {
    raise(ErrorCode::OutOfRange,
          fmt::format("flip rates must lie in [0,1), got e_minus={} e_plus={}",
                      e_minus, e_plus));
  }
  if (!(e_minus + e_plus < 1.0)) {
    raise(ErrorCode::SumNotLessThanOne,
          fmt::format("e_minus + e_plus must be < 1, got {}", e_minus + e_plus));
  }
  return NoiseModel{e_minus, e_plus};
}

TransitionMatrix::TransitionMatrix(std::size_t k, std::vector<double> row_major)
    : k_(k), q_(std::move(row_major)) {
  if (k_ < 2) raise(ErrorCode::OutOfRange, "transition matrix needs k >= 2");
  if (q_.size() != k_ * k_) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("transition matrix needs {} entries, got {}", k_ * k_, q_.size()));
  }
  for (std::size_t i = 0; i < k_; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k_; ++j) {
      const double v = q_[i * k_ + j];
      if (!(v >= 0.0 && v <= 1.0)) {
        raise(ErrorCode::OutOfRange,
              fmt::format("transition entry ({},{}) = {} outside [0,1]", i, j, v));
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      raise(ErrorCode::OutOfRange,
            fmt::format("transition row {} sums to {}, not 1", i, total));
    }
  }
}

std::optional<std::vector<double>> TransitionMatrix::column_rates(double tol) const {
  std::vector<double> rates(k_);
  for (std::size_t j = 0; j < k_; ++j) {
    const std::size_t first = (j == 0) ? 1 : 0;
    rates[j] = (*this)(first, j);
    for (std::size_t i = 0; i < k_; ++i) {
      if (i == j) continue;
      if (std::abs((*this)(i, j) - rates[j]) > tol) return std::nullopt;
    }
  }
  return rates;
}

TransitionMatrix to_transition(const NoiseModel& nm) {
  return TransitionMatrix(2, {1.0 - nm.e_minus, nm.e_minus, nm.e_plus, 1.0 - nm.e_plus});
}

TransitionMatrix uniform_transition(std::size_t k, double epsilon) {
  if (k < 2) raise(ErrorCode::OutOfRange, "uniform transition needs k >= 2");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    raise(ErrorCode::OutOfRange, fmt::format("epsilon must lie in [0,1), got {}", epsilon));
  }
  const double off = epsilon / static_cast<double>(k - 1);
  std::vector<double> q(k * k, off);
  for (std::size_t i = 0; i < k; ++i) q[i * k + i] = 1.0 - epsilon;
  return TransitionMatrix(k, std::move(q));
}

void check_prior(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    raise(ErrorCode::OutOfRange, fmt::format("class prior must lie in (0,1), got {}", p));
  }
}

void check_prior(std::span<const double> prior) {
  double total = 0.0;
  for (double v : prior) {
    if (!(v > 0.0 && v < 1.0)) {
      raise(ErrorCode::OutOfRange, fmt::format("prior entry {} outside (0,1)", v));
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    raise(ErrorCode::OutOfRange, fmt::format("prior sums to {}, not 1", total));
  }
}

double noisy_prior(double p, const NoiseModel& nm) {
  return p * (1.0 - nm.e_plus) + (1.0 - p) * nm.e_minus;
}

std::vector<double> noisy_marginal(std::span<const double> prior,
                                   const TransitionMatrix& q) {
  if (prior.size() != q.k()) {
    raise(ErrorCode::DimensionMismatch, "prior and transition sizes differ");
  }
  std::vector<double> out(q.k(), 0.0);
  for (std::size_t i = 0; i < q.k(); ++i) {
    for (std::size_t j = 0; j < q.k(); ++j) out[j] += prior[i] * q(i, j);
  }
  return out;
}

AgreementJoint agreement_joint(double p, const NoiseModel& classifier_rates,
                               const NoiseModel& label_rates) {
  check_prior(p);
  make_noise_model(classifier_rates.e_minus, classifier_rates.e_plus);
  make_noise_model(label_rates.e_minus, label_rates.e_plus);

  // [clean index][reported index]
  const double pred_given[2][2] = {
      {1.0 - classifier_rates.e_minus, classifier_rates.e_minus},
      {classifier_rates.e_plus, 1.0 - classifier_rates.e_plus}};
  const double noisy_given[2][2] = {
      {1.0 - label_rates.e_minus, label_rates.e_minus},
      {label_rates.e_plus, 1.0 - label_rates.e_plus}};
  const double prior[2] = {1.0 - p, p};

  AgreementJoint out;
  for (int y = 0; y < 2; ++y) {
    for (int a = 0; a < 2; ++a) {
      out.pred_marginal[a] += prior[y] * pred_given[y][a];
      out.label_marginal[a] += prior[y] * noisy_given[y][a];
      for (int b = 0; b < 2; ++b) {
        out.joint[a][b] += prior[y] * pred_given[y][a] * noisy_given[y][b];
      }
    }
  }
  return out;
}

DeltaMatrix delta_matrix(double p, const NoiseModel& classifier_rates,
                         const NoiseModel& label_rates) {
  const AgreementJoint j = agreement_joint(p, classifier_rates, label_rates);
  DeltaMatrix d{2, std::vector<double>(4)};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      d.entries[a * 2 + b] = j.joint[a][b] - j.pred_marginal[a] * j.label_marginal[b];
    }
  }
  return d;
}

DeltaMatrix delta_from_joint(std::size_t k, std::span<const double> joint) {
  if (joint.size() != k * k) raise(ErrorCode::ShapeMismatch, "joint must be k x k");
  std::vector<double> rows(k, 0.0);
  std::vector<double> cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      rows[i] += joint[i * k + j];
      cols[j] += joint[i * k + j];
    }
  }
  DeltaMatrix d{k, std::vector<double>(k * k)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      d.entries[i * k + j] = joint[i * k + j] - rows[i] * cols[j];
    }
  }
  return d;
}

ScoreMatrix ScoreMatrix::identity(std::size_t k) {
  ScoreMatrix m{k, std::vector<std::uint8_t>(k * k, 0)};
  for (std::size_t i = 0; i < k; ++i) m.entries[i * k + i] = 1;
  return m;
}

ScoreMatrix sign_matrix(const DeltaMatrix& d) {
  ScoreMatrix m{d.k, std::vector<std::uint8_t>(d.entries.size(), 0)};
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    m.entries[i] = d.entries[i] > 0.0 ? 1 : 0;
  }
  return m;
}

double alpha_star(double p, const NoiseModel& nm) {
  check_prior(p);
  make_noise_model(nm.e_minus, nm.e_plus);
  const double delta_p = 2.0 * p - 1.0;
  if (delta_p == 0.0) return 1.0;
  // Equal to 2 * noisy_prior - 1; this grouping makes the symmetric-noise
  // ratio below exactly 1.
  const double delta_noisy = delta_p * nm.signal() + (nm.e_minus - nm.e_plus);
  if (std::abs(delta_noisy) < 1e-12) {
    raise(ErrorCode::DegenerateNoisyPrior,
          fmt::format("noisy prior is balanced (delta = {}); downsample one class", delta_noisy));
  }
  return 1.0 - (nm.signal() * delta_p) / delta_noisy;
}

double risk_bound(double alpha, const NoiseModel& nm, std::size_t n, double delta) {
  make_noise_model(nm.e_minus, nm.e_plus);
  if (n < 1) raise(ErrorCode::OutOfRange, "risk bound needs n >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    raise(ErrorCode::OutOfRange, fmt::format("confidence delta must lie in (0,1), got {}", delta));
  }
  return (1.0 + alpha) / nm.signal() *
         std::sqrt(2.0 * std::log(2.0 / delta) / static_cast<double>(n));
}

bool calibration_condition_holds(double alpha, double p, const NoiseModel& nm, double tol) {
  if (!(alpha < 1.0)) return false;
  if (!(std::max(nm.e_plus, nm.e_minus) < 0.5)) return false;
  const double lhs = alpha * (1.0 - 2.0 * p) * (1.0 - nm.e_plus - nm.e_minus);
  const double rhs = (1.0 - alpha) * (nm.e_plus - nm.e_minus);
  return std::abs(lhs - rhs) <= tol;
}

bool is_categorical(double p, const NoiseModel& classifier_rates,
                    const NoiseModel& label_rates) {
  const AgreementJoint j = agreement_joint(p, classifier_rates, label_rates);
  for (int y = 0; y < 2; ++y) {
    const int other = 1 - y;
    if (!(j.pred_marginal[y] > 0.0)) return false;
    const double conditional = j.joint[y][other] / j.pred_marginal[y];
    if (!(conditional < j.label_marginal[other])) return false;
  }
  return true;
}

std::size_t label_index(int label) {
  if (label == -1) return 0;
  if (label == 1) return 1;
  raise(ErrorCode::LabelOutOfRange, fmt::format("binary label must be +1 or -1, got {}", label));
}

}  // namespace peerloss
