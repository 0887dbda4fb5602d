#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "peerloss/noise.hpp"

namespace peerloss {

enum class BaseLossKind {
  ZeroOne,                 // 1 if sign(t) != y, sign(0) = +1
  Logistic,                // ln(1 + exp(-t y))
  SigmoidSymmetric,        // 1 / (1 + exp(t y)); l(t,+1) + l(t,-1) = 1
  CrossEntropyMulticlass,  // -ln softmax(scores)_y
};

std::string to_string(BaseLossKind kind);
BaseLossKind parse_base_loss(const std::string& name);

struct LossEval {
  double value = 0.0;
  double grad = 0.0;  // d value / d score
  bool differentiable = true;
};

struct MultiLossEval {
  double value = 0.0;
  std::vector<double> grad;
  bool differentiable = true;
};

/// Binary base loss at score t against label y in {-1,+1}.
LossEval eval_base(BaseLossKind kind, double score, int label);

/// Vector-score loss against class index y in [0, K). Accepts
/// CrossEntropyMulticlass and ZeroOne (argmax, lowest index on ties).
MultiLossEval eval_base(BaseLossKind kind, std::span<const double> scores, int label);

/// Binary sign decision, sign(0) = +1.
inline int sign_label(double score) { return score >= 0.0 ? 1 : -1; }
/// Argmax with the lowest index winning ties.
std::size_t argmax(std::span<const double> scores);

// --- peer samples ---------------------------------------------------------

/// For every sample i, two peer indices with n1[i] != n2[i] and both != i.
struct PeerPairing {
  std::vector<std::size_t> n1;
  std::vector<std::size_t> n2;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return n1.size(); }
};

PeerPairing draw_pairing(std::size_t n, std::uint64_t seed);

// --- loss specification ---------------------------------------------------

struct PlainFamily {};
struct PeerFamily {
  double alpha = 1.0;
};
struct SurrogateFamily {
  NoiseModel nm;
};
struct SymmetricFamily {};

using LossFamily = std::variant<PlainFamily, PeerFamily, SurrogateFamily, SymmetricFamily>;

struct LossSpec {
  BaseLossKind base = BaseLossKind::Logistic;
  LossFamily family = PlainFamily{};
  /// Per-sample loss is clamped to [-cap, cap] when set; clamped samples
  /// contribute no gradient.
  std::optional<double> cap;

  bool is_peer() const { return std::holds_alternative<PeerFamily>(family); }
  double peer_alpha() const;
  /// "plain", "peer", "surrogate" or "symmetric".
  std::string family_name() const;

  static LossSpec plain(BaseLossKind base = BaseLossKind::Logistic);
  static LossSpec peer(double alpha, BaseLossKind base = BaseLossKind::Logistic);
  static LossSpec surrogate(const NoiseModel& nm, BaseLossKind base = BaseLossKind::Logistic);
  static LossSpec symmetric();
};

/// Throws InvalidArgument on inconsistent specs (non-finite alpha, symmetric
/// family with a non-symmetric base, surrogate with multiclass base, ...).
void validate(const LossSpec& spec);

/// One sample of any binary family. For peer families `peer_score` is the
/// score of x_{n1} and `peer_label` the noisy label y_{n2}; they are ignored
/// otherwise.
struct SampleLoss {
  double value = 0.0;
  double grad_own = 0.0;   // d value / d score
  double grad_peer = 0.0;  // d value / d peer_score
};

SampleLoss sample_loss(const LossSpec& spec, double score, int label,
                       double peer_score = 0.0, int peer_label = 1);

struct BatchLoss {
  std::vector<double> per_sample;
  double mean = 0.0;
  /// d(first term of sample i) / d score[i].
  std::vector<double> own_grad;
  /// d(peer term of sample i) / d score[n1[i]], already scaled by -alpha.
  std::vector<double> peer_grad;
  /// d mean / d score[j]: own_grad[j] plus every peer_grad[i] with
  /// n1[i] == j, divided by N.
  std::vector<double> score_grad;
};

/// Peer (alpha-weighted) loss over a batch:
///   per_sample[i] = l(s_i, y_i) - alpha * l(s_{n1[i]}, y_{n2[i]}).
BatchLoss peer_loss_batch(const LossSpec& spec, std::span<const double> scores,
                          std::span<const int> noisy_labels, const PeerPairing& pairing);

/// Same contract for every family; `pairing` may be null for non-peer families.
BatchLoss batch_loss(const LossSpec& spec, std::span<const double> scores,
                     std::span<const int> labels, const PeerPairing* pairing);

/// Generic peer score from a sign matrix:
///   (1 - M(pred, noisy)) - (1 - M(pred_peer, noisy_peer)).
/// For a 2x2 matrix classes are +1/-1; otherwise class indices in [0,K).
double generic_peer_score(const ScoreMatrix& m, int pred, int noisy, int pred_peer,
                          int noisy_peer);

/// Unbiased surrogate:
///   ((1 - e_{-y}) l(t,y) - e_y l(t,-y)) / (1 - e_minus - e_plus).
LossEval surrogate_loss(BaseLossKind base, double score, int label, const NoiseModel& nm);

struct MultiBatchLoss {
  std::vector<double> per_sample;
  double mean = 0.0;
  /// d mean / d scores, N x K row-major.
  std::vector<double> score_grad;
};

/// Multiclass peer loss; `scores` is N x K row-major, labels in [0,K).
MultiBatchLoss peer_loss_multiclass(BaseLossKind base, std::span<const double> scores,
                                    std::size_t num_classes, std::span<const int> noisy_labels,
                                    const PeerPairing& pairing, double alpha);

}  // namespace peerloss
