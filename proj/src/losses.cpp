#include "peerloss/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "peerloss/error.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

namespace {

// ln(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_binary(int label) {
  if (label != 1 && label != -1) {
    raise(ErrorCode::LabelOutOfRange, fmt::format("binary label must be +1 or -1, got {}", label));
  }
}

}  // namespace

std::string to_string(BaseLossKind kind) {
  switch (kind) {
    case BaseLossKind::ZeroOne: return "zero_one";
    case BaseLossKind::Logistic: return "logistic";
    case BaseLossKind::SigmoidSymmetric: return "sigmoid_symmetric";
    case BaseLossKind::CrossEntropyMulticlass: return "cross_entropy_multiclass";
  }
  return "unknown";
}

BaseLossKind parse_base_loss(const std::string& name) {
  if (name == "zero_one") return BaseLossKind::ZeroOne;
  if (name == "logistic") return BaseLossKind::Logistic;
  if (name == "sigmoid_symmetric") return BaseLossKind::SigmoidSymmetric;
  if (name == "cross_entropy_multiclass") return BaseLossKind::CrossEntropyMulticlass;
  raise(ErrorCode::InvalidArgument, fmt::format("unknown base loss '{}'", name));
}

LossEval eval_base(BaseLossKind kind, double score, int label) {
  check_binary(label);
  const double y = label;
  switch (kind) {
    case BaseLossKind::ZeroOne:
      return {sign_label(score) != label ? 1.0 : 0.0, 0.0, false};
    case BaseLossKind::Logistic:
      return {softplus(-score * y), -y * sigmoid(-score * y), true};
    case BaseLossKind::SigmoidSymmetric: {
      const double s = sigmoid(-score * y);
      return {s, -y * s * (1.0 - s), true};
    }
    case BaseLossKind::CrossEntropyMulticlass:
      break;
  }
  raise(ErrorCode::InvalidArgument, "cross_entropy_multiclass needs a score vector");
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

MultiLossEval eval_base(BaseLossKind kind, std::span<const double> scores, int label) {
  const std::size_t k = scores.size();
  if (k < 2) raise(ErrorCode::ShapeMismatch, "multiclass scores need K >= 2 entries");
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    raise(ErrorCode::LabelOutOfRange, fmt::format("class {} outside [0,{})", label, k));
  }
  MultiLossEval out;
  out.grad.assign(k, 0.0);
  if (kind == BaseLossKind::ZeroOne) {
    out.value = argmax(scores) != static_cast<std::size_t>(label) ? 1.0 : 0.0;
    out.differentiable = false;
    return out;
  }
  if (kind != BaseLossKind::CrossEntropyMulticlass) {
    raise(ErrorCode::InvalidArgument,
          fmt::format("{} is a binary loss; use the scalar overload", to_string(kind)));
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double s : scores) total += std::exp(s - top);
  const double log_norm = top + std::log(total);
  out.value = log_norm - scores[label];
  for (std::size_t j = 0; j < k; ++j) out.grad[j] = std::exp(scores[j] - log_norm);
  out.grad[label] -= 1.0;
  return out;
}

PeerPairing draw_pairing(std::size_t n, std::uint64_t seed) {
  if (n < 3) {
    raise(ErrorCode::TooFewSamples, fmt::format("peer pairing needs n >= 3, got {}", n));
  }
  Rng rng(seed);
  PeerPairing out{std::vector<std::size_t>(n), std::vector<std::size_t>(n), seed};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = rng.below(n);
    while (a == i) a = rng.below(n);
    std::size_t b = rng.below(n);
    while (b == i || b == a) b = rng.below(n);
    out.n1[i] = a;
    out.n2[i] = b;
  }
  return out;
}

double LossSpec::peer_alpha() const {
  if (const auto* peer = std::get_if<PeerFamily>(&family)) return peer->alpha;
  return 0.0;
}

std::string LossSpec::family_name() const {
  struct Visitor {
    std::string operator()(const PlainFamily&) const { return "plain"; }
    std::string operator()(const PeerFamily&) const { return "peer"; }
    std::string operator()(const SurrogateFamily&) const { return "surrogate"; }
    std::string operator()(const SymmetricFamily&) const { return "symmetric"; }
  };
  return std::visit(Visitor{}, family);
}

LossSpec LossSpec::plain(BaseLossKind base) { return {base, PlainFamily{}, std::nullopt}; }
LossSpec LossSpec::peer(double alpha, BaseLossKind base) {
  return {base, PeerFamily{alpha}, std::nullopt};
}
LossSpec LossSpec::surrogate(const NoiseModel& nm, BaseLossKind base) {
  return {base, SurrogateFamily{nm}, std::nullopt};
}
LossSpec LossSpec::symmetric() {
  return {BaseLossKind::SigmoidSymmetric, SymmetricFamily{}, std::nullopt};
}

void validate(const LossSpec& spec) {
  if (spec.cap && !(*spec.cap > 0.0)) raise(ErrorCode::InvalidArgument, "loss cap must be > 0");
  if (const auto* peer = std::get_if<PeerFamily>(&spec.family)) {
    if (!std::isfinite(peer->alpha)) raise(ErrorCode::InvalidArgument, "peer alpha must be finite");
  }
  if (const auto* sur = std::get_if<SurrogateFamily>(&spec.family)) {
    make_noise_model(sur->nm.e_minus, sur->nm.e_plus);
    if (spec.base == BaseLossKind::CrossEntropyMulticlass) {
      raise(ErrorCode::InvalidArgument, "surrogate correction is binary only");
    }
  }
  if (std::holds_alternative<SymmetricFamily>(spec.family) &&
      spec.base != BaseLossKind::SigmoidSymmetric) {
    raise(ErrorCode::InvalidArgument, "symmetric family uses the sigmoid_symmetric base");
  }
}

SampleLoss sample_loss(const LossSpec& spec, double score, int label, double peer_score,
                       int peer_label) {
  SampleLoss out;
  if (const auto* peer = std::get_if<PeerFamily>(&spec.family)) {
    const LossEval own = eval_base(spec.base, score, label);
    const LossEval other = eval_base(spec.base, peer_score, peer_label);
    out.value = own.value - peer->alpha * other.value;
    out.grad_own = own.grad;
    out.grad_peer = -peer->alpha * other.grad;
  } else if (const auto* sur = std::get_if<SurrogateFamily>(&spec.family)) {
    const LossEval v = surrogate_loss(spec.base, score, label, sur->nm);
    out.value = v.value;
    out.grad_own = v.grad;
  } else {
    const LossEval v = eval_base(spec.base, score, label);
    out.value = v.value;
    out.grad_own = v.grad;
  }
  if (spec.cap && std::abs(out.value) > *spec.cap) {
    out.value = std::clamp(out.value, -*spec.cap, *spec.cap);
    out.grad_own = 0.0;
    out.grad_peer = 0.0;
  }
  return out;
}

BatchLoss batch_loss(const LossSpec& spec, std::span<const double> scores,
                     std::span<const int> labels, const PeerPairing* pairing) {
  validate(spec);
  const std::size_t n = scores.size();
  if (labels.size() != n) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("{} scores but {} labels", n, labels.size()));
  }
  const bool peer = spec.is_peer();
  if (peer && (pairing == nullptr || pairing->n1.size() != n || pairing->n2.size() != n)) {
    raise(ErrorCode::ShapeMismatch, "peer loss needs a pairing of the batch length");
  }
  BatchLoss out;
  out.per_sample.resize(n);
  out.own_grad.assign(n, 0.0);
  out.peer_grad.assign(n, 0.0);
  out.score_grad.assign(n, 0.0);
  if (n == 0) return out;

  for (std::size_t i = 0; i < n; ++i) {
    SampleLoss s;
    if (peer) {
      s = sample_loss(spec, scores[i], labels[i], scores[pairing->n1[i]], labels[pairing->n2[i]]);
    } else {
      s = sample_loss(spec, scores[i], labels[i]);
    }
    out.per_sample[i] = s.value;
    out.own_grad[i] = s.grad_own;
    out.peer_grad[i] = s.grad_peer;
  }
  // Fixed-order accumulation keeps the reduction deterministic.
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += out.per_sample[i];
    out.score_grad[i] += out.own_grad[i] * inv_n;
    if (peer) out.score_grad[pairing->n1[i]] += out.peer_grad[i] * inv_n;
  }
  out.mean = total * inv_n;
  return out;
}

BatchLoss peer_loss_batch(const LossSpec& spec, std::span<const double> scores,
                          std::span<const int> noisy_labels, const PeerPairing& pairing) {
  if (!spec.is_peer()) raise(ErrorCode::InvalidArgument, "peer_loss_batch needs a peer family");
  return batch_loss(spec, scores, noisy_labels, &pairing);
}

double generic_peer_score(const ScoreMatrix& m, int pred, int noisy, int pred_peer,
                          int noisy_peer) {
  const auto index = [&m](int c) -> std::size_t {
    if (m.k == 2) {
      if (c == -1) return 0;
      if (c == 1) return 1;
    } else if (c >= 0 && static_cast<std::size_t>(c) < m.k) {
      return static_cast<std::size_t>(c);
    }
    raise(ErrorCode::ClassOutOfRange, fmt::format("class {} invalid for a {}x{} matrix", c, m.k, m.k));
  };
  const double first = 1.0 - m(index(pred), index(noisy));
  const double second = 1.0 - m(index(pred_peer), index(noisy_peer));
  return first - second;
}

LossEval surrogate_loss(BaseLossKind base, double score, int label, const NoiseModel& nm) {
  make_noise_model(nm.e_minus, nm.e_plus);
  check_binary(label);
  const LossEval same = eval_base(base, score, label);
  const LossEval flipped = eval_base(base, score, -label);
  const double keep = 1.0 - nm.rate_for(-label);
  const double flip = nm.rate_for(label);
  const double scale = 1.0 / nm.signal();
  return {(keep * same.value - flip * flipped.value) * scale,
          (keep * same.grad - flip * flipped.grad) * scale, same.differentiable};
}

MultiBatchLoss peer_loss_multiclass(BaseLossKind base, std::span<const double> scores,
                                    std::size_t num_classes, std::span<const int> noisy_labels,
                                    const PeerPairing& pairing, double alpha) {
  if (num_classes < 2) raise(ErrorCode::ShapeMismatch, "multiclass peer loss needs K >= 2");
  if (base != BaseLossKind::CrossEntropyMulticlass && base != BaseLossKind::ZeroOne) {
    raise(ErrorCode::InvalidArgument, "multiclass peer loss uses cross entropy or 0-1");
  }
  if (!std::isfinite(alpha)) raise(ErrorCode::InvalidArgument, "peer alpha must be finite");
  const std::size_t n = noisy_labels.size();
  if (scores.size() != n * num_classes || pairing.n1.size() != n || pairing.n2.size() != n) {
    raise(ErrorCode::ShapeMismatch, "scores, labels and pairing lengths disagree");
  }
  MultiBatchLoss out;
  out.per_sample.resize(n);
  out.score_grad.assign(n * num_classes, 0.0);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto row = [&](std::size_t i) { return scores.subspan(i * num_classes, num_classes); };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t peer = pairing.n1[i];
    const MultiLossEval own = eval_base(base, row(i), noisy_labels[i]);
    const MultiLossEval other = eval_base(base, row(peer), noisy_labels[pairing.n2[i]]);
    out.per_sample[i] = own.value - alpha * other.value;
    total += out.per_sample[i];
    for (std::size_t c = 0; c < num_classes; ++c) {
      out.score_grad[i * num_classes + c] += own.grad[c] * inv_n;
      out.score_grad[peer * num_classes + c] -= alpha * other.grad[c] * inv_n;
    }
  }
  out.mean = total * inv_n;
  return out;
}

}  // namespace peerloss
