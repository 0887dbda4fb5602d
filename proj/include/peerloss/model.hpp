#pragma once

// Linear and two-layer ReLU classifiers over a flat parameter vector, with
// analytic backpropagation and SGD / Adam optimizers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace peerloss {

enum class ArchKind { Linear, Mlp };

/// `outputs` is 1 for a binary score head, K for multiclass.
struct Arch {
  ArchKind kind = ArchKind::Linear;
  std::size_t input_dim = 1;
  std::size_t hidden = 0;
  std::size_t outputs = 1;

  static Arch linear(std::size_t d, std::size_t outputs = 1);
  static Arch mlp(std::size_t d, std::size_t hidden, std::size_t outputs = 1);

  std::size_t param_count() const;
  friend bool operator==(const Arch&, const Arch&) = default;
};

/// Throws BadArch on zero dimensions.
void validate(const Arch& arch);

// Parameter layout:
//   linear: W (outputs x d, row-major), b (outputs)
//   mlp:    W1 (hidden x d), b1 (hidden), W2 (outputs x hidden), b2 (outputs)
struct Classifier {
  Arch arch;
  std::vector<double> params;

  std::size_t num_outputs() const noexcept { return arch.outputs; }
};

/// Weights uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
Classifier init_classifier(const Arch& arch, std::uint64_t seed);

/// All scores for one input.
std::vector<double> forward_scores(const Classifier& c, std::span<const double> x);
/// Score of a single-output classifier.
double forward(const Classifier& c, std::span<const double> x);

/// Gradient of upstream . scores(x) with respect to every parameter.
std::vector<double> backward(const Classifier& c, std::span<const double> x,
                             std::span<const double> upstream);
std::vector<double> backward(const Classifier& c, std::span<const double> x, double upstream);

/// Adds backward(c, x, upstream) into `grad` (length param_count).
void accumulate_gradient(const Classifier& c, std::span<const double> x,
                         std::span<const double> upstream, std::span<double> grad);

/// Binary: +1 if score >= 0 else -1. Multiclass: argmax, lowest index on ties.
int predict(const Classifier& c, std::span<const double> x);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerConfig sgd(double lr, double momentum = 0.0);
  static OptimizerConfig adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8);
};

struct OptimizerState {
  OptimizerConfig config;
  std::size_t step_count = 0;
  std::vector<double> m;  // momentum / first moment
  std::vector<double> v;  // second moment (Adam)
};

OptimizerState init_optimizer(const OptimizerConfig& config, std::size_t param_count);

struct StepResult {
  OptimizerState state;
  Classifier classifier;
};

/// Pure update. Throws NonFiniteGradient on NaN/Inf, ShapeMismatch on length.
StepResult step(const OptimizerState& opt, const Classifier& c, std::span<const double> grads);
/// In-place variant used by the training loop.
void step_inplace(OptimizerState& opt, Classifier& c, std::span<const double> grads);

/// Text checkpoint; parameters are stored as hex floats so round-trips are exact.
std::string to_checkpoint(const Classifier& c);
Classifier from_checkpoint(const std::string& text);
void save_checkpoint(const std::string& path, const Classifier& c);
Classifier load_checkpoint(const std::string& path);

}  // namespace peerloss
