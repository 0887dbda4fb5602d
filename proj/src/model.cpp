#include "peerloss/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "peerloss/error.hpp"
#include "peerloss/losses.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

Arch Arch::linear(std::size_t d, std::size_t outputs) {
  return Arch{ArchKind::Linear, d, 0, outputs};
}

Arch Arch::mlp(std::size_t d, std::size_t hidden, std::size_t outputs) {
  return Arch{ArchKind::Mlp, d, hidden, outputs};
}

std::size_t Arch::param_count() const {
  if (kind == ArchKind::Linear) return outputs * input_dim + outputs;
  return hidden * input_dim + hidden + outputs * hidden + outputs;
}

void validate(const Arch& arch) {
  if (arch.input_dim < 1) raise(ErrorCode::BadArch, "input dimension must be >= 1");
  if (arch.outputs < 1) raise(ErrorCode::BadArch, "output count must be >= 1");
  if (arch.kind == ArchKind::Mlp && arch.hidden < 1) {
    raise(ErrorCode::BadArch, "hidden width must be >= 1");
  }
}

Classifier init_classifier(const Arch& arch, std::uint64_t seed) {
  validate(arch);
  Classifier c{arch, std::vector<double>(arch.param_count(), 0.0)};
  Rng rng(seed);
  const auto fill = [&rng](double* w, std::size_t count, std::size_t fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) w[i] = rng.uniform(-scale, scale);
  };
  const std::size_t d = arch.input_dim;
  double* p = c.params.data();
  if (arch.kind == ArchKind::Linear) {
    fill(p, arch.outputs * d, d);
  } else {
    const std::size_t h = arch.hidden;
    fill(p, h * d, d);
    fill(p + h * d + h, arch.outputs * h, h);
  }
  return c;
}

namespace {

void check_input(const Classifier& c, std::span<const double> x) {
  if (x.size() != c.arch.input_dim) {
    raise(ErrorCode::DimensionMismatch,
          fmt::format("input has {} features, classifier expects {}", x.size(),
                      c.arch.input_dim));
  }
  if (c.params.size() != c.arch.param_count()) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("classifier holds {} params, arch needs {}", c.params.size(),
                      c.arch.param_count()));
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Hidden pre-activations of an MLP.
void hidden_layer(const Classifier& c, std::span<const double> x, std::vector<double>& z) {
  const std::size_t d = c.arch.input_dim;
  const std::size_t h = c.arch.hidden;
  const double* w1 = c.params.data();
  const double* b1 = w1 + h * d;
  z.resize(h);
  for (std::size_t j = 0; j < h; ++j) z[j] = dot(w1 + j * d, x.data(), d) + b1[j];
}

void scores_into(const Classifier& c, std::span<const double> x, double* out) {
  const std::size_t d = c.arch.input_dim;
  const std::size_t k = c.arch.outputs;
  const double* p = c.params.data();
  if (c.arch.kind == ArchKind::Linear) {
    for (std::size_t o = 0; o < k; ++o) out[o] = dot(p + o * d, x.data(), d) + p[k * d + o];
    return;
  }
  thread_local std::vector<double> z;
  hidden_layer(c, x, z);
  const std::size_t h = c.arch.hidden;
  const double* w2 = p + h * d + h;
  const double* b2 = w2 + k * h;
  for (std::size_t o = 0; o < k; ++o) {
    double s = b2[o];
    for (std::size_t j = 0; j < h; ++j) s += w2[o * h + j] * (z[j] > 0.0 ? z[j] : 0.0);
    out[o] = s;
  }
}

}  // namespace

std::vector<double> forward_scores(const Classifier& c, std::span<const double> x) {
  check_input(c, x);
  std::vector<double> out(c.arch.outputs);
  scores_into(c, x, out.data());
  return out;
}

double forward(const Classifier& c, std::span<const double> x) {
  check_input(c, x);
  if (c.arch.outputs != 1) {
    raise(ErrorCode::ShapeMismatch, "forward() needs a single-output classifier");
  }
  double out = 0.0;
  scores_into(c, x, &out);
  return out;
}

void accumulate_gradient(const Classifier& c, std::span<const double> x,
                         std::span<const double> upstream, std::span<double> grad) {
  check_input(c, x);
  const std::size_t d = c.arch.input_dim;
  const std::size_t k = c.arch.outputs;
  if (upstream.size() != k || grad.size() != c.params.size()) {
    raise(ErrorCode::ShapeMismatch, "upstream or gradient buffer has the wrong length");
  }
  double* g = grad.data();
  if (c.arch.kind == ArchKind::Linear) {
    for (std::size_t o = 0; o < k; ++o) {
      const double u = upstream[o];
      if (u == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) g[o * d + i] += u * x[i];
      g[k * d + o] += u;
    }
    return;
  }
  const std::size_t h = c.arch.hidden;
  thread_local std::vector<double> z;
  thread_local std::vector<double> dz;
  hidden_layer(c, x, z);
  const double* w2 = c.params.data() + h * d + h;
  double* gw1 = g;
  double* gb1 = g + h * d;
  double* gw2 = gb1 + h;
  double* gb2 = gw2 + k * h;
  dz.assign(h, 0.0);
  for (std::size_t o = 0; o < k; ++o) {
    const double u = upstream[o];
    if (u == 0.0) continue;
    gb2[o] += u;
    for (std::size_t j = 0; j < h; ++j) {
      if (z[j] > 0.0) {
        gw2[o * h + j] += u * z[j];
        dz[j] += u * w2[o * h + j];
      }
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    if (dz[j] == 0.0) continue;
    gb1[j] += dz[j];
    for (std::size_t i = 0; i < d; ++i) gw1[j * d + i] += dz[j] * x[i];
  }
}

std::vector<double> backward(const Classifier& c, std::span<const double> x,
                             std::span<const double> upstream) {
  std::vector<double> grad(c.params.size(), 0.0);
  accumulate_gradient(c, x, upstream, grad);
  return grad;
}

std::vector<double> backward(const Classifier& c, std::span<const double> x, double upstream) {
  const double u[1] = {upstream};
  return backward(c, x, std::span<const double>(u, 1));
}

int predict(const Classifier& c, std::span<const double> x) {
  check_input(c, x);
  if (c.arch.outputs == 1) {
    double s = 0.0;
    scores_into(c, x, &s);
    return sign_label(s);
  }
  thread_local std::vector<double> s;
  s.resize(c.arch.outputs);
  scores_into(c, x, s.data());
  return static_cast<int>(argmax(s));
}

OptimizerConfig OptimizerConfig::sgd(double lr, double momentum) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Sgd;
  cfg.lr = lr;
  cfg.momentum = momentum;
  return cfg;
}

OptimizerConfig OptimizerConfig::adam(double lr, double beta1, double beta2, double eps) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Adam;
  cfg.lr = lr;
  cfg.beta1 = beta1;
  cfg.beta2 = beta2;
  cfg.eps = eps;
  return cfg;
}

OptimizerState init_optimizer(const OptimizerConfig& config, std::size_t param_count) {
  if (!(config.lr > 0.0) || !std::isfinite(config.lr)) {
    raise(ErrorCode::InvalidArgument, "learning rate must be positive");
  }
  OptimizerState st{config, 0, std::vector<double>(param_count, 0.0), {}};
  if (config.kind == OptimizerKind::Adam) st.v.assign(param_count, 0.0);
  return st;
}

void step_inplace(OptimizerState& opt, Classifier& c, std::span<const double> grads) {
  const std::size_t n = c.params.size();
  if (grads.size() != n || opt.m.size() != n) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("gradient length {} does not match {} params", grads.size(), n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      raise(ErrorCode::NonFiniteGradient, fmt::format("gradient entry {} is {}", i, grads[i]));
    }
  }
  const OptimizerConfig& cfg = opt.config;
  ++opt.step_count;
  if (cfg.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < n; ++i) {
      opt.m[i] = cfg.momentum * opt.m[i] + grads[i];
      c.params[i] -= cfg.lr * opt.m[i];
    }
    return;
  }
  const double t = static_cast<double>(opt.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    opt.m[i] = cfg.beta1 * opt.m[i] + (1.0 - cfg.beta1) * grads[i];
    opt.v[i] = cfg.beta2 * opt.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = opt.m[i] / c1;
    const double vhat = opt.v[i] / c2;
    c.params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

StepResult step(const OptimizerState& opt, const Classifier& c, std::span<const double> grads) {
  StepResult out{opt, c};
  step_inplace(out.state, out.classifier, grads);
  return out;
}

std::string to_checkpoint(const Classifier& c) {
  std::string out = "peerloss-checkpoint v1\n";
  out += fmt::format("arch {}\ninput_dim {}\nhidden {}\noutputs {}\nparams {}\n",
                     c.arch.kind == ArchKind::Linear ? "linear" : "mlp", c.arch.input_dim,
                     c.arch.hidden, c.arch.outputs, c.params.size());
  char buf[64];
  for (double v : c.params) {
    std::snprintf(buf, sizeof buf, "%a\n", v);
    out += buf;
  }
  return out;
}

Classifier from_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  const auto fail = [](const std::string& what) -> void {
    raise(ErrorCode::ParseError, "checkpoint: " + what);
  };
  if (!std::getline(in, line) || line != "peerloss-checkpoint v1") fail("bad header");
  const auto field = [&](const std::string& key) {
    std::string k, v;
    if (!(in >> k >> v) || k != key) fail("expected field '" + key + "'");
    return v;
  };
  Arch arch;
  const std::string kind = field("arch");
  if (kind == "linear") {
    arch.kind = ArchKind::Linear;
  } else if (kind == "mlp") {
    arch.kind = ArchKind::Mlp;
  } else {
    fail("unknown arch '" + kind + "'");
  }
  const auto count = [&](const std::string& key) {
    const std::string v = field(key);
    char* end = nullptr;
    const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail("bad count for " + key);
    return static_cast<std::size_t>(n);
  };
  arch.input_dim = count("input_dim");
  arch.hidden = count("hidden");
  arch.outputs = count("outputs");
  const std::size_t n = count("params");
  validate(arch);
  if (n != arch.param_count()) fail("parameter count does not match arch");
  Classifier c{arch, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    std::string tok;
    if (!(in >> tok)) fail(fmt::format("missing parameter {}", i));
    char* end = nullptr;
    c.params[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail(fmt::format("bad parameter {}", i));
  }
  return c;
}

void save_checkpoint(const std::string& path, const Classifier& c) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::Io, "cannot write " + path);
  out << to_checkpoint(c);
  if (!out) raise(ErrorCode::Io, "write failed for " + path);
}

Classifier load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_checkpoint(buf.str());
}

}  // namespace peerloss
