#include "peerloss/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "peerloss/error.hpp"

namespace peerloss {

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void require_binary(const DiscreteInstance& inst, const char* what) {
  if (inst.k != 2) {
    raise(ErrorCode::InvalidArgument, fmt::format("{} needs a binary instance", what));
  }
}

// Class marginal of a joint laid out [x * k + y].
std::vector<double> label_marginal(const std::vector<double>& joint, std::size_t k) {
  std::vector<double> out(k, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) out[i % k] += joint[i];
  return out;
}

std::vector<double> point_marginal(const std::vector<double>& joint, std::size_t k) {
  std::vector<double> out(joint.size() / k, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) out[i / k] += joint[i];
  return out;
}

// Risk from a precomputed joint so sweeps avoid rebuilding it.
double risk_from_joint(const std::vector<double>& joint, std::size_t k, const PointLoss& loss,
                       Objective obj, const NoiseModel* nm) {
  const std::size_t m = joint.size() / k;
  double direct = 0.0;
  if (obj.kind == Objective::Kind::Surrogate) {
    const double scale = 1.0 / nm->signal();
    for (std::size_t x = 0; x < m; ++x) {
      for (std::size_t y = 0; y < 2; ++y) {
        const int label = index_label(y);
        const double corrected = ((1.0 - nm->rate_for(-label)) * loss(x, y) -
                                  nm->rate_for(label) * loss(x, 1 - y)) * scale;
        direct += joint[x * 2 + y] * corrected;
      }
    }
    return direct;
  }
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < k; ++y) direct += joint[x * k + y] * loss(x, y);
  }
  if (obj.kind == Objective::Kind::Plain) return direct;
  const std::vector<double> px = point_marginal(joint, k);
  const std::vector<double> py = label_marginal(joint, k);
  double peer = 0.0;
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t y = 0; y < k; ++y) peer += px[x] * py[y] * loss(x, y);
  }
  return direct - obj.alpha * peer;
}

double zero_one_risk(const std::vector<double>& joint, std::size_t k, const Assignment& f,
                     Objective obj) {
  return risk_from_joint(joint, k, zero_one_loss(f), obj, nullptr);
}

bool same_set(std::vector<Assignment> a, std::vector<Assignment> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

bool subset_of(const std::vector<Assignment>& a, std::vector<Assignment> b) {
  std::sort(b.begin(), b.end());
  for (const Assignment& f : a) {
    if (!std::binary_search(b.begin(), b.end(), f)) return false;
  }
  return true;
}

}  // namespace

void validate(const DiscreteInstance& inst) {
  if (inst.k < 2) raise(ErrorCode::InvalidArgument, "instance needs k >= 2");
  if (inst.m < 1) raise(ErrorCode::InvalidArgument, "instance needs m >= 1 support points");
  if (inst.noise.k() != inst.k) {
    raise(ErrorCode::DimensionMismatch, "noise transition does not match the class count");
  }
  if (inst.px_given_y.size() != inst.k) {
    raise(ErrorCode::ShapeMismatch, "need one conditional distribution per class");
  }
  for (const auto& row : inst.px_given_y) {
    if (row.size() != inst.m) raise(ErrorCode::ShapeMismatch, "conditional has the wrong support size");
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) raise(ErrorCode::OutOfRange, "conditional entry outside [0,1]");
    }
    if (std::abs(sum(row) - 1.0) > 1e-12) {
      raise(ErrorCode::OutOfRange, "conditional distribution does not sum to 1");
    }
  }
  if (inst.prior.size() != inst.k) raise(ErrorCode::ShapeMismatch, "prior has the wrong length");
  check_prior(inst.prior);
  double count = 1.0;
  for (std::size_t i = 0; i < inst.m; ++i) count *= static_cast<double>(inst.k);
  if (count > static_cast<double>(kEnumerationBudget)) {
    raise(ErrorCode::BudgetExceeded,
          fmt::format("{}^{} classifiers exceed the enumeration budget of {}", inst.k, inst.m,
                      kEnumerationBudget));
  }
}

DiscreteInstance make_binary_instance(double p, std::vector<double> px_neg,
                                      std::vector<double> px_pos, const NoiseModel& nm) {
  check_prior(p);
  DiscreteInstance inst;
  inst.k = 2;
  inst.m = px_neg.size();
  inst.px_given_y = {std::move(px_neg), std::move(px_pos)};
  inst.prior = {1.0 - p, p};
  inst.noise = to_transition(make_noise_model(nm.e_minus, nm.e_plus));
  validate(inst);
  return inst;
}

std::vector<double> joint_law(const DiscreteInstance& inst, RiskChannel ch) {
  const std::size_t k = inst.k;
  std::vector<double> joint(inst.m * k, 0.0);
  for (std::size_t x = 0; x < inst.m; ++x) {
    for (std::size_t y = 0; y < k; ++y) {
      const double w = inst.prior[y] * inst.px_given_y[y][x];
      if (ch == RiskChannel::Clean) {
        joint[x * k + y] += w;
      } else {
        for (std::size_t t = 0; t < k; ++t) joint[x * k + t] += w * inst.noise(y, t);
      }
    }
  }
  return joint;
}

PointLoss zero_one_loss(const Assignment& f) {
  return [f](std::size_t x, std::size_t y) {
    return static_cast<std::size_t>(f[x]) == y ? 0.0 : 1.0;
  };
}

PointLoss score_loss(const std::vector<double>& scores, BaseLossKind base) {
  return [scores, base](std::size_t x, std::size_t y) {
    return eval_base(base, scores[x], index_label(y)).value;
  };
}

double exact_risk(const DiscreteInstance& inst, const PointLoss& loss, Objective obj,
                  RiskChannel ch) {
  validate(inst);
  NoiseModel nm;
  if (obj.kind == Objective::Kind::Surrogate) {
    require_binary(inst, "the surrogate objective");
    nm = make_noise_model(inst.binary_noise().e_minus, inst.binary_noise().e_plus);
  }
  return risk_from_joint(joint_law(inst, ch), inst.k, loss, obj, &nm);
}

double exact_risk(const DiscreteInstance& inst, const Assignment& f, Objective obj,
                  RiskChannel ch) {
  if (f.size() != inst.m) raise(ErrorCode::ShapeMismatch, "assignment length differs from m");
  for (int c : f) {
    if (c < 0 || static_cast<std::size_t>(c) >= inst.k) {
      raise(ErrorCode::ClassOutOfRange, fmt::format("class index {} outside [0,{})", c, inst.k));
    }
  }
  return exact_risk(inst, zero_one_loss(f), obj, ch);
}

Assignment decode_assignment(std::size_t code, std::size_t k, std::size_t m) {
  Assignment f(m);
  for (std::size_t i = 0; i < m; ++i) {
    f[i] = static_cast<int>(code % k);
    code /= k;
  }
  return f;
}

std::size_t hypothesis_count(const DiscreteInstance& inst) {
  validate(inst);
  std::size_t count = 1;
  for (std::size_t i = 0; i < inst.m; ++i) count *= inst.k;
  return count;
}

MinimizerSet brute_force_minimizers(const DiscreteInstance& inst,
                                    const std::function<double(const Assignment&)>& objective,
                                    bool reverse) {
  const std::size_t total = hypothesis_count(inst);
  std::vector<double> values(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t code = reverse ? total - 1 - i : i;
    values[code] = objective(decode_assignment(code, inst.k, inst.m));
  }
  MinimizerSet out;
  out.min_value = *std::min_element(values.begin(), values.end());
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t code = reverse ? total - 1 - i : i;
    if (values[code] <= out.min_value + kTieTolerance) {
      out.argmin.push_back(decode_assignment(code, inst.k, inst.m));
    }
  }
  return out;
}

Assignment bayes_assignment(const DiscreteInstance& inst) {
  validate(inst);
  Assignment f(inst.m);
  for (std::size_t x = 0; x < inst.m; ++x) {
    std::size_t best = 0;
    for (std::size_t y = 1; y < inst.k; ++y) {
      if (inst.prior[y] * inst.px_given_y[y][x] > inst.prior[best] * inst.px_given_y[best][x]) {
        best = y;
      }
    }
    f[x] = static_cast<int>(best);
  }
  return f;
}

// --- verifiers ----------------------------------------------------------------

IdentityCheck verify_affine_invariance(const DiscreteInstance& inst, const PointLoss& loss,
                                       double tol) {
  require_binary(inst, "affine invariance");
  IdentityCheck out;
  out.lhs = exact_risk(inst, loss, Objective::peer(1.0), RiskChannel::Noisy);
  out.rhs = inst.binary_noise().signal() *
            exact_risk(inst, loss, Objective::peer(1.0), RiskChannel::Clean);
  out.residual = std::abs(out.lhs - out.rhs);
  out.pass = out.residual <= tol;
  return out;
}

namespace {

SetCheck compare_argmins(const DiscreteInstance& inst, double alpha, bool subset_only) {
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  const std::vector<double> clean = joint_law(inst, RiskChannel::Clean);
  const MinimizerSet a = brute_force_minimizers(inst, [&](const Assignment& f) {
    return zero_one_risk(noisy, inst.k, f, Objective::peer(alpha));
  });
  const MinimizerSet b = brute_force_minimizers(inst, [&](const Assignment& f) {
    return zero_one_risk(clean, inst.k, f, Objective::plain());
  });
  SetCheck out;
  out.noisy_count = a.argmin.size();
  out.clean_count = b.argmin.size();
  out.pass = subset_only ? subset_of(a.argmin, b.argmin) : same_set(a.argmin, b.argmin);
  out.residual = out.pass ? 0.0 : 1.0;
  return out;
}

}  // namespace

SetCheck verify_theorem2(const DiscreteInstance& inst) {
  require_binary(inst, "the balanced-prior optimality check");
  validate(inst);
  if (std::abs(inst.p() - 0.5) > 1e-12) {
    raise(ErrorCode::InvalidArgument, fmt::format("needs p = 0.5, got {}", inst.p()));
  }
  return compare_argmins(inst, 1.0, false);
}

SetCheck verify_theorem4(const DiscreteInstance& inst) {
  require_binary(inst, "the alpha* optimality check");
  validate(inst);
  return compare_argmins(inst, alpha_star(inst.p(), inst.binary_noise()), true);
}

BoundCheck verify_theorem3_bound(const DiscreteInstance& inst) {
  require_binary(inst, "the unequal-prior bound");
  validate(inst);
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  const std::vector<double> clean = joint_law(inst, RiskChannel::Clean);
  const MinimizerSet peer = brute_force_minimizers(inst, [&](const Assignment& f) {
    return zero_one_risk(noisy, 2, f, Objective::peer(1.0));
  });
  const MinimizerSet best = brute_force_minimizers(inst, [&](const Assignment& f) {
    return zero_one_risk(clean, 2, f, Objective::plain());
  });
  BoundCheck out;
  for (const Assignment& f : peer.argmin) {
    out.gap = std::max(out.gap, zero_one_risk(clean, 2, f, Objective::plain()) - best.min_value);
  }
  out.bound = std::abs(2.0 * inst.p() - 1.0);
  out.pass = out.gap <= out.bound + 1e-12;
  return out;
}

std::pair<double, double> class_error_rates(const DiscreteInstance& inst, const Assignment& f) {
  require_binary(inst, "class error rates");
  double r_minus = 0.0, r_plus = 0.0;
  for (std::size_t x = 0; x < inst.m; ++x) {
    if (f[x] == 1) r_minus += inst.px_given_y[0][x];
    if (f[x] == 0) r_plus += inst.px_given_y[1][x];
  }
  return {r_minus, r_plus};
}

SlopeCheck verify_lemma3(const DiscreteInstance& inst, double tol) {
  require_binary(inst, "the peer-risk slope check");
  const std::size_t total = hypothesis_count(inst);
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  const double p = inst.p();
  SlopeCheck out;
  out.expected = 2.0 * inst.binary_noise().signal() * p * (1.0 - p);
  std::vector<double> xs(total), ys(total);
  for (std::size_t code = 0; code < total; ++code) {
    const Assignment f = decode_assignment(code, 2, inst.m);
    const auto [rm, rp] = class_error_rates(inst, f);
    xs[code] = rm + rp;
    ys[code] = zero_one_risk(noisy, 2, f, Objective::peer(1.0));
    out.residual = std::max(out.residual, std::abs(ys[code] - out.expected * (xs[code] - 1.0)));
  }
  const double n = static_cast<double>(total);
  const double mx = sum(xs) / n, my = sum(ys) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  out.slope = sxx > 1e-12 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
  out.pass = out.residual < tol && (std::isnan(out.slope) || std::abs(out.slope - out.expected) < tol);
  return out;
}

ProportionalityCheck verify_proposition_a1(const DiscreteInstance& inst, double alpha,
                                           double tol) {
  require_binary(inst, "the risk-difference proportionality check");
  const std::size_t total = hypothesis_count(inst);
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  const std::vector<double> clean = joint_law(inst, RiskChannel::Clean);
  ProportionalityCheck out;
  out.expected = inst.binary_noise().signal();
  const Assignment ref = decode_assignment(0, 2, inst.m);
  const double noisy_ref = zero_one_risk(noisy, 2, ref, Objective::peer(alpha));
  const double clean_ref = zero_one_risk(clean, 2, ref, Objective::plain());
  double sab = 0.0, sbb = 0.0;
  for (std::size_t code = 1; code < total; ++code) {
    const Assignment f = decode_assignment(code, 2, inst.m);
    const double a = zero_one_risk(noisy, 2, f, Objective::peer(alpha)) - noisy_ref;
    const double b = zero_one_risk(clean, 2, f, Objective::plain()) - clean_ref;
    sab += a * b;
    sbb += b * b;
    out.residual = std::max(out.residual, std::abs(a - out.expected * b));
  }
  out.constant = sbb > 0.0 ? sab / sbb : out.expected;
  out.pass = out.residual <= tol;
  return out;
}

IdentityCheck verify_multiclass_affine(const DiscreteInstance& inst, const Assignment& f,
                                       double tol) {
  validate(inst);
  const auto rates = inst.noise.column_rates();
  if (!rates) {
    raise(ErrorCode::ConditionViolated,
          "transition off-diagonal columns are not constant (q_ij must equal q_kj)");
  }
  IdentityCheck out;
  out.lhs = exact_risk(inst, f, Objective::peer(1.0), RiskChannel::Noisy);
  out.rhs = (1.0 - sum(*rates)) * exact_risk(inst, f, Objective::peer(1.0), RiskChannel::Clean);
  out.residual = std::abs(out.lhs - out.rhs);
  out.pass = out.residual <= tol;
  return out;
}

SetCheck verify_multiclass_balanced(const DiscreteInstance& inst) {
  validate(inst);
  for (double q : inst.prior) {
    if (std::abs(q - 1.0 / static_cast<double>(inst.k)) > 1e-12) {
      raise(ErrorCode::InvalidArgument, "balanced argmin check needs a uniform prior");
    }
  }
  if (!inst.noise.column_rates()) {
    raise(ErrorCode::ConditionViolated, "transition off-diagonal columns are not constant");
  }
  return compare_argmins(inst, 1.0, false);
}

std::string to_string(TruthStatus s) {
  switch (s) {
    case TruthStatus::Pass: return "pass";
    case TruthStatus::Fail: return "fail";
    case TruthStatus::ConstantOptimal: return "constant_optimal";
  }
  return "unknown";
}

bool instance_is_categorical(const DiscreteInstance& inst, const Assignment& f) {
  require_binary(inst, "the categorical condition");
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t x = 0; x < inst.m; ++x) {
    for (std::size_t y = 0; y < 2; ++y) joint[f[x]][y] += noisy[x * 2 + y];
  }
  for (std::size_t a = 0; a < 2; ++a) {
    const double pa = joint[a][0] + joint[a][1];
    if (pa <= 0.0) return false;
    const double p_other = joint[0][1 - a] + joint[1][1 - a];
    if (!(joint[a][1 - a] / pa < p_other)) return false;
  }
  return true;
}

TruthCheck verify_ca_truthfulness(const DiscreteInstance& inst, bool full_enumeration) {
  require_binary(inst, "correlated-agreement truthfulness");
  validate(inst);
  TruthCheck out;
  const Assignment bayes = bayes_assignment(inst);
  if (std::all_of(bayes.begin(), bayes.end(), [&](int c) { return c == bayes[0]; })) {
    out.status = TruthStatus::ConstantOptimal;
    return out;
  }
  const std::vector<double> noisy = joint_law(inst, RiskChannel::Noisy);
  std::vector<double> joint(4, 0.0);
  for (std::size_t x = 0; x < inst.m; ++x) {
    for (std::size_t y = 0; y < 2; ++y) joint[bayes[x] * 2 + y] += noisy[x * 2 + y];
  }
  const ScoreMatrix mtx = sign_matrix(delta_from_joint(2, joint));
  out.sign_is_identity = mtx.entries == ScoreMatrix::identity(2).entries;
  const std::vector<double> px = point_marginal(noisy, 2);
  const std::vector<double> py = label_marginal(noisy, 2);
  const auto neg_score = [&](const Assignment& g) {
    double s = 0.0;
    for (std::size_t x = 0; x < inst.m; ++x) {
      for (std::size_t y = 0; y < 2; ++y) {
        const double agree = mtx(static_cast<std::size_t>(g[x]), y);
        s += (px[x] * py[y] - noisy[x * 2 + y]) * agree;
      }
    }
    return s;
  };
  out.bayes_score = neg_score(bayes);
  out.best_other = std::numeric_limits<double>::infinity();
  const auto consider = [&](const Assignment& g) {
    if (g == bayes) return;
    out.best_other = std::min(out.best_other, neg_score(g));
    ++out.compared;
  };
  Assignment flipped = bayes, plus(inst.m, 1), minus(inst.m, 0);
  for (int& c : flipped) c = 1 - c;
  consider(flipped);
  consider(plus);
  consider(minus);
  if (full_enumeration) {
    const std::size_t total = hypothesis_count(inst);
    for (std::size_t code = 0; code < total; ++code) consider(decode_assignment(code, 2, inst.m));
  }
  out.status = out.bayes_score <= out.best_other + kTieTolerance ? TruthStatus::Pass
                                                                  : TruthStatus::Fail;
  return out;
}

ConvexityCheck verify_convexity_condition(double alpha, double p, const NoiseModel& nm) {
  if (!calibration_condition_holds(alpha, p, nm)) {
    raise(ErrorCode::ConditionNotMet,
          fmt::format("alpha={} p={} e=({},{}) does not satisfy the calibration condition",
                      alpha, p, nm.e_minus, nm.e_plus));
  }
  const double pt = noisy_prior(p, nm);
  const auto logistic = [](double t, int y) { return eval_base(BaseLossKind::Logistic, t, y).value; };
  // Conditional risk given clean label y at score t.
  const auto r_y = [&](double t, int y) {
    const double e = nm.rate_for(y);
    const double py = y > 0 ? pt : 1.0 - pt;
    return (1.0 - e - alpha * py) * logistic(t, y) + (e - alpha * (1.0 - py)) * logistic(t, -y);
  };
  std::vector<std::function<double(double)>> risks;
  risks.emplace_back([&](double t) {
    return (1.0 - alpha) * (pt * logistic(t, 1) + (1.0 - pt) * logistic(t, -1));
  });
  for (int i = 0; i <= 10; ++i) {
    const double eta = i / 10.0;
    risks.emplace_back([&r_y, eta](double t) { return eta * r_y(t, 1) + (1.0 - eta) * r_y(t, -1); });
  }
  constexpr double h = 0.05;
  ConvexityCheck out;
  out.min_second_difference = std::numeric_limits<double>::infinity();
  for (const auto& r : risks) {
    for (int i = 1; i < 200; ++i) {
      const double t = -5.0 + h * i;
      out.min_second_difference = std::min(out.min_second_difference, r(t + h) - 2.0 * r(t) + r(t - h));
    }
  }
  out.pass = out.min_second_difference >= -1e-9;
  return out;
}

// --- random instances ----------------------------------------------------------

namespace {

std::vector<double> dirichlet_one(Rng& rng, std::size_t m) {
  std::vector<double> v(m);
  for (double& x : v) x = -std::log(1.0 - rng.uniform());
  const double total = sum(v);
  for (double& x : v) x /= total;
  // Push the rounding residue into the largest entry so the sum is tight.
  const auto it = std::max_element(v.begin(), v.end());
  *it += 1.0 - sum(v);
  return v;
}

}  // namespace

DiscreteInstance random_binary_instance(Rng& rng, std::size_t m, double p, const NoiseModel& nm) {
  std::vector<double> neg = dirichlet_one(rng, m);
  std::vector<double> pos = dirichlet_one(rng, m);
  return make_binary_instance(p, std::move(neg), std::move(pos), nm);
}

DiscreteInstance random_multiclass_instance(Rng& rng, std::size_t k, std::size_t m,
                                            std::vector<double> prior,
                                            const TransitionMatrix& q) {
  DiscreteInstance inst;
  inst.k = k;
  inst.m = m;
  for (std::size_t y = 0; y < k; ++y) inst.px_given_y.push_back(dirichlet_one(rng, m));
  inst.prior = std::move(prior);
  inst.noise = q;
  validate(inst);
  return inst;
}

std::string describe(const DiscreteInstance& inst) {
  std::string out = fmt::format("k={} m={}\n  prior:", inst.k, inst.m);
  for (double v : inst.prior) out += fmt::format(" {:.17g}", v);
  for (std::size_t y = 0; y < inst.k; ++y) {
    out += fmt::format("\n  P(x|class {}):", y);
    for (double v : inst.px_given_y[y]) out += fmt::format(" {:.17g}", v);
  }
  out += "\n  transition:";
  for (double v : inst.noise.entries()) out += fmt::format(" {:.17g}", v);
  return out;
}

}  // namespace peerloss
