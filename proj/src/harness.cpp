#include "peerloss/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include "peerloss/error.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

namespace {

// Stream tags for derive_seed.
enum Stream : std::uint64_t {
  kData = 1,
  kTestData,
  kSplit,
  kFlip,
  kEqualize,
  kInit,
  kShuffle,
  kPairing,
};

}  // namespace

std::string DatasetSpec::name() const {
  switch (kind) {
    case DatasetKind::Twonorm: return "twonorm";
    case DatasetKind::Circles: return "circles";
    case DatasetKind::Blobs: return "blobs";
    case DatasetKind::Csv: return std::filesystem::path(path).stem().string();
  }
  return "dataset";
}

bool DatasetSpec::separate_test() const {
  switch (kind) {
    case DatasetKind::Twonorm:
    case DatasetKind::Blobs: return test_per_class > 0;
    case DatasetKind::Circles: return test_n > 0;
    case DatasetKind::Csv: return false;
  }
  return false;
}

NoiseSpec NoiseSpec::rates(double e_minus, double e_plus) {
  NoiseSpec s;
  s.binary = NoiseModel{e_minus, e_plus};
  return s;
}

NoiseSpec NoiseSpec::uniform_k(std::size_t k, double epsilon) {
  NoiseSpec s;
  s.k = k;
  s.epsilon = epsilon;
  s.uniform = true;
  if (k == 2) s.binary = NoiseModel{epsilon, epsilon};
  return s;
}

std::pair<double, double> NoiseSpec::columns() const {
  if (uniform) return {epsilon, epsilon};
  return {binary.e_minus, binary.e_plus};
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 10.0);
  return grid;
}

// --- data preparation -------------------------------------------------------

namespace {

LabeledDataset generate(const DatasetSpec& spec, bool test, std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetKind::Twonorm:
      return gen_twonorm(test ? spec.test_per_class : spec.n_per_class, spec.d, seed);
    case DatasetKind::Circles:
      return gen_circles(test ? spec.test_n : spec.n, spec.radius_inner, spec.radius_outer,
                         spec.jitter, seed);
    case DatasetKind::Blobs:
      return gen_blobs(test ? spec.test_per_class : spec.n_per_class, spec.num_classes, spec.d,
                       spec.separation, seed);
    case DatasetKind::Csv:
      break;
  }
  return load_csv(spec.path, spec.csv);
}

void tag_all(LabeledDataset& ds, SplitTag tag) { ds.split_tags = std::vector<SplitTag>(ds.n, tag); }

}  // namespace

LabeledDataset prepare_dataset(const ExperimentConfig& config, const NoiseSpec& noise,
                               std::uint64_t seed) {
  const DatasetSpec& spec = config.dataset;
  LabeledDataset ds = generate(spec, false, derive_seed(seed, kData));
  if (spec.separate_test()) {
    if (config.val_fraction > 0.0) {
      Rng rng(derive_seed(seed, kSplit));
      const std::vector<std::size_t> order = permutation(ds.n, rng);
      const auto n_val = static_cast<std::size_t>(
          std::floor(config.val_fraction * static_cast<double>(ds.n) + 0.5));
      tag_all(ds, SplitTag::Train);
      for (std::size_t pos = 0; pos < n_val && pos < ds.n; ++pos) {
        (*ds.split_tags)[order[pos]] = SplitTag::Val;
      }
    } else {
      tag_all(ds, SplitTag::Train);
    }
    LabeledDataset test = generate(spec, true, derive_seed(seed, kTestData));
    tag_all(test, SplitTag::Test);
    ds = concat(ds, test);
  } else if (!ds.split_tags) {
    ds = split(ds, config.split, derive_seed(seed, kSplit));
  }

  if (noise.uniform) {
    ds = flip_labels(ds, uniform_transition(noise.k, noise.epsilon), derive_seed(seed, kFlip));
  } else {
    ds = flip_labels(ds, noise.binary, derive_seed(seed, kFlip));
  }

  if (config.equalize) {
    LabeledDataset train_rows = subset(ds, SplitTag::Train);
    train_rows = equalize_prior(train_rows, config.equalize_by, derive_seed(seed, kEqualize));
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < ds.n; ++i) {
      if ((*ds.split_tags)[i] != SplitTag::Train) rest.push_back(i);
    }
    ds = concat(train_rows, select_rows(ds, rest));
  }
  return ds;
}

// --- evaluation -------------------------------------------------------------

double evaluate(const Classifier& c, const LabeledDataset& ds, SplitTag tag) {
  if (!ds.clean) {
    raise(ErrorCode::NoisyTestRefused, "evaluation needs clean labels; none are present");
  }
  const std::vector<std::size_t> rows = ds.rows_with(tag);
  if (rows.empty()) raise(ErrorCode::InvalidArgument, "no rows carry the " + to_string(tag) + " tag");
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += predict(c, ds.row(r)) == (*ds.clean)[r];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

double noisy_accuracy(const Classifier& c, const LabeledDataset& ds, SplitTag tag) {
  if (tag == SplitTag::Test) {
    raise(ErrorCode::NoisyTestRefused, "test accuracy is measured against clean labels only");
  }
  const std::vector<int>& noisy = ds.labels(LabelChannel::Noisy);
  const std::vector<std::size_t> rows = ds.rows_with(tag);
  if (rows.empty()) raise(ErrorCode::InvalidArgument, "no rows carry the " + to_string(tag) + " tag");
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += predict(c, ds.row(r)) == noisy[r];
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

// --- training ---------------------------------------------------------------

namespace {

// Adds one minibatch's mean-loss gradient into `grad`; returns the summed loss.
double binary_batch(const Classifier& c, const LossSpec& spec, const LabeledDataset& ds,
                    const std::vector<int>& noisy, const std::vector<std::size_t>& rows,
                    const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                    const PeerPairing* pairing, std::vector<double>& grad) {
  const double inv_b = 1.0 / static_cast<double>(end - begin);
  double total = 0.0;
  for (std::size_t pos = begin; pos < end; ++pos) {
    const std::size_t idx = order[pos];
    const std::size_t r = rows[idx];
    const double s = forward(c, ds.row(r));
    SampleLoss sl;
    std::size_t r1 = 0;
    if (pairing) {
      r1 = rows[pairing->n1[idx]];
      const int y2 = noisy[rows[pairing->n2[idx]]];
      sl = sample_loss(spec, s, noisy[r], forward(c, ds.row(r1)), y2);
    } else {
      sl = sample_loss(spec, s, noisy[r]);
    }
    total += sl.value;
    if (sl.grad_own != 0.0) {
      const double u[1] = {sl.grad_own * inv_b};
      accumulate_gradient(c, ds.row(r), u, grad);
    }
    if (pairing && sl.grad_peer != 0.0) {
      const double u[1] = {sl.grad_peer * inv_b};
      accumulate_gradient(c, ds.row(r1), u, grad);
    }
  }
  return total;
}

double multiclass_batch(const Classifier& c, const LossSpec& spec, const LabeledDataset& ds,
                        const std::vector<int>& noisy, const std::vector<std::size_t>& rows,
                        const std::vector<std::size_t>& order, std::size_t begin,
                        std::size_t end, const PeerPairing* pairing, std::vector<double>& grad) {
  const double inv_b = 1.0 / static_cast<double>(end - begin);
  const double alpha = spec.peer_alpha();
  double total = 0.0;
  std::vector<double> u;
  for (std::size_t pos = begin; pos < end; ++pos) {
    const std::size_t idx = order[pos];
    const std::size_t r = rows[idx];
    const MultiLossEval own = eval_base(spec.base, forward_scores(c, ds.row(r)), noisy[r]);
    double value = own.value;
    u.assign(own.grad.begin(), own.grad.end());
    for (double& g : u) g *= inv_b;
    accumulate_gradient(c, ds.row(r), u, grad);
    if (pairing) {
      const std::size_t r1 = rows[pairing->n1[idx]];
      const MultiLossEval other =
          eval_base(spec.base, forward_scores(c, ds.row(r1)), noisy[rows[pairing->n2[idx]]]);
      value -= alpha * other.value;
      u.assign(other.grad.begin(), other.grad.end());
      for (double& g : u) g *= -alpha * inv_b;
      accumulate_gradient(c, ds.row(r1), u, grad);
    }
    total += value;
  }
  return total;
}

}  // namespace

TrainOutcome train(const TrainSettings& settings, const LossSpec& spec, const LabeledDataset& ds,
                   std::uint64_t seed) {
  validate(spec);
  validate(ds);
  const auto started = std::chrono::steady_clock::now();
  const bool multiclass = ds.num_classes > 2;
  if (multiclass && spec.base != BaseLossKind::CrossEntropyMulticlass) {
    raise(ErrorCode::InvalidArgument, "multiclass training uses the cross_entropy_multiclass base");
  }
  if (!multiclass && spec.base == BaseLossKind::CrossEntropyMulticlass) {
    raise(ErrorCode::InvalidArgument, "binary training uses a binary base loss");
  }
  if (multiclass && !(std::holds_alternative<PlainFamily>(spec.family) || spec.is_peer())) {
    raise(ErrorCode::InvalidArgument, "multiclass training supports the plain and peer families");
  }
  const std::size_t outputs = multiclass ? ds.num_classes : 1;
  const Arch arch = settings.arch == ArchKind::Mlp ? Arch::mlp(ds.d, settings.hidden, outputs)
                                                   : Arch::linear(ds.d, outputs);
  TrainOutcome out{init_classifier(arch, derive_seed(seed, kInit)), {}};
  out.result.seed = seed;
  out.result.alpha = spec.peer_alpha();
  const std::vector<int>& noisy = ds.labels(LabelChannel::Noisy);
  const std::vector<std::size_t> rows = ds.rows_with(SplitTag::Train);
  const std::size_t m = rows.size();
  if (m == 0) raise(ErrorCode::TooFewSamples, "no training rows");
  const bool has_test = ds.clean && !ds.rows_with(SplitTag::Test).empty() && ds.split_tags;
  OptimizerState opt = init_optimizer(settings.optimizer, arch.param_count());
  std::vector<double> grad(arch.param_count());

  for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, kShuffle, epoch));
    const std::vector<std::size_t> order = permutation(m, shuffle_rng);
    std::optional<PeerPairing> pairing;
    if (spec.is_peer()) pairing = draw_pairing(m, derive_seed(seed, kPairing, epoch));
    double total = 0.0;
    for (std::size_t begin = 0; begin < m; begin += settings.batch_size) {
      const std::size_t end = std::min(m, begin + settings.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      const PeerPairing* p = pairing ? &*pairing : nullptr;
      total += multiclass
                   ? multiclass_batch(out.classifier, spec, ds, noisy, rows, order, begin, end, p, grad)
                   : binary_batch(out.classifier, spec, ds, noisy, rows, order, begin, end, p, grad);
      step_inplace(opt, out.classifier, grad);
    }
    const double mean_loss = total / static_cast<double>(m);
    if (!std::isfinite(mean_loss)) {
      raise(ErrorCode::DivergedLoss, fmt::format("train loss became {} at epoch {}", mean_loss, epoch));
    }
    out.result.train_loss.push_back(mean_loss);
    if (settings.record_test_curve) {
      out.result.test_acc.push_back(has_test ? evaluate(out.classifier, ds, SplitTag::Test)
                                             : std::numeric_limits<double>::quiet_NaN());
    }
    spdlog::debug("seed {} epoch {} loss {:.6f}", seed, epoch, mean_loss);
  }
  out.result.test_accuracy =
      has_test ? evaluate(out.classifier, ds, SplitTag::Test) : std::numeric_limits<double>::quiet_NaN();
  out.result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

TuneResult tune_alpha(const TrainSettings& settings, BaseLossKind base, const LabeledDataset& ds,
                      const std::vector<double>& grid, std::uint64_t seed) {
  if (grid.empty()) raise(ErrorCode::InvalidArgument, "alpha grid is empty");
  TuneResult out;
  double best_acc = -1.0;
  bool have = false;
  for (double alpha : grid) {
    TrainOutcome run = train(settings, LossSpec::peer(alpha, base), ds, seed);
    const double acc = noisy_accuracy(run.classifier, ds, SplitTag::Val);
    out.table.emplace_back(alpha, acc);
    const bool better = !have || acc > best_acc ||
                        (acc == best_acc && std::abs(alpha - 1.0) < std::abs(out.best_alpha - 1.0));
    if (better) {
      have = true;
      best_acc = acc;
      out.best_alpha = alpha;
      out.best = std::move(run);
    }
  }
  return out;
}

LossSpec resolve_loss(const LossConfig& loss, const NoiseSpec& noise, const LabeledDataset& ds) {
  const bool multiclass = ds.num_classes > 2;
  const BaseLossKind base = loss.base.value_or(
      multiclass ? BaseLossKind::CrossEntropyMulticlass : BaseLossKind::Logistic);
  LossSpec spec;
  if (loss.family == "plain") {
    spec = LossSpec::plain(base);
  } else if (loss.family == "peer") {
    double alpha = loss.alpha.value;
    if (loss.alpha.mode == AlphaMode::ClosedForm) {
      if (multiclass || noise.uniform) {
        raise(ErrorCode::InvalidArgument, "closed-form alpha needs binary class-conditional noise");
      }
      const std::vector<std::size_t> counts = [&] {
        std::vector<std::size_t> c(2, 0);
        const std::vector<int>& clean = ds.labels(LabelChannel::Clean);
        for (std::size_t r : ds.rows_with(SplitTag::Train)) ++c[clean[r] > 0 ? 1 : 0];
        return c;
      }();
      const double p = static_cast<double>(counts[1]) / static_cast<double>(counts[0] + counts[1]);
      alpha = alpha_star(p, noise.binary);
    }
    spec = LossSpec::peer(alpha, base);
  } else if (loss.family == "surrogate") {
    if (noise.uniform) raise(ErrorCode::InvalidArgument, "surrogate loss needs binary rates");
    spec = LossSpec::surrogate(noise.binary, base);
  } else if (loss.family == "symmetric") {
    spec = LossSpec::symmetric();
  } else {
    raise(ErrorCode::InvalidConfig, "unknown loss family '" + loss.family + "'");
  }
  spec.cap = loss.cap;
  return spec;
}

// --- tables -----------------------------------------------------------------

std::vector<TableRow> run_table(const ExperimentConfig& config, std::uint64_t master_seed,
                                std::size_t jobs) {
  const std::vector<std::uint64_t> seeds = resolve_seeds(config, master_seed);
  const std::size_t n_loss = config.losses.size();
  const std::size_t n_rows = config.noise.size() * n_loss;
  const std::size_t n_tasks = config.noise.size() * seeds.size();
  std::vector<std::vector<RunResult>> results(n_rows, std::vector<RunResult>(seeds.size()));

  // One task per (noise, seed): the prepared data is shared by every loss.
  const auto run_task = [&](std::size_t task) {
    const std::size_t ni = task / seeds.size();
    const std::size_t si = task % seeds.size();
    const NoiseSpec& noise = config.noise[ni];
    const LabeledDataset ds = prepare_dataset(config, noise, seeds[si]);
    for (std::size_t li = 0; li < n_loss; ++li) {
      const LossConfig& loss = config.losses[li];
      RunResult result;
      if (loss.family == "peer" && loss.alpha.mode == AlphaMode::Tuned) {
        const LossSpec probe = resolve_loss(loss, noise, ds);
        TuneResult tuned = tune_alpha(config.train, probe.base, ds, loss.alpha.grid, seeds[si]);
        result = std::move(tuned.best.result);
      } else {
        result = train(config.train, resolve_loss(loss, noise, ds), ds, seeds[si]).result;
      }
      spdlog::info("noise {} loss {} seed {}: test accuracy {:.4f}", ni, loss.family, seeds[si],
                   result.test_accuracy);
      results[ni * n_loss + li][si] = std::move(result);
    }
  };

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      try {
        run_task(task);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_tasks;
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, n_tasks));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<TableRow> rows;
  for (std::size_t ni = 0; ni < config.noise.size(); ++ni) {
    for (std::size_t li = 0; li < n_loss; ++li) {
      TableRow row;
      row.dataset = config.dataset.name();
      std::tie(row.e_minus, row.e_plus) = config.noise[ni].columns();
      row.loss_family = config.losses[li].family;
      row.runs = std::move(results[ni * n_loss + li]);
      row.seed_count = row.runs.size();
      double sum = 0.0, alpha_sum = 0.0;
      for (const RunResult& r : row.runs) {
        sum += r.test_accuracy;
        alpha_sum += r.alpha;
      }
      const double k = static_cast<double>(row.seed_count);
      row.mean_acc = sum / k;
      row.alpha = alpha_sum / k;
      double ss = 0.0;
      for (const RunResult& r : row.runs) ss += (r.test_accuracy - row.mean_acc) * (r.test_accuracy - row.mean_acc);
      row.std_acc = row.seed_count > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string format_table_csv(const std::vector<TableRow>& rows) {
  std::string out = "dataset,e_minus,e_plus,loss_family,alpha,seed_count,mean_acc,std_acc\n";
  for (const TableRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.dataset, r.e_minus, r.e_plus, r.loss_family,
                       r.alpha, r.seed_count, r.mean_acc, r.std_acc);
  }
  return out;
}

std::string format_curves_csv(const RunResult& run) {
  std::string out = "epoch,train_loss,test_acc\n";
  for (std::size_t e = 0; e < run.train_loss.size(); ++e) {
    const double acc = e < run.test_acc.size() ? run.test_acc[e] : std::numeric_limits<double>::quiet_NaN();
    out += fmt::format("{},{},{}\n", e + 1, run.train_loss[e], acc);
  }
  return out;
}

// --- decision boundaries ----------------------------------------------------

std::vector<GridPoint> boundary_grid(const Classifier& c, std::pair<double, double> x_range,
                                     std::pair<double, double> y_range, std::size_t resolution) {
  if (c.arch.input_dim != 2) {
    raise(ErrorCode::NotTwoDimensional,
          fmt::format("boundary grids need a 2-d classifier, got d={}", c.arch.input_dim));
  }
  if (resolution < 1) raise(ErrorCode::InvalidArgument, "resolution must be >= 1");
  const auto coord = [resolution](std::pair<double, double> range, std::size_t i) {
    if (resolution == 1) return 0.5 * (range.first + range.second);
    return range.first + (range.second - range.first) * static_cast<double>(i) /
                             static_cast<double>(resolution - 1);
  };
  std::vector<GridPoint> grid;
  grid.reserve(resolution * resolution);
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      const double x[2] = {coord(x_range, ix), coord(y_range, iy)};
      const std::vector<double> s = forward_scores(c, x);
      GridPoint g{x[0], x[1], 0.0, predict(c, x)};
      g.score = s.size() == 1 ? s[0] : s[static_cast<std::size_t>(g.pred)];
      grid.push_back(g);
    }
  }
  return grid;
}

std::string format_boundary_csv(const std::vector<GridPoint>& grid) {
  std::string out = "x,y,score,pred\n";
  for (const GridPoint& g : grid) out += fmt::format("{},{},{},{}\n", g.x, g.y, g.score, g.pred);
  return out;
}

int ring_label(double x, double y, double radius_inner, double radius_outer) {
  return std::hypot(x, y) > 0.5 * (radius_inner + radius_outer) ? 1 : -1;
}

double ring_rule_accuracy(const std::vector<GridPoint>& grid, double radius_inner,
                          double radius_outer) {
  if (grid.empty()) raise(ErrorCode::InvalidArgument, "empty grid");
  std::size_t hits = 0;
  for (const GridPoint& g : grid) hits += g.pred == ring_label(g.x, g.y, radius_inner, radius_outer);
  return static_cast<double>(hits) / static_cast<double>(grid.size());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) raise(ErrorCode::Io, "write failed for " + path);
}

}  // namespace peerloss
