#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>
#include <spdlog/spdlog.h>

#include "peerloss/error.hpp"
#include "peerloss/harness.hpp"
#include "peerloss/random.hpp"

using namespace peerloss;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

TrainSettings quick(std::size_t epochs, std::size_t hidden = 16) {
  TrainSettings s;
  s.hidden = hidden;
  s.epochs = epochs;
  s.optimizer = OptimizerConfig::adam(0.01);
  s.batch_size = 32;
  return s;
}

LabeledDataset prepared(LabeledDataset ds, const NoiseModel& nm, std::uint64_t seed) {
  return split(flip_labels(ds, nm, seed), {0.6, 0.2, 0.2}, seed + 1);
}

const bool quiet_logs = [] {
  spdlog::set_level(spdlog::level::warn);
  return true;
}();

ExperimentConfig small_twonorm() {
  ExperimentConfig cfg;
  cfg.dataset.kind = DatasetKind::Twonorm;
  cfg.dataset.n_per_class = 300;
  cfg.dataset.d = 5;
  cfg.train = quick(15, 8);
  cfg.seeds = {1, 2};
  return cfg;
}

}  // namespace

TEST_CASE("zero epochs returns the initial model") {
  const LabeledDataset ds = prepared(gen_twonorm(50, 3, 1), {0.1, 0.1}, 2);
  const TrainOutcome out = train(quick(0), LossSpec::plain(), ds, 7);
  CHECK(out.result.train_loss.empty());
  CHECK(out.result.test_acc.empty());
  CHECK(out.classifier.arch == Arch::mlp(3, 16));
  CHECK(out.classifier.params == train(quick(0), LossSpec::peer(1.0), ds, 7).classifier.params);
}

TEST_CASE("clean circles are learned") {
  const LabeledDataset ds = prepared(gen_circles(1000, 0.5, 1.0, 0.05, 3), {0.0, 0.0}, 4);
  const TrainOutcome out = train(quick(60), LossSpec::plain(), ds, 5);
  CHECK(out.result.test_accuracy >= 0.99);
  CHECK(evaluate(out.classifier, ds, SplitTag::Train) >= 0.99);
  CHECK(out.result.train_loss.size() == 60);
  CHECK(out.result.test_acc.size() == 60);
}

TEST_CASE("training is deterministic") {
  const LabeledDataset ds = prepared(gen_twonorm(100, 4, 1), {0.2, 0.3}, 2);
  const TrainOutcome a = train(quick(5), LossSpec::peer(1.0), ds, 11);
  const TrainOutcome b = train(quick(5), LossSpec::peer(1.0), ds, 11);
  CHECK(a.classifier.params == b.classifier.params);
  CHECK(a.result.train_loss == b.result.train_loss);
  CHECK(train(quick(5), LossSpec::peer(1.0), ds, 12).classifier.params != a.classifier.params);
}

TEST_CASE("evaluation") {
  LabeledDataset ds;
  ds.n = 10;
  ds.d = 1;
  ds.features = {-3, -2, -1, -0.5, 0, 0.5, 1, 2, 3, 4};
  ds.clean = std::vector<int>{-1, -1, 1, -1, 1, -1, 1, 1, -1, 1};
  ds.noisy = std::vector<int>(10, 1);
  ds.split_tags = std::vector<SplitTag>(10, SplitTag::Test);
  // sign(x) rule: correct on rows 0,1,3,4,6,7,9.
  const Classifier identity{Arch::linear(1), {1.0, 0.0}};
  CHECK(evaluate(identity, ds, SplitTag::Test) == doctest::Approx(0.7));
  const Classifier constant{Arch::linear(1), {0.0, 1.0}};
  CHECK(evaluate(constant, ds, SplitTag::Test) == doctest::Approx(0.5));

  CHECK(code_of([&] { noisy_accuracy(identity, ds, SplitTag::Test); }) == ErrorCode::NoisyTestRefused);
  LabeledDataset noisy_only = ds;
  noisy_only.clean.reset();
  CHECK(code_of([&] { evaluate(identity, noisy_only, SplitTag::Test); }) == ErrorCode::NoisyTestRefused);
  ds.split_tags = std::vector<SplitTag>(10, SplitTag::Val);
  CHECK(noisy_accuracy(identity, ds, SplitTag::Val) == doctest::Approx(0.6));
}

TEST_CASE("peer risk on frozen model scales with the noise") {
  const LabeledDataset ds = gen_twonorm(50000, 4, 21);
  const Classifier c{Arch::linear(4), {0.7, 0.7, 0.7, 0.7, 0.1}};
  std::vector<double> scores(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) scores[i] = forward(c, ds.row(i));
  const PeerPairing pp = draw_pairing(ds.n, 22);
  const NoiseModel nm{0.2, 0.3};
  const LabeledDataset f = flip_labels(ds, nm, 23);
  const double clean = peer_loss_batch(LossSpec::peer(1.0), scores, *f.clean, pp).mean;
  const double noisy = peer_loss_batch(LossSpec::peer(1.0), scores, *f.noisy, pp).mean;
  CHECK(std::abs(noisy / clean - nm.signal()) <= 0.02);
}

TEST_CASE("alpha tuning") {
  const LabeledDataset ds = prepared(gen_twonorm(100, 4, 1), {0.2, 0.2}, 2);
  const TuneResult one = tune_alpha(quick(3), BaseLossKind::Logistic, ds, {1.0}, 3);
  CHECK(one.best_alpha == 1.0);
  CHECK(one.table.size() == 1);
  const TuneResult two = tune_alpha(quick(3), BaseLossKind::Logistic, ds, {0.0, 1.0}, 3);
  CHECK(two.table.size() == 2);
  CHECK(two.best.result.alpha == two.best_alpha);
}

TEST_CASE("closed-form alpha uses the clean train prior") {
  LabeledDataset ds = prepared(gen_twonorm(100, 2, 1), {0.1, 0.3}, 2);
  LossConfig lc;
  lc.family = "peer";
  lc.alpha.mode = AlphaMode::ClosedForm;
  const LossSpec spec = resolve_loss(lc, NoiseSpec::rates(0.1, 0.3), ds);
  const auto train_rows = ds.rows_with(SplitTag::Train);
  double pos = 0.0;
  for (std::size_t r : train_rows) pos += (*ds.clean)[r] > 0;
  CHECK(spec.peer_alpha() == doctest::Approx(alpha_star(pos / train_rows.size(), {0.1, 0.3})));
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse_config(R"({
    "name": "t", "dataset": {"kind": "circles", "n": 200, "jitter": 0.1},
    "noise": [{"e_minus": 0.2, "e_plus": 0.3}, {"e_minus": 0.1, "e_plus": 0.0}],
    "losses": [{"family": "plain"}, {"family": "peer", "alpha": 0.5},
               {"family": "peer", "alpha": {"mode": "tuned"}}],
    "model": {"arch": "linear"}, "optimizer": {"kind": "sgd", "lr": 0.1, "momentum": 0.9},
    "epochs": 3, "batch_size": 16, "seed_count": 4, "equalize_prior": {"enabled": true, "by": "clean"}
  })");
  CHECK(cfg.dataset.kind == DatasetKind::Circles);
  CHECK(cfg.dataset.n == 200);
  CHECK(cfg.noise.size() == 2);
  CHECK(cfg.noise[1].binary.e_minus == 0.1);
  const ExperimentConfig multi = parse_config(
      R"({"dataset": {"kind": "blobs", "num_classes": 4}, "noise": [{"k": 4, "epsilon": 0.2}]})");
  CHECK(multi.noise[0].uniform);
  CHECK(multi.noise[0].columns() == std::pair<double, double>{0.2, 0.2});
  CHECK(cfg.losses[1].alpha.value == 0.5);
  CHECK(cfg.losses[2].alpha.mode == AlphaMode::Tuned);
  CHECK(cfg.train.arch == ArchKind::Linear);
  CHECK(cfg.train.optimizer.kind == OptimizerKind::Sgd);
  CHECK(cfg.equalize);
  CHECK(cfg.equalize_by == LabelChannel::Clean);
  CHECK(resolve_seeds(cfg, 9).size() == 4);
  CHECK(resolve_seeds(cfg, 9) == resolve_seeds(cfg, 9));
  CHECK(resolve_seeds(cfg, 9) != resolve_seeds(cfg, 10));

  CHECK(code_of([] { parse_config(R"({"epoch": 3})"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(R"({"dataset": {"kind": "moons"}})"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([] { parse_config(R"({"noise": [{"e_minus": 0.6, "e_plus": 0.5}]})"); }) ==
        ErrorCode::InvalidConfig);
}

TEST_CASE("table runs") {
  ExperimentConfig cfg = small_twonorm();
  cfg.seeds = {1};
  const auto one = run_table(cfg, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].seed_count == 1);
  CHECK(one[0].alpha == 0.0);

  cfg = small_twonorm();
  cfg.noise = {NoiseSpec::rates(0.0, 0.0)};
  LossConfig peer;
  peer.family = "peer";
  LossConfig sur;
  sur.family = "surrogate";
  cfg.losses = {LossConfig{}, peer, sur};
  const auto rows = run_table(cfg, 3, 2);
  REQUIRE(rows.size() == 3);
  for (const TableRow& r : rows) {
    CHECK(std::abs(r.mean_acc - rows[0].mean_acc) <= 0.02);
    const double m = (r.runs[0].test_accuracy + r.runs[1].test_accuracy) / 2.0;
    CHECK(r.mean_acc == doctest::Approx(m));
    CHECK(r.std_acc == doctest::Approx(std::abs(r.runs[0].test_accuracy - r.runs[1].test_accuracy) / std::sqrt(2.0)));
  }
  CHECK(rows[1].alpha == 1.0);

  const auto again = run_table(cfg, 3, 1);
  CHECK(format_table_csv(again) == format_table_csv(rows));
  CHECK(format_table_csv(rows).rfind("dataset,e_minus,e_plus,loss_family,alpha,seed_count,mean_acc,std_acc\n", 0) == 0);
}

TEST_CASE("peer is not worse than plain under asymmetric noise") {
  ExperimentConfig cfg = small_twonorm();
  cfg.dataset.n_per_class = 500;
  cfg.train.epochs = 30;
  cfg.noise = {NoiseSpec::rates(0.1, 0.3), NoiseSpec::rates(0.2, 0.4)};
  LossConfig peer;
  peer.family = "peer";
  cfg.losses = {LossConfig{}, peer};
  cfg.equalize = true;
  const auto rows = run_table(cfg, 5);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); i += 2) CHECK(rows[i + 1].mean_acc >= rows[i].mean_acc - 0.01);
}

TEST_CASE("boundary grids") {
  const Classifier zero{Arch::linear(2), {0.0, 0.0, 0.0}};
  const auto g = boundary_grid(zero, {-1, 1}, {-1, 1}, 2);
  REQUIRE(g.size() == 4);
  for (const GridPoint& p : g) CHECK(p.pred == 1);
  CHECK(g[1].x == 1.0);
  CHECK(g[1].y == -1.0);
  CHECK(g[2].y == 1.0);
  CHECK(format_boundary_csv(g).rfind("x,y,score,pred\n", 0) == 0);
  CHECK(code_of([] { boundary_grid(Classifier{Arch::linear(3), {0, 0, 0, 0}}, {0, 1}, {0, 1}, 3); }) ==
        ErrorCode::NotTwoDimensional);

  CHECK(ring_label(0.1, 0.1, 0.5, 1.0) == -1);
  CHECK(ring_label(0.9, 0.0, 0.5, 1.0) == 1);
  // Constant +1 model: accuracy is the grid fraction outside the mid radius.
  const auto big = boundary_grid(zero, {-1.5, 1.5}, {-1.5, 1.5}, 100);
  double outer = 0.0;
  for (const GridPoint& p : big) outer += std::hypot(p.x, p.y) > 0.75;
  CHECK(ring_rule_accuracy(big, 0.5, 1.0) == doctest::Approx(outer / big.size()));
}

TEST_CASE("prepared datasets") {
  ExperimentConfig cfg = small_twonorm();
  cfg.equalize = true;
  const LabeledDataset ds = prepare_dataset(cfg, NoiseSpec::rates(0.1, 0.4), 3);
  std::size_t neg = 0, pos = 0;
  for (std::size_t r : ds.rows_with(SplitTag::Train)) ((*ds.noisy)[r] > 0 ? pos : neg)++;
  CHECK(neg == pos);
  CHECK(ds.has(LabelChannel::Clean));

  cfg.dataset.test_per_class = 100;
  cfg.val_fraction = 0.25;
  cfg.equalize = false;
  const LabeledDataset sep = prepare_dataset(cfg, NoiseSpec::rates(0.1, 0.4), 3);
  CHECK(sep.rows_with(SplitTag::Test).size() == 200);
  CHECK(sep.rows_with(SplitTag::Val).size() == 150);
  CHECK(sep.rows_with(SplitTag::Train).size() == 450);
}
