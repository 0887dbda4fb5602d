#pragma once

// Experiment configuration, the ERM training loop, evaluation, noisy
// validation alpha tuning, table runs and decision-boundary grids.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peerloss/data.hpp"
#include "peerloss/losses.hpp"
#include "peerloss/model.hpp"
#include "peerloss/noise.hpp"

namespace peerloss {

// --- configuration ----------------------------------------------------------

enum class DatasetKind { Twonorm, Circles, Blobs, Csv };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Twonorm;
  // twonorm / blobs
  std::size_t n_per_class = 2000;
  std::size_t test_per_class = 0;  // > 0: separate test set, `val_fraction` splits the pool
  std::size_t d = 20;
  // circles
  std::size_t n = 1000;
  std::size_t test_n = 0;
  double radius_inner = 0.5;
  double radius_outer = 1.0;
  double jitter = 0.05;
  // blobs
  std::size_t num_classes = 3;
  double separation = 3.0;
  // csv
  std::string path;
  CsvOptions csv;

  std::string name() const;
  bool separate_test() const;
};

/// Either class-conditional binary rates or uniform K-class flipping.
struct NoiseSpec {
  NoiseModel binary;
  std::size_t k = 2;
  double epsilon = 0.0;
  bool uniform = false;

  static NoiseSpec rates(double e_minus, double e_plus);
  static NoiseSpec uniform_k(std::size_t k, double epsilon);
  /// Values written to the e_minus / e_plus result columns (epsilon twice
  /// for uniform noise).
  std::pair<double, double> columns() const;
};

enum class AlphaMode { Fixed, ClosedForm, Tuned };

struct AlphaSpec {
  AlphaMode mode = AlphaMode::Fixed;
  double value = 1.0;
  std::vector<double> grid;
};

/// 0.0, 0.1, ..., 2.0
std::vector<double> default_alpha_grid();

struct LossConfig {
  std::string family = "plain";  // plain | peer | surrogate | symmetric
  std::optional<BaseLossKind> base;
  AlphaSpec alpha;
  std::optional<double> cap;
};

struct TrainSettings {
  ArchKind arch = ArchKind::Mlp;
  std::size_t hidden = 32;
  OptimizerConfig optimizer = OptimizerConfig::adam();
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  bool record_test_curve = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec dataset;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  double val_fraction = 0.0;
  std::vector<NoiseSpec> noise{NoiseSpec::rates(0.0, 0.0)};
  std::vector<LossConfig> losses{LossConfig{}};
  TrainSettings train;
  std::vector<std::uint64_t> seeds;  // explicit list; otherwise derived
  std::size_t seed_count = 1;
  bool equalize = false;
  LabelChannel equalize_by = LabelChannel::Noisy;
};

/// JSON document; unknown keys and invalid values throw InvalidConfig.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Explicit seeds, or `seed_count` streams derived from the master seed.
std::vector<std::uint64_t> resolve_seeds(const ExperimentConfig& config, std::uint64_t master);

// --- data preparation -------------------------------------------------------

/// Builds the tagged dataset for one run: generate or load, split, flip every
/// row with `noise`, then (optionally) equalize the train rows.
LabeledDataset prepare_dataset(const ExperimentConfig& config, const NoiseSpec& noise,
                               std::uint64_t seed);

// --- training ---------------------------------------------------------------

struct RunResult {
  double test_accuracy = 0.0;
  std::vector<double> train_loss;
  std::vector<double> test_acc;
  double alpha = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct TrainOutcome {
  Classifier classifier;
  RunResult result;
};

/// Minibatch training on the train rows' noisy labels. Peer pairs are redrawn
/// each epoch over the train rows. Test accuracy (clean labels) is recorded
/// after every epoch when test rows exist.
TrainOutcome train(const TrainSettings& settings, const LossSpec& spec,
                   const LabeledDataset& ds, std::uint64_t seed);

/// Fraction of rows with the tag whose prediction equals the clean label.
/// Throws NoisyTestRefused without a clean channel.
double evaluate(const Classifier& c, const LabeledDataset& ds, SplitTag tag);
/// Accuracy against noisy labels; refuses the test split.
double noisy_accuracy(const Classifier& c, const LabeledDataset& ds, SplitTag tag);

struct TuneResult {
  double best_alpha = 1.0;
  std::vector<std::pair<double, double>> table;  // (alpha, noisy val accuracy)
  TrainOutcome best;
};

/// One model per grid value with a shared seed; the best noisy validation
/// accuracy wins, ties go to the alpha closest to 1.
TuneResult tune_alpha(const TrainSettings& settings, BaseLossKind base,
                      const LabeledDataset& ds, const std::vector<double>& grid,
                      std::uint64_t seed);

/// LossSpec for a config entry. Closed-form alpha uses the clean train prior.
LossSpec resolve_loss(const LossConfig& loss, const NoiseSpec& noise, const LabeledDataset& ds);

struct TableRow {
  std::string dataset;
  double e_minus = 0.0;
  double e_plus = 0.0;
  std::string loss_family;
  double alpha = 0.0;  // mean alpha used; 0 for families without a peer term
  std::size_t seed_count = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation
  std::vector<RunResult> runs;
};

/// Every (noise, loss) row over every seed; `jobs` worker threads.
std::vector<TableRow> run_table(const ExperimentConfig& config, std::uint64_t master_seed,
                                std::size_t jobs = 1);

std::string format_table_csv(const std::vector<TableRow>& rows);
std::string format_curves_csv(const RunResult& run);

// --- decision boundaries ----------------------------------------------------

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  int pred = 1;
};

/// resolution x resolution lattice over the ranges, y outer and x inner.
std::vector<GridPoint> boundary_grid(const Classifier& c, std::pair<double, double> x_range,
                                     std::pair<double, double> y_range, std::size_t resolution);
std::string format_boundary_csv(const std::vector<GridPoint>& grid);

/// +1 outside the mid radius between the rings, -1 inside.
int ring_label(double x, double y, double radius_inner, double radius_outer);
double ring_rule_accuracy(const std::vector<GridPoint>& grid, double radius_inner,
                          double radius_outer);

void write_text(const std::string& path, const std::string& text);

}  // namespace peerloss
