#pragma once

// Labeled datasets with separate clean and noisy label channels, CSV
// ingestion, synthetic generators, label flipping, prior equalization and
// tagged splits. Every operation returns a new dataset.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peerloss/noise.hpp"

namespace peerloss {

enum class SplitTag : std::uint8_t { Train = 0, Val = 1, Test = 2 };
std::string to_string(SplitTag tag);

enum class LabelChannel { Clean, Noisy };

/// Binary labels are +1/-1; multiclass labels are indices in [0, K).
struct LabeledDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;  // n x d, row-major
  std::vector<std::string> feature_names;
  std::optional<std::vector<int>> clean;
  std::optional<std::vector<int>> noisy;
  std::size_t num_classes = 2;
  std::optional<std::vector<SplitTag>> split_tags;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * d, d}; }
  const std::vector<int>& labels(LabelChannel ch) const;
  bool has(LabelChannel ch) const { return ch == LabelChannel::Clean ? clean.has_value() : noisy.has_value(); }
  /// Row indices carrying the tag; all rows when the dataset is untagged.
  std::vector<std::size_t> rows_with(SplitTag tag) const;
};

/// Checks the dataset invariants; throws ShapeMismatch / LabelOutOfRange /
/// InvalidArgument.
void validate(const LabeledDataset& ds);

enum class LabelEncoding { Pm1, ZeroBased };

struct CsvOptions {
  std::string label_column = "label";
  LabelEncoding encoding = LabelEncoding::Pm1;
  std::optional<std::string> noisy_column;
  std::optional<std::string> split_column;
};

/// Header row required. Under zero_based, labels {0,1} map to -1/+1 and
/// larger label sets are kept as indices with K = max + 1.
LabeledDataset load_csv(const std::string& path, const CsvOptions& options = {});
LabeledDataset parse_csv(const std::string& text, const CsvOptions& options = {});

/// Writes features, then `label` (clean), `noisy_label` and `split` when present.
/// Binary labels are written as -1/+1.
void write_csv(const std::string& path, const LabeledDataset& ds);
std::string format_csv(const LabeledDataset& ds);

/// Class +1 ~ N(+a 1, I), class -1 ~ N(-a 1, I), a = 2 / sqrt(d); rows shuffled.
LabeledDataset gen_twonorm(std::size_t n_per_class, std::size_t d, std::uint64_t seed);

/// n/2 points per ring (n must be even); inner ring -1, outer ring +1,
/// radius jittered by N(0, jitter^2).
LabeledDataset gen_circles(std::size_t n, double radius_inner, double radius_outer,
                           double jitter, std::uint64_t seed);

/// K Gaussian blobs in d >= 2 dimensions with unit variance; class k has mean
/// separation * (cos 2 pi k / K, sin 2 pi k / K, 0, ...).
LabeledDataset gen_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t d,
                         double separation, std::uint64_t seed);

/// Draws noisy labels row by row from the clean label's transition row.
LabeledDataset flip_labels(const LabeledDataset& ds, const NoiseModel& nm, std::uint64_t seed);
LabeledDataset flip_labels(const LabeledDataset& ds, const TransitionMatrix& q,
                           std::uint64_t seed);

/// Uniformly downsamples the majority class of a binary dataset (by the chosen
/// channel) to the minority count. Surviving rows keep their original order.
LabeledDataset equalize_prior(const LabeledDataset& ds, LabelChannel by, std::uint64_t seed);

/// Tags rows train / val / test: a seeded permutation is cut into contiguous
/// blocks of round(f * N) rows (test takes the remainder).
LabeledDataset split(const LabeledDataset& ds, const std::array<double, 3>& fractions,
                     std::uint64_t seed);

LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows);
LabeledDataset subset(const LabeledDataset& ds, SplitTag tag);

/// Appends the rows of `b` to `a` (equal d, K and channel presence).
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

/// Count of each class in a channel (index 0 = label -1 for binary).
std::vector<std::size_t> class_counts(const LabeledDataset& ds, LabelChannel ch);

}  // namespace peerloss
