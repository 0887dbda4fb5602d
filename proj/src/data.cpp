#include "peerloss/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/core.h>

#include "peerloss/error.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "unknown";
}

const std::vector<int>& LabeledDataset::labels(LabelChannel ch) const {
  const auto& channel = ch == LabelChannel::Clean ? clean : noisy;
  if (!channel) {
    raise(ErrorCode::MissingChannel,
          fmt::format("dataset has no {} labels", ch == LabelChannel::Clean ? "clean" : "noisy"));
  }
  return *channel;
}

std::vector<std::size_t> LabeledDataset::rows_with(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!split_tags || (*split_tags)[i] == tag) out.push_back(i);
  }
  return out;
}

namespace {

bool valid_label(int y, std::size_t k) {
  if (k == 2) return y == 1 || y == -1;
  return y >= 0 && static_cast<std::size_t>(y) < k;
}

void check_channel(const std::optional<std::vector<int>>& ch, const LabeledDataset& ds,
                   const char* name) {
  if (!ch) return;
  if (ch->size() != ds.n) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("{} channel has {} labels for {} rows", name, ch->size(), ds.n));
  }
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (!valid_label((*ch)[i], ds.num_classes)) {
      raise(ErrorCode::LabelOutOfRange,
            fmt::format("{} label {} at row {} invalid for {} classes", name, (*ch)[i], i,
                        ds.num_classes));
    }
  }
}

std::size_t class_index(int y, std::size_t k) {
  if (k == 2) return y > 0 ? 1 : 0;
  return static_cast<std::size_t>(y);
}

int class_label(std::size_t index, std::size_t k) {
  if (k == 2) return index == 0 ? -1 : 1;
  return static_cast<int>(index);
}

LabeledDataset empty_like(const LabeledDataset& ds) {
  LabeledDataset out;
  out.d = ds.d;
  out.feature_names = ds.feature_names;
  out.num_classes = ds.num_classes;
  return out;
}

std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> names(d);
  for (std::size_t j = 0; j < d; ++j) names[j] = fmt::format("x{}", j);
  return names;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<long> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

void validate(const LabeledDataset& ds) {
  if (ds.n < 1) raise(ErrorCode::InvalidArgument, "dataset needs at least one row");
  if (ds.d < 1) raise(ErrorCode::InvalidArgument, "dataset needs at least one feature");
  if (ds.features.size() != ds.n * ds.d) {
    raise(ErrorCode::ShapeMismatch,
          fmt::format("feature matrix has {} entries, expected {}x{}", ds.features.size(), ds.n,
                      ds.d));
  }
  if (ds.num_classes < 2) raise(ErrorCode::InvalidArgument, "num_classes must be >= 2");
  if (!ds.clean && !ds.noisy) raise(ErrorCode::MissingChannel, "dataset has no label channel");
  for (double v : ds.features) {
    if (!std::isfinite(v)) raise(ErrorCode::InvalidArgument, "features must be finite");
  }
  check_channel(ds.clean, ds, "clean");
  check_channel(ds.noisy, ds, "noisy");
  if (ds.split_tags && ds.split_tags->size() != ds.n) {
    raise(ErrorCode::ShapeMismatch, "split tags do not cover every row");
  }
}

LabeledDataset parse_csv(const std::string& text, const CsvOptions& options) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) raise(ErrorCode::ParseError, "row 1: missing header");
  const std::vector<std::string_view> header = split_fields(line);
  std::vector<std::string> names(header.begin(), header.end());
  const auto find_column = [&names](const std::string& name) -> std::size_t {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) raise(ErrorCode::MissingColumn, fmt::format("no column '{}'", name));
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t label_col = find_column(options.label_column);
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  const std::size_t noisy_col = options.noisy_column ? find_column(*options.noisy_column) : kNone;
  const std::size_t split_col = options.split_column ? find_column(*options.split_column) : kNone;
  std::vector<std::size_t> feature_cols;
  LabeledDataset ds;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j == label_col || j == noisy_col || j == split_col) continue;
    feature_cols.push_back(j);
    ds.feature_names.push_back(names[j]);
  }
  ds.d = feature_cols.size();
  std::vector<long> raw_clean, raw_noisy;
  std::vector<SplitTag> tags;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string_view> fields = split_fields(line);
    if (fields.size() != names.size()) {
      raise(ErrorCode::ParseError, fmt::format("row {} column {}: expected {} fields, got {}",
                                               line_no, std::min(fields.size(), names.size()) + 1,
                                               names.size(), fields.size()));
    }
    for (std::size_t j : feature_cols) {
      const std::string_view f = fields[j];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        raise(ErrorCode::ParseError,
              fmt::format("row {} column {}: '{}' is not a finite number", line_no, j + 1, f));
      }
      ds.features.push_back(v);
    }
    const auto label_at = [&](std::size_t col) {
      const auto v = parse_int(fields[col]);
      if (!v) {
        raise(ErrorCode::UnknownLabelValue,
              fmt::format("row {} column {}: label '{}' is not an integer", line_no, col + 1,
                          fields[col]));
      }
      if (options.encoding == LabelEncoding::Pm1 && *v != 1 && *v != -1) {
        raise(ErrorCode::UnknownLabelValue,
              fmt::format("row {} column {}: label {} is not -1/+1", line_no, col + 1, *v));
      }
      if (options.encoding == LabelEncoding::ZeroBased && *v < 0) {
        raise(ErrorCode::UnknownLabelValue,
              fmt::format("row {} column {}: label {} is negative", line_no, col + 1, *v));
      }
      return *v;
    };
    raw_clean.push_back(label_at(label_col));
    if (noisy_col != kNone) raw_noisy.push_back(label_at(noisy_col));
    if (split_col != kNone) {
      const std::string_view s = fields[split_col];
      if (s == "train") {
        tags.push_back(SplitTag::Train);
      } else if (s == "val") {
        tags.push_back(SplitTag::Val);
      } else if (s == "test") {
        tags.push_back(SplitTag::Test);
      } else {
        raise(ErrorCode::ParseError,
              fmt::format("row {} column {}: unknown split '{}'", line_no, split_col + 1, s));
      }
    }
    ++ds.n;
  }
  if (ds.n == 0) raise(ErrorCode::ParseError, "no data rows");

  long max_label = 1;
  for (long v : raw_clean) max_label = std::max(max_label, v);
  for (long v : raw_noisy) max_label = std::max(max_label, v);
  const bool binary = options.encoding == LabelEncoding::Pm1 || max_label <= 1;
  ds.num_classes = binary ? 2 : static_cast<std::size_t>(max_label) + 1;
  const auto convert = [&](const std::vector<long>& raw) {
    std::vector<int> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (options.encoding == LabelEncoding::ZeroBased && binary) {
        out[i] = raw[i] == 0 ? -1 : 1;
      } else {
        out[i] = static_cast<int>(raw[i]);
      }
    }
    return out;
  };
  ds.clean = convert(raw_clean);
  if (noisy_col != kNone) ds.noisy = convert(raw_noisy);
  if (split_col != kNone) ds.split_tags = std::move(tags);
  validate(ds);
  return ds;
}

LabeledDataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options);
}

std::string format_csv(const LabeledDataset& ds) {
  validate(ds);
  const std::vector<std::string> names =
      ds.feature_names.size() == ds.d ? ds.feature_names : default_names(ds.d);
  std::string out;
  for (std::size_t j = 0; j < ds.d; ++j) out += (j ? "," : "") + names[j];
  if (ds.clean) out += ",label";
  if (ds.noisy) out += ",noisy_label";
  if (ds.split_tags) out += ",split";
  out += '\n';
  for (std::size_t i = 0; i < ds.n; ++i) {
    for (std::size_t j = 0; j < ds.d; ++j) {
      if (j) out += ',';
      out += fmt::format("{}", ds.features[i * ds.d + j]);
    }
    if (ds.clean) out += fmt::format(",{}", (*ds.clean)[i]);
    if (ds.noisy) out += fmt::format(",{}", (*ds.noisy)[i]);
    if (ds.split_tags) out += "," + to_string((*ds.split_tags)[i]);
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const LabeledDataset& ds) {
  const std::string text = format_csv(ds);
  std::ofstream out(path);
  if (!out) raise(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) raise(ErrorCode::Io, "write failed for " + path);
}

LabeledDataset gen_twonorm(std::size_t n_per_class, std::size_t d, std::uint64_t seed) {
  if (d < 1) raise(ErrorCode::InvalidArgument, "twonorm needs d >= 1");
  if (n_per_class < 1) raise(ErrorCode::InvalidArgument, "twonorm needs n_per_class >= 1");
  Rng rng(seed);
  const double a = 2.0 / std::sqrt(static_cast<double>(d));
  const std::size_t n = 2 * n_per_class;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < n_per_class ? 1 : -1;
  rng.shuffle(labels);
  LabeledDataset ds;
  ds.n = n;
  ds.d = d;
  ds.feature_names = default_names(d);
  ds.features.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.features[i * d + j] = labels[i] * a + rng.normal();
  }
  ds.clean = std::move(labels);
  return ds;
}

LabeledDataset gen_circles(std::size_t n, double radius_inner, double radius_outer,
                           double jitter, std::uint64_t seed) {
  if (!(radius_inner > 0.0 && radius_inner < radius_outer)) {
    raise(ErrorCode::BadRadii, fmt::format("need 0 < radius_inner < radius_outer, got {} and {}",
                                           radius_inner, radius_outer));
  }
  if (n < 2 || n % 2 != 0) raise(ErrorCode::InvalidArgument, "circles needs an even n >= 2");
  if (!(jitter >= 0.0)) raise(ErrorCode::InvalidArgument, "jitter must be >= 0");
  Rng rng(seed);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < n / 2 ? -1 : 1;
  rng.shuffle(labels);
  LabeledDataset ds;
  ds.n = n;
  ds.d = 2;
  ds.feature_names = default_names(2);
  ds.features.resize(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = (labels[i] < 0 ? radius_inner : radius_outer) +
                     (jitter > 0.0 ? jitter * rng.normal() : 0.0);
    ds.features[2 * i] = r * std::cos(theta);
    ds.features[2 * i + 1] = r * std::sin(theta);
  }
  ds.clean = std::move(labels);
  return ds;
}

LabeledDataset gen_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t d,
                         double separation, std::uint64_t seed) {
  if (num_classes < 3) raise(ErrorCode::InvalidArgument, "blobs needs K >= 3");
  if (d < 2) raise(ErrorCode::InvalidArgument, "blobs needs d >= 2");
  if (n_per_class < 1) raise(ErrorCode::InvalidArgument, "blobs needs n_per_class >= 1");
  Rng rng(seed);
  const std::size_t n = n_per_class * num_classes;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i / n_per_class);
  rng.shuffle(labels);
  LabeledDataset ds;
  ds.n = n;
  ds.d = d;
  ds.num_classes = num_classes;
  ds.feature_names = default_names(d);
  ds.features.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * labels[i] / static_cast<double>(num_classes);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      if (j == 0) mean = separation * std::cos(angle);
      if (j == 1) mean = separation * std::sin(angle);
      ds.features[i * d + j] = mean + rng.normal();
    }
  }
  ds.clean = std::move(labels);
  return ds;
}

LabeledDataset flip_labels(const LabeledDataset& ds, const TransitionMatrix& q,
                           std::uint64_t seed) {
  const std::vector<int>& clean = ds.labels(LabelChannel::Clean);
  if (q.k() != ds.num_classes) {
    raise(ErrorCode::DimensionMismatch,
          fmt::format("{}-class noise on a {}-class dataset", q.k(), ds.num_classes));
  }
  Rng rng(seed);
  LabeledDataset out = ds;
  std::vector<int> noisy(ds.n);
  const std::size_t k = q.k();
  for (std::size_t i = 0; i < ds.n; ++i) {
    const std::size_t from = class_index(clean[i], k);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t to = from;
    for (std::size_t j = 0; j < k; ++j) {
      acc += q(from, j);
      if (u < acc) {
        to = j;
        break;
      }
    }
    noisy[i] = class_label(to, k);
  }
  out.noisy = std::move(noisy);
  return out;
}

LabeledDataset flip_labels(const LabeledDataset& ds, const NoiseModel& nm, std::uint64_t seed) {
  const NoiseModel checked = make_noise_model(nm.e_minus, nm.e_plus);
  return flip_labels(ds, to_transition(checked), seed);
}

std::vector<std::size_t> class_counts(const LabeledDataset& ds, LabelChannel ch) {
  const std::vector<int>& labels = ds.labels(ch);
  std::vector<std::size_t> counts(ds.num_classes, 0);
  for (int y : labels) ++counts[class_index(y, ds.num_classes)];
  return counts;
}

LabeledDataset select_rows(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  LabeledDataset out = empty_like(ds);
  out.n = rows.size();
  out.features.reserve(rows.size() * ds.d);
  if (ds.clean) out.clean.emplace();
  if (ds.noisy) out.noisy.emplace();
  if (ds.split_tags) out.split_tags.emplace();
  for (std::size_t r : rows) {
    if (r >= ds.n) raise(ErrorCode::OutOfRange, fmt::format("row {} outside dataset", r));
    const auto x = ds.row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    if (ds.clean) out.clean->push_back((*ds.clean)[r]);
    if (ds.noisy) out.noisy->push_back((*ds.noisy)[r]);
    if (ds.split_tags) out.split_tags->push_back((*ds.split_tags)[r]);
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& ds, SplitTag tag) {
  const std::vector<std::size_t> rows = ds.rows_with(tag);
  return select_rows(ds, rows);
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.d != b.d || a.num_classes != b.num_classes || a.clean.has_value() != b.clean.has_value() ||
      a.noisy.has_value() != b.noisy.has_value() ||
      a.split_tags.has_value() != b.split_tags.has_value()) {
    raise(ErrorCode::ShapeMismatch, "datasets differ in shape or channels");
  }
  LabeledDataset out = a;
  out.n += b.n;
  out.features.insert(out.features.end(), b.features.begin(), b.features.end());
  if (a.clean) out.clean->insert(out.clean->end(), b.clean->begin(), b.clean->end());
  if (a.noisy) out.noisy->insert(out.noisy->end(), b.noisy->begin(), b.noisy->end());
  if (a.split_tags) {
    out.split_tags->insert(out.split_tags->end(), b.split_tags->begin(), b.split_tags->end());
  }
  return out;
}

LabeledDataset equalize_prior(const LabeledDataset& ds, LabelChannel by, std::uint64_t seed) {
  if (ds.num_classes != 2) raise(ErrorCode::InvalidArgument, "equalize_prior is binary only");
  const std::vector<int>& labels = ds.labels(by);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.n; ++i) (labels[i] > 0 ? pos : neg).push_back(i);
  std::vector<std::size_t>& major = pos.size() >= neg.size() ? pos : neg;
  const std::size_t keep = std::min(pos.size(), neg.size());
  Rng rng(seed);
  rng.shuffle(major);
  major.resize(keep);
  std::vector<std::size_t> rows;
  rows.reserve(2 * keep);
  rows.insert(rows.end(), pos.begin(), pos.end());
  rows.insert(rows.end(), neg.begin(), neg.end());
  std::sort(rows.begin(), rows.end());
  return select_rows(ds, rows);
}

LabeledDataset split(const LabeledDataset& ds, const std::array<double, 3>& fractions,
                     std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      raise(ErrorCode::BadFractions, "split fractions must be positive");
    }
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    raise(ErrorCode::BadFractions, fmt::format("split fractions sum to {}, not 1", total));
  }
  const double n = static_cast<double>(ds.n);
  const std::size_t n_train = std::min(ds.n, static_cast<std::size_t>(std::floor(fractions[0] * n + 0.5)));
  const std::size_t n_val =
      std::min(ds.n - n_train, static_cast<std::size_t>(std::floor(fractions[1] * n + 0.5)));
  Rng rng(seed);
  const std::vector<std::size_t> order = permutation(ds.n, rng);
  std::vector<SplitTag> tags(ds.n, SplitTag::Test);
  for (std::size_t pos = 0; pos < ds.n; ++pos) {
    if (pos < n_train) {
      tags[order[pos]] = SplitTag::Train;
    } else if (pos < n_train + n_val) {
      tags[order[pos]] = SplitTag::Val;
    }
  }
  LabeledDataset out = ds;
  out.split_tags = std::move(tags);
  return out;
}

}  // namespace peerloss
