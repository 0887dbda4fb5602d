#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "json.hpp"
#include "peerloss/error.hpp"
#include "peerloss/harness.hpp"
#include "peerloss/random.hpp"

namespace peerloss {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) { raise(ErrorCode::InvalidConfig, msg); }

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(fmt::format("{} must be an object", where));
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) bad(fmt::format("unknown key '{}' in {}", item.key(), where));
  }
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) bad(fmt::format("{}.{} must be a number", where, key));
  return v.get<double>();
}

std::size_t get_count(const json& obj, const char* key, std::size_t fallback,
                      const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    bad(fmt::format("{}.{} must be a non-negative integer", where, key));
  }
  return v.get<std::size_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback,
                       const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) bad(fmt::format("{}.{} must be a string", where, key));
  return v.get<std::string>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) bad(fmt::format("{}.{} must be a boolean", where, key));
  return v.get<bool>();
}

DatasetSpec parse_dataset(const json& j) {
  DatasetSpec ds;
  const std::string kind = get_string(j, "kind", "twonorm", "dataset");
  if (kind == "twonorm") {
    only_keys(j, "dataset", {"kind", "n_per_class", "test_per_class", "d"});
    ds.kind = DatasetKind::Twonorm;
    ds.n_per_class = get_count(j, "n_per_class", ds.n_per_class, "dataset");
    ds.test_per_class = get_count(j, "test_per_class", 0, "dataset");
    ds.d = get_count(j, "d", ds.d, "dataset");
  } else if (kind == "circles") {
    only_keys(j, "dataset", {"kind", "n", "test_n", "radius_inner", "radius_outer", "jitter"});
    ds.kind = DatasetKind::Circles;
    ds.n = get_count(j, "n", ds.n, "dataset");
    ds.test_n = get_count(j, "test_n", 0, "dataset");
    ds.radius_inner = get_number(j, "radius_inner", ds.radius_inner, "dataset");
    ds.radius_outer = get_number(j, "radius_outer", ds.radius_outer, "dataset");
    ds.jitter = get_number(j, "jitter", ds.jitter, "dataset");
    ds.d = 2;
  } else if (kind == "blobs") {
    only_keys(j, "dataset",
              {"kind", "n_per_class", "test_per_class", "num_classes", "d", "separation"});
    ds.kind = DatasetKind::Blobs;
    ds.n_per_class = get_count(j, "n_per_class", 300, "dataset");
    ds.test_per_class = get_count(j, "test_per_class", 0, "dataset");
    ds.num_classes = get_count(j, "num_classes", ds.num_classes, "dataset");
    ds.d = get_count(j, "d", 2, "dataset");
    ds.separation = get_number(j, "separation", ds.separation, "dataset");
  } else if (kind == "csv") {
    only_keys(j, "dataset",
              {"kind", "path", "label_column", "encoding", "noisy_column", "split_column"});
    ds.kind = DatasetKind::Csv;
    ds.path = get_string(j, "path", "", "dataset");
    if (ds.path.empty()) bad("dataset.path is required for csv datasets");
    ds.csv.label_column = get_string(j, "label_column", "label", "dataset");
    const std::string enc = get_string(j, "encoding", "pm1", "dataset");
    if (enc == "pm1") {
      ds.csv.encoding = LabelEncoding::Pm1;
    } else if (enc == "zero_based") {
      ds.csv.encoding = LabelEncoding::ZeroBased;
    } else {
      bad(fmt::format("dataset.encoding must be pm1 or zero_based, got '{}'", enc));
    }
    if (j.contains("noisy_column")) ds.csv.noisy_column = get_string(j, "noisy_column", "", "dataset");
    if (j.contains("split_column")) ds.csv.split_column = get_string(j, "split_column", "", "dataset");
  } else {
    bad(fmt::format("unknown dataset kind '{}'", kind));
  }
  return ds;
}

NoiseSpec parse_noise(const json& j) {
  if (j.contains("epsilon") || j.contains("k")) {
    only_keys(j, "noise entry", {"k", "epsilon"});
    const std::size_t k = get_count(j, "k", 0, "noise");
    const double eps = get_number(j, "epsilon", 0.0, "noise");
    if (k < 2) bad("noise.k must be >= 2");
    try {
      uniform_transition(k, eps);
    } catch (const Error& e) {
      bad(e.what());
    }
    return NoiseSpec::uniform_k(k, eps);
  }
  only_keys(j, "noise entry", {"e_minus", "e_plus"});
  const double em = get_number(j, "e_minus", 0.0, "noise");
  const double ep = get_number(j, "e_plus", 0.0, "noise");
  try {
    make_noise_model(em, ep);
  } catch (const Error& e) {
    bad(e.what());
  }
  return NoiseSpec::rates(em, ep);
}

AlphaSpec parse_alpha(const json& j) {
  AlphaSpec a;
  if (j.is_number()) {
    a.value = j.get<double>();
    return a;
  }
  only_keys(j, "loss.alpha", {"mode", "value", "grid"});
  const std::string mode = get_string(j, "mode", "fixed", "loss.alpha");
  if (mode == "fixed") {
    a.mode = AlphaMode::Fixed;
    a.value = get_number(j, "value", 1.0, "loss.alpha");
  } else if (mode == "closed_form") {
    a.mode = AlphaMode::ClosedForm;
  } else if (mode == "tuned") {
    a.mode = AlphaMode::Tuned;
    a.grid = default_alpha_grid();
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      if (!g.is_array() || g.empty()) bad("loss.alpha.grid must be a non-empty array");
      a.grid.clear();
      for (const json& v : g) {
        if (!v.is_number()) bad("loss.alpha.grid entries must be numbers");
        a.grid.push_back(v.get<double>());
      }
    }
  } else {
    bad(fmt::format("unknown alpha mode '{}'", mode));
  }
  return a;
}

LossConfig parse_loss(const json& j) {
  only_keys(j, "loss entry", {"family", "base", "alpha", "cap"});
  LossConfig l;
  l.family = get_string(j, "family", "plain", "loss");
  if (l.family != "plain" && l.family != "peer" && l.family != "surrogate" &&
      l.family != "symmetric") {
    bad(fmt::format("unknown loss family '{}'", l.family));
  }
  if (j.contains("base")) {
    try {
      l.base = parse_base_loss(get_string(j, "base", "", "loss"));
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  if (j.contains("alpha")) {
    if (l.family != "peer") bad("loss.alpha only applies to the peer family");
    l.alpha = parse_alpha(j.at("alpha"));
  }
  if (j.contains("cap")) {
    l.cap = get_number(j, "cap", 0.0, "loss");
    if (!(*l.cap > 0.0)) bad("loss.cap must be > 0");
  }
  return l;
}

TrainSettings parse_training(const json& root, TrainSettings t) {
  if (root.contains("model")) {
    const json& m = root.at("model");
    only_keys(m, "model", {"arch", "hidden"});
    const std::string arch = get_string(m, "arch", "mlp", "model");
    if (arch == "mlp") {
      t.arch = ArchKind::Mlp;
    } else if (arch == "linear") {
      t.arch = ArchKind::Linear;
    } else {
      bad(fmt::format("unknown arch '{}'", arch));
    }
    t.hidden = get_count(m, "hidden", t.hidden, "model");
    if (t.arch == ArchKind::Mlp && t.hidden < 1) bad("model.hidden must be >= 1");
  }
  if (root.contains("optimizer")) {
    const json& o = root.at("optimizer");
    only_keys(o, "optimizer", {"kind", "lr", "momentum", "beta1", "beta2", "eps"});
    const std::string kind = get_string(o, "kind", "adam", "optimizer");
    if (kind == "adam") {
      t.optimizer = OptimizerConfig::adam(get_number(o, "lr", 1e-3, "optimizer"),
                                          get_number(o, "beta1", 0.9, "optimizer"),
                                          get_number(o, "beta2", 0.999, "optimizer"),
                                          get_number(o, "eps", 1e-8, "optimizer"));
      if (o.contains("momentum")) bad("optimizer.momentum applies to sgd only");
    } else if (kind == "sgd") {
      t.optimizer = OptimizerConfig::sgd(get_number(o, "lr", 1e-2, "optimizer"),
                                         get_number(o, "momentum", 0.0, "optimizer"));
      if (o.contains("beta1") || o.contains("beta2") || o.contains("eps")) {
        bad("optimizer.beta1/beta2/eps apply to adam only");
      }
    } else {
      bad(fmt::format("unknown optimizer '{}'", kind));
    }
    if (!(t.optimizer.lr > 0.0)) bad("optimizer.lr must be > 0");
  }
  t.epochs = get_count(root, "epochs", t.epochs, "config");
  t.batch_size = get_count(root, "batch_size", t.batch_size, "config");
  if (t.batch_size < 1) bad("batch_size must be >= 1");
  return t;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(fmt::format("malformed JSON: {}", e.what()));
  }
  only_keys(root, "config",
            {"name", "dataset", "split", "val_fraction", "noise", "losses", "model", "optimizer",
             "epochs", "batch_size", "seeds", "seed_count", "equalize_prior"});
  ExperimentConfig cfg;
  cfg.name = get_string(root, "name", cfg.name, "config");
  if (root.contains("dataset")) cfg.dataset = parse_dataset(root.at("dataset"));
  if (root.contains("split")) {
    const json& s = root.at("split");
    if (!s.is_array() || s.size() != 3) bad("split must be [train, val, test]");
    double total = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!s[i].is_number() || !(s[i].get<double>() > 0.0)) bad("split fractions must be > 0");
      cfg.split[i] = s[i].get<double>();
      total += cfg.split[i];
    }
    if (std::abs(total - 1.0) > 1e-9) bad("split fractions must sum to 1");
  }
  cfg.val_fraction = get_number(root, "val_fraction", 0.0, "config");
  if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) bad("val_fraction must be in [0,1)");
  if (root.contains("noise")) {
    const json& n = root.at("noise");
    if (!n.is_array() || n.empty()) bad("noise must be a non-empty array");
    cfg.noise.clear();
    for (const json& e : n) cfg.noise.push_back(parse_noise(e));
  }
  if (root.contains("losses")) {
    const json& l = root.at("losses");
    if (!l.is_array() || l.empty()) bad("losses must be a non-empty array");
    cfg.losses.clear();
    for (const json& e : l) cfg.losses.push_back(parse_loss(e));
  }
  cfg.train = parse_training(root, cfg.train);
  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    if (!s.is_array() || s.empty()) bad("seeds must be a non-empty array");
    for (const json& v : s) {
      if (!v.is_number_unsigned()) bad("seeds must be non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  cfg.seed_count = get_count(root, "seed_count", cfg.seed_count, "config");
  if (cfg.seeds.empty() && cfg.seed_count < 1) bad("seed_count must be >= 1");
  if (root.contains("equalize_prior")) {
    const json& e = root.at("equalize_prior");
    if (e.is_boolean()) {
      cfg.equalize = e.get<bool>();
    } else {
      only_keys(e, "equalize_prior", {"enabled", "by"});
      cfg.equalize = get_bool(e, "enabled", true, "equalize_prior");
      const std::string by = get_string(e, "by", "noisy", "equalize_prior");
      if (by == "noisy") {
        cfg.equalize_by = LabelChannel::Noisy;
      } else if (by == "clean") {
        cfg.equalize_by = LabelChannel::Clean;
      } else {
        bad(fmt::format("equalize_prior.by must be clean or noisy, got '{}'", by));
      }
    }
  }
  const std::size_t k = cfg.dataset.kind == DatasetKind::Blobs ? cfg.dataset.num_classes : 2;
  for (const NoiseSpec& n : cfg.noise) {
    if (cfg.dataset.kind != DatasetKind::Csv && (n.uniform ? n.k : 2) != k) {
      bad(fmt::format("noise for {} classes on a {}-class dataset", n.uniform ? n.k : 2, k));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<std::uint64_t> resolve_seeds(const ExperimentConfig& config, std::uint64_t master) {
  if (!config.seeds.empty()) return config.seeds;
  std::vector<std::uint64_t> out(config.seed_count);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = derive_seed(master, 0x5eed, i);
  return out;
}

}  // namespace peerloss
