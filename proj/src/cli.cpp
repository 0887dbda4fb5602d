#include "peerloss/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <fmt/core.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "peerloss/data.hpp"
#include "peerloss/error.hpp"
#include "peerloss/harness.hpp"
#include "peerloss/model.hpp"
#include "peerloss/noise.hpp"
#include "peerloss/oracle.hpp"

namespace peerloss {

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

// Shortest round-trip text that always reads as a real number.
std::string real(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".enia") == std::string::npos) s += ".0";
  return s;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void configure_logging(std::ostream& err) {
  const char* env = std::getenv("PEERLOSS_LOG");
  const std::string level = env ? env : "error";
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("peerloss", sink);
  logger->set_pattern("[%l] %v");
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "info") {
    logger->set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    throw UsageError("PEERLOSS_LOG must be error, info or debug, got '" + level + "'");
  }
  spdlog::set_default_logger(logger);
}

void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out) {
  if (path) {
    write_text(*path, text);
  } else {
    out << text;
  }
}

SplitTag parse_split(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  throw UsageError("split must be train, val or test");
}

CsvOptions csv_options(const std::string& label_column, const std::string& encoding,
                       const std::optional<std::string>& noisy_column,
                       const std::optional<std::string>& split_column) {
  CsvOptions o;
  o.label_column = label_column;
  o.encoding = encoding == "zero_based" ? LabelEncoding::ZeroBased : LabelEncoding::Pm1;
  o.noisy_column = noisy_column;
  o.split_column = split_column;
  return o;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning with noisy labels via peer loss: data, training, evaluation and exact verification.",
               "peerloss"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  std::uint64_t seed = 0;
  std::string config_path;
  std::optional<std::string> out_path;
  std::size_t jobs = 1;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  std::string gen_kind = "twonorm";
  std::size_t gen_n = 1000, gen_d = 20, gen_classes = 3;
  double r_in = 0.5, r_out = 1.0, jitter = 0.05, separation = 3.0;
  gen->add_option("--kind", gen_kind, "twonorm, circles or blobs")
      ->check(CLI::IsMember({"twonorm", "circles", "blobs"}))->capture_default_str();
  gen->add_option("--n", gen_n, "Rows per class (twonorm, blobs) or total rows (circles)")->capture_default_str();
  gen->add_option("--d", gen_d, "Feature dimension (twonorm, blobs)")->capture_default_str();
  gen->add_option("--classes", gen_classes, "Number of classes (blobs)")->capture_default_str();
  gen->add_option("--radius-inner", r_in, "Inner ring radius (circles)")->capture_default_str();
  gen->add_option("--radius-outer", r_out, "Outer ring radius (circles)")->capture_default_str();
  gen->add_option("--jitter", jitter, "Radial noise standard deviation (circles)")->capture_default_str();
  gen->add_option("--separation", separation, "Distance of blob means from the origin")->capture_default_str();
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--out", out_path, "Output CSV path")->required();

  // inject-noise
  auto* inject = app.add_subcommand("inject-noise", "Flip the labels of a CSV dataset");
  std::string in_path, label_column = "label", encoding = "pm1";
  std::optional<double> e_minus, e_plus, epsilon;
  std::optional<std::size_t> noise_k;
  inject->add_option("--in", in_path, "Input CSV path")->required();
  inject->add_option("--label-column", label_column, "Clean label column")->capture_default_str();
  inject->add_option("--encoding", encoding, "Label encoding: pm1 or zero_based")
      ->check(CLI::IsMember({"pm1", "zero_based"}))->capture_default_str();
  inject->add_option("--e-minus", e_minus, "P(noisy = +1 | clean = -1)");
  inject->add_option("--e-plus", e_plus, "P(noisy = -1 | clean = +1)");
  inject->add_option("--k", noise_k, "Classes for uniform K-class noise");
  inject->add_option("--epsilon", epsilon, "Total flip probability for uniform K-class noise");
  inject->add_option("--seed", seed, "Random seed")->required();
  inject->add_option("--out", out_path, "Output CSV path")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model from a config (first noise, loss and seed)");
  std::optional<std::string> curves_path;
  train_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train_cmd->add_option("--seed", seed, "Master seed")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint output path")->required();
  train_cmd->add_option("--curves", curves_path, "Per-epoch curves CSV output path");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Clean-label accuracy of a checkpoint on a CSV dataset");
  std::string model_path, data_path, split_name;
  std::optional<std::string> split_column;
  eval_cmd->add_option("--model", model_path, "Checkpoint path")->required();
  eval_cmd->add_option("--data", data_path, "CSV dataset path")->required();
  eval_cmd->add_option("--label-column", label_column, "Clean label column")->capture_default_str();
  eval_cmd->add_option("--encoding", encoding, "Label encoding: pm1 or zero_based")
      ->check(CLI::IsMember({"pm1", "zero_based"}))->capture_default_str();
  eval_cmd->add_option("--split-column", split_column, "Column holding train/val/test tags");
  eval_cmd->add_option("--split", split_name, "Evaluate only rows with this tag (train, val, test)");

  // sweep-alpha
  auto* sweep = app.add_subcommand("sweep-alpha", "Tune the peer weight on noisy validation labels");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--seed", seed, "Master seed")->required();
  sweep->add_option("--out", out_path, "Output CSV path (alpha, noisy_val_acc)");

  // run-table
  auto* table = app.add_subcommand("run-table", "Run every noise x loss row over all seeds");
  std::optional<std::string> curves_dir;
  table->add_option("--config", config_path, "Experiment config (JSON)")->required();
  table->add_option("--seed", seed, "Master seed")->required();
  table->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber)->capture_default_str();
  table->add_option("--out", out_path, "Results CSV output path");
  table->add_option("--curves-dir", curves_dir, "Directory for per-run curves CSVs");

  // boundary
  auto* boundary = app.add_subcommand("boundary", "Export a decision-boundary grid of a 2-d checkpoint");
  double x_min = -1.5, x_max = 1.5, y_min = -1.5, y_max = 1.5;
  std::size_t resolution = 100;
  boundary->add_option("--model", model_path, "Checkpoint path")->required();
  boundary->add_option("--x-min", x_min, "Grid x lower bound")->capture_default_str();
  boundary->add_option("--x-max", x_max, "Grid x upper bound")->capture_default_str();
  boundary->add_option("--y-min", y_min, "Grid y lower bound")->capture_default_str();
  boundary->add_option("--y-max", y_max, "Grid y upper bound")->capture_default_str();
  boundary->add_option("--resolution", resolution, "Points per axis")->check(CLI::PositiveNumber)->capture_default_str();
  boundary->add_option("--out", out_path, "Boundary CSV output path");

  // verify
  auto* verify = app.add_subcommand("verify", "Run exact-enumeration verification suites");
  std::string suite = "all";
  std::size_t instances = 0;
  verify->add_option("--suite", suite, "lemma2, thm2, thm3, thm4, prop-a1, multiclass, truthfulness, convexity or all")
      ->check(CLI::IsMember(suite_names()))->capture_default_str();
  verify->add_option("--seed", seed, "Random seed")->required();
  verify->add_option("--instances", instances, "Instances per suite (0 = suite default)")->capture_default_str();
  verify->add_option("--out", out_path, "Summary CSV output path");

  // alpha-star
  auto* astar = app.add_subcommand("alpha-star", "Closed-form optimal peer weight");
  double prior = 0.5;
  double em_value = 0.0, ep_value = 0.0;
  astar->add_option("--p", prior, "P(Y = +1)")->required();
  astar->add_option("--e-minus", em_value, "P(noisy = +1 | clean = -1)")->required();
  astar->add_option("--e-plus", ep_value, "P(noisy = -1 | clean = +1)")->required();

  // bound
  auto* bound = app.add_subcommand("bound", "Sample-complexity bound for alpha-weighted peer loss");
  double alpha = 1.0, delta = 0.05;
  std::size_t n_samples = 1000;
  bound->add_option("--alpha", alpha, "Peer weight")->required();
  bound->add_option("--e-minus", em_value, "P(noisy = +1 | clean = -1)")->required();
  bound->add_option("--e-plus", ep_value, "P(noisy = -1 | clean = +1)")->required();
  bound->add_option("--n", n_samples, "Training sample count")->required();
  bound->add_option("--delta", delta, "Failure probability")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    configure_logging(err);
    if (gen->parsed()) {
      LabeledDataset ds;
      if (gen_kind == "twonorm") {
        ds = gen_twonorm(gen_n, gen_d, seed);
      } else if (gen_kind == "circles") {
        ds = gen_circles(gen_n, r_in, r_out, jitter, seed);
      } else {
        ds = gen_blobs(gen_n, gen_classes, gen_d, separation, seed);
      }
      write_csv(*out_path, ds);
      out << fmt::format("wrote {} rows to {}\n", ds.n, *out_path);
    } else if (inject->parsed()) {
      const LabeledDataset ds = load_csv(in_path, csv_options(label_column, encoding, std::nullopt, std::nullopt));
      LabeledDataset noisy;
      if (epsilon || noise_k) {
        if (!epsilon || !noise_k || e_minus || e_plus) {
          throw UsageError("uniform noise needs --k and --epsilon without --e-minus/--e-plus");
        }
        noisy = flip_labels(ds, uniform_transition(*noise_k, *epsilon), seed);
      } else {
        if (!e_minus || !e_plus) throw UsageError("binary noise needs --e-minus and --e-plus");
        noisy = flip_labels(ds, make_noise_model(*e_minus, *e_plus), seed);
      }
      write_csv(*out_path, noisy);
      std::size_t flipped = 0;
      for (std::size_t i = 0; i < noisy.n; ++i) flipped += (*noisy.clean)[i] != (*noisy.noisy)[i];
      out << fmt::format("flipped {} of {} labels, wrote {}\n", flipped, noisy.n, *out_path);
    } else if (train_cmd->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const std::uint64_t run_seed = resolve_seeds(cfg, seed).front();
      const LabeledDataset ds = prepare_dataset(cfg, cfg.noise.front(), run_seed);
      const LossConfig& loss = cfg.losses.front();
      TrainOutcome run;
      if (loss.family == "peer" && loss.alpha.mode == AlphaMode::Tuned) {
        const LossSpec probe = resolve_loss(loss, cfg.noise.front(), ds);
        run = tune_alpha(cfg.train, probe.base, ds, loss.alpha.grid, run_seed).best;
      } else {
        run = train(cfg.train, resolve_loss(loss, cfg.noise.front(), ds), ds, run_seed);
      }
      save_checkpoint(*out_path, run.classifier);
      if (curves_path) write_text(*curves_path, format_curves_csv(run.result));
      out << fmt::format("loss {} alpha {} test accuracy {}\n", loss.family, real(run.result.alpha),
                         real(run.result.test_accuracy));
    } else if (eval_cmd->parsed()) {
      const Classifier c = load_checkpoint(model_path);
      LabeledDataset ds = load_csv(data_path, csv_options(label_column, encoding, std::nullopt, split_column));
      if (!split_name.empty()) {
        if (!split_column) throw UsageError("--split needs --split-column");
        ds = subset(ds, parse_split(split_name));
      }
      ds.split_tags.reset();
      out << real(evaluate(c, ds, SplitTag::Test)) << "\n";
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const std::uint64_t run_seed = resolve_seeds(cfg, seed).front();
      const NoiseSpec& noise = cfg.noise.front();
      const LabeledDataset ds = prepare_dataset(cfg, noise, run_seed);
      std::vector<double> grid = default_alpha_grid();
      std::optional<BaseLossKind> base;
      for (const LossConfig& l : cfg.losses) {
        if (l.family == "peer") {
          base = l.base;
          if (l.alpha.mode == AlphaMode::Tuned) grid = l.alpha.grid;
          break;
        }
      }
      const BaseLossKind kind = base.value_or(ds.num_classes > 2 ? BaseLossKind::CrossEntropyMulticlass
                                                                 : BaseLossKind::Logistic);
      const TuneResult tuned = tune_alpha(cfg.train, kind, ds, grid, run_seed);
      std::string csv = "alpha,noisy_val_acc\n";
      for (const auto& [a, acc] : tuned.table) csv += fmt::format("{},{}\n", a, acc);
      emit(out_path, csv, out);
      out << fmt::format("best alpha {} test accuracy {}\n", real(tuned.best_alpha),
                         real(tuned.best.result.test_accuracy));
    } else if (table->parsed()) {
      const ExperimentConfig cfg = load_config(config_path);
      const std::vector<TableRow> rows = run_table(cfg, seed, jobs);
      emit(out_path, format_table_csv(rows), out);
      if (curves_dir) {
        std::filesystem::create_directories(*curves_dir);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          for (const RunResult& run : rows[r].runs) {
            const std::string name = fmt::format("row{}_{}_seed{}.csv", r, rows[r].loss_family, run.seed);
            write_text((std::filesystem::path(*curves_dir) / name).string(), format_curves_csv(run));
          }
        }
      }
    } else if (boundary->parsed()) {
      const Classifier c = load_checkpoint(model_path);
      emit(out_path, format_boundary_csv(boundary_grid(c, {x_min, x_max}, {y_min, y_max}, resolution)), out);
    } else if (verify->parsed()) {
      const std::vector<SuiteReport> reports = run_suite(suite, seed, instances);
      out << format_report(reports);
      if (out_path) write_text(*out_path, format_report_csv(reports));
      for (const SuiteReport& r : reports) {
        if (!r.pass) return kDomainError;
      }
    } else if (astar->parsed()) {
      out << real(alpha_star(prior, make_noise_model(em_value, ep_value))) << "\n";
    } else if (bound->parsed()) {
      out << real(risk_bound(alpha, make_noise_model(em_value, ep_value), n_samples, delta)) << "\n";
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? kUsageError : kDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kOk;
}

}  // namespace peerloss
