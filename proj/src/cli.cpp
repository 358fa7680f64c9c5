#include "wcet/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wcet/dataset.hpp"
#include "wcet/error.hpp"
#include "wcet/experiment.hpp"
#include "wcet/fileio.hpp"
#include "wcet/neuralnet.hpp"
#include "wcet/random.hpp"
#include "wcet/vmir.hpp"

namespace wcet::cli {
namespace {

namespace fs = std::filesystem;
using io::format_double;

/// Flags shared by the training-driven commands.
struct TrainingFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
};

void add_training_flags(CLI::App& cmd, TrainingFlags& flags) {
  cmd.add_option("--config", flags.config, "Network/training config JSON");
  cmd.add_option("--seed", flags.seed, "Seed for initialization and shuffling");
  cmd.add_option("--epochs", flags.epochs, "Training epochs");
  cmd.add_option("--lr", flags.lr, "Adam learning rate");
  cmd.add_option("--batch", flags.batch, "Mini-batch size");
}

/// Network and training settings resolved from defaults, an optional JSON
/// config and the command-line overrides, in that order.
struct Settings {
  nn::NetworkConfig network;
  nn::TrainConfig training;
  std::uint64_t seed = 0;
};

Settings resolve_settings(const TrainingFlags& flags, std::size_t sample_count) {
  Settings s;
  s.training.learning_rate = exp::default_learning_rate(sample_count);
  s.training.batch_size = exp::default_batch_size(sample_count);
  if (flags.config) {
    const std::string text = io::read_file(*flags.config);
    try {
      const auto doc = nlohmann::json::parse(text);
      auto& net = s.network;
      auto& tc = s.training;
      if (doc.contains("hidden_widths")) net.hidden_widths = doc["hidden_widths"].get<std::vector<std::size_t>>();
      if (doc.contains("leaky_slope")) net.leaky_slope = doc["leaky_slope"].get<double>();
      if (doc.contains("l2_beta")) net.l2_beta = doc["l2_beta"].get<double>();
      if (doc.contains("output_activation")) {
        net.output_activation = nn::parse_output_activation(doc["output_activation"].get<std::string>());
      }
      if (doc.contains("learning_rate")) tc.learning_rate = doc["learning_rate"].get<double>();
      if (doc.contains("epochs")) tc.epochs = doc["epochs"].get<std::size_t>();
      if (doc.contains("batch_size")) tc.batch_size = doc["batch_size"].get<std::size_t>();
      if (doc.contains("beta1")) tc.beta1 = doc["beta1"].get<double>();
      if (doc.contains("beta2")) tc.beta2 = doc["beta2"].get<double>();
      if (doc.contains("epsilon")) tc.epsilon = doc["epsilon"].get<double>();
      if (doc.contains("seed")) s.seed = doc["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, *flags.config + ": " + e.what());
    }
  }
  if (flags.seed) s.seed = *flags.seed;
  if (flags.epochs) s.training.epochs = *flags.epochs;
  if (flags.lr) s.training.learning_rate = *flags.lr;
  if (flags.batch) s.training.batch_size = *flags.batch;
  if (!(s.training.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "--lr must be positive");
  if (s.training.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "--batch must be at least 1");
  s.network.init_seed = mix_seed(s.seed, 0);
  s.training.shuffle_seed = mix_seed(s.seed, 1);
  return s;
}

std::string curve_csv(const nn::LearningCurve& curve) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : curve.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',';
    if (e.val_loss) out << format_double(*e.val_loss);
    out << '\n';
  }
  return out.str();
}

fs::path runs_path_for(const fs::path& summary) {
  fs::path runs = summary;
  runs.replace_extension(".runs.csv");
  return runs;
}

// ---------------------------------------------------------------------------

int cmd_extract(const std::vector<std::string>& inputs, const std::optional<std::string>& out_path,
                std::ostream& out, std::ostream& err) {
  std::vector<fs::path> paths(inputs.begin(), inputs.end());
  const auto rows = vmir::extract_features_batch(paths);
  const std::string csv = vmir::features_to_csv(rows);
  if (out_path) {
    io::write_file_atomic(*out_path, csv);
    err << "extracted " << rows.size() << " program(s) into " << *out_path << '\n';
  } else {
    out << csv;
  }
  return kOk;
}

int cmd_synth(const std::optional<std::string>& cost_path, std::size_t count,
              const std::optional<std::uint64_t>& seed, const std::string& out_dir,
              const std::string& prefix, std::ostream& err) {
  data::CostModel model = cost_path ? data::load_cost_model(*cost_path) : data::default_cost_model();
  const std::uint64_t effective_seed = seed.value_or(model.seed);
  const data::Corpus corpus = data::synthesize_corpus(count, effective_seed, model, prefix);

  // Render everything before touching the output directory.
  std::vector<std::pair<fs::path, std::string>> files;
  for (const auto& program : corpus.programs) {
    files.emplace_back(fs::path(out_dir) / (program.name + ".vmir"), vmir::render_program(program));
  }
  files.emplace_back(fs::path(out_dir) / "dataset.csv", data::dataset_to_csv(corpus.dataset));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create directory '" + out_dir + "': " + ec.message());
  for (const auto& [path, content] : files) io::write_file_atomic(path, content);
  err << "synthesized " << count << " program(s) with seed " << effective_seed << " into " << out_dir << '\n';
  return kOk;
}

int cmd_train(const std::string& dataset_path, const std::string& model_path,
              const std::optional<std::string>& curve_path, const TrainingFlags& flags,
              std::ostream& err) {
  const data::Dataset dataset = data::load_dataset(dataset_path);
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, dataset_path + ": no samples");
  const Settings s = resolve_settings(flags, dataset.size());

  const data::NormStats stats = data::fit_norm(dataset);
  const nn::TrainingRows rows = nn::normalize_rows(dataset, stats);
  nn::TrainResult trained = nn::train(rows, s.network, s.training);
  trained.params.norm_stats = stats;

  const auto eval = exp::evaluate(trained.params, dataset);
  const std::string model_json = nn::model_to_json(trained.params);
  io::write_file_atomic(model_path, model_json);
  if (curve_path) io::write_file_atomic(*curve_path, curve_csv(trained.curve));

  err << "trained on " << dataset.size() << " samples: lr " << format_double(s.training.learning_rate)
      << ", batch " << s.training.batch_size << ", epochs " << s.training.epochs << '\n'
      << "train RMSE " << format_double(100.0 * eval.rmse) << "% (normalized), "
      << format_double(eval.rmse_cycles) << " cycles\n";
  return kOk;
}

int cmd_cv(const std::string& dataset_path, std::size_t folds, const std::optional<std::string>& out_path,
           bool raw, const TrainingFlags& flags, std::ostream& out, std::ostream& err) {
  const data::Dataset dataset = data::load_dataset(dataset_path);
  const Settings s = resolve_settings(flags, dataset.size());
  const auto results = exp::cross_validate(dataset, s.network, s.training, folds, s.seed);
  const auto scale = raw ? exp::RmseScale::RawCycles : exp::RmseScale::NormalizedPercent;
  const char* unit = raw ? "cycles" : "pct";

  std::ostringstream csv;
  csv << "fold,train_rmse_" << unit << ",val_rmse_" << unit << '\n';
  double train_sum = 0.0;
  double val_sum = 0.0;
  for (const auto& r : results) {
    const double train = exp::scale_rmse(r.train_rmse, r.stats, scale);
    const double val = exp::scale_rmse(r.val_rmse, r.stats, scale);
    train_sum += train;
    val_sum += val;
    csv << r.fold << ',' << format_double(train) << ',' << format_double(val) << '\n';
  }
  if (out_path) {
    io::write_file_atomic(*out_path, csv.str());
  } else {
    out << csv.str();
  }
  const double k = static_cast<double>(results.size());
  err << folds << "-fold CV: mean train RMSE " << format_double(train_sum / k) << ' ' << unit
      << ", mean validation RMSE " << format_double(val_sum / k) << ' ' << unit << '\n';
  return kOk;
}

int cmd_grid(const std::string& dataset_path, const std::string& test_path,
             const std::optional<std::string>& grid_path, const std::string& out_path,
             const std::string& curve_path, std::size_t jobs, bool raw,
             const std::optional<std::size_t>& folds, const TrainingFlags& flags, std::ostream& out,
             std::ostream& err) {
  exp::GridSpec grid = grid_path ? exp::load_grid(*grid_path) : exp::GridSpec{};
  if (flags.seed) grid.base_seed = *flags.seed;
  if (folds) grid.folds = *folds;
  exp::validate(grid);
  const data::Dataset dataset = data::load_dataset(dataset_path);
  const data::Dataset test_set = data::load_dataset(test_path);
  const Settings s = resolve_settings(flags, dataset.size());

  const auto reports = exp::run_grid(dataset, test_set, grid, s.training, s.network, jobs);
  const auto scale = raw ? exp::RmseScale::RawCycles : exp::RmseScale::NormalizedPercent;
  exp::emit_report(reports, {out_path, curve_path, runs_path_for(out_path)}, scale);

  const exp::ConfigId best = exp::select_best(reports);
  err << "ran " << reports.size() << " configuration(s) x " << grid.runs_per_config << " run(s)\n";
  err << "best: lr " << format_double(best.learning_rate) << ", width " << best.hidden_width << '\n';
  out << "best_lr,best_width\n" << format_double(best.learning_rate) << ',' << best.hidden_width << '\n';
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_path, std::ostream& out,
             std::ostream& err) {
  const nn::ModelParams params = nn::load_model(model_path);
  const data::Dataset dataset = data::load_dataset(dataset_path);
  const auto eval = exp::evaluate(params, dataset);
  out << "count,rmse_pct,rmse_cycles\n"
      << eval.count << ',' << format_double(100.0 * eval.rmse) << ',' << format_double(eval.rmse_cycles)
      << '\n';
  err << "evaluated " << eval.count << " sample(s)\n";
  return kOk;
}

int cmd_predict(const std::string& model_path, const std::vector<std::string>& programs,
                std::ostream& out) {
  const nn::ModelParams params = nn::load_model(model_path);
  std::vector<fs::path> paths(programs.begin(), programs.end());
  const auto rows = vmir::extract_features_batch(paths);
  std::ostringstream csv;
  csv << "name";
  for (auto column : vmir::kFeatureNames) csv << ',' << column;
  csv << ",predicted_cycles\n";
  for (const auto& row : rows) {
    csv << row.name;
    for (auto count : row.features.counts()) csv << ',' << count;
    csv << ',' << format_double(nn::predict(params, row.features)) << '\n';
  }
  out << csv.str();
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidArgument: return kUsage;
    case ErrorCode::NumericFailure: return kNumericFailure;
    default: return kDataError;
  }
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early WCET estimation from static virtual-instruction counts", "wcet_cli"};
  app.require_subcommand(1);

  std::optional<std::string> out_path;

  auto* extract = app.add_subcommand("extract", "Count instruction categories of VMIR files");
  std::vector<std::string> extract_inputs;
  extract->add_option("inputs", extract_inputs, "VMIR files")->required();
  extract->add_option("--out", out_path, "Feature CSV (default: stdout)");

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  std::optional<std::string> cost_path;
  std::size_t synth_count = 0;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out;
  std::string synth_prefix = "synth_";
  synth->add_option("--config", cost_path, "Cost-model JSON (default: built-in model)");
  synth->add_option("--count", synth_count, "Number of programs")->required();
  synth->add_option("--seed", synth_seed, "Seed (overrides the cost model's seed)");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--prefix", synth_prefix, "Program name prefix");

  std::string dataset_path;
  std::string model_path;
  std::optional<std::string> curve_path;
  TrainingFlags training;
  bool raw = false;

  auto* train = app.add_subcommand("train", "Train a model on a labeled CSV");
  train->add_option("--dataset", dataset_path, "Labeled CSV")->required();
  train->add_option("--model", model_path, "Model JSON to write")->required();
  train->add_option("--curve", curve_path, "Learning-curve CSV to write");
  add_training_flags(*train, training);

  auto* cv = app.add_subcommand("cv", "k-fold cross-validation");
  std::size_t cv_folds = 5;
  cv->add_option("--dataset", dataset_path, "Labeled CSV")->required();
  cv->add_option("--folds", cv_folds, "Fold count");
  cv->add_option("--out", out_path, "Per-fold CSV (default: stdout)");
  cv->add_flag("--raw-rmse", raw, "Report RMSE in cycles");
  add_training_flags(*cv, training);

  auto* grid = app.add_subcommand("grid", "Hyperparameter grid with repeated cross-validation");
  std::string test_path;
  std::optional<std::string> grid_path;
  std::string grid_out;
  std::string grid_curve;
  std::size_t jobs = 1;
  std::optional<std::size_t> grid_folds;
  grid->add_option("--dataset", dataset_path, "Labeled training CSV")->required();
  grid->add_option("--test", test_path, "Labeled test CSV")->required();
  grid->add_option("--grid", grid_path, "Grid JSON (default: 3 learning rates x 4 widths)");
  grid->add_option("--out", grid_out, "Summary CSV")->required();
  grid->add_option("--curve", grid_curve, "Learning-curve CSV")->required();
  grid->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  grid->add_option("--folds", grid_folds, "Fold count (overrides the grid file)");
  grid->add_flag("--raw-rmse", raw, "Report RMSE in cycles");
  add_training_flags(*grid, training);

  auto* eval = app.add_subcommand("eval", "RMSE of a model on a labeled CSV");
  eval->add_option("--model", model_path, "Model JSON")->required();
  eval->add_option("--dataset", dataset_path, "Labeled CSV")->required();

  auto* predict = app.add_subcommand("predict", "Predict cycles for VMIR programs");
  std::vector<std::string> predict_inputs;
  predict->add_option("--model", model_path, "Model JSON")->required();
  predict->add_option("programs", predict_inputs, "VMIR files")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << "\n\n";
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kUsage;
  }

  try {
    if (*extract) return cmd_extract(extract_inputs, out_path, out, err);
    if (*synth) return cmd_synth(cost_path, synth_count, synth_seed, synth_out, synth_prefix, err);
    if (*train) return cmd_train(dataset_path, model_path, curve_path, training, err);
    if (*cv) return cmd_cv(dataset_path, cv_folds, out_path, raw, training, out, err);
    if (*grid) {
      return cmd_grid(dataset_path, test_path, grid_path, grid_out, grid_curve, jobs, raw, grid_folds,
                      training, out, err);
    }
    if (*eval) return cmd_eval(model_path, dataset_path, out, err);
    if (*predict) return cmd_predict(model_path, predict_inputs, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << app.help();
  return kUsage;
}

}  // namespace wcet::cli
