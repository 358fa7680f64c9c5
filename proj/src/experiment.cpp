#include "wcet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wcet/error.hpp"
#include "wcet/fileio.hpp"
#include "wcet/random.hpp"

namespace wcet::exp {
namespace {

using io::format_double;

struct Repetition {
  std::vector<FoldResult> folds;
  double test_rmse = 0.0;
  double test_rmse_cycles = 0.0;
  nn::LearningCurve curve;
};

nn::NetworkConfig config_for(const nn::NetworkConfig& net_template, const GridSpec& grid,
                             std::size_t width) {
  nn::NetworkConfig config = net_template;
  config.hidden_widths.assign(grid.hidden_layers, width);
  return config;
}

Repetition run_repetition(const data::Dataset& dataset, const data::Dataset& test_set,
                          const nn::NetworkConfig& config, const nn::TrainConfig& tc,
                          std::size_t folds, std::uint64_t seed) {
  Repetition rep;
  rep.folds = cross_validate(dataset, config, tc, folds, seed);

  const data::NormStats stats = data::fit_norm(dataset);
  const nn::TrainingRows train_rows = nn::normalize_rows(dataset, stats);
  const nn::TrainingRows test_rows = nn::normalize_rows(test_set, stats);
  nn::NetworkConfig final_config = config;
  final_config.init_seed = mix_seed(seed, 0);
  nn::TrainConfig final_tc = tc;
  final_tc.shuffle_seed = mix_seed(seed, std::numeric_limits<std::uint64_t>::max() - 1);
  nn::TrainResult trained = nn::train(train_rows, final_config, final_tc, &test_rows);
  rep.test_rmse = rmse(nn::predict_normalized(trained.params, test_rows.x), test_rows.y);
  rep.test_rmse_cycles = scale_rmse(rep.test_rmse, stats, RmseScale::RawCycles);
  rep.curve = std::move(trained.curve);
  return rep;
}

std::string rmse_columns(RmseScale scale) {
  const char* unit = scale == RmseScale::RawCycles ? "cycles" : "pct";
  std::string out;
  for (const char* stat : {"min", "avg", "max"}) {
    out += std::string(",") + stat + "_rmse_" + unit;
  }
  return out;
}

double scaled(const RunRecord& record, RmseScale scale) {
  return scale == RmseScale::RawCycles ? record.rmse_cycles : 100.0 * record.rmse;
}

SplitStats summarize(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  // The rounded mean of equal values can land one ulp outside [min, max].
  const double avg = std::clamp(sum / static_cast<double>(values.size()), *lo, *hi);
  return {*lo, avg, *hi};
}

SplitStats normalized_stats(std::span<const RunRecord> records, Split split) {
  std::vector<double> values;
  for (const auto& record : records) {
    if (record.split == split && !record.fold) values.push_back(record.rmse);
  }
  return summarize(values);
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || targets.empty()) throw Error(ErrorCode::EmptyInput, "rmse of an empty set");
  if (predictions.size() != targets.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                               std::to_string(targets.size()) + " targets");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double scale_rmse(double normalized_rmse, const data::NormStats& stats, RmseScale scale) {
  if (scale == RmseScale::NormalizedPercent) return 100.0 * normalized_rmse;
  return normalized_rmse * (stats.label_max - stats.label_min);
}

std::vector<FoldResult> cross_validate(const data::Dataset& dataset, const nn::NetworkConfig& config,
                                       const nn::TrainConfig& tc, std::size_t k, std::uint64_t seed) {
  const data::FoldAssignment folds = data::kfold_split(dataset.size(), k, seed);
  std::vector<FoldResult> results;
  results.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    const auto train_idx = folds.complement(f);
    const auto val_idx = folds.members(f);
    const data::Dataset train_set = dataset.subset(train_idx);
    const data::Dataset val_set = dataset.subset(val_idx);

    FoldResult result;
    result.fold = f;
    result.stats = data::fit_norm(train_set);
    const nn::TrainingRows train_rows = nn::normalize_rows(train_set, result.stats);
    const nn::TrainingRows val_rows = nn::normalize_rows(val_set, result.stats);

    nn::NetworkConfig fold_config = config;
    fold_config.init_seed = mix_seed(seed, 2 * f + 1);
    nn::TrainConfig fold_tc = tc;
    fold_tc.shuffle_seed = mix_seed(seed, 2 * f + 2);
    nn::TrainResult trained = nn::train(train_rows, fold_config, fold_tc, &val_rows);

    result.train_rmse = rmse(nn::predict_normalized(trained.params, train_rows.x), train_rows.y);
    result.val_rmse = rmse(nn::predict_normalized(trained.params, val_rows.x), val_rows.y);
    result.curve = std::move(trained.curve);
    results.push_back(std::move(result));
  }
  return results;
}

void validate(const GridSpec& grid) {
  if (grid.learning_rates.empty()) throw Error(ErrorCode::InvalidArgument, "grid has no learning rates");
  if (grid.hidden_widths.empty()) throw Error(ErrorCode::InvalidArgument, "grid has no hidden widths");
  for (double lr : grid.learning_rates) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw Error(ErrorCode::InvalidArgument, "learning rate " + format_double(lr) + " is not positive");
    }
  }
  for (std::size_t width : grid.hidden_widths) {
    if (width == 0) throw Error(ErrorCode::InvalidArgument, "hidden width must be positive");
  }
  if (grid.hidden_layers == 0) throw Error(ErrorCode::InvalidArgument, "hidden_layers must be positive");
  if (grid.runs_per_config == 0) throw Error(ErrorCode::InvalidArgument, "runs_per_config must be positive");
  if (grid.folds < 2) throw Error(ErrorCode::InvalidArgument, "folds must be at least 2");
}

GridSpec parse_grid_json(std::string_view text) {
  GridSpec grid;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "grid must be a JSON object");
    if (doc.contains("learning_rates")) grid.learning_rates = doc["learning_rates"].get<std::vector<double>>();
    if (doc.contains("hidden_widths")) grid.hidden_widths = doc["hidden_widths"].get<std::vector<std::size_t>>();
    if (doc.contains("runs_per_config")) grid.runs_per_config = doc["runs_per_config"].get<std::size_t>();
    if (doc.contains("base_seed")) grid.base_seed = doc["base_seed"].get<std::uint64_t>();
    if (doc.contains("folds")) grid.folds = doc["folds"].get<std::size_t>();
    if (doc.contains("hidden_layers")) grid.hidden_layers = doc["hidden_layers"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("grid: ") + e.what());
  }
  validate(grid);
  return grid;
}

GridSpec load_grid(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  try {
    return parse_grid_json(text);
  } catch (const Error& e) {
    throw e.in_context(path.string());
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

const SplitStats& RunReport::stats(Split split) const {
  switch (split) {
    case Split::Train: return train;
    case Split::Validation: return validation;
    case Split::Test: return test;
  }
  return train;
}

SplitStats aggregate(std::span<const RunRecord> records, Split split, RmseScale scale) {
  std::vector<double> values;
  for (const auto& record : records) {
    if (record.split == split && !record.fold) values.push_back(scaled(record, scale));
  }
  return summarize(values);
}

std::vector<RunReport> run_grid(const data::Dataset& dataset, const data::Dataset& test_set,
                                const GridSpec& grid, const nn::TrainConfig& tc_base,
                                const nn::NetworkConfig& net_template, std::size_t jobs) {
  validate(grid);
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "test dataset is empty");

  std::vector<ConfigId> configs;
  for (double lr : grid.learning_rates) {
    for (std::size_t width : grid.hidden_widths) configs.push_back({lr, width});
  }
  const std::size_t runs = grid.runs_per_config;
  const std::size_t task_count = configs.size() * runs;
  std::vector<Repetition> results(task_count);
  std::vector<std::exception_ptr> failures(task_count);

  auto run_task = [&](std::size_t task) {
    const ConfigId& id = configs[task / runs];
    const std::size_t run = task % runs;
    nn::TrainConfig tc = tc_base;
    tc.learning_rate = id.learning_rate;
    try {
      results[task] = run_repetition(dataset, test_set, config_for(net_template, grid, id.hidden_width),
                                     tc, grid.folds, mix_seed(grid.base_seed, run));
    } catch (...) {
      failures[task] = std::current_exception();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, task_count);
  if (workers == 1) {
    for (std::size_t task = 0; task < task_count; ++task) run_task(task);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t task = next++; task < task_count; task = next++) run_task(task);
      });
    }
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<RunReport> reports;
  reports.reserve(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    RunReport report;
    report.config = configs[c];
    for (std::size_t run = 0; run < runs; ++run) {
      Repetition& rep = results[c * runs + run];
      RunRecord train_mean{run, std::nullopt, Split::Train, 0.0, 0.0};
      RunRecord val_mean{run, std::nullopt, Split::Validation, 0.0, 0.0};
      for (const auto& fold : rep.folds) {
        const double range = fold.stats.label_max - fold.stats.label_min;
        report.records.push_back({run, fold.fold, Split::Train, fold.train_rmse, fold.train_rmse * range});
        report.records.push_back({run, fold.fold, Split::Validation, fold.val_rmse, fold.val_rmse * range});
        train_mean.rmse += fold.train_rmse;
        train_mean.rmse_cycles += fold.train_rmse * range;
        val_mean.rmse += fold.val_rmse;
        val_mean.rmse_cycles += fold.val_rmse * range;
      }
      const double k = static_cast<double>(rep.folds.size());
      for (RunRecord* r : {&train_mean, &val_mean}) {
        r->rmse /= k;
        r->rmse_cycles /= k;
        report.records.push_back(*r);
      }
      report.records.push_back({run, std::nullopt, Split::Test, rep.test_rmse, rep.test_rmse_cycles});
      report.curves.push_back(std::move(rep.curve));
    }
    report.train = normalized_stats(report.records, Split::Train);
    report.validation = normalized_stats(report.records, Split::Validation);
    report.test = normalized_stats(report.records, Split::Test);
    reports.push_back(std::move(report));
  }
  return reports;
}

ConfigId select_best(std::span<const RunReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyReports, "no reports to choose from");
  const RunReport* best = &reports.front();
  for (const auto& report : reports.subspan(1)) {
    const bool better_val = report.validation.avg < best->validation.avg;
    const bool tie_val = report.validation.avg == best->validation.avg;
    if (better_val || (tie_val && report.train.avg < best->train.avg)) best = &report;
  }
  return best->config;
}

std::string summary_csv(std::span<const RunReport> reports, RmseScale scale) {
  std::ostringstream out;
  out << "lr,width,split" << rmse_columns(scale) << '\n';
  for (const auto& report : reports) {
    for (Split split : {Split::Train, Split::Validation, Split::Test}) {
      const SplitStats stats = aggregate(report.records, split, scale);
      out << format_double(report.config.learning_rate) << ',' << report.config.hidden_width << ','
          << to_string(split) << ',' << format_double(stats.min) << ',' << format_double(stats.avg)
          << ',' << format_double(stats.max) << '\n';
    }
  }
  return out.str();
}

std::string curves_csv(std::span<const RunReport> reports) {
  std::ostringstream out;
  out << "lr,width,run,epoch,train_loss,val_loss\n";
  for (const auto& report : reports) {
    for (std::size_t run = 0; run < report.curves.size(); ++run) {
      for (const auto& epoch : report.curves[run].epochs) {
        out << format_double(report.config.learning_rate) << ',' << report.config.hidden_width << ','
            << run << ',' << epoch.epoch << ',' << format_double(epoch.train_loss) << ',';
        if (epoch.val_loss) out << format_double(*epoch.val_loss);
        out << '\n';
      }
    }
  }
  return out.str();
}

std::string runs_csv(std::span<const RunReport> reports, RmseScale scale) {
  std::ostringstream out;
  out << "lr,width,run,fold,split," << (scale == RmseScale::RawCycles ? "rmse_cycles" : "rmse_pct") << '\n';
  for (const auto& report : reports) {
    for (const auto& record : report.records) {
      out << format_double(report.config.learning_rate) << ',' << report.config.hidden_width << ','
          << record.run << ',';
      if (record.fold) out << *record.fold;
      out << ',' << to_string(record.split) << ',' << format_double(scaled(record, scale)) << '\n';
    }
  }
  return out.str();
}

void emit_report(std::span<const RunReport> reports, const ReportPaths& paths, RmseScale scale) {
  if (reports.empty()) throw Error(ErrorCode::EmptyReports, "nothing to report");
  const std::string summary = summary_csv(reports, scale);
  const std::string curves = curves_csv(reports);
  const std::string runs = paths.runs ? runs_csv(reports, scale) : std::string();
  io::write_file_atomic(paths.summary, summary);
  io::write_file_atomic(paths.curves, curves);
  if (paths.runs) io::write_file_atomic(*paths.runs, runs);
}

Evaluation evaluate(const nn::ModelParams& params, const data::Dataset& dataset) {
  if (!params.norm_stats) throw Error(ErrorCode::MissingNormStats, "model carries no normalization statistics");
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  const nn::TrainingRows rows = nn::normalize_rows(dataset, *params.norm_stats);
  Evaluation eval;
  eval.count = dataset.size();
  eval.rmse = rmse(nn::predict_normalized(params, rows.x), rows.y);
  eval.rmse_cycles = scale_rmse(eval.rmse, *params.norm_stats, RmseScale::RawCycles);
  return eval;
}

std::size_t default_batch_size(std::size_t sample_count) { return sample_count < 100 ? 10 : 40; }

double default_learning_rate(std::size_t sample_count) { return sample_count < 100 ? 0.01 : 0.03; }

}  // namespace wcet::exp
