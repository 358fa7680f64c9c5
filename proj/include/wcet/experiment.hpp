#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wcet/dataset.hpp"
#include "wcet/neuralnet.hpp"

namespace wcet::exp {

/// sqrt(mean((pred - target)^2)). Throws EmptyInput or LengthMismatch.
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// Reported RMSEs are either percent of the normalized label range (default)
/// or absolute cycles.
enum class RmseScale { NormalizedPercent, RawCycles };

/// Converts an RMSE measured on the normalized label scale.
double scale_rmse(double normalized_rmse, const data::NormStats& stats, RmseScale scale);

struct FoldResult {
  std::size_t fold = 0;
  double train_rmse = 0.0;  // normalized label scale
  double val_rmse = 0.0;
  data::NormStats stats;    // fitted on the training folds only
  nn::LearningCurve curve;
};

/// Seeds used for fold f of a cross-validation run with seed s: the split is
/// kfold_split(n, k, s); the fresh model uses init seed mix_seed(s, 2f + 1)
/// and shuffle seed mix_seed(s, 2f + 2). config.init_seed and
/// tc.shuffle_seed are ignored.
std::vector<FoldResult> cross_validate(const data::Dataset& dataset, const nn::NetworkConfig& config,
                                       const nn::TrainConfig& tc, std::size_t k, std::uint64_t seed);

struct GridSpec {
  std::vector<double> learning_rates = {0.001, 0.01, 0.03};
  /// Width shared by every hidden layer of a configuration.
  std::vector<std::size_t> hidden_widths = {16, 32, 64, 128};
  std::size_t hidden_layers = 3;
  std::size_t runs_per_config = 5;
  std::size_t folds = 5;
  std::uint64_t base_seed = 0;

  std::size_t config_count() const { return learning_rates.size() * hidden_widths.size(); }
};

/// Throws InvalidArgument for empty lists or non-positive entries.
void validate(const GridSpec& grid);
/// `{learning_rates:[...], hidden_widths:[...], runs_per_config, base_seed}`,
/// plus optional `folds` and `hidden_layers`.
GridSpec parse_grid_json(std::string_view text);
GridSpec load_grid(const std::filesystem::path& path);

struct ConfigId {
  double learning_rate = 0.0;
  std::size_t hidden_width = 0;

  friend bool operator==(const ConfigId&, const ConfigId&) = default;
};

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);

/// One RMSE observation. Rows with a fold come from a single
/// cross-validation fold; rows without one are per-run values (the fold mean
/// for train/validation, the held-out score for test) and are what the
/// min/avg/max aggregates range over.
struct RunRecord {
  std::size_t run = 0;
  std::optional<std::size_t> fold;
  Split split = Split::Train;
  double rmse = 0.0;                // normalized label scale
  double rmse_cycles = 0.0;
};

struct SplitStats {
  double min = 0.0;
  double avg = 0.0;
  double max = 0.0;
};

struct RunReport {
  ConfigId config;
  std::vector<RunRecord> records;
  SplitStats train, validation, test;  // normalized label scale
  /// One per run: the train-on-all model, with the test set as validation.
  std::vector<nn::LearningCurve> curves;

  const SplitStats& stats(Split split) const;
};

/// Min/mean/max over the per-run records of one split, on the requested
/// scale (percent for NormalizedPercent).
SplitStats aggregate(std::span<const RunRecord> records, Split split, RmseScale scale);

/// For every (lr, width) pair, in declaration order (lr outer), runs
/// runs_per_config seeded repetitions. Repetition r uses seed
/// mix_seed(base_seed, r) for a k-fold cross-validation (train/validation
/// rows) and for a final model trained on all of `dataset` and evaluated on
/// `test_set` (test rows). `net_template` supplies slope, L2 and output
/// activation; `tc_base` everything except the learning rate. `jobs` > 1
/// runs repetitions on worker threads; results do not depend on it.
std::vector<RunReport> run_grid(const data::Dataset& dataset, const data::Dataset& test_set,
                                const GridSpec& grid, const nn::TrainConfig& tc_base,
                                const nn::NetworkConfig& net_template = {}, std::size_t jobs = 1);

/// Lowest average validation RMSE; ties go to the lower average training
/// RMSE, then to the earlier report. Throws EmptyReports.
ConfigId select_best(std::span<const RunReport> reports);

/// `lr,width,split,min_rmse_pct,avg_rmse_pct,max_rmse_pct` (the `_pct`
/// suffix becomes `_cycles` on the raw scale).
std::string summary_csv(std::span<const RunReport> reports, RmseScale scale);
/// `lr,width,run,epoch,train_loss,val_loss`.
std::string curves_csv(std::span<const RunReport> reports);
/// `lr,width,run,fold,split,rmse_pct`: every record behind the summary; the
/// fold cell is empty on per-run rows.
std::string runs_csv(std::span<const RunReport> reports, RmseScale scale);

struct ReportPaths {
  std::filesystem::path summary;
  std::filesystem::path curves;
  std::optional<std::filesystem::path> runs;
};

/// Renders everything first, then writes each file atomically.
void emit_report(std::span<const RunReport> reports, const ReportPaths& paths,
                 RmseScale scale = RmseScale::NormalizedPercent);

struct Evaluation {
  std::size_t count = 0;
  double rmse = 0.0;         // normalized with the model's stored stats
  double rmse_cycles = 0.0;
};

/// Throws MissingNormStats or EmptyDataset.
Evaluation evaluate(const nn::ModelParams& params, const data::Dataset& dataset);

/// Batch size matching the corpus scale: 10 below 100 samples, 40 otherwise.
std::size_t default_batch_size(std::size_t sample_count);
/// Learning rate matching the corpus scale: 0.01 below 100 samples, 0.03 otherwise.
double default_learning_rate(std::size_t sample_count);

}  // namespace wcet::exp
