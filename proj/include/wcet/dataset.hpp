#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "wcet/vmir.hpp"

namespace wcet::data {

using vmir::FeatureVector;
using vmir::kCategoryCount;

/// A feature row scaled by NormStats.
using FeatureRow = std::array<double, kCategoryCount>;

struct Sample {
  std::string name;
  FeatureVector features;
  double cycles = 0.0;
};

/// Ordered, name-unique collection of positively labeled samples.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Sample> samples);

  /// Throws NonPositiveLabel (cycles <= 0 or non-finite) or DuplicateName.
  void add(Sample sample);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const Sample> samples() const { return samples_; }

  /// Samples at `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Sample> samples_;
  std::unordered_set<std::string> names_;
};

/// Labeled CSV: `name,add,...,cmp,cycles`. Columns are located by header
/// name; unknown extra columns are ignored.
Dataset parse_dataset_csv(std::string_view text);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct NormStats {
  FeatureRow feature_min{};
  FeatureRow feature_max{};
  double label_min = 0.0;
  double label_max = 0.0;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Per-column extrema over `train` only. Throws EmptyDataset.
NormStats fit_norm(const Dataset& train);

/// (x - min) / (max - min); 0 for a constant column. Out-of-range inputs are
/// not clamped.
FeatureRow normalize_features(const NormStats& stats, const FeatureVector& features);
double normalize_label(const NormStats& stats, double cycles);
double denorm_label(const NormStats& stats, double y_norm);

struct NormalizedSample {
  FeatureRow x;
  double y;
};
NormalizedSample apply_norm(const NormStats& stats, const Sample& sample);

/// Fold id per sample index. Fold f holds the indices whose position in a
/// seeded Fisher-Yates permutation of 0..n-1 is congruent to f mod k, so the
/// first n mod k folds get one extra sample.
struct FoldAssignment {
  std::size_t fold_count = 0;
  std::vector<std::size_t> fold_of;

  /// Indices in fold f, ascending.
  std::vector<std::size_t> members(std::size_t fold) const;
  /// Indices outside fold f, ascending.
  std::vector<std::size_t> complement(std::size_t fold) const;
};

/// Requires 1 < k <= n, otherwise BadFoldCount.
FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// Synthetic stand-in for simulator measurements:
///   cycles = sum_i weights[i] * count_i
///          + interaction_coeff * count_load * count_jump
///          + N(0, noise_stddev)
struct CostModel {
  std::array<double, kCategoryCount> weights{};
  double interaction_coeff = 0.0;
  double noise_stddev = 0.0;
  std::uint64_t seed = 0;
};

CostModel default_cost_model();
/// Validates weights > 0 and noise_stddev >= 0 (InvalidArgument otherwise).
void validate(const CostModel& model);
/// JSON `{weights:[12], interaction_coeff, noise_stddev, seed}`; seed optional.
CostModel parse_cost_model_json(std::string_view text);
CostModel load_cost_model(const std::filesystem::path& path);

/// The noiseless part of the label.
double expected_cycles(const CostModel& model, const FeatureVector& features);

struct Corpus {
  Dataset dataset;
  std::vector<vmir::Program> programs;
};

/// Generates `count` random VMIR programs named `<prefix>NNNN` and labels
/// them with the cost model. Deterministic in `seed`. Throws InvalidArgument
/// when count == 0.
Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const CostModel& model,
                         std::string_view name_prefix = "synth_");

}  // namespace wcet::data
