#include "wcet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>

#include "wcet/error.hpp"
#include "wcet/fileio.hpp"
#include "wcet/random.hpp"

namespace wcet::data {
namespace {

std::optional<std::uint64_t> parse_count(std::string_view cell) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_real(std::string_view cell) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
  return value;
}

double scale(double value, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return (value - lo) / (hi - lo);
}

}  // namespace

Dataset::Dataset(std::vector<Sample> samples) {
  samples_.reserve(samples.size());
  for (auto& sample : samples) add(std::move(sample));
}

void Dataset::add(Sample sample) {
  if (!(sample.cycles > 0.0) || !std::isfinite(sample.cycles)) {
    throw Error(ErrorCode::NonPositiveLabel,
                "sample '" + sample.name + "' has cycles " + io::format_double(sample.cycles));
  }
  if (!names_.insert(sample.name).second) {
    throw Error(ErrorCode::DuplicateName, "duplicate sample name '" + sample.name + "'");
  }
  samples_.push_back(std::move(sample));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.samples_.reserve(indices.size());
  for (std::size_t i : indices) out.add(samples_.at(i));
  return out;
}

Dataset parse_dataset_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;

  auto next_record = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      if (!io::trim(out).empty()) return true;
    }
    return false;
  };

  if (!next_record(line)) throw Error(ErrorCode::SchemaMismatch, "missing header (expected column 'name')");
  const auto header = io::split_csv_line(line);
  auto column_index = [&](std::string_view column) {
    auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) {
      throw Error(ErrorCode::SchemaMismatch, "missing column '" + std::string(column) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t name_col = column_index("name");
  std::array<std::size_t, kCategoryCount> feature_cols{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) feature_cols[i] = column_index(vmir::kFeatureNames[i]);
  const std::size_t cycles_col = column_index("cycles");

  Dataset dataset;
  while (next_record(line)) {
    const auto cells = io::split_csv_line(line);
    const std::string where = "line " + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::SchemaMismatch, where + ": expected " + std::to_string(header.size()) +
                                                 " cells, found " + std::to_string(cells.size()));
    }
    Sample sample;
    sample.name = cells[name_col];
    if (sample.name.empty()) throw Error(ErrorCode::SchemaMismatch, where + ": empty 'name'");
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
      auto count = parse_count(cells[feature_cols[i]]);
      if (!count) {
        throw Error(ErrorCode::SchemaMismatch, where + ": column '" +
                                                   std::string(vmir::kFeatureNames[i]) +
                                                   "' is not a non-negative integer");
      }
      sample.features[i] = *count;
    }
    auto cycles = parse_real(cells[cycles_col]);
    if (!cycles) throw Error(ErrorCode::SchemaMismatch, where + ": column 'cycles' is not a number");
    sample.cycles = *cycles;
    if (!(sample.cycles > 0.0) || !std::isfinite(sample.cycles)) {
      throw Error(ErrorCode::NonPositiveLabel, where + ": cycles must be positive, got '" +
                                                   cells[cycles_col] + "'");
    }
    dataset.add(std::move(sample));
  }
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& path) {
  try {
    return parse_dataset_csv(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoFailure) throw;
    throw e.in_context(path.string());
  }
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  out << "name";
  for (auto column : vmir::kFeatureNames) out << ',' << column;
  out << ",cycles\n";
  for (const auto& sample : dataset.samples()) {
    out << sample.name;
    for (auto count : sample.features.counts()) out << ',' << count;
    out << ',' << io::format_double(sample.cycles) << '\n';
  }
  return out.str();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  io::write_file_atomic(path, dataset_to_csv(dataset));
}

NormStats fit_norm(const Dataset& train) {
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit normalization on an empty dataset");
  NormStats stats;
  const Sample& first = train[0];
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    stats.feature_min[i] = stats.feature_max[i] = static_cast<double>(first.features[i]);
  }
  stats.label_min = stats.label_max = first.cycles;
  for (const auto& sample : train.samples()) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
      const double v = static_cast<double>(sample.features[i]);
      stats.feature_min[i] = std::min(stats.feature_min[i], v);
      stats.feature_max[i] = std::max(stats.feature_max[i], v);
    }
    stats.label_min = std::min(stats.label_min, sample.cycles);
    stats.label_max = std::max(stats.label_max, sample.cycles);
  }
  return stats;
}

FeatureRow normalize_features(const NormStats& stats, const FeatureVector& features) {
  FeatureRow row{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    row[i] = scale(static_cast<double>(features[i]), stats.feature_min[i], stats.feature_max[i]);
  }
  return row;
}

double normalize_label(const NormStats& stats, double cycles) {
  return scale(cycles, stats.label_min, stats.label_max);
}

double denorm_label(const NormStats& stats, double y_norm) {
  return y_norm * (stats.label_max - stats.label_min) + stats.label_min;
}

NormalizedSample apply_norm(const NormStats& stats, const Sample& sample) {
  return {normalize_features(stats, sample.features), normalize_label(stats, sample.cycles)};
}

std::vector<std::size_t> FoldAssignment::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldAssignment kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw Error(ErrorCode::BadFoldCount,
                "need 1 < k <= n, got k=" + std::to_string(k) + " n=" + std::to_string(n));
  }
  Rng rng(seed);
  const auto order = rng.permutation(n);
  FoldAssignment folds;
  folds.fold_count = k;
  folds.fold_of.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) folds.fold_of[order[pos]] = pos % k;
  return folds;
}

}  // namespace wcet::data
