#pragma once

// Fully connected regressor trained with mini-batch Adam on a mean squared
// error loss plus an L2 penalty on the weights (biases are not penalized).
// Every layer, including the output, applies Leaky ReLU unless the config
// asks for a linear output head.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wcet/dataset.hpp"

namespace wcet::nn {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class OutputActivation { LeakyRelu, Linear };

std::string_view to_string(OutputActivation activation);
OutputActivation parse_output_activation(std::string_view name);

struct NetworkConfig {
  std::size_t input_width = vmir::kCategoryCount;
  std::vector<std::size_t> hidden_widths = {32, 32, 32};
  std::size_t output_width = 1;
  double leaky_slope = 0.01;
  double l2_beta = 0.01;
  std::uint64_t init_seed = 0;
  OutputActivation output_activation = OutputActivation::LeakyRelu;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Throws BadShape unless input_width == 12, output_width == 1, every hidden
/// width is positive, 0 < leaky_slope < 1 and l2_beta >= 0.
void validate(const NetworkConfig& config);

struct ModelParams {
  NetworkConfig config;
  /// weights[l] is fan_out x fan_in.
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::optional<data::NormStats> norm_stats;
  /// Bumped by every adam_step; forward caches remember it.
  std::uint64_t revision = 0;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

/// Compares config, weights, biases and norm stats; ignores `revision`.
bool same_parameters(const ModelParams& a, const ModelParams& b);

/// Weights ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)), biases zero.
ModelParams init_network(const NetworkConfig& config);

inline double leaky_relu(double z, double slope) { return z >= 0.0 ? z : slope * z; }
/// Derivative, with f'(0) taken as 1.
inline double leaky_relu_grad(double z, double slope) { return z >= 0.0 ? 1.0 : slope; }

struct ForwardCache {
  /// activations[0] is the input batch; activations[l + 1] is layer l's output.
  std::vector<Matrix> activations;
  std::vector<Matrix> pre_activations;
  const ModelParams* source = nullptr;
  std::uint64_t revision = 0;

  std::size_t batch_size() const { return activations.empty() ? 0 : activations.front().rows(); }
  std::vector<double> predictions() const;
};

/// `batch` is B x 12, one sample per row. Throws ShapeMismatch.
ForwardCache forward(const ModelParams& params, const Matrix& batch);
double forward_one(const ModelParams& params, std::span<const double> row);

/// Sum of squares of every weight entry.
double l2_penalty(const ModelParams& params);

/// mean((pred - target)^2) + l2_beta * sum(w^2). Throws LengthMismatch.
double loss(const ModelParams& params, std::span<const double> predictions,
            std::span<const double> targets);

struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<std::vector<double>> d_biases;
};

/// Exact gradient of `loss` at the cache's operating point. Throws StaleCache
/// if the cache came from a different (or since updated) model, and
/// LengthMismatch if targets do not match the batch.
Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   std::span<const double> targets);

struct AdamState {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
};

AdamState make_adam_state(const ModelParams& params, double learning_rate, double beta1 = 0.9,
                          double beta2 = 0.999, double epsilon = 1e-8);

/// One Adam update of `theta` in place at step `t` (1-based):
///   m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double learning_rate, double beta1,
                 double beta2, double epsilon);

/// Applies one step to every weight and bias; increments state.t and
/// params.revision. Throws ShapeMismatch.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_size = 10;
  std::uint64_t shuffle_seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Normalized design matrix (n x 12) and label vector.
struct TrainingRows {
  Matrix x;
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

TrainingRows normalize_rows(const data::Dataset& dataset, const data::NormStats& stats);

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct LearningCurve {
  std::vector<EpochLoss> epochs;
};

struct TrainResult {
  ModelParams params;
  LearningCurve curve;
};

/// Mini-batch training from a fresh init_network(config). Epoch e (1-based)
/// visits the rows in the order of a permutation seeded by
/// mix_seed(shuffle_seed, e); the trailing short batch is kept. The curve
/// records the mean per-batch penalized loss of each epoch and, when
/// `validation` is given, the penalized loss on it after the epoch.
/// Throws NumericError when a loss becomes non-finite.
TrainResult train(const TrainingRows& rows, const NetworkConfig& config, const TrainConfig& tc,
                  const TrainingRows* validation = nullptr);

/// Predictions on already normalized rows, normalized label scale.
std::vector<double> predict_normalized(const ModelParams& params, const Matrix& rows);

/// Normalizes with the stored stats, runs the network and returns cycles.
/// Throws MissingNormStats.
double predict(const ModelParams& params, const vmir::FeatureVector& features);

inline constexpr int kModelFormatVersion = 1;

/// JSON model file: {format_version, network_config, norm_stats, weights, biases}.
std::string model_to_json(const ModelParams& params);
/// Throws CorruptModel on version, shape or value problems.
ModelParams model_from_json(std::string_view text);
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace wcet::nn
