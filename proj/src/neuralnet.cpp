#include "wcet/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wcet/error.hpp"
#include "wcet/random.hpp"

namespace wcet::nn {
namespace {

bool is_output_layer(const ModelParams& params, std::size_t layer) {
  return layer + 1 == params.layer_count();
}

bool linear_layer(const ModelParams& params, std::size_t layer) {
  return is_output_layer(params, layer) &&
         params.config.output_activation == OutputActivation::Linear;
}

void check_lengths(std::size_t predictions, std::size_t targets) {
  if (predictions != targets) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions) + " predictions vs " +
                                               std::to_string(targets) + " targets");
  }
  if (predictions == 0) throw Error(ErrorCode::LengthMismatch, "empty batch");
}

}  // namespace

std::string_view to_string(OutputActivation activation) {
  return activation == OutputActivation::Linear ? "linear" : "leaky_relu";
}

OutputActivation parse_output_activation(std::string_view name) {
  if (name == "leaky_relu") return OutputActivation::LeakyRelu;
  if (name == "linear") return OutputActivation::Linear;
  throw Error(ErrorCode::InvalidArgument, "unknown output activation '" + std::string(name) + "'");
}

void validate(const NetworkConfig& config) {
  if (config.input_width != vmir::kCategoryCount) {
    throw Error(ErrorCode::BadShape, "input width must be 12, got " + std::to_string(config.input_width));
  }
  if (config.output_width != 1) {
    throw Error(ErrorCode::BadShape, "output width must be 1, got " + std::to_string(config.output_width));
  }
  for (std::size_t width : config.hidden_widths) {
    if (width == 0) throw Error(ErrorCode::BadShape, "hidden layer of width 0");
  }
  if (!(config.leaky_slope > 0.0 && config.leaky_slope < 1.0)) {
    throw Error(ErrorCode::BadShape, "leaky slope must lie in (0, 1)");
  }
  if (!(config.l2_beta >= 0.0) || !std::isfinite(config.l2_beta)) {
    throw Error(ErrorCode::BadShape, "l2 beta must be non-negative");
  }
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) count += weights[l].size() + biases[l].size();
  return count;
}

bool same_parameters(const ModelParams& a, const ModelParams& b) {
  return a.config == b.config && a.weights == b.weights && a.biases == b.biases &&
         a.norm_stats == b.norm_stats;
}

ModelParams init_network(const NetworkConfig& config) {
  validate(config);
  ModelParams params;
  params.config = config;

  std::vector<std::size_t> widths;
  widths.push_back(config.input_width);
  widths.insert(widths.end(), config.hidden_widths.begin(), config.hidden_widths.end());
  widths.push_back(config.output_width);

  Rng rng(config.init_seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& value : w.values()) value = rng.uniform(-limit, limit);
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(fan_out, 0.0);
  }
  return params;
}

std::vector<double> ForwardCache::predictions() const {
  const Matrix& out = activations.back();
  std::vector<double> result(out.rows());
  for (std::size_t b = 0; b < out.rows(); ++b) result[b] = out(b, 0);
  return result;
}

ForwardCache forward(const ModelParams& params, const Matrix& batch) {
  if (params.layer_count() == 0) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  if (batch.cols() != params.weights.front().cols()) {
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(batch.cols()) +
                                              ", model expects " +
                                              std::to_string(params.weights.front().cols()));
  }
  const double slope = params.config.leaky_slope;
  ForwardCache cache;
  cache.source = &params;
  cache.revision = params.revision;
  cache.activations.reserve(params.layer_count() + 1);
  cache.pre_activations.reserve(params.layer_count());
  cache.activations.push_back(batch);

  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Matrix& w = params.weights[l];
    const std::vector<double>& bias = params.biases[l];
    const Matrix& input = cache.activations.back();
    Matrix z(input.rows(), w.rows());
    for (std::size_t b = 0; b < input.rows(); ++b) {
      const auto in_row = input.row(b);
      for (std::size_t o = 0; o < w.rows(); ++o) {
        const auto w_row = w.row(o);
        double sum = bias[o];
        for (std::size_t i = 0; i < w_row.size(); ++i) sum += w_row[i] * in_row[i];
        z(b, o) = sum;
      }
    }
    Matrix a = z;
    if (!linear_layer(params, l)) {
      for (double& value : a.values()) value = leaky_relu(value, slope);
    }
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return cache;
}

double forward_one(const ModelParams& params, std::span<const double> row) {
  Matrix batch(1, row.size());
  std::copy(row.begin(), row.end(), batch.values().begin());
  return forward(params, batch).activations.back()(0, 0);
}

double l2_penalty(const ModelParams& params) {
  double sum = 0.0;
  for (const auto& w : params.weights) {
    for (double value : w.values()) sum += value * value;
  }
  return sum;
}

double loss(const ModelParams& params, std::span<const double> predictions,
            std::span<const double> targets) {
  check_lengths(predictions.size(), targets.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sq += d * d;
  }
  return sq / static_cast<double>(predictions.size()) + params.config.l2_beta * l2_penalty(params);
}

Gradients backward(const ModelParams& params, const ForwardCache& cache,
                   std::span<const double> targets) {
  if (cache.source != &params || cache.revision != params.revision ||
      cache.pre_activations.size() != params.layer_count()) {
    throw Error(ErrorCode::StaleCache, "forward cache does not belong to this model state");
  }
  const std::size_t batch = cache.batch_size();
  check_lengths(batch, targets.size());
  const double slope = params.config.leaky_slope;
  const double beta = params.config.l2_beta;
  const std::size_t layers = params.layer_count();

  Gradients grads;
  grads.d_weights.resize(layers);
  grads.d_biases.resize(layers);

  // delta = dL/dz for the current layer, B x fan_out.
  Matrix delta(batch, 1);
  const Matrix& out = cache.activations.back();
  for (std::size_t b = 0; b < batch; ++b) {
    delta(b, 0) = 2.0 * (out(b, 0) - targets[b]) / static_cast<double>(batch);
  }

  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& z = cache.pre_activations[l];
    if (!linear_layer(params, l)) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < z.cols(); ++o) delta(b, o) *= leaky_relu_grad(z(b, o), slope);
      }
    }
    const Matrix& w = params.weights[l];
    const Matrix& input = cache.activations[l];

    Matrix dw(w.rows(), w.cols());
    std::vector<double> db(w.rows(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto in_row = input.row(b);
      for (std::size_t o = 0; o < w.rows(); ++o) {
        const double d = delta(b, o);
        db[o] += d;
        auto dw_row = dw.row(o);
        for (std::size_t i = 0; i < dw_row.size(); ++i) dw_row[i] += d * in_row[i];
      }
    }
    const auto w_values = w.values();
    auto dw_values = dw.values();
    for (std::size_t i = 0; i < dw_values.size(); ++i) dw_values[i] += 2.0 * beta * w_values[i];

    if (l > 0) {
      Matrix prev(batch, w.cols());
      for (std::size_t b = 0; b < batch; ++b) {
        auto prev_row = prev.row(b);
        for (std::size_t o = 0; o < w.rows(); ++o) {
          const double d = delta(b, o);
          const auto w_row = w.row(o);
          for (std::size_t i = 0; i < prev_row.size(); ++i) prev_row[i] += d * w_row[i];
        }
      }
      delta = std::move(prev);
    }
    grads.d_weights[l] = std::move(dw);
    grads.d_biases[l] = std::move(db);
  }
  return grads;
}

AdamState make_adam_state(const ModelParams& params, double learning_rate, double beta1,
                          double beta2, double epsilon) {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  AdamState state;
  state.learning_rate = learning_rate;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.epsilon = epsilon;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    state.m_weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    state.v_weights.emplace_back(params.weights[l].rows(), params.weights[l].cols());
    state.m_biases.emplace_back(params.biases[l].size(), 0.0);
    state.v_biases.emplace_back(params.biases[l].size(), 0.0);
  }
  return state;
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double learning_rate, double beta1,
                 double beta2, double epsilon) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw Error(ErrorCode::ShapeMismatch, "adam buffers disagree in length");
  }
  const double step = static_cast<double>(t);
  const double correction1 = 1.0 - std::pow(beta1, step);
  const double correction2 = 1.0 - std::pow(beta2, step);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon);
  }
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
  const std::size_t layers = params.layer_count();
  if (grads.d_weights.size() != layers || grads.d_biases.size() != layers ||
      state.m_weights.size() != layers || state.m_biases.size() != layers) {
    throw Error(ErrorCode::ShapeMismatch, "gradient/optimizer layer count mismatch");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    if (grads.d_weights[l].rows() != params.weights[l].rows() ||
        grads.d_weights[l].cols() != params.weights[l].cols() ||
        state.m_weights[l].size() != params.weights[l].size()) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " weight shape mismatch");
    }
  }
  state.t += 1;
  for (std::size_t l = 0; l < layers; ++l) {
    adam_update(params.weights[l].values(), grads.d_weights[l].values(), state.m_weights[l].values(),
                state.v_weights[l].values(), state.t, state.learning_rate, state.beta1, state.beta2,
                state.epsilon);
    adam_update(params.biases[l], grads.d_biases[l], state.m_biases[l], state.v_biases[l], state.t,
                state.learning_rate, state.beta1, state.beta2, state.epsilon);
  }
  params.revision += 1;
}

TrainingRows normalize_rows(const data::Dataset& dataset, const data::NormStats& stats) {
  TrainingRows rows;
  rows.x = Matrix(dataset.size(), vmir::kCategoryCount);
  rows.y.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto normalized = data::apply_norm(stats, dataset[i]);
    std::copy(normalized.x.begin(), normalized.x.end(), rows.x.row(i).begin());
    rows.y[i] = normalized.y;
  }
  return rows;
}

TrainResult train(const TrainingRows& rows, const NetworkConfig& config, const TrainConfig& tc,
                  const TrainingRows* validation) {
  if (rows.size() == 0) throw Error(ErrorCode::EmptyDataset, "no training rows");
  if (rows.x.rows() != rows.size()) throw Error(ErrorCode::LengthMismatch, "rows and labels disagree");
  if (tc.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");

  TrainResult result{init_network(config), {}};
  ModelParams& params = result.params;
  AdamState state = make_adam_state(params, tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon);

  const std::size_t n = rows.size();
  const std::size_t width = rows.x.cols();
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    Rng rng(mix_seed(tc.shuffle_seed, epoch));
    const auto order = rng.permutation(n);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t count = std::min(tc.batch_size, n - start);
      Matrix x(count, width);
      std::vector<double> y(count);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t src = order[start + k];
        std::copy_n(rows.x.row(src).begin(), width, x.row(k).begin());
        y[k] = rows.y[src];
      }
      ForwardCache cache = forward(params, x);
      const double batch_loss = loss(params, cache.predictions(), y);
      if (!std::isfinite(batch_loss)) throw NumericError(epoch, "training loss became non-finite");
      loss_sum += batch_loss;
      ++batches;
      adam_step(params, backward(params, cache, y), state);
    }

    EpochLoss entry{epoch, loss_sum / static_cast<double>(batches), std::nullopt};
    if (validation != nullptr && validation->size() > 0) {
      const double val = loss(params, predict_normalized(params, validation->x), validation->y);
      if (!std::isfinite(val)) throw NumericError(epoch, "validation loss became non-finite");
      entry.val_loss = val;
    }
    result.curve.epochs.push_back(entry);
  }
  return result;
}

std::vector<double> predict_normalized(const ModelParams& params, const Matrix& rows) {
  return forward(params, rows).predictions();
}

double predict(const ModelParams& params, const vmir::FeatureVector& features) {
  if (!params.norm_stats) {
    throw Error(ErrorCode::MissingNormStats, "model carries no normalization statistics");
  }
  const auto row = data::normalize_features(*params.norm_stats, features);
  return data::denorm_label(*params.norm_stats, forward_one(params, row));
}

}  // namespace wcet::nn
