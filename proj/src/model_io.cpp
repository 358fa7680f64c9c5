#include <cmath>

#include <json.hpp>

#include "wcet/error.hpp"
#include "wcet/fileio.hpp"
#include "wcet/neuralnet.hpp"

namespace wcet::nn {
namespace {

using nlohmann::json;

[[noreturn]] void corrupt(const std::string& detail) { throw Error(ErrorCode::CorruptModel, detail); }

json row_to_json(std::span<const double> values) {
  json out = json::array();
  for (double v : values) out.push_back(v);
  return out;
}

std::vector<double> real_array(const json& node, std::size_t expected, const std::string& what) {
  if (!node.is_array()) corrupt(what + " is not an array");
  if (node.size() != expected) {
    corrupt(what + " has " + std::to_string(node.size()) + " entries, expected " +
            std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : node) {
    if (!v.is_number()) corrupt(what + " contains a non-number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) corrupt(what + " contains a non-finite value");
    out.push_back(d);
  }
  return out;
}

const json& field(const json& node, const char* name) {
  if (!node.is_object() || !node.contains(name)) corrupt(std::string("missing field '") + name + "'");
  return node[name];
}

}  // namespace

std::string model_to_json(const ModelParams& params) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  const auto& cfg = params.config;
  doc["network_config"] = {
      {"input_width", cfg.input_width},
      {"hidden_widths", cfg.hidden_widths},
      {"output_width", cfg.output_width},
      {"leaky_slope", cfg.leaky_slope},
      {"l2_beta", cfg.l2_beta},
      {"init_seed", cfg.init_seed},
      {"output_activation", std::string(to_string(cfg.output_activation))},
  };
  if (params.norm_stats) {
    const auto& s = *params.norm_stats;
    doc["norm_stats"] = {
        {"feature_min", row_to_json(s.feature_min)},
        {"feature_max", row_to_json(s.feature_max)},
        {"label_min", s.label_min},
        {"label_max", s.label_max},
    };
  } else {
    doc["norm_stats"] = nullptr;
  }
  json weights = json::array();
  for (const auto& w : params.weights) {
    json rows = json::array();
    for (std::size_t r = 0; r < w.rows(); ++r) rows.push_back(row_to_json(w.row(r)));
    weights.push_back(std::move(rows));
  }
  doc["weights"] = std::move(weights);
  json biases = json::array();
  for (const auto& b : params.biases) biases.push_back(row_to_json(b));
  doc["biases"] = std::move(biases);
  return doc.dump(1) + "\n";
}

ModelParams model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    corrupt(std::string("not valid JSON: ") + e.what());
  }

  const json& version = field(doc, "format_version");
  if (!version.is_number_integer()) corrupt("format_version is not an integer");
  const auto v = version.get<long long>();
  if (v != kModelFormatVersion) {
    corrupt("unsupported format_version " + std::to_string(v) + " (this build reads version " +
            std::to_string(kModelFormatVersion) + ")");
  }

  ModelParams params;
  try {
    const json& cfg = field(doc, "network_config");
    auto& c = params.config;
    c.input_width = field(cfg, "input_width").get<std::size_t>();
    c.hidden_widths = field(cfg, "hidden_widths").get<std::vector<std::size_t>>();
    c.output_width = field(cfg, "output_width").get<std::size_t>();
    c.leaky_slope = field(cfg, "leaky_slope").get<double>();
    c.l2_beta = field(cfg, "l2_beta").get<double>();
    c.init_seed = field(cfg, "init_seed").get<std::uint64_t>();
    c.output_activation = parse_output_activation(field(cfg, "output_activation").get<std::string>());
  } catch (const json::exception& e) {
    corrupt(std::string("network_config: ") + e.what());
  } catch (const Error& e) {
    corrupt("network_config: " + e.detail());
  }
  try {
    validate(params.config);
  } catch (const Error& e) {
    corrupt("network_config: " + e.detail());
  }

  const json& stats = field(doc, "norm_stats");
  if (!stats.is_null()) {
    data::NormStats s;
    const auto lo = real_array(field(stats, "feature_min"), vmir::kCategoryCount, "feature_min");
    const auto hi = real_array(field(stats, "feature_max"), vmir::kCategoryCount, "feature_max");
    std::copy(lo.begin(), lo.end(), s.feature_min.begin());
    std::copy(hi.begin(), hi.end(), s.feature_max.begin());
    const json& label_min = field(stats, "label_min");
    const json& label_max = field(stats, "label_max");
    if (!label_min.is_number() || !label_max.is_number()) corrupt("label bounds are not numbers");
    s.label_min = label_min.get<double>();
    s.label_max = label_max.get<double>();
    params.norm_stats = s;
  }

  std::vector<std::size_t> widths{params.config.input_width};
  widths.insert(widths.end(), params.config.hidden_widths.begin(), params.config.hidden_widths.end());
  widths.push_back(params.config.output_width);
  const std::size_t layers = widths.size() - 1;

  const json& weights = field(doc, "weights");
  const json& biases = field(doc, "biases");
  if (!weights.is_array() || weights.size() != layers) corrupt("weights: expected " + std::to_string(layers) + " layers");
  if (!biases.is_array() || biases.size() != layers) corrupt("biases: expected " + std::to_string(layers) + " layers");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string where = "layer " + std::to_string(l);
    const json& rows = weights[l];
    if (!rows.is_array() || rows.size() != widths[l + 1]) {
      corrupt(where + " weights: expected " + std::to_string(widths[l + 1]) + " rows");
    }
    Matrix w(widths[l + 1], widths[l]);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const auto values = real_array(rows[r], widths[l], where + " weight row " + std::to_string(r));
      std::copy(values.begin(), values.end(), w.row(r).begin());
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(real_array(biases[l], widths[l + 1], where + " biases"));
  }
  return params;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, model_to_json(params));
}

ModelParams load_model(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  try {
    return model_from_json(text);
  } catch (const Error& e) {
    throw e.in_context(path.string());
  }
}

}  // namespace wcet::nn
