// Acceptance report: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vmir_oracle.hpp"
#include "wcet/dataset.hpp"
#include "wcet/error.hpp"
#include "wcet/experiment.hpp"
#include "wcet/fileio.hpp"
#include "wcet/neuralnet.hpp"
#include "wcet/random.hpp"
#include "wcet/vmir.hpp"

namespace {

using namespace wcet;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      note << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double mse(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// 1 ------------------------------------------------------------------------

double numeric_partial(nn::ModelParams& p, double& slot, const nn::Matrix& x,
                       const std::vector<double>& y, double h) {
  const double saved = slot;
  slot = saved + h;
  const double up = nn::loss(p, nn::forward(p, x).predictions(), y);
  slot = saved - h;
  const double down = nn::loss(p, nn::forward(p, x).predictions(), y);
  slot = saved;
  return (up - down) / (2.0 * h);
}

void gradient_oracle(Outcome& o) {
  const auto start = Clock::now();
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<std::size_t> width(1, 8), depth(1, 3), batch(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t entries = 0, bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    nn::NetworkConfig config;
    config.hidden_widths.clear();
    for (std::size_t d = depth(gen); d > 0; --d) config.hidden_widths.push_back(width(gen));
    config.l2_beta = trial % 2 == 0 ? 0.0 : 0.01;
    config.init_seed = gen();
    nn::ModelParams p = nn::init_network(config);
    for (auto& b : p.biases) {
      for (double& v : b) v = unit(gen) - 0.5;
    }
    nn::Matrix x(batch(gen), 12);
    for (double& v : x.values()) v = unit(gen);
    std::vector<double> y(x.rows());
    for (double& v : y) v = unit(gen);

    const nn::Gradients g = nn::backward(p, nn::forward(p, x), y);
    auto check = [&](double analytic, double& slot) {
      const double numeric = numeric_partial(p, slot, x, y, 1e-5);
      const double err = std::abs(analytic - numeric);
      const double tol = std::max(1e-7, 1e-4 * std::abs(numeric));
      worst = std::max(worst, err / tol);
      ++entries;
      bad += err > tol;
    };
    for (std::size_t l = 0; l < p.layer_count(); ++l) {
      for (std::size_t i = 0; i < p.weights[l].size(); ++i) check(g.d_weights[l].values()[i], p.weights[l].values()[i]);
      for (std::size_t i = 0; i < p.biases[l].size(); ++i) check(g.d_biases[l][i], p.biases[l][i]);
    }
  }
  const double elapsed = seconds_since(start);
  o.note << "50 nets, " << entries << " entries, worst err/tol " << fmt(worst) << ", " << fmt(elapsed) << " s";
  o.require(bad == 0, std::to_string(bad) + " entries out of tolerance");
  o.require(elapsed < 10.0, "runtime >= 10 s");
}

// 2 ------------------------------------------------------------------------

void adam_oracle(Outcome& o) {
  std::vector<double> theta = {1.0}, m = {0.0}, v = {0.0};
  const std::vector<double> g1 = {0.5};
  nn::adam_update(theta, g1, m, v, 1, 0.01, 0.9, 0.999, 1e-8);
  o.note << "theta1 " << io::format_double(theta[0]);
  o.require(std::abs(theta[0] - 0.99) <= 1e-6, "theta1 != 0.99");

  // Hand-evaluated recurrences for gradients 0.5, -0.2, 0.1.
  struct Row { double g, m, v, theta; };
  const Row table[] = {
      {0.5, 0.05, 0.00025, 0.9900000002},
      {-0.2, 0.025, 0.00028975, 0.9865439418116511},
      {0.1, 0.0325, 0.00029946025, 0.9827500240835696},
  };
  theta = {1.0};
  m = {0.0};
  v = {0.0};
  double worst = 0.0;
  std::uint64_t t = 0;
  for (const Row& row : table) {
    const std::vector<double> g = {row.g};
    nn::adam_update(theta, g, m, v, ++t, 0.01, 0.9, 0.999, 1e-8);
    worst = std::max({worst, std::abs(m[0] - row.m), std::abs(v[0] - row.v), std::abs(theta[0] - row.theta)});
  }
  o.note << ", 3-step max deviation " << fmt(worst);
  o.require(worst <= 1e-9, "trace deviates");
}

// 3 ------------------------------------------------------------------------

double overfit_mse(const nn::TrainingRows& rows, double beta) {
  nn::NetworkConfig config;  // 12-32-32-32-1
  config.l2_beta = beta;
  config.init_seed = 5;
  nn::TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.batch_size = 10;
  tc.epochs = 2000;
  tc.shuffle_seed = 6;
  const nn::TrainResult r = nn::train(rows, config, tc);
  return mse(nn::predict_normalized(r.params, rows.x), rows.y);
}

void overfit_capacity(Outcome& o) {
  data::CostModel linear = data::default_cost_model();
  linear.interaction_coeff = 0.0;
  linear.noise_stddev = 0.0;
  const data::Dataset d = data::synthesize_corpus(10, 31, linear).dataset;
  const nn::TrainingRows rows = nn::normalize_rows(d, data::fit_norm(d));

  const auto start = Clock::now();
  const double unregularized = overfit_mse(rows, 0.0);
  const double elapsed = seconds_since(start);
  const double regularized = overfit_mse(rows, 0.01);
  o.note << "MSE " << fmt(unregularized) << " with l2 0 in " << fmt(elapsed) << " s (l2 0.01: " << fmt(regularized)
         << ")";
  o.require(unregularized < 1e-3, "MSE >= 1e-3");
  o.require(elapsed < 30.0, "runtime >= 30 s");
}

// 4 ------------------------------------------------------------------------

/// Least squares with an intercept on the normalized features.
std::vector<double> ols_predictions(const nn::TrainingRows& train, const nn::TrainingRows& test) {
  auto design = [](const nn::Matrix& x) {
    Eigen::MatrixXd a(x.rows(), x.cols() + 1);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      a(r, 0) = 1.0;
      for (std::size_t c = 0; c < x.cols(); ++c) a(r, c + 1) = x(r, c);
    }
    return a;
  };
  const Eigen::MatrixXd a = design(train.x);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(train.y.data(), static_cast<Eigen::Index>(train.size()));
  const Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(y);
  const Eigen::VectorXd pred = design(test.x) * coef;
  return {pred.data(), pred.data() + pred.size()};
}

void generalization(Outcome& o) {
  const data::CostModel model = data::default_cost_model();
  const data::Dataset train = data::synthesize_corpus(224, 1001, model, "train_").dataset;
  const data::Dataset test = data::synthesize_corpus(23, 2002, model, "test_").dataset;
  const data::NormStats stats = data::fit_norm(train);
  const nn::TrainingRows train_rows = nn::normalize_rows(train, stats);
  const nn::TrainingRows test_rows = nn::normalize_rows(test, stats);

  nn::NetworkConfig config;
  config.init_seed = 7;
  nn::TrainConfig tc;
  tc.learning_rate = 0.03;
  tc.batch_size = 40;
  tc.epochs = 100;
  tc.shuffle_seed = 8;
  const nn::TrainResult r = nn::train(train_rows, config, tc);
  const double net = 100.0 * exp::rmse(nn::predict_normalized(r.params, test_rows.x), test_rows.y);
  const double ols = 100.0 * exp::rmse(ols_predictions(train_rows, test_rows), test_rows.y);
  config.l2_beta = 0.0;
  const nn::TrainResult plain = nn::train(train_rows, config, tc);
  const double net_plain = 100.0 * exp::rmse(nn::predict_normalized(plain.params, test_rows.x), test_rows.y);
  o.note << "held-out RMSE network " << fmt(net) << "%, OLS " << fmt(ols) << "% (network with l2 0: " << fmt(net_plain)
         << "%)";
  o.require(ols < 20.0, "OLS baseline >= 20%");
  o.require(net < 15.0, "network >= 15%");
  o.require(net <= ols, "network worse than OLS");
}

// 5 ------------------------------------------------------------------------

void grid_protocol(Outcome& o) {
  const data::CostModel model = data::default_cost_model();
  const data::Dataset train = data::synthesize_corpus(57, 11, model, "a_").dataset;
  const data::Dataset test = data::synthesize_corpus(12, 12, model, "t_").dataset;
  exp::GridSpec grid;  // default lists: 3 learning rates x 4 widths
  grid.runs_per_config = 2;
  grid.base_seed = 13;
  nn::TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 10;

  auto render = [&](std::size_t jobs) {
    const auto reports = exp::run_grid(train, test, grid, tc, {}, jobs);
    return std::make_pair(reports, exp::summary_csv(reports, exp::RmseScale::NormalizedPercent) +
                                       exp::curves_csv(reports) +
                                       exp::runs_csv(reports, exp::RmseScale::NormalizedPercent));
  };
  const auto [reports, first] = render(1);
  const std::string second = render(1).second;
  const std::string threaded = render(2).second;

  bool ordered = true;
  for (const auto& report : reports) {
    for (exp::Split s : {exp::Split::Train, exp::Split::Validation, exp::Split::Test}) {
      const auto& st = report.stats(s);
      ordered = ordered && st.min <= st.avg && st.avg <= st.max;
    }
  }
  o.note << reports.size() << " reports (runs_per_config 2, 5 epochs, folds 5)";
  o.require(reports.size() == 12, "expected 12 reports");
  o.require(ordered, "min <= avg <= max violated");
  o.require(first == second, "rerun differs");
  o.require(first == threaded, "threaded run differs");
}

// 6 ------------------------------------------------------------------------

void cross_validation_structure(Outcome& o) {
  const std::size_t n = 57, k = 5;
  const data::FoldAssignment folds = data::kfold_split(n, k, 99);
  std::vector<std::size_t> sizes, seen(n, 0);
  for (std::size_t f = 0; f < k; ++f) {
    const auto members = folds.members(f);
    sizes.push_back(members.size());
    for (std::size_t i : members) ++seen[i];
  }
  o.note << "fold sizes";
  for (std::size_t s : sizes) o.note << ' ' << s;
  o.require(sizes == std::vector<std::size_t>{12, 12, 11, 11, 11}, "fold sizes");
  o.require(std::all_of(seen.begin(), seen.end(), [](std::size_t c) { return c == 1; }), "not a partition");

  // Leakage guard: held-out labels and features must not reach the stats.
  const data::Dataset d = data::synthesize_corpus(n, 21, data::default_cost_model()).dataset;
  bool invariant = true;
  for (std::size_t f = 0; f < k; ++f) {
    const auto held = folds.members(f);
    const auto kept = folds.complement(f);
    std::vector<data::Sample> perturbed(d.samples().begin(), d.samples().end());
    for (std::size_t i : held) {
      perturbed[i].cycles *= 1000.0;
      perturbed[i].features[0] += 500;
    }
    const data::Dataset p(std::move(perturbed));
    invariant = invariant && data::fit_norm(d.subset(kept)) == data::fit_norm(p.subset(kept));
  }
  std::vector<data::Sample> relabeled(d.samples().begin(), d.samples().end());
  const auto cv_folds = data::kfold_split(n, k, 5);
  for (std::size_t i : cv_folds.members(2)) relabeled[i].cycles *= 1000.0;
  nn::TrainConfig tc;
  tc.epochs = 3;
  const auto base = exp::cross_validate(d, {}, tc, k, 5);
  const auto moved = exp::cross_validate(data::Dataset(std::move(relabeled)), {}, tc, k, 5);
  invariant = invariant && base[2].stats == moved[2].stats && base[2].train_rmse == moved[2].train_rmse;
  o.require(invariant, "stats depend on held-out fold");
}

// 7 ------------------------------------------------------------------------

void feature_oracle(Outcome& o) {
  std::mt19937_64 gen(77);
  std::size_t mismatches = 0, additivity = 0;
  for (int i = 0; i < 100; ++i) {
    const std::string a = testing::random_vmir_text(gen);
    std::string b = testing::random_vmir_text(gen);
    const vmir::FeatureVector fa = vmir::extract_features(vmir::parse_program(a));
    const vmir::FeatureVector fb = vmir::extract_features(vmir::parse_program(b));
    mismatches += fa.counts() != testing::naive_counts(a);
    for (std::size_t pos; (pos = b.find("top")) != std::string::npos;) b.replace(pos, 3, "bot");
    additivity += vmir::extract_features(vmir::parse_program(a + b)) != fa + fb;
  }
  o.note << "100 programs, " << mismatches << " counter mismatches, " << additivity << " additivity failures";
  o.require(mismatches == 0, "naive counter disagrees");
  o.require(additivity == 0, "concatenation not additive");
}

// 8 ------------------------------------------------------------------------

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void serialization(Outcome& o) {
  const data::Dataset d = data::synthesize_corpus(30, 41, data::default_cost_model()).dataset;
  nn::NetworkConfig config;
  config.hidden_widths = {16, 8};
  config.init_seed = 3;
  nn::TrainConfig tc;
  tc.epochs = 20;
  const data::NormStats stats = data::fit_norm(d);
  nn::ModelParams model = nn::train(nn::normalize_rows(d, stats), config, tc).params;
  model.norm_stats = stats;

  const auto path = std::filesystem::temp_directory_path() /
                    ("wcet_acceptance_" + std::to_string(std::random_device{}()) + ".json");
  nn::save_model(model, path);
  const nn::ModelParams loaded = nn::load_model(path);
  std::filesystem::remove(path);
  bool exact = nn::same_parameters(model, loaded);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    exact = exact && bit_equal(model.weights[l].values(), loaded.weights[l].values()) &&
            bit_equal(model.biases[l], loaded.biases[l]);
  }
  o.require(exact, "round trip not bit-exact");

  const std::string text = nn::model_to_json(model);
  auto replace_first = [&](const std::string& from, const std::string& to) {
    std::string out = text;
    out.replace(out.find(from), from.size(), to);
    return out;
  };
  // A string where the first weight value should be.
  std::string non_numeric = text;
  non_numeric.insert(non_numeric.find_first_of("-0123456789", non_numeric.find("\"weights\"")), "\"x\", ");
  // First weight row one entry short.
  std::string short_row = text;
  {
    const std::size_t first = short_row.find_first_of("-0123456789", short_row.find("\"weights\""));
    short_row.erase(first, short_row.find(',', first) + 1 - first);
  }
  const std::vector<std::string> corrupted = {
      text.substr(0, text.size() / 2),
      replace_first("\"format_version\": 1", "\"format_version\": 7"),
      non_numeric,
      short_row,
      replace_first("\"weights\"", "\"weightz\""),
      "[]",
      "",
  };
  std::size_t rejected = 0;
  for (const std::string& bad : corrupted) {
    try {
      nn::model_from_json(bad);
    } catch (const Error& e) {
      rejected += e.code() == ErrorCode::CorruptModel && !e.detail().empty();
    }
  }
  o.note << "round trip " << (exact ? "bit-exact" : "inexact") << ", " << rejected << "/" << corrupted.size()
         << " corrupted files rejected";
  o.require(rejected == corrupted.size(), "corrupted file accepted");
}

// 9 ------------------------------------------------------------------------

void rmse_units(Outcome& o) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  const std::vector<double> half = {0.5, 0.5}, ends = {0.0, 1.0};
  worst = std::max(worst, std::abs(exp::rmse(half, ends) - 0.5));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(1 + trial % 17), b(a.size());
    for (double& v : a) v = normal(gen);
    for (double& v : b) v = normal(gen);
    worst = std::max(worst, exp::rmse(a, a));
    const double base = exp::rmse(a, b);
    const double shift = normal(gen) * 3.0, scale = normal(gen) * 3.0;
    std::vector<double> as = a, bs = b, ac = a, bc = b;
    for (std::size_t i = 0; i < a.size(); ++i) {
      as[i] += shift;
      bs[i] += shift;
      ac[i] *= scale;
      bc[i] *= scale;
    }
    worst = std::max(worst, std::abs(exp::rmse(as, bs) - base));
    worst = std::max(worst, std::abs(exp::rmse(ac, bc) - std::abs(scale) * base));
  }
  o.note << "max deviation " << fmt(worst);
  o.require(worst <= 1e-12, "deviation > 1e-12");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"gradient oracle", gradient_oracle},
      {"adam oracle", adam_oracle},
      {"overfit capacity", overfit_capacity},
      {"generalization 224/23", generalization},
      {"grid protocol", grid_protocol},
      {"cross-validation structure", cross_validation_structure},
      {"feature extraction oracle", feature_oracle},
      {"serialization", serialization},
      {"rmse units", rmse_units},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.note << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.note.str()
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures == 0 ? 0 : 1;
}
