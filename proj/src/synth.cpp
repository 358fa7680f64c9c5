#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "wcet/dataset.hpp"
#include "wcet/error.hpp"
#include "wcet/fileio.hpp"
#include "wcet/random.hpp"

namespace wcet::data {
namespace {

using vmir::Category;

// Upper bound of each category's count for a full-size program. Programs are
// scaled down by a per-program size factor, which correlates the columns the
// way larger real programs have more of everything.
constexpr std::array<std::uint64_t, kCategoryCount> kMaxCounts = {
    60,  // add
    30,  // sub
    20,  // mul
    6,   // div
    20,  // logic
    10,  // shift
    8,   // call
    3,   // ret (plus the mandatory final one)
    16,  // jump
    60,  // load
    40,  // store
    16,  // cmp
};

constexpr std::array<std::string_view, 4> kLogicMnemonics = {"and", "or", "xor", "not"};
constexpr std::array<std::string_view, 2> kShiftMnemonics = {"shl", "shr"};
constexpr std::array<std::string_view, 2> kJumpMnemonics = {"jmp", "br"};

std::string reg(Rng& rng) { return "r" + std::to_string(rng.uniform_int(0, 15)); }

vmir::Instruction make_instruction(Category category, Rng& rng, std::size_t label_count) {
  vmir::Instruction instr{category, std::string(vmir::canonical_mnemonic(category)), {}, 0};
  auto pick = [&](auto const& table) {
    return std::string(table[rng.uniform_int(0, table.size() - 1)]);
  };
  switch (category) {
    case Category::Logic:
      instr.mnemonic = pick(kLogicMnemonics);
      if (instr.mnemonic == "not") {
        instr.operands = {reg(rng), reg(rng)};
      } else {
        instr.operands = {reg(rng), reg(rng), reg(rng)};
      }
      break;
    case Category::Shift:
      instr.mnemonic = pick(kShiftMnemonics);
      instr.operands = {reg(rng), reg(rng), std::to_string(rng.uniform_int(1, 31))};
      break;
    case Category::Jump: {
      instr.mnemonic = pick(kJumpMnemonics);
      std::string target = "L" + std::to_string(rng.uniform_int(0, label_count - 1));
      if (instr.mnemonic == "br") {
        instr.operands = {reg(rng), std::move(target)};
      } else {
        instr.operands = {std::move(target)};
      }
      break;
    }
    case Category::Call:
      instr.operands = {"f" + std::to_string(rng.uniform_int(0, 7))};
      break;
    case Category::Return:
      break;
    case Category::Load:
    case Category::Store:
    case Category::Compare:
      instr.operands = {reg(rng), reg(rng)};
      break;
    default:
      instr.operands = {reg(rng), reg(rng), reg(rng)};
      break;
  }
  return instr;
}

vmir::Program generate_program(std::string name, Rng& rng) {
  const double size = rng.uniform(0.15, 1.0);
  std::array<std::uint64_t, kCategoryCount> counts{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    const auto cap = static_cast<std::uint64_t>(std::llround(size * static_cast<double>(kMaxCounts[i])));
    counts[i] = rng.uniform_int(0, cap);
  }
  const std::size_t jumps = counts[static_cast<std::size_t>(Category::Jump)];
  const std::size_t label_count = std::max<std::size_t>(1, jumps / 3);

  std::vector<Category> body;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    body.insert(body.end(), counts[i], static_cast<Category>(i));
  }
  rng.shuffle(std::span<Category>(body));
  body.push_back(Category::Return);

  vmir::Program program;
  program.name = std::move(name);
  for (Category c : body) program.instructions.push_back(make_instruction(c, rng, label_count));
  for (std::size_t l = 0; l < label_count; ++l) {
    program.labels.emplace("L" + std::to_string(l), rng.uniform_int(0, body.size() - 1));
  }
  int line = 0;
  for (auto& instr : program.instructions) instr.source_line = ++line;
  return program;
}

}  // namespace

CostModel default_cost_model() {
  CostModel model;
  model.weights = {1.0, 1.0, 4.0, 24.0, 1.0, 1.0, 12.0, 6.0, 3.0, 5.0, 4.0, 1.0};
  model.interaction_coeff = 0.06;
  model.noise_stddev = 10.0;
  model.seed = 0;
  return model;
}

void validate(const CostModel& model) {
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    if (!(model.weights[i] > 0.0) || !std::isfinite(model.weights[i])) {
      throw Error(ErrorCode::InvalidArgument,
                  "cost-model weight '" + std::string(vmir::kFeatureNames[i]) + "' must be positive");
    }
  }
  if (!std::isfinite(model.interaction_coeff)) {
    throw Error(ErrorCode::InvalidArgument, "interaction_coeff must be finite");
  }
  if (!(model.noise_stddev >= 0.0) || !std::isfinite(model.noise_stddev)) {
    throw Error(ErrorCode::InvalidArgument, "noise_stddev must be non-negative");
  }
}

CostModel parse_cost_model_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("cost model is not valid JSON: ") + e.what());
  }
  CostModel model;
  try {
    const auto& weights = doc.at("weights");
    if (!weights.is_array() || weights.size() != kCategoryCount) {
      throw Error(ErrorCode::SchemaMismatch, "'weights' must be an array of 12 numbers");
    }
    for (std::size_t i = 0; i < kCategoryCount; ++i) model.weights[i] = weights[i].get<double>();
    model.interaction_coeff = doc.at("interaction_coeff").get<double>();
    model.noise_stddev = doc.at("noise_stddev").get<double>();
    if (doc.contains("seed")) model.seed = doc["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("cost model: ") + e.what());
  }
  validate(model);
  return model;
}

CostModel load_cost_model(const std::filesystem::path& path) {
  return parse_cost_model_json(io::read_file(path));
}

double expected_cycles(const CostModel& model, const FeatureVector& features) {
  double cycles = 0.0;
  for (std::size_t i = 0; i < kCategoryCount; ++i) {
    cycles += model.weights[i] * static_cast<double>(features[i]);
  }
  cycles += model.interaction_coeff * static_cast<double>(features[Category::Load]) *
            static_cast<double>(features[Category::Jump]);
  return cycles;
}

Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const CostModel& model,
                         std::string_view name_prefix) {
  if (count == 0) throw Error(ErrorCode::InvalidArgument, "corpus size must be positive");
  validate(model);

  Rng program_rng(mix_seed(seed, 0));
  Rng noise_rng(mix_seed(seed, 1));
  Corpus corpus;
  corpus.programs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char suffix[32];
    std::snprintf(suffix, sizeof(suffix), "%04zu", i);
    vmir::Program program = generate_program(std::string(name_prefix) + suffix, program_rng);
    const FeatureVector features = vmir::extract_features(program);
    const double base = expected_cycles(model, features);

    // Labels must stay positive; redraw the noise a bounded number of times.
    double cycles = base;
    if (model.noise_stddev > 0.0) {
      for (int attempt = 0; attempt < 64; ++attempt) {
        const double candidate = base + noise_rng.normal(0.0, model.noise_stddev);
        if (candidate > 0.0) {
          cycles = candidate;
          break;
        }
      }
    }
    corpus.dataset.add({program.name, features, cycles});
    corpus.programs.push_back(std::move(program));
  }
  return corpus;
}

}  // namespace wcet::data
