#include "wcet/vmir.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "wcet/error.hpp"
#include "wcet/fileio.hpp"

namespace wcet::vmir {
namespace {

struct MnemonicEntry {
  std::string_view mnemonic;
  Category category;
};

constexpr std::array<MnemonicEntry, 17> kMnemonics = {{
    {"add", Category::Add},
    {"sub", Category::Sub},
    {"mul", Category::Mul},
    {"div", Category::Div},
    {"and", Category::Logic},
    {"or", Category::Logic},
    {"xor", Category::Logic},
    {"not", Category::Logic},
    {"shl", Category::Shift},
    {"shr", Category::Shift},
    {"call", Category::Call},
    {"ret", Category::Return},
    {"jmp", Category::Jump},
    {"br", Category::Jump},
    {"load", Category::Load},
    {"store", Category::Store},
    {"cmp", Category::Compare},
}};

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool is_label_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == ','; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_sep(line[i])) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

}  // namespace

std::string_view to_string(Category category) {
  return kFeatureNames[static_cast<std::size_t>(category)];
}

std::optional<Category> category_of(std::string_view mnemonic) {
  const std::string lower = to_lower(mnemonic);
  for (const auto& entry : kMnemonics) {
    if (entry.mnemonic == lower) return entry.category;
  }
  return std::nullopt;
}

std::string_view canonical_mnemonic(Category category) {
  for (const auto& entry : kMnemonics) {
    if (entry.category == category) return entry.mnemonic;
  }
  return {};
}

bool is_branch(Category category) { return category == Category::Jump; }

std::uint64_t FeatureVector::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

FeatureVector& FeatureVector::operator+=(const FeatureVector& other) {
  for (std::size_t i = 0; i < kCategoryCount; ++i) counts_[i] += other.counts_[i];
  return *this;
}

Program parse_program(std::string_view text, std::string name) {
  Program program;
  program.name = std::move(name);

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;

    const std::string_view head = tokens.front();
    if (head.back() == ':') {
      const std::string_view label = head.substr(0, head.size() - 1);
      if (tokens.size() != 1) {
        throw ParseError(ErrorCode::MalformedLine, line_no,
                         "label '" + std::string(label) + "' must stand on its own line");
      }
      if (label.empty() || !std::all_of(label.begin(), label.end(), is_label_char)) {
        throw ParseError(ErrorCode::MalformedLine, line_no,
                         "ill-formed label '" + std::string(head) + "'");
      }
      auto [it, inserted] = program.labels.emplace(std::string(label), program.instructions.size());
      if (!inserted) {
        throw ParseError(ErrorCode::MalformedLine, line_no,
                         "duplicate label '" + std::string(label) + "'");
      }
      continue;
    }

    const auto category = category_of(head);
    if (!category) {
      throw ParseError(ErrorCode::UnknownMnemonic, line_no,
                       "unknown mnemonic '" + std::string(head) + "'");
    }
    Instruction instr{*category, to_lower(head), {}, line_no};
    for (std::size_t i = 1; i < tokens.size(); ++i) instr.operands.emplace_back(tokens[i]);
    if (is_branch(*category) && instr.operands.empty()) {
      throw ParseError(ErrorCode::MalformedLine, line_no,
                       "'" + instr.mnemonic + "' needs a target label");
    }
    program.instructions.push_back(std::move(instr));
  }

  if (program.instructions.empty()) {
    throw ParseError(ErrorCode::EmptyProgram, 0, "program contains no instructions");
  }
  for (const auto& instr : program.instructions) {
    if (!is_branch(instr.category)) continue;
    const std::string& target = instr.operands.back();
    if (!program.labels.contains(target)) {
      throw ParseError(ErrorCode::UnresolvedLabel, instr.source_line,
                       "unresolved label '" + target + "'");
    }
  }
  return program;
}

FeatureVector extract_features(const Program& program) {
  FeatureVector features;
  for (const auto& instr : program.instructions) {
    features[static_cast<std::size_t>(instr.category)] += 1;
  }
  return features;
}

std::string render_program(const Program& program) {
  // Invert the label map so labels can be emitted in front of their instruction.
  std::multimap<std::size_t, std::string_view> by_position;
  for (const auto& [label, index] : program.labels) by_position.emplace(index, label);

  std::ostringstream out;
  auto emit_labels_at = [&](std::size_t index) {
    auto [first, last] = by_position.equal_range(index);
    for (auto it = first; it != last; ++it) out << it->second << ":\n";
  };
  for (std::size_t i = 0; i < program.instructions.size(); ++i) {
    emit_labels_at(i);
    const auto& instr = program.instructions[i];
    out << (instr.mnemonic.empty() ? canonical_mnemonic(instr.category) : instr.mnemonic);
    for (const auto& operand : instr.operands) out << ' ' << operand;
    out << '\n';
  }
  emit_labels_at(program.instructions.size());
  return out.str();
}

std::vector<NamedFeatures> extract_features_batch(std::span<const std::filesystem::path> paths) {
  std::vector<NamedFeatures> rows;
  rows.reserve(paths.size());
  for (const auto& path : paths) {
    std::string text = io::read_file(path);
    try {
      Program program = parse_program(text, path.stem().string());
      rows.push_back({program.name, extract_features(program)});
    } catch (const ParseError& e) {
      throw e.with_path(path.string());
    }
  }
  return rows;
}

std::string features_to_csv(std::span<const NamedFeatures> rows) {
  std::ostringstream out;
  out << "name";
  for (auto column : kFeatureNames) out << ',' << column;
  out << '\n';
  for (const auto& row : rows) {
    out << row.name;
    for (auto count : row.features.counts()) out << ',' << count;
    out << '\n';
  }
  return out.str();
}

}  // namespace wcet::vmir
