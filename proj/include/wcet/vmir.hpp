#pragma once

// VMIR: a small line-based virtual instruction format. Each non-blank line is
// either a label (`name:`) or `<mnemonic> [operands...]`; `#` starts a comment.
// Every mnemonic belongs to one of twelve categories, and a program's feature
// vector is the static occurrence count of each category.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wcet::vmir {

enum class Category : std::uint8_t {
  Add,
  Sub,
  Mul,
  Div,
  Logic,
  Shift,
  Call,
  Return,
  Jump,
  Load,
  Store,
  Compare,
};

inline constexpr std::size_t kCategoryCount = 12;

/// Canonical column names, in Category order.
inline constexpr std::array<std::string_view, kCategoryCount> kFeatureNames = {
    "add", "sub", "mul", "div", "logic", "shift", "call", "ret", "jump", "load", "store", "cmp"};

std::string_view to_string(Category category);

/// Case-insensitive mnemonic lookup.
std::optional<Category> category_of(std::string_view mnemonic);

/// Canonical mnemonic used when rendering a category back to text.
std::string_view canonical_mnemonic(Category category);

/// True for mnemonics whose last operand names a label (jmp, br).
bool is_branch(Category category);

struct Instruction {
  Category category;
  std::string mnemonic;
  std::vector<std::string> operands;
  int source_line = 0;
};

struct Program {
  std::string name;
  std::vector<Instruction> instructions;
  /// Label name -> index of the instruction that follows it.
  std::map<std::string, std::size_t> labels;
};

/// Twelve static counts, indexed by Category.
class FeatureVector {
 public:
  using Counts = std::array<std::uint64_t, kCategoryCount>;

  FeatureVector() = default;
  explicit FeatureVector(const Counts& counts) : counts_(counts) {}

  std::uint64_t operator[](Category c) const { return counts_[static_cast<std::size_t>(c)]; }
  std::uint64_t operator[](std::size_t i) const { return counts_.at(i); }
  std::uint64_t& operator[](std::size_t i) { return counts_.at(i); }

  const Counts& counts() const { return counts_; }
  std::uint64_t total() const;

  FeatureVector& operator+=(const FeatureVector& other);
  friend FeatureVector operator+(FeatureVector lhs, const FeatureVector& rhs) { return lhs += rhs; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  Counts counts_{};
};

/// Throws ParseError with UnknownMnemonic, UnresolvedLabel, EmptyProgram or
/// MalformedLine (empty jump target, duplicate or ill-formed label).
Program parse_program(std::string_view text, std::string name = {});

FeatureVector extract_features(const Program& program);

/// Renders a program in canonical form; parse_program(render_program(p))
/// reproduces the category sequence and label positions of `p`.
std::string render_program(const Program& program);

struct NamedFeatures {
  std::string name;
  FeatureVector features;
};

/// Reads and extracts every file; the program name is the file stem.
/// All-or-nothing: the first unreadable or malformed file aborts the batch,
/// and errors are tagged with the offending path.
std::vector<NamedFeatures> extract_features_batch(std::span<const std::filesystem::path> paths);

/// `name,add,sub,...,cmp` header plus one integer row per program.
std::string features_to_csv(std::span<const NamedFeatures> rows);

}  // namespace wcet::vmir
