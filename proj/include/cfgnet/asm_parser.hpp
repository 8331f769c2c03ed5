#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfgnet {

/// Control-transfer class of an instruction.
enum class InstructionKind { CondJump, UncondJump, Call, Return, Other };

std::string_view to_string(InstructionKind kind);
InstructionKind instruction_kind_from_string(std::string_view s);

/// One parsed assembly instruction.
///
/// `index` is the ordinal position over the whole file (0-based), stable
/// across block boundaries so that graph vertices keep file order.
/// `normalized_symbols` is the mnemonic followed by the name/reg/val
/// normalization of each operand, in operand order.
struct Instruction {
  std::size_t index = 0;
  std::string mnemonic;
  std::vector<std::string> operands;
  InstructionKind kind = InstructionKind::Other;
  std::vector<std::string> normalized_symbols;
  std::string group;
};

/// A labeled run of instructions. The file-leading block (instructions before
/// the first label) has an empty label and exists only when non-empty.
/// Consecutive label lines produce empty blocks; they take no part in the
/// instruction sequence but keep their label addressable.
struct Block {
  std::string label;
  std::vector<Instruction> instructions;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Coarse mnemonic category table (the second node view). Rules map a
/// mnemonic prefix to a group from the closed set below; the longest
/// matching prefix wins, no match falls back to "other".
class Taxonomy {
 public:
  /// Built-in rules covering the common gcc x86-64 mnemonic families.
  static Taxonomy builtin();

  /// Built-in rules plus overrides loaded from a text table, one
  /// `prefix<TAB>group` per line ('#' comments allowed). A file rule with the
  /// same prefix as a built-in replaces it. Groups outside the closed set are
  /// rejected.
  static Taxonomy with_overrides(const std::string& path);

  static const std::vector<std::string>& closed_groups();

  void add_rule(std::string prefix, const std::string& group);
  std::string group_of(std::string_view mnemonic) const;

 private:
  // prefix -> group, consulted longest-prefix-first
  std::vector<std::pair<std::string, std::string>> rules_;
};

/// Split GNU-assembler AT&T text (as from `gcc -S`) into labeled blocks.
/// Directive and comment lines are dropped; a token ending in ':' at line
/// start opens a new block; everything else must parse as an instruction.
/// Throws ParseError (1-based line number) on malformed lines and on a label
/// defined twice.
std::vector<Block> parse_assembly(std::string_view text, const Taxonomy& taxonomy = Taxonomy::builtin());

/// Total, pure mnemonic classification: jmp* -> UncondJump, other j* ->
/// CondJump, call* -> Call, ret* -> Return, anything else Other.
InstructionKind classify_instruction(std::string_view mnemonic);

/// Collapse one trimmed operand to "name", "reg", or "val":
/// anything touching a register ('%') is "reg", immediates ('$'-prefixed)
/// and bare numeric literals are "val", remaining identifiers are "name".
/// Throws std::invalid_argument on an empty operand.
std::string normalize_operand(std::string_view operand);

/// Mnemonic followed by the normalized operands, in order.
std::vector<std::string> tokenize_instruction(const Instruction& inst);

}  // namespace cfgnet
