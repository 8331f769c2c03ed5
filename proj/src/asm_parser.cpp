#include "cfgnet/asm_parser.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

namespace cfgnet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_mnemonic(std::string_view token) {
  if (token.empty() || !std::isalpha(static_cast<unsigned char>(token.front()))) return false;
  return std::all_of(token.begin(), token.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_';
  });
}

bool numeric_literal(std::string_view s) {
  if (s.empty()) return false;
  if (s.front() == '+' || s.front() == '-') s.remove_prefix(1);
  if (s.empty()) return false;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    return std::all_of(s.begin() + 2, s.end(),
                       [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
  }
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

// Split the operand field at commas that are not nested in parentheses,
// so `-8(%rbp,%rax,4)` stays one operand.
std::vector<std::string> split_operands(std::string_view rest, std::size_t line_no) {
  std::vector<std::string> out;
  if (trim(rest).empty()) return out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= rest.size(); ++i) {
    if (i == rest.size() || (rest[i] == ',' && depth == 0)) {
      const auto piece = trim(rest.substr(start, i - start));
      if (piece.empty()) throw ParseError(line_no, "empty operand");
      out.emplace_back(piece);
      start = i + 1;
    } else if (rest[i] == '(') {
      ++depth;
    } else if (rest[i] == ')') {
      --depth;
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(InstructionKind kind) {
  switch (kind) {
    case InstructionKind::CondJump: return "CondJump";
    case InstructionKind::UncondJump: return "UncondJump";
    case InstructionKind::Call: return "Call";
    case InstructionKind::Return: return "Return";
    case InstructionKind::Other: return "Other";
  }
  return "Other";
}

InstructionKind instruction_kind_from_string(std::string_view s) {
  if (s == "CondJump") return InstructionKind::CondJump;
  if (s == "UncondJump") return InstructionKind::UncondJump;
  if (s == "Call") return InstructionKind::Call;
  if (s == "Return") return InstructionKind::Return;
  if (s == "Other") return InstructionKind::Other;
  throw std::invalid_argument("unknown instruction kind: " + std::string(s));
}

InstructionKind classify_instruction(std::string_view mnemonic) {
  if (mnemonic.starts_with("jmp")) return InstructionKind::UncondJump;
  if (mnemonic.starts_with("j")) return InstructionKind::CondJump;
  if (mnemonic.starts_with("call")) return InstructionKind::Call;
  if (mnemonic.starts_with("ret")) return InstructionKind::Return;
  return InstructionKind::Other;
}

std::string normalize_operand(std::string_view operand) {
  if (operand.empty()) throw std::invalid_argument("empty operand");
  if (operand.find('%') != std::string_view::npos) return "reg";
  if (operand.front() == '$' || numeric_literal(operand)) return "val";
  return "name";
}

std::vector<std::string> tokenize_instruction(const Instruction& inst) {
  std::vector<std::string> symbols;
  symbols.reserve(1 + inst.operands.size());
  symbols.push_back(inst.mnemonic);
  for (const auto& op : inst.operands) symbols.push_back(normalize_operand(op));
  return symbols;
}

const std::vector<std::string>& Taxonomy::closed_groups() {
  static const std::vector<std::string> groups = {
      "cond-jump", "uncond-jump", "call",  "return",  "move", "arithmetic",
      "logic",     "compare",     "stack", "convert", "lea",  "other"};
  return groups;
}

Taxonomy Taxonomy::builtin() {
  Taxonomy t;
  const std::pair<const char*, const char*> rules[] = {
      {"jmp", "uncond-jump"}, {"j", "cond-jump"},    {"call", "call"},
      {"ret", "return"},      {"mov", "move"},       {"cmov", "move"},
      {"push", "stack"},      {"pop", "stack"},      {"leave", "stack"},
      {"enter", "stack"},     {"lea", "lea"},        {"add", "arithmetic"},
      {"sub", "arithmetic"},  {"inc", "arithmetic"}, {"dec", "arithmetic"},
      {"imul", "arithmetic"}, {"mul", "arithmetic"}, {"idiv", "arithmetic"},
      {"div", "arithmetic"},  {"neg", "arithmetic"}, {"adc", "arithmetic"},
      {"sbb", "arithmetic"},  {"and", "logic"},      {"or", "logic"},
      {"xor", "logic"},       {"not", "logic"},      {"shl", "logic"},
      {"shr", "logic"},       {"sal", "logic"},      {"sar", "logic"},
      {"rol", "logic"},       {"ror", "logic"},      {"cmp", "compare"},
      {"test", "compare"},    {"set", "compare"},    {"cvt", "convert"},
      {"cbtw", "convert"},    {"cwtl", "convert"},   {"cltq", "convert"},
      {"cltd", "convert"},    {"cqto", "convert"},   {"cwtd", "convert"},
      {"cbw", "convert"},     {"cwde", "convert"},   {"cdqe", "convert"},
      {"cdq", "convert"},     {"cqo", "convert"},    {"cwd", "convert"},
  };
  for (const auto& [prefix, group] : rules) t.add_rule(prefix, group);
  return t;
}

Taxonomy Taxonomy::with_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open taxonomy file: " + path);
  Taxonomy t = builtin();
  std::string line;
  std::size_t line_no = 0;
  const auto& groups = closed_groups();
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto tab = text.find('\t');
    if (tab == std::string_view::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'prefix<TAB>group'");
    }
    const auto prefix = trim(text.substr(0, tab));
    const auto group = trim(text.substr(tab + 1));
    if (prefix.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty prefix");
    }
    if (std::find(groups.begin(), groups.end(), group) == groups.end()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown group '" +
                               std::string(group) + "'");
    }
    t.add_rule(std::string(prefix), std::string(group));
  }
  return t;
}

void Taxonomy::add_rule(std::string prefix, const std::string& group) {
  for (auto& rule : rules_) {
    if (rule.first == prefix) {
      rule.second = group;
      return;
    }
  }
  rules_.emplace_back(std::move(prefix), group);
}

std::string Taxonomy::group_of(std::string_view mnemonic) const {
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [prefix, group] : rules_) {
    if (prefix.size() >= best_len && mnemonic.starts_with(prefix)) {
      best = &group;
      best_len = prefix.size();
    }
  }
  return best ? *best : "other";
}

std::vector<Block> parse_assembly(std::string_view text, const Taxonomy& taxonomy) {
  std::vector<Block> blocks;
  bool block_open = false;
  Block current;
  std::unordered_set<std::string> seen_labels;
  std::size_t index = 0;
  std::size_t line_no = 0;

  const auto flush = [&] {
    if (block_open) blocks.push_back(std::move(current));
    current = Block{};
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    std::string_view rest = trim(line);

    // A line may carry several labels and then an instruction (`L1: ret`).
    while (!rest.empty()) {
      const auto ws = rest.find_first_of(" \t");
      const std::string_view token = ws == std::string_view::npos ? rest : rest.substr(0, ws);

      if (token.size() > 1 && token.back() == ':') {
        const std::string label(token.substr(0, token.size() - 1));
        if (!seen_labels.insert(label).second) {
          throw ParseError(line_no, "duplicate label '" + label + "'");
        }
        flush();
        block_open = true;
        current.label = label;
        rest = trim(rest.substr(token.size()));
        continue;
      }

      if (token.front() == '.') break;  // assembler directive, no graph semantics

      if (!valid_mnemonic(token)) {
        throw ParseError(line_no, "no parseable mnemonic in '" + std::string(rest) + "'");
      }

      Instruction inst;
      inst.index = index++;
      inst.mnemonic = std::string(token);
      inst.operands = split_operands(rest.substr(token.size()), line_no);
      inst.kind = classify_instruction(inst.mnemonic);
      inst.normalized_symbols = tokenize_instruction(inst);
      inst.group = taxonomy.group_of(inst.mnemonic);

      if (!block_open) {
        block_open = true;
        current.label.clear();
      }
      current.instructions.push_back(std::move(inst));
      break;
    }
  }
  flush();
  return blocks;
}

}  // namespace cfgnet
