#include "cfgnet/cfg_builder.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cfgnet {

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Fallthrough: return "Fallthrough";
    case EdgeKind::Jump: return "Jump";
    case EdgeKind::CallEntry: return "CallEntry";
    case EdgeKind::CallReturn: return "CallReturn";
  }
  return "Fallthrough";
}

EdgeKind edge_kind_from_string(std::string_view s) {
  if (s == "Fallthrough") return EdgeKind::Fallthrough;
  if (s == "Jump") return EdgeKind::Jump;
  if (s == "CallEntry") return EdgeKind::CallEntry;
  if (s == "CallReturn") return EdgeKind::CallReturn;
  throw std::invalid_argument("unknown edge kind: " + std::string(s));
}

std::string_view to_string(BuildMode mode) {
  return mode == BuildMode::Faithful ? "faithful" : "strict";
}

BuildMode build_mode_from_string(std::string_view s) {
  if (s == "faithful") return BuildMode::Faithful;
  if (s == "strict") return BuildMode::Strict;
  throw std::invalid_argument("unknown build mode: " + std::string(s));
}

ControlFlowGraph::ControlFlowGraph(std::vector<Instruction> vertices, std::vector<Edge> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  for (const auto& e : edges_) {
    if (e.from >= vertices_.size() || e.to >= vertices_.size()) {
      throw std::invalid_argument("edge endpoint out of range");
    }
  }
  std::stable_sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
  pred_.resize(vertices_.size());
  succ_.resize(vertices_.size());
  for (const auto& e : edges_) {
    succ_[e.from].push_back(e.to);
    pred_[e.to].push_back(e.from);
  }
}

std::vector<Block> initialize_blocks(std::string_view asm_text, const Taxonomy& taxonomy) {
  return parse_assembly(asm_text, taxonomy);
}

const Block* find_block_by_label(const std::vector<Block>& blocks, std::string_view label) {
  for (const auto& block : blocks) {
    if (!block.label.empty() && block.label == label) return &block;
  }
  return nullptr;
}

namespace {

// Where a transfer to this block actually lands / leaves. For an empty block
// the entry falls to the next block holding instructions; the exit is that
// block's last instruction.
struct ResolvedTarget {
  std::size_t first;
  std::size_t last;
};

std::optional<ResolvedTarget> resolve_block(const std::vector<Block>& blocks,
                                            std::size_t block_index) {
  for (std::size_t b = block_index; b < blocks.size(); ++b) {
    if (!blocks[b].instructions.empty()) {
      return ResolvedTarget{blocks[b].instructions.front().index,
                            blocks[b].instructions.back().index};
    }
  }
  return std::nullopt;
}

std::optional<ResolvedTarget> resolve_label(const std::vector<Block>& blocks,
                                            std::string_view label) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!blocks[b].label.empty() && blocks[b].label == label) return resolve_block(blocks, b);
  }
  return std::nullopt;
}

}  // namespace

ControlFlowGraph build_cfg(const std::vector<Block>& blocks, BuildMode mode) {
  std::vector<Instruction> vertices;
  for (const auto& block : blocks) {
    for (const auto& inst : block.instructions) vertices.push_back(inst);
  }

  std::vector<Edge> edges;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  const auto add_edge = [&](std::size_t from, std::size_t to, EdgeKind kind) {
    if (seen.emplace(from, to).second) edges.push_back({from, to, kind});
  };

  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Instruction& inst = vertices[i];

    const bool falls_through =
        mode == BuildMode::Faithful ||
        (inst.kind != InstructionKind::UncondJump && inst.kind != InstructionKind::Return);
    if (i + 1 < n && falls_through) add_edge(i, i + 1, EdgeKind::Fallthrough);

    if ((inst.kind == InstructionKind::CondJump || inst.kind == InstructionKind::UncondJump) &&
        !inst.operands.empty()) {
      if (const auto target = resolve_label(blocks, inst.operands.front())) {
        add_edge(i, target->first, EdgeKind::Jump);
      }
    }

    if (inst.kind == InstructionKind::Call && !inst.operands.empty()) {
      if (const auto target = resolve_label(blocks, inst.operands.front())) {
        add_edge(i, target->first, EdgeKind::CallEntry);
        if (i + 1 < n) add_edge(target->last, i + 1, EdgeKind::CallReturn);
      }
    }
  }

  return ControlFlowGraph(std::move(vertices), std::move(edges));
}

std::string export_dot(const ControlFlowGraph& graph) {
  std::ostringstream out;
  out << "digraph cfg {\n";
  for (const auto& inst : graph.vertices()) {
    out << "  n" << inst.index << " [label=\"" << inst.index << ": " << inst.mnemonic << "\"];\n";
  }
  for (const auto& e : graph.edges()) {
    out << "  n" << e.from << " -> n" << e.to << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_json(const ControlFlowGraph& graph) {
  nlohmann::ordered_json doc;
  doc["vertices"] = nlohmann::ordered_json::array();
  for (const auto& inst : graph.vertices()) {
    nlohmann::ordered_json v;
    v["index"] = inst.index;
    v["mnemonic"] = inst.mnemonic;
    v["operands"] = inst.operands;
    v["kind"] = to_string(inst.kind);
    v["group"] = inst.group;
    v["symbols"] = inst.normalized_symbols;
    doc["vertices"].push_back(std::move(v));
  }
  doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges()) {
    nlohmann::ordered_json j;
    j["from"] = e.from;
    j["to"] = e.to;
    j["provenance"] = to_string(e.provenance);
    doc["edges"].push_back(std::move(j));
  }
  return doc.dump();
}

ControlFlowGraph import_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  std::vector<Instruction> vertices;
  for (const auto& v : doc.at("vertices")) {
    Instruction inst;
    inst.index = v.at("index").get<std::size_t>();
    inst.mnemonic = v.at("mnemonic").get<std::string>();
    inst.operands = v.at("operands").get<std::vector<std::string>>();
    inst.kind = instruction_kind_from_string(v.at("kind").get<std::string>());
    inst.group = v.at("group").get<std::string>();
    inst.normalized_symbols = v.at("symbols").get<std::vector<std::string>>();
    vertices.push_back(std::move(inst));
  }
  std::vector<Edge> edges;
  for (const auto& j : doc.at("edges")) {
    edges.push_back({j.at("from").get<std::size_t>(), j.at("to").get<std::size_t>(),
                     edge_kind_from_string(j.at("provenance").get<std::string>())});
  }
  return ControlFlowGraph(std::move(vertices), std::move(edges));
}

}  // namespace cfgnet
