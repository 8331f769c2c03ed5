#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfgnet/asm_parser.hpp"

namespace cfgnet {

/// How an edge came to exist.
enum class EdgeKind { Fallthrough, Jump, CallEntry, CallReturn };

std::string_view to_string(EdgeKind kind);
EdgeKind edge_kind_from_string(std::string_view s);

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind provenance = EdgeKind::Fallthrough;
};

/// Edge-construction variant.
///
/// `Faithful` adds the sequential edge after every instruction, including
/// unconditional jumps and returns. `Strict` suppresses the sequential edge
/// where execution cannot actually fall through.
enum class BuildMode { Faithful, Strict };

std::string_view to_string(BuildMode mode);
BuildMode build_mode_from_string(std::string_view s);

/// Directed control flow graph over instructions. Vertices keep file order;
/// edges are unique per (from, to) and stored sorted by (from, to). When two
/// rules produce the same (from, to) pair, the first-applied rule's
/// provenance is kept (sequential edges are applied before transfer edges).
class ControlFlowGraph {
 public:
  ControlFlowGraph() = default;
  ControlFlowGraph(std::vector<Instruction> vertices, std::vector<Edge> edges);

  const std::vector<Instruction>& vertices() const { return vertices_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_vertices() const { return vertices_.size(); }

  const std::vector<std::size_t>& predecessors(std::size_t v) const { return pred_[v]; }
  const std::vector<std::size_t>& successors(std::size_t v) const { return succ_[v]; }
  const std::vector<std::vector<std::size_t>>& predecessor_lists() const { return pred_; }
  const std::vector<std::vector<std::size_t>>& successor_lists() const { return succ_; }

 private:
  std::vector<Instruction> vertices_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> pred_;
  std::vector<std::vector<std::size_t>> succ_;
};

/// Read assembly text into blocks (the graph builder's entry point; delegates
/// to parse_assembly).
std::vector<Block> initialize_blocks(std::string_view asm_text,
                                     const Taxonomy& taxonomy = Taxonomy::builtin());

/// The unique block carrying `label`, or nullptr for unknown labels
/// (external symbols resolve to nothing).
const Block* find_block_by_label(const std::vector<Block>& blocks, std::string_view label);

/// Build the instruction-level CFG:
///   - a sequential edge links every instruction to its file-order successor
///     (label lines do not break sequential execution); in Strict mode the
///     edge is omitted after UncondJump and Return instructions
///   - a conditional or unconditional jump with a known target label gets an
///     edge to the first instruction at that label
///   - a call with a known target gets an entry edge to the first instruction
///     at the label and a return edge from the target block's last
///     instruction back to the instruction after the call (omitted when the
///     call ends the file)
/// A label followed immediately by another label owns no instructions; jumps
/// and calls to it resolve to the next instruction in file order, as the
/// assembler itself would. Unresolvable targets (external symbols, register
/// operands, labels with nothing after them) contribute no edge.
ControlFlowGraph build_cfg(const std::vector<Block>& blocks, BuildMode mode = BuildMode::Faithful);

/// Graphviz text: one node per vertex labeled "<index>: <mnemonic>", one line
/// per edge, both in deterministic order.
std::string export_dot(const ControlFlowGraph& graph);

/// JSON with the full per-vertex record and the sorted edge list;
/// import_json(export_json(g)) reconstructs g exactly.
std::string export_json(const ControlFlowGraph& graph);
ControlFlowGraph import_json(const std::string& text);

}  // namespace cfgnet
