#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfgnet/cfg_builder.hpp"
#include "cfgnet/matrix.hpp"

namespace cfgnet {

/// Vertex representation channels. View 1 is the instruction itself
/// (normalized symbols, or mnemonic only when operands are off); view 2 is
/// the instruction group.
inline constexpr int kInstructionView = 1;
inline constexpr int kGroupView = 2;

inline constexpr const char* kUnknownSymbol = "<unk>";

/// Dense symbol-to-id map for one view. Id 0 is always the unknown symbol;
/// the rest follow in first-encountered corpus order.
struct Vocabulary {
  int view = kInstructionView;
  std::vector<std::string> symbols;             // id -> symbol
  std::unordered_map<std::string, int> ids;     // symbol -> id

  static constexpr int unk_id = 0;

  std::size_t size() const { return symbols.size(); }
  int id_of(const std::string& symbol) const {
    const auto it = ids.find(symbol);
    return it == ids.end() ? unk_id : it->second;
  }
};

/// One embedding row per vocabulary symbol.
using EmbeddingTable = Matrix;

/// Per-vertex view vectors, stored concatenated (views * dim doubles per
/// vertex, view-major).
struct NodeViews {
  std::size_t views = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> data;  // per vertex

  std::span<const double> view(std::size_t vertex, std::size_t k) const {
    return {data[vertex].data() + k * dim, dim};
  }
};

/// Symbol ids feeding each vertex, plus the graph shape. This is what
/// training consumes: view vectors are re-derived from the current embedding
/// tables every forward pass so the tables stay trainable.
struct EncodedGraph {
  std::vector<std::vector<std::vector<int>>> symbol_ids;  // [vertex][view][component]
  std::vector<std::vector<std::size_t>> pred;
  std::vector<std::vector<std::size_t>> succ;

  std::size_t num_vertices() const { return symbol_ids.size(); }
};

/// Collect the symbols of one view over a corpus of graphs. View 1 takes
/// normalized instruction symbols (mnemonics only when use_operands is off);
/// view 2 takes instruction groups. The unknown symbol is always present.
Vocabulary build_vocabulary(const std::vector<ControlFlowGraph>& corpus, int view,
                            bool use_operands);

/// |vocab| x dim table, entries i.i.d. uniform on [-0.1, 0.1] from the given
/// seed. Same seed, same table.
EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

/// Mean of the symbols' embedding rows (unknown symbols fall back to the
/// unknown row). Errors on an empty symbol list.
std::vector<double> view_vector(const std::vector<std::string>& symbols, const Vocabulary& vocab,
                                const EmbeddingTable& table);

/// The symbols a vertex contributes to one view.
std::vector<std::string> view_symbols(const Instruction& inst, int view, bool use_operands);

/// Map every vertex to its per-view symbol ids and copy the adjacency.
EncodedGraph encode_graph(const ControlFlowGraph& graph, const std::vector<Vocabulary>& vocabs,
                          bool use_operands);

/// Dense view vectors for every vertex under the given tables.
NodeViews featurize_graph(const ControlFlowGraph& graph, const std::vector<Vocabulary>& vocabs,
                          const std::vector<EmbeddingTable>& tables, bool use_operands);

/// Re-derive dense vectors from an encoded graph (the forward pass input).
NodeViews decode_views(const EncodedGraph& graph, const std::vector<EmbeddingTable>& tables);

/// Text form, one `symbol<TAB>id` line per entry in id order.
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path, int view);

/// Text matrix with a `view rows cols` header line.
void save_embeddings(const EmbeddingTable& table, int view, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path, int* view_out = nullptr);

}  // namespace cfgnet
