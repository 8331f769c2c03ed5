#include "cfgnet/features.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cfgnet/rng.hpp"

namespace cfgnet {

std::vector<std::string> view_symbols(const Instruction& inst, int view, bool use_operands) {
  if (view == kGroupView) return {inst.group};
  if (use_operands) return inst.normalized_symbols;
  return {inst.mnemonic};
}

Vocabulary build_vocabulary(const std::vector<ControlFlowGraph>& corpus, int view,
                            bool use_operands) {
  Vocabulary vocab;
  vocab.view = view;
  vocab.symbols.push_back(kUnknownSymbol);
  vocab.ids.emplace(kUnknownSymbol, Vocabulary::unk_id);
  for (const auto& graph : corpus) {
    for (const auto& inst : graph.vertices()) {
      for (auto& symbol : view_symbols(inst, view, use_operands)) {
        if (vocab.ids.emplace(symbol, static_cast<int>(vocab.symbols.size())).second) {
          vocab.symbols.push_back(std::move(symbol));
        }
      }
    }
  }
  return vocab;
}

EmbeddingTable init_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingTable table(vocab.size(), dim);
  Rng rng(seed);
  for (auto& entry : table.data()) entry = rng.uniform(-0.1, 0.1);
  return table;
}

std::vector<double> view_vector(const std::vector<std::string>& symbols, const Vocabulary& vocab,
                                const EmbeddingTable& table) {
  if (symbols.empty()) throw std::invalid_argument("view_vector: empty symbol list");
  std::vector<double> out(table.cols(), 0.0);
  for (const auto& symbol : symbols) {
    const auto row = table.row(static_cast<std::size_t>(vocab.id_of(symbol)));
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(symbols.size());
  for (auto& v : out) v *= inv;
  return out;
}

EncodedGraph encode_graph(const ControlFlowGraph& graph, const std::vector<Vocabulary>& vocabs,
                          bool use_operands) {
  EncodedGraph enc;
  enc.symbol_ids.resize(graph.num_vertices());
  for (std::size_t v = 0; v < graph.num_vertices(); ++v) {
    enc.symbol_ids[v].resize(vocabs.size());
    for (std::size_t k = 0; k < vocabs.size(); ++k) {
      const auto symbols = view_symbols(graph.vertices()[v], vocabs[k].view, use_operands);
      auto& ids = enc.symbol_ids[v][k];
      ids.reserve(symbols.size());
      for (const auto& symbol : symbols) ids.push_back(vocabs[k].id_of(symbol));
    }
  }
  enc.pred = graph.predecessor_lists();
  enc.succ = graph.successor_lists();
  return enc;
}

NodeViews decode_views(const EncodedGraph& graph, const std::vector<EmbeddingTable>& tables) {
  NodeViews views;
  views.views = tables.size();
  views.dim = tables.empty() ? 0 : tables.front().cols();
  views.data.resize(graph.num_vertices());
  for (std::size_t v = 0; v < graph.num_vertices(); ++v) {
    auto& vec = views.data[v];
    vec.assign(views.views * views.dim, 0.0);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      const auto& ids = graph.symbol_ids[v][k];
      if (ids.empty()) throw std::invalid_argument("vertex with no symbols in view");
      double* out = vec.data() + k * views.dim;
      for (const int id : ids) {
        const auto row = tables[k].row(static_cast<std::size_t>(id));
        for (std::size_t c = 0; c < views.dim; ++c) out[c] += row[c];
      }
      const double inv = 1.0 / static_cast<double>(ids.size());
      for (std::size_t c = 0; c < views.dim; ++c) out[c] *= inv;
    }
  }
  return views;
}

NodeViews featurize_graph(const ControlFlowGraph& graph, const std::vector<Vocabulary>& vocabs,
                          const std::vector<EmbeddingTable>& tables, bool use_operands) {
  if (vocabs.size() != tables.size()) {
    throw std::invalid_argument("featurize_graph: one table per vocabulary required");
  }
  return decode_views(encode_graph(graph, vocabs, use_operands), tables);
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  for (std::size_t id = 0; id < vocab.symbols.size(); ++id) {
    out << vocab.symbols[id] << '\t' << id << '\n';
  }
}

Vocabulary load_vocabulary(const std::string& path, int view) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  vocab.view = view;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("bad vocabulary line: " + line);
    const std::string symbol = line.substr(0, tab);
    const int id = std::stoi(line.substr(tab + 1));
    if (id != static_cast<int>(vocab.symbols.size())) {
      throw std::runtime_error("vocabulary ids must be dense and ordered: " + path);
    }
    vocab.ids.emplace(symbol, id);
    vocab.symbols.push_back(symbol);
  }
  if (vocab.symbols.empty() || vocab.symbols.front() != kUnknownSymbol) {
    throw std::runtime_error("vocabulary missing unknown symbol at id 0: " + path);
  }
  return vocab;
}

void save_embeddings(const EmbeddingTable& table, int view, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << view << ' ' << table.rows() << ' ' << table.cols() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto row = table.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << buf << (c + 1 == row.size() ? '\n' : ' ');
    }
  }
}

EmbeddingTable load_embeddings(const std::string& path, int* view_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  int view = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!(in >> view >> rows >> cols)) {
    throw std::runtime_error("bad embedding header in " + path);
  }
  EmbeddingTable table(rows, cols);
  for (auto& entry : table.data()) {
    if (!(in >> entry)) throw std::runtime_error("truncated embedding file: " + path);
  }
  if (view_out) *view_out = view;
  return table;
}

}  // namespace cfgnet
