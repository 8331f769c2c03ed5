#include "cfgnet/cfg_builder.hpp"

#include <algorithm>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"

using namespace cfgnet;
using oracles::EdgeSet;

namespace {

std::optional<EdgeKind> provenance_of(const ControlFlowGraph& g, std::size_t from, std::size_t to) {
  for (const Edge& e : g.edges()) {
    if (e.from == from && e.to == to) return e.provenance;
  }
  return std::nullopt;
}

ControlFlowGraph graph_from(std::string_view text, BuildMode mode) {
  return build_cfg(initialize_blocks(text), mode);
}

}  // namespace

TEST_CASE("call example, both modes") {
  // 0 movl  1 call helper  2 movl  3 ret   helper: 4 addl  5 jmp out  6 movl   out: 7 ret
  const char* text =
      "main:\n"
      "\tmovl $1, %eax\n"
      "\tcall helper\n"
      "\tmovl $2, %ebx\n"
      "\tret\n"
      "helper:\n"
      "\taddl $1, %eax\n"
      "\tjmp out\n"
      "\tmovl $9, %ecx\n"
      "out:\n"
      "\tret\n";

  const auto faithful = graph_from(text, BuildMode::Faithful);
  REQUIRE(faithful.num_vertices() == 8);
  const EdgeSet expect_faithful = {
      {0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7},  // sequential
      {1, 4},                                                  // call entry
      {6, 2},                                                  // return from helper's last instruction
      {5, 7},                                                  // jmp out
  };
  CHECK(oracles::edge_set(faithful) == expect_faithful);
  CHECK(provenance_of(faithful, 1, 4) == EdgeKind::CallEntry);
  CHECK(provenance_of(faithful, 6, 2) == EdgeKind::CallReturn);
  CHECK(provenance_of(faithful, 5, 7) == EdgeKind::Jump);

  const auto strict = graph_from(text, BuildMode::Strict);
  EdgeSet expect_strict = expect_faithful;
  expect_strict.erase({3, 4});  // after ret
  expect_strict.erase({5, 6});  // after jmp
  CHECK(oracles::edge_set(strict) == expect_strict);
  CHECK_FALSE(provenance_of(strict, 3, 4).has_value());
}

TEST_CASE("jump into an empty label resolves to the next instruction") {
  const auto g = graph_from(
      "f:\n"
      "\tjmp mid\n"
      "mid:\n"
      "after:\n"
      "\tret\n",
      BuildMode::Strict);
  REQUIRE(g.num_vertices() == 2);
  CHECK(oracles::edge_set(g) == EdgeSet{{0, 1}});
  CHECK(provenance_of(g, 0, 1) == EdgeKind::Jump);
}

TEST_CASE("jump to a trailing empty label contributes no edge") {
  const auto g = graph_from("f:\n\tjmp end\nend:\n", BuildMode::Strict);
  REQUIRE(g.num_vertices() == 1);
  CHECK(g.edges().empty());
}

TEST_CASE("calls to external symbols add no call edges") {
  const auto g = graph_from("f:\n\tcall printf\n\tret\n", BuildMode::Faithful);
  CHECK(oracles::edge_set(g) == EdgeSet{{0, 1}});
  CHECK(provenance_of(g, 0, 1) == EdgeKind::Fallthrough);
}

TEST_CASE("call as the last instruction omits the return edge") {
  const auto g = graph_from(
      "f:\n"
      "\tnop\n"
      "back:\n"
      "\tcall back\n",
      BuildMode::Faithful);
  // call at 1 targets block "back" whose instructions are {1}; no i+1 exists.
  CHECK(oracles::edge_set(g) == EdgeSet{{0, 1}, {1, 1}});
  CHECK(provenance_of(g, 1, 1) == EdgeKind::CallEntry);
}

TEST_CASE("duplicate (from,to) keeps the first-applied provenance") {
  // jmp to the lexically next instruction: sequential edge exists in faithful
  // mode and absorbs the jump edge; in strict mode only the jump edge remains.
  const char* text = "f:\n\tjmp next\nnext:\n\tret\n";
  const auto faithful = graph_from(text, BuildMode::Faithful);
  REQUIRE(oracles::edge_set(faithful) == EdgeSet{{0, 1}});
  CHECK(provenance_of(faithful, 0, 1) == EdgeKind::Fallthrough);

  const auto strict = graph_from(text, BuildMode::Strict);
  REQUIRE(oracles::edge_set(strict) == EdgeSet{{0, 1}});
  CHECK(provenance_of(strict, 0, 1) == EdgeKind::Jump);
}

TEST_CASE("conditional jump keeps both outgoing edges in strict mode") {
  const auto g = graph_from(
      "f:\n"
      "\tcmpl $0, %eax\n"
      "\tje done\n"
      "\tmovl $1, %ebx\n"
      "done:\n"
      "\tret\n",
      BuildMode::Strict);
  CHECK(oracles::edge_set(g) == EdgeSet{{0, 1}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(provenance_of(g, 1, 2) == EdgeKind::Fallthrough);
  CHECK(provenance_of(g, 1, 3) == EdgeKind::Jump);
}

TEST_CASE("edges come out sorted by (from, to)") {
  const auto g = graph_from(
      "f:\n"
      "\tje b\n"
      "\tje a\n"
      "a:\n"
      "\tnop\n"
      "b:\n"
      "\tret\n",
      BuildMode::Faithful);
  const auto& edges = g.edges();
  REQUIRE(!edges.empty());
  const bool sorted = std::is_sorted(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
    return std::pair(l.from, l.to) < std::pair(r.from, r.to);
  });
  CHECK(sorted);
}

TEST_CASE("adjacency lists agree with the edge list") {
  cfgnet::Rng rng(7101);
  for (int round = 0; round < 20; ++round) {
    const auto blocks = initialize_blocks(oracles::random_snippet(rng));
    const auto g = build_cfg(blocks, round % 2 ? BuildMode::Strict : BuildMode::Faithful);
    EdgeSet from_adj;
    for (std::size_t u = 0; u < g.num_vertices(); ++u) {
      for (std::size_t s : g.successors(u)) from_adj.insert({u, s});
    }
    CHECK(from_adj == oracles::edge_set(g));
    EdgeSet from_pred;
    for (std::size_t u = 0; u < g.num_vertices(); ++u) {
      for (std::size_t p : g.predecessors(u)) from_pred.insert({p, u});
    }
    CHECK(from_pred == oracles::edge_set(g));
  }
}

TEST_CASE("graph constructor rejects out-of-range endpoints") {
  std::vector<Instruction> two(2);
  two[0].index = 0;
  two[0].mnemonic = "nop";
  two[1].index = 1;
  two[1].mnemonic = "ret";
  CHECK_THROWS(ControlFlowGraph(two, {Edge{0, 5, EdgeKind::Fallthrough}}));
  CHECK_THROWS(ControlFlowGraph(two, {Edge{5, 0, EdgeKind::Fallthrough}}));
}

TEST_CASE("dot export is exact for a small graph") {
  const auto g = graph_from("f:\n\tmovl $1, %eax\n\tret\n", BuildMode::Faithful);
  CHECK(export_dot(g) ==
        "digraph cfg {\n"
        "  n0 [label=\"0: movl\"];\n"
        "  n1 [label=\"1: ret\"];\n"
        "  n0 -> n1;\n"
        "}\n");
}

TEST_CASE("json export round trips") {
  cfgnet::Rng rng(88);
  for (int round = 0; round < 10; ++round) {
    const auto g = build_cfg(initialize_blocks(oracles::random_snippet(rng)),
                             round % 2 ? BuildMode::Strict : BuildMode::Faithful);
    const auto back = import_json(export_json(g));
    REQUIRE(back.num_vertices() == g.num_vertices());
    REQUIRE(back.edges().size() == g.edges().size());
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
      CHECK(back.edges()[i].from == g.edges()[i].from);
      CHECK(back.edges()[i].to == g.edges()[i].to);
      CHECK(back.edges()[i].provenance == g.edges()[i].provenance);
    }
    for (std::size_t v = 0; v < g.num_vertices(); ++v) {
      const auto& a = g.vertices()[v];
      const auto& b = back.vertices()[v];
      CHECK(a.index == b.index);
      CHECK(a.mnemonic == b.mnemonic);
      CHECK(a.operands == b.operands);
      CHECK(a.kind == b.kind);
      CHECK(a.normalized_symbols == b.normalized_symbols);
      CHECK(a.group == b.group);
    }
  }
}

TEST_CASE("import_json rejects malformed documents") {
  CHECK_THROWS(import_json("not json"));
  CHECK_THROWS(import_json("{}"));
}

TEST_CASE("random snippets match the brute-force edge derivation") {
  cfgnet::Rng rng(424242);
  for (int round = 0; round < 60; ++round) {
    const std::string text = oracles::random_snippet(rng);
    INFO("snippet:\n" << text);
    const auto blocks = initialize_blocks(text);
    for (bool strict : {false, true}) {
      const auto g = build_cfg(blocks, strict ? BuildMode::Strict : BuildMode::Faithful);
      CHECK(oracles::edge_set(g) == oracles::brute_force_edges(blocks, strict));
    }
  }
}

TEST_CASE("build mode strings round trip") {
  CHECK(build_mode_from_string("faithful") == BuildMode::Faithful);
  CHECK(build_mode_from_string("strict") == BuildMode::Strict);
  CHECK(to_string(BuildMode::Faithful) == "faithful");
  CHECK(to_string(BuildMode::Strict) == "strict");
  CHECK_THROWS(build_mode_from_string("bogus"));
  for (const auto kind :
       {EdgeKind::Fallthrough, EdgeKind::Jump, EdgeKind::CallEntry, EdgeKind::CallReturn}) {
    CHECK(edge_kind_from_string(to_string(kind)) == kind);
  }
}
