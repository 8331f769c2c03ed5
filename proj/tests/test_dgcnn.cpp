#include "cfgnet/dgcnn.hpp"

#include <cmath>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"

using namespace cfgnet;

namespace {

Hyperparams tiny_hp() {
  Hyperparams hp;
  hp.token_dim = 4;
  hp.views = 2;
  hp.conv1_filters = 5;
  hp.conv2_filters = 6;
  hp.fc_units = 7;
  hp.classes = 3;
  hp.epochs = 5;
  hp.patience = 0;
  hp.seed = 11;
  return hp;
}

std::vector<Vocabulary> tiny_vocabs(std::size_t views, std::size_t extra = 8) {
  std::vector<Vocabulary> out;
  out.push_back(oracles::synthetic_vocab(kInstructionView, extra));
  if (views == 2) out.push_back(oracles::synthetic_vocab(kGroupView, extra));
  return out;
}

// A linear chain graph with n placeholder vertices.
ControlFlowGraph chain_graph(std::size_t n) {
  std::vector<Instruction> verts(n);
  for (std::size_t i = 0; i < n; ++i) {
    verts[i].index = i;
    verts[i].mnemonic = "nop";
    verts[i].group = "other";
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, EdgeKind::Fallthrough});
  return ControlFlowGraph(std::move(verts), std::move(edges));
}

NodeViews views_from(std::vector<std::vector<double>> rows, std::size_t views, std::size_t dim) {
  NodeViews nv;
  nv.views = views;
  nv.dim = dim;
  nv.data = std::move(rows);
  return nv;
}

bool tensors_equal(DgcnnModel& a, DgcnnModel& b) {
  const auto ta = oracles::parameter_tensors(a);
  const auto tb = oracles::parameter_tensors(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (*ta[i] != *tb[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("conv_forward with zero weights gives tanh of bias") {
  ConvLayer layer;
  layer.w_cur = Matrix(2, 3);
  layer.w_in = Matrix(2, 3);
  layer.w_out = Matrix(2, 3);
  layer.bias = {0.5, -0.25};
  const auto g = chain_graph(3);
  const std::vector<std::vector<double>> x(3, {1.0, 2.0, 3.0});
  const auto y = conv_forward(layer, x, g);
  REQUIRE(y.size() == 3);
  for (const auto& row : y) {
    CHECK_THAT(row[0], Catch::Matchers::WithinAbs(std::tanh(0.5), 1e-15));
    CHECK_THAT(row[1], Catch::Matchers::WithinAbs(std::tanh(-0.25), 1e-15));
  }
}

TEST_CASE("conv_forward with identity current weights on an edgeless graph") {
  ConvLayer layer;
  layer.w_cur = Matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) layer.w_cur(i, i) = 1.0;
  layer.w_in = Matrix(3, 3);
  layer.w_out = Matrix(3, 3);
  layer.bias = {0.0, 0.0, 0.0};
  const auto g = ControlFlowGraph(chain_graph(2).vertices(), {});
  const std::vector<std::vector<double>> x{{0.1, -0.2, 0.3}, {1.0, 0.0, -1.0}};
  const auto y = conv_forward(layer, x, g);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK_THAT(y[u][j], Catch::Matchers::WithinAbs(std::tanh(x[u][j]), 1e-15));
    }
  }
}

TEST_CASE("conv_forward matches the scalar re-derivation") {
  cfgnet::Rng rng(301);
  for (int round = 0; round < 15; ++round) {
    const auto blocks = initialize_blocks(oracles::random_snippet(rng, 12));
    const auto g = build_cfg(blocks);
    if (g.num_vertices() == 0) continue;
    const std::size_t in_dim = 3;
    const std::size_t filters = 4;
    ConvLayer layer;
    layer.w_cur = Matrix(filters, in_dim);
    layer.w_in = Matrix(filters, in_dim);
    layer.w_out = Matrix(filters, in_dim);
    layer.bias.resize(filters);
    auto fill = [&](std::vector<double>& v) {
      for (double& x : v) x = (static_cast<double>(rng.below(2001)) - 1000.0) / 1000.0;
    };
    fill(layer.w_cur.data());
    fill(layer.w_in.data());
    fill(layer.w_out.data());
    fill(layer.bias);
    std::vector<std::vector<double>> x(g.num_vertices(), std::vector<double>(in_dim));
    for (auto& row : x) fill(row);

    for (bool mean : {false, true}) {
      const auto got = conv_forward(layer, x, g, mean);
      auto want = oracles::scalar_conv(layer, x, g.predecessor_lists(), g.successor_lists());
      if (mean) {
        // redo the oracle with averaged neighbor groups
        for (std::size_t u = 0; u < x.size(); ++u) {
          for (std::size_t f = 0; f < layer.filters(); ++f) {
            double acc = layer.bias[f];
            for (std::size_t j = 0; j < in_dim; ++j) acc += layer.w_cur(f, j) * x[u][j];
            const auto& preds = g.predecessors(u);
            const auto& succs = g.successors(u);
            for (std::size_t j = 0; j < in_dim; ++j) {
              double ps = 0.0;
              for (std::size_t p : preds) ps += x[p][j];
              if (!preds.empty()) acc += layer.w_in(f, j) * ps / static_cast<double>(preds.size());
              double ss = 0.0;
              for (std::size_t s : succs) ss += x[s][j];
              if (!succs.empty()) acc += layer.w_out(f, j) * ss / static_cast<double>(succs.size());
            }
            want[u][f] = std::tanh(acc);
          }
        }
      }
      REQUIRE(got.size() == want.size());
      for (std::size_t u = 0; u < got.size(); ++u) {
        for (std::size_t f = 0; f < layer.filters(); ++f) {
          CHECK_THAT(got[u][f], Catch::Matchers::WithinAbs(want[u][f], 1e-12));
        }
      }
    }
  }
}

TEST_CASE("conv_forward rejects mismatched input width") {
  ConvLayer layer;
  layer.w_cur = Matrix(2, 3);
  layer.w_in = Matrix(2, 3);
  layer.w_out = Matrix(2, 3);
  layer.bias = {0.0, 0.0};
  const std::vector<std::vector<double>> x{{1.0, 2.0}};  // width 2, layer wants 3
  CHECK_THROWS(conv_forward(layer, x, chain_graph(1)));
}

TEST_CASE("dynamic_max_pool basics") {
  CHECK(dynamic_max_pool({{3.0, -1.0}}) == std::vector<double>{3.0, -1.0});
  CHECK(dynamic_max_pool({{1.0, -2.0}, {0.0, 5.0}}) == std::vector<double>{1.0, 5.0});
  CHECK_THROWS(dynamic_max_pool({}));
  CHECK_THROWS(dynamic_max_pool({{1.0}, {1.0, 2.0}}));  // ragged
}

TEST_CASE("dynamic_max_pool equals a direct column scan") {
  cfgnet::Rng rng(302);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t d = 1 + rng.below(6);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& row : rows) {
      for (double& x : row) x = (static_cast<double>(rng.below(2001)) - 1000.0) / 500.0;
    }
    const auto pooled = dynamic_max_pool(rows);
    REQUIRE(pooled.size() == d);
    for (std::size_t j = 0; j < d; ++j) {
      double best = rows[0][j];
      for (std::size_t u = 1; u < n; ++u) best = std::max(best, rows[u][j]);
      CHECK(pooled[j] == best);
    }
  }
}

TEST_CASE("zero model spreads probability uniformly") {
  auto hp = tiny_hp();
  auto model = init_model(hp, tiny_vocabs(hp.views));
  for (auto* t : oracles::parameter_tensors(model)) std::fill(t->begin(), t->end(), 0.0);
  const auto g = chain_graph(4);
  NodeViews nv = views_from(std::vector<std::vector<double>>(4, std::vector<double>(8, 0.3)), 2, 4);
  const auto probs = forward(model, nv, g);
  REQUIRE(probs.size() == 3);
  for (double p : probs) CHECK_THAT(p, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("forward output is a distribution") {
  cfgnet::Rng rng(303);
  auto hp = tiny_hp();
  auto model = init_model(hp, tiny_vocabs(hp.views));
  for (int round = 0; round < 25; ++round) {
    const std::size_t n = 1 + rng.below(6);
    const auto g = chain_graph(n);
    std::vector<std::vector<double>> rows(n, std::vector<double>(model.input_dim()));
    for (auto& row : rows) {
      for (double& x : row) x = (static_cast<double>(rng.below(2001)) - 1000.0) / 250.0;
    }
    const auto probs = forward(model, views_from(std::move(rows), hp.views, hp.token_dim), g);
    double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
    for (double p : probs) CHECK(p >= 0.0);
  }
}

TEST_CASE("loss is cross entropy") {
  const std::vector<double> uniform(5, 0.2);
  CHECK_THAT(loss(uniform, 2), Catch::Matchers::WithinAbs(std::log(5.0), 1e-12));
  const std::vector<double> sure{0.01, 0.98, 0.01};
  CHECK_THAT(loss(sure, 1), Catch::Matchers::WithinAbs(-std::log(0.98), 1e-12));
  CHECK(loss(sure, 1) < loss(sure, 0));
  CHECK_THROWS(loss(sure, 3));
  CHECK_THROWS(loss(sure, -1));
}

TEST_CASE("analytic gradients agree with finite differences") {
  cfgnet::Rng rng(304);
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  for (int round = 0; round < 6; ++round) {
    hp.seed = 20 + static_cast<std::uint64_t>(round);
    auto model = init_model(hp, vocabs);
    const auto sample =
        oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 3, 5, hp.classes);
    const double worst = oracles::grad_check(model, sample);
    INFO("round " << round << " worst rel err " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradients agree with finite differences in mean-neighbor mode") {
  cfgnet::Rng rng(305);
  auto hp = tiny_hp();
  hp.mean_neighbors = true;
  const auto vocabs = tiny_vocabs(hp.views);
  auto model = init_model(hp, vocabs);
  const auto sample =
      oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 4, 6, hp.classes);
  CHECK(oracles::grad_check(model, sample) < 1e-4);
}

TEST_CASE("unused embedding rows get zero gradient") {
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  auto model = init_model(hp, vocabs);
  EncodedSample sample;
  sample.label = 1;
  sample.graph.symbol_ids = {{{1}, {1}}, {{2}, {1}}};  // rows 1, 2 only
  sample.graph.pred = {{}, {0}};
  sample.graph.succ = {{1}, {}};
  const auto grads = backward(model, sample);
  for (std::size_t k = 0; k < grads.embeddings.size(); ++k) {
    const auto& table = grads.embeddings[k];
    bool row1_nonzero = false;
    for (std::size_t j = 0; j < table.cols(); ++j) {
      CHECK(table(0, j) == 0.0);              // unk row untouched
      CHECK(table(table.rows() - 1, j) == 0.0);
      if (table(1, j) != 0.0) row1_nonzero = true;
    }
    CHECK(row1_nonzero);
  }
}

TEST_CASE("pooling ties route gradient to the lowest vertex") {
  // Two identical, unconnected vertices pool to the same vector as one vertex
  // alone; the tie must route each pooled dimension to vertex 0, so the
  // embedding gradient for the shared symbol equals the single-vertex case.
  auto hp = tiny_hp();
  hp.views = 1;
  const auto vocabs = tiny_vocabs(1);
  auto model = init_model(hp, vocabs);

  EncodedSample one;
  one.label = 2;
  one.graph.symbol_ids = {{{3}}};
  one.graph.pred = {{}};
  one.graph.succ = {{}};

  EncodedSample two;
  two.label = 2;
  two.graph.symbol_ids = {{{3}}, {{3}}};
  two.graph.pred = {{}, {}};
  two.graph.succ = {{}, {}};

  const auto g1 = backward(model, one);
  const auto g2 = backward(model, two);
  for (std::size_t j = 0; j < g1.embeddings[0].cols(); ++j) {
    CHECK_THAT(g2.embeddings[0](3, j),
               Catch::Matchers::WithinAbs(g1.embeddings[0](3, j), 1e-12));
  }
  CHECK(g1.fc_w.data() == g2.fc_w.data());
}

TEST_CASE("disconnected components do not influence each other") {
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  auto model = init_model(hp, vocabs);

  // component A: vertices 0-1 chained; component B: vertex 2 alone
  EncodedGraph g;
  g.symbol_ids = {{{1}, {2}}, {{2}, {3}}, {{4}, {1}}};
  g.pred = {{}, {0}, {}};
  g.succ = {{1}, {}, {}};

  EncodedGraph just_a;
  just_a.symbol_ids = {{{1}, {2}}, {{2}, {3}}};
  just_a.pred = {{}, {0}};
  just_a.succ = {{1}, {}};

  const auto nv_full = decode_views(g, model.embeddings);
  const auto nv_a = decode_views(just_a, model.embeddings);

  // conv over the full graph restricted to component A equals conv over A alone
  ControlFlowGraph cg_full(
      {[] { Instruction i; i.mnemonic = "a"; return i; }(),
       [] { Instruction i; i.mnemonic = "b"; i.index = 1; return i; }(),
       [] { Instruction i; i.mnemonic = "c"; i.index = 2; return i; }()},
      {Edge{0, 1, EdgeKind::Fallthrough}});
  ControlFlowGraph cg_a({cg_full.vertices()[0], cg_full.vertices()[1]},
                        {Edge{0, 1, EdgeKind::Fallthrough}});
  const auto y_full = conv_forward(model.conv1, nv_full.data, cg_full);
  const auto y_a = conv_forward(model.conv1, nv_a.data, cg_a);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t f = 0; f < model.conv1.filters(); ++f) {
      CHECK_THAT(y_full[u][f], Catch::Matchers::WithinAbs(y_a[u][f], 1e-14));
    }
  }
}

TEST_CASE("predict picks the argmax class") {
  cfgnet::Rng rng(306);
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  auto model = init_model(hp, vocabs);
  for (int round = 0; round < 20; ++round) {
    const auto sample =
        oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 1, 6, hp.classes);
    const auto pred = predict(model, sample.graph);
    REQUIRE(pred.probs.size() == hp.classes);
    int best = 0;
    for (int c = 1; c < static_cast<int>(hp.classes); ++c) {
      if (pred.probs[c] > pred.probs[best]) best = c;
    }
    CHECK(pred.label == best);
  }
}

TEST_CASE("predict on a zero model ties to class 0") {
  auto hp = tiny_hp();
  auto model = init_model(hp, tiny_vocabs(hp.views));
  for (auto* t : oracles::parameter_tensors(model)) std::fill(t->begin(), t->end(), 0.0);
  EncodedGraph g;
  g.symbol_ids = {{{1}, {1}}};
  g.pred = {{}};
  g.succ = {{}};
  CHECK(predict(model, g).label == 0);
}

TEST_CASE("init_model is deterministic in the seed") {
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  auto a = init_model(hp, vocabs);
  auto b = init_model(hp, vocabs);
  CHECK(tensors_equal(a, b));
  hp.seed += 1;
  auto c = init_model(hp, vocabs);
  CHECK_FALSE(tensors_equal(a, c));
}

TEST_CASE("count_parameters matches hand-computed shapes") {
  auto hp = tiny_hp();  // views 2 -> input dim 8
  const auto model = init_model(hp, tiny_vocabs(hp.views));
  const auto pc = count_parameters(model);
  // conv1: 3 * 5x8, conv2: 3 * 6x5, fc: 7x6, out: 3x7
  CHECK(pc.weights == 3 * 5 * 8 + 3 * 6 * 5 + 7 * 6 + 3 * 7);
  CHECK(pc.biases == 5 + 6 + 7 + 3);
}

TEST_CASE("a zero learning rate leaves the initial model untouched") {
  cfgnet::Rng rng(307);
  auto hp = tiny_hp();
  hp.learning_rate = 0.0;
  hp.epochs = 3;
  const auto vocabs = tiny_vocabs(hp.views);
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 6; ++i) {
    fold.push_back(oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 2, 5, hp.classes));
  }
  auto result = train(fold, {}, hp, vocabs);
  auto reference = init_model(hp, vocabs);
  CHECK(tensors_equal(result.model, reference));
}

TEST_CASE("training is deterministic in the seed") {
  cfgnet::Rng rng(308);
  auto hp = tiny_hp();
  hp.epochs = 4;
  const auto vocabs = tiny_vocabs(hp.views);
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 8; ++i) {
    fold.push_back(oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 2, 5, hp.classes));
  }
  auto a = train(fold, {}, hp, vocabs);
  auto b = train(fold, {}, hp, vocabs);
  CHECK(tensors_equal(a.model, b.model));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].val_accuracy == b.log[e].val_accuracy);
  }
}

TEST_CASE("training overfits a tiny separable problem") {
  auto hp = tiny_hp();
  hp.classes = 2;
  hp.epochs = 300;  // the loss sits on a ~ln 2 plateau for the first ~150
  hp.patience = 0;
  hp.seed = 5;
  const auto vocabs = tiny_vocabs(hp.views);

  // class by marker symbol: label 0 graphs contain symbol 1, label 1 symbol 2
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 8; ++i) {
    EncodedSample s;
    s.label = i % 2;
    const int marker = s.label == 0 ? 1 : 2;
    const std::size_t n = 2 + static_cast<std::size_t>(i % 3);
    s.graph.symbol_ids.assign(n, {{marker}, {marker}});
    s.graph.pred.assign(n, {});
    s.graph.succ.assign(n, {});
    for (std::size_t u = 0; u + 1 < n; ++u) {
      s.graph.succ[u].push_back(u + 1);
      s.graph.pred[u + 1].push_back(u);
    }
    fold.push_back(std::move(s));
  }
  const auto result = train(fold, {}, hp, vocabs);
  CHECK(result.best_val_accuracy == 1.0);
}

TEST_CASE("an absurd learning rate raises TrainingDiverged") {
  cfgnet::Rng rng(309);
  auto hp = tiny_hp();
  hp.learning_rate = 1e18;
  hp.epochs = 50;
  const auto vocabs = tiny_vocabs(hp.views);
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 6; ++i) {
    fold.push_back(oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 3, 6, hp.classes));
  }
  CHECK_THROWS_AS(train(fold, {}, hp, vocabs), TrainingDiverged);
}

TEST_CASE("patience stops training after flat validation epochs") {
  cfgnet::Rng rng(310);
  auto hp = tiny_hp();
  hp.learning_rate = 0.0;  // validation accuracy can never improve after epoch 1
  hp.epochs = 40;
  hp.patience = 3;
  const auto vocabs = tiny_vocabs(hp.views);
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 5; ++i) {
    fold.push_back(oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 2, 4, hp.classes));
  }
  const auto result = train(fold, {}, hp, vocabs);
  // epoch 1 sets the best; epochs 2..4 are the three non-improving strikes
  CHECK(result.log.size() == 4);

  hp.patience = 0;  // disabled: run out the clock
  const auto full = train(fold, {}, hp, vocabs);
  CHECK(full.log.size() == 40);
}

TEST_CASE("frozen embeddings stay at their initial values") {
  cfgnet::Rng rng(311);
  auto hp = tiny_hp();
  hp.freeze_embeddings = true;
  hp.epochs = 3;
  const auto vocabs = tiny_vocabs(hp.views);
  std::vector<EncodedSample> fold;
  for (int i = 0; i < 6; ++i) {
    fold.push_back(oracles::random_encoded_sample(rng, hp.views, vocabs[0].size(), 2, 5, hp.classes));
  }
  const auto result = train(fold, {}, hp, vocabs);
  const auto reference = init_model(hp, vocabs);
  for (std::size_t k = 0; k < reference.embeddings.size(); ++k) {
    CHECK(result.model.embeddings[k].data() == reference.embeddings[k].data());
  }
  // but the rest of the network did move
  CHECK(result.model.fc_w.data() != reference.fc_w.data());
}

TEST_CASE("hyperparams validation rejects nonsense") {
  Hyperparams hp;
  hp.views = 3;
  CHECK_THROWS(hp.validate());
  hp = Hyperparams{};
  hp.token_dim = 0;
  CHECK_THROWS(hp.validate());
  hp = Hyperparams{};
  hp.classes = 0;
  CHECK_THROWS(hp.validate());
  hp = Hyperparams{};
  hp.learning_rate = -0.5;
  CHECK_THROWS(hp.validate());
  hp = Hyperparams{};
  hp.epochs = 0;
  CHECK_THROWS(hp.validate());
  Hyperparams ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("train rejects labels outside the class range") {
  auto hp = tiny_hp();
  const auto vocabs = tiny_vocabs(hp.views);
  EncodedSample bad;
  bad.label = static_cast<int>(hp.classes);
  bad.graph.symbol_ids = {{{1}, {1}}};
  bad.graph.pred = {{}};
  bad.graph.succ = {{}};
  CHECK_THROWS(train({bad}, {}, hp, vocabs));
}
