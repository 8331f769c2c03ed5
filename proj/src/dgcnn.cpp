#include "cfgnet/dgcnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

#include "cfgnet/rng.hpp"

namespace cfgnet {

namespace {

// Per-vertex activations captured during a forward pass, kept so backward()
// never has to recompute anything.
struct ForwardTrace {
  std::vector<std::vector<double>> x;   // network inputs, one per vertex
  std::vector<std::vector<double>> h1;  // conv1 outputs (post-tanh)
  std::vector<std::vector<double>> h2;  // conv2 outputs (post-tanh)
  std::vector<double> pooled;
  std::vector<std::size_t> argmax;  // winning vertex per pooled dimension
  std::vector<double> fc_act;       // post-tanh FC activations
  std::vector<double> probs;
};

void check_adjacency(const std::vector<std::vector<std::size_t>>& pred,
                     const std::vector<std::vector<std::size_t>>& succ, std::size_t n) {
  if (pred.size() != n || succ.size() != n) {
    throw std::invalid_argument("adjacency lists do not match vertex count");
  }
}

// y_u = tanh(W_cur x_u + W_in sum_pred + W_out sum_succ + b). Neighbor
// vectors are summed first so each group costs a single matrix-vector
// product.
void conv_apply(const ConvLayer& layer, const std::vector<std::vector<double>>& x,
                const std::vector<std::vector<std::size_t>>& pred,
                const std::vector<std::vector<std::size_t>>& succ, bool mean_neighbors,
                std::vector<std::vector<double>>& out) {
  const std::size_t n = x.size();
  const std::size_t n_in = layer.input_dim();
  const std::size_t n_c = layer.filters();
  if (layer.w_in.rows() != n_c || layer.w_in.cols() != n_in || layer.w_out.rows() != n_c ||
      layer.w_out.cols() != n_in || layer.bias.size() != n_c) {
    throw std::invalid_argument("convolution layer tensors disagree on shape");
  }
  for (const auto& xu : x) {
    if (xu.size() != n_in) {
      throw std::invalid_argument("node input size " + std::to_string(xu.size()) +
                                  " does not match layer input dimension " +
                                  std::to_string(n_in));
    }
  }
  out.assign(n, std::vector<double>(n_c));
  std::vector<double> acc(n_c);
  std::vector<double> nsum(n_in);
  for (std::size_t u = 0; u < n; ++u) {
    acc.assign(layer.bias.begin(), layer.bias.end());
    matvec_add(layer.w_cur, x[u], acc);
    if (!pred[u].empty()) {
      std::fill(nsum.begin(), nsum.end(), 0.0);
      for (std::size_t p : pred[u]) {
        const auto& xp = x[p];
        for (std::size_t j = 0; j < n_in; ++j) nsum[j] += xp[j];
      }
      if (mean_neighbors) {
        const double inv = 1.0 / static_cast<double>(pred[u].size());
        for (double& v : nsum) v *= inv;
      }
      matvec_add(layer.w_in, nsum, acc);
    }
    if (!succ[u].empty()) {
      std::fill(nsum.begin(), nsum.end(), 0.0);
      for (std::size_t s : succ[u]) {
        const auto& xs = x[s];
        for (std::size_t j = 0; j < n_in; ++j) nsum[j] += xs[j];
      }
      if (mean_neighbors) {
        const double inv = 1.0 / static_cast<double>(succ[u].size());
        for (double& v : nsum) v *= inv;
      }
      matvec_add(layer.w_out, nsum, acc);
    }
    auto& yu = out[u];
    for (std::size_t j = 0; j < n_c; ++j) yu[j] = std::tanh(acc[j]);
  }
}

void max_pool_with_argmax(const std::vector<std::vector<double>>& node_vectors,
                          std::vector<double>& pooled, std::vector<std::size_t>& argmax) {
  if (node_vectors.empty()) {
    throw std::invalid_argument("max pooling over an empty graph");
  }
  const std::size_t n_c = node_vectors.front().size();
  for (const auto& v : node_vectors) {
    if (v.size() != n_c) throw std::invalid_argument("ragged node vectors in max pooling");
  }
  pooled.assign(node_vectors.front().begin(), node_vectors.front().end());
  argmax.assign(n_c, 0);
  for (std::size_t u = 1; u < node_vectors.size(); ++u) {
    const auto& v = node_vectors[u];
    for (std::size_t j = 0; j < n_c; ++j) {
      if (v[j] > pooled[j]) {  // strict: ties keep the lowest vertex index
        pooled[j] = v[j];
        argmax[j] = u;
      }
    }
  }
}

void softmax_inplace(std::vector<double>& z) {
  double m = z.front();
  for (double v : z) m = std::max(m, v);
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Runs the network on trace.x (already filled) and records every activation.
void network_forward(const DgcnnModel& model, const std::vector<std::vector<std::size_t>>& pred,
                     const std::vector<std::vector<std::size_t>>& succ, ForwardTrace& t) {
  const bool mean = model.hp.mean_neighbors;
  conv_apply(model.conv1, t.x, pred, succ, mean, t.h1);
  conv_apply(model.conv2, t.h1, pred, succ, mean, t.h2);
  max_pool_with_argmax(t.h2, t.pooled, t.argmax);

  if (model.fc_w.cols() != t.pooled.size() || model.fc_b.size() != model.fc_w.rows()) {
    throw std::invalid_argument("fully-connected layer shape mismatch");
  }
  t.fc_act.assign(model.fc_b.begin(), model.fc_b.end());
  matvec_add(model.fc_w, t.pooled, t.fc_act);
  for (double& v : t.fc_act) v = std::tanh(v);

  if (model.out_w.cols() != t.fc_act.size() || model.out_b.size() != model.out_w.rows()) {
    throw std::invalid_argument("output layer shape mismatch");
  }
  t.probs.assign(model.out_b.begin(), model.out_b.end());
  matvec_add(model.out_w, t.fc_act, t.probs);
  softmax_inplace(t.probs);
}

// Mean of embedding rows per view (empty symbol lists already rejected by
// the encoder), views concatenated.
void decode_inputs(const DgcnnModel& model, const EncodedGraph& g,
                   std::vector<std::vector<double>>& x) {
  const std::size_t views = model.hp.views;
  const std::size_t dim = model.hp.token_dim;
  if (model.embeddings.size() != views) {
    throw std::invalid_argument("model embedding table count does not match view count");
  }
  const std::size_t n = g.num_vertices();
  x.assign(n, std::vector<double>(views * dim, 0.0));
  for (std::size_t u = 0; u < n; ++u) {
    if (g.symbol_ids[u].size() != views) {
      throw std::invalid_argument("encoded vertex is missing a view");
    }
    for (std::size_t k = 0; k < views; ++k) {
      const auto& ids = g.symbol_ids[u][k];
      if (ids.empty()) throw std::invalid_argument("encoded vertex has an empty symbol list");
      const EmbeddingTable& table = model.embeddings[k];
      if (table.cols() != dim) {
        throw std::invalid_argument("embedding width does not match token dimension");
      }
      double* slot = x[u].data() + k * dim;
      for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
          throw std::invalid_argument("symbol id out of embedding range");
        }
        std::span<const double> row = table.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < dim; ++j) slot[j] += row[j];
      }
      const double inv = 1.0 / static_cast<double>(ids.size());
      for (std::size_t j = 0; j < dim; ++j) slot[j] *= inv;
    }
  }
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-0.1, 0.1);
  return m;
}

ConvLayer make_conv(std::size_t filters, std::size_t input, Rng& rng) {
  ConvLayer layer;
  layer.w_cur = uniform_matrix(filters, input, rng);
  layer.w_in = uniform_matrix(filters, input, rng);
  layer.w_out = uniform_matrix(filters, input, rng);
  layer.bias.assign(filters, 0.0);
  return layer;
}

DgcnnModel init_model_impl(const Hyperparams& hp, std::vector<Vocabulary> vocabs,
                           BuildMode cfg_mode, Rng& rng) {
  hp.validate();
  if (vocabs.size() != hp.views) {
    throw std::invalid_argument("expected one vocabulary per view");
  }
  DgcnnModel model;
  model.hp = hp;
  model.cfg_mode = cfg_mode;
  model.vocabs = std::move(vocabs);
  model.embeddings.reserve(hp.views);
  for (const Vocabulary& vocab : model.vocabs) {
    model.embeddings.push_back(init_embeddings(vocab, hp.token_dim, rng.next_u64()));
  }
  model.conv1 = make_conv(hp.conv1_filters, hp.views * hp.token_dim, rng);
  model.conv2 = make_conv(hp.conv2_filters, hp.conv1_filters, rng);
  model.fc_w = uniform_matrix(hp.fc_units, hp.conv2_filters, rng);
  model.fc_b.assign(hp.fc_units, 0.0);
  model.out_w = uniform_matrix(hp.classes, hp.fc_units, rng);
  model.out_b.assign(hp.classes, 0.0);
  return model;
}

Gradients make_gradients(const DgcnnModel& model) {
  Gradients g;
  g.embeddings.reserve(model.embeddings.size());
  for (const EmbeddingTable& t : model.embeddings) g.embeddings.emplace_back(t.rows(), t.cols());
  auto zero_like = [](const ConvLayer& layer) {
    ConvLayer z;
    z.w_cur = Matrix(layer.w_cur.rows(), layer.w_cur.cols());
    z.w_in = Matrix(layer.w_in.rows(), layer.w_in.cols());
    z.w_out = Matrix(layer.w_out.rows(), layer.w_out.cols());
    z.bias.assign(layer.bias.size(), 0.0);
    return z;
  };
  g.conv1 = zero_like(model.conv1);
  g.conv2 = zero_like(model.conv2);
  g.fc_w = Matrix(model.fc_w.rows(), model.fc_w.cols());
  g.fc_b.assign(model.fc_b.size(), 0.0);
  g.out_w = Matrix(model.out_w.rows(), model.out_w.cols());
  g.out_b.assign(model.out_b.size(), 0.0);
  return g;
}

void zero_gradients(Gradients& g) {
  for (EmbeddingTable& t : g.embeddings) t.fill(0.0);
  for (ConvLayer* l : {&g.conv1, &g.conv2}) {
    l->w_cur.fill(0.0);
    l->w_in.fill(0.0);
    l->w_out.fill(0.0);
    std::fill(l->bias.begin(), l->bias.end(), 0.0);
  }
  g.fc_w.fill(0.0);
  std::fill(g.fc_b.begin(), g.fc_b.end(), 0.0);
  g.out_w.fill(0.0);
  std::fill(g.out_b.begin(), g.out_b.end(), 0.0);
}

// Backward through one convolution layer. `upstream` is dL/dy (post-tanh);
// fills layer gradients and dL/dx for every vertex.
void conv_backward(const ConvLayer& layer, const std::vector<std::vector<double>>& x,
                   const std::vector<std::vector<double>>& y,
                   const std::vector<std::vector<std::size_t>>& pred,
                   const std::vector<std::vector<std::size_t>>& succ, bool mean_neighbors,
                   const std::vector<std::vector<double>>& upstream, ConvLayer& grad,
                   std::vector<std::vector<double>>& dx) {
  const std::size_t n = x.size();
  const std::size_t n_in = layer.input_dim();
  const std::size_t n_c = layer.filters();
  dx.assign(n, std::vector<double>(n_in, 0.0));
  std::vector<double> da(n_c);
  std::vector<double> nsum(n_in);
  std::vector<double> back(n_in);
  for (std::size_t u = 0; u < n; ++u) {
    // Through tanh: da = upstream * (1 - y^2).
    bool any = false;
    for (std::size_t j = 0; j < n_c; ++j) {
      da[j] = upstream[u][j] * (1.0 - y[u][j] * y[u][j]);
      any = any || da[j] != 0.0;
    }
    if (!any) continue;

    for (std::size_t j = 0; j < n_c; ++j) grad.bias[j] += da[j];
    outer_add(grad.w_cur, da, x[u]);
    matvec_transpose_add(layer.w_cur, da, dx[u]);

    if (!pred[u].empty()) {
      const double scale =
          mean_neighbors ? 1.0 / static_cast<double>(pred[u].size()) : 1.0;
      std::fill(nsum.begin(), nsum.end(), 0.0);
      for (std::size_t p : pred[u]) {
        const auto& xp = x[p];
        for (std::size_t j = 0; j < n_in; ++j) nsum[j] += xp[j];
      }
      if (mean_neighbors) {
        for (double& v : nsum) v *= scale;
      }
      outer_add(grad.w_in, da, nsum);
      std::fill(back.begin(), back.end(), 0.0);
      matvec_transpose_add(layer.w_in, da, back);
      for (std::size_t p : pred[u]) {
        auto& dxp = dx[p];
        for (std::size_t j = 0; j < n_in; ++j) dxp[j] += scale * back[j];
      }
    }
    if (!succ[u].empty()) {
      const double scale =
          mean_neighbors ? 1.0 / static_cast<double>(succ[u].size()) : 1.0;
      std::fill(nsum.begin(), nsum.end(), 0.0);
      for (std::size_t s : succ[u]) {
        const auto& xs = x[s];
        for (std::size_t j = 0; j < n_in; ++j) nsum[j] += xs[j];
      }
      if (mean_neighbors) {
        for (double& v : nsum) v *= scale;
      }
      outer_add(grad.w_out, da, nsum);
      std::fill(back.begin(), back.end(), 0.0);
      matvec_transpose_add(layer.w_out, da, back);
      for (std::size_t s : succ[u]) {
        auto& dxs = dx[s];
        for (std::size_t j = 0; j < n_in; ++j) dxs[j] += scale * back[j];
      }
    }
  }
}

// Full backward pass from a completed trace. Accumulates into `g` (caller
// zeroes it).
void backward_from_trace(const DgcnnModel& model, const EncodedGraph& enc, int label,
                         const ForwardTrace& t, Gradients& g) {
  const std::size_t classes = model.hp.classes;
  if (label < 0 || static_cast<std::size_t>(label) >= classes) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside 0.." +
                                std::to_string(classes - 1));
  }

  // Softmax + cross-entropy collapses to probs - onehot.
  std::vector<double> dz(t.probs);
  dz[static_cast<std::size_t>(label)] -= 1.0;

  outer_add(g.out_w, dz, t.fc_act);
  for (std::size_t j = 0; j < dz.size(); ++j) g.out_b[j] += dz[j];

  std::vector<double> dfc(t.fc_act.size(), 0.0);
  matvec_transpose_add(model.out_w, dz, dfc);
  for (std::size_t j = 0; j < dfc.size(); ++j) dfc[j] *= 1.0 - t.fc_act[j] * t.fc_act[j];

  outer_add(g.fc_w, dfc, t.pooled);
  for (std::size_t j = 0; j < dfc.size(); ++j) g.fc_b[j] += dfc[j];

  std::vector<double> dpool(t.pooled.size(), 0.0);
  matvec_transpose_add(model.fc_w, dfc, dpool);

  // Max pooling: each dimension's gradient goes to its winning vertex.
  const std::size_t n = t.h2.size();
  std::vector<std::vector<double>> dh2(n, std::vector<double>(t.pooled.size(), 0.0));
  for (std::size_t j = 0; j < dpool.size(); ++j) dh2[t.argmax[j]][j] += dpool[j];

  const bool mean = model.hp.mean_neighbors;
  std::vector<std::vector<double>> dh1;
  conv_backward(model.conv2, t.h1, t.h2, enc.pred, enc.succ, mean, dh2, g.conv2, dh1);
  std::vector<std::vector<double>> dx;
  conv_backward(model.conv1, t.x, t.h1, enc.pred, enc.succ, mean, dh1, g.conv1, dx);

  // Through the per-view means into the embedding rows.
  const std::size_t dim = model.hp.token_dim;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t k = 0; k < model.hp.views; ++k) {
      const auto& ids = enc.symbol_ids[u][k];
      const double inv = 1.0 / static_cast<double>(ids.size());
      const double* slice = dx[u].data() + k * dim;
      EmbeddingTable& et = g.embeddings[k];
      for (int id : ids) {
        std::span<double> row = et.row(static_cast<std::size_t>(id));
        for (std::size_t j = 0; j < dim; ++j) row[j] += inv * slice[j];
      }
    }
  }
}

void axpy(double a, const Matrix& x, Matrix& y) {
  const auto& xd = x.data();
  auto& yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += a * xd[i];
}

void axpy(double a, const std::vector<double>& x, std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void sgd_step(DgcnnModel& model, const Gradients& g, double lr) {
  const double a = -lr;
  if (!model.hp.freeze_embeddings) {
    for (std::size_t k = 0; k < model.embeddings.size(); ++k) {
      axpy(a, g.embeddings[k], model.embeddings[k]);
    }
  }
  axpy(a, g.conv1.w_cur, model.conv1.w_cur);
  axpy(a, g.conv1.w_in, model.conv1.w_in);
  axpy(a, g.conv1.w_out, model.conv1.w_out);
  axpy(a, g.conv1.bias, model.conv1.bias);
  axpy(a, g.conv2.w_cur, model.conv2.w_cur);
  axpy(a, g.conv2.w_in, model.conv2.w_in);
  axpy(a, g.conv2.w_out, model.conv2.w_out);
  axpy(a, g.conv2.bias, model.conv2.bias);
  axpy(a, g.fc_w, model.fc_w);
  axpy(a, g.fc_b, model.fc_b);
  axpy(a, g.out_w, model.out_w);
  axpy(a, g.out_b, model.out_b);
}

void run_forward(const DgcnnModel& model, const EncodedGraph& enc, ForwardTrace& t) {
  check_adjacency(enc.pred, enc.succ, enc.num_vertices());
  if (enc.num_vertices() == 0) {
    throw std::invalid_argument("cannot run the network on an empty graph");
  }
  decode_inputs(model, enc, t.x);
  network_forward(model, enc.pred, enc.succ, t);
}

}  // namespace

void Hyperparams::validate() const {
  if (token_dim == 0) throw std::invalid_argument("token_dim must be at least 1");
  if (views != 1 && views != 2) throw std::invalid_argument("views must be 1 or 2");
  if (conv1_filters == 0 || conv2_filters == 0 || fc_units == 0 || classes == 0) {
    throw std::invalid_argument("layer sizes must be at least 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and non-negative");
  }
  if (!(lr_decay >= 0.0) || !std::isfinite(lr_decay)) {
    throw std::invalid_argument("lr_decay must be finite and non-negative");
  }
  if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
}

DgcnnModel init_model(const Hyperparams& hp, std::vector<Vocabulary> vocabs,
                      BuildMode cfg_mode) {
  Rng rng(hp.seed);
  return init_model_impl(hp, std::move(vocabs), cfg_mode, rng);
}

ParamCount count_parameters(const DgcnnModel& model) {
  ParamCount c;
  for (const ConvLayer* l : {&model.conv1, &model.conv2}) {
    c.weights += l->w_cur.size() + l->w_in.size() + l->w_out.size();
    c.biases += l->bias.size();
  }
  c.weights += model.fc_w.size() + model.out_w.size();
  c.biases += model.fc_b.size() + model.out_b.size();
  return c;
}

std::vector<std::vector<double>> conv_forward(const ConvLayer& layer,
                                              const std::vector<std::vector<double>>& node_inputs,
                                              const ControlFlowGraph& graph,
                                              bool mean_neighbors) {
  if (node_inputs.size() != graph.num_vertices()) {
    throw std::invalid_argument("node inputs do not align with graph vertices");
  }
  std::vector<std::vector<double>> out;
  conv_apply(layer, node_inputs, graph.predecessor_lists(), graph.successor_lists(),
             mean_neighbors, out);
  return out;
}

std::vector<double> dynamic_max_pool(const std::vector<std::vector<double>>& node_vectors) {
  std::vector<double> pooled;
  std::vector<std::size_t> argmax;
  max_pool_with_argmax(node_vectors, pooled, argmax);
  return pooled;
}

std::vector<double> forward(const DgcnnModel& model, const NodeViews& node_views,
                            const ControlFlowGraph& graph) {
  if (node_views.data.size() != graph.num_vertices()) {
    throw std::invalid_argument("node views do not align with graph vertices");
  }
  if (node_views.views != model.hp.views || node_views.dim != model.hp.token_dim) {
    throw std::invalid_argument("node view shape does not match the model");
  }
  if (graph.num_vertices() == 0) {
    throw std::invalid_argument("cannot run the network on an empty graph");
  }
  ForwardTrace t;
  t.x = node_views.data;
  network_forward(model, graph.predecessor_lists(), graph.successor_lists(), t);
  return t.probs;
}

double loss(const std::vector<double>& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw std::invalid_argument("label outside the probability vector");
  }
  return -std::log(probs[static_cast<std::size_t>(label)]);
}

Gradients backward(const DgcnnModel& model, const EncodedSample& sample) {
  ForwardTrace t;
  run_forward(model, sample.graph, t);
  Gradients g = make_gradients(model);
  backward_from_trace(model, sample.graph, sample.label, t, g);
  return g;
}

Prediction predict(const DgcnnModel& model, const EncodedGraph& graph) {
  ForwardTrace t;
  run_forward(model, graph, t);
  Prediction p;
  p.probs = std::move(t.probs);
  p.label = 0;
  for (std::size_t k = 1; k < p.probs.size(); ++k) {
    if (p.probs[k] > p.probs[static_cast<std::size_t>(p.label)]) {
      p.label = static_cast<int>(k);
    }
  }
  return p;
}

TrainResult train(const std::vector<EncodedSample>& train_fold,
                  const std::vector<EncodedSample>& val_fold, const Hyperparams& hp,
                  std::vector<Vocabulary> vocabs, BuildMode cfg_mode) {
  hp.validate();
  if (train_fold.empty()) {
    throw std::invalid_argument("training fold is empty");
  }
  auto check_fold = [&](const std::vector<EncodedSample>& fold, const char* name) {
    for (std::size_t i = 0; i < fold.size(); ++i) {
      const EncodedSample& s = fold[i];
      if (s.graph.num_vertices() == 0) {
        throw std::invalid_argument(std::string(name) + " sample " + std::to_string(i) +
                                    " has an empty graph");
      }
      if (s.label < 0 || static_cast<std::size_t>(s.label) >= hp.classes) {
        throw std::invalid_argument(std::string(name) + " sample " + std::to_string(i) +
                                    " has label outside 0.." + std::to_string(hp.classes - 1));
      }
    }
  };
  check_fold(train_fold, "training");
  check_fold(val_fold, "validation");

  Rng rng(hp.seed);
  TrainResult result;
  result.model = init_model_impl(hp, std::move(vocabs), cfg_mode, rng);
  DgcnnModel& model = result.model;

  auto fold_accuracy = [&](const std::vector<EncodedSample>& fold) {
    std::size_t hits = 0;
    for (const EncodedSample& s : fold) {
      if (predict(model, s.graph).label == s.label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(fold.size());
  };

  Gradients grads = make_gradients(model);
  ForwardTrace trace;
  std::vector<std::size_t> order(train_fold.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  DgcnnModel best = model;
  double best_acc = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const double lr = hp.learning_rate / (1.0 + static_cast<double>(epoch) * hp.lr_decay);
    rng.shuffle(order);
    double total_loss = 0.0;
    for (std::size_t idx : order) {
      const EncodedSample& s = train_fold[idx];
      run_forward(model, s.graph, trace);
      const double l = loss(trace.probs, s.label);
      if (!std::isfinite(l)) {
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                               ", sample " + std::to_string(idx));
      }
      total_loss += l;
      zero_gradients(grads);
      backward_from_trace(model, s.graph, s.label, trace, grads);
      sgd_step(model, grads, lr);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = total_loss / static_cast<double>(train_fold.size());
    stats.val_accuracy = fold_accuracy(val_fold.empty() ? train_fold : val_fold);
    result.log.push_back(stats);

    if (stats.val_accuracy > best_acc) {
      best_acc = stats.val_accuracy;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
      if (hp.patience > 0 && since_best >= hp.patience) break;
    }
  }

  result.model = std::move(best);
  result.best_val_accuracy = best_acc;
  return result;
}

}  // namespace cfgnet
