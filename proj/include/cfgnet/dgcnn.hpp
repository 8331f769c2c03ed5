#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfgnet/cfg_builder.hpp"
#include "cfgnet/features.hpp"
#include "cfgnet/matrix.hpp"

namespace cfgnet {

/// Network and training settings. The canonical shape is two stacked graph
/// convolutions (100 then 600 filters) over 30-dimensional token vectors,
/// a 600-unit fully-connected layer, and a 5-class softmax, trained by
/// per-sample SGD at rate 0.1.
struct Hyperparams {
  std::size_t token_dim = 30;
  std::size_t views = 2;  // 1 or 2
  bool use_operands = true;
  std::size_t conv1_filters = 100;
  std::size_t conv2_filters = 600;
  std::size_t fc_units = 600;
  std::size_t classes = 5;
  double learning_rate = 0.1;
  double lr_decay = 0.0;  // epoch rate = learning_rate / (1 + epoch * lr_decay)
  std::size_t epochs = 50;
  std::size_t patience = 10;  // epochs without validation improvement before stopping
  std::uint64_t seed = 42;
  bool mean_neighbors = false;      // average instead of sum over neighbor groups
  bool freeze_embeddings = false;

  void validate() const;
};

/// One graph convolution: shared weight matrices for the vertex itself, its
/// predecessors (in), and its successors (out), plus a bias.
struct ConvLayer {
  Matrix w_cur;
  Matrix w_in;
  Matrix w_out;
  std::vector<double> bias;

  std::size_t filters() const { return w_cur.rows(); }
  std::size_t input_dim() const { return w_cur.cols(); }
};

struct DgcnnModel {
  Hyperparams hp;
  BuildMode cfg_mode = BuildMode::Faithful;  // how training graphs were built
  std::vector<Vocabulary> vocabs;            // one per view
  std::vector<EmbeddingTable> embeddings;    // one per view
  ConvLayer conv1;
  ConvLayer conv2;
  Matrix fc_w;
  std::vector<double> fc_b;
  Matrix out_w;
  std::vector<double> out_b;

  std::size_t input_dim() const { return hp.views * hp.token_dim; }
};

/// Fresh model with seeded uniform [-0.1, 0.1] weights and embeddings and
/// zero biases. Same hyperparams, vocabularies, and seed give an identical
/// model.
DgcnnModel init_model(const Hyperparams& hp, std::vector<Vocabulary> vocabs,
                      BuildMode cfg_mode = BuildMode::Faithful);

struct ParamCount {
  std::size_t weights = 0;
  std::size_t biases = 0;
};

/// Entries of the convolution, fully-connected, and output matrices
/// (embedding tables excluded), and of the bias vectors.
ParamCount count_parameters(const DgcnnModel& model);

/// One convolution layer over the graph:
///   y_u = tanh(W_cur x_u + W_in sum of predecessors + W_out sum of
///   successors + b)
/// with sums replaced by means when mean_neighbors is set.
std::vector<std::vector<double>> conv_forward(const ConvLayer& layer,
                                              const std::vector<std::vector<double>>& node_inputs,
                                              const ControlFlowGraph& graph,
                                              bool mean_neighbors = false);

/// Elementwise max over vertices; the output size matches the per-vertex
/// size whatever the vertex count. Errors on an empty graph.
std::vector<double> dynamic_max_pool(const std::vector<std::vector<double>>& node_vectors);

/// Full pass: conv1, conv2, max pool, tanh FC, softmax.
std::vector<double> forward(const DgcnnModel& model, const NodeViews& node_views,
                            const ControlFlowGraph& graph);

/// Cross-entropy, -log p[label].
double loss(const std::vector<double>& probs, int label);

struct EncodedSample {
  EncodedGraph graph;
  int label = 0;
};

/// Parameter gradients, same shapes as the model tensors.
struct Gradients {
  std::vector<EmbeddingTable> embeddings;
  ConvLayer conv1;
  ConvLayer conv2;
  Matrix fc_w;
  std::vector<double> fc_b;
  Matrix out_w;
  std::vector<double> out_b;
};

/// Analytic gradients of the cross-entropy loss on one sample for every
/// parameter, embeddings included. Max pooling routes the incoming gradient
/// to the lowest-index vertex attaining the maximum in each dimension.
Gradients backward(const DgcnnModel& model, const EncodedSample& sample);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Highest-probability class; ties go to the lowest class index.
Prediction predict(const DgcnnModel& model, const EncodedGraph& graph);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  DgcnnModel model;  // best-validation snapshot
  std::vector<EpochStats> log;
  double best_val_accuracy = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seeded per-sample SGD over shuffled epochs. After each epoch the model is
/// scored on the validation fold (the training fold when validation is
/// empty); the best-scoring snapshot is kept and training stops after
/// `patience` epochs without improvement or at the epoch cap. Throws
/// TrainingDiverged on a non-finite loss.
TrainResult train(const std::vector<EncodedSample>& train_fold,
                  const std::vector<EncodedSample>& val_fold, const Hyperparams& hp,
                  std::vector<Vocabulary> vocabs, BuildMode cfg_mode = BuildMode::Faithful);

}  // namespace cfgnet
