// cfgnet: extract control flow graphs from assembly, train and evaluate the
// graph-convolutional defect classifier, and generate synthetic corpora.
//
// Exit codes: 0 success, 1 input or configuration error, 2 numerical failure
// during training.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfgnet/asm_parser.hpp"
#include "cfgnet/cfg_builder.hpp"
#include "cfgnet/corpus_gen.hpp"
#include "cfgnet/dataset.hpp"
#include "cfgnet/dgcnn.hpp"
#include "cfgnet/evalmetrics.hpp"
#include "cfgnet/features.hpp"
#include "cfgnet/model_io.hpp"

namespace fs = std::filesystem;
using namespace cfgnet;

namespace {

struct BuildCfgArgs {
  std::string input;
  std::string format = "dot";
  std::string mode = "faithful";
  std::string taxonomy_file;
  std::string out_dir;
};

struct TrainArgs {
  std::string manifest;
  std::string out = "model.bin";
  std::string log_path;
  std::string mode = "faithful";
  std::string operands = "on";
  std::string taxonomy_file;
  std::string compiler_cmd = kDefaultCompileTemplate;
  double compile_timeout = 10.0;
  Hyperparams hp;
};

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string out_dir = "eval_out";
  std::string taxonomy_file;
  std::string compiler_cmd = kDefaultCompileTemplate;
  double compile_timeout = 10.0;
  bool svg = false;
  // optional overrides, validated against the model file
  std::string mode;
  std::string operands;
  std::size_t views = 0;
};

struct GenArgs {
  std::string kind = "five-class";
  std::string out;
  std::uint64_t seed = 42;
  std::size_t count = 0;  // 0 = kind default
};

Taxonomy load_taxonomy(const std::string& path) {
  return path.empty() ? Taxonomy::builtin() : Taxonomy::with_overrides(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  os.flush();
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

int run_build_cfg(const BuildCfgArgs& args) {
  const fs::path input(args.input);
  if (!fs::exists(input)) {
    std::cerr << "error: no such input " << input << "\n";
    return 1;
  }
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".s" || ext == ".S" || ext == ".asm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      std::cerr << "error: no assembly files in " << input << "\n";
      return 1;
    }
  } else {
    files.push_back(input);
  }

  const Taxonomy taxonomy = load_taxonomy(args.taxonomy_file);
  const BuildMode mode = build_mode_from_string(args.mode);
  const std::string extension = args.format == "json" ? ".json" : ".dot";

  for (const fs::path& file : files) {
    std::ifstream is(file);
    if (!is) {
      std::cerr << "error: cannot read " << file << "\n";
      return 1;
    }
    std::ostringstream buffer;
    buffer << is.rdbuf();
    ControlFlowGraph graph;
    try {
      graph = build_cfg(parse_assembly(buffer.str(), taxonomy), mode);
    } catch (const ParseError& e) {
      std::cerr << file.string() << ": " << e.what() << "\n";
      return 1;
    }
    const fs::path out_parent = args.out_dir.empty() ? file.parent_path() : fs::path(args.out_dir);
    if (!args.out_dir.empty()) fs::create_directories(out_parent);
    const fs::path out_path = out_parent / (file.stem().string() + extension);
    write_text(out_path, args.format == "json" ? export_json(graph) : export_dot(graph));
    std::cout << file.string() << ": vertices=" << graph.num_vertices()
              << " edges=" << graph.edges().size() << "\n";
  }
  std::cout << files.size() << " graph" << (files.size() == 1 ? "" : "s") << "\n";
  return 0;
}

std::vector<int> view_list(std::size_t views) {
  if (views == 1) return {kInstructionView};
  return {kInstructionView, kGroupView};
}

std::vector<EncodedSample> encode_fold(const std::vector<Sample>& fold,
                                       const std::vector<Vocabulary>& vocabs, bool use_operands) {
  std::vector<EncodedSample> out;
  out.reserve(fold.size());
  for (const Sample& s : fold) {
    out.push_back({encode_graph(s.graph, vocabs, use_operands), s.label});
  }
  return out;
}

int run_train(const TrainArgs& args) {
  IngestOptions options;
  options.taxonomy = load_taxonomy(args.taxonomy_file);
  options.mode = build_mode_from_string(args.mode);
  options.compiler_template = args.compiler_cmd;
  options.compile_timeout_seconds = args.compile_timeout;
  options.log = &std::cerr;

  const Manifest manifest = load_manifest(args.manifest);
  const std::vector<Sample> samples = ingest(manifest, options);
  std::cout << "ingested " << samples.size() << " of " << manifest.rows.size() << " rows\n";

  const SplitResult folds = split(samples, args.hp.seed);
  const bool use_operands = args.operands == "on";

  std::vector<ControlFlowGraph> train_graphs;
  train_graphs.reserve(folds.train.size());
  for (const Sample& s : folds.train) train_graphs.push_back(s.graph);

  std::vector<Vocabulary> vocabs;
  for (int view : view_list(args.hp.views)) {
    vocabs.push_back(build_vocabulary(train_graphs, view, use_operands));
  }

  Hyperparams hp = args.hp;
  hp.use_operands = use_operands;
  const TrainResult result =
      train(encode_fold(folds.train, vocabs, use_operands),
            encode_fold(folds.validation, vocabs, use_operands), hp, vocabs, options.mode);

  save_model(result.model, args.out);
  const std::string log_path = args.log_path.empty() ? args.out + ".log.csv" : args.log_path;
  std::ostringstream log;
  log.precision(10);
  log << "epoch,train_loss,val_accuracy\n";
  for (const EpochStats& row : result.log) {
    log << row.epoch << ',' << row.train_loss << ',' << row.val_accuracy << '\n';
  }
  write_text(log_path, log.str());

  std::cout << "folds: train=" << folds.train.size() << " val=" << folds.validation.size()
            << " test=" << folds.test.size() << "\n";
  std::cout << "epochs run: " << result.log.size() << "\n";
  std::cout << "model: " << args.out << "\n";
  std::cout << "validation accuracy: " << result.best_val_accuracy << "\n";
  return 0;
}

int run_eval(const EvalArgs& args) {
  const DgcnnModel model = load_model(args.model);

  // Featurization always follows the model file; explicit flags must agree.
  std::vector<std::string> conflicts;
  if (args.views != 0 && args.views != model.hp.views) {
    conflicts.push_back("views: flag says " + std::to_string(args.views) + ", model says " +
                        std::to_string(model.hp.views));
  }
  if (!args.operands.empty() && (args.operands == "on") != model.hp.use_operands) {
    conflicts.push_back(std::string("operands: flag says ") + args.operands + ", model says " +
                        (model.hp.use_operands ? "on" : "off"));
  }
  if (!args.mode.empty() && build_mode_from_string(args.mode) != model.cfg_mode) {
    conflicts.push_back("mode: flag says " + args.mode + ", model says " +
                        std::string(to_string(model.cfg_mode)));
  }
  if (!conflicts.empty()) {
    std::cerr << "error: flags conflict with the model configuration\n";
    for (const std::string& c : conflicts) std::cerr << "  " << c << "\n";
    return 1;
  }

  IngestOptions options;
  options.taxonomy = load_taxonomy(args.taxonomy_file);
  options.mode = model.cfg_mode;
  options.compiler_template = args.compiler_cmd;
  options.compile_timeout_seconds = args.compile_timeout;
  options.log = &std::cerr;

  const Manifest manifest = load_manifest(args.manifest);
  const std::vector<Sample> samples = ingest(manifest, options);
  if (samples.empty()) {
    std::cerr << "error: no usable samples in " << args.manifest << "\n";
    return 1;
  }

  std::vector<std::vector<double>> scores;
  std::vector<int> predicted;
  std::vector<int> actual;
  scores.reserve(samples.size());
  for (const Sample& s : samples) {
    const Prediction p =
        predict(model, encode_graph(s.graph, model.vocabs, model.hp.use_operands));
    scores.push_back(p.probs);
    predicted.push_back(p.label);
    actual.push_back(s.label);
  }

  fs::create_directories(args.out_dir);
  const fs::path out_dir(args.out_dir);

  const double acc = accuracy(predicted, actual);
  std::vector<std::pair<std::string, RocCurve>> named_curves;
  std::vector<RocCurve> class_curves;
  for (std::size_t c = 0; c < model.hp.classes; ++c) {
    try {
      RocCurve curve = roc_one_vs_rest(scores, actual, static_cast<int>(c));
      write_text(out_dir / ("roc_class_" + std::to_string(c) + ".csv"),
                 roc_csv(std::to_string(c), curve));
      named_curves.emplace_back("class " + std::to_string(c), curve);
      class_curves.push_back(std::move(curve));
    } catch (const std::invalid_argument& e) {
      std::cerr << "note: no ROC for class " << c << ": " << e.what() << "\n";
    }
  }

  std::vector<std::pair<std::string, double>> summary{{"accuracy", acc}};
  if (!class_curves.empty()) {
    RocCurve macro = macro_average_roc(class_curves);
    write_text(out_dir / "roc_macro.csv", roc_csv("macro", macro));
    summary.emplace_back("macro_auc", auc(macro));
    named_curves.emplace_back("macro", std::move(macro));
  }
  if (model.hp.classes > 1) {
    RocCurve micro = micro_average_roc(scores, actual);
    write_text(out_dir / "roc_micro.csv", roc_csv("micro", micro));
    summary.emplace_back("micro_auc", auc(micro));
    named_curves.emplace_back("micro", std::move(micro));
  }
  write_text(out_dir / "summary.csv", summary_csv(summary));
  if (args.svg) write_text(out_dir / "roc.svg", svg_roc_plot(named_curves));

  std::cout << "samples: " << samples.size() << "\n";
  for (const auto& [name, value] : summary) std::cout << name << ": " << value << "\n";
  std::cout << "report: " << out_dir.string() << "\n";
  return 0;
}

int run_gen(const GenArgs& args) {
  fs::path manifest;
  if (args.kind == "two-class") {
    manifest = write_two_class_corpus(args.out, args.seed, args.count == 0 ? 20 : args.count);
  } else if (args.kind == "five-class") {
    manifest = write_five_class_corpus(args.out, args.seed, args.count == 0 ? 200 : args.count);
  } else {
    manifest = write_c_corpus(args.out, args.seed, args.count == 0 ? 9 : args.count);
  }
  std::cout << manifest.string() << "\n";
  return 0;
}

void add_hyperparam_flags(CLI::App* cmd, Hyperparams& hp) {
  cmd->add_option("--views", hp.views, "Node views: 1 (instructions) or 2 (+groups)")
      ->check(CLI::IsMember({1, 2}))
      ->envname("CFGNET_VIEWS");
  cmd->add_option("--token-dim", hp.token_dim, "Token vector size")->check(CLI::PositiveNumber);
  cmd->add_option("--gc1", hp.conv1_filters, "First convolution filters")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--gc2", hp.conv2_filters, "Second convolution filters")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--fc", hp.fc_units, "Fully-connected units")->check(CLI::PositiveNumber);
  cmd->add_option("--classes", hp.classes, "Output classes")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", hp.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--lr-decay", hp.lr_decay, "Per-epoch decay: lr/(1+epoch*decay)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--epochs", hp.epochs, "Epoch cap")->check(CLI::PositiveNumber);
  cmd->add_option("--patience", hp.patience,
                  "Stop after this many epochs without validation improvement (0 = off)");
  cmd->add_option("--seed", hp.seed, "Seed for init, shuffling, and the fold split")
      ->envname("CFGNET_SEED");
  cmd->add_flag("--mean-neighbors", hp.mean_neighbors,
                "Average neighbor features instead of summing");
  cmd->add_flag("--freeze-embeddings", hp.freeze_embeddings, "Do not update embeddings");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control flow graphs from assembly, and a graph-convolutional "
               "defect classifier over them"};
  app.set_config("--config", "", "Config file (key=value; [section] per subcommand)");
  app.require_subcommand(1);

  BuildCfgArgs build_args;
  CLI::App* build = app.add_subcommand("build-cfg", "Parse assembly and export graphs");
  build->add_option("input", build_args.input, "Assembly file or directory")->required();
  build->add_option("--format", build_args.format, "Output format")
      ->check(CLI::IsMember({"dot", "json"}));
  build->add_option("--mode", build_args.mode, "Edge construction mode")
      ->check(CLI::IsMember({"faithful", "strict"}))
      ->envname("CFGNET_MODE");
  build->add_option("--taxonomy", build_args.taxonomy_file, "Instruction group override file");
  build->add_option("--out-dir", build_args.out_dir, "Directory for graph files");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a classifier from a manifest");
  train_cmd->add_option("--manifest", train_args.manifest, "CSV of path,label rows")->required();
  train_cmd->add_option("--out", train_args.out, "Model file to write")->envname("CFGNET_OUT");
  train_cmd->add_option("--log", train_args.log_path, "Per-epoch CSV log (default <out>.log.csv)");
  train_cmd->add_option("--mode", train_args.mode, "Edge construction mode")
      ->check(CLI::IsMember({"faithful", "strict"}))
      ->envname("CFGNET_MODE");
  train_cmd->add_option("--operands", train_args.operands, "Use normalized operands in view 1")
      ->check(CLI::IsMember({"on", "off"}))
      ->envname("CFGNET_OPERANDS");
  train_cmd->add_option("--taxonomy", train_args.taxonomy_file, "Instruction group override file");
  train_cmd->add_option("--compiler-cmd", train_args.compiler_cmd,
                        "Compile template with {in} and {out}")
      ->envname("CFGNET_COMPILER_CMD");
  train_cmd->add_option("--compile-timeout", train_args.compile_timeout,
                        "Seconds before a compile is abandoned");
  add_hyperparam_flags(train_cmd, train_args.hp);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a model against a manifest");
  eval_cmd->add_option("--model", eval_args.model, "Model file")->required();
  eval_cmd->add_option("--manifest", eval_args.manifest, "CSV of path,label rows")->required();
  eval_cmd->add_option("--out-dir", eval_args.out_dir, "Report directory");
  eval_cmd->add_flag("--svg", eval_args.svg, "Also plot the ROC curves");
  eval_cmd->add_option("--taxonomy", eval_args.taxonomy_file, "Instruction group override file");
  eval_cmd->add_option("--compiler-cmd", eval_args.compiler_cmd,
                       "Compile template with {in} and {out}");
  eval_cmd->add_option("--compile-timeout", eval_args.compile_timeout,
                       "Seconds before a compile is abandoned");
  eval_cmd->add_option("--views", eval_args.views, "Must match the model if given")
      ->check(CLI::IsMember({1, 2}));
  eval_cmd->add_option("--operands", eval_args.operands, "Must match the model if given")
      ->check(CLI::IsMember({"on", "off"}));
  eval_cmd->add_option("--mode", eval_args.mode, "Must match the model if given")
      ->check(CLI::IsMember({"faithful", "strict"}));

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-corpus", "Write a synthetic labeled corpus");
  gen->add_option("--kind", gen_args.kind, "two-class | five-class | c")
      ->check(CLI::IsMember({"two-class", "five-class", "c"}));
  gen->add_option("--out", gen_args.out, "Corpus directory")->required();
  gen->add_option("--seed", gen_args.seed, "Generator seed")->envname("CFGNET_SEED");
  gen->add_option("--count", gen_args.count, "Sample count (0 = kind default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (build->parsed()) return run_build_cfg(build_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (gen->parsed()) return run_gen(gen_args);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
