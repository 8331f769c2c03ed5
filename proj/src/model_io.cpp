#include "cfgnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace cfgnet {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'G', 'N', 'M', 'D', 'L', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  put_bytes(os, s.data(), s.size());
}

void get_bytes(std::istream& is, void* data, std::size_t n) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw ModelIoError("truncated model file");
  }
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  get_bytes(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  get_bytes(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

std::uint8_t get_u8(std::istream& is) {
  std::uint8_t v = 0;
  get_bytes(is, &v, 1);
  return v;
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 20)) throw ModelIoError("unreasonable string length in model file");
  std::string s(n, '\0');
  if (n > 0) get_bytes(is, s.data(), n);
  return s;
}

// Every tensor in the container, with mutable access for loading.
struct TensorRef {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double* data = nullptr;
};

std::vector<TensorRef> tensor_list(DgcnnModel& m) {
  std::vector<TensorRef> refs;
  auto add_matrix = [&](std::string name, Matrix& mat) {
    refs.push_back({std::move(name), mat.rows(), mat.cols(), mat.data().data()});
  };
  auto add_vector = [&](std::string name, std::vector<double>& v) {
    refs.push_back({std::move(name), 1, v.size(), v.data()});
  };
  for (std::size_t k = 0; k < m.embeddings.size(); ++k) {
    add_matrix("embedding.view" + std::to_string(k + 1), m.embeddings[k]);
  }
  auto add_conv = [&](const std::string& prefix, ConvLayer& layer) {
    add_matrix(prefix + ".w_cur", layer.w_cur);
    add_matrix(prefix + ".w_in", layer.w_in);
    add_matrix(prefix + ".w_out", layer.w_out);
    add_vector(prefix + ".bias", layer.bias);
  };
  add_conv("conv1", m.conv1);
  add_conv("conv2", m.conv2);
  add_matrix("fc.weight", m.fc_w);
  add_vector("fc.bias", m.fc_b);
  add_matrix("output.weight", m.out_w);
  add_vector("output.bias", m.out_b);
  return refs;
}

std::vector<unsigned char> tensor_payload(const TensorRef& t) {
  std::vector<unsigned char> bytes(t.rows * t.cols * 8);
  for (std::size_t i = 0; i < t.rows * t.cols; ++i) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(t.data[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(u >> (8 * b));
  }
  return bytes;
}

void write_hyperparams(std::ostream& os, const DgcnnModel& m) {
  const Hyperparams& hp = m.hp;
  put_u64(os, hp.token_dim);
  put_u64(os, hp.views);
  put_u64(os, hp.conv1_filters);
  put_u64(os, hp.conv2_filters);
  put_u64(os, hp.fc_units);
  put_u64(os, hp.classes);
  put_u64(os, hp.epochs);
  put_u64(os, hp.patience);
  put_f64(os, hp.learning_rate);
  put_f64(os, hp.lr_decay);
  put_u64(os, hp.seed);
  put_u8(os, hp.use_operands ? 1 : 0);
  put_u8(os, hp.mean_neighbors ? 1 : 0);
  put_u8(os, hp.freeze_embeddings ? 1 : 0);
  put_u8(os, m.cfg_mode == BuildMode::Strict ? 1 : 0);
}

void read_hyperparams(std::istream& is, DgcnnModel& m) {
  Hyperparams hp;
  hp.token_dim = get_u64(is);
  hp.views = get_u64(is);
  hp.conv1_filters = get_u64(is);
  hp.conv2_filters = get_u64(is);
  hp.fc_units = get_u64(is);
  hp.classes = get_u64(is);
  hp.epochs = get_u64(is);
  hp.patience = get_u64(is);
  hp.learning_rate = get_f64(is);
  hp.lr_decay = get_f64(is);
  hp.seed = get_u64(is);
  hp.use_operands = get_u8(is) != 0;
  hp.mean_neighbors = get_u8(is) != 0;
  hp.freeze_embeddings = get_u8(is) != 0;
  const std::uint8_t mode = get_u8(is);
  if (mode > 1) throw ModelIoError("unknown graph mode byte in model file");
  m.hp = hp;
  m.cfg_mode = mode == 1 ? BuildMode::Strict : BuildMode::Faithful;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

void save_model(const DgcnnModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ModelIoError("cannot open " + path + " for writing");

  put_bytes(os, kMagic, sizeof kMagic);
  put_u32(os, kFormatVersion);
  write_hyperparams(os, model);

  put_u32(os, static_cast<std::uint32_t>(model.vocabs.size()));
  for (const Vocabulary& vocab : model.vocabs) {
    put_u32(os, static_cast<std::uint32_t>(vocab.view));
    put_u64(os, vocab.symbols.size());
    for (const std::string& s : vocab.symbols) put_string(os, s);
  }

  // The tensor list is read-only here; the refs just carry pointers.
  auto refs = tensor_list(const_cast<DgcnnModel&>(model));
  put_u32(os, static_cast<std::uint32_t>(refs.size()));
  std::ostringstream manifest;
  for (const TensorRef& t : refs) {
    put_string(os, t.name);
    put_u64(os, t.rows);
    put_u64(os, t.cols);
    const auto payload = tensor_payload(t);
    put_bytes(os, payload.data(), payload.size());
    manifest << t.name << '\t' << t.rows << '\t' << t.cols << '\t' << std::hex
             << std::setw(16) << std::setfill('0') << fnv1a64(payload.data(), payload.size())
             << std::dec << '\n';
  }
  os.flush();
  if (!os) throw ModelIoError("write to " + path + " failed");

  const std::string manifest_path = path + ".manifest";
  std::ofstream ms(manifest_path, std::ios::trunc);
  if (!ms) throw ModelIoError("cannot open " + manifest_path + " for writing");
  ms << manifest.str();
  ms.flush();
  if (!ms) throw ModelIoError("write to " + manifest_path + " failed");
}

DgcnnModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelIoError("cannot open " + path);

  char magic[8];
  get_bytes(is, magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ModelIoError(path + " is not a model file (bad magic)");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion) {
    throw ModelIoError("unsupported model format version " + std::to_string(version));
  }

  DgcnnModel model;
  read_hyperparams(is, model);
  const Hyperparams& hp = model.hp;
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ModelIoError(std::string("model file carries invalid hyperparameters: ") + e.what());
  }

  const std::uint32_t vocab_count = get_u32(is);
  if (vocab_count != hp.views) {
    throw ModelIoError("vocabulary count does not match view count");
  }
  for (std::uint32_t k = 0; k < vocab_count; ++k) {
    Vocabulary vocab;
    vocab.view = static_cast<int>(get_u32(is));
    if (vocab.view != static_cast<int>(k + 1)) {
      throw ModelIoError("vocabularies out of view order in model file");
    }
    const std::uint64_t n = get_u64(is);
    if (n == 0) throw ModelIoError("empty vocabulary in model file");
    vocab.symbols.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string s = get_string(is);
      if (!vocab.ids.emplace(s, static_cast<int>(i)).second) {
        throw ModelIoError("duplicate vocabulary symbol '" + s + "' in model file");
      }
      vocab.symbols.push_back(std::move(s));
    }
    if (vocab.symbols.front() != kUnknownSymbol) {
      throw ModelIoError("vocabulary does not start with the unknown symbol");
    }
    model.vocabs.push_back(std::move(vocab));
  }

  // Allocate tensors at their expected shapes, then fill from the file.
  model.embeddings.reserve(hp.views);
  for (const Vocabulary& vocab : model.vocabs) {
    model.embeddings.emplace_back(vocab.symbols.size(), hp.token_dim);
  }
  auto shape_conv = [&](ConvLayer& layer, std::size_t filters, std::size_t input) {
    layer.w_cur = Matrix(filters, input);
    layer.w_in = Matrix(filters, input);
    layer.w_out = Matrix(filters, input);
    layer.bias.assign(filters, 0.0);
  };
  shape_conv(model.conv1, hp.conv1_filters, hp.views * hp.token_dim);
  shape_conv(model.conv2, hp.conv2_filters, hp.conv1_filters);
  model.fc_w = Matrix(hp.fc_units, hp.conv2_filters);
  model.fc_b.assign(hp.fc_units, 0.0);
  model.out_w = Matrix(hp.classes, hp.fc_units);
  model.out_b.assign(hp.classes, 0.0);

  auto refs = tensor_list(model);
  const std::uint32_t tensor_count = get_u32(is);
  if (tensor_count != refs.size()) {
    throw ModelIoError("model file holds " + std::to_string(tensor_count) + " tensors, expected " +
                       std::to_string(refs.size()));
  }
  for (TensorRef& t : refs) {
    const std::string name = get_string(is);
    if (name != t.name) {
      throw ModelIoError("expected tensor '" + t.name + "', found '" + name + "'");
    }
    const std::uint64_t rows = get_u64(is);
    const std::uint64_t cols = get_u64(is);
    if (rows != t.rows || cols != t.cols) {
      throw ModelIoError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", expected " + std::to_string(t.rows) + "x" +
                         std::to_string(t.cols));
    }
    for (std::size_t i = 0; i < t.rows * t.cols; ++i) t.data[i] = get_f64(is);
  }
  return model;
}

}  // namespace cfgnet
