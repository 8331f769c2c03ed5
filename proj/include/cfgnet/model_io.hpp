#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "cfgnet/dgcnn.hpp"

namespace cfgnet {

class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes the model as a versioned binary container: magic + format version,
/// hyperparameters, per-view vocabularies, then every tensor with an
/// explicit name and (rows, cols) header, row-major little-endian 64-bit
/// floats. A text manifest at `path + ".manifest"` lists each tensor's name,
/// shape, and FNV-1a checksum. The bytes depend only on the model contents,
/// so identical models produce identical files.
void save_model(const DgcnnModel& model, const std::string& path);

/// Reads a container written by save_model, validating magic, version, and
/// every tensor shape against the stored hyperparameters.
DgcnnModel load_model(const std::string& path);

/// 64-bit FNV-1a over a byte range (the manifest checksum).
std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace cfgnet
