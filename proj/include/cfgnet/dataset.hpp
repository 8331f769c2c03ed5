#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfgnet/asm_parser.hpp"
#include "cfgnet/cfg_builder.hpp"

namespace cfgnet {

inline constexpr int kNumClasses = 5;  // 0 accepted .. 4 syntax error
inline constexpr const char* kDefaultCompileTemplate = "g++ -S -O0 -o {out} {in}";

/// One labeled graph, identified by its originating path.
struct Sample {
  std::string id;
  ControlFlowGraph graph;
  int label = 0;
};

struct ManifestRow {
  std::string path;
  int label = 0;
};

/// Parsed `path,label` CSV. Relative paths resolve against the manifest's
/// directory.
struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const ManifestRow& row) const;
};

/// Reads and validates a manifest: header `path,label`, labels 0..4, every
/// path existing. Errors name the offending row number.
Manifest load_manifest(const std::string& path);

/// Misconfiguration (bad template, missing compiler) as opposed to a sample
/// that merely fails to compile.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CompileStatus { Ok, Failed, TimedOut };

struct CompileResult {
  CompileStatus status = CompileStatus::Failed;
  std::string assembly;     // on Ok
  std::string diagnostics;  // compiler stderr, best effort
  int exit_code = -1;
};

/// Runs the compiler command with `{in}`/`{out}` substituted and returns the
/// emitted assembly. A non-zero compiler exit is recorded as Failed (the
/// sample is uncompilable, not the call erroneous); exceeding the timeout
/// kills the compiler and reports TimedOut. A template without both
/// placeholders, or a command the shell cannot find, raises ConfigError.
CompileResult compile_to_assembly(const std::string& source_path,
                                  const std::string& command_template,
                                  double timeout_seconds = 10.0);

struct IngestOptions {
  Taxonomy taxonomy = Taxonomy::builtin();
  BuildMode mode = BuildMode::Faithful;
  std::string compiler_template = kDefaultCompileTemplate;
  double compile_timeout_seconds = 10.0;
  std::ostream* log = nullptr;  // per-file status lines, one each
};

/// Turns manifest rows into samples in row order: `.s`/`.asm` files are read
/// directly, anything else is compiled first. Rows that are empty, fail to
/// compile, time out, or fail to parse are skipped with a log line; the rest
/// become one Sample each.
std::vector<Sample> ingest(const Manifest& manifest, const IngestOptions& options);

struct FoldIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1 cut at floor(3n/5) and floor(4n/5): a 3:1:1
/// split. Requires n >= 5.
FoldIndices split_indices(std::size_t n, std::uint64_t seed);

struct SplitResult {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

SplitResult split(const std::vector<Sample>& samples, std::uint64_t seed);

struct ClassStats {
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t total = 0;
};

ClassStats class_stats(const std::vector<Sample>& samples);

}  // namespace cfgnet
