#pragma once

#include <cstdint>
#include <cstddef>
#include <filesystem>

namespace cfgnet {

/// Seeded generators for small labeled corpora, used by the bundled
/// experiments and the test suite. Each writes its files plus a
/// `manifest.csv` into `dir` (created if needed) and returns the manifest
/// path.

/// Two classes of assembly graphs: label 0 routines invoke an internal
/// helper (call/return edges present), label 1 routines never call.
std::filesystem::path write_two_class_corpus(const std::filesystem::path& dir,
                                             std::uint64_t seed, std::size_t count = 20);

/// Five classes of assembly graphs with distinct injected patterns:
/// straight-line code, a forward branch, a counted loop, a helper call, and
/// a jump-over-dead-code with stack traffic.
std::filesystem::path write_five_class_corpus(const std::filesystem::path& dir,
                                              std::uint64_t seed, std::size_t count = 200);

/// Small C programs cycling through the label classes; the label-4 files are
/// deliberately uncompilable so the compile-and-skip path has something to
/// chew on.
std::filesystem::path write_c_corpus(const std::filesystem::path& dir, std::uint64_t seed,
                                     std::size_t count = 9);

}  // namespace cfgnet
