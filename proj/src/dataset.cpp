#include "cfgnet/dataset.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "cfgnet/rng.hpp"

namespace cfgnet {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

std::string substitute_placeholder(std::string text, const std::string& key,
                                   const std::string& value) {
  std::size_t at = 0;
  while ((at = text.find(key, at)) != std::string::npos) {
    text.replace(at, key.size(), value);
    at += value.size();
  }
  return text;
}

struct RunOutcome {
  int exit_code = -1;
  bool timed_out = false;
};

// /bin/sh -c with a kill-on-timeout watchdog.
RunOutcome run_shell(const std::string& command, double timeout_seconds) {
  const pid_t pid = fork();
  if (pid < 0) throw ConfigError("fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  RunOutcome outcome;
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  for (;;) {
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0) throw ConfigError("waitpid failed: " + std::string(std::strerror(errno)));
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      outcome.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFEXITED(status)) {
    outcome.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    outcome.exit_code = 128 + WTERMSIG(status);
  }
  return outcome;
}

std::string read_file_or_empty(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return {};
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path unique_temp_path(const char* suffix) {
  static std::atomic<unsigned> counter{0};
  std::ostringstream name;
  name << "cfgnet_" << getpid() << '_' << counter.fetch_add(1) << suffix;
  return fs::temp_directory_path() / name.str();
}

bool is_assembly_path(const fs::path& path) {
  const std::string ext = path.extension().string();
  return ext == ".s" || ext == ".S" || ext == ".asm";
}

void log_line(std::ostream* log, const std::string& line) {
  if (log != nullptr) *log << line << '\n';
}

}  // namespace

fs::path Manifest::resolve(const ManifestRow& row) const {
  fs::path p(row.path);
  if (p.is_absolute()) return p;
  return base_dir / p;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest " + path);

  Manifest manifest;
  manifest.base_dir = fs::absolute(fs::path(path)).parent_path();

  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + ": empty manifest, header expected");
  if (trim(line) != "path,label") {
    throw std::runtime_error(path + ": first line must be the header 'path,label'");
  }

  std::size_t row_no = 1;  // data rows, 1-based
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) {
      ++row_no;
      continue;
    }
    const std::size_t comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos) {
      throw std::runtime_error(path + ": row " + std::to_string(row_no) +
                               ": expected exactly 'path,label'");
    }
    ManifestRow row;
    row.path = trim(t.substr(0, comma));
    const std::string label_text = trim(t.substr(comma + 1));
    if (row.path.empty()) {
      throw std::runtime_error(path + ": row " + std::to_string(row_no) + ": empty path");
    }
    std::size_t used = 0;
    int label = 0;
    try {
      label = std::stoi(label_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != label_text.size() || label_text.empty()) {
      throw std::runtime_error(path + ": row " + std::to_string(row_no) + ": bad label '" +
                               label_text + "'");
    }
    if (label < 0 || label >= kNumClasses) {
      throw std::runtime_error(path + ": row " + std::to_string(row_no) + ": label " +
                               std::to_string(label) + " outside 0.." +
                               std::to_string(kNumClasses - 1));
    }
    row.label = label;
    if (!fs::exists(manifest.resolve(row))) {
      throw std::runtime_error(path + ": row " + std::to_string(row_no) + ": no such file " +
                               manifest.resolve(row).string());
    }
    manifest.rows.push_back(std::move(row));
    ++row_no;
  }
  return manifest;
}

CompileResult compile_to_assembly(const std::string& source_path,
                                  const std::string& command_template,
                                  double timeout_seconds) {
  if (command_template.find("{in}") == std::string::npos ||
      command_template.find("{out}") == std::string::npos) {
    throw ConfigError("compiler template must contain {in} and {out}: " + command_template);
  }

  const fs::path out_path = unique_temp_path(".s");
  const fs::path err_path = unique_temp_path(".err");
  std::string cmd = substitute_placeholder(command_template, "{in}", shell_quote(source_path));
  cmd = substitute_placeholder(cmd, "{out}", shell_quote(out_path.string()));
  cmd += " 2> " + shell_quote(err_path.string());

  CompileResult result;
  const RunOutcome run = run_shell(cmd, timeout_seconds);
  result.diagnostics = read_file_or_empty(err_path);
  result.exit_code = run.exit_code;

  std::error_code ignored;
  if (run.timed_out) {
    result.status = CompileStatus::TimedOut;
  } else if (run.exit_code == 127) {
    fs::remove(out_path, ignored);
    fs::remove(err_path, ignored);
    throw ConfigError("compiler command not found (exit 127): " + command_template +
                      (result.diagnostics.empty() ? "" : "\n" + result.diagnostics));
  } else if (run.exit_code == 0) {
    result.status = CompileStatus::Ok;
    result.assembly = read_file_or_empty(out_path);
  } else {
    result.status = CompileStatus::Failed;
  }
  fs::remove(out_path, ignored);
  fs::remove(err_path, ignored);
  return result;
}

std::vector<Sample> ingest(const Manifest& manifest, const IngestOptions& options) {
  std::vector<Sample> samples;
  samples.reserve(manifest.rows.size());
  for (const ManifestRow& row : manifest.rows) {
    const fs::path path = manifest.resolve(row);
    const std::string id = path.string();

    std::string assembly;
    if (is_assembly_path(path)) {
      assembly = read_file_or_empty(path);
      if (assembly.empty()) {
        log_line(options.log, "skip " + id + ": empty or unreadable file");
        continue;
      }
    } else {
      CompileResult compiled =
          compile_to_assembly(id, options.compiler_template, options.compile_timeout_seconds);
      if (compiled.status == CompileStatus::TimedOut) {
        log_line(options.log, "skip " + id + ": compile timeout");
        continue;
      }
      if (compiled.status == CompileStatus::Failed) {
        log_line(options.log, "skip " + id + ": compile failed (exit " +
                                  std::to_string(compiled.exit_code) + ")");
        continue;
      }
      assembly = std::move(compiled.assembly);
      if (assembly.empty()) {
        log_line(options.log, "skip " + id + ": compiler produced no assembly");
        continue;
      }
    }

    try {
      const std::vector<Block> blocks = parse_assembly(assembly, options.taxonomy);
      ControlFlowGraph graph = build_cfg(blocks, options.mode);
      if (graph.num_vertices() == 0) {
        log_line(options.log, "skip " + id + ": no instructions");
        continue;
      }
      log_line(options.log, "ok " + id + " vertices=" + std::to_string(graph.num_vertices()) +
                                " edges=" + std::to_string(graph.edges().size()));
      samples.push_back({id, std::move(graph), row.label});
    } catch (const ParseError& e) {
      log_line(options.log, "skip " + id + ": " + e.what());
    }
  }
  return samples;
}

FoldIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 5) {
    throw std::invalid_argument("need at least 5 samples to split 3:1:1, have " +
                                std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t cut1 = 3 * n / 5;
  const std::size_t cut2 = 4 * n / 5;
  FoldIndices folds;
  folds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut1));
  folds.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(cut1),
                          order.begin() + static_cast<std::ptrdiff_t>(cut2));
  folds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut2), order.end());
  return folds;
}

SplitResult split(const std::vector<Sample>& samples, std::uint64_t seed) {
  const FoldIndices folds = split_indices(samples.size(), seed);
  SplitResult result;
  auto take = [&](const std::vector<std::size_t>& idx, std::vector<Sample>& out) {
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(samples[i]);
  };
  take(folds.train, result.train);
  take(folds.validation, result.validation);
  take(folds.test, result.test);
  return result;
}

ClassStats class_stats(const std::vector<Sample>& samples) {
  ClassStats stats;
  for (const Sample& s : samples) {
    stats.counts.at(static_cast<std::size_t>(s.label)) += 1;
    stats.total += 1;
  }
  return stats;
}

}  // namespace cfgnet
