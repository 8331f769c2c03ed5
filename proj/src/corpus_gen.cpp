#include "cfgnet/corpus_gen.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfgnet/rng.hpp"

namespace cfgnet {

namespace fs = std::filesystem;

namespace {

const char* kRegs[] = {"%eax", "%ebx", "%edx", "%esi", "%edi"};  // %ecx reserved for loops

std::string reg(Rng& rng) { return kRegs[rng.below(sizeof(kRegs) / sizeof(kRegs[0]))]; }

std::string imm(Rng& rng) { return "$" + std::to_string(1 + rng.below(99)); }

// A couple of innocuous data-flow instructions shared by every class.
std::string filler_line(Rng& rng) {
  switch (rng.below(6)) {
    case 0:
      return "\tmovl " + imm(rng) + ", " + reg(rng);
    case 1:
      return "\tmovl " + reg(rng) + ", " + reg(rng);
    case 2:
      return "\taddl " + imm(rng) + ", " + reg(rng);
    case 3:
      return "\tsubl " + imm(rng) + ", " + reg(rng);
    case 4:
      return "\txorl " + reg(rng) + ", " + reg(rng);
    default:
      return "\timull " + imm(rng) + ", " + reg(rng);
  }
}

void fillers(std::vector<std::string>& lines, Rng& rng, std::size_t lo, std::size_t hi) {
  const std::size_t n = lo + rng.below(hi - lo + 1);
  for (std::size_t i = 0; i < n; ++i) lines.push_back(filler_line(rng));
}

std::string straight_line_body(Rng& rng, std::size_t index) {
  std::vector<std::string> lines;
  lines.push_back("routine" + std::to_string(index) + ":");
  fillers(lines, rng, 3, 8);
  lines.push_back("\tret");
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string forward_branch_body(Rng& rng, std::size_t index) {
  const std::string skip = ".Lskip" + std::to_string(index);
  std::vector<std::string> lines;
  lines.push_back("routine" + std::to_string(index) + ":");
  fillers(lines, rng, 1, 4);
  lines.push_back("\tcmpl " + imm(rng) + ", " + reg(rng));
  lines.push_back("\tjg " + skip);
  fillers(lines, rng, 1, 3);
  lines.push_back(skip + ":");
  fillers(lines, rng, 1, 3);
  lines.push_back("\tret");
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string counted_loop_body(Rng& rng, std::size_t index) {
  const std::string head = ".Lloop" + std::to_string(index);
  std::vector<std::string> lines;
  lines.push_back("routine" + std::to_string(index) + ":");
  lines.push_back("\tmovl $" + std::to_string(2 + rng.below(30)) + ", %ecx");
  lines.push_back(head + ":");
  fillers(lines, rng, 1, 3);
  lines.push_back("\tsubl $1, %ecx");
  lines.push_back("\tcmpl $0, %ecx");
  lines.push_back("\tjne " + head);
  lines.push_back("\tret");
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string helper_call_body(Rng& rng, std::size_t index) {
  const std::string helper = "helper" + std::to_string(index);
  std::vector<std::string> lines;
  lines.push_back("routine" + std::to_string(index) + ":");
  fillers(lines, rng, 1, 4);
  lines.push_back("\tcall " + helper);
  fillers(lines, rng, 1, 3);
  lines.push_back("\tret");
  lines.push_back(helper + ":");
  fillers(lines, rng, 1, 2);
  lines.push_back("\tret");
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string jump_over_body(Rng& rng, std::size_t index) {
  const std::string end = ".Lend" + std::to_string(index);
  std::vector<std::string> lines;
  lines.push_back("routine" + std::to_string(index) + ":");
  const std::size_t depth = 1 + rng.below(3);
  for (std::size_t i = 0; i < depth; ++i) lines.push_back("\tpushq %rbx");
  fillers(lines, rng, 1, 3);
  lines.push_back("\tjmp " + end);
  fillers(lines, rng, 1, 2);  // unreachable
  lines.push_back(end + ":");
  for (std::size_t i = 0; i < depth; ++i) lines.push_back("\tpopq %rbx");
  lines.push_back("\tret");
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string no_call_body(Rng& rng, std::size_t index) {
  // Mixes branches and loops freely but never calls.
  switch (rng.below(3)) {
    case 0:
      return straight_line_body(rng, index);
    case 1:
      return forward_branch_body(rng, index);
    default:
      return counted_loop_body(rng, index);
  }
}

fs::path write_corpus(const fs::path& dir, std::uint64_t seed, std::size_t count,
                      std::size_t num_classes,
                      std::string (*generate)(Rng&, std::size_t, int)) {
  if (count == 0) throw std::invalid_argument("corpus size must be positive");
  fs::create_directories(dir);
  Rng rng(seed);
  std::ostringstream manifest;
  manifest << "path,label\n";
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % num_classes);
    std::ostringstream name;
    name << "sample_" << std::setw(3) << std::setfill('0') << i << ".s";
    std::ofstream os(dir / name.str(), std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir / name.str()).string());
    os << generate(rng, i, label);
    manifest << name.str() << ',' << label << '\n';
  }
  const fs::path manifest_path = dir / "manifest.csv";
  std::ofstream ms(manifest_path, std::ios::trunc);
  if (!ms) throw std::runtime_error("cannot write " + manifest_path.string());
  ms << manifest.str();
  return manifest_path;
}

std::string two_class_sample(Rng& rng, std::size_t index, int label) {
  return label == 0 ? helper_call_body(rng, index) : no_call_body(rng, index);
}

std::string five_class_sample(Rng& rng, std::size_t index, int label) {
  switch (label) {
    case 0:
      return straight_line_body(rng, index);
    case 1:
      return forward_branch_body(rng, index);
    case 2:
      return counted_loop_body(rng, index);
    case 3:
      return helper_call_body(rng, index);
    default:
      return jump_over_body(rng, index);
  }
}

std::string c_sample(Rng& rng, std::size_t, int label) {
  const unsigned a = 1 + static_cast<unsigned>(rng.below(50));
  const unsigned b = 1 + static_cast<unsigned>(rng.below(50));
  std::ostringstream os;
  switch (label) {
    case 0:
      os << "int main(void) {\n  int a = " << a << ", b = " << b << ";\n  return a + b > 0 ? 0 : 1;\n}\n";
      break;
    case 1:
      os << "int main(void) {\n  int x = " << a << ";\n  if (x > " << b
         << ")\n    x -= " << b << ";\n  return x & 1;\n}\n";
      break;
    case 2:
      os << "int main(void) {\n  int s = 0;\n  for (int i = 0; i < " << a
         << "; ++i)\n    s += i;\n  return s & 3;\n}\n";
      break;
    case 3:
      os << "static int f(int v) { return v * " << a << "; }\nint main(void) { return f(" << b
         << ") & 7; }\n";
      break;
    default:
      // Unbalanced parenthesis: rejected by any C compiler.
      os << "int main(void { return " << a << "; }\n";
      break;
  }
  return os.str();
}

fs::path write_c_files(const fs::path& dir, std::uint64_t seed, std::size_t count) {
  if (count == 0) throw std::invalid_argument("corpus size must be positive");
  fs::create_directories(dir);
  Rng rng(seed);
  std::ostringstream manifest;
  manifest << "path,label\n";
  for (std::size_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 5);
    std::ostringstream name;
    name << "prog_" << std::setw(2) << std::setfill('0') << i << ".c";
    std::ofstream os(dir / name.str(), std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + (dir / name.str()).string());
    os << c_sample(rng, i, label);
    manifest << name.str() << ',' << label << '\n';
  }
  const fs::path manifest_path = dir / "manifest.csv";
  std::ofstream ms(manifest_path, std::ios::trunc);
  if (!ms) throw std::runtime_error("cannot write " + manifest_path.string());
  ms << manifest.str();
  return manifest_path;
}

}  // namespace

fs::path write_two_class_corpus(const fs::path& dir, std::uint64_t seed, std::size_t count) {
  return write_corpus(dir, seed, count, 2, two_class_sample);
}

fs::path write_five_class_corpus(const fs::path& dir, std::uint64_t seed, std::size_t count) {
  return write_corpus(dir, seed, count, 5, five_class_sample);
}

fs::path write_c_corpus(const fs::path& dir, std::uint64_t seed, std::size_t count) {
  return write_c_files(dir, seed, count);
}

}  // namespace cfgnet
