#include "cli_runner.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace treg::testing {

namespace fs = std::filesystem;

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::map<std::string, fs::path> list_files(const fs::path& root) {
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = e.path();
  }
  return files;
}

}  // namespace

int run_cli(const std::string& cli, const std::vector<std::string>& args,
            const fs::path& log_path) {
  std::string cmd = quote(cli);
  for (const std::string& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(log_path.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string compare_trees(const fs::path& a, const fs::path& b) {
  if (!fs::is_directory(a) || !fs::is_directory(b)) return "missing output directory";
  const auto fa = list_files(a);
  const auto fb = list_files(b);
  if (fa.empty()) return "no files in " + a.string();
  for (const auto& [name, path] : fa) {
    const auto it = fb.find(name);
    if (it == fb.end()) return name + " only in " + a.string();
    if (read_text(path) != read_text(it->second)) return name + " differs";
  }
  for (const auto& [name, path] : fb) {
    if (!fa.count(name)) return name + " only in " + b.string();
  }
  return "";
}

}  // namespace treg::testing
