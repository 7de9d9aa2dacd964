// common/fsutil.cpp

#include "common/fsutil.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "common/error.hpp"

namespace fs = std::filesystem;

namespace sea {

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  check_io(!ec, "cannot create directory " + dir + ": " + ec.message());
}

bool path_exists(const std::string& path) {
  std::error_code ec;
  return fs::exists(path, ec);
}

std::string path_join(const std::string& a, const std::string& b) {
  if (a.empty()) return b;
  return (fs::path(a) / b).string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  check_io(f.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  check_io(!f.bad(), "read failed on " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  check_io(f.good(), "cannot open " + path + " for writing");
  f << text;
  f.flush();
  check_io(f.good(), "write failed on " + path);
}

}  // namespace sea
