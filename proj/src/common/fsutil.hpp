// common/fsutil.hpp
//
// Thin filesystem helpers: directory creation, whole-file text IO.

#pragma once

#include <string>

namespace sea {

void make_dirs(const std::string& dir);
bool path_exists(const std::string& path);
std::string path_join(const std::string& a, const std::string& b);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace sea
