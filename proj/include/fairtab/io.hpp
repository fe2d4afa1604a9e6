#pragma once

#include <string>

namespace fairtab {

std::string read_file(const std::string& path);

// temp file + rename, so partial runs never leave a truncated artifact
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace fairtab
