#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <unistd.h>

namespace flowsync::testing {

namespace fs = std::filesystem;

// Fresh, empty scratch directory under the system temp dir; removed on scope exit.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(fs::temp_directory_path() /
              ("flowsync_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// True iff both trees hold the same relative paths with identical bytes.
inline bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n_a = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++n_a;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || file_bytes(e.path()) != file_bytes(other)) return false;
  }
  std::size_t n_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) n_b += e.is_regular_file() ? 1 : 0;
  return n_a == n_b;
}

}  // namespace flowsync::testing
