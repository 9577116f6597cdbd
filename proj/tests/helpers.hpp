#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "essc/error.hpp"

namespace testing {

// Kind of the library error `fn` throws, or nullopt when it returns normally.
template <typename Fn>
std::optional<essc::ErrorKind> kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const essc::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
