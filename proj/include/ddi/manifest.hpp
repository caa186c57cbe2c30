#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ddi::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view data);
/// Throws DataError naming the path when the file cannot be read.
std::string sha256_file(const std::string& path);
std::string read_file(const std::string& path);

/// Writes to `path.tmp` and renames over `path`.
void write_atomic(const std::string& path, std::string_view content);

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config;  // resolved config snapshot
  std::uint64_t seed = 0;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  double wall_seconds = 0.0;
  std::string tool_version{kToolVersion};

  void add_input(const std::string& path);
  /// Records the output with the digest of its current contents.
  void add_output(const std::string& path);
  std::string to_json() const;
};

/// `<output>.manifest.json`.
std::string manifest_path(const std::string& output);

}  // namespace ddi::cli
