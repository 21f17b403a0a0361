#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hetattn/kv_config.hpp"

namespace hetattn::cli {

std::string sha256_file(const std::filesystem::path& path);

/// Record of one invocation: what went in, what came out. Contains no
/// timestamps so that reruns produce the same file.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void set_config(KeyValues config) { config_ = std::move(config); }
  void add_seed(std::uint64_t seed) { seeds_.push_back(seed); }
  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);

  /// Inputs and artifacts are hashed at write time.
  void write(const std::filesystem::path& file) const;

 private:
  std::string command_;
  KeyValues config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::filesystem::path> inputs_;
  std::vector<std::filesystem::path> artifacts_;
};

}  // namespace hetattn::cli
