#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "hetattn/matrix.hpp"

namespace hetattn {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;
};

/// Named parameter slots. Iteration order is lexicographic by name, which
/// keeps optimizer updates and serialization deterministic.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init);

  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return slots_.count(name) != 0; }

  void zero_grad();
  std::size_t size() const { return slots_.size(); }
  std::size_t total_entries() const;
  std::vector<std::string> names() const;

  auto begin() { return slots_.begin(); }
  auto end() { return slots_.end(); }
  auto begin() const { return slots_.begin(); }
  auto end() const { return slots_.end(); }

  /// Copies values only (gradients are reset). Shapes must match.
  void assign_values(const ParamStore& other);

 private:
  std::map<std::string, Param> slots_;
};

}  // namespace hetattn
