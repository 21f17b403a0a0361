#include "hetattn/param_store.hpp"

#include <stdexcept>

namespace hetattn {

Param& ParamStore::add(const std::string& name, Matrix init) {
  if (slots_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Param p;
  p.name = name;
  p.grad = Matrix(init.rows(), init.cols());
  p.value = std::move(init);
  return slots_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : slots_) p.grad.fill(0.0);
}

std::size_t ParamStore::total_entries() const {
  std::size_t n = 0;
  for (const auto& [name, p] : slots_) n += p.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, p] : slots_) out.push_back(name);
  return out;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.size() != size()) throw std::invalid_argument("assign_values: slot count mismatch");
  for (auto& [name, p] : slots_) {
    const Param& src = other.at(name);
    if (!src.value.same_shape(p.value)) {
      throw std::invalid_argument("assign_values: shape mismatch for " + name);
    }
    p.value = src.value;
    p.grad.fill(0.0);
  }
}

}  // namespace hetattn
