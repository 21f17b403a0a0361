#include "hetattn/tape.hpp"

#include <stdexcept>

namespace hetattn {

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  Node n;
  n.source = &p;
  n.sink = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::param(const Param& p) {
  Node n;
  n.source = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.source ? n.source->value : n.value;
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  n.reached = true;
  if (n.sink) return n.sink->grad;
  if (n.grad.empty() && !value(id).empty()) {
    const Matrix& v = value(id);
    n.grad = Matrix(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.id >= nodes_.size()) throw std::out_of_range("backward: unknown loss node");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw std::invalid_argument("backward: loss must be 1x1, got " + lv.shape_string());
  }
  for (Node& n : nodes_) {
    n.reached = false;
    if (!n.sink) n.grad.fill(0.0);
  }
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.reached && n.backward) n.backward(*this, i);
  }
}

}  // namespace hetattn
