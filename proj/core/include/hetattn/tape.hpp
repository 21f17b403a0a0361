#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "hetattn/matrix.hpp"
#include "hetattn/param_store.hpp"

namespace hetattn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Each recorded node owns its forward value and a closure
/// that pushes the node's adjoint into the adjoints of its inputs. Parameter
/// leaves do not copy the parameter; their adjoint is the Param's gradient
/// slot, so a backward sweep accumulates straight into the ParamStore.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  Var param(Param& p);
  /// Read-only parameter leaf; adjoints are discarded.
  Var param(const Param& p);
  Var record(Matrix value, Backward backward);

  const Matrix& value(Var v) const { return value(v.id); }
  const Matrix& value(std::size_t id) const;

  /// Adjoint of a node. Only meaningful inside backward(); marks the node as
  /// reached so its own closure will run.
  Matrix& grad(Var v) { return grad(v.id); }
  Matrix& grad(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and visits nodes in exact reverse recording
  /// order. loss must be 1 x 1. May be called more than once; node adjoints
  /// are reset each time, parameter gradients accumulate.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    const Param* source = nullptr;
    Param* sink = nullptr;
    Backward backward;
    bool reached = false;
  };

  std::vector<Node> nodes_;
};

}  // namespace hetattn
