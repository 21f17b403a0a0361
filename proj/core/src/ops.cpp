#include "hetattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hetattn {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() +
                                " vs " + b.shape_string());
  }
}

// Elementwise unary op where the local derivative is a function of the input
// and output values.
template <typename F, typename D>
Var unary(Tape& t, Var a, F f, D dfdx) {
  const Matrix& x = t.value(a);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return t.record(std::move(y), [a, dfdx](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(a);
    const Matrix& yv = tp.value(self);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax_masked(std::span<const double> scores,
                                   std::span<const std::uint8_t> mask) {
  if (scores.size() != mask.size()) {
    throw std::invalid_argument("softmax_masked: scores and mask differ in length");
  }
  double max_score = -INFINITY;
  bool any = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      max_score = any ? std::max(max_score, scores[i]) : scores[i];
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("empty attention support");
  std::vector<double> out(scores.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      out[i] = std::exp(scores[i] - max_score);
      total += out[i];
    }
  }
  for (double& v : out) v /= total;
  return out;
}

double cross_entropy(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) {
    throw std::invalid_argument("cross_entropy: dimension mismatch (" +
                                std::to_string(predicted.size()) + " vs " +
                                std::to_string(target.size()) + ")");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(predicted[i], kProbabilityFloor));
  }
  return loss;
}

namespace ops {

Var add(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  require_same_shape(x, y, "add");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

Var sub(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  require_same_shape(x, y, "sub");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

Var mul(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  require_same_shape(x, y, "mul");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return t.record(std::move(out), [a, b](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(a);
    const Matrix& yv = tp.value(b);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
  });
}

Var scale(Tape& t, Var a, double s) {
  return unary(
      t, a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var sigmoid(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return hetattn::sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var abs(Tape& t, Var a) {
  // Subgradient 0 at the kink.
  return unary(
      t, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var square(Tape& t, Var a) {
  return unary(
      t, a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Tape& t, Var a) {
  const Matrix& x = t.value(a);
  double s = 0.0;
  for (double v : x.values()) s += v;
  return t.record(Matrix(1, 1, s), [a](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var dot(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  require_same_shape(x, y, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return t.record(Matrix(1, 1, s), [a, b](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const Matrix& xv = tp.value(a);
    const Matrix& yv = tp.value(b);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * yv[i];
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * xv[i];
  });
}

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  if (x.cols() != y.rows()) {
    throw std::invalid_argument("matmul: inner dimension mismatch " + x.shape_string() + " * " +
                                y.shape_string());
  }
  const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += xv * y(p, j);
    }
  }
  return t.record(std::move(out), [a, b, n, k, m](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(a);
    const Matrix& yv = tp.value(b);
    Matrix& ga = tp.grad(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += g(i, j) * yv(p, j);
        ga(i, p) += s;
      }
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double xip = xv(i, p);
        for (std::size_t j = 0; j < m; ++j) gb(p, j) += xip * g(i, j);
      }
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimension mismatch " + x.shape_string() +
                                " * " + y.shape_string() + "^T");
  }
  const std::size_t n = x.rows(), k = x.cols(), m = y.rows();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += x(i, p) * y(j, p);
      out(i, j) = s;
    }
  return t.record(std::move(out), [a, b, n, k, m](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(a);
    const Matrix& yv = tp.value(b);
    Matrix& ga = tp.grad(a);
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga(i, p) += gij * yv(j, p);
          gb(j, p) += gij * xv(i, p);
        }
      }
  });
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Matrix& xv = t.value(x);
  const Matrix& wv = t.value(w);
  const Matrix& bv = t.value(b);
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw std::invalid_argument("affine: incompatible shapes x " + xv.shape_string() + ", w " +
                                wv.shape_string() + ", b " + bv.shape_string());
  }
  const std::size_t n = xv.rows(), in = xv.cols(), out_dim = wv.rows();
  Matrix out(n, out_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = xv.data() + i * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wv.data() + o * in;
      double s = bv[o];
      for (std::size_t p = 0; p < in; ++p) s += wr[p] * xr[p];
      out(i, o) = s;
    }
  }
  return t.record(std::move(out), [x, w, b, n, in, out_dim](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xval = tp.value(x);
    const Matrix& wval = tp.value(w);
    Matrix& gx = tp.grad(x);
    Matrix& gw = tp.grad(w);
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < n; ++i) {
      const double* xr = xval.data() + i * in;
      double* gxr = gx.data() + i * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double go = g(i, o);
        if (go == 0.0) continue;
        gb[o] += go;
        const double* wr = wval.data() + o * in;
        double* gwr = gw.data() + o * in;
        for (std::size_t p = 0; p < in; ++p) {
          gxr[p] += go * wr[p];
          gwr[p] += go * xr[p];
        }
      }
    }
  });
}

Var concat_cols(Tape& t, Var a, Var b) {
  const Matrix& x = t.value(a);
  const Matrix& y = t.value(b);
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("concat_cols: row mismatch " + x.shape_string() + " vs " +
                                y.shape_string());
  }
  const std::size_t n = x.rows(), ca = x.cols(), cb = y.cols();
  Matrix out(n, ca + cb);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out(i, j) = x(i, j);
    for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = y(i, j);
  }
  return t.record(std::move(out), [a, b, n, ca, cb](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a);
    Matrix& gb = tp.grad(b);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < ca; ++j) ga(i, j) += g(i, j);
      for (std::size_t j = 0; j < cb; ++j) gb(i, j) += g(i, ca + j);
    }
  });
}

Var pad_cols(Tape& t, Var a, std::size_t width) {
  const Matrix& x = t.value(a);
  if (x.rows() != 1 || x.cols() > width) {
    throw std::invalid_argument("pad_cols: cannot pad " + x.shape_string() + " to width " +
                                std::to_string(width));
  }
  Matrix out(1, width);
  std::copy(x.values().begin(), x.values().end(), out.values().begin());
  const std::size_t n = x.cols();
  return t.record(std::move(out), [a, n](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad(a);
    for (std::size_t j = 0; j < n; ++j) ga[j] += g[j];
  });
}

Var gather_rows(Tape& t, Var table, std::span<const std::size_t> indices) {
  const Matrix& tab = t.value(table);
  const std::size_t d = tab.cols();
  Matrix out(indices.size(), d);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tab.rows()) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[i]) +
                              " out of range for table with " + std::to_string(tab.rows()) +
                              " rows");
    }
    auto src = tab.row_span(indices[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return t.record(std::move(out), [table, idx = std::move(idx), d](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& gt = tp.grad(table);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt(idx[i], j) += g(i, j);
  });
}

Var softmax_masked(Tape& t, Var scores, const Mask& mask) {
  const Matrix& s = t.value(scores);
  if (s.rows() != 1) throw std::invalid_argument("softmax_masked: expects a 1 x n row");
  Matrix out = Matrix::row(hetattn::softmax_masked(s.values(), mask));
  return t.record(std::move(out), [scores](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value(self);
    double inner = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) inner += g[i] * y[i];
    Matrix& gs = tp.grad(scores);
    // Masked-out y are 0, so their score adjoints stay 0.
    for (std::size_t i = 0; i < y.size(); ++i) gs[i] += y[i] * (g[i] - inner);
  });
}

Var softmax(Tape& t, Var scores) {
  const Mask all(t.value(scores).cols(), 1);
  return softmax_masked(t, scores, all);
}

Var cross_entropy(Tape& t, Var probs, std::size_t target) {
  const Matrix& p = t.value(probs);
  if (p.rows() != 1 || target >= p.cols()) {
    throw std::invalid_argument("cross_entropy: target class " + std::to_string(target) +
                                " invalid for prediction " + p.shape_string());
  }
  const double pt = p[target];
  const double loss = -std::log(std::max(pt, kProbabilityFloor));
  return t.record(Matrix(1, 1, loss), [probs, target](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const double pv = tp.value(probs)[target];
    if (pv > kProbabilityFloor) tp.grad(probs)[target] -= g / pv;
  });
}

Var dropout(Tape& t, Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const Matrix& x = t.value(a);
  Matrix keep(x.rows(), x.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = rng.bernoulli(rate) ? 0.0 : 1.0 / (1.0 - rate);
  Var k = t.constant(std::move(keep));
  return mul(t, a, k);
}

Var lstm(Tape& t, Var x, Var w, Var b, bool reverse) {
  const Matrix& xv = t.value(x);
  const Matrix& wv = t.value(w);
  const Matrix& bv = t.value(b);
  const std::size_t steps = xv.rows();
  const std::size_t in = xv.cols();
  if (wv.rows() % 4 != 0) throw std::invalid_argument("lstm: weight rows must be 4H");
  const std::size_t hidden = wv.rows() / 4;
  if (wv.cols() != in + hidden || bv.rows() != 1 || bv.cols() != 4 * hidden) {
    throw std::invalid_argument("lstm: incompatible shapes x " + xv.shape_string() + ", w " +
                                wv.shape_string() + ", b " + bv.shape_string());
  }
  if (steps == 0) throw std::invalid_argument("lstm: empty sequence");

  const std::size_t width = in + hidden;
  // Per processed step: gate activations [i f o g] (4H), cell c (H), tanh(c) (H),
  // and the step input [x_t; h_{t-1}] (in + H).
  std::vector<double> gates(steps * 4 * hidden);
  std::vector<double> cells(steps * hidden);
  std::vector<double> cell_tanh(steps * hidden);
  std::vector<double> inputs(steps * width);
  Matrix out(steps, hidden);

  std::vector<double> h_prev(hidden, 0.0), c_prev(hidden, 0.0);
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t pos = reverse ? steps - 1 - s : s;
    double* z = inputs.data() + s * width;
    std::copy(xv.row_span(pos).begin(), xv.row_span(pos).end(), z);
    std::copy(h_prev.begin(), h_prev.end(), z + in);
    double* gs = gates.data() + s * 4 * hidden;
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      const double* wr = wv.data() + r * width;
      double acc = bv[r];
      for (std::size_t p = 0; p < width; ++p) acc += wr[p] * z[p];
      gs[r] = acc;
    }
    double* cs = cells.data() + s * hidden;
    double* ts = cell_tanh.data() + s * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double ig = hetattn::sigmoid(gs[j]);
      const double fg = hetattn::sigmoid(gs[hidden + j]);
      const double og = hetattn::sigmoid(gs[2 * hidden + j]);
      const double cg = std::tanh(gs[3 * hidden + j]);
      gs[j] = ig;
      gs[hidden + j] = fg;
      gs[2 * hidden + j] = og;
      gs[3 * hidden + j] = cg;
      cs[j] = fg * c_prev[j] + ig * cg;
      ts[j] = std::tanh(cs[j]);
      const double h = og * ts[j];
      out(pos, j) = h;
      h_prev[j] = h;
      c_prev[j] = cs[j];
    }
  }

  auto backward = [x, w, b, reverse, steps, in, hidden, width, gates = std::move(gates),
                   cells = std::move(cells), cell_tanh = std::move(cell_tanh),
                   inputs = std::move(inputs)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& wval = tp.value(w);
    Matrix& gx = tp.grad(x);
    Matrix& gw = tp.grad(w);
    Matrix& gb = tp.grad(b);
    std::vector<double> dh_next(hidden, 0.0), dc_next(hidden, 0.0);
    std::vector<double> dpre(4 * hidden), dz(width);
    for (std::size_t s = steps; s-- > 0;) {
      const std::size_t pos = reverse ? steps - 1 - s : s;
      const double* gs = gates.data() + s * 4 * hidden;
      const double* ts = cell_tanh.data() + s * hidden;
      const double* c_before = s > 0 ? cells.data() + (s - 1) * hidden : nullptr;
      for (std::size_t j = 0; j < hidden; ++j) {
        const double ig = gs[j], fg = gs[hidden + j], og = gs[2 * hidden + j],
                     cg = gs[3 * hidden + j];
        const double dh = g(pos, j) + dh_next[j];
        const double dc = dc_next[j] + dh * og * (1.0 - ts[j] * ts[j]);
        const double cp = c_before ? c_before[j] : 0.0;
        dpre[j] = dc * cg * ig * (1.0 - ig);
        dpre[hidden + j] = dc * cp * fg * (1.0 - fg);
        dpre[2 * hidden + j] = dh * ts[j] * og * (1.0 - og);
        dpre[3 * hidden + j] = dc * ig * (1.0 - cg * cg);
        dc_next[j] = dc * fg;
      }
      const double* z = inputs.data() + s * width;
      std::fill(dz.begin(), dz.end(), 0.0);
      for (std::size_t r = 0; r < 4 * hidden; ++r) {
        const double d = dpre[r];
        if (d == 0.0) continue;
        gb[r] += d;
        const double* wr = wval.data() + r * width;
        double* gwr = gw.data() + r * width;
        for (std::size_t p = 0; p < width; ++p) {
          gwr[p] += d * z[p];
          dz[p] += d * wr[p];
        }
      }
      for (std::size_t p = 0; p < in; ++p) gx(pos, p) += dz[p];
      for (std::size_t j = 0; j < hidden; ++j) dh_next[j] = dz[in + j];
    }
  };
  return t.record(std::move(out), std::move(backward));
}

}  // namespace ops
}  // namespace hetattn
