#include "hetattn/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "hetattn/error.hpp"
#include "hetattn/ops.hpp"

namespace hetattn {

namespace {

std::vector<double> context_mean(const Matrix& input, const std::vector<std::size_t>& context) {
  std::vector<double> h(input.cols(), 0.0);
  for (std::size_t w : context) {
    auto row = input.row_span(w);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(context.size());
  for (double& v : h) v *= inv;
  return h;
}

double row_dot(const Matrix& m, std::size_t r, const std::vector<double>& h) {
  auto row = m.row_span(r);
  double s = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) s += row[j] * h[j];
  return s;
}

double log_sigmoid(double x) {
  // log(1 / (1 + exp(-x))) without overflow.
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

double cbow_loss(const Matrix& input, const Matrix& output, const CbowTriple& triple) {
  if (triple.context.empty()) throw std::invalid_argument("cbow_loss: empty context");
  const auto h = context_mean(input, triple.context);
  double loss = -log_sigmoid(row_dot(output, triple.center, h));
  for (std::size_t n : triple.negatives) loss -= log_sigmoid(-row_dot(output, n, h));
  return loss;
}

void cbow_gradients(const Matrix& input, const Matrix& output, const CbowTriple& triple,
                    Matrix& grad_input, Matrix& grad_output) {
  if (triple.context.empty()) throw std::invalid_argument("cbow_gradients: empty context");
  const auto h = context_mean(input, triple.context);
  const std::size_t d = h.size();
  std::vector<double> grad_h(d, 0.0);
  auto target = [&](std::size_t row, double label) {
    const double g = sigmoid(row_dot(output, row, h)) - label;
    auto orow = output.row_span(row);
    auto gorow = grad_output.row_span(row);
    for (std::size_t j = 0; j < d; ++j) {
      grad_h[j] += g * orow[j];
      gorow[j] += g * h[j];
    }
  };
  target(triple.center, 1.0);
  for (std::size_t n : triple.negatives) target(n, 0.0);
  const double inv = 1.0 / static_cast<double>(triple.context.size());
  for (std::size_t w : triple.context) {
    auto gi = grad_input.row_span(w);
    for (std::size_t j = 0; j < d; ++j) gi[j] += grad_h[j] * inv;
  }
}

Matrix train_cbow(const std::vector<std::vector<std::size_t>>& sequences, std::size_t vocab_size,
                  const CbowOptions& options, CbowReport* report) {
  if (options.dim == 0 || options.window == 0) {
    throw std::invalid_argument("train_cbow: dim and window must be >= 1");
  }
  std::vector<double> counts(vocab_size, 0.0);
  std::size_t total_tokens = 0;
  for (const auto& seq : sequences) {
    for (std::size_t w : seq) {
      if (w >= vocab_size) throw std::out_of_range("train_cbow: token index out of range");
      if (w == Vocab::kPad) continue;
      counts[w] += 1.0;
      ++total_tokens;
    }
  }
  if (total_tokens == 0) throw std::invalid_argument("train_cbow: empty corpus");

  // Negative-sampling distribution proportional to count^(3/4).
  std::vector<double> noise_cdf(vocab_size);
  double acc = 0.0;
  for (std::size_t w = 0; w < vocab_size; ++w) noise_cdf[w] = acc += std::pow(counts[w], 0.75);

  Rng rng(options.seed);
  const std::size_t d = options.dim;
  Matrix input(vocab_size, d);
  Matrix output(vocab_size, d);
  for (std::size_t w = 1; w < vocab_size; ++w) {
    for (std::size_t j = 0; j < d; ++j) input(w, j) = (rng.uniform() - 0.5) / static_cast<double>(d);
  }

  const double total_steps = static_cast<double>(total_tokens * options.epochs);
  double step = 0.0;
  std::vector<double> h(d), grad_h(d);
  std::vector<std::size_t> context;
  std::vector<std::size_t> negatives;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t cases = 0;
    for (const auto& seq : sequences) {
      for (std::size_t t = 0; t < seq.size(); ++t) {
        const std::size_t center = seq[t];
        if (center == Vocab::kPad) continue;
        const double lr =
            options.learning_rate * std::max(1.0 - step / total_steps, 1e-4);
        step += 1.0;

        context.clear();
        const std::size_t lo = t >= options.window ? t - options.window : 0;
        const std::size_t hi = std::min(seq.size(), t + options.window + 1);
        for (std::size_t k = lo; k < hi; ++k) {
          if (k != t && seq[k] != Vocab::kPad) context.push_back(seq[k]);
        }
        if (context.empty()) continue;

        negatives.clear();
        for (std::size_t n = 0; n < options.negatives; ++n) {
          const double u = rng.uniform() * noise_cdf.back();
          const auto neg = static_cast<std::size_t>(
              std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u) - noise_cdf.begin());
          if (neg != center && neg < vocab_size) negatives.push_back(neg);
        }

        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t w : context) {
          auto row = input.row_span(w);
          for (std::size_t j = 0; j < d; ++j) h[j] += row[j];
        }
        const double inv = 1.0 / static_cast<double>(context.size());
        for (double& v : h) v *= inv;

        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        double loss = 0.0;
        auto update = [&](std::size_t row, double label) {
          auto orow = output.row_span(row);
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) s += orow[j] * h[j];
          loss -= label > 0 ? log_sigmoid(s) : log_sigmoid(-s);
          const double g = sigmoid(s) - label;
          for (std::size_t j = 0; j < d; ++j) {
            grad_h[j] += g * orow[j];
            orow[j] -= lr * g * h[j];
          }
        };
        update(center, 1.0);
        for (std::size_t n : negatives) update(n, 0.0);
        for (std::size_t w : context) {
          auto row = input.row_span(w);
          for (std::size_t j = 0; j < d; ++j) row[j] -= lr * grad_h[j] * inv;
        }
        loss_sum += loss;
        ++cases;
      }
    }
    if (report) report->epoch_losses.push_back(cases ? loss_sum / static_cast<double>(cases) : 0.0);
  }
  return input;
}

std::vector<double> lookup_concat(std::size_t word, std::size_t tag, const Matrix& word_table,
                                  const Matrix& tag_table) {
  if (word >= word_table.rows()) {
    throw std::out_of_range("lookup_concat: word index " + std::to_string(word) + " out of range");
  }
  if (tag >= tag_table.rows()) {
    throw std::out_of_range("lookup_concat: tag index " + std::to_string(tag) + " out of range");
  }
  std::vector<double> out;
  out.reserve(word_table.cols() + tag_table.cols());
  for (double v : word_table.row_span(word)) out.push_back(v);
  for (double v : tag_table.row_span(tag)) out.push_back(v);
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

void save_embeddings(const std::filesystem::path& path, const Vocab& vocab, const Matrix& vectors) {
  if (vectors.rows() != vocab.size()) {
    throw std::invalid_argument("save_embeddings: table rows do not match vocabulary size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write embeddings to " + path.string());
  out << vectors.rows() << ' ' << vectors.cols() << '\n';
  char buf[40];
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    out << vocab.token(r);
    for (double v : vectors.row_span(r)) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embeddings " + path.string());
  std::string line;
  std::size_t rows = 0, dim = 0;
  if (!std::getline(in, line) || !(std::istringstream(line) >> rows >> dim) || dim == 0) {
    throw InputError(path.string() + ":1: expected header \"vocab_size dim\"");
  }
  EmbeddingTable table;
  table.vectors = Matrix(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw InputError(path.string() + ": expected " + std::to_string(rows) + " rows, found " +
                       std::to_string(r));
    }
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    for (std::size_t j = 0; j < dim; ++j) {
      if (!(ss >> table.vectors(r, j))) {
        throw InputError(path.string() + ":" + std::to_string(r + 2) + ": expected " +
                         std::to_string(dim) + " values");
      }
    }
    table.tokens.push_back(std::move(token));
  }
  return table;
}

Matrix align_embeddings(const EmbeddingTable& table, const Vocab& vocab, Rng& rng, double scale) {
  const std::size_t d = table.vectors.cols();
  Matrix out(vocab.size(), d);
  std::unordered_map<std::string, std::size_t> rows;
  for (std::size_t r = 0; r < table.tokens.size(); ++r) rows.emplace(table.tokens[r], r);
  for (std::size_t w = 1; w < vocab.size(); ++w) {
    auto it = rows.find(vocab.token(w));
    for (std::size_t j = 0; j < d; ++j) {
      out(w, j) = it != rows.end() ? table.vectors(it->second, j) : rng.uniform(-scale, scale);
    }
  }
  return out;
}

}  // namespace hetattn
