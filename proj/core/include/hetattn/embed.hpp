#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hetattn/matrix.hpp"
#include "hetattn/rng.hpp"
#include "hetattn/textprep.hpp"

namespace hetattn {

struct CbowOptions {
  std::size_t dim = 100;
  std::size_t window = 3;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  /// Initial rate, decayed linearly towards 1e-4 of itself over all epochs.
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct CbowReport {
  /// Mean negative-sampling loss per predicted center word, one per epoch.
  std::vector<double> epoch_losses;
};

/// One training case: the averaged context predicts `center` against
/// `negatives`.
struct CbowTriple {
  std::vector<std::size_t> context;
  std::size_t center = 0;
  std::vector<std::size_t> negatives;
};

/// -log s(o_c . h) - sum_n log s(-o_n . h), with h the mean input vector of
/// the context words.
double cbow_loss(const Matrix& input, const Matrix& output, const CbowTriple& triple);

/// Adds d(loss)/d(input) and d(loss)/d(output) into the given accumulators.
void cbow_gradients(const Matrix& input, const Matrix& output, const CbowTriple& triple,
                    Matrix& grad_input, Matrix& grad_output);

/// CBOW with negative sampling over index sequences. Index 0 (PAD) is never a
/// center, context, or negative, and its row stays zero. Returns the
/// input-side vectors, |V| x dim. Throws std::invalid_argument on an empty
/// corpus or zero dim/window.
Matrix train_cbow(const std::vector<std::vector<std::size_t>>& sequences, std::size_t vocab_size,
                  const CbowOptions& options, CbowReport* report = nullptr);

/// [word_table[word]; tag_table[tag]] as one vector.
std::vector<double> lookup_concat(std::size_t word, std::size_t tag, const Matrix& word_table,
                                  const Matrix& tag_table);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct EmbeddingTable {
  std::vector<std::string> tokens;
  Matrix vectors;
};

/// Text format: "vocab_size dim" header, then "token v1 ... vd" per line.
void save_embeddings(const std::filesystem::path& path, const Vocab& vocab, const Matrix& vectors);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// Rows for vocab tokens present in the table are copied; other rows are
/// drawn uniformly from [-scale, scale]; PAD is zero.
Matrix align_embeddings(const EmbeddingTable& table, const Vocab& vocab, Rng& rng,
                        double scale = 0.08);

}  // namespace hetattn
