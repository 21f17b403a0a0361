#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hetattn/corpus.hpp"

namespace hetattn {

/// Sorted (index, value) pairs; indices strictly increasing and < dim.
struct SparseVec {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::size_t dim = 0;

  /// Throws std::invalid_argument if the invariants do not hold.
  void check() const;
};

/// Word unigrams plus space-joined bigrams over the whole comment (bigrams may
/// cross sentence boundaries).
std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens);
/// Trigrams of "#" + tokens joined by single spaces + "#".
std::vector<std::string> char_trigrams(const std::vector<std::string>& tokens);

struct NgramOptions {
  std::size_t max_word_ngrams = 5000;
  std::size_t max_char_trigrams = 5000;
  /// Occurrence counts instead of binary presence.
  bool counts = false;
};

class NgramVocab {
 public:
  NgramVocab() = default;
  /// Keeps the most frequent n-grams of the training comments; ties are broken
  /// lexicographically.
  static NgramVocab build(const std::vector<Comment>& train, const NgramOptions& options = {});

  std::size_t word_size() const { return words_.size(); }
  std::size_t char_size() const { return chars_.size(); }
  /// Index of a word n-gram, or -1.
  long word_index(const std::string& ngram) const;
  /// Index of a char trigram relative to the char block, or -1.
  long char_index(const std::string& trigram) const;
  bool counts() const { return counts_; }

 private:
  std::unordered_map<std::string, std::size_t> words_;
  std::unordered_map<std::string, std::size_t> chars_;
  bool counts_ = false;
};

class SentimentLexicon {
 public:
  SentimentLexicon() = default;
  /// Throws std::invalid_argument for polarities other than +1/-1 or a token
  /// listed with both.
  void add(const std::string& token, int polarity);
  /// "token<TAB>polarity" per line, polarity +1/-1 (or "positive"/"negative").
  /// Missing or malformed files are an InputError.
  static SentimentLexicon load(const std::filesystem::path& path);
  /// +1, -1 or 0 for tokens not in the lexicon.
  int polarity(const std::string& token) const;
  std::size_t size() const { return polarity_.size(); }

 private:
  std::unordered_map<std::string, int> polarity_;
};

inline constexpr std::size_t kSentimentSlots = 4;

/// Feature layout: word n-grams, char trigrams, then (with use_sentiment)
/// positive count, negative count, neutral count and mean polarity.
SparseVec extract_features(const Comment& comment, const NgramVocab& vocab,
                           const SentimentLexicon* lexicon, bool use_sentiment);

struct SvmModel {
  std::vector<double> weights;
  double bias = 0.0;
};

struct SvmOptions {
  double lambda = 1e-4;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
};

struct SvmReport {
  /// Regularized hinge objective measured after each epoch.
  std::vector<double> epoch_objectives;
};

/// Stochastic subgradient descent on lambda/2 |w|^2 + mean hinge with step
/// 1/(lambda t). The bias is an extra constant-1 feature and is regularized
/// with the weights. Throws std::invalid_argument unless both classes occur.
SvmModel train_svm(const std::vector<SparseVec>& features, const std::vector<bool>& labels,
                   const SvmOptions& options = {}, SvmReport* report = nullptr);

/// w . x + b. Throws std::invalid_argument on a dimension mismatch.
double svm_score(const SvmModel& model, const SparseVec& x);

double svm_objective(const SvmModel& model, const std::vector<SparseVec>& features,
                     const std::vector<bool>& labels, double lambda);

}  // namespace hetattn
