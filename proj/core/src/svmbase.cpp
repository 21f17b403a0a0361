#include "hetattn/svmbase.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hetattn/error.hpp"
#include "hetattn/rng.hpp"

namespace hetattn {

void SparseVec::check() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first >= dim) throw std::invalid_argument("SparseVec: index out of range");
    if (i && entries[i].first <= entries[i - 1].first) {
      throw std::invalid_argument("SparseVec: indices not strictly increasing");
    }
  }
}

std::vector<std::string> word_ngrams(const std::vector<std::string>& tokens) {
  std::vector<std::string> out(tokens);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + " " + tokens[i + 1]);
  return out;
}

std::vector<std::string> char_trigrams(const std::vector<std::string>& tokens) {
  std::string s = "#";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  s += '#';
  std::vector<std::string> out;
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) out.push_back(s.substr(i, 3));
  return out;
}

namespace {

std::unordered_map<std::string, std::size_t> top_k(const std::map<std::string, std::size_t>& freq,
                                                    std::size_t k) {
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  // freq is ordered lexicographically, so a stable sort keeps that as the tie-break.
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (items.size() > k) items.resize(k);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) index.emplace(items[i].first, i);
  return index;
}

}  // namespace

NgramVocab NgramVocab::build(const std::vector<Comment>& train, const NgramOptions& options) {
  std::map<std::string, std::size_t> word_freq, char_freq;
  for (const auto& c : train) {
    const auto tokens = c.surfaces();
    for (auto& g : word_ngrams(tokens)) ++word_freq[g];
    for (auto& g : char_trigrams(tokens)) ++char_freq[g];
  }
  NgramVocab v;
  v.words_ = top_k(word_freq, options.max_word_ngrams);
  v.chars_ = top_k(char_freq, options.max_char_trigrams);
  v.counts_ = options.counts;
  return v;
}

long NgramVocab::word_index(const std::string& ngram) const {
  auto it = words_.find(ngram);
  return it == words_.end() ? -1 : static_cast<long>(it->second);
}

long NgramVocab::char_index(const std::string& trigram) const {
  auto it = chars_.find(trigram);
  return it == chars_.end() ? -1 : static_cast<long>(it->second);
}

void SentimentLexicon::add(const std::string& token, int polarity) {
  if (polarity != 1 && polarity != -1) {
    throw std::invalid_argument("lexicon polarity must be +1 or -1 for '" + token + "'");
  }
  auto [it, inserted] = polarity_.emplace(token, polarity);
  if (!inserted && it->second != polarity) {
    throw std::invalid_argument("lexicon lists '" + token + "' with both polarities");
  }
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open sentiment lexicon " + path.string());
  SentimentLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (tab == std::string::npos || tab == 0) throw InputError(where + "expected token<TAB>polarity");
    const std::string token = line.substr(0, tab);
    const std::string pol = line.substr(tab + 1);
    int p = 0;
    if (pol == "1" || pol == "+1" || pol == "positive") p = 1;
    else if (pol == "-1" || pol == "negative") p = -1;
    else throw InputError(where + "polarity must be +1 or -1, got '" + pol + "'");
    try {
      lex.add(token, p);
    } catch (const std::invalid_argument& e) {
      throw InputError(where + e.what());
    }
  }
  return lex;
}

int SentimentLexicon::polarity(const std::string& token) const {
  auto it = polarity_.find(token);
  return it == polarity_.end() ? 0 : it->second;
}

SparseVec extract_features(const Comment& comment, const NgramVocab& vocab,
                           const SentimentLexicon* lexicon, bool use_sentiment) {
  if (use_sentiment && !lexicon) {
    throw std::invalid_argument("extract_features: sentiment features need a lexicon");
  }
  const auto tokens = comment.surfaces();
  std::map<std::uint32_t, double> acc;
  for (const auto& g : word_ngrams(tokens)) {
    const long i = vocab.word_index(g);
    if (i >= 0) acc[static_cast<std::uint32_t>(i)] += 1.0;
  }
  const auto char_base = static_cast<std::uint32_t>(vocab.word_size());
  for (const auto& g : char_trigrams(tokens)) {
    const long i = vocab.char_index(g);
    if (i >= 0) acc[char_base + static_cast<std::uint32_t>(i)] += 1.0;
  }
  SparseVec out;
  out.dim = vocab.word_size() + vocab.char_size() + (use_sentiment ? kSentimentSlots : 0);
  for (const auto& [i, v] : acc) out.entries.emplace_back(i, vocab.counts() ? v : 1.0);

  if (use_sentiment) {
    double pos = 0, neg = 0, neutral = 0;
    for (const auto& t : tokens) {
      const int p = lexicon->polarity(t);
      (p > 0 ? pos : p < 0 ? neg : neutral) += 1.0;
    }
    const double mean = tokens.empty() ? 0.0 : (pos - neg) / static_cast<double>(tokens.size());
    const auto base = static_cast<std::uint32_t>(vocab.word_size() + vocab.char_size());
    const double slots[kSentimentSlots] = {pos, neg, neutral, mean};
    for (std::uint32_t k = 0; k < kSentimentSlots; ++k) {
      if (slots[k] != 0.0) out.entries.emplace_back(base + k, slots[k]);
    }
  }
  return out;
}

double svm_score(const SvmModel& model, const SparseVec& x) {
  if (x.dim != model.weights.size()) {
    throw std::invalid_argument("svm_score: feature dimension " + std::to_string(x.dim) +
                                " does not match model dimension " +
                                std::to_string(model.weights.size()));
  }
  double s = model.bias;
  for (const auto& [i, v] : x.entries) s += model.weights[i] * v;
  return s;
}

double svm_objective(const SvmModel& model, const std::vector<SparseVec>& features,
                     const std::vector<bool>& labels, double lambda) {
  double norm2 = model.bias * model.bias;
  for (double w : model.weights) norm2 += w * w;
  double hinge = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = labels[i] ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * svm_score(model, features[i]));
  }
  return 0.5 * lambda * norm2 + hinge / static_cast<double>(features.size());
}

SvmModel train_svm(const std::vector<SparseVec>& features, const std::vector<bool>& labels,
                   const SvmOptions& options, SvmReport* report) {
  if (features.size() != labels.size()) throw std::invalid_argument("train_svm: size mismatch");
  const bool has_pos = std::find(labels.begin(), labels.end(), true) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), false) != labels.end();
  if (!has_pos || !has_neg) throw std::invalid_argument("train_svm: both classes are required");
  if (!(options.lambda > 0.0)) throw std::invalid_argument("train_svm: lambda must be > 0");
  const std::size_t dim = features.front().dim;
  for (const auto& f : features) {
    if (f.dim != dim) throw std::invalid_argument("train_svm: inconsistent feature dimensions");
  }

  // w = scale * v, with the bias stored as the last coordinate of v.
  std::vector<double> v(dim + 1, 0.0);
  double scale = 1.0;
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(options.seed);
  std::size_t t = 0;
  auto current = [&] {
    SvmModel m;
    m.weights.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) m.weights[j] = scale * v[j];
    m.bias = scale * v[dim];
    return m;
  };

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (options.lambda * static_cast<double>(t));
      const SparseVec& x = features[i];
      const double y = labels[i] ? 1.0 : -1.0;
      double margin = v[dim];
      for (const auto& [j, val] : x.entries) margin += v[j] * val;
      margin *= scale;

      const double shrink = 1.0 - eta * options.lambda;
      if (shrink <= 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (y * margin < 1.0) {
        const double step = eta * y / scale;
        for (const auto& [j, val] : x.entries) v[j] += step * val;
        v[dim] += step;
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    if (report) report->epoch_objectives.push_back(svm_objective(current(), features, labels, options.lambda));
  }
  return current();
}

}  // namespace hetattn
