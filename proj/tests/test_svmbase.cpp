#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "hetattn/error.hpp"
#include "hetattn/svmbase.hpp"
#include "test_support.hpp"

using namespace hetattn;

namespace {

SparseVec dense(std::vector<double> v) {
  SparseVec s;
  s.dim = v.size();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) s.entries.push_back({static_cast<std::uint32_t>(i), v[i]});
  return s;
}

double accuracy(const SvmModel& m, const std::vector<SparseVec>& x, const std::vector<bool>& y) {
  double ok = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) ok += ((svm_score(m, x[i]) > 0.0) == y[i]) ? 1.0 : 0.0;
  return ok / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("ngram enumeration") {
  const auto w = word_ngrams({"a", "b", "c"});
  CHECK(w == std::vector<std::string>{"a", "b", "c", "a b", "b c"});
  // "#ab#" -> "#ab", "ab#".
  CHECK(char_trigrams({"ab"}) == std::vector<std::string>{"#ab", "ab#"});
  CHECK(char_trigrams({"a", "b"}).size() == 3);
  CHECK(char_trigrams({}).empty());
}

TEST_CASE("sentiment slots") {
  const auto c = testutil::make_comment("x", {"good bad the"}, false);
  NgramVocab empty;
  SentimentLexicon lex;
  lex.add("good", 1);
  lex.add("bad", -1);
  CHECK_THROWS(lex.add("good", -1));
  const SparseVec f = extract_features(c, empty, &lex, true);
  CHECK(f.dim == kSentimentSlots);
  std::vector<double> slots(kSentimentSlots, 0.0);
  for (auto [i, v] : f.entries) slots[i] = v;
  CHECK(slots == std::vector<double>{1, 1, 1, 0});

  const auto g = testutil::make_comment("y", {"good good the"}, false);
  std::vector<double> gs(kSentimentSlots, 0.0);
  for (auto [i, v] : extract_features(g, empty, &lex, true).entries) gs[i] = v;
  CHECK(gs[3] == doctest::Approx(2.0 / 3.0));

  CHECK(extract_features(c, empty, nullptr, false).entries.empty());
  CHECK_THROWS(extract_features(c, empty, nullptr, true));
}

TEST_CASE("ngram vocabulary and features") {
  std::vector<Comment> train = {testutil::make_comment("1", {"x y", "y z"}, true),
                                testutil::make_comment("2", {"y"}, false)};
  NgramOptions opts;
  opts.max_word_ngrams = 2;
  opts.max_char_trigrams = 3;
  const NgramVocab v = NgramVocab::build(train, opts);
  CHECK(v.word_size() == 2);
  CHECK(v.char_size() == 3);
  CHECK(v.word_index("y") == 0);  // most frequent
  CHECK(v.word_index("x") == 1);  // ties break lexicographically
  CHECK(v.word_index("nope") == -1);
  const SparseVec f = extract_features(train[0], v, nullptr, false);
  f.check();
  CHECK(f.dim == 5);
  for (auto [i, val] : f.entries) CHECK(val == 1.0);

  // Sentence order only changes bigrams that straddle the boundary.
  const auto swapped = testutil::make_comment("1", {"y z", "x y"}, true);
  const NgramVocab full = NgramVocab::build(train);
  auto uni = [&](const Comment& c) {
    std::vector<std::uint32_t> idx;
    for (auto [i, val] : extract_features(c, full, nullptr, false).entries) {
      (void)val;
      idx.push_back(i);
    }
    return idx;
  };
  std::vector<std::uint32_t> a = uni(train[0]), b = uni(swapped);
  auto unigram = [&](std::uint32_t i) {
    for (const char* u : {"x", "y", "z"})
      if (full.word_index(u) == static_cast<long>(i)) return true;
    return false;
  };
  std::erase_if(a, [&](auto i) { return !unigram(i); });
  std::erase_if(b, [&](auto i) { return !unigram(i); });
  CHECK(a == b);
}

TEST_CASE("lexicon file") {
  const auto path = std::filesystem::temp_directory_path() / "hetattn_lex.tsv";
  std::ofstream(path) << "good\t1\nbad\t-1\n";
  const auto lex = SentimentLexicon::load(path);
  CHECK(lex.size() == 2);
  CHECK(lex.polarity("bad") == -1);
  CHECK(lex.polarity("meh") == 0);
  std::ofstream(path) << "good\t2\n";
  CHECK_THROWS_AS(SentimentLexicon::load(path), InputError);
  CHECK_THROWS_AS(SentimentLexicon::load("/nonexistent/lex.tsv"), InputError);
}

TEST_CASE("svm separable toy") {
  const std::vector<SparseVec> x = {dense({1.0}), dense({-1.0})};
  const std::vector<bool> y = {true, false};
  SvmOptions o;
  o.lambda = 0.01;
  o.epochs = 50;
  const SvmModel m = train_svm(x, y, o);
  CHECK(accuracy(m, x, y) == 1.0);
  CHECK_THROWS(train_svm(x, {true, true}, o));
}

TEST_CASE("svm objective decreases and is reproducible") {
  Rng rng(3);
  std::vector<SparseVec> x;
  std::vector<bool> y;
  for (int i = 0; i < 400; ++i) {
    std::vector<double> v(20, 0.0);
    for (double& e : v) e = rng.bernoulli(0.3) ? 1.0 : 0.0;
    const double s = v[0] + v[1] - v[2] - v[3] + rng.uniform(-0.5, 0.5);
    x.push_back(dense(v));
    y.push_back(s > 0.0);
  }
  SvmOptions o;
  o.lambda = 1e-3;
  o.epochs = 10;
  SvmReport rep;
  const SvmModel m = train_svm(x, y, o, &rep);
  REQUIRE(rep.epoch_objectives.size() == 10);
  CHECK(rep.epoch_objectives[4] < rep.epoch_objectives[0]);
  CHECK(rep.epoch_objectives.back() == doctest::Approx(svm_objective(m, x, y, o.lambda)));
  const SvmModel again = train_svm(x, y, o);
  CHECK(again.weights == m.weights);
  CHECK(again.bias == m.bias);
  CHECK(accuracy(m, x, y) > 0.8);
}

TEST_CASE("svm with huge regularization collapses") {
  const std::vector<SparseVec> x = {dense({1.0, 0.5}), dense({-1.0, 0.2}), dense({0.8, -0.1})};
  SvmOptions o;
  o.lambda = 1e6;
  const SvmModel m = train_svm(x, {true, false, true}, o);
  double norm = 0.0;
  for (double w : m.weights) norm += w * w;
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("svm score") {
  SvmModel zero{{0.0, 0.0, 0.0}, 0.0};
  CHECK(svm_score(zero, dense({1, 2, 3})) == 0.0);
  SvmModel m{{1.0, 0.0, 0.0}, 0.25};
  SparseVec x;
  x.dim = 3;
  x.entries = {{0, 2.0}};
  CHECK(svm_score(m, x) == 2.25);
  CHECK_THROWS(svm_score(m, dense({1, 2})));
  // A zero-weight duplicate feature leaves scores untouched.
  SvmModel wide{{1.0, 0.0, 0.0, 0.0}, 0.25};
  SparseVec xd = x;
  xd.dim = 4;
  xd.entries.push_back({3, 2.0});
  CHECK(svm_score(wide, xd) == svm_score(m, x));
  SparseVec bad;
  bad.dim = 2;
  bad.entries = {{1, 1.0}, {0, 1.0}};
  CHECK_THROWS(bad.check());
}
