#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "doctest.h"

#include "hetattn/eval.hpp"
#include "hetattn/rng.hpp"

using namespace hetattn;

namespace {

std::vector<ScoredExample> make(std::vector<double> scores, std::vector<int> labels) {
  std::vector<ScoredExample> ex;
  for (std::size_t i = 0; i < scores.size(); ++i)
    ex.push_back({"e" + std::to_string(i), labels[i] != 0, scores[i]});
  return ex;
}

double brute_roc(const std::vector<ScoredExample>& ex) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : ex) {
    if (!p.label) continue;
    for (const auto& n : ex) {
      if (n.label) continue;
      pairs += 1.0;
      if (p.score > n.score) wins += 1.0;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Average precision with tied scores entering the ranking together: each
// distinct threshold is a cut point.
double brute_ap(const std::vector<ScoredExample>& ex) {
  std::vector<double> thresholds;
  for (const auto& e : ex) thresholds.push_back(e.score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0.0;
  for (const auto& e : ex) positives += e.label ? 1.0 : 0.0;
  double ap = 0.0, prev_recall = 0.0;
  for (double thr : thresholds) {
    double tp = 0.0, k = 0.0;
    for (const auto& e : ex) {
      if (e.score >= thr) {
        k += 1.0;
        tp += e.label ? 1.0 : 0.0;
      }
    }
    const double recall = tp / positives;
    ap += (tp / k) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

std::vector<ScoredExample> random_instance(Rng& rng, bool need_negative) {
  for (;;) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<ScoredExample> ex;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid so that ties are common.
      ex.push_back({"", rng.uniform() < 0.4, static_cast<double>(rng.below(6)) / 5.0});
    }
    const bool pos = std::any_of(ex.begin(), ex.end(), [](auto& e) { return e.label; });
    const bool neg = std::any_of(ex.begin(), ex.end(), [](auto& e) { return !e.label; });
    if (pos && (neg || !need_negative)) return ex;
  }
}

EncodedComment spans(std::vector<std::size_t> lengths, std::vector<bool> abusive) {
  EncodedComment c;
  std::size_t at = 0;
  for (std::size_t len : lengths) {
    c.sentence_spans.push_back({at, at + len});
    at += len;
  }
  c.words.assign(at, 2);
  c.tags.assign(at, 2);
  c.sentence_abusive = std::move(abusive);
  c.abusive = true;
  return c;
}

}  // namespace

TEST_CASE("roc auc examples") {
  CHECK(roc_auc(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
  CHECK(roc_auc(make({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0})) == 0.0);
  CHECK(roc_auc(make({0.9, 0.5, 0.5, 0.1}, {1, 1, 0, 0})) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK_THROWS_WITH(roc_auc(make({0.1, 0.2}, {1, 1})), doctest::Contains("undefined AUC"));
}

TEST_CASE("pr auc examples") {
  CHECK(pr_auc(make({0.9, 0.8, 0.2}, {1, 1, 0})) == 1.0);
  CHECK(pr_auc(make({0.9, 0.8}, {0, 1})) == doctest::Approx(0.5));
  for (int p = 1; p <= 5; ++p) {
    std::vector<int> labels(7, 0);
    for (int i = 0; i < p; ++i) labels[i] = 1;
    CHECK(pr_auc(make(std::vector<double>(7, 0.3), labels)) == doctest::Approx(p / 7.0).epsilon(1e-15));
  }
  CHECK_THROWS(pr_auc(make({0.1, 0.2}, {0, 0})));
}

TEST_CASE("metrics agree with brute force oracles") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ex = random_instance(rng, true);
    CHECK(std::abs(roc_auc(ex) - brute_roc(ex)) <= 1e-12);
    CHECK(std::abs(pr_auc(ex) - brute_ap(ex)) <= 1e-12);
  }
}

TEST_CASE("roc auc is invariant under increasing transforms") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto ex = random_instance(rng, true);
    const double base = roc_auc(ex);
    for (auto& e : ex) e.score = std::exp(3.0 * e.score) - 7.0;
    CHECK(roc_auc(ex) == base);
  }
}

TEST_CASE("f1") {
  CHECK(f1(make({0.9, 0.1}, {1, 0})) == 1.0);
  // TP=2, FP=1, FN=1.
  CHECK(f1(make({0.9, 0.8, 0.7, 0.2, 0.1}, {1, 1, 0, 1, 0})) == doctest::Approx(2.0 / 3.0));
  CHECK(f1(make({0.1, 0.2}, {1, 0})) == 0.0);
  CHECK(f1(make({0.5}, {1})) == 1.0);
  CHECK(f1(make({-1.0, 2.0}, {0, 1}), 0.0) == 1.0);
  const double thr = tune_threshold(make({0.3, 0.35, 0.2, 0.1}, {1, 1, 0, 0}));
  CHECK(f1(make({0.3, 0.35, 0.2, 0.1}, {1, 1, 0, 0}), thr) == 1.0);
}

TEST_CASE("sentence selection") {
  const EncodedComment two = spans({3, 3}, {false, true});
  const std::vector<double> uniform(6, 1.0 / 6.0);
  CHECK(select_sentence(uniform, two) == 0);
  const EncodedComment c = spans({2, 2}, {false, true});
  CHECK(select_sentence(std::vector<double>{0.1, 0.1, 0.4, 0.4}, c) == 1);
  // Means, not sums: a long sentence with more total mass can still lose.
  const EncodedComment d = spans({4, 1}, {false, true});
  CHECK(select_sentence(std::vector<double>{0.15, 0.15, 0.15, 0.15, 0.4}, d) == 1);

  CHECK(eligible_for_selection(c, AttentionEvalMode::mixed_only));
  const EncodedComment all_abusive = spans({2, 2}, {true, true});
  CHECK_FALSE(eligible_for_selection(all_abusive, AttentionEvalMode::mixed_only));
  CHECK(eligible_for_selection(all_abusive, AttentionEvalMode::all_multi_sentence));
  const EncodedComment single = spans({3}, {true});
  CHECK_FALSE(eligible_for_selection(single, AttentionEvalMode::all_multi_sentence));
  EncodedComment benign = spans({2, 2}, {false, false});
  benign.abusive = false;
  CHECK_FALSE(eligible_for_selection(benign, AttentionEvalMode::all_multi_sentence));
}

TEST_CASE("student t distribution") {
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK(incomplete_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
  // I_x(2,3) = 6x^2 - 8x^3 + 3x^4.
  const double x = 0.4;
  CHECK(incomplete_beta(2.0, 3.0, x) == doctest::Approx(6 * x * x - 8 * x * x * x + 3 * x * x * x * x).epsilon(1e-12));
  CHECK(student_t_two_sided(0.0, 4.0) == doctest::Approx(1.0));
  CHECK(student_t_two_sided(5.0, 4.0) == doctest::Approx(0.00749).epsilon(1e-3));
  // Tabulated two-sided 5% and 1% critical values.
  CHECK(student_t_two_sided(2.776, 4.0) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(student_t_two_sided(4.604, 4.0) == doctest::Approx(0.01).epsilon(2e-3));
  CHECK(student_t_two_sided(2.228, 10.0) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(student_t_two_sided(12.706, 1.0) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(student_t_two_sided(1.96, 1e6) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("paired t test") {
  const std::vector<double> a = {0.8, 0.7, 0.9}, zero = {0, 0, 0, 0, 0};
  CHECK(paired_t_test(a, a).p == 1.0);
  const std::vector<double> ones = {1, 1, 1, 1, 1};
  CHECK(paired_t_test(ones, zero).p < 1e-9);
  const std::vector<double> d = {0.5, 0.7, 0.3, 0.6, 0.4};
  const auto r = paired_t_test(d, zero);
  // mean 0.5, sd sqrt(0.025): t = 0.5 / (sqrt(0.025) / sqrt(5)) = sqrt(50).
  CHECK(r.t == doctest::Approx(std::sqrt(50.0)));
  CHECK(r.df == 4.0);
  CHECK(r.p == doctest::Approx(student_t_two_sided(std::sqrt(50.0), 4.0)));
  CHECK(paired_t_test(zero, d).t == doctest::Approx(-std::sqrt(50.0)));
  CHECK_THROWS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{0.0}));
}

TEST_CASE("attention rendering") {
  const std::vector<std::string> toks = {"a", "b<", "c"};
  const std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  for (double v : shade_levels(uniform)) CHECK(v == 0.5);
  const auto one_hot = shade_levels(std::vector<double>{0, 1, 0});
  CHECK(one_hot == std::vector<double>{0, 1, 0});

  const std::string svg = render_attention_svg(toks, std::vector<double>{0, 1, 0});
  std::size_t texts = 0;
  for (std::size_t pos = svg.find("<text"); pos != std::string::npos; pos = svg.find("<text", pos + 1)) ++texts;
  CHECK(texts == 3);
  CHECK(svg.find("b&lt;") != std::string::npos);
  CHECK(svg.find("rgb(255,255,255)") != std::string::npos);

  const std::string ansi = render_attention_ansi(toks, uniform);
  std::size_t spans_found = 0;
  for (std::size_t pos = ansi.find("\x1b[48;5;"); pos != std::string::npos; pos = ansi.find("\x1b[48;5;", pos + 1))
    ++spans_found;
  CHECK(spans_found == 3);
}

TEST_CASE("report bookkeeping") {
  EvalReport r;
  r.seeds = {1, 2, 3};
  r.systems.push_back({"a", {{"roc_auc", {0.7, 0.8, 0.9}}}});
  r.systems.push_back({"b", {{"roc_auc", {0.6, 0.7, 0.75}}}});
  CHECK(r.system("a").mean("roc_auc") == doctest::Approx(0.8).epsilon(1e-12));
  const auto& cmp = r.compare("a", "b", "roc_auc");
  CHECK(cmp.test.p < 1.0);
  CHECK_THROWS(r.system("zzz"));
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["systems"].size() == 2);
  CHECK(format_table(r).find("0.8000") != std::string::npos);

  EvalReport shuffled = r;
  std::swap(shuffled.systems[0].metrics["roc_auc"][0], shuffled.systems[0].metrics["roc_auc"][2]);
  CHECK(shuffled.system("a").mean("roc_auc") == doctest::Approx(r.system("a").mean("roc_auc")).epsilon(1e-15));
}
