#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hetattn/model.hpp"

namespace hetattn {

struct ScoredExample {
  std::string id;
  bool label = false;
  /// Positive-class probability, or a raw margin for the SVM.
  double score = 0.0;
};

/// Mann-Whitney statistic from tie-averaged ranks. Throws
/// std::invalid_argument("undefined AUC") unless both classes are present.
double roc_auc(std::span<const ScoredExample> examples);
/// Average precision in descending score order; tied scores enter the ranking
/// together. Throws std::invalid_argument when there are no positives.
double pr_auc(std::span<const ScoredExample> examples);
/// Predicted positive iff score >= threshold. 0 when precision + recall = 0.
double f1(std::span<const ScoredExample> examples, double threshold = 0.5);
/// Threshold among the observed scores that maximizes F1 (lowest on ties).
double tune_threshold(std::span<const ScoredExample> examples);

enum class AttentionEvalMode {
  /// Abusive comments with both abusive and non-abusive sentences.
  mixed_only,
  /// Every abusive comment with at least two sentences.
  all_multi_sentence,
};

bool eligible_for_selection(const EncodedComment& comment, AttentionEvalMode mode);
/// Sentence with the highest mean token attention; ties go to the lower index.
std::size_t select_sentence(std::span<const double> attention, const EncodedComment& comment);
/// Fraction of eligible comments whose selected sentence is abusive. Throws
/// std::invalid_argument when no comment is eligible.
double attention_selection_accuracy(const Model& model,
                                    const std::vector<EncodedComment>& comments,
                                    AttentionEvalMode mode = AttentionEvalMode::mixed_only);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// Two-sided tail probability of Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Two-sided paired t-test on a - b. All-zero differences give p = 1; zero
/// variance with a nonzero mean gives an infinite t and p = 0.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Min-max normalized shade per token in [0, 1]; 1 is the lightest. Constant
/// weights map to 0.5.
std::vector<double> shade_levels(std::span<const double> weights);
/// Grey-scale SVG: one box and one <text> element per token.
std::string render_attention_svg(const std::vector<std::string>& tokens,
                                 std::span<const double> weights);
/// 256-colour ANSI rendering, one shaded span per token.
std::string render_attention_ansi(const std::vector<std::string>& tokens,
                                  std::span<const double> weights);

struct SystemResult {
  std::string name;
  /// metric -> one value per split, in split order.
  std::map<std::string, std::vector<double>> metrics;

  double mean(const std::string& metric) const;
};

struct Comparison {
  std::string system_a;
  std::string system_b;
  std::string metric;
  TTestResult test;
};

struct EvalReport {
  std::string title;
  std::vector<std::uint64_t> seeds;
  std::vector<SystemResult> systems;
  std::vector<Comparison> comparisons;

  const SystemResult& system(const std::string& name) const;
  /// Runs a paired t-test on the two systems' per-split values and records it.
  const Comparison& compare(const std::string& a, const std::string& b,
                            const std::string& metric);
};

/// Systems as rows, metric means as columns, then per-split rows and the
/// recorded comparisons.
std::string format_table(const EvalReport& report);
std::string to_json(const EvalReport& report);

}  // namespace hetattn
