#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hetattn/error.hpp"

namespace hetattn {

inline constexpr std::size_t kNumCategories = 4;
inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "gender", "race", "appearance", "ideology"};

/// Index into kCategoryNames; throws std::invalid_argument for unknown names.
std::size_t category_index(std::string_view name);

inline constexpr std::size_t kDefaultMaxTokens = 256;

struct Token {
  std::string surface;
  std::string pos;
};

struct Sentence {
  std::vector<Token> tokens;
  bool abusive = false;
};

struct Comment {
  std::string id;
  std::vector<Sentence> sentences;
  bool abusive = false;
  std::array<bool, kNumCategories> categories{};
  /// Set on instances produced by explode_sentences.
  bool sentence_instance = false;

  std::size_t token_count() const;
  std::vector<std::string> surfaces() const;
  std::vector<std::string> tags() const;
  bool any_category() const;
  /// Abusive comment with at least one abusive and one non-abusive sentence.
  bool mixed() const;
};

/// Normalized rationale over a comment's tokens, padded to the max length.
struct GroundAttention {
  std::vector<double> weights;
  std::size_t support = 0;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct LoadOptions {
  std::size_t max_tokens = kDefaultMaxTokens;
};

struct LoadStats {
  std::size_t records = 0;
  std::size_t truncated = 0;
  std::size_t tagged_by_fallback = 0;
};

/// Parses one interchange record. Throws InputError (without line context).
Comment parse_comment(std::string_view json_line, const LoadOptions& options = {},
                      LoadStats* stats = nullptr);
/// One JSON object per line; blank lines are skipped. Errors carry the line
/// number. Duplicate ids and category flags on non-abusive comments are errors.
std::vector<Comment> load_dataset(const std::filesystem::path& path,
                                  const LoadOptions& options = {}, LoadStats* stats = nullptr);

/// Serializes with keys in interchange order (id, abusive, categories,
/// sentences). Byte-stable for identical input.
std::string to_json_line(const Comment& comment);
void save_dataset(const std::filesystem::path& path, const std::vector<Comment>& comments);

/// Keeps the first max_tokens tokens; returns true if anything was dropped.
bool truncate_comment(Comment& comment, std::size_t max_tokens);

/// Tokens of abusive sentences get 1/support, everything else (including
/// padding up to max_len) 0. No abusive sentence -> all zeros, support 0.
GroundAttention derive_ground_attention(const Comment& comment, std::size_t max_len);

/// Seeded shuffle then a 60/20/20 partition of comment ids.
SplitSpec split_dataset(const std::vector<Comment>& comments, std::uint64_t seed);

/// Selects comments by id in the order the ids are listed.
std::vector<Comment> select(const std::vector<Comment>& comments,
                            const std::vector<std::string>& ids);

/// Original comments plus one single-sentence instance per sentence
/// (id "<comment id>#s<k>"), each placed right after its parent. A sentence
/// instance carries the sentence label; category flags are inherited from the
/// parent only when the sentence is abusive.
std::vector<Comment> explode_sentences(const std::vector<Comment>& comments);

struct SynthConfig {
  std::size_t n_comments = 1000;
  double abusive_fraction = 0.275;
  /// Probability that an abusive comment also contains benign sentences.
  double mix_fraction = 0.434;
  std::size_t min_sentences = 1;
  std::size_t max_sentences = 5;
  std::size_t min_length = 4;
  std::size_t max_length = 12;
  std::size_t benign_vocab = 1500;
  std::size_t insult_vocab = 60;
  std::size_t marker_vocab = 12;
  /// Probability that a benign sentence carries a decoy: an insult word or a
  /// category marker, but never both.
  double overlap = 0.3;
  /// Fraction of abusive sentences that carry only a weak cue: a marker or an
  /// insult word alone, indistinguishable from a decoy in isolation.
  double subtle_fraction = 0.25;
  /// Probability that a comment's label is flipped after generation; the
  /// sentence labels are left untouched.
  double label_noise = 0.0;
  std::array<double, kNumCategories> category_priors = {0.45, 0.05, 0.25, 0.25};
  std::uint64_t seed = 7;
};

/// Validates ranges and feasibility; throws InputError.
void validate(const SynthConfig& config);

/// Applies "key = value" entries (keys as in SynthConfig, plus
/// "category_priors = g,r,a,i"). Unknown keys are an InputError.
SynthConfig synth_config_from_pairs(const std::vector<std::pair<std::string, std::string>>& kv);

std::vector<Comment> synth_corpus(const SynthConfig& config);

}  // namespace hetattn
