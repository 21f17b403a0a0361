#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hetattn {

struct Comment;

inline constexpr std::string_view kUrlSymbol = "<url>";
inline constexpr std::string_view kEmoSymbol = "<emo>";
inline constexpr std::string_view kUserSymbol = "<user>";

/// Normalization rules. Each whitespace-delimited chunk first has every run of
/// emoji code points (U+1F000-1FAFF, U+2600-27BF, U+FE0F, U+200D) replaced by
/// " <emo> "; each resulting part then gets the first matching rule:
///   1. starts with "http://", "https://" or "www." (any case)    -> <url>
///   2. [@+][A-Za-z_][A-Za-z0-9_]* plus optional trailing punctuation
///                                   -> <user> followed by that punctuation
///   3. a listed ASCII emoticon (case-insensitive, e.g. :) :( :D ;) <3 xD) -> <emo>
///   4. otherwise                                                  -> ASCII lowercase
/// Whitespace is collapsed to single spaces and trimmed. Idempotent.
std::string normalize(std::string_view text);

/// Splits on whitespace, then peels leading ( [ " ' and trailing
/// . , ! ? ; : ) ] " ' characters into their own tokens (each punctuation
/// character is one token). Special symbols are kept whole.
std::vector<std::string> tokenize(std::string_view text);

/// Fallback tagger using the coarse single-letter social-media tagset:
/// N O ^ S Z L M V A R ! D P & T X Y # @ ~ U E $ , G.
std::vector<std::string> pos_tag(const std::vector<std::string>& tokens);

/// True for tags of the tagset above.
bool is_known_tag(std::string_view tag);

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kUrl = 2;
  static constexpr std::size_t kEmoji = 3;
  static constexpr std::size_t kUser = 4;
  static constexpr std::size_t kNumSpecial = 5;

  /// Specials only.
  Vocab();
  /// Specials first, followed by `tokens` in the given order.
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const { return index_to_token_.size(); }
  /// Index of a token, or kUnk if absent.
  std::size_t lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return index_to_token_.at(index); }
  /// Non-special tokens in index order.
  std::vector<std::string> regular_tokens() const;

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const;

 private:
  void insert(const std::string& token);

  std::vector<std::string> index_to_token_;
  std::unordered_map<std::string, std::size_t> token_to_index_;
};

struct VocabPair {
  Vocab words;
  Vocab tags;
};

/// Word vocabulary keeps tokens with frequency >= min_count; the tag vocabulary
/// keeps every observed tag. Tokens are ordered by descending frequency, then
/// lexicographically.
VocabPair build_vocab(const std::vector<Comment>& train, std::size_t min_count = 2);

}  // namespace hetattn
