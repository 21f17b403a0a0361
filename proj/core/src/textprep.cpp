#include "hetattn/textprep.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <unordered_set>

#include "hetattn/corpus.hpp"

namespace hetattn {

namespace {

constexpr std::array<std::string_view, 29> kEmoticons = {
    ":)", ":-)", ":(", ":-(", ":d", ":-d", ";)", ";-)", ":p",  ":-p",
    ":/", ":-/", ":'(", "<3", "xd", ":o",  ":|", "^^", "^_^", "-_-",
    "t_t", ":*", "=)", "=(", ":]", ":[",  "d:", ";d", ":3"};

constexpr std::string_view kLeadingPunct = "([\"'";
constexpr std::string_view kTrailingPunct = ".,!?;:)]\"'";

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  return ascii_lower(s.substr(0, prefix.size())) == prefix;
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_url(std::string_view chunk) {
  return starts_with_ci(chunk, "http://") || starts_with_ci(chunk, "https://") ||
         starts_with_ci(chunk, "www.");
}

// [@+][A-Za-z_][A-Za-z0-9_]* followed only by trailing punctuation.
// Returns the length of the mention part, or 0.
std::size_t mention_length(std::string_view chunk) {
  if (chunk.size() < 2 || (chunk[0] != '@' && chunk[0] != '+')) return 0;
  const auto c1 = static_cast<unsigned char>(chunk[1]);
  if (!std::isalpha(c1) && c1 != '_') return 0;
  std::size_t i = 2;
  while (i < chunk.size()) {
    const auto c = static_cast<unsigned char>(chunk[i]);
    if (!std::isalnum(c) && c != '_') break;
    ++i;
  }
  for (std::size_t j = i; j < chunk.size(); ++j) {
    if (kTrailingPunct.find(chunk[j]) == std::string_view::npos) return 0;
  }
  return i;
}

bool is_emoticon(std::string_view chunk) {
  const std::string lower = ascii_lower(chunk);
  return std::find(kEmoticons.begin(), kEmoticons.end(), lower) != kEmoticons.end();
}

// Decodes one UTF-8 code point at s[i]; returns its byte length (1 for
// malformed input, which is passed through untouched).
std::size_t utf8_decode(std::string_view s, std::size_t i, std::uint32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) { return static_cast<std::uint32_t>(s[i + k]) & 0x3F; };
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    cp = ((b0 & 0x1Fu) << 6) | byte(1);
    return 2;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    cp = ((b0 & 0x0Fu) << 12) | (byte(1) << 6) | byte(2);
    return 3;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    cp = ((b0 & 0x07u) << 18) | (byte(1) << 12) | (byte(2) << 6) | byte(3);
    return 4;
  }
  cp = b0;
  return 1;
}

bool is_emoji(std::uint32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         cp == 0xFE0F || cp == 0x200D;
}

std::string replace_emoji_runs(std::string_view chunk) {
  std::string out;
  bool in_run = false;
  std::size_t i = 0;
  while (i < chunk.size()) {
    std::uint32_t cp = 0;
    const std::size_t len = utf8_decode(chunk, i, cp);
    if (is_emoji(cp)) {
      if (!in_run) out += " <emo> ";
      in_run = true;
    } else {
      out.append(chunk.substr(i, len));
      in_run = false;
    }
    i += len;
  }
  return out;
}

bool is_special(std::string_view tok) {
  return tok == kUrlSymbol || tok == kEmoSymbol || tok == kUserSymbol;
}

const std::map<std::string_view, std::string_view>& closed_class() {
  static const std::map<std::string_view, std::string_view> table = [] {
    std::map<std::string_view, std::string_view> t;
    auto put = [&t](std::initializer_list<std::string_view> words, std::string_view tag) {
      for (auto w : words) t.emplace(w, tag);
    };
    put({"the", "a", "an", "this", "that", "these", "those", "my", "your", "his", "her", "its",
         "our", "their", "some", "any", "every", "no", "each", "all", "both"},
        "D");
    put({"i", "you", "he", "she", "it", "we", "they", "me", "him", "us", "them", "myself",
         "yourself", "himself", "herself", "itself", "ourselves", "themselves", "mine", "yours",
         "hers", "ours", "theirs", "who", "whom", "what", "u", "ya"},
        "O");
    put({"in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
         "during", "before", "after", "above", "below", "to", "from", "of", "off", "over",
         "under", "than", "like"},
        "P");
    put({"and", "or", "but", "nor", "yet", "plus", "&"}, "&");
    put({"up", "down", "out"}, "T");
    put({"there"}, "X");
    put({"lol", "haha", "hahaha", "lmao", "omg", "oh", "wow", "yes", "yeah", "ok", "okay", "hey",
         "ugh", "hmm", "please"},
        "!");
    put({"rt", "..."}, "~");
    put({"is", "am", "are", "was", "were", "be", "been", "being", "do", "does", "did", "have",
         "has", "had", "will", "would", "can", "could", "should", "shall", "may", "might", "must",
         "don't", "doesn't", "didn't", "isn't", "aren't", "wasn't", "weren't", "can't", "won't",
         "wouldn't", "shouldn't", "couldn't", "get", "got", "know", "think", "make", "go", "say"},
        "V");
    put({"very", "really", "too", "also", "just", "not", "never", "always", "so", "still",
         "even", "only", "here", "now", "then"},
        "R");
    put({"i'm", "you're", "he's", "she's", "it's", "we're", "they're", "that's", "there's",
         "i've", "you've", "we've", "they've", "i'll", "you'll", "he'll", "she'll", "we'll",
         "they'll", "i'd", "you'd", "he'd", "she'd", "we'd", "they'd"},
        "L");
    return t;
  }();
  return table;
}

bool all_punct(std::string_view tok) {
  return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

bool is_numeral(std::string_view tok) {
  bool digit = false;
  for (char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',') {
      return false;
    }
  }
  return digit;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string tag_one(const std::string& token) {
  if (token == kUrlSymbol) return "U";
  if (token == kEmoSymbol) return "E";
  if (token == kUserSymbol) return "@";
  if (token.size() > 1 && token[0] == '#') return "#";
  if (is_numeral(token)) return "$";
  const std::string lower = ascii_lower(token);
  const auto& table = closed_class();
  if (auto it = table.find(lower); it != table.end()) return std::string(it->second);
  if (all_punct(token)) return ",";
  if (lower.size() > 4) {
    if (ends_with(lower, "ing") || ends_with(lower, "ed")) return "V";
    if (ends_with(lower, "ly")) return "R";
    for (std::string_view s : {"ous", "ful", "ive", "able", "ible", "less", "ish"}) {
      if (ends_with(lower, s)) return "A";
    }
  }
  return "N";
}

}  // namespace

std::string normalize(std::string_view text) {
  std::vector<std::string> pieces;
  for (std::string_view chunk : split_ws(text)) {
    const std::string expanded = replace_emoji_runs(chunk);
    for (std::string_view part : split_ws(expanded)) {
      if (is_url(part)) {
        pieces.emplace_back(kUrlSymbol);
      } else if (const std::size_t m = mention_length(part); m > 0) {
        pieces.emplace_back(std::string(kUserSymbol) + std::string(part.substr(m)));
      } else if (is_emoticon(part)) {
        pieces.emplace_back(kEmoSymbol);
      } else {
        pieces.push_back(ascii_lower(part));
      }
    }
  }
  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (std::string_view chunk : split_ws(text)) {
    if (is_special(chunk)) {
      out.emplace_back(chunk);
      continue;
    }
    std::size_t begin = 0, end = chunk.size();
    std::vector<std::string> lead, trail;
    while (begin < end && kLeadingPunct.find(chunk[begin]) != std::string_view::npos) {
      lead.emplace_back(1, chunk[begin]);
      ++begin;
    }
    while (end > begin && kTrailingPunct.find(chunk[end - 1]) != std::string_view::npos) {
      trail.emplace_back(1, chunk[end - 1]);
      --end;
    }
    for (auto& l : lead) out.push_back(std::move(l));
    if (end > begin) out.emplace_back(chunk.substr(begin, end - begin));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(std::move(*it));
  }
  return out;
}

std::vector<std::string> pos_tag(const std::vector<std::string>& tokens) {
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) tags.push_back(tag_one(t));
  return tags;
}

bool is_known_tag(std::string_view tag) {
  static const std::unordered_set<std::string_view> tags = {
      "N", "O", "^", "S", "Z", "L", "M", "V", "A", "R", "!", "D", "P",
      "&", "T", "X", "Y", "#", "@", "~", "U", "E", "$", ",", "G"};
  return tags.count(tag) != 0;
}

Vocab::Vocab() {
  for (const char* s : {"<pad>", "<unk>", "<url>", "<emo>", "<user>"}) insert(s);
}

Vocab::Vocab(const std::vector<std::string>& tokens) : Vocab() {
  for (const auto& t : tokens) {
    if (!token_to_index_.count(t)) insert(t);
  }
}

void Vocab::insert(const std::string& token) {
  token_to_index_.emplace(token, index_to_token_.size());
  index_to_token_.push_back(token);
}

std::size_t Vocab::lookup(std::string_view token) const {
  auto it = token_to_index_.find(std::string(token));
  return it == token_to_index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_index_.count(std::string(token)) != 0;
}

std::vector<std::string> Vocab::regular_tokens() const {
  return {index_to_token_.begin() + kNumSpecial, index_to_token_.end()};
}

std::vector<std::size_t> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lookup(t));
  return out;
}

namespace {

std::vector<std::string> ranked(const std::map<std::string, std::size_t>& counts,
                                std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> items;
  const Vocab specials;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count && !specials.contains(tok)) items.emplace_back(tok, n);
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  out.reserve(items.size());
  for (auto& [tok, n] : items) out.push_back(tok);
  return out;
}

}  // namespace

VocabPair build_vocab(const std::vector<Comment>& train, std::size_t min_count) {
  std::map<std::string, std::size_t> word_counts, tag_counts;
  for (const auto& c : train) {
    for (const auto& s : c.sentences) {
      for (const auto& t : s.tokens) {
        ++word_counts[t.surface];
        ++tag_counts[t.pos];
      }
    }
  }
  return VocabPair{Vocab(ranked(word_counts, min_count)), Vocab(ranked(tag_counts, 1))};
}

}  // namespace hetattn
