#include "hetattn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "hetattn/rng.hpp"
#include "hetattn/textprep.hpp"

namespace hetattn {

using nlohmann::json;

std::size_t category_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (kCategoryNames[i] == name) return i;
  }
  throw std::invalid_argument("unknown category: " + std::string(name));
}

std::size_t Comment::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

std::vector<std::string> Comment::surfaces() const {
  std::vector<std::string> out;
  out.reserve(token_count());
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) out.push_back(t.surface);
  return out;
}

std::vector<std::string> Comment::tags() const {
  std::vector<std::string> out;
  out.reserve(token_count());
  for (const auto& s : sentences)
    for (const auto& t : s.tokens) out.push_back(t.pos);
  return out;
}

bool Comment::any_category() const {
  return std::any_of(categories.begin(), categories.end(), [](bool b) { return b; });
}

bool Comment::mixed() const {
  bool has_abusive = false, has_benign = false;
  for (const auto& s : sentences) (s.abusive ? has_abusive : has_benign) = true;
  return abusive && has_abusive && has_benign;
}

bool truncate_comment(Comment& comment, std::size_t max_tokens) {
  std::size_t kept = 0;
  bool dropped = false;
  std::vector<Sentence> out;
  for (auto& s : comment.sentences) {
    if (kept >= max_tokens) {
      dropped = true;
      break;
    }
    const std::size_t room = max_tokens - kept;
    if (s.tokens.size() > room) {
      s.tokens.resize(room);
      dropped = true;
    }
    kept += s.tokens.size();
    out.push_back(std::move(s));
  }
  comment.sentences = std::move(out);
  return dropped;
}

namespace {

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw InputError(std::string("missing field \"") + key + "\"");
  return *it;
}

bool require_bool(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_boolean()) throw InputError(std::string("field \"") + key + "\" must be a boolean");
  return v.get<bool>();
}

}  // namespace

Comment parse_comment(std::string_view json_line, const LoadOptions& options, LoadStats* stats) {
  json obj;
  try {
    obj = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw InputError("record must be a JSON object");

  Comment c;
  const json& id = require(obj, "id");
  if (!id.is_string()) throw InputError("field \"id\" must be a string");
  c.id = id.get<std::string>();
  if (c.id.empty()) throw InputError("field \"id\" must be non-empty");
  c.abusive = require_bool(obj, "abusive");

  if (auto it = obj.find("categories"); it != obj.end()) {
    if (!it->is_object()) throw InputError("field \"categories\" must be an object");
    for (const auto& [key, value] : it->items()) {
      std::size_t idx = 0;
      try {
        idx = category_index(key);
      } catch (const std::invalid_argument&) {
        throw InputError("unknown category \"" + key + "\"");
      }
      if (!value.is_boolean()) throw InputError("category \"" + key + "\" must be a boolean");
      c.categories[idx] = value.get<bool>();
    }
  }
  if (c.any_category() && !c.abusive) {
    throw InputError("category flag set on non-abusive comment \"" + c.id + "\"");
  }

  const json& sentences = require(obj, "sentences");
  if (!sentences.is_array() || sentences.empty()) {
    throw InputError("field \"sentences\" must be a non-empty array");
  }
  for (const json& sj : sentences) {
    if (!sj.is_object()) throw InputError("sentence must be an object");
    Sentence s;
    s.abusive = require_bool(sj, "abusive");
    const json& tokens = require(sj, "tokens");
    if (!tokens.is_array() || tokens.empty()) {
      throw InputError("sentence \"tokens\" must be a non-empty array");
    }
    std::vector<std::string> surfaces;
    for (const json& t : tokens) {
      if (!t.is_string() || t.get_ref<const std::string&>().empty()) {
        throw InputError("tokens must be non-empty strings");
      }
      surfaces.push_back(t.get<std::string>());
    }
    std::vector<std::string> tags;
    if (auto it = sj.find("pos"); it != sj.end()) {
      if (!it->is_array() || it->size() != surfaces.size()) {
        throw InputError("sentence \"pos\" must be an array of the same length as \"tokens\"");
      }
      for (const json& t : *it) {
        if (!t.is_string()) throw InputError("pos tags must be strings");
        const auto& tag = t.get_ref<const std::string&>();
        tags.push_back(is_known_tag(tag) ? tag : "X");
      }
    } else {
      tags = pos_tag(surfaces);
      if (stats) ++stats->tagged_by_fallback;
    }
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      s.tokens.push_back(Token{std::move(surfaces[i]), std::move(tags[i])});
    }
    c.sentences.push_back(std::move(s));
  }

  if (truncate_comment(c, options.max_tokens) && stats) ++stats->truncated;
  if (c.sentences.empty()) throw InputError("comment has no tokens after truncation");
  return c;
}

std::vector<Comment> load_dataset(const std::filesystem::path& path, const LoadOptions& options,
                                  LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::vector<Comment> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Comment c;
    try {
      c = parse_comment(line, options, stats);
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(c.id).second) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": duplicate id \"" +
                       c.id + "\"");
    }
    if (stats) ++stats->records;
    out.push_back(std::move(c));
  }
  return out;
}

std::string to_json_line(const Comment& comment) {
  nlohmann::ordered_json obj;
  obj["id"] = comment.id;
  obj["abusive"] = comment.abusive;
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    cats[std::string(kCategoryNames[i])] = comment.categories[i];
  }
  obj["categories"] = std::move(cats);
  nlohmann::ordered_json sentences = nlohmann::ordered_json::array();
  for (const auto& s : comment.sentences) {
    nlohmann::ordered_json sj;
    sj["abusive"] = s.abusive;
    std::vector<std::string> tokens, tags;
    for (const auto& t : s.tokens) {
      tokens.push_back(t.surface);
      tags.push_back(t.pos);
    }
    sj["tokens"] = tokens;
    sj["pos"] = tags;
    sentences.push_back(std::move(sj));
  }
  obj["sentences"] = std::move(sentences);
  return obj.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<Comment>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write dataset " + path.string());
  for (const auto& c : comments) out << to_json_line(c) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GroundAttention derive_ground_attention(const Comment& comment, std::size_t max_len) {
  GroundAttention g;
  g.weights.assign(max_len, 0.0);
  std::size_t pos = 0;
  std::vector<std::size_t> marked;
  for (const auto& s : comment.sentences) {
    for (std::size_t k = 0; k < s.tokens.size(); ++k, ++pos) {
      if (s.abusive && pos < max_len) marked.push_back(pos);
    }
  }
  g.support = marked.size();
  if (g.support > 0) {
    const double w = 1.0 / static_cast<double>(g.support);
    for (std::size_t p : marked) g.weights[p] = w;
  }
  return g;
}

SplitSpec split_dataset(const std::vector<Comment>& comments, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(comments.size());
  for (const auto& c : comments) ids.push_back(c.id);
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));

  const std::size_t n = ids.size();
  const auto fifth = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 0.2));
  SplitSpec split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n - 2 * fifth));
  split.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n - 2 * fifth),
                   ids.begin() + static_cast<std::ptrdiff_t>(n - fifth));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n - fifth), ids.end());
  return split;
}

std::vector<Comment> select(const std::vector<Comment>& comments,
                            const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const Comment*> by_id;
  for (const auto& c : comments) by_id.emplace(c.id, &c);
  std::vector<Comment> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::out_of_range("select: unknown comment id " + id);
    out.push_back(*it->second);
  }
  return out;
}

std::vector<Comment> explode_sentences(const std::vector<Comment>& comments) {
  std::vector<Comment> out;
  for (const auto& c : comments) {
    out.push_back(c);
    for (std::size_t k = 0; k < c.sentences.size(); ++k) {
      Comment inst;
      inst.id = c.id + "#s" + std::to_string(k);
      inst.sentences.push_back(c.sentences[k]);
      inst.abusive = c.sentences[k].abusive;
      if (inst.abusive) inst.categories = c.categories;
      inst.sentence_instance = true;
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace hetattn
