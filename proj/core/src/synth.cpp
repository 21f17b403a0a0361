#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hetattn/corpus.hpp"
#include "hetattn/kv_config.hpp"
#include "hetattn/rng.hpp"

namespace hetattn {

namespace {

struct Lexicon {
  std::vector<std::string> benign;
  std::vector<std::string> benign_tags;
  std::vector<double> benign_cdf;
  std::vector<std::string> insults;
  std::vector<std::string> insult_tags;
  std::array<std::vector<std::string>, kNumCategories> markers;
};

constexpr std::array<char, kNumCategories> kMarkerPrefix = {'g', 'r', 'a', 'i'};

std::string numbered(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, i);
  return buf;
}

std::size_t draw_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

std::size_t draw_between(std::size_t lo, std::size_t hi, Rng& rng) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

Lexicon make_lexicon(const SynthConfig& cfg, Rng& rng) {
  Lexicon lex;
  // Benign tag mix roughly follows the open/closed class balance of social text.
  const std::array<std::pair<const char*, double>, 7> tag_mix = {
      {{"N", 0.35}, {"V", 0.2}, {"A", 0.1}, {"R", 0.08}, {"D", 0.1}, {"P", 0.1}, {"O", 0.07}}};
  double acc = 0.0;
  for (std::size_t i = 0; i < cfg.benign_vocab; ++i) {
    lex.benign.push_back(numbered('b', i, 4));
    double u = rng.uniform();
    const char* tag = "N";
    for (const auto& [t, p] : tag_mix) {
      if (u < p) {
        tag = t;
        break;
      }
      u -= p;
    }
    lex.benign_tags.emplace_back(tag);
    // Zipfian unigram frequencies.
    acc += 1.0 / (static_cast<double>(i) + 2.0);
    lex.benign_cdf.push_back(acc);
  }
  for (std::size_t i = 0; i < cfg.insult_vocab; ++i) {
    lex.insults.push_back(numbered('x', i, 3));
    lex.insult_tags.emplace_back(rng.bernoulli(0.7) ? "N" : "A");
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    for (std::size_t i = 0; i < cfg.marker_vocab; ++i) {
      lex.markers[c].push_back(numbered(kMarkerPrefix[c], i, 2));
    }
  }
  return lex;
}

enum class SentenceKind { benign, strong, subtle };

std::size_t draw_category(const std::vector<double>& prior_cdf, Rng& rng) {
  return draw_cdf(prior_cdf, rng);
}

Token marker_token(const Lexicon& lex, std::size_t category, Rng& rng) {
  const auto& pool = lex.markers[category];
  return Token{pool[rng.below(pool.size())], "^"};
}

Token insult_token(const Lexicon& lex, Rng& rng) {
  const std::size_t k = rng.below(lex.insults.size());
  return Token{lex.insults[k], lex.insult_tags[k]};
}

Sentence make_sentence(const SynthConfig& cfg, const Lexicon& lex,
                       const std::vector<double>& prior_cdf, SentenceKind kind,
                       std::size_t category, Rng& rng) {
  Sentence s;
  s.abusive = kind != SentenceKind::benign;
  const std::size_t len = draw_between(cfg.min_length, cfg.max_length, rng);
  for (std::size_t i = 0; i < len; ++i) {
    const std::size_t w = draw_cdf(lex.benign_cdf, rng);
    s.tokens.push_back(Token{lex.benign[w], lex.benign_tags[w]});
  }
  const std::size_t first = rng.below(len);
  std::size_t second = rng.below(len - 1);
  if (second >= first) ++second;

  switch (kind) {
    case SentenceKind::strong:
      s.tokens[first] = marker_token(lex, category, rng);
      s.tokens[second] = insult_token(lex, rng);
      break;
    case SentenceKind::subtle:
      s.tokens[first] = rng.bernoulli(0.5) ? marker_token(lex, category, rng) : insult_token(lex, rng);
      break;
    case SentenceKind::benign:
      if (rng.bernoulli(cfg.overlap)) {
        s.tokens[first] = rng.bernoulli(0.5) ? marker_token(lex, draw_category(prior_cdf, rng), rng)
                                             : insult_token(lex, rng);
      }
      break;
  }
  const double u = rng.uniform();
  s.tokens.push_back(Token{u < 0.75 ? "." : (u < 0.9 ? "!" : "?"), ","});
  return s;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  auto fraction = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InputError(std::string("synth: ") + name + " must be in [0, 1], got " +
                       std::to_string(v));
    }
  };
  fraction("abusive_fraction", cfg.abusive_fraction);
  fraction("mix_fraction", cfg.mix_fraction);
  fraction("overlap", cfg.overlap);
  fraction("subtle_fraction", cfg.subtle_fraction);
  fraction("label_noise", cfg.label_noise);
  if (cfg.min_sentences < 1 || cfg.min_sentences > cfg.max_sentences) {
    throw InputError("synth: sentence range must satisfy 1 <= min_sentences <= max_sentences");
  }
  if (cfg.min_length < 2 || cfg.min_length > cfg.max_length) {
    throw InputError("synth: length range must satisfy 2 <= min_length <= max_length");
  }
  if (cfg.mix_fraction > 0.0 && cfg.max_sentences < 2) {
    throw InputError("synth: mix_fraction > 0 requires max_sentences >= 2");
  }
  if (cfg.benign_vocab == 0 || cfg.insult_vocab == 0 || cfg.marker_vocab == 0) {
    throw InputError("synth: lexicon sizes must be positive");
  }
  double total = 0.0;
  for (double p : cfg.category_priors) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("synth: category priors must be >= 0");
    total += p;
  }
  if (total <= 0.0) throw InputError("synth: category priors must not all be zero");
}

SynthConfig synth_config_from_pairs(const KeyValues& kv) {
  SynthConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "n_comments") cfg.n_comments = parse_count(key, value);
    else if (key == "abusive_fraction") cfg.abusive_fraction = parse_real(key, value);
    else if (key == "mix_fraction") cfg.mix_fraction = parse_real(key, value);
    else if (key == "min_sentences") cfg.min_sentences = parse_count(key, value);
    else if (key == "max_sentences") cfg.max_sentences = parse_count(key, value);
    else if (key == "min_length") cfg.min_length = parse_count(key, value);
    else if (key == "max_length") cfg.max_length = parse_count(key, value);
    else if (key == "benign_vocab") cfg.benign_vocab = parse_count(key, value);
    else if (key == "insult_vocab") cfg.insult_vocab = parse_count(key, value);
    else if (key == "marker_vocab") cfg.marker_vocab = parse_count(key, value);
    else if (key == "overlap") cfg.overlap = parse_real(key, value);
    else if (key == "subtle_fraction") cfg.subtle_fraction = parse_real(key, value);
    else if (key == "label_noise") cfg.label_noise = parse_real(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "category_priors") {
      const auto v = parse_reals(key, value);
      if (v.size() != kNumCategories) {
        throw InputError("config key 'category_priors': expected 4 comma-separated values");
      }
      std::copy(v.begin(), v.end(), cfg.category_priors.begin());
    } else {
      throw InputError("unknown synth config key '" + key + "'");
    }
  }
  return cfg;
}

std::vector<Comment> synth_corpus(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  Rng lex_rng = rng.fork(1);
  const Lexicon lex = make_lexicon(cfg, lex_rng);

  std::vector<double> prior_cdf;
  double acc = 0.0;
  for (double p : cfg.category_priors) prior_cdf.push_back(acc += p);

  const std::size_t n = cfg.n_comments;
  const auto n_abusive = static_cast<std::size_t>(
      std::llround(cfg.abusive_fraction * static_cast<double>(n)));
  std::vector<std::uint8_t> abusive_flags(n, 0);
  std::fill(abusive_flags.begin(), abusive_flags.begin() + static_cast<std::ptrdiff_t>(n_abusive), 1);
  rng.shuffle(std::span<std::uint8_t>(abusive_flags));

  std::vector<Comment> out;
  out.reserve(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    Comment c;
    c.id = numbered('c', idx, 6);
    c.abusive = abusive_flags[idx] != 0;
    std::size_t n_sent = draw_between(cfg.min_sentences, cfg.max_sentences, rng);

    std::vector<bool> abusive_slot(n_sent, false);
    if (c.abusive) {
      const bool mixed = rng.bernoulli(cfg.mix_fraction);
      if (mixed) {
        if (n_sent < 2) {
          n_sent = draw_between(std::max<std::size_t>(2, cfg.min_sentences), cfg.max_sentences, rng);
        }
        abusive_slot.assign(n_sent, false);
        const std::size_t k = draw_between(1, n_sent - 1, rng);
        std::vector<std::size_t> order(n_sent);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t j = 0; j < k; ++j) abusive_slot[order[j]] = true;
      } else {
        abusive_slot.assign(n_sent, true);
      }
    }

    for (std::size_t j = 0; j < n_sent; ++j) {
      if (abusive_slot[j]) {
        const std::size_t category = draw_category(prior_cdf, rng);
        const SentenceKind kind =
            rng.bernoulli(cfg.subtle_fraction) ? SentenceKind::subtle : SentenceKind::strong;
        c.sentences.push_back(make_sentence(cfg, lex, prior_cdf, kind, category, rng));
        c.categories[category] = true;
      } else {
        c.sentences.push_back(make_sentence(cfg, lex, prior_cdf, SentenceKind::benign, 0, rng));
      }
    }

    if (rng.bernoulli(cfg.label_noise)) {
      c.abusive = !c.abusive;
      if (!c.abusive) c.categories = {};
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace hetattn
