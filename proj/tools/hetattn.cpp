// hetattn: command line driver for data generation, training, evaluation and
// the multi-split experiment protocol.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hetattn/corpus.hpp"
#include "hetattn/embed.hpp"
#include "hetattn/error.hpp"
#include "hetattn/eval.hpp"
#include "hetattn/kv_config.hpp"
#include "hetattn/model.hpp"
#include "hetattn/svmbase.hpp"
#include "hetattn/textprep.hpp"
#include "hetattn/train.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace hetattn;
using nlohmann::ordered_json;

namespace {

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kLogFile = "train_log.jsonl";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kWordEmbeddings = "words.emb";
constexpr const char* kTagEmbeddings = "tags.emb";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("HETATTN_THREADS"); env && *env) {
    const std::size_t n = parse_count("HETATTN_THREADS", env);
    return n == 0 ? 1 : n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::string kv_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

struct Splits {
  std::vector<Comment> train, val, test;
};

Splits make_splits(const std::vector<Comment>& data, std::uint64_t seed) {
  const SplitSpec s = split_dataset(data, seed);
  return {select(data, s.train), select(data, s.val), select(data, s.test)};
}

std::vector<Comment> split_by_name(const std::vector<Comment>& data, std::uint64_t seed,
                                   const std::string& name) {
  if (name == "all") return data;
  Splits s = make_splits(data, seed);
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw InputError("unknown split '" + name + "' (expected train, val, test or all)");
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a) {
  SynthConfig cfg;
  KeyValues kv;
  if (!a.config.empty()) kv = load_key_values(a.config);
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  cfg = synth_config_from_pairs(kv);
  const auto data = synth_corpus(cfg);
  save_dataset(a.out, data);

  cli::Manifest m("synth");
  m.set_config(kv);
  m.add_seed(cfg.seed);
  if (!a.config.empty()) m.add_input(a.config);
  m.add_artifact(a.out);
  m.write(a.out + ".manifest.json");
  std::fprintf(stderr, "wrote %zu comments to %s\n", data.size(), a.out.c_str());
  return 0;
}

// ---------------------------------------------------------------- prep

// Raw records look like interchange records except that a sentence may carry
// "text" instead of "tokens"; such text is normalized, tokenized and tagged.
struct PrepArgs {
  std::string in, out;
  std::size_t max_tokens = kDefaultMaxTokens;
};

int cmd_prep(const PrepArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw InputError("cannot open " + a.in);
  std::vector<Comment> out;
  LoadOptions opts;
  opts.max_tokens = a.max_tokens;
  LoadStats stats;
  std::size_t dropped = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!j.is_object() || !j.contains("sentences") || !j["sentences"].is_array()) {
        throw InputError("record needs a \"sentences\" array");
      }
      nlohmann::json kept = nlohmann::json::array();
      for (auto s : j["sentences"]) {
        if (s.is_object() && s.contains("text")) {
          if (!s["text"].is_string()) throw InputError("sentence \"text\" must be a string");
          const auto toks = tokenize(normalize(s["text"].get<std::string>()));
          s.erase("text");
          s["tokens"] = toks;
          s["pos"] = pos_tag(toks);
          if (toks.empty()) continue;
        }
        kept.push_back(std::move(s));
      }
      if (kept.empty()) {
        ++dropped;
        continue;
      }
      j["sentences"] = std::move(kept);
      out.push_back(parse_comment(j.dump(), opts, &stats));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(a.in + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(a.in + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  save_dataset(a.out, out);
  cli::Manifest m("prep");
  m.set_config({{"max_tokens", std::to_string(a.max_tokens)}});
  m.add_input(a.in);
  m.add_artifact(a.out);
  m.write(a.out + ".manifest.json");
  std::fprintf(stderr, "prep: %zu comments written, %zu empty dropped, %zu truncated, %zu tagged by fallback\n",
               out.size(), dropped, stats.truncated, stats.tagged_by_fallback);
  return 0;
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
  std::string data, config, out_dir;
  std::optional<std::uint64_t> seed;
  std::string split = "train";
};

TrainConfig load_train_config(const std::string& path, std::optional<std::uint64_t> seed) {
  KeyValues kv;
  if (!path.empty()) kv = load_key_values(path);
  if (seed) kv.emplace_back("seed", std::to_string(*seed));
  TrainConfig cfg = train_config_from_pairs(kv);
  validate(cfg);
  return cfg;
}

int cmd_embed(const EmbedArgs& a) {
  const TrainConfig cfg = load_train_config(a.config, a.seed);
  const auto data = load_dataset(a.data);
  const auto corpus = split_by_name(data, cfg.seed, a.split);
  const VocabPair vocabs = build_vocab(corpus, cfg.min_count);
  const Embeddings e = pretrain_embeddings(corpus, vocabs, cfg);
  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  save_embeddings(dir / kWordEmbeddings, vocabs.words, e.words);
  save_embeddings(dir / kTagEmbeddings, vocabs.tags, e.tags);

  cli::Manifest m("embed");
  KeyValues kv = to_pairs(cfg);
  kv.emplace_back("split", a.split);
  m.set_config(kv);
  m.add_seed(cfg.seed);
  m.add_input(a.data);
  if (!a.config.empty()) m.add_input(a.config);
  m.add_artifact(dir / kWordEmbeddings);
  m.add_artifact(dir / kTagEmbeddings);
  m.write(dir / kManifestFile);
  std::fprintf(stderr, "embeddings: %zu words x %zu, %zu tags x %zu\n", e.words.rows(), e.words.cols(),
               e.tags.rows(), e.tags.cols());
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, config, out_dir, embeddings;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  const TrainConfig cfg = load_train_config(a.config, a.seed);
  const auto data = load_dataset(a.data);
  const Splits s = make_splits(data, cfg.seed);

  std::optional<Embeddings> supplied;
  if (!a.embeddings.empty()) {
    const fs::path dir(a.embeddings);
    const VocabPair vocabs = build_vocab(s.train, cfg.min_count);
    Rng rng = Rng(cfg.seed).fork(21);
    supplied = Embeddings{align_embeddings(load_embeddings(dir / kWordEmbeddings), vocabs.words, rng),
                          align_embeddings(load_embeddings(dir / kTagEmbeddings), vocabs.tags, rng)};
    if (supplied->words.cols() != cfg.model.word_dim || supplied->tags.cols() != cfg.model.pos_dim) {
      throw InputError("embedding dimensions do not match word_dim/pos_dim");
    }
  }

  ensure_dir(a.out_dir);
  const fs::path dir(a.out_dir);
  std::ofstream log(dir / kLogFile, std::ios::binary);
  if (!log) throw InputError("cannot write " + (dir / kLogFile).string());
  const TrainResult r = train_model(s.train, s.val, cfg, supplied ? &*supplied : nullptr,
                                    [&](const EpochRecord& rec) {
                                      const std::string line = to_json_line(rec);
                                      log << line << "\n";
                                      if (!a.quiet) std::fprintf(stderr, "%s\n", line.c_str());
                                    });
  log.close();

  KeyValues meta = to_pairs(cfg);
  meta.emplace_back("data_sha256", cli::sha256_file(a.data));
  meta.emplace_back("best_epoch", std::to_string(r.best_epoch));
  save_checkpoint(dir / kCheckpointFile, r.model, kv_text(meta));

  cli::Manifest m("train");
  m.set_config(to_pairs(cfg));
  m.add_seed(cfg.seed);
  m.add_input(a.data);
  if (!a.config.empty()) m.add_input(a.config);
  if (!a.embeddings.empty()) {
    m.add_input(fs::path(a.embeddings) / kWordEmbeddings);
    m.add_input(fs::path(a.embeddings) / kTagEmbeddings);
  }
  m.add_artifact(dir / kCheckpointFile);
  m.add_artifact(dir / kLogFile);
  m.write(dir / kManifestFile);
  std::fprintf(stderr, "best epoch %zu, val PR AUC %.4f, %zu training instances\n", r.best_epoch,
               r.best_val_pr_auc, r.train_instances);
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, data, out, split = "test", attention_eval;
  std::optional<double> threshold;
};

TrainConfig config_from_checkpoint(const LoadedCheckpoint& ck) {
  KeyValues kv;
  for (auto& [k, v] : parse_key_values(ck.metadata)) {
    if (k != "data_sha256" && k != "best_epoch") kv.emplace_back(k, v);
  }
  return train_config_from_pairs(kv);
}

int cmd_eval(const EvalArgs& a) {
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  TrainConfig cfg = config_from_checkpoint(ck);
  if (!a.attention_eval.empty()) apply_train_key(cfg, "attention_eval", a.attention_eval);
  const auto data = load_dataset(a.data);
  const auto test = split_by_name(data, cfg.seed, a.split);
  const auto metrics = evaluate_model(ck.model, test, cfg, a.threshold.value_or(0.5));

  ordered_json j;
  j["checkpoint"] = a.checkpoint;
  j["split"] = a.split;
  j["task"] = to_string(cfg.model.task);
  for (const auto& [k, v] : metrics) j[k] = std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
  for (const auto& [k, v] : metrics) std::printf("%-28s %.4f\n", k.c_str(), v);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------- protocol

struct ProtocolArgs {
  std::string data, systems, out_dir, seeds;
};

bool apply_svm_key(SvmSystemConfig& c, const std::string& key, const std::string& value) {
  if (key == "svm.lambda") c.svm.lambda = parse_real(key, value);
  else if (key == "svm.epochs") c.svm.epochs = parse_count(key, value);
  else if (key == "svm.sentiment") c.use_sentiment = parse_flag(key, value);
  else if (key == "svm.max_word_ngrams") c.ngrams.max_word_ngrams = parse_count(key, value);
  else if (key == "svm.max_char_trigrams") c.ngrams.max_char_trigrams = parse_count(key, value);
  else if (key == "svm.counts") c.ngrams.counts = parse_flag(key, value);
  else return false;
  return true;
}

struct ProtocolPlan {
  std::string mode = "detection";
  std::vector<SystemSpec> systems;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string lexicon;
  KeyValues snapshot;
  // (system, baseline) pairs for the significance column.
  std::vector<std::pair<std::string, std::string>> comparisons;
  std::string comparison_metric = "roc_auc";
};

ProtocolPlan load_plan(const fs::path& path) {
  const KeyValues kv = load_key_values(path);
  ProtocolPlan plan;
  plan.snapshot = kv;
  KeyValues train_kv;
  SvmSystemConfig svm;
  std::vector<std::string> presets = {"svm_c", "svm_cs", "rnn_c", "rnn_cs", "rnn_l1", "rnn_l2", "rnn_encoded"};
  std::vector<std::string> variants = {"encoded", "l1", "l2", "baseline1", "baseline2"};
  std::vector<std::string> modes = {"single", "multi"};
  std::vector<std::string> categories(kCategoryNames.begin(), kCategoryNames.end());
  for (const auto& [k, v] : kv) {
    if (k == "mode") plan.mode = v;
    else if (k == "systems") presets = parse_list(v);
    else if (k == "variants") variants = parse_list(v);
    else if (k == "task_modes") modes = parse_list(v);
    else if (k == "categories") categories = parse_list(v);
    else if (k == "seeds") {
      plan.seeds.clear();
      for (const auto& s : parse_list(v)) plan.seeds.push_back(parse_u64(k, s));
    } else if (k == "lexicon") {
      plan.lexicon = (fs::path(v).is_absolute() ? fs::path(v) : path.parent_path() / v).string();
    } else if (!apply_svm_key(svm, k, v)) {
      train_kv.emplace_back(k, v);
    }
  }
  const TrainConfig base = train_config_from_pairs(train_kv);
  if (plan.mode == "detection") {
    for (const auto& p : presets) plan.systems.push_back(detection_system(p, base, svm));
    for (const auto& p : presets) {
      if (p != "rnn_cs" && p.rfind("rnn_", 0) == 0 &&
          std::find(presets.begin(), presets.end(), "rnn_cs") != presets.end()) {
        plan.comparisons.emplace_back(p, "rnn_cs");
      }
    }
  } else if (plan.mode == "categorization") {
    plan.comparison_metric = "pr_auc";
    for (const auto& cat : categories) {
      const std::size_t primary = category_index(cat);
      for (const auto& mode : modes) {
        if (mode != "single" && mode != "multi") throw InputError("task_modes entries are single or multi");
        for (const auto& var : variants) {
          plan.systems.push_back(categorization_system(primary, var, mode == "multi", base));
        }
        const std::string enc = cat + "/encoded/" + mode, b2 = cat + "/baseline2/" + mode;
        if (std::find(variants.begin(), variants.end(), "encoded") != variants.end() &&
            std::find(variants.begin(), variants.end(), "baseline2") != variants.end()) {
          plan.comparisons.emplace_back(enc, b2);
        }
      }
    }
  } else {
    throw InputError("mode must be detection or categorization, got '" + plan.mode + "'");
  }
  if (plan.systems.empty()) throw InputError("no systems selected");
  return plan;
}

int cmd_protocol(const ProtocolArgs& a) {
  ProtocolPlan plan = load_plan(a.systems);
  if (!a.seeds.empty()) {
    plan.seeds.clear();
    for (const auto& s : parse_list(a.seeds)) plan.seeds.push_back(parse_u64("seeds", s));
  }
  const auto data = load_dataset(a.data);
  std::optional<SentimentLexicon> lexicon;
  if (!plan.lexicon.empty()) lexicon = SentimentLexicon::load(plan.lexicon);

  ProtocolOptions opts;
  opts.seeds = plan.seeds;
  opts.threads = thread_budget();
  opts.lexicon = lexicon ? &*lexicon : nullptr;
  opts.progress = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
  EvalReport report = run_protocol(data, plan.systems, opts);
  report.title = plan.mode == "detection" ? "Abusive language detection" : "Abuse categorization";
  for (const auto& [sys, base] : plan.comparisons) report.compare(sys, base, plan.comparison_metric);

  const std::string table = format_table(report);
  std::printf("%s", table.c_str());
  if (!a.out_dir.empty()) {
    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    write_text(dir / "report.txt", table);
    write_text(dir / "report.json", to_json(report) + "\n");
    cli::Manifest m("protocol");
    m.set_config(plan.snapshot);
    for (auto s : plan.seeds) m.add_seed(s);
    m.add_input(a.data);
    m.add_input(a.systems);
    if (!plan.lexicon.empty()) m.add_input(plan.lexicon);
    m.add_artifact(dir / "report.txt");
    m.add_artifact(dir / "report.json");
    m.write(dir / kManifestFile);
  }
  return 0;
}

// ---------------------------------------------------------------- visualize

struct VisualizeArgs {
  std::string checkpoint, data, id, text, out;
};

int cmd_visualize(const VisualizeArgs& a) {
  if (a.id.empty() == a.text.empty()) throw InputError("give exactly one of --id or --text");
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  Comment c;
  if (!a.id.empty()) {
    if (a.data.empty()) throw InputError("--id needs --data");
    const auto data = load_dataset(a.data);
    auto it = std::find_if(data.begin(), data.end(), [&](const Comment& x) { return x.id == a.id; });
    if (it == data.end()) throw InputError("no comment with id '" + a.id + "'");
    c = *it;
  } else {
    const auto toks = tokenize(normalize(a.text));
    if (toks.empty()) throw InputError("text has no tokens");
    const auto tags = pos_tag(toks);
    Sentence s;
    for (std::size_t i = 0; i < toks.size(); ++i) s.tokens.push_back({toks[i], tags[i]});
    c.id = "text";
    c.sentences.push_back(std::move(s));
  }
  truncate_comment(c, ck.model.config().max_len);
  const EncodedComment e = encode_comment(c, ck.model.vocabs(), ck.model.config().max_len);
  const ForwardTrace tr = ck.model.forward(e);
  const std::vector<std::string> tokens = c.surfaces();
  const std::span<const double> weights(tr.attention.data(), tokens.size());
  write_text(a.out, render_attention_svg(tokens, weights));
  std::printf("%s\n", render_attention_ansi(tokens, weights).c_str());
  std::printf("P(abusive) = %.4f\n", tr.outputs.front()[1]);
  return 0;
}

// ---------------------------------------------------------------- svm

struct SvmArgs {
  std::string data, config, out_dir, lexicon;
  std::optional<std::uint64_t> seed;
};

int cmd_svm(const SvmArgs& a) {
  SvmSystemConfig cfg;
  KeyValues kv;
  if (!a.config.empty()) kv = load_key_values(a.config);
  if (a.seed) kv.emplace_back("seed", std::to_string(*a.seed));
  std::uint64_t split_seed = 1;
  for (const auto& [k, v] : kv) {
    if (k == "seed") split_seed = parse_u64(k, v);
    else if (k == "regime") cfg.regime = parse_regime(v);
    else if (!apply_svm_key(cfg, k, v)) throw InputError("unknown svm config key '" + k + "'");
  }
  cfg.svm.seed = split_seed;
  std::optional<SentimentLexicon> lexicon;
  if (!a.lexicon.empty()) lexicon = SentimentLexicon::load(a.lexicon);
  if (cfg.use_sentiment && !lexicon) throw InputError("svm.sentiment = true needs --lexicon");

  const auto data = load_dataset(a.data);
  const Splits s = make_splits(data, split_seed);
  const SvmRun run = train_svm_baseline(s.train, cfg, lexicon ? &*lexicon : nullptr);
  const auto metrics = evaluate_svm(run, s.test, cfg, lexicon ? &*lexicon : nullptr);
  ordered_json j;
  for (const auto& [k, v] : metrics) {
    j[k] = v;
    std::printf("%-28s %.4f\n", k.c_str(), v);
  }
  if (!a.out_dir.empty()) {
    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    write_text(dir / "metrics.json", j.dump(2) + "\n");
    cli::Manifest m("svm");
    m.set_config(kv);
    m.add_seed(split_seed);
    m.add_input(a.data);
    if (!a.config.empty()) m.add_input(a.config);
    if (!a.lexicon.empty()) m.add_input(a.lexicon);
    m.add_artifact(dir / "metrics.json");
    m.write(dir / kManifestFile);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Abusive language detection with sentence-supervised attention"};
  app.set_version_flag("--version", std::string(HETATTN_VERSION));
  app.require_subcommand(1);
  std::function<int()> run;

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  sy->add_option("-c,--config", synth.config, "key=value synth config")->check(CLI::ExistingFile);
  sy->add_option("-o,--out", synth.out, "output JSONL")->required();
  sy->add_option("--seed", synth.seed, "override the config seed");
  sy->callback([&] { run = [&] { return cmd_synth(synth); }; });

  PrepArgs prep;
  auto* pr = app.add_subcommand("prep", "Normalize, tokenize and tag raw records");
  pr->add_option("-i,--in", prep.in, "raw JSONL")->required();
  pr->add_option("-o,--out", prep.out, "interchange JSONL")->required();
  pr->add_option("--max-tokens", prep.max_tokens, "truncate comments to this many tokens");
  pr->callback([&] { run = [&] { return cmd_prep(prep); }; });

  EmbedArgs embed;
  auto* em = app.add_subcommand("embed", "Pretrain CBOW word and POS embeddings");
  em->add_option("-d,--data", embed.data, "dataset JSONL")->required();
  em->add_option("-c,--config", embed.config, "training config (dims and cbow_* keys)")->check(CLI::ExistingFile);
  em->add_option("-o,--out-dir", embed.out_dir, "output directory")->required();
  em->add_option("--seed", embed.seed, "override the config seed");
  em->add_option("--split", embed.split, "train, val, test or all")->capture_default_str();
  em->callback([&] { run = [&] { return cmd_embed(embed); }; });

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a model on one split");
  tr->add_option("-d,--data", train.data, "dataset JSONL")->required();
  tr->add_option("-c,--config", train.config, "training config")->check(CLI::ExistingFile);
  tr->add_option("-o,--out-dir", train.out_dir, "output directory")->required();
  tr->add_option("--embeddings", train.embeddings, "directory written by 'embed'");
  tr->add_option("--seed", train.seed, "override the config seed");
  tr->add_flag("-q,--quiet", train.quiet, "no per-epoch output");
  tr->callback([&] { run = [&] { return cmd_train(train); }; });

  EvalArgs ev;
  auto* eva = app.add_subcommand("eval", "Evaluate a checkpoint");
  eva->add_option("-m,--checkpoint", ev.checkpoint, "model checkpoint")->required();
  eva->add_option("-d,--data", ev.data, "dataset JSONL")->required();
  eva->add_option("--split", ev.split, "train, val, test or all")->capture_default_str();
  eva->add_option("--threshold", ev.threshold, "F1 decision threshold (default 0.5)");
  eva->add_option("--attention-eval", ev.attention_eval, "mixed or all");
  eva->add_option("-o,--out", ev.out, "metrics JSON");
  eva->callback([&] { run = [&] { return cmd_eval(ev); }; });

  ProtocolArgs proto;
  auto* pt = app.add_subcommand("protocol", "Run the multi-split comparison");
  pt->add_option("-d,--data", proto.data, "dataset JSONL")->required();
  pt->add_option("-s,--systems", proto.systems, "systems config")->required()->check(CLI::ExistingFile);
  pt->add_option("-o,--out-dir", proto.out_dir, "write report.txt, report.json, manifest.json");
  pt->add_option("--seeds", proto.seeds, "comma separated split seeds");
  pt->callback([&] { run = [&] { return cmd_protocol(proto); }; });

  VisualizeArgs vis;
  auto* vi = app.add_subcommand("visualize", "Render attention weights");
  vi->add_option("-m,--checkpoint", vis.checkpoint, "model checkpoint")->required();
  vi->add_option("-d,--data", vis.data, "dataset JSONL (with --id)");
  vi->add_option("--id", vis.id, "comment id");
  vi->add_option("--text", vis.text, "raw text");
  vi->add_option("-o,--out", vis.out, "SVG output")->required();
  vi->callback([&] { run = [&] { return cmd_visualize(vis); }; });

  SvmArgs svm;
  auto* sv = app.add_subcommand("svm", "Train and evaluate the SVM baseline on one split");
  sv->add_option("-d,--data", svm.data, "dataset JSONL")->required();
  sv->add_option("-c,--config", svm.config, "svm config")->check(CLI::ExistingFile);
  sv->add_option("-o,--out-dir", svm.out_dir, "output directory");
  sv->add_option("--lexicon", svm.lexicon, "token<TAB>polarity file");
  sv->add_option("--seed", svm.seed, "split seed");
  sv->callback([&] { run = [&] { return cmd_svm(svm); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run();
  } catch (const InputError& e) {
    std::fprintf(stderr, "hetattn: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "hetattn: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hetattn: internal error: %s\n", e.what());
    return 1;
  }
}
