#include "hetattn/train.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "hetattn/error.hpp"

namespace hetattn {

std::string to_string(Regime regime) {
  return regime == Regime::comments ? "C" : "C+S";
}

Regime parse_regime(const std::string& name) {
  if (name == "C" || name == "c") return Regime::comments;
  if (name == "C+S" || name == "c+s" || name == "CS") return Regime::comments_and_sentences;
  throw InputError("unknown regime '" + name + "' (expected C or C+S)");
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

bool apply_train_key(TrainConfig& c, const std::string& key, const std::string& value) {
  if (apply_model_key(c.model, key, value)) return true;
  if (key == "loss") c.loss.variant = parse_loss_variant(value);
  else if (key == "regime") c.regime = parse_regime(value);
  else if (key == "beta") c.loss.beta = parse_real(key, value);
  else if (key == "weights") {
    const auto w = parse_reals(key, value);
    if (w.size() != kNumCategories) throw InputError("config key 'weights': expected 4 values");
    std::copy(w.begin(), w.end(), c.loss.weights.begin());
  } else if (key == "primary") {
    try {
      c.primary = category_index(value);
    } catch (const std::invalid_argument&) {
      throw InputError("config key 'primary': unknown category '" + value + "'");
    }
    c.loss.weights = primary_weights(c.primary);
  } else if (key == "primary_index") c.primary = parse_count(key, value);
  else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
  else if (key == "batch_size") c.batch_size = parse_count(key, value);
  else if (key == "max_epochs") c.max_epochs = parse_count(key, value);
  else if (key == "patience") c.patience = parse_count(key, value);
  else if (key == "seed") c.seed = parse_u64(key, value);
  else if (key == "clip_norm") c.clip_norm = parse_real(key, value);
  else if (key == "min_count") c.min_count = parse_count(key, value);
  else if (key == "pretrain") c.pretrain = parse_flag(key, value);
  else if (key == "cbow_window") c.cbow_window = parse_count(key, value);
  else if (key == "cbow_negatives") c.cbow_negatives = parse_count(key, value);
  else if (key == "cbow_epochs") c.cbow_epochs = parse_count(key, value);
  else if (key == "cbow_learning_rate") c.cbow_learning_rate = parse_real(key, value);
  else if (key == "threshold") {
    if (value == "fixed") c.tune_threshold = false;
    else if (value == "tuned") c.tune_threshold = true;
    else throw InputError("config key 'threshold': expected fixed or tuned");
  } else if (key == "attention_eval") {
    if (value == "mixed") c.attention_mode = AttentionEvalMode::mixed_only;
    else if (value == "all") c.attention_mode = AttentionEvalMode::all_multi_sentence;
    else throw InputError("config key 'attention_eval': expected mixed or all");
  } else {
    return false;
  }
  return true;
}

TrainConfig train_config_from_pairs(const KeyValues& kv, TrainConfig base) {
  for (const auto& [key, value] : kv) {
    if (!apply_train_key(base, key, value)) throw InputError("unknown train config key '" + key + "'");
  }
  validate(base);
  return base;
}

KeyValues to_pairs(const TrainConfig& c) {
  KeyValues kv = to_pairs(c.model);
  std::string weights;
  for (std::size_t k = 0; k < kNumCategories; ++k) {
    if (k) weights += ',';
    weights += format_real(c.loss.weights[k]);
  }
  const KeyValues rest = {
      {"loss", to_string(c.loss.variant)},
      {"regime", to_string(c.regime)},
      {"beta", format_real(c.loss.beta)},
      {"weights", weights},
      {"primary_index", std::to_string(c.primary)},
      {"learning_rate", format_real(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"max_epochs", std::to_string(c.max_epochs)},
      {"patience", std::to_string(c.patience)},
      {"seed", std::to_string(c.seed)},
      {"clip_norm", format_real(c.clip_norm)},
      {"min_count", std::to_string(c.min_count)},
      {"pretrain", c.pretrain ? "true" : "false"},
      {"cbow_window", std::to_string(c.cbow_window)},
      {"cbow_negatives", std::to_string(c.cbow_negatives)},
      {"cbow_epochs", std::to_string(c.cbow_epochs)},
      {"cbow_learning_rate", format_real(c.cbow_learning_rate)},
      {"threshold", c.tune_threshold ? "tuned" : "fixed"},
      {"attention_eval", c.attention_mode == AttentionEvalMode::mixed_only ? "mixed" : "all"}};
  kv.insert(kv.end(), rest.begin(), rest.end());
  return kv;
}

void validate(const TrainConfig& c) {
  validate(c.model);
  if (!(c.loss.beta >= 0.0)) throw InputError("beta must be >= 0");
  try {
    check_weights(c.loss.weights);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (c.primary >= kNumCategories) throw InputError("primary category out of range");
  if (!(c.learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (c.batch_size == 0) throw InputError("batch_size must be >= 1");
  if (c.max_epochs == 0) throw InputError("max_epochs must be >= 1");
  if (c.patience == 0) throw InputError("patience must be >= 1");
  if (!(c.clip_norm > 0.0)) throw InputError("clip_norm must be > 0");
  if (c.min_count == 0) throw InputError("min_count must be >= 1");
  if (c.cbow_window == 0 || c.cbow_epochs == 0) throw InputError("cbow_window and cbow_epochs must be >= 1");
}

void adam_step(ParamStore& params, OptimizerState& state, double lr, double beta1, double beta2,
               double eps) {
  for (const auto& [name, p] : params) {
    if (!p.frozen && !p.grad.all_finite()) {
      throw std::runtime_error("non-finite gradient in parameter " + name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  for (auto& [name, p] : params) {
    if (p.frozen) continue;
    auto [mit, m_new] = state.first.try_emplace(name, p.value.rows(), p.value.cols());
    auto [vit, v_new] = state.second.try_emplace(name, p.value.rows(), p.value.cols());
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

double clip_global_norm(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    if (p.frozen) continue;
    for (double g : p.grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, p] : params) {
      for (double& g : p.grad.values()) g *= s;
    }
  }
  return norm;
}

Embeddings pretrain_embeddings(const std::vector<Comment>& train, const VocabPair& vocabs,
                               const TrainConfig& config) {
  std::vector<std::vector<std::size_t>> words, tags;
  for (const auto& c : train) {
    words.push_back(vocabs.words.encode(c.surfaces()));
    tags.push_back(vocabs.tags.encode(c.tags()));
  }
  CbowOptions opt;
  opt.window = config.cbow_window;
  opt.negatives = config.cbow_negatives;
  opt.epochs = config.cbow_epochs;
  opt.learning_rate = config.cbow_learning_rate;
  opt.dim = config.model.word_dim;
  opt.seed = config.seed;
  Embeddings e;
  e.words = train_cbow(words, vocabs.words.size(), opt);
  opt.dim = config.model.pos_dim;
  opt.seed = config.seed + 1;
  e.tags = train_cbow(tags, vocabs.tags.size(), opt);
  return e;
}

std::vector<Comment> task_subset(const std::vector<Comment>& comments, Task task) {
  if (task == Task::detection) return comments;
  std::vector<Comment> out;
  for (const auto& c : comments) {
    if (c.abusive) out.push_back(c);
  }
  return out;
}

bool head_label(const EncodedComment& c, Task task, std::size_t head) {
  return task == Task::detection ? c.abusive : c.categories.at(head);
}

std::vector<ScoredExample> score_examples(const Model& model,
                                          const std::vector<EncodedComment>& comments,
                                          std::size_t head) {
  std::vector<ScoredExample> out;
  out.reserve(comments.size());
  for (const auto& c : comments) {
    out.push_back({c.id, head_label(c, model.config().task, head), model.score(c, head)});
  }
  return out;
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_pr_auc"] = std::isfinite(r.val_pr_auc) ? nlohmann::ordered_json(r.val_pr_auc) : nullptr;
  j["val_roc_auc"] = std::isfinite(r.val_roc_auc) ? nlohmann::ordered_json(r.val_roc_auc) : nullptr;
  j["improved"] = r.improved;
  return j.dump();
}

namespace {

double metric_or_nan(double (*metric)(std::span<const ScoredExample>),
                     const std::vector<ScoredExample>& ex) {
  try {
    return metric(ex);
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

std::size_t eval_head(const TrainConfig& c) {
  return c.model.task == Task::detection ? 0 : c.primary;
}

}  // namespace

TrainResult train_model(const std::vector<Comment>& train, const std::vector<Comment>& val,
                        const TrainConfig& config, const Embeddings* embeddings,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  validate(config);
  const Task task = config.model.task;
  const auto train_subset = task_subset(train, task);
  if (train_subset.empty()) throw InputError("training split is empty");

  VocabPair vocabs = build_vocab(train, config.min_count);
  Rng init_rng(config.seed);
  Model model(config.model, vocabs, init_rng);
  if (embeddings) {
    model.set_embeddings(embeddings->words, embeddings->tags);
  } else if (config.pretrain) {
    const Embeddings e = pretrain_embeddings(train, vocabs, config);
    model.set_embeddings(e.words, e.tags);
  }

  const auto instances_raw = config.regime == Regime::comments_and_sentences
                                 ? explode_sentences(train_subset)
                                 : train_subset;
  const auto instances = encode_all(instances_raw, vocabs, config.model.max_len);
  const auto val_encoded = encode_all(task_subset(val, task), vocabs, config.model.max_len);

  TrainResult result;
  result.train_instances = instances.size();
  Rng root(config.seed);
  Rng order_rng = root.fork(11);
  Rng dropout_rng = root.fork(12);
  Rng* dropout = config.model.dropout > 0.0 ? &dropout_rng : nullptr;

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  OptimizerState opt;
  ParamStore best = model.params();
  std::size_t since_best = 0;
  const std::size_t head = eval_head(config);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      model.params().zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const EncodedComment& ex = instances[order[k]];
        Tape tape;
        const Graph g = model.build(tape, ex, true, dropout);
        const Var loss = model.build_loss(tape, g, ex, config.loss);
        loss_sum += tape.value(loss)[0];
        tape.backward(loss);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& [name, p] : model.params()) {
        for (double& g : p.grad.values()) g *= inv;
      }
      clip_global_norm(model.params(), config.clip_norm);
      adam_step(model.params(), opt, config.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(instances.size());
    const auto scored = score_examples(model, val_encoded, head);
    rec.val_pr_auc = metric_or_nan(pr_auc, scored);
    rec.val_roc_auc = metric_or_nan(roc_auc, scored);
    rec.improved = result.best_epoch == 0 || rec.val_pr_auc > result.best_val_pr_auc;
    if (rec.improved) {
      result.best_epoch = epoch;
      result.best_val_pr_auc = rec.val_pr_auc;
      best = model.params();
      since_best = 0;
    } else {
      ++since_best;
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (since_best >= config.patience) break;
  }
  model.params().assign_values(best);
  result.model = std::move(model);
  return result;
}

std::map<std::string, double> evaluate_model(const Model& model, const std::vector<Comment>& test,
                                             const TrainConfig& config, double threshold) {
  const Task task = model.config().task;
  const auto encoded = encode_all(task_subset(test, task), model.vocabs(), model.config().max_len);
  const auto scored = score_examples(model, encoded, eval_head(config));
  std::map<std::string, double> m;
  m["roc_auc"] = metric_or_nan(roc_auc, scored);
  m["pr_auc"] = metric_or_nan(pr_auc, scored);
  m["f1"] = f1(scored, threshold);
  if (task == Task::detection) {
    try {
      m["attention_selection_accuracy"] = attention_selection_accuracy(model, encoded, config.attention_mode);
    } catch (const std::invalid_argument&) {
      m["attention_selection_accuracy"] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return m;
}

SvmRun train_svm_baseline(const std::vector<Comment>& train, const SvmSystemConfig& config,
                          const SentimentLexicon* lexicon) {
  if (train.empty()) throw InputError("training split is empty");
  const auto instances =
      config.regime == Regime::comments_and_sentences ? explode_sentences(train) : train;
  SvmRun run;
  run.vocab = NgramVocab::build(train, config.ngrams);
  std::vector<SparseVec> features;
  std::vector<bool> labels;
  for (const auto& c : instances) {
    features.push_back(extract_features(c, run.vocab, lexicon, config.use_sentiment));
    labels.push_back(c.abusive);
  }
  run.model = train_svm(features, labels, config.svm);
  return run;
}

std::map<std::string, double> evaluate_svm(const SvmRun& run, const std::vector<Comment>& test,
                                           const SvmSystemConfig& config,
                                           const SentimentLexicon* lexicon) {
  std::vector<ScoredExample> scored;
  for (const auto& c : test) {
    scored.push_back(
        {c.id, c.abusive, svm_score(run.model, extract_features(c, run.vocab, lexicon, config.use_sentiment))});
  }
  return {{"roc_auc", metric_or_nan(roc_auc, scored)},
          {"pr_auc", metric_or_nan(pr_auc, scored)},
          {"f1", f1(scored, 0.0)}};
}

SystemSpec detection_system(const std::string& preset, const TrainConfig& base,
                            const SvmSystemConfig& svm_base) {
  SystemSpec s;
  s.name = preset;
  s.train = base;
  s.train.model.task = Task::detection;
  s.svm = svm_base;
  if (preset == "svm_c" || preset == "svm_cs") {
    s.kind = SystemKind::svm;
    s.svm.regime = preset == "svm_c" ? Regime::comments : Regime::comments_and_sentences;
    return s;
  }
  if (preset == "rnn_c") {
    s.train.regime = Regime::comments;
    s.train.loss.variant = LossVariant::none;
  } else if (preset == "rnn_cs") {
    s.train.regime = Regime::comments_and_sentences;
    s.train.loss.variant = LossVariant::none;
  } else if (preset == "rnn_l1" || preset == "rnn_l2" || preset == "rnn_encoded") {
    s.train.regime = Regime::comments_and_sentences;
    s.train.loss.variant = parse_loss_variant(preset.substr(4));
  } else {
    throw InputError("unknown detection system '" + preset + "'");
  }
  return s;
}

SystemSpec categorization_system(std::size_t primary, const std::string& variant,
                                 bool multi_task, const TrainConfig& base) {
  SystemSpec s;
  s.train = base;
  s.train.model.task = Task::categorization;
  s.train.primary = primary;
  if (multi_task) {
    s.train.loss.weights = primary_weights(primary);
  } else {
    s.train.loss.weights.fill(0.0);
    s.train.loss.weights[primary] = 1.0;
  }
  if (variant == "baseline1") {
    s.train.regime = Regime::comments;
    s.train.loss.variant = LossVariant::none;
  } else if (variant == "baseline2") {
    s.train.regime = Regime::comments_and_sentences;
    s.train.loss.variant = LossVariant::none;
  } else {
    s.train.regime = Regime::comments_and_sentences;
    s.train.loss.variant = parse_loss_variant(variant);
    if (s.train.loss.variant == LossVariant::none) {
      throw InputError("unknown categorization variant 'none' (use baseline1 or baseline2)");
    }
  }
  s.name = std::string(kCategoryNames.at(primary)) + "/" + variant + "/" +
           (multi_task ? "multi" : "single");
  return s;
}

namespace {

std::string embedding_key(const TrainConfig& c) {
  return std::to_string(c.model.word_dim) + ":" + std::to_string(c.model.pos_dim) + ":" +
         std::to_string(c.min_count) + ":" + std::to_string(c.cbow_window) + ":" +
         std::to_string(c.cbow_negatives) + ":" + std::to_string(c.cbow_epochs) + ":" +
         format_real(c.cbow_learning_rate) + ":" + std::to_string(c.seed);
}

using SplitMetrics = std::vector<std::map<std::string, double>>;  // one per system

SplitMetrics run_split(const std::vector<Comment>& dataset, const std::vector<SystemSpec>& systems,
                       std::uint64_t seed, const ProtocolOptions& options,
                       const std::function<void(const std::string&)>& report) {
  const SplitSpec split = split_dataset(dataset, seed);
  const auto train = select(dataset, split.train);
  const auto val = select(dataset, split.val);
  const auto test = select(dataset, split.test);
  std::map<std::string, Embeddings> cache;
  SplitMetrics out;
  for (const auto& sys : systems) {
    if (sys.kind == SystemKind::svm) {
      SvmSystemConfig cfg = sys.svm;
      cfg.svm.seed = seed;
      const SvmRun run = train_svm_baseline(train, cfg, options.lexicon);
      out.push_back(evaluate_svm(run, test, cfg, options.lexicon));
    } else {
      TrainConfig cfg = sys.train;
      cfg.seed = seed;
      const Embeddings* emb = nullptr;
      if (cfg.pretrain) {
        const std::string key = embedding_key(cfg);
        auto it = cache.find(key);
        if (it == cache.end()) {
          const VocabPair vocabs = build_vocab(train, cfg.min_count);
          it = cache.emplace(key, pretrain_embeddings(train, vocabs, cfg)).first;
        }
        emb = &it->second;
      }
      const TrainResult result = train_model(train, val, cfg, emb);
      double threshold = 0.5;
      if (cfg.tune_threshold) {
        const auto val_enc = encode_all(task_subset(val, cfg.model.task), result.model.vocabs(),
                                        cfg.model.max_len);
        threshold = tune_threshold(score_examples(result.model, val_enc, eval_head(cfg)));
      }
      out.push_back(evaluate_model(result.model, test, cfg, threshold));
    }
    if (report) report("split seed " + std::to_string(seed) + " " + sys.name + " done");
  }
  return out;
}

}  // namespace

EvalReport run_protocol(const std::vector<Comment>& dataset, const std::vector<SystemSpec>& systems,
                        const ProtocolOptions& options) {
  if (options.seeds.size() < 2) throw InputError("protocol needs at least 2 splits");
  const std::size_t n = options.seeds.size();
  std::vector<SplitMetrics> per_split(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex progress_mutex;
  auto report = [&](const std::string& line) {
    if (!options.progress) return;
    std::lock_guard<std::mutex> lock(progress_mutex);
    options.progress(line);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        per_split[i] = run_split(dataset, systems, options.seeds[i], options, report);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport r;
  r.seeds = options.seeds;
  for (std::size_t s = 0; s < systems.size(); ++s) {
    SystemResult sr;
    sr.name = systems[s].name;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& [metric, value] : per_split[i][s]) sr.metrics[metric].push_back(value);
    }
    r.systems.push_back(std::move(sr));
  }
  return r;
}

}  // namespace hetattn
