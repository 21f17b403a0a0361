#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hetattn/corpus.hpp"
#include "hetattn/embed.hpp"
#include "hetattn/eval.hpp"
#include "hetattn/kv_config.hpp"
#include "hetattn/model.hpp"
#include "hetattn/svmbase.hpp"

namespace hetattn {

/// C: comments only. C+S: comments plus every sentence as its own instance.
enum class Regime { comments, comments_and_sentences };

std::string to_string(Regime regime);
Regime parse_regime(const std::string& name);

struct TrainConfig {
  ModelConfig model;
  LossSpec loss;
  Regime regime = Regime::comments;
  /// Categorization: head used for model selection and reporting.
  std::size_t primary = 0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  std::size_t min_count = 2;
  /// Initialize embeddings with CBOW trained on the training split.
  bool pretrain = true;
  std::size_t cbow_window = 3;
  std::size_t cbow_negatives = 5;
  std::size_t cbow_epochs = 5;
  double cbow_learning_rate = 0.025;
  /// Pick the F1 threshold on validation data instead of using 0.5.
  bool tune_threshold = false;
  AttentionEvalMode attention_mode = AttentionEvalMode::mixed_only;
};

/// Keys: loss, regime, beta, weights (4 reals), primary (category name; also
/// sets weights to 0.7/0.1), learning_rate, batch_size, max_epochs, patience,
/// seed, clip_norm, min_count, pretrain, cbow_window, cbow_negatives,
/// cbow_epochs, cbow_learning_rate, threshold (fixed|tuned), attention_eval
/// (mixed|all), plus the model keys. Unknown keys are an InputError.
TrainConfig train_config_from_pairs(const KeyValues& kv, TrainConfig base = {});
/// Returns false for keys it does not own.
bool apply_train_key(TrainConfig& config, const std::string& key, const std::string& value);
KeyValues to_pairs(const TrainConfig& config);
/// Throws InputError.
void validate(const TrainConfig& config);

struct OptimizerState {
  std::map<std::string, Matrix> first;
  std::map<std::string, Matrix> second;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam update of every non-frozen parameter from its gradient
/// slot. Throws std::runtime_error naming the first parameter with a
/// non-finite gradient (before touching anything).
void adam_step(ParamStore& params, OptimizerState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(ParamStore& params, double max_norm);

struct Embeddings {
  Matrix words;
  Matrix tags;
};

/// CBOW tables for the word and tag vocabularies over the training comments.
Embeddings pretrain_embeddings(const std::vector<Comment>& train, const VocabPair& vocabs,
                               const TrainConfig& config);

/// Comments a task trains and evaluates on: everything for detection, the
/// abusive comments for categorization.
std::vector<Comment> task_subset(const std::vector<Comment>& comments, Task task);
/// Gold label of one head.
bool head_label(const EncodedComment& comment, Task task, std::size_t head);
std::vector<ScoredExample> score_examples(const Model& model,
                                          const std::vector<EncodedComment>& comments,
                                          std::size_t head);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_pr_auc = 0.0;
  double val_roc_auc = 0.0;
  bool improved = false;
};

std::string to_json_line(const EpochRecord& record);

struct TrainResult {
  /// Parameters of the best validation epoch.
  Model model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  double best_val_pr_auc = 0.0;
  std::size_t train_instances = 0;
};

/// Builds vocabularies from `train`, initializes embeddings (given, CBOW, or
/// random), and optimizes Eq. (6)/(7) with early stopping on validation PR AUC.
/// Throws InputError for an empty training split.
TrainResult train_model(const std::vector<Comment>& train, const std::vector<Comment>& val,
                        const TrainConfig& config, const Embeddings* embeddings = nullptr,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Metrics of a trained model on held-out comments: roc_auc, pr_auc, f1 and,
/// for detection, attention_accuracy. Undefined metrics are NaN.
std::map<std::string, double> evaluate_model(const Model& model,
                                             const std::vector<Comment>& test,
                                             const TrainConfig& config, double threshold = 0.5);

struct SvmSystemConfig {
  Regime regime = Regime::comments;
  SvmOptions svm;
  NgramOptions ngrams;
  bool use_sentiment = false;
};

struct SvmRun {
  NgramVocab vocab;
  SvmModel model;
};

/// Trains the SVM baseline on detection labels.
SvmRun train_svm_baseline(const std::vector<Comment>& train, const SvmSystemConfig& config,
                          const SentimentLexicon* lexicon);
std::map<std::string, double> evaluate_svm(const SvmRun& run, const std::vector<Comment>& test,
                                           const SvmSystemConfig& config,
                                           const SentimentLexicon* lexicon);

enum class SystemKind { rnn, svm };

struct SystemSpec {
  std::string name;
  SystemKind kind = SystemKind::rnn;
  TrainConfig train;
  SvmSystemConfig svm;
};

/// Detection presets: svm_c, svm_cs, rnn_c, rnn_cs, rnn_l1, rnn_l2,
/// rnn_encoded. Supervised variants train on C+S.
SystemSpec detection_system(const std::string& preset, const TrainConfig& base,
                            const SvmSystemConfig& svm_base = {});
/// Categorization run for one primary category. variant: encoded, l1, l2,
/// baseline1 (C, no supervision), baseline2 (C+S, no supervision); multi_task
/// selects 0.7/0.1 weights, otherwise all weight on the primary head.
/// Named "<category>/<variant>/<multi|single>".
SystemSpec categorization_system(std::size_t primary, const std::string& variant,
                                 bool multi_task, const TrainConfig& base);

struct ProtocolOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t threads = 1;
  const SentimentLexicon* lexicon = nullptr;
  /// Progress lines ("split 2 rnn_cs done"); may be called from worker threads
  /// but never concurrently.
  std::function<void(const std::string&)> progress;
};

/// One split per seed (3:1:1), every system trained and tested on it. Splits
/// run in parallel up to `threads`; CBOW pretraining is shared by the systems
/// of a split. Throws InputError for fewer than 2 seeds.
EvalReport run_protocol(const std::vector<Comment>& dataset, const std::vector<SystemSpec>& systems,
                        const ProtocolOptions& options);

}  // namespace hetattn
