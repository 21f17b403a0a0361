#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hetattn/corpus.hpp"
#include "hetattn/matrix.hpp"
#include "hetattn/ops.hpp"
#include "hetattn/param_store.hpp"
#include "hetattn/rng.hpp"
#include "hetattn/tape.hpp"
#include "hetattn/textprep.hpp"

namespace hetattn {

enum class Task { detection, categorization };
enum class LossVariant { none, l1, l2, encoded };
enum class AttentionActivation { sigmoid, tanh };

std::string to_string(Task task);
std::string to_string(LossVariant variant);
std::string to_string(AttentionActivation activation);
/// Throw InputError on unknown names.
Task parse_task(const std::string& name);
LossVariant parse_loss_variant(const std::string& name);
AttentionActivation parse_activation(const std::string& name);

struct ModelConfig {
  Task task = Task::detection;
  std::size_t word_dim = 100;
  std::size_t pos_dim = 20;
  /// Per direction.
  std::size_t hidden = 64;
  std::size_t att_dim = 64;
  std::size_t ffn_dim = 64;
  std::size_t enc_dim = 64;
  std::size_t max_len = kDefaultMaxTokens;
  AttentionActivation activation = AttentionActivation::sigmoid;
  /// Dropout on z before the heads, training only.
  double dropout = 0.0;
  bool freeze_embeddings = false;
  double init_scale = 0.08;

  std::size_t num_heads() const { return task == Task::detection ? 1 : kNumCategories; }
};

/// Throws InputError for zero dimensions or dropout outside [0, 1).
void validate(const ModelConfig& config);

/// Applies one "key = value" model setting (task, word_dim, pos_dim, hidden,
/// att_dim, ffn_dim, enc_dim, max_len, attention, dropout, freeze_embeddings,
/// init_scale). Returns false for keys it does not own.
bool apply_model_key(ModelConfig& config, const std::string& key, const std::string& value);
std::vector<std::pair<std::string, std::string>> to_pairs(const ModelConfig& config);

/// Head names: "abusive" for detection, the category names otherwise.
std::vector<std::string> head_names(Task task);

/// Model-ready view of one comment.
struct EncodedComment {
  std::string id;
  std::vector<std::size_t> words;
  std::vector<std::size_t> tags;
  /// [begin, end) token range of each sentence.
  std::vector<std::pair<std::size_t, std::size_t>> sentence_spans;
  std::vector<bool> sentence_abusive;
  GroundAttention ground;
  /// Attention supervision applies (not a sentence instance, support > 0).
  bool supervised = false;
  bool abusive = false;
  std::array<bool, kNumCategories> categories{};
  bool sentence_instance = false;
};

/// Looks tokens up in the vocabularies and keeps at most max_len tokens.
EncodedComment encode_comment(const Comment& comment, const VocabPair& vocabs,
                              std::size_t max_len);
std::vector<EncodedComment> encode_all(const std::vector<Comment>& comments,
                                       const VocabPair& vocabs, std::size_t max_len);

struct ForwardTrace {
  /// max_len x 2H; rows past the comment length are zero.
  Matrix hidden;
  /// Length max_len; zero past the comment length.
  std::vector<double> attention;
  std::vector<double> context;
  /// One 2-class distribution per head; index 1 is the positive class.
  std::vector<std::array<double, 2>> outputs;
};

/// Tape handles for one forward pass.
struct Graph {
  Var hidden;     // T x 2H
  Var attention;  // 1 x T
  Var context;    // 1 x 2H
  std::vector<Var> outputs;  // 1 x 2 each
};

struct LossSpec {
  LossVariant variant = LossVariant::none;
  double beta = 0.2;
  /// Categorization head weights; must sum to 1.
  std::array<double, kNumCategories> weights = {0.25, 0.25, 0.25, 0.25};
};

/// 0.7 on the primary category, 0.1 on the others.
std::array<double, kNumCategories> primary_weights(std::size_t primary);
/// Throws std::invalid_argument unless the weights are >= 0 and sum to 1 within 1e-9.
void check_weights(std::span<const double> weights);

class Model {
 public:
  Model() = default;
  /// Allocates every parameter and draws the initial values.
  Model(const ModelConfig& config, VocabPair vocabs, Rng& rng);

  const ModelConfig& config() const { return config_; }
  const VocabPair& vocabs() const { return vocabs_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Replaces the embedding tables (rows must match the vocabularies); PAD rows
  /// are forced to zero.
  void set_embeddings(const Matrix& words, const Matrix& tags);

  /// Records the forward pass. With `trainable` the parameter leaves write
  /// their gradients into the store; otherwise they are read-only. Dropout is
  /// applied only when `dropout_rng` is given.
  Graph build(Tape& tape, const EncodedComment& comment, bool trainable,
              Rng* dropout_rng = nullptr) const;

  /// Eq. (6) / Eq. (7) on the tape. Attention loss is skipped for unsupervised
  /// comments and for variant none.
  Var build_loss(Tape& tape, const Graph& graph, const EncodedComment& comment,
                 const LossSpec& spec, bool trainable = true) const;

  ForwardTrace forward(const EncodedComment& comment) const;
  /// Positive-class probability of one head.
  double score(const EncodedComment& comment, std::size_t head = 0) const;

 private:
  Var leaf(Tape& tape, const std::string& name, bool trainable) const;

  ModelConfig config_;
  VocabPair vocabs_;
  // Mutable so that trainable leaves can hand out gradient slots from build().
  mutable ParamStore params_;
};

// Straight value-level forms of the individual pieces.

/// Runs both LSTM directions over x (T x in) and concatenates: T x 2H.
Var bilstm_forward(Tape& tape, Var x, Var w_fwd, Var b_fwd, Var w_bwd, Var b_bwd);
/// v_t = act(W_u h_t + b_u); a = softmax over valid t of u . v_t. Returns 1 x T.
Var attention_forward(Tape& tape, Var hidden, Var w_u, Var b_u, Var u, const Mask& mask,
                      AttentionActivation activation = AttentionActivation::sigmoid);
/// z = a h, 1 x 2H.
Var context_vector(Tape& tape, Var attention, Var hidden);
/// Two sigmoid layers, an output layer and softmax: 1 x 2.
Var head_forward(Tape& tape, Var z, Var w1, Var b1, Var w2, Var b2, Var w3, Var b3);

double attention_loss_l1(std::span<const double> model, std::span<const double> ground);
double attention_loss_l2(std::span<const double> model, std::span<const double> ground);
/// -tanh(W_G g + b_G) . tanh(W_M m + b_M); biases are 1 x d_a rows.
double attention_loss_encoded(std::span<const double> model, std::span<const double> ground,
                              const Matrix& w_g, const Matrix& b_g, const Matrix& w_m,
                              const Matrix& b_m);

/// Tape forms; both inputs 1 x L.
Var attention_loss_l1(Tape& tape, Var model, Var ground);
Var attention_loss_l2(Tape& tape, Var model, Var ground);
Var attention_loss_encoded(Tape& tape, Var model, Var ground, Var w_g, Var b_g, Var w_m,
                           Var b_m);

double total_loss_detection(std::span<const double> predicted, bool label,
                            double attention_loss, double beta);
double total_loss_categorization(std::span<const std::array<double, 2>> predicted,
                                 std::span<const bool> labels,
                                 std::span<const double> weights, double attention_loss,
                                 double beta);

/// Binary container: magic, format version, model config, vocabularies, free
/// text metadata, then each parameter as name, shape and raw doubles.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::string& metadata = {});
struct LoadedCheckpoint {
  Model model;
  std::string metadata;
};
/// Throws InputError for missing, truncated or foreign files.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hetattn
