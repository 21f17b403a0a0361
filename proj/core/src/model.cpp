#include "hetattn/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hetattn/error.hpp"
#include "hetattn/kv_config.hpp"

namespace hetattn {

std::string to_string(Task task) {
  return task == Task::detection ? "detection" : "categorization";
}

std::string to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::none: return "none";
    case LossVariant::l1: return "l1";
    case LossVariant::l2: return "l2";
    case LossVariant::encoded: return "encoded";
  }
  return "none";
}

std::string to_string(AttentionActivation activation) {
  return activation == AttentionActivation::sigmoid ? "sigmoid" : "tanh";
}

Task parse_task(const std::string& name) {
  if (name == "detection") return Task::detection;
  if (name == "categorization") return Task::categorization;
  throw InputError("unknown task '" + name + "' (expected detection or categorization)");
}

LossVariant parse_loss_variant(const std::string& name) {
  if (name == "none") return LossVariant::none;
  if (name == "l1") return LossVariant::l1;
  if (name == "l2") return LossVariant::l2;
  if (name == "encoded") return LossVariant::encoded;
  throw InputError("unknown loss variant '" + name + "' (expected none, l1, l2 or encoded)");
}

AttentionActivation parse_activation(const std::string& name) {
  if (name == "sigmoid") return AttentionActivation::sigmoid;
  if (name == "tanh") return AttentionActivation::tanh;
  throw InputError("unknown attention activation '" + name + "'");
}

void validate(const ModelConfig& c) {
  if (c.word_dim == 0 || c.pos_dim == 0 || c.hidden == 0 || c.att_dim == 0 || c.ffn_dim == 0 ||
      c.enc_dim == 0 || c.max_len == 0) {
    throw InputError("model dimensions must be positive");
  }
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw InputError("dropout must be in [0, 1)");
  if (!(c.init_scale > 0.0)) throw InputError("init_scale must be positive");
}

bool apply_model_key(ModelConfig& c, const std::string& key, const std::string& value) {
  if (key == "task") c.task = parse_task(value);
  else if (key == "word_dim") c.word_dim = parse_count(key, value);
  else if (key == "pos_dim") c.pos_dim = parse_count(key, value);
  else if (key == "hidden") c.hidden = parse_count(key, value);
  else if (key == "att_dim") c.att_dim = parse_count(key, value);
  else if (key == "ffn_dim") c.ffn_dim = parse_count(key, value);
  else if (key == "enc_dim") c.enc_dim = parse_count(key, value);
  else if (key == "max_len") c.max_len = parse_count(key, value);
  else if (key == "attention") c.activation = parse_activation(value);
  else if (key == "dropout") c.dropout = parse_real(key, value);
  else if (key == "freeze_embeddings") c.freeze_embeddings = parse_flag(key, value);
  else if (key == "init_scale") c.init_scale = parse_real(key, value);
  else return false;
  return true;
}

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> to_pairs(const ModelConfig& c) {
  return {{"task", to_string(c.task)},
          {"word_dim", std::to_string(c.word_dim)},
          {"pos_dim", std::to_string(c.pos_dim)},
          {"hidden", std::to_string(c.hidden)},
          {"att_dim", std::to_string(c.att_dim)},
          {"ffn_dim", std::to_string(c.ffn_dim)},
          {"enc_dim", std::to_string(c.enc_dim)},
          {"max_len", std::to_string(c.max_len)},
          {"attention", to_string(c.activation)},
          {"dropout", format_real(c.dropout)},
          {"freeze_embeddings", c.freeze_embeddings ? "true" : "false"},
          {"init_scale", format_real(c.init_scale)}};
}

std::vector<std::string> head_names(Task task) {
  if (task == Task::detection) return {"abusive"};
  return {kCategoryNames.begin(), kCategoryNames.end()};
}

EncodedComment encode_comment(const Comment& comment, const VocabPair& vocabs,
                              std::size_t max_len) {
  EncodedComment e;
  e.id = comment.id;
  e.abusive = comment.abusive;
  e.categories = comment.categories;
  e.sentence_instance = comment.sentence_instance;
  for (const auto& s : comment.sentences) {
    const std::size_t begin = e.words.size();
    for (const auto& t : s.tokens) {
      if (e.words.size() == max_len) break;
      e.words.push_back(vocabs.words.lookup(t.surface));
      e.tags.push_back(vocabs.tags.lookup(t.pos));
    }
    if (e.words.size() > begin) {
      e.sentence_spans.emplace_back(begin, e.words.size());
      e.sentence_abusive.push_back(s.abusive);
    }
  }
  if (e.words.empty()) throw InputError("comment \"" + comment.id + "\" has no tokens");
  e.ground = derive_ground_attention(comment, max_len);
  e.supervised = !comment.sentence_instance && e.ground.support > 0;
  return e;
}

std::vector<EncodedComment> encode_all(const std::vector<Comment>& comments,
                                       const VocabPair& vocabs, std::size_t max_len) {
  std::vector<EncodedComment> out;
  out.reserve(comments.size());
  for (const auto& c : comments) out.push_back(encode_comment(c, vocabs, max_len));
  return out;
}

std::array<double, kNumCategories> primary_weights(std::size_t primary) {
  if (primary >= kNumCategories) throw std::out_of_range("primary category out of range");
  std::array<double, kNumCategories> w;
  w.fill(0.1);
  w[primary] = 0.7;
  return w;
}

void check_weights(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("category weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("category weights must sum to 1, got " + format_real(total));
  }
}

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-scale, scale);
  return m;
}

void zero_row(Matrix& m, std::size_t r) {
  for (double& v : m.row_span(r)) v = 0.0;
}

}  // namespace

Model::Model(const ModelConfig& config, VocabPair vocabs, Rng& rng)
    : config_(config), vocabs_(std::move(vocabs)) {
  validate(config_);
  const double s = config_.init_scale;
  const std::size_t in = config_.word_dim + config_.pos_dim;
  const std::size_t h = config_.hidden;

  Matrix words = uniform_matrix(vocabs_.words.size(), config_.word_dim, s, rng);
  Matrix tags = uniform_matrix(vocabs_.tags.size(), config_.pos_dim, s, rng);
  zero_row(words, Vocab::kPad);
  zero_row(tags, Vocab::kPad);
  params_.add("embed.word", std::move(words)).frozen = config_.freeze_embeddings;
  params_.add("embed.pos", std::move(tags)).frozen = config_.freeze_embeddings;

  for (const char* dir : {"fwd", "bwd"}) {
    params_.add(std::string("lstm.") + dir + ".W", uniform_matrix(4 * h, in + h, s, rng));
    Matrix b(1, 4 * h);
    for (std::size_t j = h; j < 2 * h; ++j) b[j] = 1.0;  // forget gate
    params_.add(std::string("lstm.") + dir + ".b", std::move(b));
  }

  params_.add("att.W", uniform_matrix(config_.att_dim, 2 * h, s, rng));
  params_.add("att.b", Matrix(1, config_.att_dim));
  params_.add("att.u", uniform_matrix(1, config_.att_dim, s, rng));

  for (const char* side : {"G", "M"}) {
    params_.add(std::string("enc.") + side + ".W",
                uniform_matrix(config_.enc_dim, config_.max_len, s, rng));
    params_.add(std::string("enc.") + side + ".b", Matrix(1, config_.enc_dim));
  }

  const std::size_t f = config_.ffn_dim;
  for (const auto& name : head_names(config_.task)) {
    const std::string p = "head." + name + ".";
    params_.add(p + "W1", uniform_matrix(f, 2 * h, s, rng));
    params_.add(p + "b1", Matrix(1, f));
    params_.add(p + "W2", uniform_matrix(f, f, s, rng));
    params_.add(p + "b2", Matrix(1, f));
    params_.add(p + "W3", uniform_matrix(2, f, s, rng));
    params_.add(p + "b3", Matrix(1, 2));
  }
}

void Model::set_embeddings(const Matrix& words, const Matrix& tags) {
  Param& w = params_.at("embed.word");
  Param& t = params_.at("embed.pos");
  if (!words.same_shape(w.value) || !tags.same_shape(t.value)) {
    throw InputError("embedding tables have shapes " + words.shape_string() + " and " +
                     tags.shape_string() + ", expected " + w.value.shape_string() + " and " +
                     t.value.shape_string());
  }
  w.value = words;
  t.value = tags;
  zero_row(w.value, Vocab::kPad);
  zero_row(t.value, Vocab::kPad);
}

Var Model::leaf(Tape& tape, const std::string& name, bool trainable) const {
  Param& p = params_.at(name);
  if (trainable && !p.frozen) return tape.param(p);
  return tape.param(static_cast<const Param&>(p));
}

Var bilstm_forward(Tape& tape, Var x, Var w_fwd, Var b_fwd, Var w_bwd, Var b_bwd) {
  if (tape.value(x).rows() == 0) throw std::invalid_argument("bilstm_forward: empty sequence");
  Var fwd = ops::lstm(tape, x, w_fwd, b_fwd, false);
  Var bwd = ops::lstm(tape, x, w_bwd, b_bwd, true);
  return ops::concat_cols(tape, fwd, bwd);
}

Var attention_forward(Tape& tape, Var hidden, Var w_u, Var b_u, Var u, const Mask& mask,
                      AttentionActivation activation) {
  Var pre = ops::affine(tape, hidden, w_u, b_u);
  Var v = activation == AttentionActivation::sigmoid ? ops::sigmoid(tape, pre)
                                                     : ops::tanh(tape, pre);
  Var scores = ops::matmul_nt(tape, u, v);  // 1 x T
  return ops::softmax_masked(tape, scores, mask);
}

Var context_vector(Tape& tape, Var attention, Var hidden) {
  return ops::matmul(tape, attention, hidden);
}

Var head_forward(Tape& tape, Var z, Var w1, Var b1, Var w2, Var b2, Var w3, Var b3) {
  Var h1 = ops::sigmoid(tape, ops::affine(tape, z, w1, b1));
  Var h2 = ops::sigmoid(tape, ops::affine(tape, h1, w2, b2));
  return ops::softmax(tape, ops::affine(tape, h2, w3, b3));
}

Graph Model::build(Tape& tape, const EncodedComment& c, bool trainable, Rng* dropout_rng) const {
  if (c.words.empty()) throw std::invalid_argument("Model::build: empty comment");
  if (c.words.size() > config_.max_len) {
    throw std::invalid_argument("Model::build: comment longer than max_len");
  }
  Var words = ops::gather_rows(tape, leaf(tape, "embed.word", trainable), c.words);
  Var tags = ops::gather_rows(tape, leaf(tape, "embed.pos", trainable), c.tags);
  Var x = ops::concat_cols(tape, words, tags);

  Graph g;
  g.hidden = bilstm_forward(tape, x, leaf(tape, "lstm.fwd.W", trainable),
                            leaf(tape, "lstm.fwd.b", trainable),
                            leaf(tape, "lstm.bwd.W", trainable),
                            leaf(tape, "lstm.bwd.b", trainable));
  const Mask mask(c.words.size(), 1);
  g.attention = attention_forward(tape, g.hidden, leaf(tape, "att.W", trainable),
                                  leaf(tape, "att.b", trainable), leaf(tape, "att.u", trainable),
                                  mask, config_.activation);
  g.context = context_vector(tape, g.attention, g.hidden);

  Var z = g.context;
  if (dropout_rng && config_.dropout > 0.0) z = ops::dropout(tape, z, config_.dropout, *dropout_rng);
  for (const auto& name : head_names(config_.task)) {
    const std::string p = "head." + name + ".";
    g.outputs.push_back(head_forward(
        tape, z, leaf(tape, p + "W1", trainable), leaf(tape, p + "b1", trainable),
        leaf(tape, p + "W2", trainable), leaf(tape, p + "b2", trainable),
        leaf(tape, p + "W3", trainable), leaf(tape, p + "b3", trainable)));
  }
  return g;
}

Var attention_loss_l1(Tape& tape, Var model, Var ground) {
  return ops::sum(tape, ops::abs(tape, ops::sub(tape, model, ground)));
}

Var attention_loss_l2(Tape& tape, Var model, Var ground) {
  return ops::sum(tape, ops::square(tape, ops::sub(tape, model, ground)));
}

Var attention_loss_encoded(Tape& tape, Var model, Var ground, Var w_g, Var b_g, Var w_m,
                           Var b_m) {
  Var enc_g = ops::tanh(tape, ops::affine(tape, ground, w_g, b_g));
  Var enc_m = ops::tanh(tape, ops::affine(tape, model, w_m, b_m));
  return ops::scale(tape, ops::dot(tape, enc_g, enc_m), -1.0);
}

Var Model::build_loss(Tape& tape, const Graph& graph, const EncodedComment& c,
                      const LossSpec& spec, bool trainable) const {
  Var loss;
  if (config_.task == Task::detection) {
    loss = ops::cross_entropy(tape, graph.outputs.at(0), c.abusive ? 1 : 0);
  } else {
    check_weights(spec.weights);
    bool first = true;
    for (std::size_t k = 0; k < kNumCategories; ++k) {
      if (spec.weights[k] == 0.0) continue;
      Var term = ops::scale(tape, ops::cross_entropy(tape, graph.outputs.at(k),
                                                     c.categories[k] ? 1 : 0),
                            spec.weights[k]);
      loss = first ? term : ops::add(tape, loss, term);
      first = false;
    }
  }
  if (spec.variant == LossVariant::none || !c.supervised || spec.beta == 0.0) return loss;

  Var model = ops::pad_cols(tape, graph.attention, config_.max_len);
  Var ground = tape.constant(Matrix::row(c.ground.weights));
  Var att;
  switch (spec.variant) {
    case LossVariant::l1: att = attention_loss_l1(tape, model, ground); break;
    case LossVariant::l2: att = attention_loss_l2(tape, model, ground); break;
    case LossVariant::encoded:
      att = attention_loss_encoded(tape, model, ground, leaf(tape, "enc.G.W", trainable),
                                   leaf(tape, "enc.G.b", trainable),
                                   leaf(tape, "enc.M.W", trainable),
                                   leaf(tape, "enc.M.b", trainable));
      break;
    case LossVariant::none: break;
  }
  return ops::add(tape, loss, ops::scale(tape, att, spec.beta));
}

ForwardTrace Model::forward(const EncodedComment& c) const {
  Tape tape;
  const Graph g = build(tape, c, false);
  ForwardTrace trace;
  const Matrix& h = tape.value(g.hidden);
  trace.hidden = Matrix(config_.max_len, h.cols());
  std::copy(h.values().begin(), h.values().end(), trace.hidden.values().begin());
  const Matrix& a = tape.value(g.attention);
  trace.attention.assign(config_.max_len, 0.0);
  std::copy(a.values().begin(), a.values().end(), trace.attention.begin());
  const Matrix& z = tape.value(g.context);
  trace.context.assign(z.values().begin(), z.values().end());
  for (Var y : g.outputs) {
    const Matrix& p = tape.value(y);
    trace.outputs.push_back({p[0], p[1]});
  }
  return trace;
}

double Model::score(const EncodedComment& c, std::size_t head) const {
  Tape tape;
  const Graph g = build(tape, c, false);
  return tape.value(g.outputs.at(head))[1];
}

double attention_loss_l1(std::span<const double> model, std::span<const double> ground) {
  if (model.size() != ground.size()) throw std::invalid_argument("attention_loss_l1: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) s += std::abs(model[i] - ground[i]);
  return s;
}

double attention_loss_l2(std::span<const double> model, std::span<const double> ground) {
  if (model.size() != ground.size()) throw std::invalid_argument("attention_loss_l2: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) s += (model[i] - ground[i]) * (model[i] - ground[i]);
  return s;
}

namespace {

std::vector<double> encode_attention(std::span<const double> a, const Matrix& w, const Matrix& b) {
  if (w.cols() != a.size() || b.size() != w.rows()) {
    throw std::invalid_argument("attention encoder shape mismatch");
  }
  std::vector<double> out(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    double s = b[r];
    for (std::size_t j = 0; j < a.size(); ++j) s += w(r, j) * a[j];
    out[r] = std::tanh(s);
  }
  return out;
}

}  // namespace

double attention_loss_encoded(std::span<const double> model, std::span<const double> ground,
                              const Matrix& w_g, const Matrix& b_g, const Matrix& w_m,
                              const Matrix& b_m) {
  const auto g = encode_attention(ground, w_g, b_g);
  const auto m = encode_attention(model, w_m, b_m);
  if (g.size() != m.size()) throw std::invalid_argument("attention encoders differ in width");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * m[i];
  return -s;
}

double total_loss_detection(std::span<const double> predicted, bool label, double attention_loss,
                            double beta) {
  const std::array<double, 2> target = {label ? 0.0 : 1.0, label ? 1.0 : 0.0};
  return cross_entropy(predicted, target) + beta * attention_loss;
}

double total_loss_categorization(std::span<const std::array<double, 2>> predicted,
                                 std::span<const bool> labels, std::span<const double> weights,
                                 double attention_loss, double beta) {
  if (predicted.size() != labels.size() || predicted.size() != weights.size()) {
    throw std::invalid_argument("total_loss_categorization: head count mismatch");
  }
  check_weights(weights);
  double loss = 0.0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    loss += weights[k] * total_loss_detection(predicted[k], labels[k], 0.0, 0.0);
  }
  return loss + beta * attention_loss;
}

// Checkpoint container.

namespace {

constexpr char kMagic[8] = {'H', 'E', 'T', 'A', 'T', 'T', 'N', '\x01'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_double(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

struct Reader {
  std::istream& in;
  std::string where;

  [[noreturn]] void fail(const std::string& what) const {
    throw InputError(where + ": " + what);
  }
  std::uint64_t u64() {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) fail("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ull << 32)) fail("corrupt string length");
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) fail("truncated checkpoint");
    return s;
  }
  double real() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
};

void put_vocab(std::ostream& out, const Vocab& vocab) {
  const auto tokens = vocab.regular_tokens();
  put_u64(out, tokens.size());
  for (const auto& t : tokens) put_string(out, t);
}

Vocab get_vocab(Reader& r) {
  const std::uint64_t n = r.u64();
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str());
  return Vocab(tokens);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_u64(out, kFormatVersion);
  const auto pairs = to_pairs(model.config());
  put_u64(out, pairs.size());
  for (const auto& [k, v] : pairs) {
    put_string(out, k);
    put_string(out, v);
  }
  put_vocab(out, model.vocabs().words);
  put_vocab(out, model.vocabs().tags);
  put_string(out, metadata);
  put_u64(out, model.params().size());
  for (const auto& [name, p] : model.params()) {
    put_string(out, name);
    put_u64(out, p.value.rows());
    put_u64(out, p.value.cols());
    for (double v : p.value.values()) put_double(out, v);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  Reader r{in, path.string()};
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    r.fail("not a checkpoint file");
  }
  if (r.u64() != kFormatVersion) r.fail("unsupported checkpoint version");

  ModelConfig config;
  const std::uint64_t n_pairs = r.u64();
  for (std::uint64_t i = 0; i < n_pairs; ++i) {
    const std::string key = r.str();
    const std::string value = r.str();
    if (!apply_model_key(config, key, value)) r.fail("unknown config key '" + key + "'");
  }
  VocabPair vocabs{get_vocab(r), get_vocab(r)};
  LoadedCheckpoint out;
  out.metadata = r.str();

  Rng rng(0);
  out.model = Model(config, std::move(vocabs), rng);
  const std::uint64_t n_params = r.u64();
  if (n_params != out.model.params().size()) r.fail("parameter count mismatch");
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = r.str();
    if (!out.model.params().contains(name)) r.fail("unexpected parameter '" + name + "'");
    Param& p = out.model.params().at(name);
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != p.value.rows() || cols != p.value.cols()) r.fail("shape mismatch for " + name);
    for (double& v : p.value.values()) v = r.real();
  }
  return out;
}

}  // namespace hetattn
