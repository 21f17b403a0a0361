#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"

#include "hetattn/grad_check.hpp"
#include "hetattn/model.hpp"
#include "test_support.hpp"

using namespace hetattn;
using testutil::random_matrix;

namespace {

ModelConfig small_config(Task task = Task::detection) {
  ModelConfig c;
  c.task = task;
  c.word_dim = 8;
  c.pos_dim = 4;
  c.hidden = 6;
  c.att_dim = 5;
  c.ffn_dim = 5;
  c.enc_dim = 5;
  c.max_len = 16;
  return c;
}

VocabPair small_vocab() {
  std::vector<std::string> words;
  for (int i = 0; i < 12; ++i) words.push_back("w" + std::to_string(i));
  return {Vocab(words), Vocab({"N", "V", "A"})};
}

Comment seven_token_comment() {
  Comment c = testutil::make_comment("c", {"w1 w2 w3", "!w4 w5 zz w7"}, true);
  c.categories = {true, false, true, false};
  for (auto& s : c.sentences)
    for (std::size_t i = 0; i < s.tokens.size(); ++i) s.tokens[i].pos = i % 2 ? "V" : "A";
  return c;
}

// Draws every parameter from [-1, 1] so gradients are well away from zero.
Model random_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Model m(cfg, small_vocab(), rng);
  for (auto& [name, p] : m.params()) {
    for (double& v : p.value.values()) v = rng.uniform(-1.0, 1.0);
  }
  return m;
}

GradCheckResult model_grad_check(Model& model, const EncodedComment& e, const LossSpec& spec) {
  auto builder = [&](Tape& t, ParamStore&) {
    const Graph g = model.build(t, e, true);
    return model.build_loss(t, g, e, spec);
  };
  return grad_check(builder, model.params());
}

// Tiny gradients (|g| below ~1e-7) cannot meet a relative tolerance under
// central differences in double precision, so those are held to an absolute
// bound instead.
void check_model_gradients(Model& model, const EncodedComment& e, const LossSpec& spec) {
  const GradCheckResult r = model_grad_check(model, e, spec);
  INFO(to_string(spec.variant), " worst ", r.worst_param, "[", r.worst_index, "] ", r.analytic, " vs ", r.numeric);
  CHECK(r.max_relative_error_large < 1e-4);
  CHECK(r.max_absolute_error < 1e-9);
  CHECK(r.entries_checked == model.params().total_entries());
}

}  // namespace

TEST_CASE("bilstm with zero weights yields zero states") {
  Rng rng(1);
  Tape t;
  Var x = t.constant(random_matrix(5, 12, rng));
  Var w = t.constant(Matrix(24, 18));
  Var b = t.constant(Matrix(1, 24));
  const Matrix& h = t.value(bilstm_forward(t, x, w, b, w, b));
  CHECK(h.rows() == 5);
  CHECK(h.cols() == 12);
  for (double v : h.values()) CHECK(v == 0.0);
  CHECK_THROWS(bilstm_forward(t, t.constant(Matrix(0, 12)), w, b, w, b));
}

TEST_CASE("bilstm output width is 2H and gradients match finite differences") {
  Rng rng(2);
  ParamStore ps;
  ps.add("x", random_matrix(5, 4, rng));
  ps.add("wf", random_matrix(12, 7, rng));
  ps.add("bf", random_matrix(1, 12, rng));
  ps.add("wb", random_matrix(12, 7, rng));
  ps.add("bb", random_matrix(1, 12, rng));
  auto f = [](Tape& t, ParamStore& p) {
    return ops::sum(t, bilstm_forward(t, t.param(p.at("x")), t.param(p.at("wf")), t.param(p.at("bf")),
                                      t.param(p.at("wb")), t.param(p.at("bb"))));
  };
  Tape t;
  CHECK(t.value(bilstm_forward(t, t.param(ps.at("x")), t.param(ps.at("wf")), t.param(ps.at("bf")),
                               t.param(ps.at("wb")), t.param(ps.at("bb"))))
            .cols() == 6);
  CHECK(grad_check(f, ps).max_relative_error < 1e-4);

  Tape t64;
  Var x = t64.constant(random_matrix(3, 10, rng));
  Var w = t64.constant(random_matrix(256, 74, rng, -0.1, 0.1));
  Var b = t64.constant(Matrix(1, 256));
  CHECK(t64.value(bilstm_forward(t64, x, w, b, w, b)).cols() == 128);
}

TEST_CASE("attention matches a straight-line evaluation") {
  Rng rng(3);
  for (auto act : {AttentionActivation::sigmoid, AttentionActivation::tanh}) {
    const Matrix h = random_matrix(4, 6, rng);
    const Matrix w = random_matrix(5, 6, rng);
    const Matrix b = random_matrix(1, 5, rng);
    const Matrix u = random_matrix(1, 5, rng);
    Tape t;
    const Matrix a = t.value(attention_forward(t, t.constant(h), t.constant(w), t.constant(b),
                                               t.constant(u), Mask(4, 1), act));
    std::vector<double> scores(4);
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        double pre = b[k];
        for (std::size_t j = 0; j < 6; ++j) pre += w(k, j) * h(r, j);
        const double v = act == AttentionActivation::sigmoid ? 1.0 / (1.0 + std::exp(-pre)) : std::tanh(pre);
        s += u[k] * v;
      }
      scores[r] = std::exp(s);
    }
    const double z = std::accumulate(scores.begin(), scores.end(), 0.0);
    for (std::size_t r = 0; r < 4; ++r) CHECK(a[r] == doctest::Approx(scores[r] / z).epsilon(1e-12));
  }
}

TEST_CASE("attention degenerate cases") {
  Rng rng(4);
  const Matrix w = random_matrix(5, 6, rng);
  const Matrix b = random_matrix(1, 5, rng);
  Tape t;
  // u = 0 -> uniform.
  Matrix a = t.value(attention_forward(t, t.constant(random_matrix(3, 6, rng)), t.constant(w),
                                       t.constant(b), t.constant(Matrix(1, 5)), Mask(3, 1)));
  for (double v : a.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
  // Identical rows -> uniform.
  Matrix same(4, 6);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 6; ++j) same(r, j) = 0.1 * static_cast<double>(j);
  a = t.value(attention_forward(t, t.constant(same), t.constant(w), t.constant(b),
                                t.constant(random_matrix(1, 5, rng)), Mask(4, 1)));
  for (double v : a.values()) CHECK(v == doctest::Approx(0.25));
  CHECK_THROWS(attention_forward(t, t.constant(same), t.constant(w), t.constant(b),
                                 t.constant(Matrix(1, 5)), Mask(4, 0)));
}

TEST_CASE("context vector") {
  Tape t;
  Var a = t.constant(Matrix::row({0.5, 0.5}));
  Var h = t.constant(Matrix(2, 2, std::vector<double>{1, 0, 0, 1}));
  const Matrix& z = t.value(context_vector(t, a, h));
  CHECK(z[0] == 0.5);
  CHECK(z[1] == 0.5);
  Rng rng(5);
  const Matrix hs = random_matrix(3, 4, rng);
  const Matrix& zk = t.value(context_vector(t, t.constant(Matrix::row({0, 1, 0})), t.constant(hs)));
  for (std::size_t j = 0; j < 4; ++j) CHECK(zk[j] == hs(1, j));
}

TEST_CASE("head forward normalizes and differentiates") {
  Rng rng(6);
  Tape t;
  Var z = t.constant(random_matrix(1, 6, rng));
  auto c = [&](std::size_t r, std::size_t cc) { return t.constant(random_matrix(r, cc, rng)); };
  const Matrix y = t.value(head_forward(t, z, c(5, 6), c(1, 5), c(5, 5), c(1, 5), c(2, 5), c(1, 2)));
  CHECK(y[0] + y[1] == doctest::Approx(1.0).epsilon(1e-12));
  const Matrix y0 = t.value(head_forward(t, z, c(5, 6), c(1, 5), c(5, 5), c(1, 5),
                                         t.constant(Matrix(2, 5)), t.constant(Matrix(1, 2))));
  CHECK(y0[0] == 0.5);
  CHECK(y0[1] == 0.5);

  ParamStore ps;
  ps.add("z", random_matrix(1, 6, rng));
  for (auto [n, r, cc] : {std::tuple{"w1", 5, 6}, {"b1", 1, 5}, {"w2", 5, 5}, {"b2", 1, 5}, {"w3", 2, 5}, {"b3", 1, 2}})
    ps.add(n, random_matrix(r, cc, rng));
  auto f = [](Tape& tt, ParamStore& p) {
    auto v = [&](const char* n) { return tt.param(p.at(n)); };
    return ops::cross_entropy(tt, head_forward(tt, v("z"), v("w1"), v("b1"), v("w2"), v("b2"), v("w3"), v("b3")), 1);
  };
  CHECK(grad_check(f, ps).max_relative_error < 1e-4);
}

TEST_CASE("attention losses") {
  const std::vector<double> a = {1, 0}, g = {0.5, 0.5};
  CHECK(attention_loss_l1(a, a) == 0.0);
  CHECK(attention_loss_l1(a, g) == doctest::Approx(1.0));
  CHECK(attention_loss_l1(std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{0.5, 0.5, 0, 0}) ==
        doctest::Approx(1.0));
  CHECK(attention_loss_l2(a, a) == 0.0);
  CHECK(attention_loss_l2(a, g) == doctest::Approx(0.5));
  CHECK(attention_loss_l2(std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{0.5, 0.5, 0, 0}) ==
        doctest::Approx(0.25));

  const std::size_t L = 4, d = 3;
  const Matrix zw(d, L), zb(1, d);
  CHECK(attention_loss_encoded(a, g, Matrix(d, 2), zb, Matrix(d, 2), zb) == 0.0);
  Matrix bh(1, d);
  bh[0] = std::atanh(0.5);
  CHECK(attention_loss_encoded(std::vector<double>(L, 0.25), std::vector<double>(L, 0.25), zw, bh, zw, bh) ==
        doctest::Approx(-0.25));

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix wg = random_matrix(d, L, rng, -3, 3), bg = random_matrix(1, d, rng, -3, 3);
    const Matrix wm = random_matrix(d, L, rng, -3, 3), bm = random_matrix(1, d, rng, -3, 3);
    const Matrix am = random_matrix(1, L, rng, 0, 1), ag = random_matrix(1, L, rng, 0, 1);
    const double v = attention_loss_encoded(am.values(), ag.values(), wg, bg, wm, bm);
    CHECK(v >= -static_cast<double>(d));
    CHECK(v <= static_cast<double>(d));
    // Oracle: Eqs. (3)-(5) written out directly.
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double sg = bg[k], sm = bm[k];
      for (std::size_t j = 0; j < L; ++j) {
        sg += wg(k, j) * ag[j];
        sm += wm(k, j) * am[j];
      }
      dot += std::tanh(sg) * std::tanh(sm);
    }
    CHECK(v == doctest::Approx(-dot).epsilon(1e-12));
    // Tape form agrees.
    Tape t;
    const double tv = t.value(attention_loss_encoded(t, t.constant(am), t.constant(ag), t.constant(wg),
                                                     t.constant(bg), t.constant(wm), t.constant(bm)))[0];
    CHECK(tv == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("total losses") {
  const std::vector<double> p = {0.3, 0.7};
  const double lp = -std::log(0.7);
  CHECK(total_loss_detection(p, true, 5.0, 0.0) == doctest::Approx(lp));
  CHECK(total_loss_detection(p, true, 0.5, 0.2) == doctest::Approx(lp + 0.1));

  // Chosen so that the per-head cross entropies are 1.0, 0.2, 0.4, 0.4.
  const std::array<double, 4> ce = {1.0, 0.2, 0.4, 0.4};
  std::vector<std::array<double, 2>> heads;
  for (double v : ce) heads.push_back({1.0 - std::exp(-v), std::exp(-v)});
  const std::vector<bool> labels_v = {true, true, true, true};
  const bool labels[4] = {true, true, true, true};
  (void)labels_v;
  const auto w = primary_weights(0);
  CHECK(total_loss_categorization(heads, labels, w, 0.5, 0.2) == doctest::Approx(0.9));

  std::vector<std::array<double, 2>> same(4, {0.4, 0.6});
  const std::array<double, 4> any = {0.1, 0.2, 0.3, 0.4};
  CHECK(total_loss_categorization(same, labels, any, 0.0, 0.2) == doctest::Approx(-std::log(0.6)));
  const std::array<double, 4> one_hot = {0, 0, 1, 0};
  CHECK(total_loss_categorization(heads, labels, one_hot, 0.0, 0.0) == doctest::Approx(0.4));
  const std::array<double, 4> bad = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(total_loss_categorization(heads, labels, bad, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(check_weights(std::vector<double>{0.7, 0.1, 0.1, 0.1 + 1e-8}), std::invalid_argument);
  CHECK_NOTHROW(check_weights(std::vector<double>{0.7, 0.1, 0.1, 0.1}));
}

TEST_CASE("model gradients for every loss variant") {
  const EncodedComment e = encode_comment(seven_token_comment(), small_vocab(), 16);
  REQUIRE(e.words.size() == 7);
  REQUIRE(e.supervised);
  for (auto variant : {LossVariant::none, LossVariant::l1, LossVariant::l2, LossVariant::encoded}) {
    Model m = random_model(small_config(), 11);
    LossSpec spec;
    spec.variant = variant;
    check_model_gradients(m, e, spec);
  }
  Model cat = random_model(small_config(Task::categorization), 12);
  LossSpec spec;
  spec.variant = LossVariant::encoded;
  spec.weights = primary_weights(1);
  check_model_gradients(cat, e, spec);
}

TEST_CASE("forward trace invariants") {
  Rng rng(13);
  Model m(small_config(Task::categorization), small_vocab(), rng);
  const EncodedComment e = encode_comment(seven_token_comment(), m.vocabs(), 16);
  const ForwardTrace tr = m.forward(e);
  CHECK(tr.hidden.rows() == 16);
  CHECK(tr.hidden.cols() == 12);
  CHECK(tr.attention.size() == 16);
  CHECK(std::accumulate(tr.attention.begin(), tr.attention.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t i = 7; i < 16; ++i) {
    CHECK(tr.attention[i] == 0.0);
    for (double v : tr.hidden.row_span(i)) CHECK(v == 0.0);
  }
  CHECK(tr.context.size() == 12);
  CHECK(tr.outputs.size() == 4);
  for (const auto& y : tr.outputs) CHECK(y[0] + y[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero lstm parameters give uniform attention regardless of order") {
  Rng rng(14);
  Model m(small_config(), small_vocab(), rng);
  for (auto& [name, p] : m.params()) {
    if (name.rfind("lstm.", 0) == 0) p.value.fill(0.0);
  }
  Comment c = seven_token_comment();
  const auto fwd = m.forward(encode_comment(c, m.vocabs(), 16));
  std::reverse(c.sentences.begin(), c.sentences.end());
  const auto rev = m.forward(encode_comment(c, m.vocabs(), 16));
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(fwd.attention[i] == doctest::Approx(1.0 / 7.0));
    CHECK(rev.attention[i] == doctest::Approx(1.0 / 7.0));
  }
}

TEST_CASE("categorization heads are independent given z") {
  Model m = random_model(small_config(Task::categorization), 15);
  const EncodedComment e = encode_comment(seven_token_comment(), m.vocabs(), 16);
  const auto before = m.forward(e);
  // Swap the parameters of heads 0 and 2.
  for (const char* suffix : {"W1", "b1", "W2", "b2", "W3", "b3"}) {
    std::swap(m.params().at(std::string("head.gender.") + suffix).value,
              m.params().at(std::string("head.appearance.") + suffix).value);
  }
  const auto after = m.forward(e);
  CHECK(after.outputs[0] == before.outputs[2]);
  CHECK(after.outputs[2] == before.outputs[0]);
  CHECK(after.outputs[1] == before.outputs[1]);
}

TEST_CASE("attention loss is skipped without supervision") {
  Model m = random_model(small_config(), 16);
  Comment benign = testutil::make_comment("b", {"w1 w2", "w3"}, false);
  const EncodedComment e = encode_comment(benign, m.vocabs(), 16);
  CHECK_FALSE(e.supervised);
  LossSpec none, enc;
  enc.variant = LossVariant::encoded;
  Tape t1, t2;
  const double a = t1.value(m.build_loss(t1, m.build(t1, e, false), e, none, false))[0];
  const double b = t2.value(m.build_loss(t2, m.build(t2, e, false), e, enc, false))[0];
  CHECK(a == b);

  auto inst = explode_sentences({seven_token_comment()});
  CHECK_FALSE(encode_comment(inst[2], m.vocabs(), 16).supervised);
}

TEST_CASE("pad rows start at zero and checkpoint round trip is bitwise") {
  Rng rng(17);
  Model m(small_config(Task::categorization), small_vocab(), rng);
  for (double v : m.params().at("embed.word").value.row_span(0)) CHECK(v == 0.0);
  for (double v : m.params().at("lstm.fwd.b").value.values()) CHECK((v == 0.0 || v == 1.0));
  const auto path = std::filesystem::temp_directory_path() / "hetattn_model.ckpt";
  save_checkpoint(path, m, "note=1");
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.metadata == "note=1");
  CHECK(loaded.model.config().task == Task::categorization);
  CHECK(loaded.model.vocabs().words.regular_tokens() == m.vocabs().words.regular_tokens());
  for (const auto& [name, p] : m.params()) CHECK(loaded.model.params().at(name).value == p.value);
  const auto path2 = std::filesystem::temp_directory_path() / "hetattn_model2.ckpt";
  save_checkpoint(path2, loaded.model, "note=1");
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {}), b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent.ckpt"), InputError);
  std::ofstream(path2, std::ios::binary) << "garbage";
  CHECK_THROWS_AS(load_checkpoint(path2), InputError);
}
