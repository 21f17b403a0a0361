#include <benchmark/benchmark.h>

#include "hetattn/embed.hpp"
#include "hetattn/eval.hpp"
#include "hetattn/model.hpp"
#include "hetattn/svmbase.hpp"
#include "hetattn/train.hpp"

using namespace hetattn;

namespace {

const std::vector<Comment>& corpus() {
  static const std::vector<Comment> data = [] {
    SynthConfig s;
    s.n_comments = 500;
    return synth_corpus(s);
  }();
  return data;
}

ModelConfig bench_config(std::size_t hidden) {
  ModelConfig c;
  c.word_dim = 32;
  c.pos_dim = 8;
  c.hidden = hidden;
  c.att_dim = hidden;
  c.ffn_dim = hidden;
  c.enc_dim = hidden;
  c.max_len = 72;
  return c;
}

void BM_ForwardBackward(benchmark::State& state) {
  const VocabPair vocabs = build_vocab(corpus(), 2);
  Rng rng(1);
  Model model(bench_config(static_cast<std::size_t>(state.range(0))), vocabs, rng);
  const auto encoded = encode_all(corpus(), vocabs, 72);
  LossSpec spec;
  spec.variant = LossVariant::encoded;
  std::size_t i = 0, tokens = 0;
  for (auto _ : state) {
    const EncodedComment& e = encoded[i++ % encoded.size()];
    Tape tape;
    const Graph g = model.build(tape, e, true);
    tape.backward(model.build_loss(tape, g, e, spec));
    tokens += e.words.size();
  }
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(tokens), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64);

void BM_Forward(benchmark::State& state) {
  const VocabPair vocabs = build_vocab(corpus(), 2);
  Rng rng(1);
  Model model(bench_config(64), vocabs, rng);
  const auto encoded = encode_all(corpus(), vocabs, 72);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(encoded[i++ % encoded.size()]));
}
BENCHMARK(BM_Forward);

void BM_CbowEpoch(benchmark::State& state) {
  const VocabPair vocabs = build_vocab(corpus(), 1);
  std::vector<std::vector<std::size_t>> seqs;
  for (const auto& c : corpus()) seqs.push_back(vocabs.words.encode(c.surfaces()));
  CbowOptions opt;
  opt.dim = 50;
  opt.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_cbow(seqs, vocabs.words.size(), opt));
}
BENCHMARK(BM_CbowEpoch)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(3);
  std::vector<ScoredExample> ex(static_cast<std::size_t>(state.range(0)));
  for (auto& e : ex) e = {"", rng.bernoulli(0.3), rng.uniform()};
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_auc(ex));
    benchmark::DoNotOptimize(pr_auc(ex));
  }
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_SvmFeaturesAndTrain(benchmark::State& state) {
  const NgramVocab vocab = NgramVocab::build(corpus());
  for (auto _ : state) {
    std::vector<SparseVec> x;
    std::vector<bool> y;
    for (const auto& c : corpus()) {
      x.push_back(extract_features(c, vocab, nullptr, false));
      y.push_back(c.abusive);
    }
    benchmark::DoNotOptimize(train_svm(x, y));
  }
}
BENCHMARK(BM_SvmFeaturesAndTrain)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
