#include <benchmark/benchmark.h>

#include "reentry/model.hpp"
#include "reentry/ops.hpp"
#include "reentry/synthetic.hpp"
#include "reentry/training.hpp"
#include "reentry/vocabulary.hpp"

namespace reentry {
namespace {

ad::Tensor filled(std::size_t r, std::size_t c, bool grad) {
  Rng rng(r * 31 + c);
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return ad::Tensor::from({r, c}, std::move(v), grad);
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Tensor a = filled(n, n, true), b = filled(n, n, true);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Tensor out = ad::sum(tape, ad::matmul(tape, a, b));
    tape.backward(out);
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64)->Arg(128);

void BM_MaskedSoftmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ad::Tensor x = filled(n, n, false);
  const ad::Mask mask(n, true);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(ad::masked_softmax(tape, x, mask).values().data());
  }
}
BENCHMARK(BM_MaskedSoftmax)->Arg(8)->Arg(64);

// One instance with 8 turns of 12 tokens and 8 history messages.
ModelInput sample_input(std::size_t vocab) {
  Rng rng(3);
  ModelInput in;
  auto tokens = [&] {
    std::vector<int> t(12);
    for (int& id : t) id = rng.between(2, static_cast<int>(vocab) - 1);
    return t;
  };
  for (int i = 0; i < 8; ++i) {
    in.context.push_back(tokens());
    in.aux.push_back({(i + 1) / 8.0, i / 8.0, 0.5, i % 2 ? 1.0 : 0.0});
    in.history.push_back(tokens());
  }
  return in;
}

ModelConfig bench_config(int encoder, int interaction) {
  ModelConfig c = ModelConfig::toy();
  c.encoder = static_cast<EncoderKind>(encoder);
  c.interaction = static_cast<InteractionKind>(interaction);
  return c;
}

void BM_ForwardBackward(benchmark::State& state) {
  const ModelConfig config = bench_config(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  Model model(config, 200, 1);
  const ModelInput in = sample_input(200);
  for (auto _ : state) {
    ad::Tape tape;
    const ad::Tensor p = model.forward(tape, in).probability;
    tape.backward(weighted_bce(tape, p, 1, config.lambda, config.mu));
    model.parameters().zero_grad();
  }
  state.SetLabel(to_string(config.encoder) + "+" + to_string(config.interaction));
}
BENCHMARK(BM_ForwardBackward)
    ->ArgsProduct({{static_cast<int>(EncoderKind::avg_embed), static_cast<int>(EncoderKind::cnn),
                    static_cast<int>(EncoderKind::bilstm)},
                   {static_cast<int>(InteractionKind::concat), static_cast<int>(InteractionKind::attention),
                    static_cast<int>(InteractionKind::memnet), static_cast<int>(InteractionKind::biattention)}});

void BM_TrainEpoch(benchmark::State& state) {
  SyntheticConfig sc;
  sc.n_users = 30;
  sc.n_convs = 100;
  const Corpus corpus = make_corpus(generate_synthetic(sc));
  const Vocabulary vocab = build_vocabulary(corpus.conversations);
  ModelConfig config = bench_config(static_cast<int>(EncoderKind::bilstm), static_cast<int>(InteractionKind::biattention));
  config.max_epochs = 1;
  const Dataset data = make_dataset(build_instances(corpus, 1), vocab, config.limits);
  for (auto _ : state) {
    Model model(config, vocab.size(), 1);
    benchmark::DoNotOptimize(train(model, data, data).best_dev_f1);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace reentry

BENCHMARK_MAIN();
