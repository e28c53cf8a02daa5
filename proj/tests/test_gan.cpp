#include "plcml/gan.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "plcml/rng.hpp"

using namespace plcml;

namespace {

// Small synthetic corpus: smooth sloped curves with per-row offsets, kept
// well inside [-90, -10] dB.
ChannelCorpus toy_corpus(std::size_t n, std::size_t bins, std::uint64_t seed) {
  ChannelCorpus corpus;
  corpus.grid = FrequencyGrid{2e6, 86e6, bins};
  corpus.responses = Tensor2(n, bins);
  Rng rng(seed);
  for (std::size_t r = 0; r < n; ++r) {
    const double base = rng.uniform(-45.0, -25.0);
    const double slope = rng.uniform(-12.0, -4.0);
    for (std::size_t b = 0; b < bins; ++b) {
      const double x = static_cast<double>(b) / static_cast<double>(bins - 1);
      corpus.responses(r, b) = base + slope * x + rng.normal(0.0, 0.5);
    }
  }
  return corpus;
}

}  // namespace

TEST_CASE("half-probability critic scores the game at -log 4") {
  MlpModel d = make_mlp({8, 1}, {Activation::Sigmoid}, 1);
  for (auto& v : d.layers[0].weights.data) v = 0.0;
  d.layers[0].biases[0] = 0.0;  // sigmoid(0) = 1/2 for every input

  Rng rng(2);
  Tensor2 real(5, 8), fake(7, 8);
  for (auto& v : real.data) v = rng.normal();
  for (auto& v : fake.data) v = rng.normal();
  CHECK(gan_value(d, real, fake) == doctest::Approx(-std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("discriminator separates real curves from flat fakes") {
  const ChannelCorpus corpus = toy_corpus(256, 24, 5);
  // Normalize like training does and hand-train only the critic.
  const double lo = *std::min_element(corpus.responses.data.begin(),
                                      corpus.responses.data.end());
  const double hi = *std::max_element(corpus.responses.data.begin(),
                                      corpus.responses.data.end());
  const double half = 0.5 * (hi - lo);
  auto norm = [&](double db) { return (db - lo) / half - 1.0; };

  MlpModel d = make_mlp({24, 16, 1}, {Activation::Relu, Activation::Sigmoid}, 7);
  TrainConfig opt;
  opt.learning_rate = 2e-3;
  AdamState state;
  state.init(d);

  Rng rng(8);
  const std::size_t batch = 16;
  for (std::size_t epoch = 0; epoch < 200; ++epoch) {
    Tensor2 joint(2 * batch, 24);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto row = static_cast<std::size_t>(rng.below(corpus.responses.rows));
      for (std::size_t c = 0; c < 24; ++c) {
        joint(r, c) = norm(corpus.responses(row, c));
        joint(batch + r, c) = norm(0.0);  // constant 0 dB impostor
      }
    }
    const ForwardPass pass = forward(d, joint);
    Tensor2 grad(2 * batch, 1);
    for (std::size_t r = 0; r < batch; ++r) {
      const double pr = std::clamp(pass.output()(r, 0), 1e-12, 1.0 - 1e-12);
      const double pf = std::clamp(pass.output()(batch + r, 0), 1e-12, 1.0 - 1e-12);
      grad(r, 0) = -1.0 / (static_cast<double>(batch) * pr);
      grad(batch + r, 0) = 1.0 / (static_cast<double>(batch) * (1.0 - pf));
    }
    apply_adam(d, backward_signal(d, pass, grad), state, opt);
  }

  std::size_t correct = 0, total = 0;
  Tensor2 probe(1, 24);
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 24; ++c) probe(0, c) = norm(corpus.responses(r, c));
    correct += forward(d, probe).output()(0, 0) > 0.5 ? 1 : 0;
    for (std::size_t c = 0; c < 24; ++c) probe(0, c) = norm(0.0);
    correct += forward(d, probe).output()(0, 0) < 0.5 ? 1 : 0;
    total += 2;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.9);
}

TEST_CASE("generator gradient matches finite differences with a frozen critic") {
  const std::size_t latent = 3, bins = 6, batch = 4;
  MlpModel g = make_mlp({latent, 10, bins}, {Activation::Relu, Activation::Tanh}, 11);
  const MlpModel d =
      make_mlp({bins, 8, 1}, {Activation::Relu, Activation::Sigmoid}, 12);

  Rng rng(13);
  Tensor2 z(batch, latent);
  for (auto& v : z.data) v = rng.normal();

  auto g_loss = [&]() {
    const ForwardPass gp = forward(g, z);
    const ForwardPass dp = forward(d, gp.output());
    double loss = 0.0;
    for (std::size_t r = 0; r < batch; ++r)
      loss -= std::log(std::clamp(dp.output()(r, 0), 1e-12, 1.0 - 1e-12)) /
              static_cast<double>(batch);
    return loss;
  };

  const ForwardPass gp = forward(g, z);
  const ForwardPass dp = forward(d, gp.output());
  Tensor2 grad(batch, 1);
  for (std::size_t r = 0; r < batch; ++r)
    grad(r, 0) = -1.0 / (static_cast<double>(batch) *
                         std::clamp(dp.output()(r, 0), 1e-12, 1.0 - 1e-12));
  const Gradients d_back = backward_signal(d, dp, grad);
  const Gradients analytic = backward_signal(g, gp, d_back.input);

  double worst = 0.0;
  const double eps = 1e-5;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    auto probe = [&](double& slot, double a) {
      const double keep = slot;
      slot = keep + eps;
      const double up = g_loss();
      slot = keep - eps;
      const double dn = g_loss();
      slot = keep;
      const double numeric = (up - dn) / (2.0 * eps);
      worst = std::max(worst, std::abs(a - numeric) /
                                  std::max({std::abs(a), std::abs(numeric), 1e-7}));
    };
    for (std::size_t i = 0; i < g.layers[l].weights.data.size(); ++i)
      probe(g.layers[l].weights.data[i], analytic.weights[l].data[i]);
    for (std::size_t i = 0; i < g.layers[l].biases.size(); ++i)
      probe(g.layers[l].biases[i], analytic.biases[l][i]);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adversarial training tracks the corpus statistics") {
  const ChannelCorpus corpus = toy_corpus(400, 24, 21);
  GanConfig cfg;
  cfg.epochs = 120;
  cfg.batch_size = 32;
  cfg.seed = 4;
  const GanSystem sys = gan_train(corpus, cfg);

  CHECK(sys.history.d_value.size() == 120);
  CHECK(sys.history.g_loss.size() == 120);
  CHECK_FALSE(sys.mode_collapse);

  const Tensor2 gen = gan_generate(sys, 200, 77);
  CHECK(gen.rows == 200);
  CHECK(gen.cols == 24);
  for (const double v : gen.data) {
    CHECK(v >= sys.db_lo);
    CHECK(v <= sys.db_hi);
    CHECK(v >= -90.0);
    CHECK(v <= -10.0);
  }

  const GanReport rep = evaluate_gan_samples(gen, corpus);
  CHECK(rep.bins_within_5db >= (gen.cols * 9) / 10);
  CHECK(rep.ks_avg_gain < 1.0);
  CHECK_FALSE(rep.to_text().empty());
}

TEST_CASE("gan training is deterministic and leaves the corpus alone") {
  const ChannelCorpus corpus = toy_corpus(330, 12, 31);
  const Tensor2 before = corpus.responses;
  GanConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.discriminator_hidden = {16};
  cfg.generator_hidden = {16, 16};
  cfg.seed = 9;
  const GanSystem a = gan_train(corpus, cfg);
  const GanSystem b = gan_train(corpus, cfg);
  CHECK(a.history.d_value == b.history.d_value);
  CHECK(a.history.g_loss == b.history.g_loss);
  CHECK(corpus.responses.data == before.data);

  const Tensor2 ga = gan_generate(a, 5, 101);
  const Tensor2 gb = gan_generate(b, 5, 101);
  CHECK(ga.data == gb.data);
  const Tensor2 gc = gan_generate(a, 5, 102);
  CHECK(ga.data != gc.data);

  // Discriminator outputs are probabilities; a saturated sigmoid may round
  // to the endpoints in double precision, which the training loss clamps.
  const ForwardPass dp = forward(a.discriminator, ga);
  for (std::size_t r = 0; r < dp.output().rows; ++r) {
    CHECK(dp.output()(r, 0) >= 0.0);
    CHECK(dp.output()(r, 0) <= 1.0);
  }
}

TEST_CASE("self-comparison report is exactly clean") {
  const ChannelCorpus corpus = toy_corpus(64, 10, 41);
  const GanReport rep = evaluate_gan_samples(corpus.responses, corpus);
  for (const double v : rep.mean_err_db) CHECK(v == 0.0);
  for (const double v : rep.std_ratio) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.ks_avg_gain == 0.0);
  CHECK(rep.bins_within_5db == 10);
}

TEST_CASE("ks statistic oracle") {
  // Disjoint supports -> 1; identical samples -> 0.
  CHECK(ks_statistic({1.0, 2.0, 3.0}, {10.0, 11.0}) == 1.0);
  CHECK(ks_statistic({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  // Hand case: F1 jumps at {0,1}, F2 at {0.5}; sup gap is 1/2 twice.
  CHECK(ks_statistic({0.0, 1.0}, {0.5}) == doctest::Approx(0.5));
  CHECK_THROWS(ks_statistic({}, {1.0}));
}

TEST_CASE("gan input validation") {
  const ChannelCorpus corpus = toy_corpus(100, 8, 51);
  GanConfig cfg;
  cfg.batch_size = 32;  // 100 < 10*32
  CHECK_THROWS(gan_train(corpus, cfg));
  cfg.batch_size = 8;
  cfg.latent_dim = 0;
  CHECK_THROWS(gan_train(corpus, cfg));
  cfg.latent_dim = 4;
  cfg.lr_generator = 0.0;
  CHECK_THROWS(gan_train(corpus, cfg));

  ChannelCorpus flat = corpus;
  for (auto& v : flat.responses.data) v = -30.0;
  cfg.lr_generator = 2e-4;
  CHECK_THROWS(gan_train(flat, cfg));

  const Tensor2 wrong(4, 9);
  CHECK_THROWS(evaluate_gan_samples(wrong, corpus));
}
