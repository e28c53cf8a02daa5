#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "plcml/nn.hpp"
#include "plcml/rng.hpp"

using namespace plcml;

namespace {

Tensor2 random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor2 t(r, c);
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

Tensor2 one_hot_rows(const std::vector<std::size_t>& labels, std::size_t k) {
  Tensor2 t(labels.size(), k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) t(i, labels[i]) = 1.0;
  return t;
}

bool models_identical(const MlpModel& a, const MlpModel& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].activation != b.layers[l].activation) return false;
    if (a.layers[l].weights.data != b.layers[l].weights.data) return false;
    if (a.layers[l].biases != b.layers[l].biases) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("mse loss: zero at perfect prediction, matches per-sample oracle") {
  Rng rng(11);
  const Tensor2 t = random_tensor(7, 3, rng);
  CHECK(loss_value(t, t, LossKind::Mse) == 0.0);

  const Tensor2 p = random_tensor(7, 3, rng);
  double oracle = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      const double d = p(i, j) - t(i, j);
      row += d * d;
    }
    oracle += row;
  }
  oracle /= static_cast<double>(p.rows);
  CHECK(loss_value(p, t, LossKind::Mse) == doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("cross-entropy of a (0.5, 0.5) prediction against a one-hot row is ln 2") {
  Tensor2 p(1, 2);
  p(0, 0) = 0.5;
  p(0, 1) = 0.5;
  const Tensor2 y = one_hot_rows({0}, 2);
  CHECK(loss_value(p, y, LossKind::CrossEntropy) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("cross-entropy rejects non-one-hot targets") {
  Tensor2 p(1, 2, 0.5);
  Tensor2 y(1, 2);
  y(0, 0) = 0.3;
  y(0, 1) = 0.7;
  CHECK_THROWS_AS(loss_value(p, y, LossKind::CrossEntropy), std::invalid_argument);
  Tensor2 y2(1, 2, 1.0);  // two ones
  CHECK_THROWS_AS(loss_value(p, y2, LossKind::CrossEntropy), std::invalid_argument);
}

TEST_CASE("cross-entropy clamps tiny predictions instead of overflowing") {
  Tensor2 p(1, 2);
  p(0, 0) = 0.0;
  p(0, 1) = 1.0;
  const Tensor2 y = one_hot_rows({0}, 2);
  const double v = loss_value(p, y, LossKind::CrossEntropy);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("glorot init respects the fan-in/fan-out bound and zero biases") {
  const MlpModel m = make_mlp({9, 5, 2}, {Activation::Tanh, Activation::Identity}, 3);
  const double lim0 = std::sqrt(6.0 / (9 + 5));
  for (const double w : m.layers[0].weights.data) CHECK(std::abs(w) <= lim0);
  const double lim1 = std::sqrt(6.0 / (5 + 2));
  for (const double w : m.layers[1].weights.data) CHECK(std::abs(w) <= lim1);
  for (const auto& l : m.layers)
    for (const double b : l.biases) CHECK(b == 0.0);
}

TEST_CASE("softmax rows sum to one and stay in (0, 1)") {
  const MlpModel m = make_mlp({4, 6, 5}, {Activation::Relu, Activation::Softmax}, 7);
  Rng rng(5);
  const Tensor2 x = random_tensor(13, 4, rng, 3.0);
  const Tensor2 out = forward(m, x).output();
  for (std::size_t r = 0; r < out.rows; ++r) {
    double sum = 0.0;
    for (const double v : out.row(r)) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("softmax is restricted to the final layer") {
  CHECK_THROWS_AS(make_mlp({3, 4, 2}, {Activation::Softmax, Activation::Identity}, 1),
                  std::invalid_argument);
}

TEST_CASE("gradient check passes for every activation and loss pairing") {
  Rng rng(21);
  const Tensor2 x = random_tensor(6, 4, rng);

  const std::vector<Activation> hiddens = {Activation::Identity, Activation::Relu,
                                           Activation::Tanh, Activation::Sigmoid};
  for (const Activation hidden : hiddens) {
    for (const Activation head :
         {Activation::Identity, Activation::Tanh, Activation::Sigmoid}) {
      const MlpModel m = make_mlp({4, 5, 3}, {hidden, head}, 17);
      const LabeledDataset d{x, random_tensor(6, 3, rng)};
      CHECK(grad_check(m, d, LossKind::Mse) <= 1e-4);
    }
    // Softmax head: MSE through the full Jacobian and fused cross-entropy.
    const MlpModel m = make_mlp({4, 5, 3}, {hidden, Activation::Softmax}, 29);
    const Tensor2 y = one_hot_rows({0, 2, 1, 1, 0, 2}, 3);
    CHECK(grad_check(m, {x, y}, LossKind::CrossEntropy) <= 1e-4);
    Tensor2 soft_targets = random_tensor(6, 3, rng, 0.4);
    CHECK(grad_check(m, {x, soft_targets}, LossKind::Mse) <= 1e-4);
  }
}

TEST_CASE("gradient check passes with a fixed dropout mask applied") {
  Rng rng(33);
  const Tensor2 x = random_tensor(5, 6, rng);
  const Tensor2 y = random_tensor(5, 2, rng);
  MlpModel m = make_mlp({6, 8, 2}, {Activation::Tanh, Activation::Identity}, 9);

  DropoutMasks masks(1);
  masks[0] = Tensor2(5, 6);
  for (double& v : masks[0].data) v = rng.uniform() < 0.5 ? 0.0 : 2.0;

  const ForwardPass pass = forward(m, x, &masks);
  const Gradients g = backward(m, pass, y, LossKind::Mse, &masks);

  double worst = 0.0;
  const double eps = 1e-5;
  auto loss_at = [&]() {
    return loss_value(forward(m, x, &masks).output(), y, LossKind::Mse);
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (std::size_t i = 0; i < m.layers[l].weights.data.size(); ++i) {
      double& p = m.layers[l].weights.data[i];
      const double saved = p;
      p = saved + eps;
      const double lp = loss_at();
      p = saved - eps;
      const double lm = loss_at();
      p = saved;
      const double numeric = (lp - lm) / (2 * eps);
      const double analytic = g.weights[l].data[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward_signal with the mse output gradient reproduces backward") {
  Rng rng(41);
  const Tensor2 x = random_tensor(4, 3, rng);
  const Tensor2 y = random_tensor(4, 2, rng);
  const MlpModel m = make_mlp({3, 6, 2}, {Activation::Sigmoid, Activation::Identity}, 13);
  const ForwardPass pass = forward(m, x);
  const Gradients direct = backward(m, pass, y, LossKind::Mse);

  Tensor2 og(4, 2);
  for (std::size_t i = 0; i < og.data.size(); ++i)
    og.data[i] = 2.0 * (pass.output().data[i] - y.data[i]) / 4.0;
  const Gradients via_signal = backward_signal(m, pass, og);

  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (std::size_t i = 0; i < direct.weights[l].data.size(); ++i)
      CHECK(direct.weights[l].data[i] ==
            doctest::Approx(via_signal.weights[l].data[i]).epsilon(1e-14));
  }
  for (std::size_t i = 0; i < direct.input.data.size(); ++i)
    CHECK(direct.input.data[i] == doctest::Approx(via_signal.input.data[i]).epsilon(1e-14));
}

TEST_CASE("one sgd step at lr 1e-4 on a fixed quadratic reduces the loss") {
  Rng rng(55);
  const Tensor2 x = random_tensor(16, 3, rng);
  const Tensor2 y = random_tensor(16, 2, rng);
  MlpModel m = make_mlp({3, 2}, {Activation::Identity}, 19);

  const double before = loss_value(forward(m, x).output(), y, LossKind::Mse);
  const ForwardPass pass = forward(m, x);
  const Gradients g = backward(m, pass, y, LossKind::Mse);
  apply_sgd(m, g, 1e-4);
  const double after = loss_value(forward(m, x).output(), y, LossKind::Mse);
  CHECK(after < before);
}

TEST_CASE("xor with 8 tanh hidden units and adam reaches mse < 1e-2 in 2000 epochs") {
  Tensor2 x(4, 2);
  Tensor2 y(4, 1);
  const double xs[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const double ys[4] = {0, 1, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0) = xs[i][0];
    x(i, 1) = xs[i][1];
    y(i, 0) = ys[i];
  }
  MlpModel m = make_mlp({2, 8, 1}, {Activation::Tanh, Activation::Identity}, 1);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Adam;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 4;
  cfg.epochs = 2000;
  cfg.seed = 1;
  cfg.loss = LossKind::Mse;
  train(m, {x, y}, cfg);
  const double final_mse = loss_value(forward(m, x).output(), y, LossKind::Mse);
  CHECK(final_mse < 1e-2);
}

TEST_CASE("training is bit-identical for identical seeds") {
  Rng rng(77);
  const Tensor2 x = random_tensor(32, 4, rng);
  const Tensor2 y = random_tensor(32, 2, rng);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.batch_size = 8;
  cfg.seed = 123;
  cfg.dropout_rate = 0.25;

  MlpModel a = make_mlp({4, 6, 2}, {Activation::Relu, Activation::Identity}, 5);
  MlpModel b = make_mlp({4, 6, 2}, {Activation::Relu, Activation::Identity}, 5);
  const TrainHistory ha = train(a, {x, y}, cfg);
  const TrainHistory hb = train(b, {x, y}, cfg);
  CHECK(models_identical(a, b));
  CHECK(ha.epoch_loss == hb.epoch_loss);
}

TEST_CASE("dropout rate zero matches training without dropout") {
  Rng rng(78);
  const Tensor2 x = random_tensor(20, 3, rng);
  const Tensor2 y = random_tensor(20, 1, rng);
  TrainConfig cfg;
  cfg.epochs = 9;
  cfg.batch_size = 5;
  cfg.seed = 9;
  cfg.dropout_rate = 0.0;

  MlpModel a = make_mlp({3, 5, 1}, {Activation::Tanh, Activation::Identity}, 2);
  MlpModel b = a;
  train(a, {x, y}, cfg);
  train(b, {x, y}, cfg);  // same config: dropout 0 draws nothing from the rng
  CHECK(models_identical(a, b));
}

TEST_CASE("learning rate zero leaves parameters untouched") {
  Rng rng(79);
  const Tensor2 x = random_tensor(10, 3, rng);
  const Tensor2 y = random_tensor(10, 2, rng);
  MlpModel m = make_mlp({3, 4, 2}, {Activation::Relu, Activation::Identity}, 4);
  const MlpModel before = m;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.seed = 2;
  train(m, {x, y}, cfg);
  CHECK(models_identical(m, before));
}

TEST_CASE("non-finite loss aborts training with a diagnostic") {
  Tensor2 x(2, 1);
  x(0, 0) = 1e155;
  x(1, 0) = -1e155;
  Tensor2 y(2, 1, 0.0);
  MlpModel m = make_mlp({1, 1}, {Activation::Identity}, 3);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Sgd;
  cfg.learning_rate = 1.0;
  cfg.epochs = 10;
  cfg.batch_size = 2;
  CHECK_THROWS_AS(train(m, {x, y}, cfg), std::runtime_error);
}

TEST_CASE("model json round-trip is bit-exact and rejects corrupt input") {
  const MlpModel m =
      make_mlp({4, 7, 3}, {Activation::Sigmoid, Activation::Softmax}, 1234);
  const std::string path = "nn_roundtrip_tmp.json";
  save_model(m, path);
  const MlpModel back = load_model(path);
  CHECK(models_identical(m, back));
  std::filesystem::remove(path);

  CHECK_THROWS(model_from_json("{\"layers\":[{\"rows\":2}]}"));
  CHECK_THROWS(model_from_json("not json"));
  // weight count inconsistent with rows*cols
  CHECK_THROWS(model_from_json(
      R"({"layers":[{"rows":1,"cols":2,"activation":"identity","weights":[1.0],"biases":[0.0]}]})"));
}

TEST_CASE("adam converges faster than plain sgd on xor") {
  Tensor2 x(4, 2);
  Tensor2 y(4, 1);
  const double xs[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const double ys[4] = {0, 1, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    x(i, 0) = xs[i][0];
    x(i, 1) = xs[i][1];
    y(i, 0) = ys[i];
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 4;
  cfg.epochs = 800;
  cfg.seed = 3;

  MlpModel adam_model = make_mlp({2, 8, 1}, {Activation::Tanh, Activation::Identity}, 1);
  MlpModel sgd_model = adam_model;
  cfg.optimizer = Optimizer::Adam;
  train(adam_model, {x, y}, cfg);
  cfg.optimizer = Optimizer::Sgd;
  train(sgd_model, {x, y}, cfg);
  const double adam_loss = loss_value(forward(adam_model, x).output(), y, LossKind::Mse);
  const double sgd_loss = loss_value(forward(sgd_model, x).output(), y, LossKind::Mse);
  CHECK(adam_loss < sgd_loss);
}
