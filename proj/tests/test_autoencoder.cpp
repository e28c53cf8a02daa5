#include "plcml/autoencoder.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <doctest.h>

#include "plcml/rng.hpp"

using namespace plcml;

namespace {

double rel_to(double a, double b, double floor_scale) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_scale});
}

// Forward pass of the whole chain with a noiseless channel, as one scalar.
double composite_loss(const MlpModel& enc, const MlpModel& dec, const Tensor2& onehot,
                      const std::vector<double>& taps, PowerRule rule) {
  const ForwardPass ep = forward(enc, onehot);
  const Tensor2 coded = normalize_power(ep.output(), rule);
  const std::size_t n = coded.cols;
  Tensor2 rx(coded.rows, n);
  Rng unused(0);
  for (std::size_t r = 0; r < coded.rows; ++r) {
    const std::vector<double> y = channel_forward(coded.row(r), taps, 0.0, unused);
    for (std::size_t j = 0; j < n; ++j) rx(r, j) = y[j];
  }
  const ForwardPass dp = forward(dec, rx);
  return loss_value(dp.output(), onehot, LossKind::CrossEntropy);
}

// Central-difference derivative of composite_loss in a single parameter.
template <typename Getter>
double numeric_derivative(Getter&& get, MlpModel& enc, MlpModel& dec,
                          const Tensor2& onehot, const std::vector<double>& taps,
                          PowerRule rule) {
  double& p = get();
  const double keep = p;
  const double eps = 1e-5;
  p = keep + eps;
  const double hi = composite_loss(enc, dec, onehot, taps, rule);
  p = keep - eps;
  const double lo = composite_loss(enc, dec, onehot, taps, rule);
  p = keep;
  return (hi - lo) / (2.0 * eps);
}

}  // namespace

TEST_CASE("channel layer basics") {
  Rng rng(1);
  const std::vector<double> x{2.0, -1.0, 0.5};

  auto y = channel_forward(x, {1.0}, 0.0, rng);
  CHECK(y == x);

  y = channel_forward(x, {0.5}, 0.0, rng);
  CHECK(y[0] == 1.0);

  // Direct convolution oracle for a 3-tap filter.
  const std::vector<double> taps{0.7, -0.3, 0.2};
  y = channel_forward(x, taps, 0.0, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double want = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k)
      if (k <= i) want += taps[k] * x[i - k];
    CHECK(y[i] == doctest::Approx(want).epsilon(1e-15));
  }

  CHECK_THROWS(channel_forward(x, {}, 0.0, rng));
  CHECK_THROWS(channel_forward(x, {1.0}, -1.0, rng));
}

TEST_CASE("channel gradient matches finite differences") {
  Rng rng(2);
  const std::vector<double> taps{0.8, 0.3, -0.4};
  std::vector<double> x(5), w(5);
  for (auto& v : x) v = rng.normal();
  for (auto& v : w) v = rng.normal();  // upstream gradient of sum(w*y)

  const std::vector<double> analytic = channel_backward(w, taps);
  const double eps = 1e-6;
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto eval = [&](double xv) {
      std::vector<double> xp = x;
      xp[j] = xv;
      Rng quiet(0);
      const auto y = channel_forward(xp, taps, 0.0, quiet);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
      return s;
    };
    const double numeric = (eval(x[j] + eps) - eval(x[j] - eps)) / (2.0 * eps);
    CHECK(rel_to(analytic[j], numeric, 1e-8) < 1e-6);
  }
}

TEST_CASE("power normalization rules") {
  Tensor2 b(2, 3);
  Rng rng(3);
  for (auto& v : b.data) v = rng.normal(0.0, 2.0);

  SUBCASE("average power comes out exactly 1") {
    const Tensor2 out = normalize_power(b, PowerRule::AvgPower);
    double q = 0.0;
    for (const double v : out.data) q += v * v;
    q /= static_cast<double>(out.size());
    CHECK(q == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("per-symbol rows land on squared norm n") {
    const Tensor2 out = normalize_power(b, PowerRule::PerSymbolEnergy);
    for (std::size_t r = 0; r < out.rows; ++r) {
      double e = 0.0;
      for (const double v : out.row(r)) e += v * v;
      CHECK(e == doctest::Approx(3.0).epsilon(1e-12));
    }
  }

  SUBCASE("already normalized input is a fixed point") {
    Tensor2 unit(2, 3, 1.0);
    unit(0, 1) = -1.0;  // entries +-1: mean square 1, row norms sqrt(3)
    for (const PowerRule rule : {PowerRule::AvgPower, PowerRule::PerSymbolEnergy}) {
      const Tensor2 out = normalize_power(unit, rule);
      for (std::size_t i = 0; i < unit.data.size(); ++i)
        CHECK(std::abs(out.data[i] - unit.data[i]) < 1e-12);
    }
  }

  SUBCASE("scale invariance") {
    for (const PowerRule rule : {PowerRule::AvgPower, PowerRule::PerSymbolEnergy}) {
      const Tensor2 base = normalize_power(b, rule);
      Tensor2 scaled = b;
      for (auto& v : scaled.data) v *= 10.0;
      const Tensor2 out = normalize_power(scaled, rule);
      for (std::size_t i = 0; i < base.data.size(); ++i)
        CHECK(std::abs(out.data[i] - base.data[i]) < 1e-12);
    }
  }

  SUBCASE("zero energy is rejected") {
    Tensor2 z(2, 3, 0.0);
    CHECK_THROWS(normalize_power(z, PowerRule::AvgPower));
    Tensor2 one_zero_row = b;
    for (std::size_t j = 0; j < 3; ++j) one_zero_row(1, j) = 0.0;
    CHECK_THROWS(normalize_power(one_zero_row, PowerRule::PerSymbolEnergy));
  }
}

TEST_CASE("normalization gradient matches finite differences") {
  Rng rng(4);
  Tensor2 x(3, 4), g(3, 4);
  for (auto& v : x.data) v = rng.normal(0.5, 1.5);
  for (auto& v : g.data) v = rng.normal();

  for (const PowerRule rule : {PowerRule::AvgPower, PowerRule::PerSymbolEnergy}) {
    const Tensor2 analytic = normalize_power_backward(x, g, rule);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      auto eval = [&](double xv) {
        Tensor2 xp = x;
        xp.data[i] = xv;
        const Tensor2 y = normalize_power(xp, rule);
        double s = 0.0;
        for (std::size_t k = 0; k < y.data.size(); ++k) s += g.data[k] * y.data[k];
        return s;
      };
      const double numeric =
          (eval(x.data[i] + eps) - eval(x.data[i] - eps)) / (2.0 * eps);
      CHECK(rel_to(analytic.data[i], numeric, 1e-7) < 1e-5);
    }
  }
}

TEST_CASE("end-to-end gradient through encoder, channel and decoder") {
  const std::size_t m = 4, n = 3, batch = 5;
  const std::vector<double> taps{1.0, 0.4, -0.2};

  for (const PowerRule rule : {PowerRule::AvgPower, PowerRule::PerSymbolEnergy}) {
    MlpModel enc = make_mlp({m, 8, n}, {Activation::Relu, Activation::Identity}, 11);
    MlpModel dec = make_mlp({n, 8, m}, {Activation::Tanh, Activation::Softmax}, 12);

    Rng rng(13);
    Tensor2 onehot(batch, m, 0.0);
    for (std::size_t r = 0; r < batch; ++r)
      onehot(r, static_cast<std::size_t>(rng.below(m))) = 1.0;

    // Analytic gradients through the full chain.
    const ForwardPass ep = forward(enc, onehot);
    const Tensor2 coded = normalize_power(ep.output(), rule);
    Tensor2 rx(batch, n);
    Rng quiet(0);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto y = channel_forward(coded.row(r), taps, 0.0, quiet);
      for (std::size_t j = 0; j < n; ++j) rx(r, j) = y[j];
    }
    const ForwardPass dp = forward(dec, rx);
    const Gradients dec_g = backward(dec, dp, onehot, LossKind::CrossEntropy);
    Tensor2 grad_coded(batch, n);
    for (std::size_t r = 0; r < batch; ++r) {
      const auto gx = channel_backward(dec_g.input.row(r), taps);
      for (std::size_t j = 0; j < n; ++j) grad_coded(r, j) = gx[j];
    }
    const Tensor2 grad_enc_out = normalize_power_backward(ep.output(), grad_coded, rule);
    const Gradients enc_g = backward_signal(enc, ep, grad_enc_out);

    double worst = 0.0;
    auto check_param = [&](double& slot, double analytic) {
      const double numeric = numeric_derivative([&]() -> double& { return slot; }, enc,
                                                dec, onehot, taps, rule);
      worst = std::max(worst, rel_to(analytic, numeric, 1e-7));
    };
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
      for (std::size_t i = 0; i < enc.layers[l].weights.data.size(); ++i)
        check_param(enc.layers[l].weights.data[i], enc_g.weights[l].data[i]);
      for (std::size_t i = 0; i < enc.layers[l].biases.size(); ++i)
        check_param(enc.layers[l].biases[i], enc_g.biases[l][i]);
    }
    for (std::size_t l = 0; l < dec.layers.size(); ++l) {
      for (std::size_t i = 0; i < dec.layers[l].weights.data.size(); ++i)
        check_param(dec.layers[l].weights.data[i], dec_g.weights[l].data[i]);
      for (std::size_t i = 0; i < dec.layers[l].biases.size(); ++i)
        check_param(dec.layers[l].biases[i], dec_g.biases[l][i]);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("analytic PAM error rate") {
  CHECK(pam_ser_analytic(2, 0.0) == doctest::Approx(0.0786).epsilon(2e-3));
  CHECK(pam_ser_analytic(4, 60.0) < 1e-12);

  // Strictly decreasing in Eb/N0, strictly increasing in M.
  double prev = 1.0;
  for (double db = -5.0; db <= 15.0; db += 1.0) {
    const double v = pam_ser_analytic(4, db);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(pam_ser_analytic(2, 6.0) < pam_ser_analytic(4, 6.0));
  CHECK(pam_ser_analytic(4, 6.0) < pam_ser_analytic(8, 6.0));
  CHECK(pam_ser_analytic(8, 6.0) < pam_ser_analytic(16, 6.0));

  CHECK_THROWS(pam_ser_analytic(3, 0.0));
  CHECK_THROWS(pam_ser_analytic(1, 0.0));
}

TEST_CASE("4-PAM matched filter simulation hits the closed form") {
  const double ebn0_db = 6.0;
  const double p_want = pam_ser_analytic(4, ebn0_db);
  const double rho = std::pow(10.0, ebn0_db / 10.0);
  // Unit-energy levels, Eb = 1/2, sigma^2 = N0/2.
  const double scale = 1.0 / std::sqrt(5.0);
  const std::vector<double> levels{-3.0 * scale, -1.0 * scale, 1.0 * scale, 3.0 * scale};
  const double sigma = std::sqrt(0.5 / (2.0 * rho));

  Rng rng(99);
  const std::size_t trials = 100000;
  std::size_t errors = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto s = static_cast<std::size_t>(rng.below(4));
    const double y = levels[s] + sigma * rng.normal();
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if (std::abs(y - levels[c]) < std::abs(y - levels[best])) best = c;
    if (best != s) ++errors;
  }
  const double p_got = static_cast<double>(errors) / static_cast<double>(trials);
  const double mc_sigma = std::sqrt(p_want * (1.0 - p_want) / static_cast<double>(trials));
  CHECK(std::abs(p_got - p_want) < 3.0 * mc_sigma);
}

TEST_CASE("training drives the identity-channel error to zero") {
  AeConfig cfg;
  cfg.m = 4;
  cfg.n = 4;
  cfg.train_ebn0_db = 20.0;
  cfg.epochs = 30;
  cfg.steps_per_epoch = 30;
  cfg.seed = 5;
  const AeTrainResult r = ae_train(cfg);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());

  const double inf = std::numeric_limits<double>::infinity();
  const SerCurve c = evaluate_ser(r.system, {20.0, inf}, 4000, 7);
  CHECK(c.ser[1] == 0.0);
  CHECK(c.ser[0] < 0.01);
}

TEST_CASE("binary code over AWGN learns an antipodal constellation") {
  AeConfig cfg;
  cfg.m = 2;
  cfg.n = 1;
  cfg.train_ebn0_db = 8.0;
  cfg.epochs = 40;
  cfg.steps_per_epoch = 30;
  cfg.seed = 9;
  const AeTrainResult r = ae_train(cfg);
  const Tensor2 c = r.system.constellation();
  REQUIRE(c.rows == 2);
  REQUIRE(c.cols == 1);
  CHECK(c(0, 0) * c(1, 0) < 0.0);            // opposite signs
  CHECK(std::abs(c(0, 0) + c(1, 0)) < 0.2);  // nearly symmetric
  CHECK(std::abs(c(0, 0)) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("identical seeds reproduce the whole pipeline") {
  AeConfig cfg;
  cfg.m = 4;
  cfg.n = 2;
  cfg.epochs = 5;
  cfg.steps_per_epoch = 10;
  cfg.seed = 21;
  const AeTrainResult a = ae_train(cfg);
  const AeTrainResult b = ae_train(cfg);
  CHECK(a.epoch_loss == b.epoch_loss);

  const SerCurve ca = evaluate_ser(a.system, {2.0, 6.0, 10.0}, 3000, 33, 3);
  const SerCurve cb = evaluate_ser(b.system, {2.0, 6.0, 10.0}, 3000, 33, 1);
  CHECK(ca.ser == cb.ser);  // and thread count does not matter
}

TEST_CASE("deep noise floors any decoder at chance level") {
  // At very low Eb/N0 the received sample is independent of the message, so
  // correct decisions happen with probability exactly 1/M for any decoder.
  AeSystem sys;
  sys.encoder = make_mlp({4, 8, 2}, {Activation::Relu, Activation::Identity}, 55);
  sys.decoder = make_mlp({2, 8, 4}, {Activation::Relu, Activation::Softmax}, 56);
  sys.channel_taps = {1.0};
  const SerCurve c = evaluate_ser(sys, {-25.0}, 20000, 3);
  CHECK(c.ser[0] == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("error rate is monotone along the curve up to Monte Carlo slack") {
  AeConfig cfg;
  cfg.m = 4;
  cfg.n = 1;
  cfg.epochs = 40;
  cfg.steps_per_epoch = 30;
  cfg.seed = 14;
  const AeTrainResult r = ae_train(cfg);
  const std::vector<double> ebn0{0.0, 2.0, 4.0, 6.0, 8.0, 10.0};
  const SerCurve c = evaluate_ser(r.system, ebn0, 20000, 17, 3);
  for (std::size_t i = 0; i + 1 < c.ser.size(); ++i) {
    const double slack =
        2.0 * std::sqrt(std::max(c.ser[i] * (1.0 - c.ser[i]), 1e-6) / 20000.0);
    CHECK(c.ser[i + 1] <= c.ser[i] + slack);
  }
  // A trained 1-use code should sit near the matched-filter baseline.
  CHECK(c.ser[4] < 5.0 * std::max(pam_ser_analytic(4, 8.0), 1e-4));

  // Softmax head: decoder outputs are a distribution for any input.
  Tensor2 probe(3, 1);
  probe(0, 0) = -1.3;
  probe(1, 0) = 0.2;
  probe(2, 0) = 2.0;
  const ForwardPass pass = forward(r.system.decoder, probe);
  for (std::size_t rr = 0; rr < 3; ++rr) {
    double s = 0.0;
    for (const double v : pass.output().row(rr)) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("frequency responses reduce to unit-energy FIR taps") {
  ChannelResponse flat;
  flat.grid = {1e6, 50e6, 64};
  flat.h.assign(64, cdouble{1.0, 0.0});
  const std::vector<double> taps = response_to_taps(flat, 6);
  REQUIRE(taps.size() == 6);
  double e = 0.0;
  for (const double t : taps) e += t * t;
  CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t k = 1; k < taps.size(); ++k)
    CHECK(std::abs(taps[0]) > std::abs(taps[k]));  // impulse-like for a flat band

  const std::vector<double> again = response_to_taps(flat, 6);
  CHECK(taps == again);

  ChannelResponse empty;
  CHECK_THROWS(response_to_taps(empty, 4));
  CHECK_THROWS(response_to_taps(flat, 0));

  // A channel-aware system still trains: loss decreases through the taps.
  AeConfig cfg;
  cfg.m = 4;
  cfg.n = 2;
  cfg.channel = flat;
  cfg.fir_taps = 2;
  cfg.epochs = 10;
  cfg.steps_per_epoch = 20;
  cfg.seed = 3;
  const AeTrainResult r = ae_train(cfg);
  CHECK(r.system.channel_taps.size() == 2);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("autoencoder config validation") {
  AeConfig cfg;
  cfg.m = 3;
  CHECK_THROWS(cfg.validate());
  cfg.m = 4;
  cfg.n = 0;
  CHECK_THROWS(cfg.validate());
  cfg.n = 1;
  cfg.learning_rate = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.learning_rate = 1e-3;
  CHECK_NOTHROW(cfg.validate());
}
