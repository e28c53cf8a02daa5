#include "plcml/autoencoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "plcml/csv.hpp"
#include "plcml/parallel.hpp"

namespace plcml {

namespace {

bool power_of_two(std::size_t v) { return v >= 2 && (v & (v - 1)) == 0; }

double log2_size(std::size_t v) { return std::log2(static_cast<double>(v)); }

// Per-dimension noise std for a unit-average-energy codeword: Eb = n/log2(M),
// sigma^2 = N0/2 = Eb / (2 * 10^(ebn0/10)).
double noise_std_for(double ebn0_db, std::size_t m, std::size_t n) {
  const double rho = std::pow(10.0, ebn0_db / 10.0);
  const double eb = static_cast<double>(n) / log2_size(m);
  return std::sqrt(eb / (2.0 * rho));
}

std::vector<Activation> hidden_acts(std::size_t n_hidden, Activation head) {
  std::vector<Activation> acts(n_hidden, Activation::Relu);
  acts.push_back(head);
  return acts;
}

std::vector<std::size_t> layer_dims(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

void AeConfig::validate() const {
  if (!power_of_two(m)) throw std::invalid_argument("AeConfig: m must be a power of two >= 2");
  if (n < 1) throw std::invalid_argument("AeConfig: n must be >= 1");
  if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1)
    throw std::invalid_argument("AeConfig: epochs, steps and batch size must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("AeConfig: bad learning rate");
  if (channel && channel->h.empty())
    throw std::invalid_argument("AeConfig: configured channel response is empty");
}

std::vector<double> channel_forward(std::span<const double> x,
                                    const std::vector<double>& taps,
                                    double noise_std, Rng& rng) {
  if (taps.empty()) throw std::invalid_argument("channel_forward: taps must be nonempty");
  if (noise_std < 0.0) throw std::invalid_argument("channel_forward: negative noise std");
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps.size() && k <= i; ++k) acc += taps[k] * x[i - k];
    y[i] = acc + (noise_std > 0.0 ? noise_std * rng.normal() : 0.0);
  }
  return y;
}

std::vector<double> channel_backward(std::span<const double> grad_y,
                                     const std::vector<double>& taps) {
  std::vector<double> gx(grad_y.size(), 0.0);
  for (std::size_t j = 0; j < gx.size(); ++j)
    for (std::size_t k = 0; k < taps.size() && j + k < grad_y.size(); ++k)
      gx[j] += taps[k] * grad_y[j + k];
  return gx;
}

Tensor2 normalize_power(const Tensor2& batch, PowerRule rule) {
  if (batch.rows == 0 || batch.cols == 0)
    throw std::invalid_argument("normalize_power: empty batch");
  Tensor2 out = batch;
  if (rule == PowerRule::AvgPower) {
    double q = 0.0;
    for (const double v : batch.data) q += v * v;
    q /= static_cast<double>(batch.size());
    if (!(q > 0.0)) throw std::invalid_argument("normalize_power: zero-energy batch");
    const double s = 1.0 / std::sqrt(q);
    for (double& v : out.data) v *= s;
    return out;
  }
  for (std::size_t r = 0; r < batch.rows; ++r) {
    double e = 0.0;
    for (const double v : batch.row(r)) e += v * v;
    if (!(e > 0.0)) throw std::invalid_argument("normalize_power: zero-energy row");
    const double s = std::sqrt(static_cast<double>(batch.cols) / e);
    for (double& v : out.row(r)) v *= s;
  }
  return out;
}

Tensor2 normalize_power_backward(const Tensor2& batch, const Tensor2& grad_out,
                                 PowerRule rule) {
  if (!batch.same_shape(grad_out))
    throw std::invalid_argument("normalize_power_backward: shape mismatch");
  Tensor2 gin(batch.rows, batch.cols);
  if (rule == PowerRule::AvgPower) {
    const auto k = static_cast<double>(batch.size());
    double q = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < batch.data.size(); ++i) {
      q += batch.data[i] * batch.data[i];
      dot += grad_out.data[i] * batch.data[i];
    }
    q /= k;
    const double s = std::sqrt(q);
    for (std::size_t i = 0; i < batch.data.size(); ++i)
      gin.data[i] = grad_out.data[i] / s - batch.data[i] * dot / (k * s * s * s);
    return gin;
  }
  const double c = std::sqrt(static_cast<double>(batch.cols));
  for (std::size_t r = 0; r < batch.rows; ++r) {
    double e = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < batch.cols; ++j) {
      e += batch(r, j) * batch(r, j);
      dot += grad_out(r, j) * batch(r, j);
    }
    const double norm = std::sqrt(e);
    for (std::size_t j = 0; j < batch.cols; ++j)
      gin(r, j) = c * (grad_out(r, j) / norm - batch(r, j) * dot / (norm * norm * norm));
  }
  return gin;
}

std::vector<double> response_to_taps(const ChannelResponse& h, std::size_t n_taps) {
  if (h.h.empty()) throw std::invalid_argument("response_to_taps: empty response");
  if (n_taps < 1) throw std::invalid_argument("response_to_taps: need at least one tap");
  const double dt = 1.0 / (2.0 * h.grid.f_stop);
  std::vector<double> taps(n_taps, 0.0);
  for (std::size_t k = 0; k < n_taps; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.h.size(); ++i) {
      const double w = 2.0 * std::numbers::pi * h.grid.freq(i) * static_cast<double>(k) * dt;
      acc += h.h[i].real() * std::cos(w) - h.h[i].imag() * std::sin(w);
    }
    taps[k] = acc;
  }
  double energy = 0.0;
  for (const double t : taps) energy += t * t;
  if (!(energy > 0.0)) throw std::invalid_argument("response_to_taps: response has no energy");
  const double s = 1.0 / std::sqrt(energy);
  for (double& t : taps) t *= s;
  return taps;
}

Tensor2 AeSystem::constellation() const {
  const std::size_t m = encoder.input_dim();
  Tensor2 onehot(m, m, 0.0);
  for (std::size_t i = 0; i < m; ++i) onehot(i, i) = 1.0;
  const ForwardPass pass = forward(encoder, onehot);
  return normalize_power(pass.output(), rule);
}

AeTrainResult ae_train(const AeConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);

  std::vector<double> taps =
      cfg.channel ? response_to_taps(*cfg.channel, cfg.fir_taps ? cfg.fir_taps : cfg.n)
                  : std::vector<double>{1.0};

  MlpModel encoder = make_mlp(layer_dims(cfg.m, cfg.encoder_hidden, cfg.n),
                              hidden_acts(cfg.encoder_hidden.size(), Activation::Identity),
                              root.split("encoder").seed());
  MlpModel decoder = make_mlp(layer_dims(cfg.n, cfg.decoder_hidden, cfg.m),
                              hidden_acts(cfg.decoder_hidden.size(), Activation::Softmax),
                              root.split("decoder").seed());

  const double sigma = noise_std_for(cfg.train_ebn0_db, cfg.m, cfg.n);

  TrainConfig opt;
  opt.learning_rate = cfg.learning_rate;
  opt.loss = LossKind::CrossEntropy;
  AdamState enc_state, dec_state;
  enc_state.init(encoder);
  dec_state.init(decoder);

  Rng draw = root.split("messages");
  Rng noise = root.split("channel-noise");

  std::vector<double> epoch_loss;
  epoch_loss.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double acc_loss = 0.0;
    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      Tensor2 onehot(cfg.batch_size, cfg.m, 0.0);
      for (std::size_t r = 0; r < cfg.batch_size; ++r)
        onehot(r, static_cast<std::size_t>(draw.below(cfg.m))) = 1.0;

      const ForwardPass enc_pass = forward(encoder, onehot);
      const Tensor2 coded = normalize_power(enc_pass.output(), cfg.rule);

      Tensor2 received(cfg.batch_size, cfg.n);
      for (std::size_t r = 0; r < cfg.batch_size; ++r) {
        const std::vector<double> y = channel_forward(coded.row(r), taps, sigma, noise);
        for (std::size_t j = 0; j < cfg.n; ++j) received(r, j) = y[j];
      }

      const ForwardPass dec_pass = forward(decoder, received);
      const double loss = loss_value(dec_pass.output(), onehot, LossKind::CrossEntropy);
      if (!std::isfinite(loss))
        throw std::runtime_error("ae_train: loss diverged at epoch " + std::to_string(epoch));
      acc_loss += loss;

      const Gradients dec_grads =
          backward(decoder, dec_pass, onehot, LossKind::CrossEntropy);

      Tensor2 grad_coded(cfg.batch_size, cfg.n);
      for (std::size_t r = 0; r < cfg.batch_size; ++r) {
        const std::vector<double> gx = channel_backward(dec_grads.input.row(r), taps);
        for (std::size_t j = 0; j < cfg.n; ++j) grad_coded(r, j) = gx[j];
      }
      const Tensor2 grad_encoded =
          normalize_power_backward(enc_pass.output(), grad_coded, cfg.rule);
      const Gradients enc_grads = backward_signal(encoder, enc_pass, grad_encoded);

      apply_adam(decoder, dec_grads, dec_state, opt);
      apply_adam(encoder, enc_grads, enc_state, opt);
    }
    epoch_loss.push_back(acc_loss / static_cast<double>(cfg.steps_per_epoch));
  }

  return {AeSystem{std::move(encoder), std::move(decoder), std::move(taps), cfg.rule},
          std::move(epoch_loss)};
}

SerCurve evaluate_ser(const AeSystem& system, const std::vector<double>& ebn0_db,
                      std::size_t n_trials, std::uint64_t seed, int threads) {
  if (n_trials < 1) throw std::invalid_argument("evaluate_ser: need at least one trial");
  const std::size_t m = system.encoder.input_dim();
  const std::size_t n = system.encoder.output_dim();
  const Tensor2 codebook = system.constellation();

  SerCurve curve;
  curve.ebn0_db = ebn0_db;
  curve.ser.assign(ebn0_db.size(), 0.0);
  curve.trials_per_point = n_trials;

  const Rng root(seed);
  parallel_for(ebn0_db.size(), threads, [&](std::size_t p) {
    Rng rng = root.split(p);
    const double sigma = noise_std_for(ebn0_db[p], m, n);
    std::size_t errors = 0;
    Tensor2 rx(1, n);
    for (std::size_t t = 0; t < n_trials; ++t) {
      const auto msg = static_cast<std::size_t>(rng.below(m));
      const std::vector<double> y =
          channel_forward(codebook.row(msg), system.channel_taps, sigma, rng);
      for (std::size_t j = 0; j < n; ++j) rx(0, j) = y[j];
      const ForwardPass pass = forward(system.decoder, rx);
      const auto probs = pass.output().row(0);
      std::size_t best = 0;
      for (std::size_t c = 1; c < m; ++c)
        if (probs[c] > probs[best]) best = c;
      if (best != msg) ++errors;
    }
    curve.ser[p] = static_cast<double>(errors) / static_cast<double>(n_trials);
  });
  return curve;
}

double pam_ser_analytic(std::size_t m, double ebn0_db) {
  if (!power_of_two(m)) throw std::invalid_argument("pam_ser_analytic: m must be a power of two >= 2");
  const double md = static_cast<double>(m);
  const double rho = std::pow(10.0, ebn0_db / 10.0);
  const double arg = std::sqrt(6.0 * log2_size(m) / (md * md - 1.0) * rho);
  const double q = 0.5 * std::erfc(arg / std::numbers::sqrt2);
  return 2.0 * (md - 1.0) / md * q;
}

void write_ser_csv(const std::string& path, const SerCurve& ae, std::size_t m) {
  CsvWriter w(path);
  w.header({"ebn0_db", "ser_autoencoder", "ser_pam_analytic", "trials"});
  for (std::size_t i = 0; i < ae.ebn0_db.size(); ++i) {
    w.cell(ae.ebn0_db[i])
        .cell(ae.ser[i])
        .cell(pam_ser_analytic(m, ae.ebn0_db[i]))
        .cell(static_cast<long long>(ae.trials_per_point));
    w.end_row();
  }
  w.close();
}

void write_constellation_csv(const std::string& path, const Tensor2& constellation) {
  CsvWriter w(path);
  std::vector<std::string> names{"message"};
  for (std::size_t j = 0; j < constellation.cols; ++j)
    names.push_back("x" + std::to_string(j));
  w.header(names);
  for (std::size_t r = 0; r < constellation.rows; ++r) {
    w.cell(static_cast<long long>(r));
    for (std::size_t j = 0; j < constellation.cols; ++j) w.cell(constellation(r, j));
    w.end_row();
  }
  w.close();
}

}  // namespace plcml
