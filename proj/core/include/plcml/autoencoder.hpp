#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plcml/medium.hpp"
#include "plcml/nn.hpp"
#include "plcml/rng.hpp"

namespace plcml {

enum class PowerRule {
  AvgPower,         // batch scaled so the mean squared entry is 1
  PerSymbolEnergy,  // each row scaled to squared norm n (its own length)
};

struct AeConfig {
  std::size_t m = 4;  // message cardinality, power of two
  std::size_t n = 1;  // real channel uses per message
  std::vector<std::size_t> encoder_hidden = {32};
  std::vector<std::size_t> decoder_hidden = {32};
  // Frequency response to squeeze the symbols through; empty means AWGN only
  // (single unit tap).
  std::optional<ChannelResponse> channel;
  std::size_t fir_taps = 0;  // 0 -> n taps
  PowerRule rule = PowerRule::AvgPower;
  double train_ebn0_db = 8.0;
  std::size_t epochs = 120;
  std::size_t steps_per_epoch = 50;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

struct AeSystem {
  MlpModel encoder;  // one-hot message -> n reals
  MlpModel decoder;  // n reals -> M softmax
  std::vector<double> channel_taps;
  PowerRule rule = PowerRule::AvgPower;

  // All M codewords after power normalization, one row per message. The
  // average-power rule normalizes over the full codebook, the statistic the
  // training batches converge to under a uniform prior.
  Tensor2 constellation() const;
};

struct SerCurve {
  std::vector<double> ebn0_db;
  std::vector<double> ser;
  std::size_t trials_per_point = 0;
};

// y[i] = sum_k taps[k] * x[i-k] + Normal(0, noise_std^2), same length as x.
std::vector<double> channel_forward(std::span<const double> x,
                                    const std::vector<double>& taps,
                                    double noise_std, Rng& rng);

// dL/dx for the layer above: correlation of the output gradient with the taps.
std::vector<double> channel_backward(std::span<const double> grad_y,
                                     const std::vector<double>& taps);

// Power-constrains an encoded batch. Scale-invariant: normalize(c*X) equals
// normalize(X) for any c > 0.
Tensor2 normalize_power(const Tensor2& batch, PowerRule rule);

// Chain-rule companion of normalize_power for the same input batch.
Tensor2 normalize_power_backward(const Tensor2& batch, const Tensor2& grad_out,
                                 PowerRule rule);

// Real FIR taps from a frequency response: inverse transform at spacing
// 1/(2*f_stop), truncated to n_taps and scaled to unit energy.
std::vector<double> response_to_taps(const ChannelResponse& h, std::size_t n_taps);

struct AeTrainResult {
  AeSystem system;
  std::vector<double> epoch_loss;
};

// Joint end-to-end training of encoder and decoder with cross-entropy on
// uniformly drawn messages, through the power constraint and the noisy
// channel. Throws std::runtime_error if the loss turns non-finite.
AeTrainResult ae_train(const AeConfig& cfg);

// Monte Carlo symbol error rate over uniform messages. Noise is scaled per
// point from Eb/N0 with Eb = (message energy)/log2(M) and per-dimension
// variance N0/2; points get independent derived seeds so the sweep can run
// in parallel.
SerCurve evaluate_ser(const AeSystem& system, const std::vector<double>& ebn0_db,
                      std::size_t n_trials, std::uint64_t seed, int threads = 1);

// Closed-form matched-filter AWGN M-PAM symbol error rate.
double pam_ser_analytic(std::size_t m, double ebn0_db);

void write_ser_csv(const std::string& path, const SerCurve& ae, std::size_t m);
void write_constellation_csv(const std::string& path, const Tensor2& constellation);

}  // namespace plcml
