#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plcml/medium.hpp"
#include "plcml/nn.hpp"

namespace plcml {

struct GanConfig {
  std::size_t latent_dim = 16;
  std::vector<std::size_t> generator_hidden = {64, 64};
  std::vector<std::size_t> discriminator_hidden = {64};
  std::size_t epochs = 400;
  std::size_t batch_size = 32;
  std::size_t critic_steps = 3;  // discriminator updates per generator update
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

// Magnitude responses in dB, one channel per row.
struct ChannelCorpus {
  Tensor2 responses;
  FrequencyGrid grid;
};

// n random multipath draws rendered onto the acceptance band of `cfg`.
ChannelCorpus synthesize_corpus(std::size_t n, const MultipathConfig& cfg,
                                std::uint64_t seed);

struct GanHistory {
  std::vector<double> d_value;  // mean log D(x) + log(1 - D(G(y))) per epoch
  std::vector<double> g_loss;   // non-saturating -mean log D(G(y)) per epoch
};

struct GanSystem {
  MlpModel generator;      // latent -> normalized dB row, tanh head
  MlpModel discriminator;  // normalized dB row -> probability, sigmoid head
  double db_lo = -90.0, db_hi = -10.0;  // affine map between dB and [-1,1]
  std::size_t latent_dim = 0;
  bool mode_collapse = false;
  GanHistory history;
};

// Value of the adversarial game for one real and one fake batch, both in the
// normalized space. At D == 1/2 this is exactly -log 4.
double gan_value(const MlpModel& discriminator, const Tensor2& real_rows,
                 const Tensor2& fake_rows);

// Alternating Adam updates: the discriminator ascends the game value, the
// generator maximizes log D(G(y)). Deterministic under the config seed.
GanSystem gan_train(const ChannelCorpus& corpus, const GanConfig& cfg);

// n generated dB responses; rows are bounded by the corpus dB range through
// the tanh head and the stored affine map.
Tensor2 gan_generate(const GanSystem& system, std::size_t n, std::uint64_t seed);

struct GanReport {
  std::vector<double> mean_err_db;  // per bin: |generated mean - corpus mean|
  std::vector<double> std_ratio;    // per bin: generated std / corpus std
  double ks_avg_gain = 0.0;         // two-sample KS on per-row average dB
  std::size_t bins_within_5db = 0;
  std::size_t n_samples = 0;

  std::string to_text() const;
};

// Report computed from an explicit sample matrix (rows of dB responses).
GanReport evaluate_gan_samples(const Tensor2& generated, const ChannelCorpus& corpus);
GanReport evaluate_gan(const GanSystem& system, const ChannelCorpus& corpus,
                       std::size_t n_samples, std::uint64_t seed);

// Two-sample Kolmogorov-Smirnov statistic sup |F1 - F2|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

void write_corpus_csv(const std::string& path, const ChannelCorpus& corpus);

}  // namespace plcml
