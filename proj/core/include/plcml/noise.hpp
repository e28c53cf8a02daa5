#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "plcml/features.hpp"

namespace plcml {

// Colored Gaussian background. `level` is the time-domain standard deviation;
// the spectral slope tilts the PSD by the given dB per frequency decade.
struct StationaryNoise {
  double level = 1.0;
  double slope_db_per_decade = 0.0;
};

// Narrowband interferer: a fixed-amplitude sinusoid with a random phase.
struct ToneNoise {
  double freq_hz = 0.0;
  double amplitude = 0.0;
};

// Mains-synchronous gated Gaussian bursts.
struct BurstNoise {
  double period_s = 0.02;
  double duty = 0.5;  // on-fraction of each period, gate starts at phase 0
  double level = 1.0;
};

// Poisson-arrival damped impulses. Amplitude is Normal(amp_mean, amp_std)
// with a random sign; the decay constant is |Normal(tau_mean, tau_std)|.
struct ImpulsiveNoise {
  double rate_hz = 0.0;
  double amp_mean = 1.0;
  double amp_std = 0.0;
  double tau_mean_s = 1e-4;
  double tau_std_s = 0.0;
};

struct NoiseSpec {
  std::vector<StationaryNoise> stationary;
  std::vector<ToneNoise> tones;
  std::vector<BurstNoise> bursts;
  std::vector<ImpulsiveNoise> impulsive;
  double coupling = 0.0;  // in [0,1]; fraction of shared power between channels
};

// Two-channel synthesis: each channel is sqrt(coupling) times a shared
// realization plus sqrt(1-coupling) times its own independent realization of
// the same spec. Deterministic under the seed.
std::pair<Trace, Trace> noise_synthesize(const NoiseSpec& spec, double duration_s,
                                         double sample_rate, std::uint64_t seed);

}  // namespace plcml
