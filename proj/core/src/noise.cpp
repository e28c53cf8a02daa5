#include "plcml/noise.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

#include "plcml/rng.hpp"

namespace plcml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// FFTW plan creation/destruction is not thread-safe; execution is.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// White Gaussian sequence shaped so PSD(f) follows the requested dB/decade
// tilt, then rescaled to the requested time-domain standard deviation.
void add_stationary(std::vector<double>& acc, const StationaryNoise& sn,
                    double sample_rate, Rng& rng) {
  const std::size_t n = acc.size();
  std::vector<double> white(n);
  for (double& v : white) v = rng.normal();

  if (sn.slope_db_per_decade != 0.0) {
    std::vector<double> buf = white;
    const std::size_t nc = n / 2 + 1;
    std::vector<std::complex<double>> spec(nc);
    auto* spec_raw = reinterpret_cast<fftw_complex*>(spec.data());
    fftw_plan fwd, bwd;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), spec_raw,
                                 FFTW_ESTIMATE);
      bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_raw, buf.data(),
                                 FFTW_ESTIMATE);
    }
    fftw_execute(fwd);
    const double f1 = sample_rate / static_cast<double>(n);
    spec[0] = 0.0;  // drop DC; a tilt has no meaning there
    for (std::size_t k = 1; k < nc; ++k) {
      const double f = static_cast<double>(k) * f1;
      // PSD tilts as f^(slope/10), so amplitude tilts as f^(slope/20)
      spec[k] *= std::pow(f / f1, sn.slope_db_per_decade / 20.0);
    }
    fftw_execute(bwd);
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(fwd);
      fftw_destroy_plan(bwd);
    }
    for (std::size_t i = 0; i < n; ++i) white[i] = buf[i] / static_cast<double>(n);
  }

  double mean = 0.0;
  for (const double v : white) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double v : white) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n > 1 ? n - 1 : 1);
  const double scale = var > 0.0 ? sn.level / std::sqrt(var) : 0.0;
  for (std::size_t i = 0; i < n; ++i) acc[i] += scale * (white[i] - mean);
}

void add_tone(std::vector<double>& acc, const ToneNoise& tn, double sample_rate,
              Rng& rng) {
  const double phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    acc[i] += tn.amplitude * std::sin(kTwoPi * tn.freq_hz * t + phase);
  }
}

void add_burst(std::vector<double>& acc, const BurstNoise& bn, double sample_rate,
               Rng& rng) {
  if (!(bn.period_s > 0.0)) throw std::invalid_argument("noise: burst period must be positive");
  if (bn.duty < 0.0 || bn.duty > 1.0) throw std::invalid_argument("noise: burst duty in [0,1]");
  const double on = bn.duty * bn.period_s;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double phase = std::fmod(t, bn.period_s);
    const double g = rng.normal();  // drawn every sample to keep streams aligned
    if (phase < on) acc[i] += bn.level * g;
  }
}

void add_impulsive(std::vector<double>& acc, const ImpulsiveNoise& in,
                   double duration, double sample_rate, Rng& rng) {
  if (in.rate_hz < 0.0) throw std::invalid_argument("noise: impulse rate must be >= 0");
  if (in.rate_hz == 0.0) return;
  double t = 0.0;
  while (true) {
    t += -std::log(1.0 - rng.uniform()) / in.rate_hz;  // exponential gap
    if (t >= duration) break;
    const double amp_mag = std::abs(rng.normal(in.amp_mean, in.amp_std));
    const double amp = rng.below(2) == 0 ? amp_mag : -amp_mag;
    double tau = std::abs(rng.normal(in.tau_mean_s, in.tau_std_s));
    tau = std::max(tau, 1.0 / sample_rate);
    const auto start = static_cast<std::size_t>(t * sample_rate);
    const auto span = static_cast<std::size_t>(8.0 * tau * sample_rate) + 1;
    for (std::size_t k = 0; k < span && start + k < acc.size(); ++k) {
      const double dt = static_cast<double>(k) / sample_rate;
      acc[start + k] += amp * std::exp(-dt / tau);
    }
  }
}

std::vector<double> render(const NoiseSpec& spec, std::size_t n, double duration,
                           double sample_rate, Rng rng) {
  std::vector<double> acc(n, 0.0);
  for (const auto& sn : spec.stationary) add_stationary(acc, sn, sample_rate, rng);
  for (const auto& tn : spec.tones) add_tone(acc, tn, sample_rate, rng);
  for (const auto& bn : spec.bursts) add_burst(acc, bn, sample_rate, rng);
  for (const auto& im : spec.impulsive) add_impulsive(acc, im, duration, sample_rate, rng);
  return acc;
}

}  // namespace

std::pair<Trace, Trace> noise_synthesize(const NoiseSpec& spec, double duration_s,
                                         double sample_rate, std::uint64_t seed) {
  if (!(duration_s > 0.0) || !(sample_rate > 0.0))
    throw std::invalid_argument("noise_synthesize: bad duration or rate");
  if (spec.coupling < 0.0 || spec.coupling > 1.0)
    throw std::invalid_argument("noise_synthesize: coupling must be in [0,1]");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n < 1) throw std::invalid_argument("noise_synthesize: zero-length request");

  const Rng base(seed);
  const std::vector<double> shared =
      render(spec, n, duration_s, sample_rate, base.split("shared"));
  const std::vector<double> ind1 =
      render(spec, n, duration_s, sample_rate, base.split("independent-1"));
  const std::vector<double> ind2 =
      render(spec, n, duration_s, sample_rate, base.split("independent-2"));

  const double ws = std::sqrt(spec.coupling);
  const double wi = std::sqrt(1.0 - spec.coupling);
  Trace a, b;
  a.sample_rate = b.sample_rate = sample_rate;
  a.samples.resize(n);
  b.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.samples[i] = ws * shared[i] + wi * ind1[i];
    b.samples[i] = ws * shared[i] + wi * ind2[i];
  }
  return {std::move(a), std::move(b)};
}

}  // namespace plcml
