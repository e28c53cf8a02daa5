#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plcml/tensor.hpp"

namespace plcml {

struct Trace {
  std::vector<double> samples;
  double sample_rate = 1.0;  // Hz
};

struct SlotPair {
  std::vector<double> ch1, ch2;
};

// Splits a synchronized two-channel recording into consecutive slots of
// slot_len samples; a trailing partial slot is discarded.
std::vector<SlotPair> slot(const Trace& ch1, const Trace& ch2, std::size_t slot_len);

// Single-slot amplitude statistics. skew and kurt divide the third and fourth
// central moments by the second central moment (not by sigma^3 / sigma^4);
// this matches the feature definitions the rest of the toolkit is built on.
// A zero-variance slot sets skew = kurt = 0 and the degenerate flag.
struct Moments {
  double max_abs = 0.0;
  double sum = 0.0;
  double sum2 = 0.0;
  double std_dev = 0.0;  // 1/(N-1) normalization
  double skew = 0.0;
  double kurt = 0.0;
  bool degenerate = false;
};
Moments moments(std::span<const double> slot);

// Approximate entropy with Chebyshev distance and self-matches included.
// Needs x.size() >= m + 2.
double apen(std::span<const double> x, std::size_t m, double r);

// Cross-channel statistics for one slot. diff_ent / sum_ent are approximate
// entropies of ch1-ch2 and ch1+ch2; corr_* are the amplitude moments of the
// full-lag normalized cross-correlation sequence.
struct PairStats {
  double pears = 0.0;
  double dist = 0.0;  // euclidean distance between the two slot vectors
  double dcor = 0.0;
  double diff_ent = 0.0;
  double sum_ent = 0.0;
  double corr_std = 0.0;
  double corr_skew = 0.0;
  double corr_kurt = 0.0;
  bool degenerate = false;
};
PairStats pair_stats(const SlotPair& pair, std::size_t apen_m, double apen_r_factor);

// Distance correlation from the double-centered pairwise distance matrices.
double distance_correlation(std::span<const double> x, std::span<const double> y);

// Burg maximum-entropy spectral estimate. One-sided PSD evaluated at n_bins
// midpoints spanning (0, fs/2); sums to the signal variance times the bin
// width. If a reflection coefficient reaches magnitude 1 the recursion stops
// early and order_reduced is set.
struct BurgSpectrum {
  std::vector<double> freqs;  // Hz, bin centers
  std::vector<double> psd;    // V^2/Hz, one-sided
  std::vector<double> ar;     // direct-form coefficients a_1..a_p
  double noise_var = 0.0;     // final prediction error power
  std::size_t order_used = 0;
  bool order_reduced = false;
};
BurgSpectrum burg_psd(std::span<const double> x, std::size_t order,
                      std::size_t n_bins, double sample_rate);

struct FeatureConfig {
  std::size_t slot_len = 2048;
  double peak_threshold = 0.0;  // |s| > threshold counts toward fPeak
  double freq_lo = 0.0;         // Hz band for fEnFr
  double freq_hi = 0.0;
  std::size_t burg_order = 16;
  std::size_t psd_bins = 256;
  std::size_t apen_m = 2;
  double apen_r_factor = 0.2;  // r = factor * std of the analyzed sequence
};

struct SpectralFeatures {
  double f_peak = 0.0;   // threshold-crossing count
  double en_fr = 0.0;    // PSD energy inside [freq_lo, freq_hi]
  double f_dist = 0.0;   // sample-index gap between the two largest |s|
  bool order_reduced = false;
};
SpectralFeatures spectral_features(std::span<const double> slot,
                                   const FeatureConfig& cfg, double sample_rate);

// One row per slot, 18 columns in the order of feature_names().
// Single-channel features are computed on channel 1.
struct FeatureMatrix {
  Tensor2 values;
  std::vector<std::uint8_t> degenerate;  // per slot
};
FeatureMatrix feature_matrix(const Trace& ch1, const Trace& ch2,
                             const FeatureConfig& cfg);
const std::array<std::string, 18>& feature_names();

void write_feature_csv(const FeatureMatrix& fm, const std::string& path);

// Column-wise z-score; zero-variance columns are left centered only.
struct Standardization {
  std::vector<double> mean, std_dev;
};
Standardization fit_standardization(const Tensor2& values);
Tensor2 apply_standardization(const Tensor2& values, const Standardization& s);

// Trace I/O. CSV: two numeric columns ch1,ch2 (optional header). Raw: one
// little-endian float64 stream holding interleaved ch1,ch2 pairs, described
// by a JSON sidecar {"sample_rate": hz, "length": samples_per_channel}.
std::pair<Trace, Trace> read_trace_csv(const std::string& path, double sample_rate);
std::pair<Trace, Trace> read_trace_raw(const std::string& data_path,
                                       const std::string& sidecar_path);
void write_trace_csv(const Trace& ch1, const Trace& ch2, const std::string& path);

}  // namespace plcml
