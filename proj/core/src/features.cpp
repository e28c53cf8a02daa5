#include "plcml/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plcml/csv.hpp"

namespace plcml {

std::vector<SlotPair> slot(const Trace& ch1, const Trace& ch2, std::size_t slot_len) {
  if (slot_len < 4) throw std::invalid_argument("slot: slot_len must be >= 4");
  if (ch1.samples.size() != ch2.samples.size())
    throw std::invalid_argument("slot: channel lengths differ");
  if (ch1.sample_rate != ch2.sample_rate)
    throw std::invalid_argument("slot: channel sample rates differ");
  const std::size_t n_slots = ch1.samples.size() / slot_len;
  std::vector<SlotPair> out(n_slots);
  for (std::size_t s = 0; s < n_slots; ++s) {
    const auto begin = static_cast<long>(s * slot_len);
    const auto end = begin + static_cast<long>(slot_len);
    out[s].ch1.assign(ch1.samples.begin() + begin, ch1.samples.begin() + end);
    out[s].ch2.assign(ch2.samples.begin() + begin, ch2.samples.begin() + end);
  }
  return out;
}

Moments moments(std::span<const double> slot) {
  const std::size_t n = slot.size();
  if (n < 2) throw std::invalid_argument("moments: need >= 2 samples");
  Moments m;
  double mean = 0.0;
  for (const double v : slot) {
    m.max_abs = std::max(m.max_abs, std::abs(v));
    m.sum += v;
    m.sum2 += v * v;
    mean += v;
  }
  mean /= static_cast<double>(n);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0, ss = 0.0;
  for (const double v : slot) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
    ss += d2;
  }
  m.std_dev = std::sqrt(ss / static_cast<double>(n - 1));
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 == 0.0) {
    m.degenerate = true;
    m.skew = 0.0;
    m.kurt = 0.0;
  } else {
    m.skew = m3 / m2;
    m.kurt = m4 / m2;
  }
  return m;
}

double apen(std::span<const double> x, std::size_t m, double r) {
  const std::size_t n = x.size();
  if (m == 0) throw std::invalid_argument("apen: m must be >= 1");
  if (n < m + 2) throw std::invalid_argument("apen: sequence too short for m");
  if (r < 0.0) throw std::invalid_argument("apen: r must be >= 0");

  auto phi = [&](std::size_t mm) {
    const std::size_t count = n - mm + 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      std::size_t matches = 0;
      for (std::size_t j = 0; j < count; ++j) {
        bool ok = true;
        for (std::size_t k = 0; k < mm; ++k) {
          if (std::abs(x[i + k] - x[j + k]) > r) {
            ok = false;
            break;
          }
        }
        if (ok) ++matches;
      }
      acc += std::log(static_cast<double>(matches) / static_cast<double>(count));
    }
    return acc / static_cast<double>(count);
  };
  return phi(m) - phi(m + 1);
}

double distance_correlation(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2)
    throw std::invalid_argument("distance_correlation: bad input sizes");

  auto centered = [&](std::span<const double> s) {
    Tensor2 a(n, n);
    std::vector<double> row_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double d = std::abs(s[i] - s[j]);
        a(i, j) = d;
        row_mean[i] += d;
      }
      grand += row_mean[i];
      row_mean[i] /= static_cast<double>(n);
    }
    grand /= static_cast<double>(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        a(i, j) += grand - row_mean[i] - row_mean[j];
    return a;
  };

  const Tensor2 a = centered(x);
  const Tensor2 b = centered(y);
  double dcov2 = 0.0, dvarx = 0.0, dvary = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    dcov2 += a.data[i] * b.data[i];
    dvarx += a.data[i] * a.data[i];
    dvary += b.data[i] * b.data[i];
  }
  const double denom = std::sqrt(dvarx * dvary);
  if (denom <= 0.0) return 0.0;
  const double dcor2 = std::max(0.0, dcov2 / denom);
  return std::min(1.0, std::sqrt(dcor2));
}

BurgSpectrum burg_psd(std::span<const double> x, std::size_t order,
                      std::size_t n_bins, double sample_rate) {
  const std::size_t n = x.size();
  if (order == 0 || order >= n)
    throw std::invalid_argument("burg_psd: order must be in [1, N)");
  if (n_bins == 0) throw std::invalid_argument("burg_psd: n_bins must be >= 1");
  if (sample_rate <= 0.0) throw std::invalid_argument("burg_psd: bad sample rate");

  BurgSpectrum out;
  double e = 0.0;
  for (const double v : x) e += v * v;
  e /= static_cast<double>(n);

  std::vector<double> f(x.begin(), x.end());
  std::vector<double> b(x.begin(), x.end());
  std::vector<double> a;  // direct-form coefficients, grows per stage

  for (std::size_t m = 1; m <= order; ++m) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = m; i < n; ++i) {
      num += f[i] * b[i - 1];
      den += f[i] * f[i] + b[i - 1] * b[i - 1];
    }
    if (den <= 0.0) {
      out.order_reduced = true;
      break;
    }
    const double k = -2.0 * num / den;
    if (std::abs(k) >= 1.0) {
      out.order_reduced = true;
      break;
    }
    std::vector<double> a_next(m);
    for (std::size_t i = 0; i + 1 < m; ++i) a_next[i] = a[i] + k * a[m - 2 - i];
    a_next[m - 1] = k;
    a = std::move(a_next);

    for (std::size_t i = n - 1; i >= m; --i) {
      const double fo = f[i];
      const double bo = b[i - 1];
      f[i] = fo + k * bo;
      b[i] = bo + k * fo;
      if (i == m) break;
    }
    e *= 1.0 - k * k;
  }

  out.ar = a;
  out.order_used = a.size();
  out.noise_var = e;
  out.freqs.resize(n_bins);
  out.psd.resize(n_bins);
  const double df = 0.5 * sample_rate / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    const double freq = (static_cast<double>(i) + 0.5) * df;
    out.freqs[i] = freq;
    const double w = 2.0 * M_PI * freq / sample_rate;
    std::complex<double> denom(1.0, 0.0);
    for (std::size_t p = 0; p < a.size(); ++p)
      denom += a[p] * std::polar(1.0, -w * static_cast<double>(p + 1));
    // one-sided: folds negative frequencies, hence the factor 2
    out.psd[i] = 2.0 * e / (sample_rate * std::norm(denom));
  }
  return out;
}

SpectralFeatures spectral_features(std::span<const double> slot,
                                   const FeatureConfig& cfg, double sample_rate) {
  if (slot.size() < 4) throw std::invalid_argument("spectral_features: slot too short");
  SpectralFeatures out;

  for (const double v : slot)
    if (std::abs(v) > cfg.peak_threshold) out.f_peak += 1.0;

  const BurgSpectrum spec = burg_psd(slot, cfg.burg_order, cfg.psd_bins, sample_rate);
  out.order_reduced = spec.order_reduced;
  const double df = 0.5 * sample_rate / static_cast<double>(cfg.psd_bins);
  for (std::size_t i = 0; i < spec.freqs.size(); ++i)
    if (spec.freqs[i] >= cfg.freq_lo && spec.freqs[i] <= cfg.freq_hi)
      out.en_fr += spec.psd[i] * df;

  // Indices of the two largest |s|; equal values resolve to earlier indices.
  std::size_t i1 = 0;
  for (std::size_t i = 1; i < slot.size(); ++i)
    if (std::abs(slot[i]) > std::abs(slot[i1])) i1 = i;
  std::size_t i2 = i1 == 0 ? 1 : 0;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    if (i == i1) continue;
    if (std::abs(slot[i]) > std::abs(slot[i2])) i2 = i;
  }
  out.f_dist = std::abs(static_cast<double>(i1) - static_cast<double>(i2));
  return out;
}

PairStats pair_stats(const SlotPair& pair, std::size_t apen_m, double apen_r_factor) {
  const std::size_t n = pair.ch1.size();
  if (n != pair.ch2.size() || n < apen_m + 2)
    throw std::invalid_argument("pair_stats: bad slot sizes");
  PairStats ps;

  double mean1 = 0.0, mean2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean1 += pair.ch1[i];
    mean2 += pair.ch2[i];
  }
  mean1 /= static_cast<double>(n);
  mean2 /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pair.ch1[i] - mean1;
    const double dy = pair.ch2[i] - mean2;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx > 0.0 && syy > 0.0) {
    ps.pears = sxy / std::sqrt(sxx * syy);
  } else {
    ps.degenerate = true;
  }

  ps.dist = euclidean_distance(pair.ch1, pair.ch2);
  ps.dcor = distance_correlation(pair.ch1, pair.ch2);

  auto entropy_of = [&](const std::vector<double>& seq) {
    const Moments m = moments(seq);
    return apen(seq, apen_m, apen_r_factor * m.std_dev);
  };
  std::vector<double> diff(n), sum(n);
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = pair.ch1[i] - pair.ch2[i];
    sum[i] = pair.ch1[i] + pair.ch2[i];
  }
  ps.diff_ent = entropy_of(diff);
  ps.sum_ent = entropy_of(sum);

  // Full-lag cross-correlation, normalized by the zero-lag energies.
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e1 += pair.ch1[i] * pair.ch1[i];
    e2 += pair.ch2[i] * pair.ch2[i];
  }
  const double norm = std::sqrt(e1 * e2);
  if (norm <= 0.0) {
    ps.degenerate = true;
    return ps;
  }
  std::vector<double> xcorr(2 * n - 1, 0.0);
  for (long lag = -static_cast<long>(n) + 1; lag < static_cast<long>(n); ++lag) {
    double acc = 0.0;
    const long lo = std::max<long>(0, -lag);
    const long hi = std::min<long>(static_cast<long>(n), static_cast<long>(n) - lag);
    for (long j = lo; j < hi; ++j)
      acc += pair.ch1[static_cast<std::size_t>(j + lag)] *
             pair.ch2[static_cast<std::size_t>(j)];
    xcorr[static_cast<std::size_t>(lag + static_cast<long>(n) - 1)] = acc / norm;
  }
  const Moments cm = moments(xcorr);
  ps.corr_std = cm.std_dev;
  ps.corr_skew = cm.skew;
  ps.corr_kurt = cm.kurt;
  if (cm.degenerate) ps.degenerate = true;
  return ps;
}

const std::array<std::string, 18>& feature_names() {
  static const std::array<std::string, 18> names = {
      "maxAbs", "sum",  "sum2",    "std",   "skew",  "kurt",
      "pears",  "dist", "dCor",    "ent",   "diffEnt", "sumEnt",
      "fPeak",  "fEnFr", "fdist",  "corrStd", "corrSkew", "corrKurt"};
  return names;
}

FeatureMatrix feature_matrix(const Trace& ch1, const Trace& ch2,
                             const FeatureConfig& cfg) {
  const std::vector<SlotPair> slots = slot(ch1, ch2, cfg.slot_len);
  if (slots.empty()) throw std::invalid_argument("feature_matrix: no full slots");

  FeatureMatrix fm;
  fm.values = Tensor2(slots.size(), 18);
  fm.degenerate.assign(slots.size(), 0);

  for (std::size_t s = 0; s < slots.size(); ++s) {
    const SlotPair& sp = slots[s];
    const Moments m1 = moments(sp.ch1);
    const PairStats ps = pair_stats(sp, cfg.apen_m, cfg.apen_r_factor);
    const SpectralFeatures sf = spectral_features(sp.ch1, cfg, ch1.sample_rate);
    const double ent = apen(sp.ch1, cfg.apen_m, cfg.apen_r_factor * m1.std_dev);

    double* row = fm.values.data.data() + s * 18;
    row[0] = m1.max_abs;
    row[1] = m1.sum;
    row[2] = m1.sum2;
    row[3] = m1.std_dev;
    row[4] = m1.skew;
    row[5] = m1.kurt;
    row[6] = ps.pears;
    row[7] = ps.dist;
    row[8] = ps.dcor;
    row[9] = ent;
    row[10] = ps.diff_ent;
    row[11] = ps.sum_ent;
    row[12] = sf.f_peak;
    row[13] = sf.en_fr;
    row[14] = sf.f_dist;
    row[15] = ps.corr_std;
    row[16] = ps.corr_skew;
    row[17] = ps.corr_kurt;
    fm.degenerate[s] = (m1.degenerate || ps.degenerate) ? 1 : 0;
  }
  return fm;
}

void write_feature_csv(const FeatureMatrix& fm, const std::string& path) {
  CsvWriter w(path);
  w.header({feature_names().begin(), feature_names().end()});
  for (std::size_t r = 0; r < fm.values.rows; ++r) {
    for (const double v : fm.values.row(r)) w.cell(v);
    w.end_row();
  }
}

Standardization fit_standardization(const Tensor2& values) {
  Standardization s;
  s.mean.assign(values.cols, 0.0);
  s.std_dev.assign(values.cols, 0.0);
  if (values.rows == 0) return s;
  for (std::size_t r = 0; r < values.rows; ++r)
    for (std::size_t c = 0; c < values.cols; ++c) s.mean[c] += values(r, c);
  for (double& m : s.mean) m /= static_cast<double>(values.rows);
  if (values.rows > 1) {
    for (std::size_t r = 0; r < values.rows; ++r)
      for (std::size_t c = 0; c < values.cols; ++c) {
        const double d = values(r, c) - s.mean[c];
        s.std_dev[c] += d * d;
      }
    for (double& v : s.std_dev) v = std::sqrt(v / static_cast<double>(values.rows - 1));
  }
  return s;
}

Tensor2 apply_standardization(const Tensor2& values, const Standardization& s) {
  if (values.cols != s.mean.size())
    throw std::invalid_argument("apply_standardization: column mismatch");
  Tensor2 out = values;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) {
      out(r, c) -= s.mean[c];
      if (s.std_dev[c] > 0.0) out(r, c) /= s.std_dev[c];
    }
  return out;
}

std::pair<Trace, Trace> read_trace_csv(const std::string& path, double sample_rate) {
  const auto rows = read_numeric_csv(path);
  Trace a, b;
  a.sample_rate = sample_rate;
  b.sample_rate = sample_rate;
  for (const auto& row : rows) {
    if (row.size() != 2)
      throw std::runtime_error("trace csv must have exactly two columns: " + path);
    a.samples.push_back(row[0]);
    b.samples.push_back(row[1]);
  }
  return {std::move(a), std::move(b)};
}

std::pair<Trace, Trace> read_trace_raw(const std::string& data_path,
                                       const std::string& sidecar_path) {
  std::ifstream meta(sidecar_path, std::ios::binary);
  if (!meta) throw std::runtime_error("cannot open sidecar: " + sidecar_path);
  nlohmann::json j;
  meta >> j;
  const double rate = j.at("sample_rate").get<double>();
  const std::size_t length = j.at("length").get<std::size_t>();

  std::ifstream in(data_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace data: " + data_path);
  std::vector<double> buf(2 * length);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(double))
    throw std::runtime_error("trace data shorter than sidecar length: " + data_path);

  Trace a, b;
  a.sample_rate = rate;
  b.sample_rate = rate;
  a.samples.resize(length);
  b.samples.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    a.samples[i] = buf[2 * i];
    b.samples[i] = buf[2 * i + 1];
  }
  return {std::move(a), std::move(b)};
}

void write_trace_csv(const Trace& ch1, const Trace& ch2, const std::string& path) {
  if (ch1.samples.size() != ch2.samples.size())
    throw std::invalid_argument("write_trace_csv: channel lengths differ");
  CsvWriter w(path);
  w.header({"ch1", "ch2"});
  for (std::size_t i = 0; i < ch1.samples.size(); ++i) {
    w.cell(ch1.samples[i]).cell(ch2.samples[i]);
    w.end_row();
  }
}

}  // namespace plcml
