#include "plcml/gan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "plcml/csv.hpp"
#include "plcml/rng.hpp"

namespace plcml {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

Tensor2 latent_batch(std::size_t rows, std::size_t dim, Rng& rng) {
  Tensor2 z(rows, dim);
  for (auto& v : z.data) v = rng.normal();
  return z;
}

void column_stats(const Tensor2& rows, std::vector<double>& mean,
                  std::vector<double>& stddev) {
  mean.assign(rows.cols, 0.0);
  stddev.assign(rows.cols, 0.0);
  for (std::size_t r = 0; r < rows.rows; ++r)
    for (std::size_t c = 0; c < rows.cols; ++c) mean[c] += rows(r, c);
  for (double& v : mean) v /= static_cast<double>(rows.rows);
  if (rows.rows < 2) return;
  for (std::size_t r = 0; r < rows.rows; ++r)
    for (std::size_t c = 0; c < rows.cols; ++c) {
      const double d = rows(r, c) - mean[c];
      stddev[c] += d * d;
    }
  for (double& v : stddev) v = std::sqrt(v / static_cast<double>(rows.rows - 1));
}

}  // namespace

void GanConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("GanConfig: latent_dim must be >= 1");
  if (epochs < 1 || batch_size < 1 || critic_steps < 1)
    throw std::invalid_argument("GanConfig: epochs, batch size and critic steps must be positive");
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0))
    throw std::invalid_argument("GanConfig: learning rates must be positive");
}

ChannelCorpus synthesize_corpus(std::size_t n, const MultipathConfig& cfg,
                                std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synthesize_corpus: need at least one draw");
  ChannelCorpus corpus;
  corpus.grid = FrequencyGrid{cfg.band_lo, cfg.band_hi, cfg.check_bins};
  corpus.responses = Tensor2(n, cfg.check_bins);
  const Rng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const MultipathParams p = random_multipath(root.split(i).seed(), cfg);
    const ChannelResponse h = topdown_channel(p, corpus.grid);
    for (std::size_t b = 0; b < cfg.check_bins; ++b)
      corpus.responses(i, b) = 20.0 * std::log10(std::abs(h.h[b]));
  }
  return corpus;
}

double gan_value(const MlpModel& discriminator, const Tensor2& real_rows,
                 const Tensor2& fake_rows) {
  const ForwardPass rp = forward(discriminator, real_rows);
  const ForwardPass fp = forward(discriminator, fake_rows);
  double v = 0.0;
  for (std::size_t r = 0; r < real_rows.rows; ++r)
    v += std::log(clamp_prob(rp.output()(r, 0))) / static_cast<double>(real_rows.rows);
  for (std::size_t r = 0; r < fake_rows.rows; ++r)
    v += std::log(1.0 - clamp_prob(fp.output()(r, 0))) /
         static_cast<double>(fake_rows.rows);
  return v;
}

GanSystem gan_train(const ChannelCorpus& corpus, const GanConfig& cfg) {
  cfg.validate();
  const std::size_t n = corpus.responses.rows;
  const std::size_t bins = corpus.responses.cols;
  if (n < 10 * cfg.batch_size)
    throw std::invalid_argument("gan_train: corpus must hold at least 10 batches");

  GanSystem sys;
  sys.latent_dim = cfg.latent_dim;
  sys.db_lo = *std::min_element(corpus.responses.data.begin(), corpus.responses.data.end());
  sys.db_hi = *std::max_element(corpus.responses.data.begin(), corpus.responses.data.end());
  if (!(sys.db_hi > sys.db_lo))
    throw std::invalid_argument("gan_train: corpus has no dB spread");

  // Normalized corpus in [-1, 1].
  Tensor2 norm(n, bins);
  const double half_span = 0.5 * (sys.db_hi - sys.db_lo);
  for (std::size_t i = 0; i < norm.data.size(); ++i)
    norm.data[i] = (corpus.responses.data[i] - sys.db_lo) / half_span - 1.0;

  const Rng root(cfg.seed);

  std::vector<std::size_t> g_dims{cfg.latent_dim};
  g_dims.insert(g_dims.end(), cfg.generator_hidden.begin(), cfg.generator_hidden.end());
  g_dims.push_back(bins);
  std::vector<Activation> g_acts(cfg.generator_hidden.size(), Activation::Relu);
  g_acts.push_back(Activation::Tanh);
  sys.generator = make_mlp(g_dims, g_acts, root.split("generator").seed());

  std::vector<std::size_t> d_dims{bins};
  d_dims.insert(d_dims.end(), cfg.discriminator_hidden.begin(),
                cfg.discriminator_hidden.end());
  d_dims.push_back(1);
  std::vector<Activation> d_acts(cfg.discriminator_hidden.size(), Activation::Relu);
  d_acts.push_back(Activation::Sigmoid);
  sys.discriminator = make_mlp(d_dims, d_acts, root.split("discriminator").seed());

  TrainConfig d_opt, g_opt;
  d_opt.learning_rate = cfg.lr_discriminator;
  g_opt.learning_rate = cfg.lr_generator;
  AdamState d_state, g_state;
  d_state.init(sys.discriminator);
  g_state.init(sys.generator);

  Rng pick = root.split("real-rows");
  Rng latent = root.split("latents");

  const std::size_t steps = std::max<std::size_t>(1, n / cfg.batch_size);
  const auto bsz = static_cast<double>(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_value = 0.0, epoch_g = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      double value = 0.0;
      for (std::size_t k = 0; k < cfg.critic_steps; ++k) {
        // Discriminator pass: real batch stacked on a frozen-generator batch.
        std::vector<std::size_t> idx(cfg.batch_size);
        for (auto& i : idx) i = static_cast<std::size_t>(pick.below(n));
        const Tensor2 real = take_rows(norm, idx);
        const Tensor2 z = latent_batch(cfg.batch_size, cfg.latent_dim, latent);
        const ForwardPass g_pass = forward(sys.generator, z);
        const Tensor2& fake = g_pass.output();

        Tensor2 joint(2 * cfg.batch_size, bins);
        for (std::size_t r = 0; r < cfg.batch_size; ++r)
          for (std::size_t c = 0; c < bins; ++c) {
            joint(r, c) = real(r, c);
            joint(cfg.batch_size + r, c) = fake(r, c);
          }
        const ForwardPass d_pass = forward(sys.discriminator, joint);

        // Ascend mean log D(real) + mean log(1 - D(fake)): descend the negation.
        Tensor2 d_grad(2 * cfg.batch_size, 1);
        value = 0.0;
        for (std::size_t r = 0; r < cfg.batch_size; ++r) {
          const double pr = clamp_prob(d_pass.output()(r, 0));
          const double pf = clamp_prob(d_pass.output()(cfg.batch_size + r, 0));
          value += (std::log(pr) + std::log(1.0 - pf)) / bsz;
          d_grad(r, 0) = -1.0 / (bsz * pr);
          d_grad(cfg.batch_size + r, 0) = 1.0 / (bsz * (1.0 - pf));
        }
        const Gradients d_grads = backward_signal(sys.discriminator, d_pass, d_grad);
        apply_adam(sys.discriminator, d_grads, d_state, d_opt);
      }
      epoch_value += value;

      // Generator pass: maximize log D(G(y)) against the updated critic.
      const Tensor2 z2 = latent_batch(cfg.batch_size, cfg.latent_dim, latent);
      const ForwardPass g2 = forward(sys.generator, z2);
      const ForwardPass d2 = forward(sys.discriminator, g2.output());
      Tensor2 g_grad(cfg.batch_size, 1);
      double g_loss = 0.0;
      for (std::size_t r = 0; r < cfg.batch_size; ++r) {
        const double p = clamp_prob(d2.output()(r, 0));
        g_loss -= std::log(p) / bsz;
        g_grad(r, 0) = -1.0 / (bsz * p);
      }
      epoch_g += g_loss;
      const Gradients d_back = backward_signal(sys.discriminator, d2, g_grad);
      const Gradients g_grads = backward_signal(sys.generator, g2, d_back.input);
      apply_adam(sys.generator, g_grads, g_state, g_opt);

      if (!std::isfinite(value) || !std::isfinite(g_loss))
        throw std::runtime_error("gan_train: loss diverged at epoch " +
                                 std::to_string(epoch));
    }
    sys.history.d_value.push_back(epoch_value / static_cast<double>(steps));
    sys.history.g_loss.push_back(epoch_g / static_cast<double>(steps));
  }

  // Mode-collapse probe: spread of a generated batch against the corpus.
  const Tensor2 probe = gan_generate(sys, 256, root.split("collapse-probe").seed());
  std::vector<double> gm, gs, cm, cs;
  column_stats(probe, gm, gs);
  column_stats(corpus.responses, cm, cs);
  double gen_spread = 0.0, corpus_spread = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    gen_spread += gs[b];
    corpus_spread += cs[b];
  }
  sys.mode_collapse = gen_spread < 1e-3 * corpus_spread;
  return sys;
}

Tensor2 gan_generate(const GanSystem& system, std::size_t n, std::uint64_t seed) {
  if (system.generator.layers.empty())
    throw std::invalid_argument("gan_generate: generator is untrained");
  Rng rng(seed);
  const Tensor2 z = latent_batch(n, system.latent_dim, rng);
  const ForwardPass pass = forward(system.generator, z);
  Tensor2 out = pass.output();
  const double half_span = 0.5 * (system.db_hi - system.db_lo);
  for (double& v : out.data) v = system.db_lo + (v + 1.0) * half_span;
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

GanReport evaluate_gan_samples(const Tensor2& generated, const ChannelCorpus& corpus) {
  if (generated.cols != corpus.responses.cols)
    throw std::invalid_argument("evaluate_gan_samples: bin count mismatch");
  if (generated.rows < 2 || corpus.responses.rows < 2)
    throw std::invalid_argument("evaluate_gan_samples: need at least two rows per side");
  GanReport rep;
  rep.n_samples = generated.rows;
  std::vector<double> gm, gs, cm, cs;
  column_stats(generated, gm, gs);
  column_stats(corpus.responses, cm, cs);
  rep.mean_err_db.resize(generated.cols);
  rep.std_ratio.resize(generated.cols);
  for (std::size_t b = 0; b < generated.cols; ++b) {
    rep.mean_err_db[b] = std::abs(gm[b] - cm[b]);
    rep.std_ratio[b] = cs[b] > 0.0
                           ? gs[b] / cs[b]
                           : (gs[b] == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
    if (rep.mean_err_db[b] <= 5.0) ++rep.bins_within_5db;
  }
  auto row_means = [](const Tensor2& t) {
    std::vector<double> m(t.rows, 0.0);
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (const double v : t.row(r)) m[r] += v;
      m[r] /= static_cast<double>(t.cols);
    }
    return m;
  };
  rep.ks_avg_gain = ks_statistic(row_means(generated), row_means(corpus.responses));
  return rep;
}

GanReport evaluate_gan(const GanSystem& system, const ChannelCorpus& corpus,
                       std::size_t n_samples, std::uint64_t seed) {
  return evaluate_gan_samples(gan_generate(system, n_samples, seed), corpus);
}

std::string GanReport::to_text() const {
  std::ostringstream os;
  const std::size_t bins = mean_err_db.size();
  double worst_mean = 0.0, mean_mean = 0.0;
  for (const double v : mean_err_db) {
    worst_mean = std::max(worst_mean, v);
    mean_mean += v;
  }
  mean_mean /= bins > 0 ? static_cast<double>(bins) : 1.0;
  os << "samples: " << n_samples << "\n";
  os << "bins: " << bins << "\n";
  os << "mean |generated - corpus| per bin: avg " << format_double(mean_mean)
     << " dB, worst " << format_double(worst_mean) << " dB\n";
  os << "bins within 5 dB: " << bins_within_5db << " ("
     << format_double(bins > 0 ? 100.0 * static_cast<double>(bins_within_5db) /
                                     static_cast<double>(bins)
                               : 0.0)
     << "%)\n";
  double ratio_lo = std::numeric_limits<double>::infinity(), ratio_hi = 0.0;
  for (const double v : std_ratio) {
    ratio_lo = std::min(ratio_lo, v);
    ratio_hi = std::max(ratio_hi, v);
  }
  os << "per-bin std ratio range: [" << format_double(ratio_lo) << ", "
     << format_double(ratio_hi) << "]\n";
  os << "KS statistic of average gain: " << format_double(ks_avg_gain) << "\n";
  return os.str();
}

void write_corpus_csv(const std::string& path, const ChannelCorpus& corpus) {
  CsvWriter w(path);
  std::vector<std::string> names;
  names.reserve(corpus.responses.cols);
  for (std::size_t b = 0; b < corpus.responses.cols; ++b)
    names.push_back(format_double(corpus.grid.freq(b)));
  w.header(names);
  for (std::size_t r = 0; r < corpus.responses.rows; ++r) {
    for (std::size_t c = 0; c < corpus.responses.cols; ++c) w.cell(corpus.responses(r, c));
    w.end_row();
  }
  w.close();
}

}  // namespace plcml
