#include "plcml/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "plcml/csv.hpp"
#include "plcml/parallel.hpp"
#include "plcml/rng.hpp"
#include "plcml/tensor.hpp"

namespace plcml {
namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

std::vector<std::size_t> node_degrees(const Topology& topo) {
  std::vector<std::size_t> deg(topo.nodes.size(), 0);
  for (const auto& e : topo.edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

std::size_t pick_observation(const Topology& topo) {
  const auto deg = node_degrees(topo);
  std::size_t best = 0;
  for (std::size_t i = 1; i < deg.size(); ++i)
    if (deg[i] > deg[best]) best = i;
  return best;  // first maximum, so the lowest id wins ties
}

std::vector<std::size_t> pick_leaves(const Topology& topo, std::size_t obs) {
  const auto deg = node_degrees(topo);
  std::vector<std::size_t> leaves;
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] == 1 && i != obs) leaves.push_back(i);
  return leaves;
}

std::vector<double> signal_magnitudes(const Topology& topo, const DiagConfig& cfg,
                                      const FrequencyGrid& grid, std::size_t obs,
                                      std::size_t leaf) {
  std::vector<double> mag(grid.n_bins);
  if (cfg.signal == DiagSignal::H) {
    const ChannelResponse resp = tl_transfer(topo, obs, leaf, grid);
    for (std::size_t k = 0; k < grid.n_bins; ++k) mag[k] = std::abs(resp.h[k]);
    return mag;
  }
  const LineState state = input_admittance(topo, obs, grid, cfg.rho_z0);
  const auto& values = cfg.signal == DiagSignal::Yin ? state.y_in : state.rho_in;
  for (std::size_t k = 0; k < grid.n_bins; ++k) mag[k] = std::abs(values[k]);
  return mag;
}

bool usable_ratio(const std::vector<double>& ratio) {
  for (double v : ratio)
    if (!std::isfinite(v) || v <= 0.0) return false;
  return true;
}

Anomaly draw_anomaly(const Topology& base, const DiagConfig& cfg,
                     AnomalyClass label, Rng& rng) {
  switch (label) {
    case AnomalyClass::LoadImpedanceChange: {
      const std::size_t node = rng.below(base.nodes.size());
      // A replacement inside (or marginally outside) the healthy range is
      // indistinguishable from no change, so redraw until it clears the
      // range by the configured guard factor.
      const bool variable = cfg.load_mode == LoadMode::RandomVariable;
      const double lo = (variable ? cfg.jitter_lo : cfg.nominal_load) / cfg.change_guard;
      const double hi = (variable ? cfg.jitter_hi : cfg.nominal_load) * cfg.change_guard;
      double z = rng.log_uniform(cfg.change_lo, cfg.change_hi);
      while (z >= lo && z <= hi) z = rng.log_uniform(cfg.change_lo, cfg.change_hi);
      return LoadChange{node, Load::impedance(z)};
    }
    case AnomalyClass::ConcentratedFault: {
      const std::size_t edge = rng.below(base.edges.size());
      const double len = base.edges[edge].length;
      const double position = rng.uniform(0.05, 0.95) * len;
      const double r = rng.log_uniform(cfg.shunt_lo, cfg.shunt_hi);
      return ConcentratedFault{edge, position, Load::impedance(r)};
    }
    case AnomalyClass::DistributedFault: {
      const std::size_t edge = rng.below(base.edges.size());
      const double len = base.edges[edge].length;
      const double start = rng.uniform(0.0, 0.3) * len;
      const double length = rng.uniform(0.5, 0.95) * (len - start);
      const double factor = rng.log_uniform(cfg.fault_factor_lo, cfg.fault_factor_hi);
      return DistributedFault{edge, start, length, factor, true};
    }
    default:
      throw std::logic_error("draw_anomaly: class carries no anomaly");
  }
}

struct ZScore {
  std::vector<double> mean, std;
};

ZScore fit_zscore(const Tensor2& x) {
  ZScore z;
  z.mean.assign(x.cols, 0.0);
  z.std.assign(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) z.mean[c] += x(r, c);
  for (double& m : z.mean) m /= static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x(r, c) - z.mean[c];
      z.std[c] += d * d;
    }
  for (double& s : z.std) {
    s = std::sqrt(s / static_cast<double>(x.rows));
    if (s < 1e-12) s = 1.0;
  }
  return z;
}

// Ratios deviate multiplicatively, so the classifiers work on log-ratios;
// the z-scoring statistics are fitted in log space too.
double log_feature(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw std::invalid_argument("diagnostics: ratios must be positive and finite");
  return std::log(ratio);
}

std::vector<double> apply_zscore(const DiagModel& model, const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c)
    out[c] = (log_feature(x[c]) - model.mean[c]) / model.std[c];
  return out;
}

// Deterministic subsample preserving ascending order.
std::vector<std::size_t> subsample(std::vector<std::size_t> idx, std::size_t cap,
                                   Rng rng) {
  if (idx.size() <= cap) return idx;
  rng.shuffle(idx);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor2 gather_rows(const std::vector<DiagSample>& data,
                    const std::vector<std::size_t>& idx, const ZScore& z) {
  const std::size_t dim = data.front().ratio.size();
  Tensor2 x(idx.size(), dim);
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < dim; ++c)
      x(r, c) = (log_feature(data[idx[r]].ratio[c]) - z.mean[c]) / z.std[c];
  return x;
}

std::vector<int> gather_labels(const std::vector<DiagSample>& data,
                               const std::vector<std::size_t>& idx) {
  std::vector<int> y(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r)
    y[r] = static_cast<int>(data[idx[r]].label);
  return y;
}

}  // namespace

void DiagConfig::validate() const {
  require(n_nodes >= 3, "DiagConfig: need at least 3 nodes");
  require(avg_edge_len > 0.0, "DiagConfig: avg_edge_len must be positive");
  require(n_realizations > 0, "DiagConfig: n_realizations must be positive");
  require(band_lo > 0.0 && band_hi > band_lo && band_spacing > 0.0,
          "DiagConfig: invalid frequency band");
  require(nominal_load > 0.0, "DiagConfig: nominal_load must be positive");
  require(rho_z0 > 0.0, "DiagConfig: rho_z0 must be positive");
  require(jitter_lo > 0.0 && jitter_hi > jitter_lo, "DiagConfig: invalid jitter band");
  require(change_lo > 0.0 && change_hi > change_lo, "DiagConfig: invalid change band");
  require(change_guard >= 1.0, "DiagConfig: change_guard must be at least 1");
  require(change_lo < jitter_lo / change_guard && change_hi > jitter_hi * change_guard,
          "DiagConfig: change band must extend beyond the guarded jitter band");
  require(change_lo < nominal_load / change_guard &&
              change_hi > nominal_load * change_guard,
          "DiagConfig: change band must extend beyond the guarded nominal load");
  require(shunt_lo > 0.0 && shunt_hi > shunt_lo, "DiagConfig: invalid shunt band");
  require(fault_factor_lo > 1.0 && fault_factor_hi > fault_factor_lo,
          "DiagConfig: fault factors must exceed 1");
}

DiagDataset build_diag_dataset(const DiagConfig& cfg, int threads) {
  cfg.validate();
  Rng root(cfg.seed);

  DiagDataset out;
  out.grid = FrequencyGrid::from_band(cfg.band_lo, cfg.band_hi, cfg.band_spacing);
  const double area_side = 1000.0 * std::sqrt(static_cast<double>(cfg.n_nodes));
  out.base = topo_random(cfg.n_nodes, area_side, cfg.avg_edge_len,
                         root.split("topology").seed(),
                         Load::impedance(cfg.nominal_load));
  out.observation = pick_observation(out.base);
  const std::vector<std::size_t> leaves = pick_leaves(out.base, out.observation);
  require(!leaves.empty(), "build_diag_dataset: topology has no leaf to probe");

  // References come from the nominal grid and never change, so a healthy
  // constant-load realization divides a signal by itself, bin for bin.
  const std::vector<double> ref_node =
      cfg.signal == DiagSignal::H
          ? std::vector<double>{}
          : signal_magnitudes(out.base, cfg, out.grid, out.observation, 0);
  std::vector<std::vector<double>> ref_leaf;
  if (cfg.signal == DiagSignal::H) {
    ref_leaf.reserve(leaves.size());
    for (std::size_t leaf : leaves)
      ref_leaf.push_back(signal_magnitudes(out.base, cfg, out.grid, out.observation, leaf));
  }
  auto check_reference = [](const std::vector<double>& ref) {
    for (double v : ref)
      if (!std::isfinite(v) || v <= 1e-15)
        throw std::runtime_error(
            "build_diag_dataset: reference signal vanishes in the band");
  };
  if (cfg.signal == DiagSignal::H) {
    for (const auto& ref : ref_leaf) check_reference(ref);
  } else {
    check_reference(ref_node);
  }

  out.samples.resize(cfg.n_realizations);
  std::vector<std::size_t> redraws(cfg.n_realizations, 0);
  const Rng realization_root = root.split("realizations");

  parallel_for(cfg.n_realizations, threads, [&](std::size_t i) {
    Rng rng = Rng(realization_root.seed()).split(i);
    const auto label = static_cast<AnomalyClass>(static_cast<int>(i % 4) + 1);

    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt >= 64)
        throw std::runtime_error("build_diag_dataset: realization keeps degenerating");

      Topology topo = out.base;
      if (cfg.load_mode == LoadMode::RandomVariable)
        for (auto& node : topo.nodes)
          node.load = Load::impedance(rng.log_uniform(cfg.jitter_lo, cfg.jitter_hi));

      const std::size_t leaf =
          cfg.signal == DiagSignal::H ? leaves[rng.below(leaves.size())] : 0;
      std::size_t leaf_pos = 0;
      if (cfg.signal == DiagSignal::H)
        leaf_pos = static_cast<std::size_t>(
            std::find(leaves.begin(), leaves.end(), leaf) - leaves.begin());

      if (label != AnomalyClass::Unperturbed)
        topo = perturb(topo, draw_anomaly(out.base, cfg, label, rng));

      const std::vector<double> meas =
          signal_magnitudes(topo, cfg, out.grid, out.observation, leaf);
      const std::vector<double>& ref =
          cfg.signal == DiagSignal::H ? ref_leaf[leaf_pos] : ref_node;

      std::vector<double> ratio(out.grid.n_bins);
      for (std::size_t k = 0; k < out.grid.n_bins; ++k) ratio[k] = meas[k] / ref[k];
      if (!usable_ratio(ratio)) {
        ++redraws[i];
        continue;
      }
      out.samples[i] = DiagSample{std::move(ratio), label};
      break;
    }
  });

  for (std::size_t r : redraws) out.resampled += r;
  return out;
}

DiagTrained train_diag(const std::vector<DiagSample>& data, const DiagTrainConfig& cfg) {
  require(!data.empty(), "train_diag: empty dataset");
  require(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0,
          "train_diag: train_fraction must lie in (0, 1)");
  const std::size_t dim = data.front().ratio.size();
  for (const auto& s : data)
    require(s.ratio.size() == dim, "train_diag: inconsistent feature width");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<int>(data[i].label)].push_back(i);

  DiagTrained out;
  out.model.kind = cfg.kind;
  Rng root(cfg.seed);
  const Rng split_root = root.split("split");
  for (auto& [cls, idx] : by_class) {
    require(idx.size() >= 2, "train_diag: every class needs at least 2 samples");
    Rng rng = Rng(split_root.seed()).split(static_cast<std::uint64_t>(cls));
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(
        cfg.train_fraction * static_cast<double>(idx.size()));
    const std::size_t take = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    out.split.train.insert(out.split.train.end(), idx.begin(), idx.begin() + take);
    out.split.test.insert(out.split.test.end(), idx.begin() + take, idx.end());
    out.model.classes.push_back(cls);
  }
  std::sort(out.split.train.begin(), out.split.train.end());
  std::sort(out.split.test.begin(), out.split.test.end());

  ZScore plain;  // identity transform while fitting the real one
  plain.mean.assign(dim, 0.0);
  plain.std.assign(dim, 1.0);
  const Tensor2 raw = gather_rows(data, out.split.train, plain);
  const ZScore z = fit_zscore(raw);
  out.model.mean = z.mean;
  out.model.std = z.std;

  switch (cfg.kind) {
    case DiagClassifier::Mlp100: {
      const Tensor2 x = gather_rows(data, out.split.train, z);
      const std::size_t n_classes = out.model.classes.size();
      Tensor2 targets(x.rows, n_classes);
      for (std::size_t r = 0; r < x.rows; ++r) {
        const int label = static_cast<int>(data[out.split.train[r]].label);
        const auto pos = std::lower_bound(out.model.classes.begin(),
                                          out.model.classes.end(), label) -
                         out.model.classes.begin();
        targets(r, static_cast<std::size_t>(pos)) = 1.0;
      }
      out.model.mlp = make_mlp({dim, cfg.hidden, n_classes},
                               {Activation::Tanh, Activation::Softmax},
                               root.split("init").seed());
      TrainConfig tc;
      tc.learning_rate = cfg.learning_rate;
      tc.batch_size = cfg.batch_size;
      tc.epochs = cfg.epochs;
      tc.seed = root.split("train").seed();
      tc.loss = LossKind::CrossEntropy;
      train(out.model.mlp, LabeledDataset{x, targets}, tc);
      break;
    }
    case DiagClassifier::SvmOvr: {
      const auto rows = subsample(out.split.train, cfg.svm_subsample, root.split("svm"));
      const Tensor2 x = gather_rows(data, rows, z);
      SvmKernel kernel;
      kernel.sigma = median_pairwise_distance(x);
      SvmTrainOptions opts;
      opts.c = cfg.svm_c;
      opts.seed = root.split("svm-train").seed();
      out.model.svm = svm_ovr_train(x, gather_labels(data, rows), kernel, opts);
      break;
    }
    case DiagClassifier::Knn: {
      const auto rows = subsample(out.split.train, cfg.knn_subsample, root.split("knn"));
      out.model.knn = KnnModel{gather_rows(data, rows, z), gather_labels(data, rows),
                               cfg.knn_k};
      break;
    }
  }
  return out;
}

int diag_predict(const DiagModel& model, const std::vector<double>& ratio) {
  require(ratio.size() == model.mean.size(), "diag_predict: feature width mismatch");
  const std::vector<double> x = apply_zscore(model, ratio);
  switch (model.kind) {
    case DiagClassifier::Mlp100: {
      Tensor2 batch(1, x.size());
      std::copy(x.begin(), x.end(), batch.data.begin());
      const ForwardPass pass = forward(model.mlp, batch);
      const auto out = pass.activations.back().row(0);
      std::size_t best = 0;
      for (std::size_t c = 1; c < out.size(); ++c)
        if (out[c] > out[best]) best = c;
      return model.classes[best];
    }
    case DiagClassifier::SvmOvr:
      return svm_ovr_predict(model.svm, x);
    case DiagClassifier::Knn:
      return knn_predict(model.knn, x);
  }
  throw std::logic_error("diag_predict: unknown classifier kind");
}

DiagEval evaluate_diag(const DiagModel& model, const std::vector<DiagSample>& data,
                       const std::vector<std::size_t>& test_idx) {
  require(!test_idx.empty(), "evaluate_diag: empty test set");
  DiagEval eval;
  eval.classes = model.classes;
  const std::size_t k = eval.classes.size();
  eval.confusion.assign(k, std::vector<std::size_t>(k, 0));

  auto class_pos = [&](int label) {
    const auto it = std::lower_bound(eval.classes.begin(), eval.classes.end(), label);
    require(it != eval.classes.end() && *it == label,
            "evaluate_diag: sample label unseen in training");
    return static_cast<std::size_t>(it - eval.classes.begin());
  };

  const int healthy = static_cast<int>(AnomalyClass::Unperturbed);
  std::size_t correct = 0, detect_correct = 0;
  for (std::size_t i : test_idx) {
    const int truth = static_cast<int>(data[i].label);
    const int pred = diag_predict(model, data[i].ratio);
    ++eval.confusion[class_pos(truth)][class_pos(pred)];
    if (pred == truth) ++correct;
    if ((pred == healthy) == (truth == healthy)) ++detect_correct;
  }
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());

  eval.per_class.assign(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t row_total = 0;
    for (std::size_t c = 0; c < k; ++c) row_total += eval.confusion[r][c];
    if (row_total > 0)
      eval.per_class[r] =
          static_cast<double>(eval.confusion[r][r]) / static_cast<double>(row_total);
  }

  const bool has_healthy =
      std::binary_search(eval.classes.begin(), eval.classes.end(), healthy);
  eval.detection = has_healthy && k >= 2
                       ? static_cast<double>(detect_correct) /
                             static_cast<double>(test_idx.size())
                       : eval.accuracy;
  return eval;
}

DiagEval class_subset_experiment(const std::vector<DiagSample>& data,
                                 const std::vector<int>& classes,
                                 const DiagTrainConfig& cfg) {
  require(classes.size() >= 2, "class_subset_experiment: need at least 2 classes");
  const std::unordered_set<int> keep(classes.begin(), classes.end());
  std::vector<DiagSample> subset;
  for (const auto& s : data)
    if (keep.count(static_cast<int>(s.label))) subset.push_back(s);
  const DiagTrained trained = train_diag(subset, cfg);
  return evaluate_diag(trained.model, subset, trained.split.test);
}

void write_diag_csv(const std::string& path, const DiagDataset& data) {
  std::vector<std::string> header;
  header.reserve(data.grid.n_bins + 1);
  for (std::size_t k = 0; k < data.grid.n_bins; ++k)
    header.push_back("ratio_" + std::to_string(static_cast<long long>(
                                    std::llround(data.grid.freq(k)))) +
                     "hz");
  header.push_back("label");
  CsvWriter csv(path);
  csv.header(header);
  for (const auto& s : data.samples) {
    for (double v : s.ratio) csv.cell(v);
    csv.cell(static_cast<long long>(s.label));
    csv.end_row();
  }
  csv.close();
}

void write_confusion_csv(const std::string& path, const DiagEval& eval) {
  std::vector<std::string> header{"true_class"};
  for (int c : eval.classes) header.push_back("predicted_" + std::to_string(c));
  CsvWriter csv(path);
  csv.header(header);
  for (std::size_t r = 0; r < eval.classes.size(); ++r) {
    csv.cell(static_cast<long long>(eval.classes[r]));
    for (std::size_t c = 0; c < eval.classes.size(); ++c)
      csv.cell(static_cast<long long>(eval.confusion[r][c]));
    csv.end_row();
  }
  csv.close();
}

}  // namespace plcml
