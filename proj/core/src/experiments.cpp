#include "plcml/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plcml/clustering.hpp"
#include "plcml/csv.hpp"
#include "plcml/features.hpp"
#include "plcml/noise.hpp"
#include "plcml/rng.hpp"

namespace plcml {
namespace {

std::uint64_t child_seed(const ExperimentConfig& cfg, std::string_view label) {
  return Rng(cfg.global.seed).split(label).seed();
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return cfg.global.output_dir + "/" + name;
}

void ensure_output_dir(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.global.output_dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string format_fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

RunArtifacts run_channel_gen(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const ChannelCorpus corpus =
      synthesize_corpus(cfg.channel.n, cfg.channel.multipath,
                        child_seed(cfg, "channel-gen"));
  write_corpus_csv(out_path(cfg, "corpus.csv"), corpus);

  CsvWriter stats(out_path(cfg, "corpus_stats.csv"));
  stats.header({"freq_hz", "mean_db", "std_db"});
  const std::size_t n = corpus.responses.rows;
  for (std::size_t k = 0; k < corpus.responses.cols; ++k) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += corpus.responses(r, k);
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double d = corpus.responses(r, k) - mean;
      var += d * d;
    }
    stats.cell(corpus.grid.freq(k))
        .cell(mean)
        .cell(std::sqrt(var / static_cast<double>(n)));
    stats.end_row();
  }
  stats.close();
  return RunArtifacts{{"corpus.csv", "corpus_stats.csv"}};
}

RunArtifacts run_noise_cluster(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const NoiseClusterConfig& nc = cfg.noise_cluster;
  const double fs = nc.sample_rate;

  // Planted ensemble: highly coupled broadband background, two uncoupled
  // narrowband interferers over a weaker background, and periodic bursts.
  // The narrowband class keeps coupling at zero because mixing a shared and
  // an own tone of the same frequency can cancel, which would erase the
  // class signature for an unlucky phase draw.
  NoiseSpec background;
  background.stationary = {{1.0, -20.0}};
  background.coupling = 0.8;
  NoiseSpec narrowband;
  narrowband.stationary = {{0.5, -20.0}};
  narrowband.tones = {{0.12 * fs, 4.0}, {0.30 * fs, 2.5}};
  narrowband.coupling = 0.0;
  NoiseSpec bursty;
  bursty.stationary = {{0.6, -20.0}};
  bursty.bursts = {{1e-3, 0.25, 5.0}};
  bursty.coupling = 0.3;
  const std::vector<NoiseSpec> classes = {background, narrowband, bursty};

  FeatureConfig fc;
  fc.slot_len = nc.slot_len;
  fc.peak_threshold = 3.0;  // counts excursions well above the background
  fc.freq_lo = 0.08 * fs;   // band enclosing the planted interferers
  fc.freq_hi = 0.35 * fs;
  fc.burg_order = nc.burg_order;
  fc.apen_m = nc.apen_m;
  fc.apen_r_factor = nc.apen_r_factor;

  const double duration =
      static_cast<double>(nc.slots_per_class * nc.slot_len) / fs;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> truth;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto [ch1, ch2] = noise_synthesize(
        classes[c], duration, fs,
        Rng(cfg.global.seed).split("noise-class").split(c).seed());
    const FeatureMatrix fm = feature_matrix(ch1, ch2, fc);
    for (std::size_t r = 0; r < fm.values.rows; ++r) {
      if (fm.degenerate[r]) continue;
      const auto row = fm.values.row(r);
      rows.emplace_back(row.begin(), row.end());
      truth.push_back(c);
    }
  }
  if (rows.size() < 2)
    throw std::runtime_error("noise-cluster: not enough usable slots");

  FeatureMatrix combined;
  combined.values = Tensor2(rows.size(), rows.front().size());
  combined.degenerate.assign(rows.size(), 0);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      combined.values(r, c) = rows[r][c];
  write_feature_csv(combined, out_path(cfg, "features.csv"));

  const Standardization st = fit_standardization(combined.values);
  const Tensor2 std_features = apply_standardization(combined.values, st);
  const SomScan scan =
      som_grid_scan(std_features, nc.som_epochs, child_seed(cfg, "noise-som"));
  const SomScanEntry& best = scan.entries[scan.best];
  const double purity = cluster_purity(best.assignments, truth);

  CsvWriter assign(out_path(cfg, "assignments.csv"));
  assign.header({"slot", "class_truth", "cluster"});
  for (std::size_t r = 0; r < truth.size(); ++r) {
    assign.cell(static_cast<long long>(r))
        .cell(static_cast<long long>(truth[r]))
        .cell(static_cast<long long>(best.assignments[r]));
    assign.end_row();
  }
  assign.close();

  CsvWriter scan_csv(out_path(cfg, "som_scan.csv"));
  scan_csv.header({"width", "height", "davies_bouldin", "purity", "best"});
  for (std::size_t i = 0; i < scan.entries.size(); ++i) {
    const auto& e = scan.entries[i];
    scan_csv.cell(static_cast<long long>(e.width))
        .cell(static_cast<long long>(e.height))
        .cell(e.db_index)
        .cell(cluster_purity(e.assignments, truth))
        .cell(static_cast<long long>(i == scan.best ? 1 : 0));
    scan_csv.end_row();
  }
  scan_csv.close();

  std::string summary;
  summary += "slots: " + std::to_string(truth.size()) + "\n";
  summary += "planted classes: " + std::to_string(classes.size()) + "\n";
  summary += "best grid: " + std::to_string(best.width) + "x" +
             std::to_string(best.height) + "\n";
  summary += "davies_bouldin: " + format_fixed(best.db_index) + "\n";
  summary += "purity: " + format_fixed(purity) + "\n";
  write_text(out_path(cfg, "summary.txt"), summary);

  return RunArtifacts{{"assignments.csv", "features.csv", "som_scan.csv", "summary.txt"}};
}

RunArtifacts run_gan_train(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const ChannelCorpus corpus =
      synthesize_corpus(cfg.gan.corpus_n, cfg.channel.multipath,
                        child_seed(cfg, "gan-corpus"));
  GanConfig gc = cfg.gan.gan;
  gc.seed = child_seed(cfg, "gan-train");
  const GanSystem system = gan_train(corpus, gc);

  const Tensor2 generated =
      gan_generate(system, cfg.gan.eval_samples, child_seed(cfg, "gan-eval"));
  const GanReport report = evaluate_gan_samples(generated, corpus);

  save_model(system.generator, out_path(cfg, "generator.json"));
  save_model(system.discriminator, out_path(cfg, "discriminator.json"));
  write_corpus_csv(out_path(cfg, "generated.csv"),
                   ChannelCorpus{generated, corpus.grid});

  CsvWriter bins(out_path(cfg, "gan_report.csv"));
  bins.header({"freq_hz", "mean_err_db", "std_ratio"});
  for (std::size_t k = 0; k < report.mean_err_db.size(); ++k) {
    bins.cell(corpus.grid.freq(k))
        .cell(report.mean_err_db[k])
        .cell(report.std_ratio[k]);
    bins.end_row();
  }
  bins.close();

  std::string text = report.to_text();
  text += "mode_collapse: " + std::string(system.mode_collapse ? "yes" : "no") + "\n";
  write_text(out_path(cfg, "gan_report.txt"), text);

  return RunArtifacts{{"discriminator.json", "gan_report.csv", "gan_report.txt",
                       "generated.csv", "generator.json"}};
}

RunArtifacts run_ae_ser(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  AeConfig ac = cfg.ae_ser.ae;
  ac.seed = child_seed(cfg, "ae-train");
  if (cfg.ae_ser.multipath_channel) {
    const MultipathConfig& mp = cfg.channel.multipath;
    const MultipathParams params =
        random_multipath(child_seed(cfg, "ae-channel"), mp);
    const FrequencyGrid grid{mp.band_lo, mp.band_hi, mp.check_bins};
    ac.channel = topdown_channel(params, grid);
  }
  const AeTrainResult result = ae_train(ac);
  const SerCurve curve =
      evaluate_ser(result.system, cfg.ae_ser.ebn0_db, cfg.ae_ser.trials,
                   child_seed(cfg, "ae-eval"), cfg.global.threads);

  write_ser_csv(out_path(cfg, "ser.csv"), curve, ac.m);
  write_constellation_csv(out_path(cfg, "constellation.csv"),
                          result.system.constellation());
  CsvWriter hist(out_path(cfg, "history.csv"));
  hist.header({"epoch", "loss"});
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    hist.cell(static_cast<long long>(e)).cell(result.epoch_loss[e]);
    hist.end_row();
  }
  hist.close();
  return RunArtifacts{{"constellation.csv", "history.csv", "ser.csv"}};
}

RunArtifacts run_route_sim(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const RouteCliConfig& rt = cfg.route;
  const int threads = cfg.global.threads;

  const RouteDataset train_ds =
      route_dataset(rt.train_topologies, rt.node_lo, rt.node_hi,
                    child_seed(cfg, "route-train-data"), rt.gen, threads);
  RouteTrainConfig tc = rt.train;
  tc.seed = child_seed(cfg, "route-train");
  const RouterModel model = nn_route_train(train_ds, tc);

  const RouteDataset test_ds =
      route_dataset(rt.test_topologies, rt.node_lo, rt.node_hi,
                    child_seed(cfg, "route-test-data"), rt.gen, threads);
  const RouteDataset small_ds =
      route_dataset(rt.oor_topologies, rt.oor_small_lo, rt.oor_small_hi,
                    child_seed(cfg, "route-oor-small"), rt.gen, threads);
  const RouteDataset large_ds =
      route_dataset(rt.oor_topologies, rt.oor_large_lo, rt.oor_large_hi,
                    child_seed(cfg, "route-oor-large"), rt.gen, threads);

  write_route_dataset_csv(out_path(cfg, "route_dataset.csv"), train_ds);
  write_text(out_path(cfg, "model.json"), router_to_json(model));

  const double m_train = match_fraction(model, train_ds);
  const double m_test = match_fraction(model, test_ds);
  const double m_small = match_fraction(model, small_ds);
  const double m_large = match_fraction(model, large_ds);
  const auto n_small = static_cast<double>(small_ds.cases.size());
  const auto n_large = static_cast<double>(large_ds.cases.size());
  const double m_pooled =
      (m_small * n_small + m_large * n_large) / std::max(1.0, n_small + n_large);

  CsvWriter match(out_path(cfg, "match.csv"));
  match.header({"set", "match_fraction", "n_cases"});
  auto match_row = [&match](const std::string& name, double value, std::size_t n) {
    match.cell(name).cell(value).cell(static_cast<long long>(n));
    match.end_row();
  };
  match_row("train", m_train, train_ds.cases.size());
  match_row("test", m_test, test_ds.cases.size());
  match_row("out_of_range_small", m_small, small_ds.cases.size());
  match_row("out_of_range_large", m_large, large_ds.cases.size());
  match_row("out_of_range_pooled", m_pooled,
            small_ds.cases.size() + large_ds.cases.size());
  match.close();

  const std::vector<GainPoint> gain = eval_capacity_gain(test_ds, ml_router(model));
  CsvWriter gain_csv(out_path(cfg, "gain.csv"));
  gain_csv.header({"density_per_km2", "gain_ml", "gain_optimal", "n_problems"});
  for (const GainPoint& p : gain) {
    gain_csv.cell(p.density).cell(p.gain_ml).cell(p.gain_optimal).cell(
        static_cast<long long>(p.n_problems));
    gain_csv.end_row();
  }
  gain_csv.close();

  // Direct-link capacity as a function of deployment density and pair
  // distance, cell-averaged over every generated problem.
  std::vector<CapacitySample> samples;
  double den_lo = std::numeric_limits<double>::infinity(), den_hi = -den_lo;
  double dis_lo = den_lo, dis_hi = -den_lo;
  for (const RouteCase& rc : train_ds.cases) {
    const double density = rc.features[8];
    const double distance = rc.features[9];
    const double cap = train_ds.tables[rc.topo_index].capacity(
        rc.problem.source, rc.problem.dest);
    samples.push_back({density, distance, cap});
    den_lo = std::min(den_lo, density);
    den_hi = std::max(den_hi, density);
    dis_lo = std::min(dis_lo, distance);
    dis_hi = std::max(dis_hi, distance);
  }
  const CapacitySurface surface(samples, rt.surface_density_bins,
                                rt.surface_distance_bins);
  CsvWriter surf(out_path(cfg, "surface.csv"));
  surf.header({"density_per_km2", "distance_m", "capacity_bps", "extrapolated"});
  for (std::size_t i = 0; i < rt.surface_density_bins; ++i)
    for (std::size_t j = 0; j < rt.surface_distance_bins; ++j) {
      const double density =
          den_lo + (den_hi - den_lo) * (static_cast<double>(i) + 0.5) /
                       static_cast<double>(rt.surface_density_bins);
      const double distance =
          dis_lo + (dis_hi - dis_lo) * (static_cast<double>(j) + 0.5) /
                       static_cast<double>(rt.surface_distance_bins);
      const CapacityQuery q = surface.query(density, distance);
      surf.cell(density).cell(distance).cell(q.capacity).cell(
          static_cast<long long>(q.extrapolated ? 1 : 0));
      surf.end_row();
    }
  surf.close();

  return RunArtifacts{{"gain.csv", "match.csv", "model.json", "route_dataset.csv",
                       "surface.csv"}};
}

RunArtifacts run_diagnose(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const int threads = cfg.global.threads;

  DiagConfig dc = cfg.diagnose.diag;
  dc.load_mode = LoadMode::Constant2kOhm;
  dc.seed = child_seed(cfg, "diag-const");
  const DiagDataset constant = build_diag_dataset(dc, threads);

  DiagConfig dv = cfg.diagnose.diag;
  dv.load_mode = LoadMode::RandomVariable;
  dv.seed = child_seed(cfg, "diag-var");
  const DiagDataset variable = build_diag_dataset(dv, threads);

  write_diag_csv(out_path(cfg, "diag_constant.csv"), constant);
  write_diag_csv(out_path(cfg, "diag_variable.csv"), variable);

  struct ModeResult {
    std::vector<double> detection, four, three;
    DiagEval best_eval;  // four-class evaluation of the best-detection seed
  };
  auto run_mode = [&](const DiagDataset& data, const std::string& label) {
    ModeResult res;
    double best_metric = -1.0;
    for (std::size_t k = 1; k <= cfg.diagnose.n_seeds; ++k) {
      DiagTrainConfig tc = cfg.diagnose.train;
      tc.seed = Rng(cfg.global.seed).split("diag-train-" + label).split(k).seed();
      const DiagTrained trained = train_diag(data.samples, tc);
      const DiagEval four =
          evaluate_diag(trained.model, data.samples, trained.split.test);
      const DiagEval three = class_subset_experiment(data.samples, {1, 2, 3}, tc);
      res.detection.push_back(four.detection);
      res.four.push_back(four.accuracy);
      res.three.push_back(three.accuracy);
      if (four.detection > best_metric) {
        best_metric = four.detection;
        res.best_eval = four;
      }
    }
    return res;
  };
  const ModeResult rc = run_mode(constant, "const");
  const ModeResult rv = run_mode(variable, "var");

  write_confusion_csv(out_path(cfg, "confusion_constant.csv"), rc.best_eval);
  write_confusion_csv(out_path(cfg, "confusion_variable.csv"), rv.best_eval);

  CsvWriter metrics(out_path(cfg, "diag_metrics.csv"));
  metrics.header({"load_mode", "metric", "seed", "value"});
  auto metric_rows = [&metrics](const std::string& mode, const std::string& name,
                                const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      metrics.cell(mode).cell(name).cell(static_cast<long long>(k + 1)).cell(
          values[k]);
      metrics.end_row();
    }
  };
  metric_rows("constant", "fault_detection", rc.detection);
  metric_rows("constant", "accuracy_4class", rc.four);
  metric_rows("constant", "accuracy_3class", rc.three);
  metric_rows("variable", "fault_detection", rv.detection);
  metric_rows("variable", "accuracy_4class", rv.four);
  metric_rows("variable", "accuracy_3class", rv.three);
  metrics.close();

  auto agg = [](const std::vector<double>& v) {
    double best = 0.0, mean = 0.0, var = 0.0;
    for (double x : v) {
      best = std::max(best, x);
      mean += x;
    }
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::array<double, 3>{best, mean, std::sqrt(var)};
  };
  CsvWriter summary_csv(out_path(cfg, "diag_summary.csv"));
  summary_csv.header({"load_mode", "metric", "best", "mean", "std"});
  auto summary_row = [&](const std::string& mode, const std::string& name,
                         const std::vector<double>& values) {
    const auto a = agg(values);
    summary_csv.cell(mode).cell(name).cell(a[0]).cell(a[1]).cell(a[2]);
    summary_csv.end_row();
  };
  summary_row("constant", "fault_detection", rc.detection);
  summary_row("constant", "accuracy_4class", rc.four);
  summary_row("constant", "accuracy_3class", rc.three);
  summary_row("variable", "fault_detection", rv.detection);
  summary_row("variable", "accuracy_4class", rv.four);
  summary_row("variable", "accuracy_3class", rv.three);
  summary_csv.close();

  std::string text;
  text += "load mode        fault_detection   4_classes   3_classes\n";
  auto line = [&text](const std::string& mode, const ModeResult& r) {
    auto best = [](const std::vector<double>& v) {
      return *std::max_element(v.begin(), v.end());
    };
    text += mode;
    text.append(mode.size() < 17 ? 17 - mode.size() : 1, ' ');
    text += format_fixed(best(r.detection)) + "            " +
            format_fixed(best(r.four)) + "      " + format_fixed(best(r.three)) +
            "\n";
  };
  line("constant_2kohm", rc);
  line("variable_loads", rv);
  text += "(best of " + std::to_string(cfg.diagnose.n_seeds) +
          " seeds; per-seed values in diag_metrics.csv)\n";
  write_text(out_path(cfg, "diag_summary.txt"), text);

  return RunArtifacts{{"confusion_constant.csv", "confusion_variable.csv",
                       "diag_constant.csv", "diag_metrics.csv", "diag_summary.csv",
                       "diag_summary.txt", "diag_variable.csv"}};
}

void write_manifest(const ExperimentConfig& cfg, const std::string& subcommand,
                    const RunArtifacts& artifacts) {
  ensure_output_dir(cfg);
  std::vector<std::string> files = artifacts.files;
  std::sort(files.begin(), files.end());
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.global.seed;
  j["threads"] = cfg.global.threads;
  j["version"] = kToolkitVersion;
  j["artifacts"] = files;
  write_text(out_path(cfg, "manifest.json"), j.dump(2) + "\n");
}

}  // namespace plcml
