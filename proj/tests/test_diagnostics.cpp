#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <plcml/diagnostics.hpp>
#include <plcml/medium.hpp>
#include <plcml/rng.hpp>

using namespace plcml;

namespace {

DiagConfig small_config() {
  DiagConfig cfg;
  cfg.n_nodes = 16;
  cfg.n_realizations = 2400;
  cfg.seed = 11;
  return cfg;
}

const DiagDataset& const_dataset() {
  static const DiagDataset data = build_diag_dataset(small_config(), 4);
  return data;
}

const DiagDataset& variable_dataset() {
  static const DiagDataset data = [] {
    DiagConfig cfg = small_config();
    cfg.load_mode = LoadMode::RandomVariable;
    return build_diag_dataset(cfg, 4);
  }();
  return data;
}

// Two tight clusters a factor of two apart in every bin: any of the
// classifiers should separate them perfectly.
std::vector<DiagSample> toy_two_class(std::size_t per_class, std::size_t dim,
                                      std::uint64_t seed) {
  std::vector<DiagSample> out;
  Rng rng(seed);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool anomalous = i % 2 == 1;
    DiagSample s;
    s.label = anomalous ? AnomalyClass::ConcentratedFault : AnomalyClass::Unperturbed;
    s.ratio.resize(dim);
    for (auto& v : s.ratio)
      v = (anomalous ? 2.0 : 1.0) * std::exp(rng.uniform(-0.01, 0.01));
    out.push_back(std::move(s));
  }
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("dataset is balanced, deterministic, and thread-invariant") {
  const DiagDataset& data = const_dataset();
  CHECK(data.grid.n_bins == 116);
  CHECK(data.grid.f_start == doctest::Approx(4.3e3));
  CHECK(data.samples.size() == 2400);

  std::size_t counts[5] = {0, 0, 0, 0, 0};
  for (const auto& s : data.samples) {
    const int label = static_cast<int>(s.label);
    REQUIRE(label >= 1);
    REQUIRE(label <= 4);
    ++counts[label];
    REQUIRE(s.ratio.size() == data.grid.n_bins);
    for (double v : s.ratio) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v > 0.0);
    }
  }
  for (int c = 1; c <= 4; ++c) CHECK(counts[c] == 600);

  // The probe sits at the first node of maximum degree.
  std::vector<std::size_t> deg(data.base.nodes.size(), 0);
  for (const auto& e : data.base.edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  std::size_t expect = 0;
  for (std::size_t i = 1; i < deg.size(); ++i)
    if (deg[i] > deg[expect]) expect = i;
  CHECK(data.observation == expect);

  DiagConfig tiny;
  tiny.n_nodes = 12;
  tiny.n_realizations = 200;
  tiny.seed = 3;
  const DiagDataset a = build_diag_dataset(tiny, 1);
  const DiagDataset b = build_diag_dataset(tiny, 4);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.observation == b.observation);
  CHECK(a.base.nodes.size() == b.base.nodes.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].label == b.samples[i].label);
    REQUIRE(a.samples[i].ratio == b.samples[i].ratio);
  }
}

TEST_CASE("healthy constant-load realizations divide the reference by itself") {
  for (const auto& s : const_dataset().samples)
    if (s.label == AnomalyClass::Unperturbed)
      for (double v : s.ratio) REQUIRE(v == 1.0);

  DiagConfig hc;
  hc.n_nodes = 12;
  hc.n_realizations = 120;
  hc.signal = DiagSignal::H;
  hc.seed = 5;
  const DiagDataset hd = build_diag_dataset(hc, 4);
  std::size_t healthy = 0;
  for (const auto& s : hd.samples)
    if (s.label == AnomalyClass::Unperturbed) {
      ++healthy;
      for (double v : s.ratio) REQUIRE(v == 1.0);
    }
  CHECK(healthy == 30);

  DiagConfig rc = hc;
  rc.signal = DiagSignal::RhoIn;
  const DiagDataset rd = build_diag_dataset(rc, 4);
  for (const auto& s : rd.samples)
    for (double v : s.ratio) {
      REQUIRE(std::isfinite(v));
      REQUIRE(v > 0.0);
    }
}

TEST_CASE("distributed fault severity grows with the degradation factor") {
  const Topology& base = const_dataset().base;
  const FrequencyGrid& grid = const_dataset().grid;
  const std::size_t obs = const_dataset().observation;
  const LineState ref = input_admittance(base, obs, grid);

  auto deviation = [&](double factor) {
    const double len = base.edges[0].length;
    const Topology faulty =
        perturb(base, DistributedFault{0, 0.1 * len, 0.7 * len, factor, true});
    const LineState state = input_admittance(faulty, obs, grid);
    double total = 0.0;
    for (std::size_t k = 0; k < grid.n_bins; ++k)
      total += std::abs(std::log(std::abs(state.y_in[k]) / std::abs(ref.y_in[k])));
    return total;
  };

  const double mild = deviation(1.01);
  const double severe = deviation(10.0);
  CHECK(mild > 0.0);
  CHECK(mild < severe);
}

TEST_CASE("stratified split halves every class and covers the dataset") {
  const auto toy = toy_two_class(31, 6, 9);
  DiagTrainConfig cfg;
  cfg.kind = DiagClassifier::Knn;
  cfg.seed = 4;
  const DiagTrained first = train_diag(toy, cfg);
  const DiagTrained second = train_diag(toy, cfg);
  CHECK(first.split.train == second.split.train);
  CHECK(first.split.test == second.split.test);

  std::set<std::size_t> seen;
  for (std::size_t i : first.split.train) CHECK(seen.insert(i).second);
  for (std::size_t i : first.split.test) CHECK(seen.insert(i).second);
  CHECK(seen.size() == toy.size());

  for (int cls : {1, 3}) {
    auto count = [&](const std::vector<std::size_t>& idx) {
      std::size_t n = 0;
      for (std::size_t i : idx)
        if (static_cast<int>(toy[i].label) == cls) ++n;
      return n;
    };
    const std::size_t tr = count(first.split.train);
    const std::size_t te = count(first.split.test);
    CHECK(tr + te == 31);
    CHECK(tr == 15);  // floor of half, remainder goes to the test side
    CHECK(te == 16);
  }
}

TEST_CASE("all classifier kinds separate well-separated clusters perfectly") {
  const auto toy = toy_two_class(150, 8, 21);
  for (DiagClassifier kind :
       {DiagClassifier::Mlp100, DiagClassifier::SvmOvr, DiagClassifier::Knn}) {
    DiagTrainConfig cfg;
    cfg.kind = kind;
    cfg.hidden = 16;
    cfg.epochs = 30;
    cfg.seed = 2;
    const DiagTrained trained = train_diag(toy, cfg);
    const DiagEval eval = evaluate_diag(trained.model, toy, trained.split.test);
    CHECK(eval.accuracy == 1.0);
    CHECK(eval.detection == 1.0);
  }
}

TEST_CASE("evaluation bookkeeping matches a hand-built confusion matrix") {
  DiagModel model;
  model.kind = DiagClassifier::Knn;
  model.classes = {1, 2};
  model.mean.assign(2, 0.0);
  model.std.assign(2, 1.0);
  // log(1) = 0 and log(e^4) = 4: two prototype points, nearest wins.
  model.knn.points = Tensor2(2, 2);
  model.knn.points(0, 0) = 0.0;
  model.knn.points(0, 1) = 0.0;
  model.knn.points(1, 0) = 4.0;
  model.knn.points(1, 1) = 4.0;
  model.knn.labels = {1, 2};
  model.knn.k = 1;

  const double low = 1.0, high = std::exp(4.0);
  std::vector<DiagSample> samples;
  auto add = [&](double value, int label) {
    samples.push_back(DiagSample{{value, value}, static_cast<AnomalyClass>(label)});
  };
  add(low, 1);
  add(low, 1);
  add(high, 1);  // healthy read as anomalous
  add(high, 2);
  add(high, 2);
  add(high, 2);
  add(low, 2);  // anomalous read as healthy
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  const DiagEval eval = evaluate_diag(model, samples, idx);
  CHECK(eval.classes == std::vector<int>{1, 2});
  CHECK(eval.confusion[0][0] == 2);
  CHECK(eval.confusion[0][1] == 1);
  CHECK(eval.confusion[1][0] == 1);
  CHECK(eval.confusion[1][1] == 3);
  CHECK(eval.accuracy == doctest::Approx(5.0 / 7.0));
  CHECK(eval.per_class[0] == doctest::Approx(2.0 / 3.0));
  CHECK(eval.per_class[1] == doctest::Approx(3.0 / 4.0));
  CHECK(eval.detection == doctest::Approx(5.0 / 7.0));

  // Without a healthy class there is nothing to collapse.
  DiagModel anomaly_only = model;
  anomaly_only.classes = {2, 3};
  anomaly_only.knn.labels = {2, 3};
  std::vector<DiagSample> anomalies;
  anomalies.push_back(DiagSample{{low, low}, AnomalyClass::LoadImpedanceChange});
  anomalies.push_back(DiagSample{{high, high}, AnomalyClass::ConcentratedFault});
  const DiagEval sub = evaluate_diag(anomaly_only, anomalies, {0, 1});
  CHECK(sub.accuracy == 1.0);
  CHECK(sub.detection == sub.accuracy);
}

TEST_CASE("network classifier resolves the simulated anomaly classes") {
  DiagTrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 1;
  const DiagTrained trained = train_diag(const_dataset().samples, cfg);
  const DiagEval four = evaluate_diag(trained.model, const_dataset().samples,
                                      trained.split.test);
  CHECK(four.accuracy >= 0.77);
  CHECK(four.per_class[0] >= 0.99);  // exact all-ones signature is unmistakable

  const DiagEval three = class_subset_experiment(const_dataset().samples, {1, 2, 3}, cfg);
  CHECK(three.accuracy >= 0.85);
  CHECK(three.accuracy >= four.accuracy);
  CHECK(three.classes == std::vector<int>{1, 2, 3});

  const DiagEval two = class_subset_experiment(const_dataset().samples, {1, 2}, cfg);
  CHECK(two.accuracy >= 0.90);
  CHECK(two.accuracy >= three.accuracy);
}

TEST_CASE("anomalies stay detectable under randomly varying loads") {
  bool healthy_all_ones = true;
  for (const auto& s : variable_dataset().samples)
    if (s.label == AnomalyClass::Unperturbed)
      for (double v : s.ratio)
        if (v != 1.0) healthy_all_ones = false;
  CHECK_FALSE(healthy_all_ones);

  DiagTrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 1;
  const DiagTrained trained = train_diag(variable_dataset().samples, cfg);
  const DiagEval eval = evaluate_diag(trained.model, variable_dataset().samples,
                                      trained.split.test);
  CHECK(eval.detection >= 0.88);
  CHECK(eval.detection >= eval.accuracy);  // collapsing classes can only help
}

TEST_CASE("invalid configurations and inputs are rejected") {
  DiagConfig cfg;
  cfg.n_nodes = 2;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.band_hi = cfg.band_lo;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.jitter_hi = cfg.jitter_lo;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.change_guard = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.change_lo = 900.0;  // inside the guarded jitter band
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.fault_factor_lo = 0.9;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = DiagConfig{};
  cfg.n_realizations = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  DiagTrainConfig tc;
  CHECK_THROWS_AS(train_diag({}, tc), std::invalid_argument);
  tc.train_fraction = 1.0;
  CHECK_THROWS_AS(train_diag(toy_two_class(4, 3, 1), tc), std::invalid_argument);
  tc = DiagTrainConfig{};
  std::vector<DiagSample> lonely = toy_two_class(4, 3, 1);
  lonely.push_back(DiagSample{{1.0, 1.0, 1.0}, AnomalyClass::DistributedFault});
  CHECK_THROWS_AS(train_diag(lonely, tc), std::invalid_argument);

  const auto toy = toy_two_class(8, 3, 2);
  tc.kind = DiagClassifier::Knn;
  const DiagTrained trained = train_diag(toy, tc);
  CHECK_THROWS_AS(diag_predict(trained.model, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(diag_predict(trained.model, {1.0, -1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_diag(trained.model, toy, {}), std::invalid_argument);
  std::vector<DiagSample> unseen = toy;
  unseen[0].label = AnomalyClass::DistributedFault;
  CHECK_THROWS_AS(evaluate_diag(trained.model, unseen, {0}), std::invalid_argument);
  CHECK_THROWS_AS(class_subset_experiment(toy, {1}, tc), std::invalid_argument);
}

TEST_CASE("dataset and confusion files replay byte for byte") {
  DiagConfig cfg;
  cfg.n_nodes = 12;
  cfg.n_realizations = 80;
  cfg.seed = 6;
  const DiagDataset data = build_diag_dataset(cfg, 2);

  const std::string path_a = "diag_tmp_a.csv", path_b = "diag_tmp_b.csv";
  write_diag_csv(path_a, data);
  write_diag_csv(path_b, data);
  const std::string text_a = slurp(path_a);
  CHECK(text_a == slurp(path_b));
  CHECK(text_a.rfind("ratio_4300hz,", 0) == 0);

  std::size_t lines = 0;
  for (char ch : text_a)
    if (ch == '\n') ++lines;
  CHECK(lines == 81);
  const std::string header = text_a.substr(0, text_a.find('\n'));
  CHECK(header.size() >= 6);
  CHECK(header.substr(header.size() - 6) == ",label");

  DiagTrainConfig tc;
  tc.kind = DiagClassifier::Knn;
  const auto toy = toy_two_class(8, 3, 2);
  const DiagTrained trained = train_diag(toy, tc);
  const DiagEval eval = evaluate_diag(trained.model, toy, trained.split.test);
  const std::string path_c = "diag_tmp_c.csv";
  write_confusion_csv(path_c, eval);
  const std::string text_c = slurp(path_c);
  CHECK(text_c.rfind("true_class,predicted_1,predicted_3", 0) == 0);

  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
  std::filesystem::remove(path_c);
}
