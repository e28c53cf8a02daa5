#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plcml/classifiers.hpp"
#include "plcml/medium.hpp"
#include "plcml/nn.hpp"

namespace plcml {

// Fixed indices keep confusion matrices comparable across runs.
enum class AnomalyClass : int {
  Unperturbed = 1,
  LoadImpedanceChange = 2,
  ConcentratedFault = 3,
  DistributedFault = 4,
};

enum class DiagSignal { Yin, RhoIn, H };
enum class LoadMode { Constant2kOhm, RandomVariable };
enum class DiagClassifier { Mlp100, SvmOvr, Knn };

struct DiagConfig {
  std::size_t n_nodes = 20;
  double avg_edge_len = 700.0;  // metres
  std::size_t n_realizations = 10000;
  DiagSignal signal = DiagSignal::Yin;
  LoadMode load_mode = LoadMode::Constant2kOhm;
  double band_lo = 4.3e3, band_hi = 500e3, band_spacing = 4.3e3;  // Hz
  double nominal_load = 2000.0;  // ohm
  double rho_z0 = 50.0;
  // RandomVariable mode jitters every load log-uniformly in this band around
  // nominal while the reference stays at nominal, so healthy grids deviate
  // from all-ones but stay distinguishable from a full load replacement.
  double jitter_lo = 1000.0, jitter_hi = 4000.0;
  // Class 2 replaces one load with a draw from this wider band; in
  // RandomVariable mode draws within change_guard of the jitter band are
  // redrawn, since a change inside normal variation is undetectable.
  double change_lo = 100.0, change_hi = 10000.0;
  double change_guard = 1.5;
  // Class 3 bridges a random cable point with this shunt resistance; kept
  // below the load range so faults read as low-impedance events.
  double shunt_lo = 1.0, shunt_hi = 100.0;
  // Class 4 degrades r0, g0, l, c over a cable span by this factor.
  double fault_factor_lo = 2.0, fault_factor_hi = 20.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct DiagSample {
  std::vector<double> ratio;  // |measured| / |reference| per bin
  AnomalyClass label = AnomalyClass::Unperturbed;
};

struct DiagDataset {
  Topology base;               // nominal topology the references come from
  std::size_t observation = 0; // highest-degree node, lowest id on ties
  FrequencyGrid grid;
  std::vector<DiagSample> samples;
  std::size_t resampled = 0;   // degenerate realizations replaced
};

// Balanced four-class dataset: realization i carries class i % 4 + 1.
// Parallel over realizations with split seeds; identical for any thread
// count. Non-finite or non-positive ratios are redrawn and counted.
DiagDataset build_diag_dataset(const DiagConfig& cfg, int threads = 1);

struct DiagTrainConfig {
  DiagClassifier kind = DiagClassifier::Mlp100;
  std::size_t hidden = 100;
  std::size_t epochs = 150;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double train_fraction = 0.5;
  // Gram-matrix and distance-scan costs cap the kernel methods; training
  // rows beyond these limits are subsampled deterministically.
  std::size_t svm_subsample = 1500;
  double svm_c = 10.0;
  std::size_t knn_subsample = 2000;
  std::size_t knn_k = 5;
  std::uint64_t seed = 1;
};

struct DiagModel {
  DiagClassifier kind = DiagClassifier::Mlp100;
  std::vector<int> classes;  // ascending label values seen in training
  std::vector<double> mean, std;
  MlpModel mlp;
  SvmOvrModel svm;
  KnnModel knn;
};

struct DiagSplit {
  std::vector<std::size_t> train, test;  // disjoint, exhaustive, stratified
};

struct DiagTrained {
  DiagModel model;
  DiagSplit split;
};

DiagTrained train_diag(const std::vector<DiagSample>& data,
                       const DiagTrainConfig& cfg);

int diag_predict(const DiagModel& model, const std::vector<double>& ratio);

struct DiagEval {
  double accuracy = 0.0;
  std::vector<int> classes;
  std::vector<double> per_class;                 // recall per true class
  std::vector<std::vector<std::size_t>> confusion;  // rows true, cols predicted
  // Classes 2..4 collapsed against class 1; equals `accuracy` when the
  // class set has no healthy class to collapse against.
  double detection = 0.0;
};

DiagEval evaluate_diag(const DiagModel& model, const std::vector<DiagSample>& data,
                       const std::vector<std::size_t>& test_idx);

// Filters to the listed classes, retrains, evaluates on the held-out half.
DiagEval class_subset_experiment(const std::vector<DiagSample>& data,
                                 const std::vector<int>& classes,
                                 const DiagTrainConfig& cfg);

// One row per sample: ratio bins (headers = bin frequencies) then the label.
void write_diag_csv(const std::string& path, const DiagDataset& data);
void write_confusion_csv(const std::string& path, const DiagEval& eval);

}  // namespace plcml
