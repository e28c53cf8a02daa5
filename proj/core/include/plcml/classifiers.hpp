#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plcml/tensor.hpp"

namespace plcml {

enum class KernelKind { Linear, Rbf };

struct SvmKernel {
  KernelKind kind = KernelKind::Rbf;
  double sigma = 1.0;  // rbf: exp(-|x-y|^2 / sigma^2)
};

double kernel_eval(const SvmKernel& k, std::span<const double> x,
                   std::span<const double> y);

// Median of all pairwise euclidean distances; common bandwidth heuristic.
// Returns 1.0 when every pairwise distance is zero.
double median_pairwise_distance(const Tensor2& points);

struct SvmTrainOptions {
  double c = 10.0;
  double tol = 1e-3;
  std::uint64_t seed = 1;
  // Hard cap on full sweeps: 10 * N by default, expressed as a factor.
  std::size_t max_sweep_factor = 10;
};

struct SvmModel {
  Tensor2 support_vectors;     // S x D
  std::vector<double> alphas;  // S, all > 0
  std::vector<double> labels;  // S, each +-1
  double bias = 0.0;
  SvmKernel kernel;
  double c = 10.0;
};

struct SvmTrainResult {
  SvmModel model;
  bool converged = true;            // false if the sweep cap was hit
  std::size_t sweeps = 0;
  std::vector<double> dual_history;  // dual objective after each sweep
  double sum_alpha_y = 0.0;          // equality-constraint residual at exit
};

// Binary soft-margin SVM fit with sequential minimal optimization
// (pair selection: first index by KKT violation scan, second index random).
// y entries must be exactly +1 or -1 and both classes must be present.
// The Gram matrix is materialized, so this is intended for N up to a few
// thousand points.
SvmTrainResult svm_train(const Tensor2& x, const std::vector<double>& y,
                         const SvmKernel& kernel, const SvmTrainOptions& opts);

double svm_decision(const SvmModel& m, std::span<const double> x);
// Sign of the decision value; exact zero maps to +1.
double svm_predict(const SvmModel& m, std::span<const double> x);

// One-vs-rest multiclass wrapper; predicts the class with the largest
// decision value, ties broken by the smaller class id.
struct SvmOvrModel {
  std::vector<int> class_ids;     // sorted ascending
  std::vector<SvmModel> machines; // one per class id
};
SvmOvrModel svm_ovr_train(const Tensor2& x, const std::vector<int>& labels,
                          const SvmKernel& kernel, const SvmTrainOptions& opts);
int svm_ovr_predict(const SvmOvrModel& m, std::span<const double> x);

std::string svm_to_json(const SvmModel& m);
SvmModel svm_from_json(const std::string& text);
void save_svm(const SvmModel& m, const std::string& path);
SvmModel load_svm(const std::string& path);

// Brute-force k-nearest-neighbour classifier. k must be odd. Distance ties
// are broken toward the lower point index; label-count ties toward the
// smaller label.
struct KnnModel {
  Tensor2 points;
  std::vector<int> labels;
  std::size_t k = 3;
};
int knn_predict(const KnnModel& m, std::span<const double> x);
std::vector<int> knn_predict_batch(const KnnModel& m, const Tensor2& xs);

}  // namespace plcml
