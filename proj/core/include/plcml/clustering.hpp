#pragma once

#include <cstdint>
#include <vector>

#include "plcml/tensor.hpp"

namespace plcml {

struct KMeansModel {
  Tensor2 centroids;      // K x D
  double inertia = 0.0;   // sum of squared distances to nearest centroid
};

struct KMeansResult {
  KMeansModel model;
  std::vector<std::size_t> assignments;
  std::vector<double> inertia_history;  // one entry per Lloyd assignment pass
};

// Lloyd iterations from a k-means++ seeding. Assignment ties go to the lowest
// centroid index; an emptied cluster is re-seeded to the point currently
// farthest from its assigned centroid.
KMeansResult kmeans(const Tensor2& data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters = 100);

struct SomGrid {
  std::size_t width = 0, height = 0;
  Tensor2 prototypes;  // (width*height) x D, unit (row i, col j) <-> row i*width + j
  std::size_t trained_epochs = 0;
};

// Online self-organizing map. Prototypes start as random data rows. Per epoch
// the learning rate falls linearly 0.5 -> 0.01 and the Gaussian neighborhood
// radius falls linearly max(width,height)/2 -> 0.5; samples are visited in a
// freshly shuffled order each epoch.
SomGrid som_train(const Tensor2& data, std::size_t width, std::size_t height,
                  std::size_t epochs, std::uint64_t seed);

// Nearest prototype by Euclidean distance; ties resolve to the lowest unit.
std::vector<std::size_t> som_assign(const SomGrid& grid, const Tensor2& data);

enum class Linkage { Single, Complete, Average };

struct Dendrogram {
  struct Merge {
    std::size_t cluster_a = 0;  // ids: leaves are 0..N-1, merge s creates N+s
    std::size_t cluster_b = 0;  // cluster_a < cluster_b
    double distance = 0.0;
  };
  std::vector<Merge> merges;  // exactly n_leaves - 1 entries
  std::size_t n_leaves = 0;
};

// Bottom-up merging of the closest active pair; cluster distances maintained
// with the Lance-Williams updates for the chosen linkage. Distance ties merge
// the pair with the lexicographically smallest (id_a, id_b).
Dendrogram hc_agglomerative(const Tensor2& data, Linkage linkage);

// Labels after undoing the last k-1 merges. Label ids are assigned by the
// smallest leaf index in each cluster, so they are stable across runs.
std::vector<std::size_t> hc_cut(const Dendrogram& dend, std::size_t k);

struct PcaModel {
  std::vector<double> mean;         // D
  Tensor2 components;               // D x M, columns are principal directions
  std::vector<double> eigenvalues;  // M entries, descending, >= 0
};

PcaModel pca_fit(const Tensor2& data, std::size_t m);
Tensor2 pca_transform(const PcaModel& model, const Tensor2& data);
Tensor2 pca_reconstruct(const PcaModel& model, const Tensor2& scores);

// Fraction of samples whose cluster's majority true label matches their own.
double cluster_purity(const std::vector<std::size_t>& assignments,
                      const std::vector<std::size_t>& truth);

// Mean over clusters of max_j (S_i + S_j) / M_ij with S the mean member
// distance to the cluster centroid and M the centroid separation. Lower is
// better. Empty label values are skipped; fewer than two non-empty clusters
// yields +infinity.
double davies_bouldin(const Tensor2& data, const std::vector<std::size_t>& labels);

struct SomScanEntry {
  std::size_t width = 0, height = 0;
  double db_index = 0.0;
  SomGrid grid;
  std::vector<std::size_t> assignments;
};

struct SomScan {
  std::vector<SomScanEntry> entries;
  std::size_t best = 0;  // index of the lowest Davies-Bouldin entry
};

// Trains one map per grid shape with height, width in [1, max_dim] and at
// least two units, ranks them by Davies-Bouldin index on the training data.
SomScan som_grid_scan(const Tensor2& data, std::size_t epochs, std::uint64_t seed,
                      std::size_t max_dim = 3);

}  // namespace plcml
