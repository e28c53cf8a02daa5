#include "plcml/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "plcml/linalg.hpp"
#include "plcml/rng.hpp"

namespace plcml {

namespace {

std::size_t nearest_row(const Tensor2& points, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < points.rows; ++r) {
    const double d = squared_distance(points.row(r), x);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const Tensor2& data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters) {
  const std::size_t n = data.rows, d = data.cols;
  if (k == 0 || k > n) throw std::invalid_argument("kmeans: need 1 <= K <= rows");
  Rng rng(seed);

  KMeansResult res;
  Tensor2& c = res.model.centroids;
  c = Tensor2(k, d);

  // k-means++ seeding: nearest-centroid squared distances as sampling weights.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> chosen(n, 0);
  std::size_t first = static_cast<std::size_t>(rng.below(n));
  std::copy_n(data.row(first).data(), d, c.row(0).data());
  chosen[first] = 1;
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(data.row(i), c.row(j - 1)));
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick == n) pick = n - 1;
    } else {  // all remaining points coincide with a centroid
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) {
          pick = i;
          break;
        }
      if (pick == n) pick = 0;
    }
    std::copy_n(data.row(pick).data(), d, c.row(j).data());
    chosen[pick] = 1;
  }

  res.assignments.assign(n, 0);
  std::vector<std::size_t> prev(n, k);  // impossible label forces first pass
  std::vector<double> dist_to_own(n, 0.0);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = nearest_row(c, data.row(i));
      res.assignments[i] = a;
      dist_to_own[i] = squared_distance(data.row(i), c.row(a));
      inertia += dist_to_own[i];
    }
    res.inertia_history.push_back(inertia);
    res.model.inertia = inertia;
    if (res.assignments == prev) break;
    prev = res.assignments;

    std::vector<std::size_t> counts(k, 0);
    Tensor2 sums(k, d);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = res.assignments[i];
      ++counts[a];
      for (std::size_t j = 0; j < d; ++j) sums(a, j) += data(i, j);
    }
    for (std::size_t cl = 0; cl < k; ++cl) {
      if (counts[cl] == 0) {
        // Re-seed to the point farthest from its current centroid.
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (dist_to_own[i] > dist_to_own[far]) far = i;
        std::copy_n(data.row(far).data(), d, c.row(cl).data());
        dist_to_own[far] = 0.0;
      } else {
        for (std::size_t j = 0; j < d; ++j)
          c(cl, j) = sums(cl, j) / static_cast<double>(counts[cl]);
      }
    }
  }
  return res;
}

SomGrid som_train(const Tensor2& data, std::size_t width, std::size_t height,
                  std::size_t epochs, std::uint64_t seed) {
  const std::size_t n = data.rows, d = data.cols;
  const std::size_t units = width * height;
  if (units < 1 || n == 0) throw std::invalid_argument("som_train: empty grid or data");
  Rng rng(seed);

  SomGrid g;
  g.width = width;
  g.height = height;
  g.trained_epochs = epochs;
  g.prototypes = Tensor2(units, d);
  for (std::size_t u = 0; u < units; ++u) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(n));
    std::copy_n(data.row(pick).data(), d, g.prototypes.row(u).data());
  }

  const double r0 = std::max(width, height) / 2.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t t = 0; t < epochs; ++t) {
    const double frac =
        epochs > 1 ? static_cast<double>(t) / static_cast<double>(epochs - 1) : 0.0;
    const double alpha = 0.5 + (0.01 - 0.5) * frac;
    const double radius = r0 + (0.5 - r0) * frac;
    const double denom = 2.0 * radius * radius;
    rng.shuffle(order);
    for (const std::size_t s : order) {
      const auto x = data.row(s);
      const std::size_t bmu = nearest_row(g.prototypes, x);
      const double bi = static_cast<double>(bmu / width);
      const double bj = static_cast<double>(bmu % width);
      for (std::size_t u = 0; u < units; ++u) {
        const double di = static_cast<double>(u / width) - bi;
        const double dj = static_cast<double>(u % width) - bj;
        const double h = std::exp(-(di * di + dj * dj) / denom);
        auto w = g.prototypes.row(u);
        const double step = alpha * h;
        for (std::size_t j = 0; j < d; ++j) w[j] += step * (x[j] - w[j]);
      }
    }
  }
  return g;
}

std::vector<std::size_t> som_assign(const SomGrid& grid, const Tensor2& data) {
  if (data.cols != grid.prototypes.cols)
    throw std::invalid_argument("som_assign: dimension mismatch");
  std::vector<std::size_t> out(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i)
    out[i] = nearest_row(grid.prototypes, data.row(i));
  return out;
}

Dendrogram hc_agglomerative(const Tensor2& data, Linkage linkage) {
  const std::size_t n = data.rows;
  if (n < 2) throw std::invalid_argument("hc_agglomerative: need >= 2 rows");

  // Active clusters keyed by id; Lance-Williams needs sizes and the current
  // inter-cluster distances.
  struct Active {
    std::size_t id;
    std::size_t size;
  };
  std::vector<Active> act(n);
  for (std::size_t i = 0; i < n; ++i) act[i] = {i, 1};

  // dist[a][b] for positions in `act` (upper triangle used).
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] = euclidean_distance(data.row(i), data.row(j));

  Dendrogram dend;
  dend.n_leaves = n;
  dend.merges.reserve(n - 1);

  for (std::size_t step = 0; step < n - 1; ++step) {
    // Closest active pair; ties by smallest (id_a, id_b).
    std::size_t pa = 0, pb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < act.size(); ++a)
      for (std::size_t b = a + 1; b < act.size(); ++b) {
        const double dv = dist[a][b];
        const std::size_t ia = std::min(act[a].id, act[b].id);
        const std::size_t ib = std::max(act[a].id, act[b].id);
        const std::size_t ca = std::min(act[pa].id, act[pb].id);
        const std::size_t cb = std::max(act[pa].id, act[pb].id);
        if (dv < best ||
            (dv == best && (ia < ca || (ia == ca && ib < cb)))) {
          best = dv;
          pa = a;
          pb = b;
        }
      }

    dend.merges.push_back({std::min(act[pa].id, act[pb].id),
                           std::max(act[pa].id, act[pb].id), best});

    const double ni = static_cast<double>(act[pa].size);
    const double nj = static_cast<double>(act[pb].size);
    // Fold pb into pa, then drop pb (swap-with-last keeps indices compact).
    for (std::size_t l = 0; l < act.size(); ++l) {
      if (l == pa || l == pb) continue;
      const double dil = dist[pa][l], djl = dist[pb][l];
      double nd = 0.0;
      switch (linkage) {
        case Linkage::Single: nd = std::min(dil, djl); break;
        case Linkage::Complete: nd = std::max(dil, djl); break;
        case Linkage::Average: nd = (ni * dil + nj * djl) / (ni + nj); break;
      }
      dist[pa][l] = dist[l][pa] = nd;
    }
    act[pa].id = n + step;
    act[pa].size += act[pb].size;

    const std::size_t last = act.size() - 1;
    if (pb != last) {
      act[pb] = act[last];
      for (std::size_t l = 0; l < act.size(); ++l) {
        dist[pb][l] = dist[last][l];
        dist[l][pb] = dist[l][last];
      }
      dist[pb][pb] = 0.0;
    }
    act.pop_back();
  }
  return dend;
}

std::vector<std::size_t> hc_cut(const Dendrogram& dend, std::size_t k) {
  const std::size_t n = dend.n_leaves;
  if (k == 0 || k > n) throw std::invalid_argument("hc_cut: need 1 <= k <= leaves");

  // Union-find over ids 0..2n-2, replaying the first n-k merges.
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t s = 0; s < n - k; ++s) {
    const auto& m = dend.merges[s];
    const std::size_t merged = n + s;
    parent[find(m.cluster_a)] = merged;
    parent[find(m.cluster_b)] = merged;
  }

  std::vector<std::size_t> labels(n);
  std::map<std::size_t, std::size_t> relabel;  // root -> label, by first leaf
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    const auto [it, inserted] = relabel.emplace(root, relabel.size());
    labels[i] = it->second;
  }
  return labels;
}

PcaModel pca_fit(const Tensor2& data, std::size_t m) {
  const std::size_t n = data.rows, d = data.cols;
  if (m == 0 || m > d) throw std::invalid_argument("pca_fit: need 1 <= M <= cols");
  if (n < 2) throw std::invalid_argument("pca_fit: need >= 2 rows");

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += data(i, j);
  for (double& v : model.mean) v /= static_cast<double>(n);

  Tensor2 cov(d, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double da = data(i, a) - model.mean[a];
      for (std::size_t b = a; b < d; ++b)
        cov(a, b) += da * (data(i, b) - model.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov(a, b) /= static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }

  const SymEig eig = sym_eig(cov);
  model.components = Tensor2(d, m);
  model.eigenvalues.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    model.eigenvalues[j] = std::max(0.0, eig.values[j]);
    for (std::size_t a = 0; a < d; ++a)
      model.components(a, j) = eig.vectors(a, j);
  }
  return model;
}

Tensor2 pca_transform(const PcaModel& model, const Tensor2& data) {
  if (data.cols != model.mean.size())
    throw std::invalid_argument("pca_transform: dimension mismatch");
  Tensor2 centered = data;
  for (std::size_t i = 0; i < centered.rows; ++i)
    for (std::size_t j = 0; j < centered.cols; ++j) centered(i, j) -= model.mean[j];
  return matmul(centered, model.components);
}

Tensor2 pca_reconstruct(const PcaModel& model, const Tensor2& scores) {
  if (scores.cols != model.components.cols)
    throw std::invalid_argument("pca_reconstruct: dimension mismatch");
  Tensor2 out = matmul_tb(scores, model.components);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += model.mean[j];
  return out;
}

double cluster_purity(const std::vector<std::size_t>& assignments,
                      const std::vector<std::size_t>& truth) {
  if (assignments.size() != truth.size() || assignments.empty())
    throw std::invalid_argument("cluster_purity: bad input sizes");
  std::map<std::size_t, std::map<std::size_t, std::size_t>> table;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    ++table[assignments[i]][truth[i]];
  std::size_t hit = 0;
  for (const auto& [cluster, counts] : table) {
    std::size_t best = 0;
    for (const auto& [label, cnt] : counts) best = std::max(best, cnt);
    hit += best;
  }
  return static_cast<double>(hit) / static_cast<double>(assignments.size());
}

double davies_bouldin(const Tensor2& data, const std::vector<std::size_t>& labels) {
  if (labels.size() != data.rows)
    throw std::invalid_argument("davies_bouldin: label count mismatch");
  std::map<std::size_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  if (members.size() < 2) return std::numeric_limits<double>::infinity();

  const std::size_t kc = members.size();
  Tensor2 centroids(kc, data.cols);
  std::vector<double> scatter(kc, 0.0);
  std::size_t idx = 0;
  for (const auto& [label, rows] : members) {
    for (const std::size_t r : rows)
      for (std::size_t j = 0; j < data.cols; ++j) centroids(idx, j) += data(r, j);
    for (std::size_t j = 0; j < data.cols; ++j)
      centroids(idx, j) /= static_cast<double>(rows.size());
    for (const std::size_t r : rows)
      scatter[idx] += euclidean_distance(data.row(r), centroids.row(idx));
    scatter[idx] /= static_cast<double>(rows.size());
    ++idx;
  }

  double db = 0.0;
  for (std::size_t i = 0; i < kc; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < kc; ++j) {
      if (i == j) continue;
      const double sep = euclidean_distance(centroids.row(i), centroids.row(j));
      const double r = sep > 0.0 ? (scatter[i] + scatter[j]) / sep
                                 : std::numeric_limits<double>::infinity();
      worst = std::max(worst, r);
    }
    db += worst;
  }
  return db / static_cast<double>(kc);
}

SomScan som_grid_scan(const Tensor2& data, std::size_t epochs, std::uint64_t seed,
                      std::size_t max_dim) {
  SomScan scan;
  const Rng base(seed);
  for (std::size_t h = 1; h <= max_dim; ++h)
    for (std::size_t w = 1; w <= max_dim; ++w) {
      if (h * w < 2) continue;
      SomScanEntry e;
      e.width = w;
      e.height = h;
      e.grid = som_train(data, w, h, epochs, base.split(h * 100 + w).seed());
      e.assignments = som_assign(e.grid, data);
      e.db_index = davies_bouldin(data, e.assignments);
      scan.entries.push_back(std::move(e));
    }
  for (std::size_t i = 1; i < scan.entries.size(); ++i)
    if (scan.entries[i].db_index < scan.entries[scan.best].db_index) scan.best = i;
  return scan;
}

}  // namespace plcml
