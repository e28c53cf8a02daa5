#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plcml/medium.hpp"
#include "plcml/nn.hpp"

namespace plcml {

struct Deployment {
  Topology topology;
  double density = 0.0;    // nodes per km^2
  double area_side = 0.0;  // metres

  void validate() const;  // density consistent with node count and area
};

// Nodes uniform in the square implied by n/density, wired as the Euclidean
// minimum spanning tree.
Deployment random_deployment(std::size_t n_nodes, double density_per_km2,
                             std::uint64_t seed,
                             const Load& default_load = Load::impedance(2000.0));

struct LinkTable {
  Tensor2 capacity;           // bit/s; symmetric, zero diagonal
  Tensor2 backbone_distance;  // metres of cable between the pair; tree-additive
};

// Direct-link capacities for every node pair. The voltage transfer of a tree
// is direction-dependent, so the table computes the lower-id -> higher-id
// direction and stores it for both: a link has one capacity.
LinkTable build_link_table(const Deployment& dep, const FrequencyGrid& grid,
                           const std::vector<double>& noise_psd,
                           const std::vector<double>& tx_psd, int threads = 1);

struct RoutingProblem {
  std::size_t source = 0;
  std::size_t dest = 0;
  double min_capacity = 100e6;  // bit/s for a hop to count as functioning
};

struct RoutingSolution {
  bool feasible = false;
  std::vector<std::size_t> path;  // source..dest when feasible
  std::size_t n_routers = 0;      // path.size() - 2
  double bottleneck_capacity = 0.0;
};

// Fewest intermediate routers subject to every hop meeting min_capacity;
// ties broken by maximum bottleneck capacity, then lexicographically
// smallest node sequence. BFS is exact for the hop count; the tie-breaks
// ride on an exact-hop bottleneck DP, so no path enumeration is needed.
RoutingSolution optimal_route(const LinkTable& table, const RoutingProblem& problem);

// Fixed-dimension descriptor of one routing problem (normalized endpoint
// coordinates, node count, max backbone span, threshold, area, density,
// endpoint Euclidean and backbone distances).
std::vector<double> route_features(const Deployment& dep, const LinkTable& table,
                                   const RoutingProblem& problem);
extern const std::vector<std::string> kRouteFeatureNames;

struct RouteCase {
  std::size_t topo_index = 0;  // into RouteDataset::deployments / tables
  RoutingProblem problem;
  RoutingSolution optimum;
  std::vector<double> features;
};

struct RouteGenConfig {
  double density_lo = 2.0, density_hi = 8.0;  // nodes per km^2
  // When positive, the service-area side (metres) is drawn from this range
  // instead and the density follows from the node count, which keeps the
  // area law fixed while the size extrapolates.
  double area_side_lo = 0.0, area_side_hi = 0.0;
  double min_capacity = 100e6;
  FrequencyGrid grid = FrequencyGrid{2e6, 86e6, 48};
  double tx_psd = 1e-8;      // V^2/Hz, flat
  double noise_psd = 1e-14;  // V^2/Hz, flat
  std::size_t problems_per_topology = 6;
};

struct RouteDataset {
  std::vector<Deployment> deployments;
  std::vector<LinkTable> tables;
  std::vector<RouteCase> cases;
  std::size_t infeasible_skipped = 0;
};

// Topologies with node counts uniform in [node_lo, node_hi]; problems are
// uniform source/dest pairs labeled by optimal_route. Infeasible problems
// are skipped and counted. Parallel over topologies with split seeds, so the
// result is identical for any thread count.
RouteDataset route_dataset(std::size_t n_topologies, std::size_t node_lo,
                           std::size_t node_hi, std::uint64_t seed,
                           const RouteGenConfig& cfg = {}, int threads = 1);

struct RouterModel {
  MlpModel hops_net;      // 4 classes: 0, 1, 2, 3+ routers
  MlpModel next_hop_net;  // 9 classes: 8 bearing sectors + direct-to-dest
  std::vector<double> hops_mean, hops_std;
  std::vector<double> step_mean, step_std;
  double min_capacity = 0.0;
};

struct RouteTrainConfig {
  std::vector<std::size_t> hidden = {64, 32};
  double dropout = 0.5;  // on the input layer
  double learning_rate = 1e-3;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

RouterModel nn_route_train(const RouteDataset& data, const RouteTrainConfig& cfg);

// Iterative decode: predict a bearing sector (or "direct") at each node,
// resolve it to a concrete usable neighbor, stop at dest or when the hop
// budget runs out. The walk is then validated against the table; an invalid
// or truncated walk comes back infeasible and is never repaired.
RoutingSolution nn_route_predict(const RouterModel& model, const Deployment& dep,
                                 const LinkTable& table, const RoutingProblem& problem,
                                 std::size_t hop_budget);

// Classifier view of the number-of-routers head (class 3 means ">= 3").
std::size_t predict_router_class(const RouterModel& model,
                                 const std::vector<double>& features);

// Fraction of cases whose decoded path equals the tie-broken optimum exactly.
// The hop budget is 2 * optimal hops + 2 per case.
double match_fraction(const RouterModel& model, const RouteDataset& data);

struct GainPoint {
  double density = 0.0;
  double gain_ml = 0.0;       // mean routed bottleneck / mean direct capacity
  double gain_optimal = 0.0;  // same ratio for the exact solver
  std::size_t n_problems = 0;
};

using RouterFn = std::function<RoutingSolution(
    const Deployment&, const LinkTable&, const RoutingProblem&, std::size_t hop_budget)>;

// Gain curves grouped by deployment density, ascending. A routed problem
// contributes its recomputed bottleneck only when the returned walk is valid
// and uses the optimal hop count; otherwise it falls back to the direct
// link. That counting rule keeps the routed curve at or below the exact one
// for every router; a violation throws std::logic_error.
std::vector<GainPoint> eval_capacity_gain(const RouteDataset& data,
                                          const RouterFn& router);

RouterFn oracle_router();
RouterFn direct_router();
RouterFn ml_router(const RouterModel& model);

struct CapacitySample {
  double density = 0.0;
  double distance = 0.0;
  double capacity = 0.0;
};

struct CapacityQuery {
  double capacity = 0.0;
  bool extrapolated = false;
};

// Cell-mean regression on a uniform (density, distance) grid spanning the
// samples. Queries in empty cells or outside the span return the nearest
// populated cell's mean with the extrapolation flag set.
class CapacitySurface {
 public:
  CapacitySurface(const std::vector<CapacitySample>& samples,
                  std::size_t density_bins, std::size_t distance_bins);

  CapacityQuery query(double density, double distance) const;
  std::size_t populated_cells() const { return populated_; }

 private:
  std::size_t nd_, nx_;
  double d_lo_, d_hi_, x_lo_, x_hi_;
  std::vector<double> cell_mean_;
  std::vector<std::size_t> cell_count_;
  std::size_t populated_ = 0;
};

// One row per case: features..., label_n_routers, label_path ('-'-joined ids).
void write_route_dataset_csv(const std::string& path, const RouteDataset& data);

std::string router_to_json(const RouterModel& model);
RouterModel router_from_json(const std::string& text);

}  // namespace plcml
