#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "plcml/routing.hpp"
#include "plcml/rng.hpp"

using namespace plcml;

namespace {

// Exhaustive simple-path enumeration with the same ordering contract as the
// solver: fewest hops, then largest bottleneck, then lexicographically
// smallest node sequence. Tractable only on tiny instances; that is the point.
struct BestPath {
  bool found = false;
  std::vector<std::size_t> path;
  double bottleneck = 0.0;
};

void enumerate(const Tensor2& cap, double thr, std::size_t cur, std::size_t dest,
               std::vector<char>& used, std::vector<std::size_t>& walk,
               double bneck, BestPath& best) {
  if (cur == dest) {
    bool better = false;
    if (!best.found)
      better = true;
    else if (walk.size() != best.path.size())
      better = walk.size() < best.path.size();
    else if (bneck != best.bottleneck)
      better = bneck > best.bottleneck;
    else
      better = walk < best.path;
    if (better) {
      best.found = true;
      best.path = walk;
      best.bottleneck = bneck;
    }
    return;
  }
  for (std::size_t v = 0; v < cap.rows; ++v) {
    if (used[v] || v == cur || cap(cur, v) < thr) continue;
    used[v] = 1;
    walk.push_back(v);
    enumerate(cap, thr, v, dest, used, walk, std::min(bneck, cap(cur, v)), best);
    walk.pop_back();
    used[v] = 0;
  }
}

RoutingSolution brute_route(const LinkTable& table, const RoutingProblem& p) {
  std::vector<char> used(table.capacity.rows, 0);
  used[p.source] = 1;
  std::vector<std::size_t> walk{p.source};
  BestPath best;
  enumerate(table.capacity, p.min_capacity, p.source, p.dest, used, walk,
            std::numeric_limits<double>::infinity(), best);
  RoutingSolution sol;
  if (!best.found) return sol;
  sol.feasible = true;
  sol.path = best.path;
  sol.n_routers = best.path.size() - 2;
  sol.bottleneck_capacity = best.bottleneck;
  return sol;
}

LinkTable table_from(const std::vector<std::vector<double>>& cap) {
  LinkTable t;
  const std::size_t n = cap.size();
  t.capacity = Tensor2(n, n, 0.0);
  t.backbone_distance = Tensor2(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t.capacity(i, j) = cap[i][j];
  return t;
}

// Distortionless cable: real frequency-flat characteristic impedance, so a
// resistive load matches it at every frequency.
CableParams flat_cable(double r0) {
  CableParams cb;
  cb.r0 = r0;
  cb.l = 0.5e-6;
  cb.c = 50e-12;
  cb.g0 = r0 * (cb.c / cb.l);
  cb.skin_exponent = 0.0;
  cb.dielectric_exponent = 0.0;
  return cb;
}

Deployment chain_deployment(double length) {
  Deployment dep;
  Node a;
  a.id = 0;
  Node b;
  b.id = 1;
  b.x = length;
  b.load = Load::impedance(100.0);  // sqrt(l/c) of flat_cable
  Edge e;
  e.a = 0;
  e.b = 1;
  e.length = length;
  e.cable = flat_cable(0.02);
  dep.topology.nodes = {a, b};
  dep.topology.edges = {e};
  dep.area_side = 1000.0;
  dep.density = 2.0;
  return dep;
}

}  // namespace

TEST_CASE("two-node deployment yields one link with the edge length") {
  const Deployment dep = random_deployment(2, 3.0, 99);
  const FrequencyGrid grid{2e6, 86e6, 16};
  const std::vector<double> noise(grid.n_bins, 1e-14);
  const std::vector<double> tx(grid.n_bins, 1e-8);
  const LinkTable t = build_link_table(dep, grid, noise, tx);

  CHECK(t.capacity(0, 0) == 0.0);
  CHECK(t.capacity(1, 1) == 0.0);
  CHECK(t.capacity(0, 1) > 0.0);
  CHECK(t.capacity(0, 1) == t.capacity(1, 0));
  CHECK(t.backbone_distance(0, 1) == dep.topology.edges[0].length);
}

TEST_CASE("link tables are symmetric with tree-additive distances") {
  const Deployment dep = random_deployment(12, 3.0, 17);
  const FrequencyGrid grid{2e6, 86e6, 12};
  const std::vector<double> noise(grid.n_bins, 1e-14);
  const std::vector<double> tx(grid.n_bins, 1e-8);
  const LinkTable t = build_link_table(dep, grid, noise, tx, 4);
  const std::size_t n = 12;

  // independent recomputation of every pair distance along the tree
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const Edge& e : dep.topology.edges) {
    adj[e.a].emplace_back(e.b, e.length);
    adj[e.b].emplace_back(e.a, e.length);
  }
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> dist(n, -1.0);
    std::vector<std::size_t> stack{s};
    dist[s] = 0.0;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& [v, len] : adj[u])
        if (dist[v] < 0.0) {
          dist[v] = dist[u] + len;
          stack.push_back(v);
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
      CHECK(t.backbone_distance(s, v) == doctest::Approx(dist[v]).epsilon(1e-12));
      CHECK(t.backbone_distance(s, v) == t.backbone_distance(v, s));
      CHECK(t.capacity(s, v) == t.capacity(v, s));
      CHECK(t.capacity(s, v) >= 0.0);
    }
  }

  // a cable path in the plane is never shorter than the straight line
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const Node& a = dep.topology.nodes[i];
      const Node& b = dep.topology.nodes[j];
      CHECK(t.backbone_distance(i, j) >=
            std::hypot(a.x - b.x, a.y - b.y) - 1e-9);
    }
}

TEST_CASE("capacity falls as a matched chain gets longer") {
  const FrequencyGrid grid{2e6, 86e6, 32};
  const std::vector<double> noise(grid.n_bins, 1e-14);
  const std::vector<double> tx(grid.n_bins, 1e-8);
  double prev = std::numeric_limits<double>::infinity();
  for (const double len : {300.0, 600.0, 900.0, 1500.0}) {
    const LinkTable t = build_link_table(chain_deployment(len), grid, noise, tx);
    CHECK(t.capacity(0, 1) < prev);
    prev = t.capacity(0, 1);
  }
}

TEST_CASE("direct feasible link routes directly") {
  const LinkTable t = table_from({{0, 500, 120}, {500, 0, 800}, {120, 800, 0}});
  RoutingProblem p;
  p.source = 0;
  p.dest = 2;
  p.min_capacity = 100;
  const RoutingSolution sol = optimal_route(t, p);
  CHECK(sol.feasible);
  CHECK(sol.path == std::vector<std::size_t>{0, 2});
  CHECK(sol.n_routers == 0);
  CHECK(sol.bottleneck_capacity == 120.0);
}

TEST_CASE("failing direct hop forces one relay through the middle") {
  const LinkTable t = table_from({{0, 150, 50}, {150, 0, 140}, {50, 140, 0}});
  RoutingProblem p;
  p.source = 0;
  p.dest = 2;
  p.min_capacity = 100;
  const RoutingSolution sol = optimal_route(t, p);
  CHECK(sol.feasible);
  CHECK(sol.path == std::vector<std::size_t>{0, 1, 2});
  CHECK(sol.n_routers == 1);
  CHECK(sol.bottleneck_capacity == 140.0);
}

TEST_CASE("threshold above every capacity is infeasible, not an error") {
  const LinkTable t = table_from({{0, 150, 50}, {150, 0, 140}, {50, 140, 0}});
  RoutingProblem p;
  p.source = 0;
  p.dest = 2;
  p.min_capacity = 1e9;
  const RoutingSolution sol = optimal_route(t, p);
  CHECK_FALSE(sol.feasible);
  CHECK(sol.path.empty());
  CHECK(sol.bottleneck_capacity == 0.0);
}

TEST_CASE("optimal routing agrees with exhaustive enumeration") {
  Rng rng(4242);
  std::size_t feasible_seen = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 2 + rng.below(9);  // 2..10 nodes
    Tensor2 cap(n, n, 0.0);
    const bool quantized = inst % 2 == 0;  // exact ties exercise tie-breaks
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double c = quantized
                             ? (1.0 + static_cast<double>(rng.below(5))) / 5.0
                             : rng.uniform();
        cap(i, j) = c;
        cap(j, i) = c;
      }
    LinkTable t;
    t.capacity = cap;
    t.backbone_distance = Tensor2(n, n, 0.0);

    RoutingProblem p;
    p.source = rng.below(n);
    do {
      p.dest = rng.below(n);
    } while (p.dest == p.source);
    p.min_capacity = rng.uniform(0.2, 0.9);

    const RoutingSolution fast = optimal_route(t, p);
    const RoutingSolution brute = brute_route(t, p);
    REQUIRE(fast.feasible == brute.feasible);
    if (!fast.feasible) continue;
    ++feasible_seen;
    CHECK(fast.path == brute.path);
    CHECK(fast.n_routers == brute.n_routers);
    CHECK(fast.bottleneck_capacity == brute.bottleneck_capacity);
  }
  CHECK(feasible_seen > 100);
}

TEST_CASE("routing inputs are validated") {
  const LinkTable t = table_from({{0, 1}, {1, 0}});
  RoutingProblem p;
  p.source = 0;
  p.dest = 0;
  CHECK_THROWS_AS(optimal_route(t, p), std::invalid_argument);
  p.dest = 5;
  CHECK_THROWS_AS(optimal_route(t, p), std::invalid_argument);
  p.dest = 1;
  p.min_capacity = -1.0;
  CHECK_THROWS_AS(optimal_route(t, p), std::invalid_argument);

  CHECK_THROWS_AS(random_deployment(1, 2.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(random_deployment(5, -1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(route_dataset(0, 10, 20, 1), std::invalid_argument);
  CHECK_THROWS_AS(route_dataset(2, 20, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(nn_route_train(RouteDataset{}, RouteTrainConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(CapacitySurface({}, 4, 4), std::invalid_argument);
}

TEST_CASE("route datasets are reproducible, in range, and thread-invariant") {
  RouteGenConfig cfg;
  cfg.problems_per_topology = 4;
  const RouteDataset a = route_dataset(6, 25, 50, 555, cfg, 1);
  const RouteDataset b = route_dataset(6, 25, 50, 555, cfg, 4);

  REQUIRE(a.cases.size() == b.cases.size());
  REQUIRE(a.deployments.size() == 6);
  CHECK(a.infeasible_skipped == b.infeasible_skipped);
  for (std::size_t t = 0; t < 6; ++t) {
    const std::size_t n = a.deployments[t].topology.nodes.size();
    CHECK(n >= 25);
    CHECK(n <= 50);
    CHECK(a.deployments[t].topology.nodes.size() ==
          b.deployments[t].topology.nodes.size());
    CHECK(a.tables[t].capacity.data == b.tables[t].capacity.data);
  }
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    CHECK(a.cases[i].features == b.cases[i].features);
    CHECK(a.cases[i].optimum.path == b.cases[i].optimum.path);
    CHECK(a.cases[i].features.size() == kRouteFeatureNames.size());

    // labels reproducible from the stored table
    const RoutingSolution again =
        optimal_route(a.tables[a.cases[i].topo_index], a.cases[i].problem);
    CHECK(again.feasible);
    CHECK(again.path == a.cases[i].optimum.path);
    CHECK(again.bottleneck_capacity == a.cases[i].optimum.bottleneck_capacity);
  }

  const RouteDataset c = route_dataset(6, 25, 50, 556, cfg, 1);
  bool differs = c.cases.size() != a.cases.size();
  for (std::size_t i = 0; !differs && i < a.cases.size(); ++i)
    differs = a.cases[i].features != c.cases[i].features;
  CHECK(differs);
}

TEST_CASE("trained router reproduces optimal paths on easy traffic") {
  RouteGenConfig cfg;
  cfg.problems_per_topology = 5;
  const RouteDataset data = route_dataset(12, 30, 60, 808, cfg, 4);
  REQUIRE(data.cases.size() > 30);

  RouteTrainConfig tc;
  tc.epochs = 200;
  tc.hidden = {32, 16};
  const RouterModel model = nn_route_train(data, tc);
  CHECK(match_fraction(model, data) >= 0.9);

  const RouterModel model2 = nn_route_train(data, tc);
  CHECK(model_to_json(model.next_hop_net) == model_to_json(model2.next_hop_net));
  CHECK(model_to_json(model.hops_net) == model_to_json(model2.hops_net));

  CHECK(predict_router_class(model, data.cases.front().features) < 4);
  CHECK_THROWS_AS(predict_router_class(model, std::vector<double>(3, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("oracle and direct routers bound the capacity gain") {
  RouteGenConfig cfg;
  cfg.min_capacity = 9e8;  // forces a relayed fraction at these sizes
  cfg.problems_per_topology = 5;
  const RouteDataset data = route_dataset(10, 40, 80, 313, cfg, 4);
  REQUIRE(!data.cases.empty());

  const auto oracle = eval_capacity_gain(data, oracle_router());
  std::size_t total = 0;
  bool some_gain = false;
  for (const GainPoint& g : oracle) {
    CHECK(g.gain_ml == g.gain_optimal);  // self-comparison is exactly clean
    CHECK(g.gain_optimal >= 1.0 - 1e-12);
    some_gain = some_gain || g.gain_optimal > 1.0;
    total += g.n_problems;
  }
  CHECK(total == data.cases.size());
  CHECK(some_gain);

  for (const GainPoint& g : eval_capacity_gain(data, direct_router()))
    CHECK(g.gain_ml == 1.0);

  RouteTrainConfig tc;
  tc.epochs = 30;
  tc.hidden = {32, 16};
  const RouterModel model = nn_route_train(data, tc);
  for (const GainPoint& g : eval_capacity_gain(data, ml_router(model)))
    CHECK(g.gain_ml <= g.gain_optimal + 1e-12);

  // densities come out sorted
  for (std::size_t i = 1; i < oracle.size(); ++i)
    CHECK(oracle[i].density > oracle[i - 1].density);
}

TEST_CASE("capacity surface averages locally and flags extrapolation") {
  std::vector<CapacitySample> flat;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) flat.push_back({1.0 + i, 50.0 + 40.0 * j, 7.5});
  const CapacitySurface constant(flat, 5, 5);
  const CapacityQuery inside = constant.query(3.0, 200.0);
  CHECK(inside.capacity == 7.5);
  CHECK_FALSE(inside.extrapolated);
  const CapacityQuery outside = constant.query(100.0, 200.0);
  CHECK(outside.capacity == 7.5);
  CHECK(outside.extrapolated);

  // linear field: every in-support query lands within the worst cell span
  Rng rng(11);
  std::vector<CapacitySample> lin;
  const auto field = [](double d, double x) { return 3.0 * d + 0.01 * x; };
  for (int i = 0; i < 600; ++i) {
    const double d = rng.uniform(1.0, 9.0);
    const double x = rng.uniform(100.0, 900.0);
    lin.push_back({d, x, field(d, x)});
  }
  const CapacitySurface surf(lin, 8, 8);
  const double cell_var = 3.0 * (8.0 / 8) + 0.01 * (800.0 / 8);
  for (int i = 0; i < 600; i += 7) {
    const CapacityQuery q = surf.query(lin[i].density, lin[i].distance);
    CHECK_FALSE(q.extrapolated);
    CHECK(std::abs(q.capacity - field(lin[i].density, lin[i].distance)) <=
          cell_var);
  }

  // two occupied corners; a query in an empty corner cell ties to the
  // lower-index populated cell
  std::vector<CapacitySample> corners;
  for (int i = 0; i < 30; ++i) corners.push_back({0.0, 0.0, 10.0});
  for (int i = 0; i < 30; ++i) corners.push_back({4.0, 4.0, 20.0});
  const CapacitySurface two(corners, 5, 5);
  CHECK(two.populated_cells() == 2);
  const CapacityQuery gap = two.query(0.0, 4.0);
  CHECK(gap.extrapolated);
  CHECK(gap.capacity == 10.0);
}

TEST_CASE("route dataset csv is deterministic") {
  RouteGenConfig cfg;
  cfg.problems_per_topology = 3;
  const RouteDataset data = route_dataset(3, 20, 30, 77, cfg, 2);
  const std::string p1 = "/tmp/plcml_routes_a.csv";
  const std::string p2 = "/tmp/plcml_routes_b.csv";
  write_route_dataset_csv(p1, data);
  write_route_dataset_csv(p2, data);

  const auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string body = slurp(p1);
  CHECK(body == slurp(p2));
  CHECK(std::count(body.begin(), body.end(), '\n') == 1 + data.cases.size());
  CHECK(body.find("label_path") != std::string::npos);
}
