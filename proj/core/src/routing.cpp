#include "plcml/routing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "plcml/csv.hpp"
#include "plcml/parallel.hpp"
#include "plcml/rng.hpp"

namespace plcml {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

// Hop distances over the capacity-thresholded complete graph.
std::vector<std::size_t> hop_counts(const LinkTable& table, double min_cap,
                                    std::size_t start) {
  const std::size_t n = table.capacity.rows;
  std::vector<std::size_t> dist(n, kUnreached);
  dist[start] = 0;
  std::vector<std::size_t> frontier{start};
  while (!frontier.empty()) {
    std::vector<std::size_t> next;
    for (const std::size_t u : frontier) {
      for (std::size_t v = 0; v < n; ++v) {
        if (v == u || dist[v] != kUnreached) continue;
        if (table.capacity(u, v) >= min_cap) {
          dist[v] = dist[u] + 1;
          next.push_back(v);
        }
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

void check_problem(const LinkTable& table, const RoutingProblem& problem) {
  const std::size_t n = table.capacity.rows;
  if (n == 0 || table.capacity.cols != n)
    throw std::invalid_argument("routing: empty or non-square link table");
  if (problem.source >= n || problem.dest >= n)
    throw std::invalid_argument("routing: node id out of range");
  if (problem.source == problem.dest)
    throw std::invalid_argument("routing: source and dest must differ");
  if (!(problem.min_capacity >= 0.0))
    throw std::invalid_argument("routing: min_capacity must be >= 0");
}

bool path_valid(const LinkTable& table, const RoutingProblem& problem,
                const std::vector<std::size_t>& path) {
  const std::size_t n = table.capacity.rows;
  if (path.size() < 2) return false;
  if (path.front() != problem.source || path.back() != problem.dest) return false;
  std::unordered_set<std::size_t> seen;
  for (const std::size_t v : path) {
    if (v >= n || !seen.insert(v).second) return false;
  }
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    if (table.capacity(path[i], path[i + 1]) < problem.min_capacity) return false;
  }
  return true;
}

double path_bottleneck(const LinkTable& table, const std::vector<std::size_t>& path) {
  double b = kInf;
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    b = std::min(b, table.capacity(path[i], path[i + 1]));
  return b;
}

// Angular position of `next` around `cur`, measured from the cur->dest
// bearing, quantized into 8 sectors of 45 degrees.
std::size_t bearing_sector(const Node& cur, const Node& next, const Node& dest) {
  const double two_pi = 6.283185307179586476925286766559;
  const double base = std::atan2(dest.y - cur.y, dest.x - cur.x);
  double rel = std::atan2(next.y - cur.y, next.x - cur.x) - base;
  rel = std::fmod(rel, two_pi);
  if (rel < 0.0) rel += two_pi;
  const auto s = static_cast<std::size_t>(rel / (two_pi / 8.0));
  return std::min<std::size_t>(s, 7);
}

// Position of the walker plus, per bearing sector, a geometric lookahead:
// the best two-hop backbone detour ratio through a usable unvisited node in
// that sector, and how many such candidates exist. Empty sectors get the
// ratio cap. Mirrors exactly the candidate set the decoder may pick from.
std::vector<double> step_features(const std::vector<double>& global,
                                  const Deployment& dep, const LinkTable& table,
                                  std::size_t cur, std::size_t dest,
                                  const std::vector<char>& visited,
                                  double min_capacity) {
  constexpr double kRatioCap = 4.0;
  const Node& c = dep.topology.nodes[cur];
  const Node& d = dep.topology.nodes[dest];
  std::vector<double> f = global;
  f.push_back(c.x / dep.area_side);
  f.push_back(c.y / dep.area_side);
  f.push_back(std::hypot(c.x - d.x, c.y - d.y));
  f.push_back(table.backbone_distance(cur, dest));

  const double direct_bb = std::max(table.backbone_distance(cur, dest), 1.0);
  std::array<double, 8> ratio;
  ratio.fill(kRatioCap);
  std::array<double, 8> count{};
  double usable_total = 0.0;
  for (std::size_t v = 0; v < dep.topology.nodes.size(); ++v) {
    if (v == cur || visited[v]) continue;
    if (table.capacity(cur, v) < min_capacity) continue;
    usable_total += 1.0;
    const std::size_t s = bearing_sector(c, dep.topology.nodes[v], d);
    const double detour =
        (table.backbone_distance(cur, v) + table.backbone_distance(v, dest)) /
        direct_bb;
    ratio[s] = std::min(ratio[s], std::min(detour, kRatioCap));
    count[s] += 1.0;
  }
  // Whether the final hop itself functions; the link states are router
  // inputs, the learned part is which way to relay when they do not.
  f.push_back(table.capacity(cur, dest) >= min_capacity ? 1.0 : 0.0);
  f.push_back(usable_total);
  f.insert(f.end(), ratio.begin(), ratio.end());
  f.insert(f.end(), count.begin(), count.end());
  return f;
}

// Column-wise standardization; near-constant columns pass through unscaled.
void fit_zscore(const Tensor2& x, std::vector<double>& mean, std::vector<double>& std) {
  mean.assign(x.cols, 0.0);
  std.assign(x.cols, 1.0);
  if (x.rows == 0) return;
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x(r, c);
  for (double& m : mean) m /= static_cast<double>(x.rows);
  std::vector<double> var(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x(r, c) - mean[c];
      var[c] += d * d;
    }
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double s = std::sqrt(var[c] / static_cast<double>(x.rows));
    std[c] = s < 1e-12 ? 1.0 : s;
  }
}

void apply_zscore(Tensor2& x, const std::vector<double>& mean,
                  const std::vector<double>& std) {
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) x(r, c) = (x(r, c) - mean[c]) / std[c];
}

std::size_t argmax_row(const Tensor2& out, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < out.cols; ++c)
    if (out(row, c) > out(row, best)) best = c;
  return best;
}

std::size_t classify(const MlpModel& net, const std::vector<double>& raw,
                     const std::vector<double>& mean, const std::vector<double>& std) {
  Tensor2 x(1, raw.size());
  for (std::size_t c = 0; c < raw.size(); ++c) x(0, c) = (raw[c] - mean[c]) / std[c];
  return argmax_row(forward(net, x).output(), 0);
}

MlpModel make_classifier(std::size_t in_dim, const std::vector<std::size_t>& hidden,
                         std::size_t classes, std::uint64_t seed) {
  std::vector<std::size_t> dims{in_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(classes);
  std::vector<Activation> acts(hidden.size(), Activation::Tanh);
  acts.push_back(Activation::Softmax);
  return make_mlp(dims, acts, seed);
}

}  // namespace

void Deployment::validate() const {
  topology.validate();
  if (!(density > 0.0) || !(area_side > 0.0))
    throw std::invalid_argument("Deployment: density and area_side must be positive");
  const double km = area_side / 1000.0;
  const double implied = static_cast<double>(topology.nodes.size()) / (km * km);
  if (std::abs(implied - density) > 1e-6 * density)
    throw std::invalid_argument("Deployment: density inconsistent with node count and area");
}

Deployment random_deployment(std::size_t n_nodes, double density_per_km2,
                             std::uint64_t seed, const Load& default_load) {
  if (n_nodes < 2) throw std::invalid_argument("random_deployment: need >= 2 nodes");
  if (!(density_per_km2 > 0.0))
    throw std::invalid_argument("random_deployment: density must be positive");
  const double area_side =
      std::sqrt(static_cast<double>(n_nodes) / density_per_km2) * 1000.0;
  Deployment dep;
  dep.topology = topo_random(n_nodes, area_side, 0.0, seed, default_load);
  dep.density = density_per_km2;
  dep.area_side = area_side;
  dep.validate();
  return dep;
}

LinkTable build_link_table(const Deployment& dep, const FrequencyGrid& grid,
                           const std::vector<double>& noise_psd,
                           const std::vector<double>& tx_psd, int threads) {
  dep.validate();
  grid.validate();
  if (noise_psd.size() != grid.n_bins || tx_psd.size() != grid.n_bins)
    throw std::invalid_argument("build_link_table: PSD length must match the grid");
  const std::size_t n = dep.topology.nodes.size();
  LinkTable table;
  table.capacity = Tensor2(n, n, 0.0);
  table.backbone_distance = Tensor2(n, n, 0.0);

  const TreeChannelSolver solver(dep.topology, grid);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), threads, [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const double c = capacity(solver.transfer(i, j), noise_psd, tx_psd);
    table.capacity(i, j) = c;
    table.capacity(j, i) = c;
  });

  // Tree distances: one traversal per source fills its upper-triangle row;
  // mirroring keeps the matrix bitwise symmetric.
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const Edge& e : dep.topology.edges) {
    adj[e.a].emplace_back(e.b, e.length);
    adj[e.b].emplace_back(e.a, e.length);
  }
  std::vector<double> dist(n);
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<char> seen(n, 0);
    dist[s] = 0.0;
    seen[s] = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& [v, len] : adj[u]) {
        if (seen[v]) continue;
        seen[v] = 1;
        dist[v] = dist[u] + len;
        stack.push_back(v);
      }
    }
    for (std::size_t v = s + 1; v < n; ++v) {
      table.backbone_distance(s, v) = dist[v];
      table.backbone_distance(v, s) = dist[v];
    }
  }
  return table;
}

RoutingSolution optimal_route(const LinkTable& table, const RoutingProblem& problem) {
  check_problem(table, problem);
  const std::size_t n = table.capacity.rows;
  const double thr = problem.min_capacity;

  const auto ds = hop_counts(table, thr, problem.source);
  if (ds[problem.dest] == kUnreached) return {};
  const auto dd = hop_counts(table, thr, problem.dest);
  const std::size_t hops = ds[problem.dest];

  // Nodes on some minimum-hop path, grouped by distance from the source.
  // Ascending construction keeps each layer sorted by id.
  std::vector<std::vector<std::size_t>> layers(hops + 1);
  for (std::size_t v = 0; v < n; ++v) {
    if (ds[v] == kUnreached || dd[v] == kUnreached) continue;
    if (ds[v] + dd[v] == hops) layers[ds[v]].push_back(v);
  }

  // suf[v] = best achievable bottleneck from v to dest over exact-hop
  // continuations. All comparisons reuse stored capacities unchanged, so the
  // equality tests below are exact.
  std::vector<double> suf(n, -kInf);
  suf[problem.dest] = kInf;
  for (std::size_t layer = hops; layer-- > 0;) {
    for (const std::size_t u : layers[layer]) {
      double best = -kInf;
      for (const std::size_t v : layers[layer + 1]) {
        if (table.capacity(u, v) < thr) continue;
        best = std::max(best, std::min(table.capacity(u, v), suf[v]));
      }
      suf[u] = best;
    }
  }
  const double target = suf[problem.source];

  // Greedy lexicographic reconstruction: at each layer take the smallest
  // successor that still allows the optimal bottleneck.
  RoutingSolution sol;
  sol.feasible = true;
  sol.path.push_back(problem.source);
  double prefix = kInf;
  std::size_t cur = problem.source;
  for (std::size_t layer = 0; layer < hops; ++layer) {
    for (const std::size_t v : layers[layer + 1]) {
      if (table.capacity(cur, v) < thr) continue;
      const double via = std::min(prefix, std::min(table.capacity(cur, v), suf[v]));
      if (via == target) {
        prefix = std::min(prefix, table.capacity(cur, v));
        sol.path.push_back(v);
        cur = v;
        break;
      }
    }
  }
  if (cur != problem.dest)
    throw std::logic_error("optimal_route: reconstruction failed");
  sol.n_routers = sol.path.size() - 2;
  sol.bottleneck_capacity = target;
  return sol;
}

const std::vector<std::string> kRouteFeatureNames = {
    "src_x_norm", "src_y_norm",       "dst_x_norm",       "dst_y_norm",
    "n_nodes",    "max_backbone_m",   "min_capacity_bps", "area_side_m",
    "density_per_km2", "sd_euclid_m", "sd_backbone_m"};

std::vector<double> route_features(const Deployment& dep, const LinkTable& table,
                                   const RoutingProblem& problem) {
  const auto& nodes = dep.topology.nodes;
  if (problem.source >= nodes.size() || problem.dest >= nodes.size())
    throw std::invalid_argument("route_features: node id out of range");
  const Node& s = nodes[problem.source];
  const Node& d = nodes[problem.dest];
  const double a = dep.area_side;
  double max_bb = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = i + 1; j < nodes.size(); ++j)
      max_bb = std::max(max_bb, table.backbone_distance(i, j));
  return {s.x / a,
          s.y / a,
          d.x / a,
          d.y / a,
          static_cast<double>(nodes.size()),
          max_bb,
          problem.min_capacity,
          a,
          dep.density,
          std::hypot(s.x - d.x, s.y - d.y),
          table.backbone_distance(problem.source, problem.dest)};
}

RouteDataset route_dataset(std::size_t n_topologies, std::size_t node_lo,
                           std::size_t node_hi, std::uint64_t seed,
                           const RouteGenConfig& cfg, int threads) {
  if (n_topologies == 0) throw std::invalid_argument("route_dataset: need topologies");
  if (node_lo < 2 || node_hi < node_lo)
    throw std::invalid_argument("route_dataset: bad node range");
  if (!(cfg.density_lo > 0.0) || cfg.density_hi < cfg.density_lo)
    throw std::invalid_argument("route_dataset: bad density range");
  if (cfg.area_side_lo > 0.0 && cfg.area_side_hi < cfg.area_side_lo)
    throw std::invalid_argument("route_dataset: bad area range");
  cfg.grid.validate();

  const std::vector<double> noise(cfg.grid.n_bins, cfg.noise_psd);
  const std::vector<double> tx(cfg.grid.n_bins, cfg.tx_psd);
  const Rng root(seed);

  RouteDataset out;
  out.deployments.resize(n_topologies);
  out.tables.resize(n_topologies);
  std::vector<std::vector<RouteCase>> cases(n_topologies);
  std::vector<std::size_t> skipped(n_topologies, 0);

  parallel_for(n_topologies, threads, [&](std::size_t t) {
    Rng rng = root.split(t);
    const std::size_t n = node_lo + rng.below(node_hi - node_lo + 1);
    double density = rng.uniform(cfg.density_lo, cfg.density_hi);
    if (cfg.area_side_lo > 0.0) {
      const double side_km = rng.uniform(cfg.area_side_lo, cfg.area_side_hi) / 1000.0;
      density = static_cast<double>(n) / (side_km * side_km);
    }
    out.deployments[t] = random_deployment(n, density, rng.split("layout").seed());
    out.tables[t] = build_link_table(out.deployments[t], cfg.grid, noise, tx, 1);

    Rng prng = rng.split("problems");
    for (std::size_t p = 0; p < cfg.problems_per_topology; ++p) {
      RouteCase rc;
      rc.topo_index = t;
      rc.problem.min_capacity = cfg.min_capacity;
      rc.problem.source = prng.below(n);
      do {
        rc.problem.dest = prng.below(n);
      } while (rc.problem.dest == rc.problem.source);
      rc.optimum = optimal_route(out.tables[t], rc.problem);
      if (!rc.optimum.feasible) {
        ++skipped[t];
        continue;
      }
      rc.features = route_features(out.deployments[t], out.tables[t], rc.problem);
      cases[t].push_back(std::move(rc));
    }
  });

  for (std::size_t t = 0; t < n_topologies; ++t) {
    out.infeasible_skipped += skipped[t];
    for (RouteCase& rc : cases[t]) out.cases.push_back(std::move(rc));
  }
  return out;
}

RouterModel nn_route_train(const RouteDataset& data, const RouteTrainConfig& cfg) {
  if (data.cases.empty()) throw std::invalid_argument("nn_route_train: empty dataset");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("nn_route_train: dropout must be in [0,1)");

  const std::size_t global_dim = data.cases.front().features.size();
  Tensor2 hops_x(data.cases.size(), global_dim);
  Tensor2 hops_y(data.cases.size(), 4, 0.0);
  std::vector<std::vector<double>> step_rows;
  std::vector<std::size_t> step_labels;
  for (std::size_t i = 0; i < data.cases.size(); ++i) {
    const RouteCase& rc = data.cases[i];
    for (std::size_t c = 0; c < global_dim; ++c) hops_x(i, c) = rc.features[c];
    hops_y(i, std::min<std::size_t>(rc.optimum.n_routers, 3)) = 1.0;

    const Deployment& dep = data.deployments[rc.topo_index];
    const LinkTable& table = data.tables[rc.topo_index];
    const auto& path = rc.optimum.path;
    std::vector<char> visited(dep.topology.nodes.size(), 0);
    visited[path.front()] = 1;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      step_rows.push_back(step_features(rc.features, dep, table, path[k],
                                        rc.problem.dest, visited,
                                        rc.problem.min_capacity));
      visited[path[k + 1]] = 1;
      if (path[k + 1] == rc.problem.dest) {
        step_labels.push_back(8);
      } else {
        step_labels.push_back(bearing_sector(dep.topology.nodes[path[k]],
                                             dep.topology.nodes[path[k + 1]],
                                             dep.topology.nodes[rc.problem.dest]));
      }
    }
  }

  // Final "go direct" hops outnumber relay hops by a lot on realistic
  // thresholds; replicate the relay rows so the sector classes get weight.
  std::size_t n_direct = 0;
  for (const std::size_t l : step_labels) n_direct += l == 8 ? 1 : 0;
  const std::size_t n_relay = step_labels.size() - n_direct;
  std::size_t rep = 1;
  if (n_relay > 0 && n_direct > n_relay)
    rep = std::min<std::size_t>(8, (n_direct + n_relay - 1) / n_relay);
  const std::size_t step_dim = global_dim + 22;
  std::size_t n_step = n_direct + rep * n_relay;
  Tensor2 step_x(n_step, step_dim);
  Tensor2 step_y(n_step, 9, 0.0);
  std::size_t r = 0;
  for (std::size_t i = 0; i < step_rows.size(); ++i) {
    const std::size_t copies = step_labels[i] == 8 ? 1 : rep;
    for (std::size_t k = 0; k < copies; ++k, ++r) {
      for (std::size_t c = 0; c < step_dim; ++c) step_x(r, c) = step_rows[i][c];
      step_y(r, step_labels[i]) = 1.0;
    }
  }

  RouterModel model;
  model.min_capacity = data.cases.front().problem.min_capacity;
  fit_zscore(hops_x, model.hops_mean, model.hops_std);
  apply_zscore(hops_x, model.hops_mean, model.hops_std);
  fit_zscore(step_x, model.step_mean, model.step_std);
  apply_zscore(step_x, model.step_mean, model.step_std);

  const Rng root(cfg.seed);
  model.hops_net = make_classifier(global_dim, cfg.hidden, 4, root.split("hops").seed());
  model.next_hop_net =
      make_classifier(step_dim, cfg.hidden, 9, root.split("step").seed());

  TrainConfig tc;
  tc.optimizer = Optimizer::Adam;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.dropout_rate = cfg.dropout;
  tc.loss = LossKind::CrossEntropy;
  tc.seed = root.split("hops-train").seed();
  train(model.hops_net, LabeledDataset{std::move(hops_x), std::move(hops_y)}, tc);
  tc.seed = root.split("step-train").seed();
  train(model.next_hop_net, LabeledDataset{std::move(step_x), std::move(step_y)}, tc);
  return model;
}

RoutingSolution nn_route_predict(const RouterModel& model, const Deployment& dep,
                                 const LinkTable& table, const RoutingProblem& problem,
                                 std::size_t hop_budget) {
  check_problem(table, problem);
  const std::size_t n = table.capacity.rows;
  const std::vector<double> global = route_features(dep, table, problem);

  RoutingSolution sol;
  sol.path.push_back(problem.source);
  std::vector<char> visited(n, 0);
  visited[problem.source] = 1;
  std::size_t cur = problem.source;

  while (cur != problem.dest && sol.path.size() - 1 < hop_budget) {
    const std::size_t cls =
        classify(model.next_hop_net,
                 step_features(global, dep, table, cur, problem.dest, visited,
                               problem.min_capacity),
                 model.step_mean, model.step_std);
    if (cls == 8) {
      // "go direct": commit to dest and let validation judge the hop.
      sol.path.push_back(problem.dest);
      cur = problem.dest;
      continue;
    }
    // Resolve the sector to the unvisited usable neighbor with the best
    // two-hop outlook; no candidate means the prediction failed.
    std::size_t pick = n;
    double pick_score = -kInf;
    for (std::size_t v = 0; v < n; ++v) {
      if (visited[v] || v == cur) continue;
      if (table.capacity(cur, v) < problem.min_capacity) continue;
      if (bearing_sector(dep.topology.nodes[cur], dep.topology.nodes[v],
                         dep.topology.nodes[problem.dest]) != cls)
        continue;
      const double score = v == problem.dest
                               ? table.capacity(cur, v)
                               : std::min(table.capacity(cur, v),
                                          table.capacity(v, problem.dest));
      if (score > pick_score) {
        pick_score = score;
        pick = v;
      }
    }
    if (pick == n) break;
    sol.path.push_back(pick);
    visited[pick] = 1;
    cur = pick;
  }

  if (cur != problem.dest || !path_valid(table, problem, sol.path)) {
    sol.feasible = false;
    return sol;  // partial walk kept for inspection
  }
  sol.feasible = true;
  sol.n_routers = sol.path.size() - 2;
  sol.bottleneck_capacity = path_bottleneck(table, sol.path);
  return sol;
}

std::size_t predict_router_class(const RouterModel& model,
                                 const std::vector<double>& features) {
  if (features.size() != model.hops_mean.size())
    throw std::invalid_argument("predict_router_class: feature size mismatch");
  return classify(model.hops_net, features, model.hops_mean, model.hops_std);
}

double match_fraction(const RouterModel& model, const RouteDataset& data) {
  if (data.cases.empty()) throw std::invalid_argument("match_fraction: empty dataset");
  std::size_t matched = 0;
  for (const RouteCase& rc : data.cases) {
    const std::size_t budget = 2 * (rc.optimum.path.size() - 1) + 2;
    const RoutingSolution pred =
        nn_route_predict(model, data.deployments[rc.topo_index],
                         data.tables[rc.topo_index], rc.problem, budget);
    if (pred.feasible && pred.path == rc.optimum.path) ++matched;
  }
  return static_cast<double>(matched) / static_cast<double>(data.cases.size());
}

std::vector<GainPoint> eval_capacity_gain(const RouteDataset& data,
                                          const RouterFn& router) {
  struct Acc {
    double direct = 0.0, opt = 0.0, ml = 0.0;
    std::size_t n = 0;
  };
  std::map<double, Acc> acc;
  for (const RouteCase& rc : data.cases) {
    const Deployment& dep = data.deployments[rc.topo_index];
    const LinkTable& table = data.tables[rc.topo_index];
    const double direct = table.capacity(rc.problem.source, rc.problem.dest);
    const std::size_t opt_hops = rc.optimum.path.size() - 1;

    const RoutingSolution sol = router(dep, table, rc.problem, 2 * opt_hops + 2);
    double contribution = direct;
    if (sol.feasible && path_valid(table, rc.problem, sol.path) &&
        sol.path.size() - 1 == opt_hops)
      contribution = path_bottleneck(table, sol.path);

    Acc& a = acc[dep.density];
    a.direct += direct;
    a.opt += rc.optimum.bottleneck_capacity;
    a.ml += contribution;
    ++a.n;
  }

  std::vector<GainPoint> out;
  out.reserve(acc.size());
  for (const auto& [density, a] : acc) {
    GainPoint g;
    g.density = density;
    g.gain_ml = a.ml / a.direct;
    g.gain_optimal = a.opt / a.direct;
    g.n_problems = a.n;
    if (g.gain_ml > g.gain_optimal + 1e-12)
      throw std::logic_error("eval_capacity_gain: routed gain exceeded the optimum");
    out.push_back(g);
  }
  return out;
}

RouterFn oracle_router() {
  return [](const Deployment&, const LinkTable& table, const RoutingProblem& problem,
            std::size_t) { return optimal_route(table, problem); };
}

RouterFn direct_router() {
  return [](const Deployment&, const LinkTable& table, const RoutingProblem& problem,
            std::size_t) {
    RoutingSolution sol;
    sol.path = {problem.source, problem.dest};
    const double c = table.capacity(problem.source, problem.dest);
    sol.feasible = c >= problem.min_capacity;
    sol.n_routers = 0;
    sol.bottleneck_capacity = c;
    return sol;
  };
}

RouterFn ml_router(const RouterModel& model) {
  return [model](const Deployment& dep, const LinkTable& table,
                 const RoutingProblem& problem, std::size_t hop_budget) {
    return nn_route_predict(model, dep, table, problem, hop_budget);
  };
}

CapacitySurface::CapacitySurface(const std::vector<CapacitySample>& samples,
                                 std::size_t density_bins, std::size_t distance_bins)
    : nd_(density_bins), nx_(distance_bins) {
  if (samples.size() < 50)
    throw std::invalid_argument("CapacitySurface: need at least 50 samples");
  if (nd_ == 0 || nx_ == 0)
    throw std::invalid_argument("CapacitySurface: need at least one bin per axis");
  d_lo_ = d_hi_ = samples.front().density;
  x_lo_ = x_hi_ = samples.front().distance;
  for (const CapacitySample& s : samples) {
    d_lo_ = std::min(d_lo_, s.density);
    d_hi_ = std::max(d_hi_, s.density);
    x_lo_ = std::min(x_lo_, s.distance);
    x_hi_ = std::max(x_hi_, s.distance);
  }
  cell_mean_.assign(nd_ * nx_, 0.0);
  cell_count_.assign(nd_ * nx_, 0);

  const auto bin = [](double v, double lo, double hi, std::size_t nbins) {
    if (!(hi > lo)) return std::size_t{0};
    const double t = (v - lo) / (hi - lo) * static_cast<double>(nbins);
    const auto b = static_cast<std::size_t>(std::max(0.0, t));
    return std::min(b, nbins - 1);
  };
  for (const CapacitySample& s : samples) {
    const std::size_t c = bin(s.density, d_lo_, d_hi_, nd_) * nx_ +
                          bin(s.distance, x_lo_, x_hi_, nx_);
    cell_mean_[c] += s.capacity;
    ++cell_count_[c];
  }
  for (std::size_t c = 0; c < cell_mean_.size(); ++c) {
    if (cell_count_[c] > 0) {
      cell_mean_[c] /= static_cast<double>(cell_count_[c]);
      ++populated_;
    }
  }
}

CapacityQuery CapacitySurface::query(double density, double distance) const {
  const auto bin = [](double v, double lo, double hi, std::size_t nbins) {
    if (!(hi > lo)) return std::size_t{0};
    const double t = (v - lo) / (hi - lo) * static_cast<double>(nbins);
    const auto b = static_cast<std::size_t>(std::max(0.0, t));
    return std::min(b, nbins - 1);
  };
  const bool inside = density >= d_lo_ && density <= d_hi_ && distance >= x_lo_ &&
                      distance <= x_hi_;
  const std::size_t id = bin(density, d_lo_, d_hi_, nd_);
  const std::size_t ix = bin(distance, x_lo_, x_hi_, nx_);

  CapacityQuery q;
  if (inside && cell_count_[id * nx_ + ix] > 0) {
    q.capacity = cell_mean_[id * nx_ + ix];
    q.extrapolated = false;
    return q;
  }
  // Nearest populated cell in (normalized) grid units; lowest index on ties.
  double best = kInf;
  std::size_t best_cell = 0;
  for (std::size_t d = 0; d < nd_; ++d) {
    for (std::size_t x = 0; x < nx_; ++x) {
      if (cell_count_[d * nx_ + x] == 0) continue;
      const double dd = static_cast<double>(d) - static_cast<double>(id);
      const double dx = static_cast<double>(x) - static_cast<double>(ix);
      const double dist2 = dd * dd + dx * dx;
      if (dist2 < best) {
        best = dist2;
        best_cell = d * nx_ + x;
      }
    }
  }
  q.capacity = cell_mean_[best_cell];
  q.extrapolated = true;
  return q;
}

void write_route_dataset_csv(const std::string& path, const RouteDataset& data) {
  CsvWriter w(path);
  std::vector<std::string> names = kRouteFeatureNames;
  names.push_back("label_n_routers");
  names.push_back("label_path");
  w.header(names);
  for (const RouteCase& rc : data.cases) {
    for (const double f : rc.features) w.cell(f);
    w.cell(static_cast<long long>(rc.optimum.n_routers));
    std::string joined;
    for (std::size_t i = 0; i < rc.optimum.path.size(); ++i) {
      if (i) joined += '-';
      joined += std::to_string(rc.optimum.path[i]);
    }
    w.cell(joined);
    w.end_row();
  }
  w.close();
}

std::string router_to_json(const RouterModel& model) {
  nlohmann::json j;
  j["hops_net"] = nlohmann::json::parse(model_to_json(model.hops_net));
  j["next_hop_net"] = nlohmann::json::parse(model_to_json(model.next_hop_net));
  j["hops_mean"] = model.hops_mean;
  j["hops_std"] = model.hops_std;
  j["step_mean"] = model.step_mean;
  j["step_std"] = model.step_std;
  j["min_capacity"] = model.min_capacity;
  return j.dump(2);
}

RouterModel router_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RouterModel model;
  model.hops_net = model_from_json(j.at("hops_net").dump());
  model.next_hop_net = model_from_json(j.at("next_hop_net").dump());
  model.hops_mean = j.at("hops_mean").get<std::vector<double>>();
  model.hops_std = j.at("hops_std").get<std::vector<double>>();
  model.step_mean = j.at("step_mean").get<std::vector<double>>();
  model.step_std = j.at("step_std").get<std::vector<double>>();
  model.min_capacity = j.at("min_capacity").get<double>();
  return model;
}

}  // namespace plcml
