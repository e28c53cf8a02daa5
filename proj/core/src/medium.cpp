#include "plcml/medium.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plcml/csv.hpp"
#include "plcml/rng.hpp"

namespace plcml {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

cdouble CableParams::series_impedance(double f) const {
  const double r = r0 * std::pow(f / 1e6, skin_exponent);
  return {r, kTwoPi * f * l};
}

cdouble CableParams::shunt_admittance(double f) const {
  const double g = g0 * std::pow(f / 1e6, dielectric_exponent);
  return {g, kTwoPi * f * c};
}

cdouble CableParams::characteristic_impedance(double f) const {
  return std::sqrt(series_impedance(f) / shunt_admittance(f));
}

cdouble CableParams::propagation_constant(double f) const {
  return std::sqrt(series_impedance(f) * shunt_admittance(f));
}

Load Load::impedance(cdouble z) {
  if (!(std::abs(z) > 0.0)) throw std::invalid_argument("Load: impedance must be nonzero");
  Load l;
  l.open = false;
  l.z = z;
  return l;
}

void Topology::validate() const {
  const std::size_t n = nodes.size();
  if (n < 2) throw std::invalid_argument("topology: need at least 2 nodes");
  for (std::size_t i = 0; i < n; ++i)
    if (nodes[i].id != i) throw std::invalid_argument("topology: ids must be 0..n-1 in order");
  if (edges.size() != n - 1)
    throw std::invalid_argument("topology: a tree needs exactly n-1 edges");
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Edge& e : edges) {
    if (e.a >= n || e.b >= n || e.a == e.b)
      throw std::invalid_argument("topology: bad edge endpoints");
    if (!(e.length > 0.0)) throw std::invalid_argument("topology: edge lengths must be positive");
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::size_t> stack = {0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (const std::size_t w : adj[u])
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
  }
  if (count != n) throw std::invalid_argument("topology: graph is disconnected");
}

void FrequencyGrid::validate() const {
  if (!(f_start > 0.0) || !(f_stop >= f_start))
    throw std::invalid_argument("frequency grid: need 0 < f_start <= f_stop");
  if (n_bins < 1) throw std::invalid_argument("frequency grid: need at least one bin");
  if (n_bins > 1 && !(f_stop > f_start))
    throw std::invalid_argument("frequency grid: multiple bins need f_stop > f_start");
}

FrequencyGrid FrequencyGrid::from_band(double start, double stop, double spacing) {
  if (!(start > 0.0) || !(stop > start) || !(spacing > 0.0))
    throw std::invalid_argument("frequency grid: bad band parameters");
  const auto steps = static_cast<std::size_t>(std::floor((stop - start) / spacing + 1e-9));
  FrequencyGrid g;
  g.f_start = start;
  g.n_bins = steps + 1;
  g.f_stop = start + static_cast<double>(steps) * spacing;
  g.validate();
  return g;
}

TreeChannelSolver::TreeChannelSolver(const Topology& topo, const FrequencyGrid& grid)
    : n_nodes_(topo.nodes.size()), grid_(grid) {
  grid_.validate();
  const std::size_t n = n_nodes_;
  const std::size_t ne = topo.edges.size();
  if (n < 2 || ne != n - 1)
    throw std::invalid_argument("channel solver: topology must be a tree");

  adj_.assign(n, {});
  for (std::size_t e = 0; e < ne; ++e) {
    adj_[topo.edges[e].a].push_back({e, topo.edges[e].b});
    adj_[topo.edges[e].b].push_back({e, topo.edges[e].a});
  }

  parent_.assign(n, n);
  parent_edge_.assign(n, ne);
  bfs_order_ = {0};
  bfs_order_.reserve(n);
  std::vector<std::uint8_t> seen(n, 0);
  seen[0] = 1;
  parent_[0] = 0;
  for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
    const std::size_t u = bfs_order_[head];
    for (const auto& [e, w] : adj_[u])
      if (!seen[w]) {
        seen[w] = 1;
        parent_[w] = u;
        parent_edge_[w] = e;
        bfs_order_.push_back(w);
      }
  }
  if (bfs_order_.size() != n)
    throw std::invalid_argument("channel solver: topology is disconnected");

  load_y_.resize(n);
  for (std::size_t i = 0; i < n; ++i) load_y_[i] = topo.nodes[i].load.admittance();

  const std::size_t nf = grid_.n_bins;
  dir_adm_.assign(nf, std::vector<cdouble>(2 * ne));
  abcd_.assign(nf, std::vector<EdgeAbcd>(ne));
  node_total_.assign(nf, std::vector<cdouble>(n));

  // slot of the admittance looking from `from` into edge e
  auto slot = [&topo](std::size_t e, std::size_t from) {
    return 2 * e + (topo.edges[e].a == from ? 0u : 1u);
  };

  std::vector<cdouble> line_c(ne);  // third cascade entry: I_in = c*V_out + a*I_out
  for (std::size_t fi = 0; fi < nf; ++fi) {
    const double f = grid_.freq(fi);
    for (std::size_t e = 0; e < ne; ++e) {
      const Edge& ed = topo.edges[e];
      if (ed.length == 0.0) {
        abcd_[fi][e] = {cdouble{1.0, 0.0}, cdouble{0.0, 0.0}};
        line_c[e] = {0.0, 0.0};
        continue;
      }
      const cdouble zc = ed.cable.characteristic_impedance(f);
      const cdouble gd = ed.cable.propagation_constant(f) * ed.length;
      const cdouble ch = std::cosh(gd), sh = std::sinh(gd);
      abcd_[fi][e] = {ch, zc * sh};
      line_c[e] = sh / zc;
    }
    auto line_yin = [&](std::size_t e, cdouble y_load) {
      return (line_c[e] + abcd_[fi][e].a * y_load) /
             (abcd_[fi][e].a + abcd_[fi][e].b * y_load);
    };

    // Leaves to root: admittance looking down into each subtree.
    auto& dir = dir_adm_[fi];
    for (std::size_t idx = n; idx-- > 1;) {
      const std::size_t u = bfs_order_[idx];
      const std::size_t p = parent_[u];
      cdouble y_sub = load_y_[u];
      for (const auto& [e, w] : adj_[u])
        if (w != p) y_sub += dir[slot(e, u)];
      dir[slot(parent_edge_[u], p)] = line_yin(parent_edge_[u], y_sub);
    }
    // Root to leaves: admittance looking back up, then per-node totals.
    auto& total = node_total_[fi];
    total[0] = load_y_[0];
    for (const auto& [e, w] : adj_[0]) total[0] += dir[slot(e, 0)];
    for (std::size_t idx = 1; idx < n; ++idx) {
      const std::size_t u = bfs_order_[idx];
      const std::size_t p = parent_[u];
      const std::size_t e = parent_edge_[u];
      const cdouble y_exc = total[p] - dir[slot(e, p)];
      dir[slot(e, u)] = line_yin(e, y_exc);
      total[u] = load_y_[u];
      for (const auto& [ee, w] : adj_[u]) total[u] += dir[slot(ee, u)];
    }
  }
  // keep endpoints for slot lookups after construction
  edge_a_.resize(ne);
  edge_b_.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    edge_a_[e] = topo.edges[e].a;
    edge_b_[e] = topo.edges[e].b;
  }
}

ChannelResponse TreeChannelSolver::transfer(std::size_t tx, std::size_t rx) const {
  if (tx >= n_nodes_ || rx >= n_nodes_ || tx == rx)
    throw std::invalid_argument("transfer: need two distinct existing nodes");

  // Path tx -> rx via a breadth-first sweep from tx.
  std::vector<std::size_t> par(n_nodes_, n_nodes_), pare(n_nodes_, 0);
  std::vector<std::size_t> queue = {tx};
  par[tx] = tx;
  for (std::size_t head = 0; head < queue.size() && par[rx] == n_nodes_; ++head) {
    const std::size_t u = queue[head];
    for (const auto& [e, w] : adj_[u])
      if (par[w] == n_nodes_) {
        par[w] = u;
        pare[w] = e;
        queue.push_back(w);
      }
  }
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (edge, node entered)
  for (std::size_t v = rx; v != tx; v = par[v]) path.push_back({pare[v], v});
  std::reverse(path.begin(), path.end());

  auto slot = [this](std::size_t e, std::size_t from) {
    return 2 * e + (edge_a_[e] == from ? 0u : 1u);
  };

  ChannelResponse out;
  out.grid = grid_;
  out.h.assign(grid_.n_bins, cdouble{1.0, 0.0});
  for (std::size_t fi = 0; fi < grid_.n_bins; ++fi) {
    cdouble h{1.0, 0.0};
    for (const auto& [e, v] : path) {
      const cdouble y_fwd = node_total_[fi][v] - dir_adm_[fi][slot(e, v)];
      h /= abcd_[fi][e].a + abcd_[fi][e].b * y_fwd;
    }
    out.h[fi] = h;
  }
  return out;
}

LineState TreeChannelSolver::admittance(std::size_t node, double z0) const {
  if (node >= n_nodes_) throw std::invalid_argument("admittance: no such node");
  if (!(z0 > 0.0)) throw std::invalid_argument("admittance: reference impedance must be positive");
  LineState st;
  st.grid = grid_;
  st.z0 = z0;
  st.y_in.resize(grid_.n_bins);
  st.rho_in.resize(grid_.n_bins);
  for (std::size_t fi = 0; fi < grid_.n_bins; ++fi) {
    const cdouble y = node_total_[fi][node];
    st.y_in[fi] = y;
    st.rho_in[fi] = (1.0 - z0 * y) / (1.0 + z0 * y);
  }
  return st;
}

ChannelResponse tl_transfer(const Topology& topo, std::size_t tx, std::size_t rx,
                            const FrequencyGrid& grid) {
  return TreeChannelSolver(topo, grid).transfer(tx, rx);
}

LineState input_admittance(const Topology& topo, std::size_t node,
                           const FrequencyGrid& grid, double z0) {
  return TreeChannelSolver(topo, grid).admittance(node, z0);
}

Topology topo_random(std::size_t n_nodes, double area_side, double avg_edge_len,
                     std::uint64_t seed, const Load& default_load) {
  if (n_nodes < 2) throw std::invalid_argument("topo_random: need at least 2 nodes");
  if (!(area_side > 0.0)) throw std::invalid_argument("topo_random: bad area");
  Rng rng(seed);

  Topology topo;
  topo.nodes.resize(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    topo.nodes[i].id = i;
    topo.nodes[i].x = rng.uniform(0.0, area_side);
    topo.nodes[i].y = rng.uniform(0.0, area_side);
    topo.nodes[i].load = default_load;
  }

  // Prim's algorithm over the complete Euclidean graph.
  auto dist = [&](std::size_t i, std::size_t j) {
    const double dx = topo.nodes[i].x - topo.nodes[j].x;
    const double dy = topo.nodes[i].y - topo.nodes[j].y;
    return std::sqrt(dx * dx + dy * dy);
  };
  std::vector<double> best(n_nodes, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> link(n_nodes, 0);
  std::vector<std::uint8_t> in_tree(n_nodes, 0);
  in_tree[0] = 1;
  for (std::size_t i = 1; i < n_nodes; ++i) best[i] = dist(0, i);
  for (std::size_t step = 1; step < n_nodes; ++step) {
    std::size_t pick = n_nodes;
    for (std::size_t i = 0; i < n_nodes; ++i)
      if (!in_tree[i] && (pick == n_nodes || best[i] < best[pick])) pick = i;
    in_tree[pick] = 1;
    topo.edges.push_back({link[pick], pick, best[pick], CableParams{}});
    for (std::size_t i = 0; i < n_nodes; ++i)
      if (!in_tree[i]) {
        const double d = dist(pick, i);
        if (d < best[i]) {
          best[i] = d;
          link[i] = pick;
        }
      }
  }

  if (avg_edge_len > 0.0) {
    double mean = 0.0;
    for (const Edge& e : topo.edges) mean += e.length;
    mean /= static_cast<double>(topo.edges.size());
    if (mean > 0.0) {
      const double s = avg_edge_len / mean;
      for (Node& nd : topo.nodes) {
        nd.x *= s;
        nd.y *= s;
      }
      for (Edge& e : topo.edges) e.length *= s;
    }
  }
  topo.validate();
  return topo;
}

ChannelResponse topdown_channel(const MultipathParams& params,
                                const FrequencyGrid& grid) {
  grid.validate();
  if (params.paths.empty())
    throw std::invalid_argument("topdown_channel: need at least one path");
  if (!(params.v > 0.0)) throw std::invalid_argument("topdown_channel: bad speed");
  for (const MultipathPath& p : params.paths)
    if (!(p.length > 0.0)) throw std::invalid_argument("topdown_channel: path lengths must be positive");

  ChannelResponse out;
  out.grid = grid;
  out.h.resize(grid.n_bins);
  for (std::size_t fi = 0; fi < grid.n_bins; ++fi) {
    const double f = grid.freq(fi);
    const double att_coef = params.a0 + params.a1 * std::pow(f, params.k);
    cdouble acc{0.0, 0.0};
    for (const MultipathPath& p : params.paths) {
      const double mag = p.gain * std::exp(-att_coef * p.length);
      const double phase = -kTwoPi * f * p.length / params.v;
      acc += mag * std::polar(1.0, phase);
    }
    out.h[fi] = acc;
  }
  return out;
}

MultipathParams random_multipath(std::uint64_t seed, const MultipathConfig& cfg) {
  if (cfg.min_paths < 1 || cfg.max_paths < cfg.min_paths)
    throw std::invalid_argument("random_multipath: bad path-count range");
  Rng rng(seed);
  const FrequencyGrid band{cfg.band_lo, cfg.band_hi, cfg.check_bins};

  for (std::size_t attempt = 0; attempt < cfg.max_rejects; ++attempt) {
    MultipathParams p;
    p.a0 = cfg.a0;
    p.a1 = cfg.a1;
    p.k = cfg.k;
    p.v = cfg.v;
    const std::size_t n_paths =
        cfg.min_paths + static_cast<std::size_t>(rng.below(cfg.max_paths - cfg.min_paths + 1));
    double d = std::clamp(rng.normal(cfg.first_len_mean, cfg.first_len_std),
                          cfg.first_len_min, cfg.first_len_max);
    double g = rng.uniform(cfg.first_gain_min, cfg.first_gain_max);
    p.paths.push_back({g, d});
    for (std::size_t i = 1; i < n_paths; ++i) {
      d += rng.uniform(cfg.extra_len_min, cfg.extra_len_max);
      const double mag = std::abs(g) * rng.uniform(cfg.gain_decay_min, cfg.gain_decay_max);
      g = rng.below(2) == 0 ? mag : -mag;
      p.paths.push_back({g, d});
    }

    const ChannelResponse h = topdown_channel(p, band);
    bool ok = true;
    for (const cdouble& v : h.h) {
      const double db = 20.0 * std::log10(std::abs(v));
      if (db < cfg.db_floor || db > cfg.db_ceil) {
        ok = false;
        break;
      }
    }
    if (ok) return p;
  }
  throw std::runtime_error("random_multipath: rejection budget exceeded");
}

double capacity(const ChannelResponse& h, const std::vector<double>& noise_psd,
                const std::vector<double>& tx_psd) {
  const std::size_t n = h.h.size();
  if (noise_psd.size() != n || tx_psd.size() != n)
    throw std::invalid_argument("capacity: vector sizes must match the grid");
  const double df = h.grid.delta();
  double bits = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(noise_psd[i] > 0.0)) throw std::invalid_argument("capacity: noise bins must be positive");
    if (tx_psd[i] < 0.0) throw std::invalid_argument("capacity: negative transmit power");
    const double snr = std::norm(h.h[i]) * tx_psd[i] / noise_psd[i];
    bits += df * std::log2(1.0 + snr);
  }
  return bits;
}

std::vector<double> waterfill(const std::vector<double>& channel_gains,
                              const std::vector<double>& noise_psd,
                              double total_power, double delta_f) {
  const std::size_t n = channel_gains.size();
  if (noise_psd.size() != n || n == 0)
    throw std::invalid_argument("waterfill: bad vector sizes");
  if (!(total_power > 0.0) || !(delta_f > 0.0))
    throw std::invalid_argument("waterfill: power and bin width must be positive");

  std::vector<double> floor(n);
  double c_max = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(noise_psd[i] > 0.0)) throw std::invalid_argument("waterfill: noise bins must be positive");
    if (channel_gains[i] > 0.0) {
      floor[i] = noise_psd[i] / (channel_gains[i] * channel_gains[i]);
      c_max = std::max(c_max, floor[i]);
      any = true;
    } else {
      floor[i] = std::numeric_limits<double>::infinity();
    }
  }
  if (!any) throw std::invalid_argument("waterfill: all channel gains are zero");

  auto allocated = [&](double mu) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::isfinite(floor[i]) && mu > floor[i]) s += (mu - floor[i]) * delta_f;
    return s;
  };

  double lo = 0.0;
  double hi = c_max + total_power / (delta_f * static_cast<double>(n));
  while (allocated(hi) < total_power) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (allocated(mid) < total_power)
      lo = mid;
    else
      hi = mid;
    if (std::abs(allocated(hi) - total_power) <= 1e-12 * total_power) break;
  }
  const double mu = hi;
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (std::isfinite(floor[i])) p[i] = std::max(0.0, mu - floor[i]);

  // Close the bisection residual exactly by scaling the active bins.
  double got = 0.0;
  for (const double v : p) got += v * delta_f;
  if (got > 0.0) {
    const double scale = total_power / got;
    for (double& v : p) v *= scale;
  }
  return p;
}

namespace {

Topology split_edge(const Topology& topo, std::size_t edge, double position,
                    const Load& mid_load, const CableParams* mid_cable_override,
                    double mid_length) {
  // Splits edges[edge] at `position` (and again at position+mid_length when
  // mid_length > 0); the middle segment takes mid_cable_override if given.
  const Edge old = topo.edges[edge];
  Topology out = topo;
  out.edges.erase(out.edges.begin() + static_cast<long>(edge));

  const Node& na = topo.nodes[old.a];
  const Node& nb = topo.nodes[old.b];
  auto lerp_node = [&](double at, const Load& load) {
    Node nd;
    nd.id = out.nodes.size();
    const double t = at / old.length;
    nd.x = na.x + (nb.x - na.x) * t;
    nd.y = na.y + (nb.y - na.y) * t;
    nd.load = load;
    out.nodes.push_back(nd);
    return nd.id;
  };

  if (mid_length <= 0.0) {  // single cut with a shunt load at the joint
    const std::size_t j = lerp_node(position, mid_load);
    out.edges.push_back({old.a, j, position, old.cable});
    out.edges.push_back({j, old.b, old.length - position, old.cable});
  } else {  // carve out [position, position+mid_length] as its own segment
    const CableParams mid = mid_cable_override ? *mid_cable_override : old.cable;
    std::size_t left = old.a;
    if (position > 0.0) {
      const std::size_t j = lerp_node(position, Load::open_circuit());
      out.edges.push_back({old.a, j, position, old.cable});
      left = j;
    }
    const double mid_end = position + mid_length;
    if (mid_end < old.length) {
      const std::size_t j = lerp_node(mid_end, Load::open_circuit());
      out.edges.push_back({left, j, mid_length, mid});
      out.edges.push_back({j, old.b, old.length - mid_end, old.cable});
    } else {
      out.edges.push_back({left, old.b, mid_length, mid});
    }
  }
  return out;
}

}  // namespace

Topology perturb(const Topology& topo, const Anomaly& anomaly) {
  if (const auto* lc = std::get_if<LoadChange>(&anomaly)) {
    if (lc->node >= topo.nodes.size())
      throw std::invalid_argument("perturb: no such node");
    Topology out = topo;
    out.nodes[lc->node].load = lc->new_load;
    return out;
  }
  if (const auto* cf = std::get_if<ConcentratedFault>(&anomaly)) {
    if (cf->edge >= topo.edges.size())
      throw std::invalid_argument("perturb: no such edge");
    const double len = topo.edges[cf->edge].length;
    if (!(cf->position > 0.0) || !(cf->position < len))
      throw std::invalid_argument("perturb: fault position outside the edge");
    return split_edge(topo, cf->edge, cf->position, cf->shunt, nullptr, 0.0);
  }
  const auto& df = std::get<DistributedFault>(anomaly);
  if (df.edge >= topo.edges.size()) throw std::invalid_argument("perturb: no such edge");
  const double len = topo.edges[df.edge].length;
  if (!(df.start >= 0.0) || !(df.length > 0.0) || df.start + df.length > len + 1e-12)
    throw std::invalid_argument("perturb: fault segment outside the edge");
  if (!(df.factor > 0.0)) throw std::invalid_argument("perturb: scaling factor must be positive");
  CableParams scaled = topo.edges[df.edge].cable;
  scaled.r0 *= df.factor;
  scaled.g0 *= df.factor;
  if (df.scale_lc) {
    scaled.l *= df.factor;
    scaled.c *= df.factor;
  }
  const double seg = std::min(df.length, len - df.start);
  return split_edge(topo, df.edge, df.start, Load::open_circuit(), &scaled, seg);
}

std::string topo_to_json(const Topology& topo) {
  std::ostringstream os;
  os << "{\"nodes\":[";
  for (std::size_t i = 0; i < topo.nodes.size(); ++i) {
    const Node& nd = topo.nodes[i];
    if (i) os << ',';
    os << "{\"id\":" << nd.id << ",\"x\":" << format_double(nd.x)
       << ",\"y\":" << format_double(nd.y);
    if (nd.load.open) {
      os << ",\"load_open\":true}";
    } else {
      os << ",\"load_re\":" << format_double(nd.load.z.real())
         << ",\"load_im\":" << format_double(nd.load.z.imag()) << "}";
    }
  }
  os << "],\"edges\":[";
  for (std::size_t i = 0; i < topo.edges.size(); ++i) {
    const Edge& e = topo.edges[i];
    if (i) os << ',';
    os << "{\"a\":" << e.a << ",\"b\":" << e.b
       << ",\"length\":" << format_double(e.length) << ",\"cable\":{\"r0\":"
       << format_double(e.cable.r0) << ",\"l\":" << format_double(e.cable.l)
       << ",\"c\":" << format_double(e.cable.c) << ",\"g0\":" << format_double(e.cable.g0)
       << ",\"skin_exponent\":" << format_double(e.cable.skin_exponent)
       << ",\"dielectric_exponent\":" << format_double(e.cable.dielectric_exponent)
       << "}}";
  }
  os << "]}";
  return os.str();
}

Topology topo_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Topology topo;
  for (const auto& nj : j.at("nodes")) {
    Node nd;
    nd.id = nj.at("id").get<std::size_t>();
    nd.x = nj.at("x").get<double>();
    nd.y = nj.at("y").get<double>();
    if (nj.value("load_open", false))
      nd.load = Load::open_circuit();
    else
      nd.load = Load::impedance({nj.at("load_re").get<double>(),
                                 nj.at("load_im").get<double>()});
    topo.nodes.push_back(nd);
  }
  for (const auto& ej : j.at("edges")) {
    Edge e;
    e.a = ej.at("a").get<std::size_t>();
    e.b = ej.at("b").get<std::size_t>();
    e.length = ej.at("length").get<double>();
    const auto& cj = ej.at("cable");
    e.cable.r0 = cj.at("r0").get<double>();
    e.cable.l = cj.at("l").get<double>();
    e.cable.c = cj.at("c").get<double>();
    e.cable.g0 = cj.at("g0").get<double>();
    e.cable.skin_exponent = cj.at("skin_exponent").get<double>();
    e.cable.dielectric_exponent = cj.at("dielectric_exponent").get<double>();
    topo.edges.push_back(e);
  }
  topo.validate();
  return topo;
}

void save_topology(const Topology& topo, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << topo_to_json(topo);
}

Topology load_topology(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return topo_from_json(ss.str());
}

void write_channel_csv(const ChannelResponse& h, const std::string& path) {
  CsvWriter w(path);
  w.header({"freq_hz", "re", "im", "mag_db"});
  for (std::size_t i = 0; i < h.h.size(); ++i) {
    const double mag = std::abs(h.h[i]);
    const double db = mag > 0.0 ? 20.0 * std::log10(mag) : -400.0;
    w.cell(h.grid.freq(i)).cell(h.h[i].real()).cell(h.h[i].imag()).cell(db);
    w.end_row();
  }
}

}  // namespace plcml
