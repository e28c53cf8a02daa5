#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace plcml {

using cdouble = std::complex<double>;

// Per-unit-length cable parameters. Series resistance follows a skin-effect
// power law R(f) = r0*(f/1MHz)^skin_exponent and shunt conductance a
// dielectric-loss law G(f) = g0*(f/1MHz)^dielectric_exponent.
struct CableParams {
  double r0 = 1e-3;     // ohm/m at 1 MHz
  double l = 0.5e-6;    // H/m
  double c = 50e-12;    // F/m
  double g0 = 1e-9;     // S/m at 1 MHz
  double skin_exponent = 0.5;
  double dielectric_exponent = 1.0;

  cdouble series_impedance(double f) const;   // R(f) + j*2*pi*f*L, per metre
  cdouble shunt_admittance(double f) const;   // G(f) + j*2*pi*f*C, per metre
  cdouble characteristic_impedance(double f) const;
  cdouble propagation_constant(double f) const;  // per metre
};

// Terminal impedance; open circuit means no load is connected.
struct Load {
  bool open = true;
  cdouble z{};

  static Load open_circuit() { return Load{}; }
  static Load impedance(cdouble z);
  cdouble admittance() const { return open ? cdouble{0.0, 0.0} : 1.0 / z; }
  bool operator==(const Load&) const = default;
};

struct Node {
  std::size_t id = 0;
  double x = 0.0, y = 0.0;  // metres
  Load load;
};

struct Edge {
  std::size_t a = 0, b = 0;
  double length = 0.0;  // metres
  CableParams cable;
};

// Tree-structured two-conductor network.
struct Topology {
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  // Throws unless ids are 0..n-1 in order, lengths positive, and the edges
  // form a single connected tree.
  void validate() const;
};

struct FrequencyGrid {
  double f_start = 0.0, f_stop = 0.0;  // Hz, both included in the grid
  std::size_t n_bins = 0;

  double freq(std::size_t i) const {
    return n_bins < 2 ? f_start
                      : f_start + static_cast<double>(i) * delta();
  }
  double delta() const {
    return n_bins < 2 ? 0.0
                      : (f_stop - f_start) / static_cast<double>(n_bins - 1);
  }
  void validate() const;

  // Grid at exactly the requested spacing, starting at `start`, with the
  // last point the largest start + k*spacing that fits below `stop`.
  static FrequencyGrid from_band(double start, double stop, double spacing);
};

struct ChannelResponse {
  FrequencyGrid grid;
  std::vector<cdouble> h;
};

struct LineState {
  FrequencyGrid grid;
  std::vector<cdouble> y_in;    // S
  std::vector<cdouble> rho_in;  // (Z_in - Z0)/(Z_in + Z0)
  double z0 = 50.0;
};

// Pre-computes, per frequency, the admittance seen looking into every
// directed edge, so transfer functions and node admittances for any pair
// come out of cheap per-path products.
class TreeChannelSolver {
 public:
  TreeChannelSolver(const Topology& topo, const FrequencyGrid& grid);

  // Voltage ratio V(rx)/V(tx) with an ideal source holding V(tx).
  ChannelResponse transfer(std::size_t tx, std::size_t rx) const;

  // Admittance of everything connected at the node, local load included.
  LineState admittance(std::size_t node, double z0 = 50.0) const;

  const FrequencyGrid& grid() const { return grid_; }

 private:
  struct EdgeAbcd {
    cdouble a, b;  // cascade entries: V_in = a*V_out + b*I_out
  };

  std::size_t n_nodes_ = 0;
  FrequencyGrid grid_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj_;  // (edge, other)
  std::vector<std::size_t> parent_, parent_edge_, bfs_order_;
  std::vector<std::size_t> edge_a_, edge_b_;
  std::vector<cdouble> load_y_;
  // Indexed [freq][2*edge + dir]; dir 0 looks a->b, dir 1 looks b->a.
  std::vector<std::vector<cdouble>> dir_adm_;
  std::vector<std::vector<EdgeAbcd>> abcd_;
  std::vector<std::vector<cdouble>> node_total_;  // load + all directed edges
};

ChannelResponse tl_transfer(const Topology& topo, std::size_t tx, std::size_t rx,
                            const FrequencyGrid& grid);
LineState input_admittance(const Topology& topo, std::size_t node,
                           const FrequencyGrid& grid, double z0 = 50.0);

// Random deployment: nodes uniform in a square, connected by the Euclidean
// minimum spanning tree. A positive avg_edge_len rescales the layout so the
// mean edge length hits the target exactly.
Topology topo_random(std::size_t n_nodes, double area_side, double avg_edge_len,
                     std::uint64_t seed, const Load& default_load = Load::impedance(2000.0));

struct MultipathPath {
  double gain = 0.0;
  double length = 0.0;  // metres
};

struct MultipathParams {
  std::vector<MultipathPath> paths;
  double a0 = 0.0;  // 1/m
  double a1 = 0.0;  // 1/(m*Hz^k)
  double k = 1.0;
  double v = 2e8;  // m/s
};

// H(f) = sum_i g_i * exp(-(a0 + a1*f^k)*d_i) * exp(-j*2*pi*f*d_i/v)
ChannelResponse topdown_channel(const MultipathParams& params,
                                const FrequencyGrid& grid);

struct MultipathConfig {
  std::size_t min_paths = 3, max_paths = 6;
  double a0 = 5e-3;             // 1/m
  double a1 = 1.25e-10;         // 1/(m*Hz)
  double k = 1.0;
  double v = 2e8;               // m/s
  double first_len_mean = 400.0;   // metres, truncated normal
  double first_len_std = 55.0;
  double first_len_min = 235.0, first_len_max = 565.0;
  double extra_len_min = 10.0, extra_len_max = 200.0;
  double first_gain_min = 0.35, first_gain_max = 0.8;
  double gain_decay_min = 0.1, gain_decay_max = 0.25;
  double db_floor = -90.0, db_ceil = -10.0;  // accepted |H| range over the band
  double band_lo = 2e6, band_hi = 86e6;
  std::size_t check_bins = 256;
  std::size_t max_rejects = 1000;
};

// Rejection-samples parameter sets until the magnitude response stays inside
// [db_floor, db_ceil] over the whole check band.
MultipathParams random_multipath(std::uint64_t seed, const MultipathConfig& cfg);

// Shannon capacity over the grid: sum of delta_f * log2(1 + |H|^2 * Ptx/Pn).
double capacity(const ChannelResponse& h, const std::vector<double>& noise_psd,
                const std::vector<double>& tx_psd);

// Water-filling power allocation: p_i = max(0, mu - N_i/g_i^2) with mu chosen
// by bisection so sum(p_i)*delta_f = total_power within 1e-9 relative.
std::vector<double> waterfill(const std::vector<double>& channel_gains,
                              const std::vector<double>& noise_psd,
                              double total_power, double delta_f);

struct LoadChange {
  std::size_t node = 0;
  Load new_load;
};

struct ConcentratedFault {
  std::size_t edge = 0;
  double position = 0.0;  // metres from edge endpoint a
  Load shunt;
};

struct DistributedFault {
  std::size_t edge = 0;
  double start = 0.0;   // metres from edge endpoint a
  double length = 0.0;  // metres
  double factor = 1.0;  // scales r0 and g0 (and l, c when scale_lc)
  bool scale_lc = false;
};

using Anomaly = std::variant<LoadChange, ConcentratedFault, DistributedFault>;

// Returns a modified copy; faults split the affected edge and append the new
// junction nodes at the end of the node list.
Topology perturb(const Topology& topo, const Anomaly& anomaly);

// JSON-compatible structured text round-trip for topologies.
std::string topo_to_json(const Topology& topo);
Topology topo_from_json(const std::string& text);
void save_topology(const Topology& topo, const std::string& path);
Topology load_topology(const std::string& path);

// CSV columns: freq_hz, re, im, mag_db.
void write_channel_csv(const ChannelResponse& h, const std::string& path);

}  // namespace plcml
