#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plcml/autoencoder.hpp"
#include "plcml/diagnostics.hpp"
#include "plcml/gan.hpp"
#include "plcml/medium.hpp"
#include "plcml/routing.hpp"

namespace plcml {

// Every run draws all randomness from this one seed through labeled stream
// splits, so adding an experiment never perturbs the others.
struct GlobalConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "plcml-out";
  int threads = 1;
};

struct ChannelGenConfig {
  std::size_t n = 200;  // corpus rows
  MultipathConfig multipath;
};

// Three planted noise compositions (broadband background, narrowband
// interferers, impulsive bursts) rendered as a two-channel recording,
// featurized per slot and clustered with a self-organizing map.
struct NoiseClusterConfig {
  std::size_t slots_per_class = 60;
  std::size_t slot_len = 2048;
  double sample_rate = 200e3;  // Hz
  std::size_t som_epochs = 40;
  std::size_t burg_order = 16;
  std::size_t apen_m = 2;
  double apen_r_factor = 0.2;
};

struct GanCliConfig {
  std::size_t corpus_n = 1000;
  std::size_t eval_samples = 500;
  GanConfig gan;  // seed is overwritten from the global seed
};

struct AeSerCliConfig {
  AeConfig ae;  // channel/seed are filled in by the runner
  std::vector<double> ebn0_db = {0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0};
  std::size_t trials = 10000;
  // Squeeze symbols through a random multipath draw instead of plain AWGN.
  bool multipath_channel = false;
};

struct RouteCliConfig {
  std::size_t train_topologies = 60;
  std::size_t node_lo = 100, node_hi = 175;
  std::size_t test_topologies = 20;
  std::size_t oor_topologies = 10;  // per out-of-range bucket
  std::size_t oor_small_lo = 40, oor_small_hi = 80;
  std::size_t oor_large_lo = 200, oor_large_hi = 280;
  RouteGenConfig gen;
  RouteTrainConfig train;  // seed is overwritten from the global seed
  std::size_t surface_density_bins = 6;
  std::size_t surface_distance_bins = 6;
};

struct DiagnoseCliConfig {
  DiagConfig diag;  // load_mode/seed are driven by the runner; both modes run
  DiagTrainConfig train;
  std::size_t n_seeds = 5;
};

struct ExperimentConfig {
  GlobalConfig global;
  ChannelGenConfig channel;
  NoiseClusterConfig noise_cluster;
  GanCliConfig gan;
  AeSerCliConfig ae_ser;
  RouteCliConfig route;
  DiagnoseCliConfig diagnose;
};

// Merges a JSON document onto the defaults. Unknown keys and type mismatches
// are appended to `errors` as "path: message", exhaustively, never first-only.
void merge_config_json(ExperimentConfig& cfg, const std::string& json_text,
                       std::vector<std::string>& errors);

// Reads and merges a config file; a missing or unreadable file is an error.
void merge_config_file(ExperimentConfig& cfg, const std::string& path,
                       std::vector<std::string>& errors);

// Applies one "dotted.path=value" override; value is parsed as JSON when
// possible, otherwise taken as a string literal.
void apply_override(ExperimentConfig& cfg, const std::string& assignment,
                    std::vector<std::string>& errors);

// Range/consistency violations with their key paths, exhaustively.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

// Fully-resolved document (defaults applied), keys sorted; parsing it back
// reproduces the same configuration.
std::string resolved_config_json(const ExperimentConfig& cfg);

// FNV-1a over the resolved document, as fixed-width hex.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace plcml
