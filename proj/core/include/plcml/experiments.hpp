#pragma once

#include <string>
#include <vector>

#include "plcml/config.hpp"

namespace plcml {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Paths are relative to the configured output directory; nothing is written
// anywhere else.
struct RunArtifacts {
  std::vector<std::string> files;
};

RunArtifacts run_channel_gen(const ExperimentConfig& cfg);
RunArtifacts run_noise_cluster(const ExperimentConfig& cfg);
RunArtifacts run_gan_train(const ExperimentConfig& cfg);
RunArtifacts run_ae_ser(const ExperimentConfig& cfg);
RunArtifacts run_route_sim(const ExperimentConfig& cfg);
RunArtifacts run_diagnose(const ExperimentConfig& cfg);

// manifest.json: subcommand, config hash, seed, threads, toolkit version,
// sorted artifact list. No timestamps, so reruns are byte-identical.
void write_manifest(const ExperimentConfig& cfg, const std::string& subcommand,
                    const RunArtifacts& artifacts);

}  // namespace plcml
