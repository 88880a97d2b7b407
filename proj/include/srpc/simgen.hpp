#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srpc/data.hpp"
#include "srpc/distributions.hpp"

namespace srpc {

class Config;

struct SimConfig {
  int S = 4;
  int n_s = 1200;
  int p = 50;
  int d = 4;
  int K_global = 3;
  int K_local = 2;
  // Share of variables behaving locally in each subpopulation.
  double local_fraction = 0.2;
  // Probability of the modal level in every true profile.
  double modal_mass = 0.8;
  // Binary demographic covariates (coefficient 0.2 each).
  int q = 0;
  int replicates = 1;
  std::uint64_t seed = 1;
  // Optional user-supplied truth file replacing the default tables.
  std::optional<std::filesystem::path> truth_path;

  int n() const { return S * n_s; }
  void validate() const;
};

SimConfig sim_config_from(const Config& cfg);

// Ground-truth parameters. Tables use 0-based levels and the LevelLayout
// flattening with equal level counts d.
struct SimTruth {
  int S = 0, p = 0, d = 0, K_global = 0, K_local = 0, q = 0;
  std::vector<double> theta_global;  // K_global * p * d
  std::vector<double> theta_local;   // S * K_local * p * d
  std::vector<int> nu_flags;         // S * p; 1 global, 0 local
  std::vector<double> xi;            // cell-means coding over K_global clusters
  void validate() const;
};

SimTruth default_truth_tables(const SimConfig& cfg);

struct SimResult {
  Dataset data;
  SimTruth truth;
  std::vector<int> global_cluster;  // per subject, 0-based
  std::vector<int> local_profile;   // per subject, 0-based
  std::vector<double> prob;         // Phi(W xi_true)
};

SimResult generate(const SimConfig& cfg, const SimTruth& truth, Rng& rng);
SimResult generate(const SimConfig& cfg);

std::string truth_to_json(const SimResult& sim, const SimConfig& cfg);
void write_truth(const SimResult& sim, const SimConfig& cfg, const std::filesystem::path& path);

// Everything needed to score a fit: the tables plus per-subject truth.
struct TruthFile {
  SimTruth truth;
  std::vector<int> global_cluster;
  std::vector<double> prob;
};
TruthFile read_truth(const std::filesystem::path& path);
SimTruth truth_from_json_text(const std::string& text);

}  // namespace srpc
