#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace srpc {

// Observed data. Codes are stored 0-based internally; files use 1-based codes.
struct Dataset {
  int n = 0;
  int p = 0;
  int S = 0;
  int q = 0;
  std::vector<int> x;       // n * p, row-major, level index in [0, d[j])
  std::vector<int> subpop;  // n, in [0, S)
  std::vector<int> y;       // n, 0 or 1
  std::vector<double> w;    // n * q demographic covariates
  std::vector<int> d;       // p, levels per variable
  std::vector<std::string> ids;
  std::vector<std::string> exposure_names;
  std::vector<std::string> demographic_names;
  // Original file code of each level, per variable.
  std::vector<std::vector<long>> level_codes;

  int at(int i, int j) const { return x[static_cast<std::size_t>(i) * p + j]; }
  double dem(int i, int k) const { return w[static_cast<std::size_t>(i) * q + k]; }
  std::vector<int> subpop_sizes() const;

  // Raises InputError subclasses when any invariant is violated.
  void validate() const;

  bool operator==(const Dataset& other) const;
};

// Flattened (variable, level) index: offset[j] + r, total = sum of d.
struct LevelLayout {
  std::vector<int> d;
  std::vector<int> offset;
  int total = 0;
  int max_levels = 0;

  LevelLayout() = default;
  explicit LevelLayout(const std::vector<int>& levels);
  int index(int j, int r) const { return offset[j] + r; }
};

struct Schema {
  std::string id_column = "id";
  std::string subpop_column = "subpop";
  std::string outcome_column = "y";
  std::string exposure_prefix = "x";
  std::string demographic_prefix = "w";
  // Explicit column lists override the prefixes when non-empty.
  std::vector<std::string> exposure_columns;
  std::vector<std::string> demographic_columns;
  // Declared level counts; inferred from the data when empty.
  std::vector<int> levels;
};

struct LoadOptions {
  // z-score demographic columns that are not binary 0/1.
  bool normalize_demographics = true;
};

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema = {},
                     const LoadOptions& options = {});
Dataset parse_dataset(const std::string& text, const Schema& schema = {},
                      const LoadOptions& options = {});
// Writes the CSV layout read by load_dataset, including a "# levels=" directive.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
std::string format_dataset(const Dataset& ds);

enum class Coding { CellMeans, ReferenceCell };

std::string to_string(Coding c);
Coding coding_from_string(const std::string& s);

// Column structure of the probit design. Both codings have S + K + q - 1
// columns.
//   cell-means:     [cluster 1..K | subpop 2..S | demographics]
//   reference-cell: [intercept | subpop 2..S | cluster 2..K | demographics]
struct DesignLayout {
  Coding coding = Coding::CellMeans;
  int S = 1;
  int K = 1;
  int q = 0;

  DesignLayout() = default;
  DesignLayout(Coding coding, int S, int K, int q) : coding(coding), S(S), K(K), q(q) {}

  int columns() const { return S + K + q - 1; }
  bool has_intercept() const { return coding == Coding::ReferenceCell; }
  // Column of cluster h (0-based), or -1 for the reference cluster.
  int cluster_column(int h) const;
  // Column of subpopulation s (0-based), or -1 for the reference subpopulation.
  int subpop_column(int s) const;
  int demographic_column(int k) const;
  std::vector<std::string> labels(const std::vector<std::string>& demographic_names = {}) const;

  // Linear predictor without the cluster block, and the cluster contribution.
  double base_predictor(const Dataset& ds, int i, std::span<const double> xi) const;
  double cluster_effect(int h, std::span<const double> xi) const {
    const int c = cluster_column(h);
    return c < 0 ? 0.0 : xi[c];
  }
};

struct DesignMatrix {
  Eigen::MatrixXd W;
  DesignLayout layout;
  std::vector<std::string> column_labels;
  std::vector<std::string> warnings;
};

// C holds 0-based cluster indices in [0, K).
DesignMatrix build_design_matrix(const Dataset& ds, std::span<const int> C, int K, Coding coding);
// Fills W in place (no allocation, no warnings); W must already be sized.
void fill_design_matrix(const Dataset& ds, std::span<const int> C, const DesignLayout& layout,
                        Eigen::MatrixXd& W);

// Fixed prior constants.
struct Hyperparameters {
  int K0 = 0;  // 0: choose the default cap from n
  int Ks = 0;  // 0: choose the default cap from the subpopulation sizes
  std::vector<int> local_k;  // optional per-subpopulation override
  std::optional<double> alpha0;  // default 1 / K0
  std::optional<double> alpha_s;  // default 1 / Ks
  double eta = 1.0;
  double a_beta = 1.0;
  double b_beta = 1.0;
  double a_sigma = 2.5;
  double b_sigma = 2.5;
  // When set, used instead of the one-off prior draw.
  std::vector<double> mu0;
  std::vector<double> sigma0;

  // Fill caps and concentrations from the data. Validates positivity.
  Hyperparameters resolved(const Dataset& ds) const;
  double global_concentration() const { return alpha0.value_or(1.0 / K0); }
  double local_concentration() const { return alpha_s.value_or(1.0 / Ks); }
  int local_clusters(int s) const { return local_k.empty() ? Ks : local_k[s]; }
  void validate() const;
};

int default_global_cap(int n);
int default_local_cap(const std::vector<int>& subpop_sizes);

struct ChainConfig {
  long n_iter = 20000;
  long burn_in = 5000;
  long thin = 1;
  std::uint64_t seed = 1;
  std::optional<int> fixed_K0;
  Coding coding = Coding::CellMeans;
  // Store Z, G and L for every retained draw.
  bool keep_latent = false;
  // Store pi, theta, lambda, nu, beta and xi draws. C, G_mean and the
  // likelihood traces are always kept.
  bool keep_parameters = true;
  // Pin nu to 1 so every variable is global.
  bool force_global = false;
  // Hold xi at this value and skip the probit blocks.
  std::vector<double> fixed_xi;
  // Number of opening sweeps run with nu pinned to 1 so the global
  // clustering forms before variables are released to the local model.
  long global_warmup = 0;
  long progress_every = 0;

  long retained() const { return (n_iter - burn_in) / thin; }
  void validate() const;
};

}  // namespace srpc
