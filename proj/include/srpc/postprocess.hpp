#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srpc/data.hpp"
#include "srpc/sampler.hpp"

namespace srpc {

// Pairwise coassignment probabilities, stored densely (row-major).
struct SimilarityMatrix {
  int n = 0;
  std::vector<float> values;

  float operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
};

// `C` holds `draws` rows of `n` cluster labels (draw-major, as in ChainOutput).
SimilarityMatrix similarity_matrix(std::span<const int> C, long draws, int n);
// Restricted to the listed subjects, in that order.
SimilarityMatrix similarity_matrix(std::span<const int> C, long draws, int n, std::span<const int> subjects);

// Merge i joins clusters a and b (ids < n are leaves, n + k is the cluster
// formed by merge k) at `height`. Merges are sorted by height.
struct Merge {
  int a = 0;
  int b = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  int n = 0;
  std::vector<Merge> merges;
};

// Complete linkage on dissimilarity 1 - similarity.
Dendrogram complete_linkage(const SimilarityMatrix& sim);
// Complete linkage on a condensed upper-triangle dissimilarity vector.
Dendrogram complete_linkage(int n, std::vector<float> condensed);

enum class CutRule { LargestGap, FixedK, Height };

struct CutSpec {
  CutRule rule = CutRule::LargestGap;
  int k = 0;
  double height = 0.0;
};

CutSpec cut_from_string(const std::string& s);
std::string to_string(const CutSpec& cut);

struct CutResult {
  int K = 0;
  std::vector<int> assignment;  // 0-based, cluster 0 the largest
  std::vector<std::string> warnings;
};

CutResult select_num_clusters(const Dendrogram& dend, const CutSpec& cut);
// Flat clustering with exactly K groups (K clamped to [1, n]), labelled by
// decreasing size.
std::vector<int> cut_tree(const Dendrogram& dend, int K);

// Solves max sum_k weight[k][perm[k]] over injective maps of rows into
// columns (rows <= cols). Returns the column assigned to each row.
std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight);

// Similarity, dendrogram and hard assignment for a chain. Above
// `max_subjects` subjects the matrix is built on a uniform subsample and the
// rest join the cluster whose medoid they are most often coassigned with.
struct ClusteringOptions {
  CutSpec cut;
  int max_subjects = 5000;
  std::uint64_t seed = 1;
};

struct ClusteringResult {
  SimilarityMatrix similarity;
  std::vector<int> subjects;  // rows of `similarity` (all subjects unless subsampled)
  Dendrogram dendrogram;
  int K = 0;
  std::vector<int> assignment;
  std::vector<std::string> warnings;
};

ClusteringResult cluster_chain(const ChainOutput& chain, const ClusteringOptions& options);

// Summaries of one flattened parameter block.
struct ParamSummary {
  std::vector<double> mean, median, lower, upper;  // lower/upper: 2.5% and 97.5%
};

// Summarise the columns of a draw-major block; NaN entries are skipped.
ParamSummary summarize_columns(std::span<const double> draws, long rows, int width);

struct ModalEntry {
  int cluster = 0;   // 0-based
  int variable = 0;  // 0-based
  int level = 0;     // 1-based
  double probability = 0.0;
};

struct ModalPattern {
  std::vector<ModalEntry> entries;  // cluster-major
  std::vector<std::string> warnings;
};

// theta: K rows laid out as in ChainState::theta0. Each (cluster, variable)
// row is normalised before taking the argmax; ties go to the lowest level.
ModalPattern modal_pattern(std::span<const double> theta, int K, const std::vector<int>& levels);

struct PosteriorSummary {
  ModelKind kind = ModelKind::SupervisedRpc;
  int n = 0, p = 0, S = 0, q = 0;
  int K = 0;   // reference clusters
  int Ks = 0;
  std::vector<int> levels;
  Coding coding = Coding::CellMeans;
  std::vector<std::string> xi_labels;
  std::vector<int> assignment;
  std::vector<int> cluster_sizes;
  long draws = 0;

  ParamSummary pi;      // K
  ParamSummary theta0;  // K * D
  ParamSummary xi;      // design columns for K clusters
  ParamSummary nu;      // S * p
  ParamSummary beta;    // S
  ParamSummary lambda;  // S * Ks
  ParamSummary theta1;  // S * Ks * D
  ParamSummary local_marginal;  // S * D: sum_l lambda_l theta1, label free
  std::vector<double> prob_positive;  // Pr(xi > 0)
  std::vector<double> G_mean;  // n * p
  ModalPattern modal;
  long surplus_draws = 0;  // draws that mapped extra clusters onto a reference
  std::vector<std::string> warnings;
};

// Permute each draw's global labels to best overlap `assignment`, then
// summarise every block. Local labels are aligned per subpopulation to a
// reference draw by L1 distance between theta1 tables.
PosteriorSummary relabel_and_summarize(const ChainOutput& chain, std::span<const int> assignment, int K);

// Relabelled cluster-level draws, exposed for tests: pi (draws x K), theta0
// (draws x K*D) and xi (draws x columns); NaN where a reference cluster was
// empty in that draw.
struct RelabelledDraws {
  std::vector<double> pi, theta0, xi;
  long surplus_draws = 0;
};
RelabelledDraws relabel_global(const ChainOutput& chain, std::span<const int> assignment, int K);

// Convert cell-means cluster effects to the reference coding (and back) for a
// single coefficient vector. Reference cluster is cluster 0.
std::vector<double> cell_to_reference(std::span<const double> xi, int S, int K, int q);
std::vector<double> reference_to_cell(std::span<const double> xi, int S, int K, int q);

}  // namespace srpc
