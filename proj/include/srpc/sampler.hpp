#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srpc/data.hpp"
#include "srpc/distributions.hpp"

namespace srpc {

enum class ModelKind { SupervisedRpc, SupervisedLca };

std::string to_string(ModelKind kind);
ModelKind model_from_string(const std::string& s);

// One MCMC state. Indices are 0-based. Level-indexed tables are flattened
// through LevelLayout: theta0[h * D + offset[j] + r] and
// theta1[(s * Ks + l) * D + offset[j] + r]. The supervised latent class model
// leaves L, G, lambda, theta1, nu and beta empty (every variable global).
struct ChainState {
  std::vector<int> C;
  std::vector<int> L;
  std::vector<std::uint8_t> G;
  std::vector<double> pi;
  std::vector<double> lambda;
  std::vector<double> theta0;
  std::vector<double> theta1;
  std::vector<double> nu;
  std::vector<double> beta;
  std::vector<double> xi;
  std::vector<double> Z;

  bool all_global() const { return G.empty(); }
};

// Everything fixed for the lifetime of a chain.
struct ChainContext {
  const Dataset* ds = nullptr;
  ModelKind kind = ModelKind::SupervisedRpc;
  Hyperparameters hyper;  // resolved
  LevelLayout levels;
  DesignLayout design;
  std::vector<double> mu0;
  std::vector<double> sigma0;  // diagonal of the prior covariance
  bool force_global = false;
  std::vector<double> fixed_xi;

  int K0() const { return hyper.K0; }
  int Ks() const { return hyper.Ks; }
  int local_k(int s) const { return hyper.local_clusters(s); }
  bool probit_fixed() const { return !fixed_xi.empty(); }
};

// Independent generator per Gibbs block. Both models draw each shared block
// (pi, theta0, C, xi, Z) from the same stream, so a latent class chain and an
// RPC chain with every variable global consume identical random numbers.
struct ChainStreams {
  explicit ChainStreams(std::uint64_t seed);
  Rng prior, pi, lambda, theta0, theta1, nu, beta, allocation, global, local, xi, latent;
};

ChainContext make_context(const Dataset& ds, ModelKind kind, const Hyperparameters& hyper,
                          const ChainConfig& config, Rng& prior_rng);

// Starting state: allocations are spread uniformly (C over all K0 clusters, L
// over each subpopulation's local clusters, G from Bernoulli(nu) with nu
// starting at 1/2); weights and multinomial tables are then drawn from their full
// conditionals given those allocations; xi from its prior; Z = +-0.5.
ChainState init_chain(const ChainContext& ctx, ChainStreams& rng);

// Gibbs blocks, in sweep order.
void update_allocation(ChainState& st, const ChainContext& ctx, Rng& rng);          // step 1
void update_global_clusters(ChainState& st, const ChainContext& ctx, Rng& rng);     // step 2
void update_local_clusters(ChainState& st, const ChainContext& ctx, Rng& rng);      // step 3
void update_global_weights(ChainState& st, const ChainContext& ctx, Rng& rng);      // step 4
void update_local_weights(ChainState& st, const ChainContext& ctx, Rng& rng);       // step 5
void update_global_theta(ChainState& st, const ChainContext& ctx, Rng& rng);        // step 6
void update_local_theta(ChainState& st, const ChainContext& ctx, Rng& rng);         // step 6
void update_nu(ChainState& st, const ChainContext& ctx, Rng& rng);                  // step 7
void update_beta(ChainState& st, const ChainContext& ctx, Rng& rng);                // step 8
void update_coefficients(ChainState& st, const ChainContext& ctx, Rng& rng);        // step 9
void update_latent_response(ChainState& st, const ChainContext& ctx, Rng& rng);     // step 10

// One full sweep of the blocks above. While `warming`, every variable is
// routed to the global model and nu, beta stay put.
void gibbs_sweep(ChainState& st, const ChainContext& ctx, ChainStreams& rng, bool warming = false);

// Conditional laws behind the blocks, exposed for testing.
double allocation_probability(const ChainState& st, const ChainContext& ctx, int i, int j);
// Unnormalised log Pr(C_i = h | rest) for h = 0..K0-1.
void global_cluster_log_weights(const ChainState& st, const ChainContext& ctx, int i,
                                std::span<double> out);
// Unnormalised Pr(L_ij = h | rest) for the local clusters of subject i's subpopulation.
void local_cluster_weights(const ChainState& st, const ChainContext& ctx, int i, int j,
                           std::span<double> out);

// Violations of the ChainState invariants; empty when the state is valid.
std::vector<std::string> check_state(const ChainState& st, const ChainContext& ctx, double tol = 1e-10);

// Retained draws of one chain. Blocks are stored draw-major: block[t * width + k].
struct ChainOutput {
  ModelKind kind = ModelKind::SupervisedRpc;
  int n = 0, p = 0, S = 0, q = 0;
  int K0 = 0, Ks = 0;
  std::vector<int> local_k;
  std::vector<int> levels;
  Coding coding = Coding::CellMeans;
  std::vector<std::string> xi_labels;
  Hyperparameters hyper;
  ChainConfig config;
  std::vector<double> mu0, sigma0;

  long draws = 0;
  std::vector<int> C;
  std::vector<double> pi, lambda, theta0, theta1, nu, beta, xi;
  // Posterior mean of G per cell over retained draws (RPC only).
  std::vector<double> G_mean;
  // Present only with ChainConfig::keep_latent.
  std::vector<double> Z;
  std::vector<std::uint8_t> G;
  std::vector<int> L;

  // Per iteration (all n_iter): log-likelihood conditional on the sampled
  // allocations, and the probit term alone.
  std::vector<double> loglik_conditional;
  std::vector<double> loglik_probit;
  // Per retained draw: likelihood with the global clusters summed out.
  std::vector<double> loglik_mixture;

  int theta_width() const;  // K0 * D
  int theta1_width() const;  // S * Ks * D
  int xi_width() const { return static_cast<int>(xi_labels.size()); }
  std::span<const int> C_draw(long t) const { return {C.data() + t * n, static_cast<std::size_t>(n)}; }
  // Draws of the post burn-in iterations used for likelihood averages.
  std::vector<double> retained_conditional_loglik() const;
  // Concatenate draws of chains that share dimensions.
  static ChainOutput concatenate(const std::vector<ChainOutput>& chains);
};

using ProgressFn = std::function<void(long iteration, double loglik)>;

ChainOutput run_chain(const Dataset& ds, const Hyperparameters& hyper, const ChainConfig& config,
                      const ProgressFn& progress = {});
ChainOutput run_lca_chain(const Dataset& ds, const Hyperparameters& hyper, const ChainConfig& config,
                          const ProgressFn& progress = {});
ChainOutput run_model(ModelKind kind, const Dataset& ds, const Hyperparameters& hyper,
                      const ChainConfig& config, const ProgressFn& progress = {});

// Stand-alone probit regression by latent-variable Gibbs sampling (steps 9-10
// on a fixed design). Returns draws row-major (iterations x columns).
struct ProbitDraws {
  Eigen::MatrixXd xi;
};
ProbitDraws run_probit_gibbs(const Eigen::MatrixXd& W, std::span<const int> y, std::span<const double> mu0,
                             std::span<const double> sigma0, long n_iter, Rng& rng);

}  // namespace srpc
