#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srpc/data.hpp"
#include "srpc/postprocess.hpp"
#include "srpc/sampler.hpp"

namespace srpc {

// Conditional: log-likelihood given the sampled global assignment C (and G).
// Mixture: global clusters summed out inside the log.
enum class LikelihoodForm { Conditional, Mixture };

std::string to_string(LikelihoodForm form);

// sum_i y log Phi(W_i xi) + (1 - y) log(1 - Phi(W_i xi)).
double probit_loglik(std::span<const double> xi, const Eigen::MatrixXd& W, std::span<const int> y);
// Probit term at the assigned clusters, without materialising W.
double assigned_probit_loglik(const ChainState& st, const ChainContext& ctx);

// RPC joint likelihood given G. Variables with G = 0 contribute their local
// mixture sum_l lambda_l theta1; the mixture form also sums the global
// clusters with the probit factor inside the sum.
double rpc_joint_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form);
// Latent class likelihood; the mixture form places the probit term outside
// the class sum.
double lca_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form);
double model_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form);

// DIC6 = 3 Dbar - 2 D(plug-in), with D = -2 log L.
double dic6(std::span<const double> loglik_trace, double plugin_loglik);

struct FitReport {
  LikelihoodForm form = LikelihoodForm::Conditional;
  double mean_deviance = 0.0;     // Dbar
  double plugin_deviance = 0.0;   // D at the posterior means
  double dic6 = 0.0;
  double mixture_mean_deviance = 0.0;
  double mixture_plugin_deviance = 0.0;
  double mixture_dic6 = 0.0;
};

// Plug-in state built from a summary: relabelled posterior means of the
// continuous parameters, the hard assignment, modal G, and local marginals.
struct PluginModel {
  ChainState state;
  ChainContext context;
};
enum class PluginEstimate { Mean, Median };
PluginModel make_plugin_model(const ChainOutput& chain, const PosteriorSummary& summary, const Dataset& ds,
                              PluginEstimate estimate = PluginEstimate::Mean);

FitReport make_fit_report(const ChainOutput& chain, const PosteriorSummary& summary, const Dataset& ds);

// Exact posterior of the global assignment for tiny problems. Every latent
// configuration (C, L, G) is enumerated; pi, lambda, theta and nu are
// integrated analytically and beta by quadrature. xi is held at `xi`.
struct ExactPosterior {
  Eigen::MatrixXd coassignment;  // n x n
  Eigen::MatrixXd marginals;     // n x K0, Pr(C_i = h)
  double log_evidence = 0.0;
  std::uint64_t configurations = 0;
};
ExactPosterior enumerate_posterior(const Dataset& ds, const Hyperparameters& hyper, std::span<const double> xi,
                                   ModelKind kind = ModelKind::SupervisedRpc, Coding coding = Coding::CellMeans,
                                   std::uint64_t limit = 10'000'000);

// Simulation metrics.
struct MetricInputs {
  std::vector<double> prob;   // Phi(W xi) per subject
  std::vector<double> nu;     // S x p (empty when not applicable)
  std::vector<int> assignment;  // 0-based cluster per subject
};
struct Metrics {
  double mse_outcome = 0.0;
  double mse_nu = 0.0;  // NaN when the fit has no nu
  double sensitivity = 0.0;
};
Metrics metrics_mse_sensitivity(const MetricInputs& truth, const MetricInputs& fit);
// Fraction of subjects on the diagonal after the maximal-overlap matching of
// fitted to true clusters.
double matched_agreement(std::span<const int> truth, std::span<const int> fit);

// Posterior predictive deviance check on random train/test splits.
struct PpcOptions {
  int permutations = 100;
  double train_fraction = 0.9;
  std::uint64_t seed = 1;
};
struct PpcReport {
  std::vector<double> train_deviance;  // mean per-subject deviance
  std::vector<double> test_deviance;
  std::vector<double> difference;      // test - train
  double min = 0.0, max = 0.0, mean = 0.0, sd = 0.0;
};
// `fit` runs the model on a training subset and returns its chain and summary.
using PpcFitFn = std::function<std::pair<ChainOutput, PosteriorSummary>(const Dataset& train, std::uint64_t seed)>;
PpcReport ppc_deviance(const Dataset& ds, const PpcFitFn& fit, const PpcOptions& options, int threads = 1);
// Mean per-subject deviance of `ds` under a plug-in model; subjects are
// assigned to the global cluster maximising their predictor likelihood and G
// is averaged out through nu.
double predictive_deviance(const PluginModel& model, const Dataset& ds);

Dataset subset_dataset(const Dataset& ds, std::span<const int> rows);

}  // namespace srpc
