#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace srpc {

// Seedable generator. Identical seed and call sequence give identical draws;
// the state is owned by exactly one chain (or one Gibbs block of a chain).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x5eed);
  // Independent stream derived from (seed, stream id) through std::seed_seq.
  Rng(std::uint64_t seed, std::uint64_t stream);

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  double normal();
  // Gamma(shape, 1).
  double gamma(double shape);
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::gamma_distribution<double> gamma_;
};

// Derive a child seed, e.g. one per replicate or permutation.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

std::vector<double> sample_dirichlet(std::span<const double> conc, Rng& rng);
// Writes the draw into `out` (same length as conc).
void sample_dirichlet_into(std::span<const double> conc, std::span<double> out, Rng& rng);

// Index k with probability w_k / sum(w). Weights need not be normalised.
std::size_t sample_categorical(std::span<const double> weights, Rng& rng);

// Unit-variance normal centred at `mean`, truncated to (0, inf) when
// positive_side, otherwise to (-inf, 0].
double sample_truncated_normal(double mean, bool positive_side, Rng& rng);

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

// Draw from N(Q^{-1} b, Q^{-1}) given precision Q and linear term b; returns the
// mean through `mean_out` when non-null.
Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b,
                                     Rng& rng, Eigen::VectorXd* mean_out = nullptr);

double sample_beta(double a, double b, Rng& rng);
// Rate parameterisation: mean shape / rate.
double sample_gamma(double shape, double rate, Rng& rng);
// Inverse-Gamma with shape a and scale b (mean b / (a - 1)).
double sample_inverse_gamma(double shape, double scale, Rng& rng);

double std_normal_cdf(double z);
// log Phi(z), accurate in the lower tail.
double log_std_normal_cdf(double z);
double std_normal_pdf(double z);
double std_normal_quantile(double p);

}  // namespace srpc
