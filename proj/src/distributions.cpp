#include "srpc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "srpc/errors.hpp"

namespace srpc {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

// Standard normal truncated to (a, inf).
double lower_truncated_std_normal(double a, Rng& rng) {
  if (a > 4.0) {
    // Exponential rejection with the optimal rate for this truncation point.
    const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double x = a - std::log(rng.uniform_open()) / rate;
      const double d = x - rate;
      if (std::log(rng.uniform_open()) <= -0.5 * d * d) return x;
    }
  }
  // Inverse CDF on the upper tail mass so that large a keeps precision.
  const double tail = 0.5 * std::erfc(a / std::numbers::sqrt2);
  for (;;) {
    const double x = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * rng.uniform_open() * tail);
    if (x > a && std::isfinite(x)) return x;
  }
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seeded_engine(seed, 0)) {}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(seeded_engine(seed, stream)) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
}

double Rng::normal() { return normal_(engine_); }

double Rng::gamma(double shape) {
  return gamma_(engine_, std::gamma_distribution<double>::param_type(shape, 1.0));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finaliser over the pair.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void sample_dirichlet_into(std::span<const double> conc, std::span<double> out, Rng& rng) {
  double total = 0.0;
  for (std::size_t k = 0; k < conc.size(); ++k) {
    if (!(conc[k] > 0.0) || !std::isfinite(conc[k]))
      throw BadConcentration("Dirichlet concentration must be positive and finite");
    // Tiny concentrations underflow to exactly zero.
    out[k] = std::max(rng.gamma(conc[k]), std::numeric_limits<double>::min());
    total += out[k];
  }
  for (std::size_t k = 0; k < conc.size(); ++k) out[k] /= total;
}

std::vector<double> sample_dirichlet(std::span<const double> conc, Rng& rng) {
  std::vector<double> out(conc.size());
  sample_dirichlet_into(conc, out, rng);
  return out;
}

std::size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateWeights("categorical weights must have a positive finite sum");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last_positive = k;
    if (u < acc) return k;
  }
  return last_positive;
}

double sample_truncated_normal(double mean, bool positive_side, Rng& rng) {
  if (positive_side) {
    for (;;) {
      const double z = mean + lower_truncated_std_normal(-mean, rng);
      if (z > 0.0) return z;
    }
  }
  const double w = -mean + lower_truncated_std_normal(mean, rng);
  return -std::max(w, 0.0);
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::Index k = mean.size();
  if (cov.rows() != k || cov.cols() != k) throw ShapeError("covariance shape mismatch");
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;

  // Semidefinite (or nearly so): LDLT with pivoting, then jitter.
  const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    if (ldlt.info() == Eigen::Success) {
      Eigen::VectorXd d = ldlt.vectorD();
      if (d.minCoeff() >= -1e-12 * scale) {
        Eigen::VectorXd scaled = d.cwiseMax(0.0).cwiseSqrt().cwiseProduct(z);
        Eigen::VectorXd lz = ldlt.matrixL() * scaled;
        return mean + (ldlt.transpositionsP().transpose() * lz);
      }
    }
    jitter = jitter == 0.0 ? 1e-10 * scale : jitter * 100.0;
  }
  throw NotPSD("covariance is not positive semidefinite");
}

Eigen::VectorXd sample_mvn_canonical(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b,
                                     Rng& rng, Eigen::VectorXd* mean_out) {
  const Eigen::Index k = b.size();
  double jitter = 0.0;
  const double scale = std::max(1.0, precision.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (jitter == 0.0) {
      llt.compute(precision);
    } else {
      Eigen::MatrixXd q = precision;
      q.diagonal().array() += jitter;
      llt.compute(q);
    }
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd mean = llt.solve(b);
      Eigen::VectorXd z(k);
      for (Eigen::Index i = 0; i < k; ++i) z[i] = rng.normal();
      // Q = L L^T, so L^{-T} z has covariance Q^{-1}.
      Eigen::VectorXd draw = mean + llt.matrixU().solve(z);
      if (mean_out) *mean_out = mean;
      return draw;
    }
    jitter = jitter == 0.0 ? 1e-10 * scale : jitter * 100.0;
  }
  throw NotPSD("posterior precision is not positive definite");
}

double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
    throw BadParameter("gamma shape and rate must be positive");
  return std::max(rng.gamma(shape), std::numeric_limits<double>::min()) / rate;
}

double sample_beta(double a, double b, Rng& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw BadParameter("beta parameters must be positive");
  const double x = sample_gamma(a, 1.0, rng);
  const double y = sample_gamma(b, 1.0, rng);
  return x / (x + y);
}

double sample_inverse_gamma(double shape, double scale, Rng& rng) {
  return 1.0 / sample_gamma(shape, scale, rng);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_std_normal_cdf(double z) {
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw BadParameter("quantile requires p in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace srpc
