#include "srpc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "srpc/diagnostics.hpp"
#include "srpc/errors.hpp"

namespace srpc {

std::string to_string(ModelKind kind) { return kind == ModelKind::SupervisedRpc ? "srpc" : "slca"; }

ModelKind model_from_string(const std::string& s) {
  if (s == "srpc" || s == "rpc") return ModelKind::SupervisedRpc;
  if (s == "slca" || s == "lca") return ModelKind::SupervisedLca;
  throw ConfigError("unknown model '" + s + "'");
}

ChainStreams::ChainStreams(std::uint64_t seed)
    : prior(seed, 1),
      pi(seed, 2),
      lambda(seed, 3),
      theta0(seed, 4),
      theta1(seed, 5),
      nu(seed, 6),
      beta(seed, 7),
      allocation(seed, 8),
      global(seed, 9),
      local(seed, 10),
      xi(seed, 11),
      latent(seed, 12) {}

ChainContext make_context(const Dataset& ds, ModelKind kind, const Hyperparameters& hyper,
                          const ChainConfig& config, Rng& prior_rng) {
  ds.validate();
  config.validate();
  Hyperparameters h = hyper;
  if (config.fixed_K0) h.K0 = *config.fixed_K0;
  if (kind == ModelKind::SupervisedLca) {
    h.Ks = 1;
    h.local_k.clear();
  }
  ChainContext ctx;
  ctx.ds = &ds;
  ctx.kind = kind;
  ctx.hyper = h.resolved(ds);
  ctx.levels = LevelLayout(ds.d);
  ctx.design = DesignLayout(config.coding, ds.S, ctx.hyper.K0, ds.q);
  ctx.force_global = config.force_global;
  const int P = ctx.design.columns();
  if (!config.fixed_xi.empty()) {
    if (static_cast<int>(config.fixed_xi.size()) != P) throw ShapeError("fixed xi has the wrong length");
    ctx.fixed_xi = config.fixed_xi;
  }
  if (!h.mu0.empty()) {
    if (static_cast<int>(h.mu0.size()) != P) throw ShapeError("mu0 has the wrong length");
    ctx.mu0 = h.mu0;
  } else {
    ctx.mu0.resize(P);
    for (auto& m : ctx.mu0) m = prior_rng.normal();
  }
  if (!h.sigma0.empty()) {
    if (static_cast<int>(h.sigma0.size()) != P) throw ShapeError("sigma0 has the wrong length");
    ctx.sigma0 = h.sigma0;
  } else {
    ctx.sigma0.resize(P);
    for (auto& v : ctx.sigma0) v = sample_inverse_gamma(ctx.hyper.a_sigma, ctx.hyper.b_sigma, prior_rng);
  }
  return ctx;
}

namespace {

constexpr double kNuCeiling = 1.0 - 1e-12;

std::size_t cell(const ChainContext& ctx, int i, int j) {
  return static_cast<std::size_t>(i) * ctx.ds->p + j;
}

double theta0_at(const ChainState& st, const ChainContext& ctx, int h, int j, int r) {
  return st.theta0[static_cast<std::size_t>(h) * ctx.levels.total + ctx.levels.index(j, r)];
}

double theta1_at(const ChainState& st, const ChainContext& ctx, int s, int l, int j, int r) {
  return st.theta1[(static_cast<std::size_t>(s) * ctx.Ks() + l) * ctx.levels.total + ctx.levels.index(j, r)];
}

bool is_global(const ChainState& st, const ChainContext& ctx, int i, int j) {
  return st.all_global() || st.G[cell(ctx, i, j)] != 0;
}

// log Phi(+-eta) for outcome y.
double log_probit(double eta, int y) { return log_std_normal_cdf(y ? eta : -eta); }

// Tables shared by every subject in one step-2 pass.
struct GlobalTables {
  std::vector<double> log_theta;  // (offset[j] + r) * K0 + h
  std::vector<double> log_pi;
  std::vector<double> probit;     // (s * K0 + h) * 2 + y, only when q == 0
  bool probit_by_subpop = false;
};

GlobalTables build_global_tables(const ChainState& st, const ChainContext& ctx) {
  const int K = ctx.K0();
  const int D = ctx.levels.total;
  GlobalTables t;
  t.log_theta.resize(static_cast<std::size_t>(D) * K);
  for (int h = 0; h < K; ++h)
    for (int c = 0; c < D; ++c)
      t.log_theta[static_cast<std::size_t>(c) * K + h] = std::log(st.theta0[static_cast<std::size_t>(h) * D + c]);
  t.log_pi.resize(K);
  for (int h = 0; h < K; ++h) t.log_pi[h] = std::log(st.pi[h]);
  if (ctx.ds->q == 0) {
    t.probit_by_subpop = true;
    const int S = ctx.ds->S;
    t.probit.resize(static_cast<std::size_t>(S) * K * 2);
    for (int s = 0; s < S; ++s) {
      // Any subject of subpopulation s has the same base predictor when q = 0.
      double base = ctx.design.has_intercept() ? st.xi[0] : 0.0;
      const int sc = ctx.design.subpop_column(s);
      if (sc >= 0) base += st.xi[sc];
      for (int h = 0; h < K; ++h) {
        const double eta = base + ctx.design.cluster_effect(h, st.xi);
        t.probit[(static_cast<std::size_t>(s) * K + h) * 2 + 0] = log_probit(eta, 0);
        t.probit[(static_cast<std::size_t>(s) * K + h) * 2 + 1] = log_probit(eta, 1);
      }
    }
  }
  return t;
}

void subject_global_log_weights(const ChainState& st, const ChainContext& ctx, const GlobalTables& t, int i,
                                std::span<double> acc) {
  const Dataset& ds = *ctx.ds;
  const int K = ctx.K0();
  const int yi = ds.y[i];
  if (t.probit_by_subpop) {
    const double* row = &t.probit[static_cast<std::size_t>(ds.subpop[i]) * K * 2];
    for (int h = 0; h < K; ++h) acc[h] = t.log_pi[h] + row[2 * h + yi];
  } else {
    const double base = ctx.design.base_predictor(ds, i, st.xi);
    for (int h = 0; h < K; ++h) acc[h] = t.log_pi[h] + log_probit(base + ctx.design.cluster_effect(h, st.xi), yi);
  }
  const int* xi_row = &ds.x[static_cast<std::size_t>(i) * ds.p];
  const std::uint8_t* g_row = st.all_global() ? nullptr : &st.G[static_cast<std::size_t>(i) * ds.p];
  for (int j = 0; j < ds.p; ++j) {
    if (g_row && !g_row[j]) continue;
    const double* lt = &t.log_theta[static_cast<std::size_t>(ctx.levels.offset[j] + xi_row[j]) * K];
    for (int h = 0; h < K; ++h) acc[h] += lt[h];
  }
}

int draw_from_log_weights(std::span<double> w, Rng& rng) {
  const double mx = *std::max_element(w.begin(), w.end());
  for (double& v : w) v = std::exp(v - mx);
  return static_cast<int>(sample_categorical(w, rng));
}

void fill_state_design(const ChainState& st, const ChainContext& ctx, Eigen::MatrixXd& W) {
  W.resize(ctx.ds->n, ctx.design.columns());
  fill_design_matrix(*ctx.ds, st.C, ctx.design, W);
}

Eigen::VectorXd draw_coefficients(const Eigen::MatrixXd& W, std::span<const double> Z, std::span<const double> mu0,
                                  std::span<const double> sigma0, Rng& rng) {
  const Eigen::Index P = W.cols();
  Eigen::Map<const Eigen::VectorXd> z(Z.data(), static_cast<Eigen::Index>(Z.size()));
  Eigen::MatrixXd precision(P, P);
  precision.noalias() = W.transpose() * W;
  Eigen::VectorXd b(P);
  b.noalias() = W.transpose() * z;
  for (Eigen::Index k = 0; k < P; ++k) {
    precision(k, k) += 1.0 / sigma0[k];
    b[k] += mu0[k] / sigma0[k];
  }
  return sample_mvn_canonical(precision, b, rng);
}

}  // namespace

double allocation_probability(const ChainState& st, const ChainContext& ctx, int i, int j) {
  if (ctx.force_global) return 1.0;
  const Dataset& ds = *ctx.ds;
  const int s = ds.subpop[i];
  const int r = ds.at(i, j);
  const double nu = st.nu[static_cast<std::size_t>(s) * ds.p + j];
  const double a = nu * theta0_at(st, ctx, st.C[i], j, r);
  const double b = (1.0 - nu) * theta1_at(st, ctx, s, st.L[cell(ctx, i, j)], j, r);
  return a / (a + b);
}

void update_allocation(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  for (int i = 0; i < ds.n; ++i)
    for (int j = 0; j < ds.p; ++j)
      st.G[cell(ctx, i, j)] = rng.uniform() < allocation_probability(st, ctx, i, j) ? 1 : 0;
}

void global_cluster_log_weights(const ChainState& st, const ChainContext& ctx, int i, std::span<double> out) {
  subject_global_log_weights(st, ctx, build_global_tables(st, ctx), i, out);
}

void update_global_clusters(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const GlobalTables t = build_global_tables(st, ctx);
  std::vector<double> w(ctx.K0());
  for (int i = 0; i < ctx.ds->n; ++i) {
    subject_global_log_weights(st, ctx, t, i, w);
    st.C[i] = draw_from_log_weights(w, rng);
  }
}

void local_cluster_weights(const ChainState& st, const ChainContext& ctx, int i, int j, std::span<double> out) {
  const Dataset& ds = *ctx.ds;
  const int s = ds.subpop[i];
  const int r = ds.at(i, j);
  const bool local = !is_global(st, ctx, i, j);
  for (int l = 0; l < ctx.local_k(s); ++l) {
    const double lam = st.lambda[static_cast<std::size_t>(s) * ctx.Ks() + l];
    out[l] = local ? lam * theta1_at(st, ctx, s, l, j, r) : lam;
  }
}

void update_local_clusters(ChainState& st, const ChainContext& ctx, Rng& rng) {
  // No product over variables here, so the weights are formed directly and
  // sampled by inverting cumulative tables per (subpopulation, variable, level).
  const Dataset& ds = *ctx.ds;
  const int D = ctx.levels.total;
  const int Ks = ctx.Ks();
  for (int s = 0; s < ds.S; ++s) {
    const int k = ctx.local_k(s);
    const double* lam = &st.lambda[static_cast<std::size_t>(s) * Ks];
    std::vector<double> prior_cdf(k);
    std::partial_sum(lam, lam + k, prior_cdf.begin());
    std::vector<double> cdf(static_cast<std::size_t>(D) * k);
    for (int c = 0; c < D; ++c) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) {
        acc += lam[l] * st.theta1[(static_cast<std::size_t>(s) * Ks + l) * D + c];
        cdf[static_cast<std::size_t>(c) * k + l] = acc;
      }
    }
    for (int i = 0; i < ds.n; ++i) {
      if (ds.subpop[i] != s) continue;
      for (int j = 0; j < ds.p; ++j) {
        const double* row = is_global(st, ctx, i, j)
                                ? prior_cdf.data()
                                : &cdf[static_cast<std::size_t>(ctx.levels.index(j, ds.at(i, j))) * k];
        const double u = rng.uniform() * row[k - 1];
        const auto pos = std::upper_bound(row, row + k, u) - row;
        st.L[cell(ctx, i, j)] = static_cast<int>(std::min<std::ptrdiff_t>(pos, k - 1));
      }
    }
  }
}

void update_global_weights(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const int K = ctx.K0();
  std::vector<double> conc(K, ctx.hyper.global_concentration());
  for (int c : st.C) conc[c] += 1.0;
  sample_dirichlet_into(conc, st.pi, rng);
}

void update_local_weights(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  const int Ks = ctx.Ks();
  std::vector<double> counts(static_cast<std::size_t>(ds.S) * Ks, 0.0);
  for (int i = 0; i < ds.n; ++i)
    for (int j = 0; j < ds.p; ++j) counts[static_cast<std::size_t>(ds.subpop[i]) * Ks + st.L[cell(ctx, i, j)]] += 1.0;
  for (int s = 0; s < ds.S; ++s) {
    const int k = ctx.local_k(s);
    std::vector<double> conc(k);
    for (int l = 0; l < k; ++l) conc[l] = ctx.hyper.local_concentration() + counts[static_cast<std::size_t>(s) * Ks + l];
    sample_dirichlet_into(conc, std::span<double>(st.lambda.data() + static_cast<std::size_t>(s) * Ks, k), rng);
  }
}

void update_global_theta(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  const int D = ctx.levels.total;
  std::vector<double> counts(static_cast<std::size_t>(ctx.K0()) * D, 0.0);
  for (int i = 0; i < ds.n; ++i)
    for (int j = 0; j < ds.p; ++j)
      if (is_global(st, ctx, i, j)) counts[static_cast<std::size_t>(st.C[i]) * D + ctx.levels.index(j, ds.at(i, j))] += 1.0;
  std::vector<double> conc(ctx.levels.max_levels);
  for (int h = 0; h < ctx.K0(); ++h) {
    for (int j = 0; j < ds.p; ++j) {
      const std::size_t base = static_cast<std::size_t>(h) * D + ctx.levels.offset[j];
      const int dj = ds.d[j];
      for (int r = 0; r < dj; ++r) conc[r] = ctx.hyper.eta + counts[base + r];
      sample_dirichlet_into(std::span<const double>(conc.data(), dj), std::span<double>(st.theta0.data() + base, dj), rng);
    }
  }
}

void update_local_theta(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  const int D = ctx.levels.total;
  const int Ks = ctx.Ks();
  std::vector<double> counts(static_cast<std::size_t>(ds.S) * Ks * D, 0.0);
  for (int i = 0; i < ds.n; ++i)
    for (int j = 0; j < ds.p; ++j)
      if (!is_global(st, ctx, i, j))
        counts[(static_cast<std::size_t>(ds.subpop[i]) * Ks + st.L[cell(ctx, i, j)]) * D + ctx.levels.index(j, ds.at(i, j))] += 1.0;
  std::vector<double> conc(ctx.levels.max_levels);
  for (int s = 0; s < ds.S; ++s) {
    for (int l = 0; l < ctx.local_k(s); ++l) {
      for (int j = 0; j < ds.p; ++j) {
        const std::size_t base = (static_cast<std::size_t>(s) * Ks + l) * D + ctx.levels.offset[j];
        const int dj = ds.d[j];
        for (int r = 0; r < dj; ++r) conc[r] = ctx.hyper.eta + counts[base + r];
        sample_dirichlet_into(std::span<const double>(conc.data(), dj), std::span<double>(st.theta1.data() + base, dj), rng);
      }
    }
  }
}

void update_nu(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  if (ctx.force_global) {
    std::fill(st.nu.begin(), st.nu.end(), 1.0);
    return;
  }
  std::vector<double> global_count(static_cast<std::size_t>(ds.S) * ds.p, 0.0);
  for (int i = 0; i < ds.n; ++i)
    for (int j = 0; j < ds.p; ++j) global_count[static_cast<std::size_t>(ds.subpop[i]) * ds.p + j] += st.G[cell(ctx, i, j)];
  const auto sizes = ds.subpop_sizes();
  for (int s = 0; s < ds.S; ++s) {
    for (int j = 0; j < ds.p; ++j) {
      const double g = global_count[static_cast<std::size_t>(s) * ds.p + j];
      const double v = sample_beta(1.0 + g, st.beta[s] + sizes[s] - g, rng);
      st.nu[static_cast<std::size_t>(s) * ds.p + j] =
          std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    }
  }
}

void update_beta(ChainState& st, const ChainContext& ctx, Rng& rng) {
  const Dataset& ds = *ctx.ds;
  for (int s = 0; s < ds.S; ++s) {
    double rate = ctx.hyper.b_beta;
    for (int j = 0; j < ds.p; ++j)
      rate -= std::log1p(-std::min(st.nu[static_cast<std::size_t>(s) * ds.p + j], kNuCeiling));
    st.beta[s] = sample_gamma(ctx.hyper.a_beta + ds.p, rate, rng);
  }
}

void update_coefficients(ChainState& st, const ChainContext& ctx, Rng& rng) {
  if (ctx.probit_fixed()) return;
  Eigen::MatrixXd W;
  fill_state_design(st, ctx, W);
  const Eigen::VectorXd draw = draw_coefficients(W, st.Z, ctx.mu0, ctx.sigma0, rng);
  std::copy(draw.data(), draw.data() + draw.size(), st.xi.begin());
}

void update_latent_response(ChainState& st, const ChainContext& ctx, Rng& rng) {
  if (ctx.probit_fixed()) return;
  const Dataset& ds = *ctx.ds;
  for (int i = 0; i < ds.n; ++i) {
    const double eta = ctx.design.base_predictor(ds, i, st.xi) + ctx.design.cluster_effect(st.C[i], st.xi);
    st.Z[i] = sample_truncated_normal(eta, ds.y[i] == 1, rng);
  }
}

ChainState init_chain(const ChainContext& ctx, ChainStreams& rng) {
  const Dataset& ds = *ctx.ds;
  const int K = ctx.K0();
  const int D = ctx.levels.total;
  const bool rpc = ctx.kind == ModelKind::SupervisedRpc;
  ChainState st;
  st.C.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) st.C[i] = std::min(static_cast<int>(rng.global.uniform() * K), K - 1);
  st.pi.assign(K, 1.0 / K);
  st.theta0.assign(static_cast<std::size_t>(K) * D, 0.0);
  if (rpc) {
    const int Ks = ctx.Ks();
    st.beta.resize(ds.S);
    for (int s = 0; s < ds.S; ++s) st.beta[s] = sample_gamma(ctx.hyper.a_beta, ctx.hyper.b_beta, rng.beta);
    st.nu.resize(static_cast<std::size_t>(ds.S) * ds.p);
    for (int s = 0; s < ds.S; ++s)
      for (int j = 0; j < ds.p; ++j)
        st.nu[static_cast<std::size_t>(s) * ds.p + j] = ctx.force_global ? 1.0 : 0.5;
    st.L.resize(static_cast<std::size_t>(ds.n) * ds.p);
    st.G.resize(static_cast<std::size_t>(ds.n) * ds.p);
    for (int i = 0; i < ds.n; ++i) {
      const int k = ctx.local_k(ds.subpop[i]);
      for (int j = 0; j < ds.p; ++j) {
        st.L[cell(ctx, i, j)] = std::min(static_cast<int>(rng.local.uniform() * k), k - 1);
        const double nu = st.nu[static_cast<std::size_t>(ds.subpop[i]) * ds.p + j];
        st.G[cell(ctx, i, j)] = ctx.force_global || rng.allocation.uniform() < nu ? 1 : 0;
      }
    }
    st.lambda.assign(static_cast<std::size_t>(ds.S) * Ks, 0.0);
    // Unused local slots (per-subpopulation caps below Ks) keep uniform rows.
    st.theta1.assign(static_cast<std::size_t>(ds.S) * Ks * D, 0.0);
    for (int s = 0; s < ds.S; ++s)
      for (int l = 0; l < Ks; ++l)
        for (int j = 0; j < ds.p; ++j)
          for (int r = 0; r < ds.d[j]; ++r)
            st.theta1[(static_cast<std::size_t>(s) * Ks + l) * D + ctx.levels.index(j, r)] = 1.0 / ds.d[j];
  }
  update_global_weights(st, ctx, rng.pi);
  if (rpc) update_local_weights(st, ctx, rng.lambda);
  update_global_theta(st, ctx, rng.theta0);
  if (rpc) update_local_theta(st, ctx, rng.theta1);

  const int P = ctx.design.columns();
  if (ctx.probit_fixed()) {
    st.xi = ctx.fixed_xi;
  } else {
    Eigen::VectorXd mean = Eigen::Map<const Eigen::VectorXd>(ctx.mu0.data(), P);
    Eigen::MatrixXd cov = Eigen::Map<const Eigen::VectorXd>(ctx.sigma0.data(), P).asDiagonal();
    const Eigen::VectorXd draw = sample_mvn(mean, cov, rng.xi);
    st.xi.assign(draw.data(), draw.data() + P);
  }
  st.Z.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) st.Z[i] = ds.y[i] == 1 ? 0.5 : -0.5;
  return st;
}

std::vector<std::string> check_state(const ChainState& st, const ChainContext& ctx, double tol) {
  const Dataset& ds = *ctx.ds;
  std::vector<std::string> bad;
  const int K = ctx.K0();
  const int D = ctx.levels.total;
  auto simplex = [&](const double* v, int len, const std::string& what) {
    double sum = 0.0;
    for (int k = 0; k < len; ++k) {
      if (!(v[k] >= 0.0) || !std::isfinite(v[k])) bad.push_back(what + " has a negative or non-finite entry");
      sum += v[k];
    }
    if (std::abs(sum - 1.0) > tol) bad.push_back(what + " sums to " + std::to_string(sum));
  };
  if (static_cast<int>(st.C.size()) != ds.n) bad.push_back("C has the wrong length");
  for (int c : st.C)
    if (c < 0 || c >= K) bad.push_back("C index out of range");
  simplex(st.pi.data(), K, "pi");
  for (int h = 0; h < K; ++h)
    for (int j = 0; j < ds.p; ++j)
      simplex(&st.theta0[static_cast<std::size_t>(h) * D + ctx.levels.offset[j]], ds.d[j], "theta0 row");
  if (!st.all_global()) {
    const int Ks = ctx.Ks();
    for (int s = 0; s < ds.S; ++s) {
      simplex(&st.lambda[static_cast<std::size_t>(s) * Ks], ctx.local_k(s), "lambda");
      for (int l = 0; l < Ks; ++l)
        for (int j = 0; j < ds.p; ++j)
          simplex(&st.theta1[(static_cast<std::size_t>(s) * Ks + l) * D + ctx.levels.offset[j]], ds.d[j], "theta1 row");
      if (!(st.beta[s] > 0.0) || !std::isfinite(st.beta[s])) bad.push_back("beta not positive");
    }
    for (int i = 0; i < ds.n; ++i)
      for (int j = 0; j < ds.p; ++j) {
        const int l = st.L[cell(ctx, i, j)];
        if (l < 0 || l >= ctx.local_k(ds.subpop[i])) bad.push_back("L index out of range");
        if (st.G[cell(ctx, i, j)] > 1) bad.push_back("G not binary");
      }
    for (double v : st.nu) {
      if (ctx.force_global) {
        if (v != 1.0) bad.push_back("nu not pinned to 1");
      } else if (!(v > 0.0 && v < 1.0)) {
        bad.push_back("nu outside (0, 1)");
      }
    }
  }
  for (int i = 0; i < ds.n; ++i) {
    const bool positive = st.Z[i] > 0.0;
    if (positive != (ds.y[i] == 1)) bad.push_back("Z sign disagrees with y at subject " + std::to_string(i));
  }
  for (double v : st.xi)
    if (!std::isfinite(v)) bad.push_back("xi not finite");
  return bad;
}

int ChainOutput::theta_width() const {
  int D = 0;
  for (int d : levels) D += d;
  return K0 * D;
}

int ChainOutput::theta1_width() const {
  int D = 0;
  for (int d : levels) D += d;
  return S * Ks * D;
}

ChainOutput ChainOutput::concatenate(const std::vector<ChainOutput>& chains) {
  if (chains.empty()) throw ShapeError("no chains to concatenate");
  ChainOutput out = chains.front();
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const ChainOutput& o = chains[c];
    if (o.n != out.n || o.K0 != out.K0 || o.Ks != out.Ks || o.kind != out.kind || o.xi_labels != out.xi_labels)
      throw ShapeError("chains differ in dimensions");
    auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(out.C, o.C);
    append(out.pi, o.pi);
    append(out.lambda, o.lambda);
    append(out.theta0, o.theta0);
    append(out.theta1, o.theta1);
    append(out.nu, o.nu);
    append(out.beta, o.beta);
    append(out.xi, o.xi);
    append(out.Z, o.Z);
    append(out.G, o.G);
    append(out.L, o.L);
    append(out.loglik_conditional, o.loglik_conditional);
    append(out.loglik_probit, o.loglik_probit);
    append(out.loglik_mixture, o.loglik_mixture);
    if (!out.G_mean.empty()) {
      const double a = static_cast<double>(out.draws), b = static_cast<double>(o.draws);
      for (std::size_t k = 0; k < out.G_mean.size(); ++k)
        out.G_mean[k] = (out.G_mean[k] * a + o.G_mean[k] * b) / (a + b);
    }
    out.draws += o.draws;
  }
  return out;
}

std::vector<double> ChainOutput::retained_conditional_loglik() const {
  // Iterations are stored per chain; retained ones follow burn-in at stride thin.
  std::vector<double> out;
  const long per_chain = config.n_iter;
  const long chains = per_chain > 0 ? static_cast<long>(loglik_conditional.size()) / per_chain : 0;
  for (long c = 0; c < chains; ++c)
    for (long t = config.burn_in + config.thin; t <= config.n_iter; t += config.thin)
      out.push_back(loglik_conditional[c * per_chain + t - 1]);
  return out;
}

void gibbs_sweep(ChainState& st, const ChainContext& ctx, ChainStreams& rng, bool warming) {
  if (ctx.kind == ModelKind::SupervisedRpc) {
    if (warming) {
      ChainContext warm = ctx;
      warm.force_global = true;
      update_allocation(st, warm, rng.allocation);
    } else {
      update_allocation(st, ctx, rng.allocation);
    }
    update_global_clusters(st, ctx, rng.global);
    update_local_clusters(st, ctx, rng.local);
    update_global_weights(st, ctx, rng.pi);
    update_local_weights(st, ctx, rng.lambda);
    update_global_theta(st, ctx, rng.theta0);
    update_local_theta(st, ctx, rng.theta1);
    if (!warming) {
      update_nu(st, ctx, rng.nu);
      update_beta(st, ctx, rng.beta);
    }
  } else {
    update_global_clusters(st, ctx, rng.global);
    update_global_weights(st, ctx, rng.pi);
    update_global_theta(st, ctx, rng.theta0);
  }
  update_coefficients(st, ctx, rng.xi);
  update_latent_response(st, ctx, rng.latent);
}

ChainOutput run_model(ModelKind kind, const Dataset& ds, const Hyperparameters& hyper, const ChainConfig& config,
                      const ProgressFn& progress) {
  ChainStreams rng(config.seed);
  const ChainContext ctx = make_context(ds, kind, hyper, config, rng.prior);
  const bool rpc = kind == ModelKind::SupervisedRpc;
  ChainState st = init_chain(ctx, rng);

  ChainOutput out;
  out.kind = kind;
  out.n = ds.n;
  out.p = ds.p;
  out.S = ds.S;
  out.q = ds.q;
  out.K0 = ctx.K0();
  out.Ks = rpc ? ctx.Ks() : 0;
  if (rpc)
    for (int s = 0; s < ds.S; ++s) out.local_k.push_back(ctx.local_k(s));
  out.levels = ds.d;
  out.coding = config.coding;
  out.xi_labels = ctx.design.labels(ds.demographic_names);
  out.hyper = ctx.hyper;
  out.config = config;
  out.mu0 = ctx.mu0;
  out.sigma0 = ctx.sigma0;
  const long retained = config.retained();
  out.C.reserve(static_cast<std::size_t>(retained) * ds.n);
  out.loglik_conditional.reserve(config.n_iter);
  out.loglik_probit.reserve(config.n_iter);
  if (rpc) out.G_mean.assign(static_cast<std::size_t>(ds.n) * ds.p, 0.0);

  for (long t = 1; t <= config.n_iter; ++t) {
    try {
      gibbs_sweep(st, ctx, rng, t <= config.global_warmup);
    } catch (const SamplerFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw SamplerFailure(t, e.what());
    }

    const double ll = model_loglik(st, ctx, LikelihoodForm::Conditional);
    out.loglik_conditional.push_back(ll);
    out.loglik_probit.push_back(assigned_probit_loglik(st, ctx));
    if (!std::isfinite(ll)) throw SamplerFailure(t, "non-finite log-likelihood");

    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
      append(out.C, st.C);
      if (config.keep_parameters) {
        append(out.pi, st.pi);
        append(out.theta0, st.theta0);
        append(out.xi, st.xi);
        if (rpc) {
          append(out.lambda, st.lambda);
          append(out.theta1, st.theta1);
          append(out.nu, st.nu);
          append(out.beta, st.beta);
        }
      }
      if (rpc)
        for (std::size_t k = 0; k < st.G.size(); ++k) out.G_mean[k] += st.G[k];
      if (config.keep_latent) {
        append(out.Z, st.Z);
        if (rpc) {
          append(out.G, st.G);
          append(out.L, st.L);
        }
      }
      out.loglik_mixture.push_back(model_loglik(st, ctx, LikelihoodForm::Mixture));
      ++out.draws;
    }
    if (progress && config.progress_every > 0 && t % config.progress_every == 0) progress(t, ll);
  }
  if (rpc && out.draws > 0)
    for (double& g : out.G_mean) g /= static_cast<double>(out.draws);
  return out;
}

ChainOutput run_chain(const Dataset& ds, const Hyperparameters& hyper, const ChainConfig& config,
                      const ProgressFn& progress) {
  return run_model(ModelKind::SupervisedRpc, ds, hyper, config, progress);
}

ChainOutput run_lca_chain(const Dataset& ds, const Hyperparameters& hyper, const ChainConfig& config,
                          const ProgressFn& progress) {
  return run_model(ModelKind::SupervisedLca, ds, hyper, config, progress);
}

ProbitDraws run_probit_gibbs(const Eigen::MatrixXd& W, std::span<const int> y, std::span<const double> mu0,
                             std::span<const double> sigma0, long n_iter, Rng& rng) {
  const Eigen::Index n = W.rows();
  const Eigen::Index P = W.cols();
  if (static_cast<Eigen::Index>(y.size()) != n || static_cast<Eigen::Index>(mu0.size()) != P ||
      static_cast<Eigen::Index>(sigma0.size()) != P)
    throw ShapeError("probit inputs have inconsistent shapes");
  std::vector<double> Z(n);
  for (Eigen::Index i = 0; i < n; ++i) Z[i] = y[i] == 1 ? 0.5 : -0.5;
  ProbitDraws out;
  out.xi.resize(n_iter, P);
  for (long t = 0; t < n_iter; ++t) {
    const Eigen::VectorXd xi = draw_coefficients(W, Z, mu0, sigma0, rng);
    out.xi.row(t) = xi.transpose();
    const Eigen::VectorXd eta = W * xi;
    for (Eigen::Index i = 0; i < n; ++i) Z[i] = sample_truncated_normal(eta[i], y[i] == 1, rng);
  }
  return out;
}

}  // namespace srpc
