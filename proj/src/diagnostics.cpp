#include "srpc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "srpc/errors.hpp"

namespace srpc {

std::string to_string(LikelihoodForm form) { return form == LikelihoodForm::Mixture ? "mixture" : "conditional"; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double log_probit(double eta, int y) { return log_std_normal_cdf(y ? eta : -eta); }

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

std::vector<double> log_table(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::log(x); });
  return out;
}

// log sum_l lambda_l theta1[s, l] per (s, level cell).
std::vector<double> log_local_marginal(const ChainState& st, const ChainContext& ctx) {
  const int S = ctx.ds->S, Ks = ctx.Ks(), D = ctx.levels.total;
  std::vector<double> out(static_cast<std::size_t>(S) * D, 0.0);
  for (int s = 0; s < S; ++s) {
    double* row = &out[static_cast<std::size_t>(s) * D];
    for (int l = 0; l < ctx.local_k(s); ++l) {
      const double lam = st.lambda[static_cast<std::size_t>(s) * Ks + l];
      const double* th = &st.theta1[(static_cast<std::size_t>(s) * Ks + l) * D];
      for (int c = 0; c < D; ++c) row[c] += lam * th[c];
    }
    for (int c = 0; c < D; ++c) row[c] = std::log(row[c]);
  }
  return out;
}

double subject_probit(const ChainState& st, const ChainContext& ctx, int i, int h) {
  const Dataset& ds = *ctx.ds;
  return log_probit(ctx.design.base_predictor(ds, i, st.xi) + ctx.design.cluster_effect(h, st.xi), ds.y[i]);
}

}  // namespace

double probit_loglik(std::span<const double> xi, const Eigen::MatrixXd& W, std::span<const int> y) {
  if (static_cast<Eigen::Index>(xi.size()) != W.cols() || static_cast<Eigen::Index>(y.size()) != W.rows())
    throw ShapeError("probit_loglik: inconsistent shapes");
  const Eigen::VectorXd eta = W * Eigen::Map<const Eigen::VectorXd>(xi.data(), W.cols());
  double ll = 0.0;
  for (Eigen::Index i = 0; i < W.rows(); ++i) ll += log_probit(eta[i], y[i]);
  return ll;
}

double assigned_probit_loglik(const ChainState& st, const ChainContext& ctx) {
  double ll = 0.0;
  for (int i = 0; i < ctx.ds->n; ++i) ll += subject_probit(st, ctx, i, st.C[i]);
  return ll;
}

double rpc_joint_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form) {
  const Dataset& ds = *ctx.ds;
  const int K = ctx.K0(), D = ctx.levels.total;
  const auto log_theta = log_table(st.theta0);
  const auto log_pi = log_table(st.pi);
  const auto log_phi = st.all_global() ? std::vector<double>{} : log_local_marginal(st, ctx);
  std::vector<double> acc(K);
  double total = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    const int s = ds.subpop[i];
    double local = 0.0;
    if (form == LikelihoodForm::Conditional) {
      const int h = st.C[i];
      double v = log_pi[h] + subject_probit(st, ctx, i, h);
      for (int j = 0; j < ds.p; ++j) {
        const int c = ctx.levels.index(j, ds.at(i, j));
        if (st.all_global() || st.G[static_cast<std::size_t>(i) * ds.p + j])
          v += log_theta[static_cast<std::size_t>(h) * D + c];
        else
          local += log_phi[static_cast<std::size_t>(s) * D + c];
      }
      total += v + local;
    } else {
      for (int h = 0; h < K; ++h) acc[h] = log_pi[h] + subject_probit(st, ctx, i, h);
      for (int j = 0; j < ds.p; ++j) {
        const int c = ctx.levels.index(j, ds.at(i, j));
        if (st.all_global() || st.G[static_cast<std::size_t>(i) * ds.p + j]) {
          for (int h = 0; h < K; ++h) acc[h] += log_theta[static_cast<std::size_t>(h) * D + c];
        } else {
          local += log_phi[static_cast<std::size_t>(s) * D + c];
        }
      }
      total += log_sum_exp(acc) + local;
    }
  }
  return total;
}

double lca_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form) {
  if (form == LikelihoodForm::Conditional) return rpc_joint_loglik(st, ctx, form);
  const Dataset& ds = *ctx.ds;
  const int K = ctx.K0(), D = ctx.levels.total;
  const auto log_theta = log_table(st.theta0);
  const auto log_pi = log_table(st.pi);
  std::vector<double> acc(K);
  double total = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    for (int h = 0; h < K; ++h) acc[h] = log_pi[h];
    for (int j = 0; j < ds.p; ++j) {
      const int c = ctx.levels.index(j, ds.at(i, j));
      for (int h = 0; h < K; ++h) acc[h] += log_theta[static_cast<std::size_t>(h) * D + c];
    }
    total += log_sum_exp(acc) + subject_probit(st, ctx, i, st.C[i]);
  }
  return total;
}

double model_loglik(const ChainState& st, const ChainContext& ctx, LikelihoodForm form) {
  return ctx.kind == ModelKind::SupervisedLca ? lca_loglik(st, ctx, form) : rpc_joint_loglik(st, ctx, form);
}

double dic6(std::span<const double> loglik_trace, double plugin_loglik) {
  if (loglik_trace.empty()) throw ShapeError("dic6 needs a nonempty trace");
  const double mean = std::accumulate(loglik_trace.begin(), loglik_trace.end(), 0.0) /
                      static_cast<double>(loglik_trace.size());
  return 3.0 * (-2.0 * mean) - 2.0 * (-2.0 * plugin_loglik);
}

PluginModel make_plugin_model(const ChainOutput& chain, const PosteriorSummary& summary, const Dataset& ds,
                              PluginEstimate estimate) {
  auto pick = [&](const ParamSummary& p) -> const std::vector<double>& {
    return estimate == PluginEstimate::Mean ? p.mean : p.median;
  };
  const int K = summary.K;
  PluginModel m;
  ChainContext& ctx = m.context;
  ctx.ds = &ds;
  ctx.kind = summary.kind;
  ctx.hyper = chain.hyper;
  ctx.hyper.K0 = K;
  ctx.hyper.Ks = 1;
  ctx.hyper.local_k.clear();
  ctx.levels = LevelLayout(summary.levels);
  ctx.design = DesignLayout(summary.coding, summary.S, K, summary.q);
  const int D = ctx.levels.total;
  ChainState& st = m.state;
  const bool same_data = ds.n == summary.n;
  st.C = same_data ? summary.assignment : std::vector<int>(ds.n, 0);

  st.pi = pick(summary.pi);
  for (double& v : st.pi)
    if (!(v > 0.0)) v = 1e-300;
  const double pi_sum = std::accumulate(st.pi.begin(), st.pi.end(), 0.0);
  for (double& v : st.pi) v /= pi_sum;

  auto normalise_rows = [&](std::vector<double>& table, int rows) {
    for (int h = 0; h < rows; ++h)
      for (int j = 0; j < summary.p; ++j) {
        double* row = &table[static_cast<std::size_t>(h) * D + ctx.levels.offset[j]];
        const int d = summary.levels[j];
        bool bad = false;
        double sum = 0.0;
        for (int r = 0; r < d; ++r) {
          bad = bad || !(row[r] > 0.0);
          sum += row[r];
        }
        for (int r = 0; r < d; ++r) row[r] = bad ? 1.0 / d : row[r] / sum;
      }
  };
  st.theta0 = pick(summary.theta0);
  normalise_rows(st.theta0, K);
  st.xi = pick(summary.xi);
  for (double& v : st.xi)
    if (std::isnan(v)) v = 0.0;

  if (summary.kind == ModelKind::SupervisedRpc) {
    st.lambda.assign(summary.S, 1.0);
    st.theta1 = pick(summary.local_marginal);
    normalise_rows(st.theta1, summary.S);
    st.L.assign(static_cast<std::size_t>(ds.n) * ds.p, 0);
    st.G.assign(static_cast<std::size_t>(ds.n) * ds.p, 1);
    if (same_data && summary.G_mean.size() == st.G.size())
      for (std::size_t k = 0; k < st.G.size(); ++k) st.G[k] = summary.G_mean[k] > 0.5 ? 1 : 0;
    st.nu = pick(summary.nu);
    st.beta = pick(summary.beta);
  }
  st.Z.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) st.Z[i] = ds.y[i] == 1 ? 0.5 : -0.5;
  return m;
}

FitReport make_fit_report(const ChainOutput& chain, const PosteriorSummary& summary, const Dataset& ds) {
  const PluginModel m = make_plugin_model(chain, summary, ds, PluginEstimate::Mean);
  FitReport r;
  r.form = LikelihoodForm::Conditional;
  const auto trace = chain.retained_conditional_loglik();
  if (trace.empty() || chain.loglik_mixture.empty()) throw ShapeError("chain has no retained likelihoods");
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  r.mean_deviance = -2.0 * mean(trace);
  r.plugin_deviance = -2.0 * model_loglik(m.state, m.context, LikelihoodForm::Conditional);
  r.dic6 = 3.0 * r.mean_deviance - 2.0 * r.plugin_deviance;
  r.mixture_mean_deviance = -2.0 * mean(chain.loglik_mixture);
  r.mixture_plugin_deviance = -2.0 * model_loglik(m.state, m.context, LikelihoodForm::Mixture);
  r.mixture_dic6 = 3.0 * r.mixture_mean_deviance - 2.0 * r.mixture_plugin_deviance;
  return r;
}

double predictive_deviance(const PluginModel& model, const Dataset& ds) {
  const ChainState& st = model.state;
  const ChainContext& ctx = model.context;
  const int K = ctx.K0();
  const LevelLayout& lv = ctx.levels;
  const int D = lv.total;
  const bool rpc = ctx.kind == ModelKind::SupervisedRpc;
  if (ds.p != static_cast<int>(lv.d.size()) || ds.q != ctx.design.q || ds.S != ctx.design.S)
    throw ShapeError("dataset does not match the fitted model");
  double total = 0.0;
  std::vector<double> score(K);
  for (int i = 0; i < ds.n; ++i) {
    const int s = ds.subpop[i];
    for (int h = 0; h < K; ++h) {
      double v = std::log(st.pi[h]);
      for (int j = 0; j < ds.p; ++j) {
        const int c = lv.index(j, ds.at(i, j));
        const double g = st.theta0[static_cast<std::size_t>(h) * D + c];
        if (rpc) {
          const double nu = st.nu[static_cast<std::size_t>(s) * ds.p + j];
          v += std::log(nu * g + (1.0 - nu) * st.theta1[static_cast<std::size_t>(s) * D + c]);
        } else {
          v += std::log(g);
        }
      }
      score[h] = v;
    }
    const int best = static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
    const double eta = ctx.design.base_predictor(ds, i, st.xi) + ctx.design.cluster_effect(best, st.xi);
    total += score[best] + log_probit(eta, ds.y[i]);
  }
  return -2.0 * total / static_cast<double>(ds.n);
}

Dataset subset_dataset(const Dataset& ds, std::span<const int> rows) {
  Dataset out;
  out.n = static_cast<int>(rows.size());
  out.p = ds.p;
  out.S = ds.S;
  out.q = ds.q;
  out.d = ds.d;
  out.exposure_names = ds.exposure_names;
  out.demographic_names = ds.demographic_names;
  out.level_codes = ds.level_codes;
  for (int i : rows) {
    out.x.insert(out.x.end(), ds.x.begin() + static_cast<std::ptrdiff_t>(i) * ds.p,
                 ds.x.begin() + static_cast<std::ptrdiff_t>(i + 1) * ds.p);
    out.w.insert(out.w.end(), ds.w.begin() + static_cast<std::ptrdiff_t>(i) * ds.q,
                 ds.w.begin() + static_cast<std::ptrdiff_t>(i + 1) * ds.q);
    out.subpop.push_back(ds.subpop[i]);
    out.y.push_back(ds.y[i]);
    if (!ds.ids.empty()) out.ids.push_back(ds.ids[i]);
  }
  return out;
}

PpcReport ppc_deviance(const Dataset& ds, const PpcFitFn& fit, const PpcOptions& options, int threads) {
  if (options.permutations < 2) throw InsufficientPermutations("PPC needs at least 2 permutations");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0))
    throw BadParameter("train fraction must lie in (0, 1)");
  const int R = options.permutations;
  const int n_train = static_cast<int>(std::lround(options.train_fraction * ds.n));
  if (n_train < 1 || n_train >= ds.n) throw BadParameter("split leaves an empty train or test set");
  PpcReport rep;
  rep.train_deviance.assign(R, kNaN);
  rep.test_deviance.assign(R, kNaN);
  std::vector<std::exception_ptr> errors(R);
  auto work = [&](int r) {
    try {
      Rng rng(options.seed, 0x99c0 + static_cast<std::uint64_t>(r));
      std::vector<int> order(ds.n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng.engine());
      std::vector<int> train(order.begin(), order.begin() + n_train), test(order.begin() + n_train, order.end());
      std::sort(train.begin(), train.end());
      std::sort(test.begin(), test.end());
      const Dataset tr = subset_dataset(ds, train);
      const Dataset te = subset_dataset(ds, test);
      auto [chain, summary] = fit(tr, derive_seed(options.seed, static_cast<std::uint64_t>(r)));
      const PluginModel m = make_plugin_model(chain, summary, tr, PluginEstimate::Median);
      rep.train_deviance[r] = predictive_deviance(m, tr);
      rep.test_deviance[r] = predictive_deviance(m, te);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const int workers = std::clamp(threads, 1, R);
  if (workers == 1) {
    for (int r = 0; r < R; ++r) work(r);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int r = w; r < R; r += workers) work(r);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  rep.difference.resize(R);
  for (int r = 0; r < R; ++r) rep.difference[r] = rep.test_deviance[r] - rep.train_deviance[r];
  rep.min = *std::min_element(rep.difference.begin(), rep.difference.end());
  rep.max = *std::max_element(rep.difference.begin(), rep.difference.end());
  rep.mean = std::accumulate(rep.difference.begin(), rep.difference.end(), 0.0) / R;
  double ss = 0.0;
  for (double v : rep.difference) ss += (v - rep.mean) * (v - rep.mean);
  rep.sd = std::sqrt(ss / (R - 1));
  return rep;
}

double matched_agreement(std::span<const int> truth, std::span<const int> fit) {
  if (truth.size() != fit.size()) throw ShapeError("assignments differ in length");
  if (truth.empty()) return 1.0;
  const int Kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const int Kf = *std::max_element(fit.begin(), fit.end()) + 1;
  const int side = std::max(Kt, Kf);
  std::vector<std::vector<double>> overlap(side, std::vector<double>(side, 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) overlap[truth[i]][fit[i]] += 1.0;
  const auto match = max_weight_matching(overlap);
  double agree = 0.0;
  for (int k = 0; k < side; ++k) agree += overlap[k][match[k]];
  return agree / static_cast<double>(truth.size());
}

Metrics metrics_mse_sensitivity(const MetricInputs& truth, const MetricInputs& fit) {
  if (truth.prob.size() != fit.prob.size()) throw ShapeError("outcome probability vectors differ in length");
  Metrics m;
  double ss = 0.0;
  for (std::size_t i = 0; i < truth.prob.size(); ++i) ss += (fit.prob[i] - truth.prob[i]) * (fit.prob[i] - truth.prob[i]);
  m.mse_outcome = truth.prob.empty() ? 0.0 : ss / static_cast<double>(truth.prob.size());
  if (truth.nu.empty() || fit.nu.empty()) {
    m.mse_nu = kNaN;
  } else {
    if (truth.nu.size() != fit.nu.size()) throw ShapeError("nu tables differ in size");
    double sn = 0.0;
    for (std::size_t k = 0; k < truth.nu.size(); ++k) sn += (fit.nu[k] - truth.nu[k]) * (fit.nu[k] - truth.nu[k]);
    m.mse_nu = sn / static_cast<double>(truth.nu.size());
  }
  m.sensitivity = matched_agreement(truth.assignment, fit.assignment);
  return m;
}

namespace {

struct LogGammaTable {
  // lgamma(a + k) - lgamma(a) for k = 0..max.
  std::vector<double> v;
  LogGammaTable(double a, int max) : v(max + 1) {
    for (int k = 0; k <= max; ++k) v[k] = std::lgamma(a + k) - std::lgamma(a);
  }
};

// log Dirichlet-multinomial marginal of counts under a symmetric Dir(a).
double dirmult(std::span<const int> counts, double a, const LogGammaTable& lg) {
  int total = 0;
  double v = 0.0;
  for (int c : counts) {
    total += c;
    v += lg.v[c];
  }
  const double K = static_cast<double>(counts.size());
  return v + std::lgamma(K * a) - std::lgamma(K * a + total);
}

}  // namespace

ExactPosterior enumerate_posterior(const Dataset& ds, const Hyperparameters& hyper_in, std::span<const double> xi,
                                   ModelKind kind, Coding coding, std::uint64_t limit) {
  ds.validate();
  Hyperparameters hyper = hyper_in;
  if (kind == ModelKind::SupervisedLca) {
    hyper.Ks = 1;
    hyper.local_k.clear();
  }
  hyper = hyper.resolved(ds);
  const bool rpc = kind == ModelKind::SupervisedRpc;
  const int n = ds.n, p = ds.p, K = hyper.K0;
  const DesignLayout design(coding, ds.S, K, ds.q);
  if (static_cast<int>(xi.size()) != design.columns()) throw ShapeError("xi has the wrong length");
  double count = std::pow(static_cast<double>(K), n);
  if (rpc) {
    for (int i = 0; i < n; ++i) count *= std::pow(static_cast<double>(hyper.local_clusters(ds.subpop[i])), p);
    count *= std::pow(2.0, static_cast<double>(n) * p);
  }
  if (count > static_cast<double>(limit)) throw TooLarge("latent configuration count exceeds the enumeration limit");

  const int cells = n * p;
  const LogGammaTable lg_pi(hyper.global_concentration(), n);
  const LogGammaTable lg_eta(hyper.eta, n * p);
  const LogGammaTable lg_lambda(hyper.local_concentration(), n * p);

  std::vector<double> probit(static_cast<std::size_t>(n) * K);
  for (int i = 0; i < n; ++i)
    for (int h = 0; h < K; ++h)
      probit[static_cast<std::size_t>(i) * K + h] =
          log_probit(design.base_predictor(ds, i, xi) + design.cluster_effect(h, xi), ds.y[i]);

  const auto sizes = ds.subpop_sizes();
  const std::uint64_t g_configs = rpc ? (std::uint64_t{1} << cells) : 1;
  auto is_global = [&](std::uint64_t g, int i, int j) {
    return !rpc || ((g >> (static_cast<std::uint64_t>(i) * p + j)) & 1u);
  };

  // G prior with nu and beta integrated out, per G configuration.
  std::vector<double> g_part(g_configs, 0.0), local_part(g_configs, 0.0);
  if (rpc) {
    std::map<std::pair<int, std::vector<int>>, double> memo;
    auto nu_beta = [&](int s, const std::vector<int>& g) {
      const auto key = std::make_pair(s, g);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      const double m = sizes[s];
      auto f = [&](double b) {
        if (!(b > 0.0)) return 0.0;
        double v = (hyper.a_beta - 1.0) * std::log(b) - hyper.b_beta * b + hyper.a_beta * std::log(hyper.b_beta) -
                   std::lgamma(hyper.a_beta);
        for (int gj : g) {
          // log B(1 + g, b + m - g) - log B(1, b)
          v += std::lgamma(1.0 + gj) + std::lgamma(b + (m - gj)) - std::lgamma(1.0 + b + m) + std::log(b);
        }
        return std::exp(v);
      };
      boost::math::quadrature::exp_sinh<double> integrator;
      const double value = std::log(integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-12));
      memo.emplace(key, value);
      return value;
    };
    for (std::uint64_t g = 0; g < g_configs; ++g) {
      double v = 0.0;
      for (int s = 0; s < ds.S; ++s) {
        std::vector<int> counts(p, 0);
        for (int i = 0; i < n; ++i)
          if (ds.subpop[i] == s)
            for (int j = 0; j < p; ++j) counts[j] += is_global(g, i, j);
        v += nu_beta(s, counts);
      }
      g_part[g] = v;

      // Local labels of global cells integrate out of the lambda marginal, so
      // only labels of local cells are enumerated.
      double lp = 0.0;
      for (int s = 0; s < ds.S; ++s) {
        const int ks = hyper.local_clusters(s);
        std::vector<std::pair<int, int>> local_cells;
        for (int i = 0; i < n; ++i)
          if (ds.subpop[i] == s)
            for (int j = 0; j < p; ++j)
              if (!is_global(g, i, j)) local_cells.emplace_back(i, j);
        const std::size_t m = local_cells.size();
        std::vector<int> label(m, 0);
        std::vector<double> terms;
        std::vector<int> lam_counts(ks), theta_counts;
        while (true) {
          std::fill(lam_counts.begin(), lam_counts.end(), 0);
          for (std::size_t c = 0; c < m; ++c) ++lam_counts[label[c]];
          double v2 = dirmult(lam_counts, hyper.local_concentration(), lg_lambda);
          for (int l = 0; l < ks; ++l)
            for (int j = 0; j < p; ++j) {
              theta_counts.assign(ds.d[j], 0);
              for (std::size_t c = 0; c < m; ++c)
                if (label[c] == l && local_cells[c].second == j) ++theta_counts[ds.at(local_cells[c].first, j)];
              v2 += dirmult(theta_counts, hyper.eta, lg_eta);
            }
          terms.push_back(v2);
          std::size_t pos = 0;
          while (pos < m && ++label[pos] == ks) label[pos++] = 0;
          if (pos == m) break;
        }
        lp += log_sum_exp(terms);
      }
      local_part[g] = lp;
    }
  }

  // Outer loop over C.
  const std::uint64_t c_configs = static_cast<std::uint64_t>(std::llround(std::pow(static_cast<double>(K), n)));
  std::vector<double> log_w(c_configs);
  std::vector<int> C(n, 0), pi_counts(K), theta_counts;
  std::vector<double> g_terms(g_configs);
  for (std::uint64_t ci = 0; ci < c_configs; ++ci) {
    std::fill(pi_counts.begin(), pi_counts.end(), 0);
    double base = 0.0;
    for (int i = 0; i < n; ++i) {
      ++pi_counts[C[i]];
      base += probit[static_cast<std::size_t>(i) * K + C[i]];
    }
    base += dirmult(pi_counts, hyper.global_concentration(), lg_pi);
    for (std::uint64_t g = 0; g < g_configs; ++g) {
      double v = g_part[g] + local_part[g];
      for (int h = 0; h < K; ++h)
        for (int j = 0; j < p; ++j) {
          theta_counts.assign(ds.d[j], 0);
          for (int i = 0; i < n; ++i)
            if (C[i] == h && is_global(g, i, j)) ++theta_counts[ds.at(i, j)];
          v += dirmult(theta_counts, hyper.eta, lg_eta);
        }
      g_terms[g] = v;
    }
    log_w[ci] = base + log_sum_exp(g_terms);
    for (int i = 0; i < n && ++C[i] == K; ++i) C[i] = 0;
  }

  ExactPosterior out;
  out.configurations = static_cast<std::uint64_t>(count);
  out.log_evidence = log_sum_exp(log_w);
  out.coassignment = Eigen::MatrixXd::Zero(n, n);
  out.marginals = Eigen::MatrixXd::Zero(n, K);
  std::fill(C.begin(), C.end(), 0);
  for (std::uint64_t ci = 0; ci < c_configs; ++ci) {
    const double w = std::exp(log_w[ci] - out.log_evidence);
    for (int i = 0; i < n; ++i) {
      out.marginals(i, C[i]) += w;
      for (int k = 0; k < n; ++k)
        if (C[i] == C[k]) out.coassignment(i, k) += w;
    }
    for (int i = 0; i < n && ++C[i] == K; ++i) C[i] = 0;
  }
  return out;
}

}  // namespace srpc
