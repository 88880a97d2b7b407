// Acceptance runner. Each criterion prints its evidence followed by one
// "criterion N ...: PASS|FAIL" line; the exit status is nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "srpc/diagnostics.hpp"
#include "srpc/distributions.hpp"
#include "srpc/postprocess.hpp"
#include "srpc/sampler.hpp"
#include "srpc/simgen.hpp"
#include "srpc/text.hpp"
#include "srpc/workflow.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace srpc;
using namespace srpc::test;

namespace {

int g_threads = 1;
std::string g_cli;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void report(int number, const std::string& name, const Outcome& o) {
  std::cout << "criterion " << number << " " << name << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")"
            << std::endl;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Criteria 1 and 2 -------------------------------------------------------

struct ReplicateResult {
  int kstar = 0;
  int stage2_K = 0;
  Metrics metrics;
  double dic_rpc = 0.0;
  int lca_K = 0;
  double dic_lca = 0.0;
  double seconds = 0.0;
};

FitOptions recovery_options(std::uint64_t seed) {
  FitOptions o;
  o.chain.n_iter = 4000;
  o.chain.burn_in = 1000;
  o.chain.thin = 5;
  o.chain.seed = seed;
  o.two_stage = true;
  return o;
}

FitOptions lca_sweep_options(std::uint64_t seed) {
  FitOptions l = recovery_options(seed);
  l.kind = ModelKind::SupervisedLca;
  l.two_stage = false;
  l.k_sweep = std::make_pair(2, 8);
  return l;
}

SimResult scaled_simulation(std::uint64_t seed) {
  SimConfig sc;
  sc.n_s = 300;
  sc.seed = seed;
  return generate(sc);
}

std::pair<Outcome, Outcome> recovery_and_comparison() {
  const int reps = 20;
  std::vector<ReplicateResult> res(reps);
  parallel_for(reps, g_threads, [&](int rep) {
    const auto start = std::chrono::steady_clock::now();
    const SimResult sim = scaled_simulation(derive_seed(2024, static_cast<std::uint64_t>(rep)));
    const TruthFile tf = truth_file_from(sim);
    ReplicateResult& r = res[rep];
    const FitResult fit = fit_model(sim.data, recovery_options(11 + static_cast<std::uint64_t>(rep)));
    r.kstar = fit.selected_K;
    r.stage2_K = fit.final.summary.K;
    r.metrics = score_fit(fit.final.summary, sim.data, tf);
    r.dic_rpc = fit.final.report.dic6;
    const FitResult lca = fit_model(sim.data, lca_sweep_options(11 + static_cast<std::uint64_t>(rep)));
    r.lca_K = lca.selected_K;
    r.dic_lca = lca.final.report.dic6;
    r.seconds = elapsed(start);
  });

  std::vector<int> ks;
  double sens = 0.0, mse = 0.0, mse_nu = 0.0;
  int dic_wins = 0, lca_not_smaller = 0;
  for (int rep = 0; rep < reps; ++rep) {
    const ReplicateResult& r = res[rep];
    std::printf("  replicate %2d: K*=%d stage2 K=%d sensitivity=%.4f mse_y=%.5f mse_nu=%.5f dic6 srpc=%.1f slca(K=%d)=%.1f "
                "[%.0fs]\n",
                rep + 1, r.kstar, r.stage2_K, r.metrics.sensitivity, r.metrics.mse_outcome, r.metrics.mse_nu, r.dic_rpc,
                r.lca_K, r.dic_lca, r.seconds);
    ks.push_back(r.kstar);
    sens += r.metrics.sensitivity / reps;
    mse += r.metrics.mse_outcome / reps;
    mse_nu += r.metrics.mse_nu / reps;
    dic_wins += r.dic_rpc < r.dic_lca;
    lca_not_smaller += r.lca_K >= r.kstar;
  }
  std::sort(ks.begin(), ks.end());
  const double median = 0.5 * (ks[reps / 2 - 1] + ks[reps / 2]);

  Outcome one;
  one.pass = median == 3.0 && sens >= 0.95 && mse <= 0.02 && mse_nu <= 0.01;
  one.detail = "median K*=" + fmt("%.1f", median) + " target 3; mean sensitivity=" + fmt("%.4f", sens) +
               " >= 0.95; mean mse_y=" + fmt("%.5f", mse) + " <= 0.02; mean mse_nu=" + fmt("%.5f", mse_nu) + " <= 0.01";
  Outcome two;
  two.pass = dic_wins >= 16 && 2 * lca_not_smaller > reps;
  two.detail = "dic6 srpc < slca in " + std::to_string(dic_wins) + "/20 (need 16); slca K >= srpc K* in " +
               std::to_string(lca_not_smaller) + "/20 (need a majority)";
  return {one, two};
}

// Criterion 3 ------------------------------------------------------------

Outcome oracle_equivalence() {
  Outcome o;
  double worst = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    Rng data_rng(derive_seed(303, static_cast<std::uint64_t>(inst)));
    const Dataset ds = random_dataset(4, 2, 1, 2 + inst % 2, 0, data_rng);
    Hyperparameters h;
    h.K0 = 2;
    h.Ks = 2;
    const std::vector<double> xi{0.0, 0.0};
    const ExactPosterior exact = enumerate_posterior(ds, h, xi);

    ChainConfig cfg;
    cfg.n_iter = 201000;
    cfg.burn_in = 1000;
    cfg.fixed_xi = xi;
    cfg.keep_parameters = false;
    cfg.seed = 31 + static_cast<std::uint64_t>(inst);
    const ChainOutput chain = run_chain(ds, h, cfg);
    const SimilarityMatrix sim = similarity_matrix(chain.C, chain.draws, ds.n);
    double inst_worst = 0.0;
    for (int i = 0; i < ds.n; ++i)
      for (int j = i + 1; j < ds.n; ++j) inst_worst = std::max(inst_worst, std::abs(sim(i, j) - exact.coassignment(i, j)));
    std::printf("  instance %d: %ld draws, max |mcmc - exact| = %.4f\n", inst + 1, chain.draws, inst_worst);
    worst = std::max(worst, inst_worst);
  }
  o.pass = worst <= 0.03;
  o.detail = "max pairwise error " + fmt("%.4f", worst) + " <= 0.03 over 5 instances";
  return o;
}

// Criterion 4 ------------------------------------------------------------

Outcome reduction_equivalence() {
  Rng data_rng(404);
  const Dataset ds = random_dataset(80, 6, 3, 3, 2, data_rng);
  Hyperparameters h;
  h.K0 = 6;
  h.Ks = 3;
  ChainConfig cfg;
  cfg.n_iter = 100;
  cfg.burn_in = 0;
  cfg.keep_latent = true;
  cfg.seed = 4;
  const ChainOutput lca = run_lca_chain(ds, h, cfg);
  cfg.force_global = true;
  const ChainOutput rpc = run_chain(ds, h, cfg);
  std::vector<std::string> differ;
  if (lca.C != rpc.C) differ.push_back("C");
  if (lca.pi != rpc.pi) differ.push_back("pi");
  if (lca.theta0 != rpc.theta0) differ.push_back("theta");
  if (lca.xi != rpc.xi) differ.push_back("xi");
  if (lca.Z != rpc.Z) differ.push_back("Z");
  Outcome o;
  o.pass = differ.empty() && lca.draws == 100;
  o.detail = std::to_string(lca.draws) + " iterations, ";
  if (differ.empty()) {
    o.detail += "C, pi, theta, xi, Z identical";
  } else {
    o.detail += "differs in";
    for (const auto& d : differ) o.detail += " " + d;
  }
  return o;
}

// Criterion 5 ------------------------------------------------------------

struct Suite {
  int checks = 0;
  std::vector<std::string> failures;

  void ks(const std::string& name, const std::vector<double>& sample, const std::function<double(double)>& cdf) {
    ++checks;
    const double d = ks_statistic(sample, cdf), crit = ks_critical(sample.size());
    std::printf("  %-44s KS D=%.5f crit=%.5f\n", name.c_str(), d, crit);
    if (!(d < crit)) failures.push_back(name + " (KS)");
  }
  void mean(const std::string& name, const std::vector<double>& sample, double target, double sd) {
    ++checks;
    const double z = (mean_of(sample) - target) / (sd / std::sqrt(static_cast<double>(sample.size())));
    // Two-sided normal critical value at 1e-3.
    const double crit = 3.2905;
    std::printf("  %-44s mean z=%.3f\n", name.c_str(), z);
    if (!(std::abs(z) < crit)) failures.push_back(name + " (mean)");
  }
  void require(const std::string& name, bool ok) {
    ++checks;
    if (!ok) failures.push_back(name);
  }
};

Outcome distribution_suite() {
  namespace bm = boost::math;
  const int N = 100000;
  Suite s;
  Rng rng(505);

  auto draw = [&](const std::function<double()>& f) {
    std::vector<double> v(N);
    for (double& x : v) x = f();
    return v;
  };

  s.ks("uniform", draw([&] { return rng.uniform(); }), [](double x) { return std::clamp(x, 0.0, 1.0); });
  const bm::normal_distribution<> std_normal;
  s.ks("normal", draw([&] { return rng.normal(); }), [&](double x) { return bm::cdf(std_normal, x); });

  for (auto [a, b] : std::vector<std::pair<double, double>>{{2.0, 5.0}, {0.5, 0.5}}) {
    const bm::beta_distribution<> dist(a, b);
    const auto v = draw([&] { return sample_beta(a, b, rng); });
    const std::string name = "beta(" + format_double(a) + "," + format_double(b) + ")";
    s.ks(name, v, [&](double x) { return bm::cdf(dist, std::clamp(x, 0.0, 1.0)); });
    s.mean(name, v, a / (a + b), std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1))));
  }
  for (auto [shape, rate] : std::vector<std::pair<double, double>>{{0.5, 2.0}, {3.0, 0.5}, {51.0, 35.66}}) {
    const bm::gamma_distribution<> dist(shape, 1.0 / rate);
    const auto v = draw([&] { return sample_gamma(shape, rate, rng); });
    const std::string name = "gamma(" + format_double(shape) + ", rate " + format_double(rate) + ")";
    s.ks(name, v, [&](double x) { return bm::cdf(dist, std::max(x, 0.0)); });
    s.mean(name, v, shape / rate, std::sqrt(shape) / rate);
  }
  {
    const bm::gamma_distribution<> dist(2.5, 1.0 / 1.5);
    const auto v = draw([&] { return 1.0 / sample_inverse_gamma(2.5, 1.5, rng); });
    s.ks("inverse gamma(2.5, 1.5) reciprocal", v, [&](double x) { return bm::cdf(dist, std::max(x, 0.0)); });
  }
  {
    const std::vector<double> conc{2.0, 1.0, 1.0};
    std::vector<double> x0(N), x1(N);
    std::vector<double> buf(3);
    for (int t = 0; t < N; ++t) {
      if (t % 2) {
        sample_dirichlet_into(conc, buf, rng);
      } else {
        buf = sample_dirichlet(conc, rng);
      }
      x0[t] = buf[0];
      x1[t] = buf[1];
      if (std::abs(buf[0] + buf[1] + buf[2] - 1.0) > 1e-12) s.require("dirichlet simplex", false);
    }
    const bm::beta_distribution<> m0(2.0, 2.0), m1(1.0, 3.0);
    s.ks("dirichlet(2,1,1) first coordinate", x0, [&](double x) { return bm::cdf(m0, std::clamp(x, 0.0, 1.0)); });
    s.ks("dirichlet(2,1,1) second coordinate", x1, [&](double x) { return bm::cdf(m1, std::clamp(x, 0.0, 1.0)); });
    s.mean("dirichlet(2,1,1) first coordinate", x0, 0.5, std::sqrt(0.05));
  }
  {
    const std::vector<double> w{0.1, 0.2, 0.3, 0.25, 0.15};
    std::vector<double> counts(w.size(), 0.0);
    for (int t = 0; t < N; ++t) counts[sample_categorical(w, rng)] += 1.0;
    double chi2 = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) chi2 += (counts[k] - N * w[k]) * (counts[k] - N * w[k]) / (N * w[k]);
    const double crit = bm::quantile(bm::complement(bm::chi_squared_distribution<>(4.0), 1e-3));
    std::printf("  %-44s chi2=%.3f crit=%.3f\n", "categorical", chi2, crit);
    s.require("categorical (chi-square)", chi2 < crit);
  }
  for (double mu : {-3.0, -1.0, 0.0, 0.5, 2.0, 5.0}) {
    for (bool positive : {true, false}) {
      const auto v = draw([&] { return sample_truncated_normal(mu, positive, rng); });
      // CDF of N(mu, 1) restricted to (0, inf) or (-inf, 0].
      auto cdf = [&](double z) {
        if (positive) {
          if (z <= 0) return 0.0;
          const double tail = bm::cdf(bm::complement(std_normal, -mu));
          return (tail - bm::cdf(bm::complement(std_normal, z - mu))) / tail;
        }
        if (z >= 0) return 1.0;
        return bm::cdf(std_normal, z - mu) / bm::cdf(std_normal, -mu);
      };
      s.ks("truncated normal mean " + format_double(mu) + (positive ? " (0,inf)" : " (-inf,0]"), v, cdf);
    }
  }
  {
    bool ok = true;
    for (int mu = -30; mu <= 30; ++mu)
      for (int t = 0; t < 1000; ++t) {
        const double a = sample_truncated_normal(mu, true, rng), b = sample_truncated_normal(mu, false, rng);
        ok = ok && std::isfinite(a) && a > 0.0 && std::isfinite(b) && b <= 0.0;
      }
    std::printf("  %-44s %s\n", "truncated normal sign contract -30..30", ok ? "holds" : "violated");
    s.require("truncated normal sign contract", ok);
  }
  {
    Eigen::MatrixXd cov(2, 2);
    cov << 2, 1, 1, 2;
    Eigen::VectorXd mu(2);
    mu << 1.0, -1.0;
    std::vector<double> a(N), b(N), c(N);
    for (int t = 0; t < N; ++t) {
      const Eigen::VectorXd x = sample_mvn(mu, cov, rng);
      a[t] = x[0];
      b[t] = x[0] + x[1];
      c[t] = x[0] - x[1];
    }
    auto ncdf = [&](double m, double var) {
      return [m, var, &std_normal](double x) { return bm::cdf(std_normal, (x - m) / std::sqrt(var)); };
    };
    s.ks("mvn first coordinate", a, ncdf(1.0, 2.0));
    s.ks("mvn sum of coordinates", b, ncdf(0.0, 6.0));
    s.ks("mvn difference of coordinates", c, ncdf(2.0, 2.0));

    Eigen::MatrixXd q(2, 2);
    q << 3, 1, 1, 2;
    Eigen::VectorXd rhs(2);
    rhs << 1, -1;
    const Eigen::MatrixXd qi = q.inverse();
    const Eigen::VectorXd m = qi * rhs;
    std::vector<double> d0(N), d1(N);
    for (int t = 0; t < N; ++t) {
      const Eigen::VectorXd x = sample_mvn_canonical(q, rhs, rng);
      d0[t] = x[0];
      d1[t] = x[1];
    }
    s.ks("mvn precision form first coordinate", d0, ncdf(m[0], qi(0, 0)));
    s.ks("mvn precision form second coordinate", d1, ncdf(m[1], qi(1, 1)));
  }

  Outcome o;
  o.pass = s.failures.empty();
  o.detail = std::to_string(s.checks - static_cast<int>(s.failures.size())) + "/" + std::to_string(s.checks) +
             " checks at 1e5 draws, alpha 1e-3";
  for (const auto& f : s.failures) o.detail += "; failed " + f;
  return o;
}

// Criterion 6 ------------------------------------------------------------

Outcome invariant_suite() {
  long violations = 0, sweeps = 0;
  for (ModelKind kind : {ModelKind::SupervisedRpc, ModelKind::SupervisedLca}) {
    Rng data_rng(606);
    const Dataset ds = random_dataset(120, 8, 3, 3, 2, data_rng);
    Hyperparameters h;
    h.K0 = 6;
    h.Ks = 3;
    ChainStreams rng(6);
    const ChainContext ctx = make_context(ds, kind, h, ChainConfig{}, rng.prior);
    ChainState st = init_chain(ctx, rng);
    violations += static_cast<long>(check_state(st, ctx).size());
    for (int t = 0; t < 1000; ++t) {
      gibbs_sweep(st, ctx, rng, kind == ModelKind::SupervisedRpc && t < 50);
      const auto v = check_state(st, ctx);
      if (!v.empty() && violations < 5) std::cout << "  sweep " << t + 1 << ": " << v.front() << '\n';
      violations += static_cast<long>(v.size());
      ++sweeps;
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(sweeps) + " sweeps (srpc and slca), " + std::to_string(violations) + " violations";
  return o;
}

// Criterion 7 ------------------------------------------------------------

// Probit maximum likelihood by Newton-Raphson on the exact Hessian.
Eigen::VectorXd probit_mle(const Eigen::MatrixXd& W, const std::vector<int>& y) {
  const boost::math::normal_distribution<> nd;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(W.cols());
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(W.cols());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(W.cols(), W.cols());
    for (int i = 0; i < W.rows(); ++i) {
      const double eta = W.row(i).dot(b);
      const double pdf = boost::math::pdf(nd, eta);
      // Inverse Mills ratios for y = 1 and y = 0.
      const double lam = y[i] ? pdf / boost::math::cdf(nd, eta) : -pdf / boost::math::cdf(boost::math::complement(nd, eta));
      grad += lam * W.row(i).transpose();
      hess -= lam * (lam + eta) * W.row(i).transpose() * W.row(i);
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    b -= step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return b;
}

Outcome probit_recovery() {
  const int n = 2000;
  Rng rng(707);
  Eigen::MatrixXd W(n, 2);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    W(i, 0) = 1.0;
    W(i, 1) = rng.normal();
    y[i] = W(i, 1) * 1.0 + rng.normal() > 0.0 ? 1 : 0;
  }
  const Eigen::VectorXd mle = probit_mle(W, y);
  const std::vector<double> mu0{0.0, 0.0}, sigma0{100.0, 100.0};
  const ProbitDraws d = run_probit_gibbs(W, y, mu0, sigma0, 5000, rng);
  const Eigen::VectorXd post = d.xi.bottomRows(4000).colwise().mean().transpose();
  std::printf("  intercept: posterior mean %.4f, mle %.4f\n", post[0], mle[0]);
  std::printf("  slope:     posterior mean %.4f, mle %.4f (true 1.0)\n", post[1], mle[1]);
  const double gap = (post - mle).cwiseAbs().maxCoeff();
  Outcome o;
  o.pass = gap <= 0.1;
  o.detail = "max |posterior mean - mle| = " + fmt("%.4f", gap) + " <= 0.1";
  return o;
}

// Criterion 8 ------------------------------------------------------------

Outcome ppc_dispersion() {
  const SimResult sim = scaled_simulation(derive_seed(2024, 100));
  FitOptions rpc = recovery_options(81);
  rpc.threads = g_threads;
  FitOptions lca = lca_sweep_options(82);
  lca.threads = g_threads;
  const int k_rpc = fit_model(sim.data, rpc).selected_K;
  const int k_lca = fit_model(sim.data, lca).selected_K;
  std::printf("  selected K on the full data: srpc %d, slca %d\n", k_rpc, k_lca);

  auto fixed_k = [&](FitOptions o, int k) {
    o.two_stage = false;
    o.k_sweep.reset();
    o.k = k;
    o.cut = CutSpec{CutRule::FixedK, k, 0.0};
    o.chain.n_iter = 2000;
    o.chain.burn_in = 500;
    o.chain.thin = 5;
    return o;
  };
  PpcOptions ppc;
  ppc.permutations = 30;
  ppc.seed = 88;
  const PpcReport a = run_ppc(sim.data, fixed_k(rpc, k_rpc), ppc);
  const PpcReport b = run_ppc(sim.data, fixed_k(lca, k_lca), ppc);
  std::printf("  srpc differences: mean %.4f sd %.4f range [%.4f, %.4f]\n", a.mean, a.sd, a.min, a.max);
  std::printf("  slca differences: mean %.4f sd %.4f range [%.4f, %.4f]\n", b.mean, b.sd, b.min, b.max);
  Outcome o;
  o.pass = a.sd < b.sd;
  o.detail = "sd srpc " + fmt("%.4f", a.sd) + " < sd slca " + fmt("%.4f", b.sd) + " over 30 splits";
  return o;
}

// Criterion 9 ------------------------------------------------------------

int run(const std::string& command) {
  const int rc = std::system((command + " > /dev/null 2>&1").c_str());
  return rc;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

// Relative paths of regular files under `root`, except manifests.
std::vector<std::string> files_under(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") out.push_back(fs::relative(e.path(), root).string());
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  Outcome o;
  if (g_cli.empty() || !fs::exists(g_cli)) {
    o.pass = false;
    o.detail = "CLI binary not found (pass --cli)";
    return o;
  }
  const fs::path root = fs::temp_directory_path() / ("srpc_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path a = root / "first", b = root / "replay";
  {
    std::ofstream(root / "sim.toml") << "[simulation]\nS = 2\nn_s = 40\np = 8\nq = 1\n";
  }
  const std::string cli = quote(g_cli);
  const fs::path data = a / "sim" / "data.csv", truth = a / "sim" / "truth.json";
  const std::vector<std::pair<std::string, std::string>> commands{
      {"sim", "simulate --config " + quote(root / "sim.toml") + " --seed 5"},
      {"fit", "fit " + quote(data) + " --two-stage --iters 300 --burn 100 --k0 6 --ks 2 --svg --seed 7"},
      {"lca", "fit " + quote(data) + " --model slca --k-sweep 2:4 --iters 300 --burn 100 --seed 8 --threads 2"},
      {"summary", "summarize " + quote(a / "fit") + " --cut k=2 --data " + quote(data) + " --svg"},
      {"compare", "compare --truth " + quote(truth) + " --data " + quote(data) + " " + quote(a / "fit") + " " +
                      quote(a / "lca")},
      {"ppc", "ppc " + quote(data) + " --permutations 3 --iters 120 --burn 40 --k 3 --seed 9 --threads 2"},
  };
  int checked = 0;
  std::vector<std::string> problems;
  for (const auto& [name, args] : commands) {
    if (run(cli + " " + args + " --out " + quote(a / name)) != 0) {
      problems.push_back(name + ": command failed");
      continue;
    }
    if (run(cli + " replay " + quote(a / name / "manifest.json") + " --out " + quote(b / name)) != 0) {
      problems.push_back(name + ": replay failed");
      continue;
    }
    const auto fa = files_under(a / name), fb = files_under(b / name);
    if (fa != fb) {
      problems.push_back(name + ": file sets differ");
      continue;
    }
    for (const auto& rel : fa) {
      ++checked;
      if (read_text_file(a / name / rel) != read_text_file(b / name / rel)) problems.push_back(name + "/" + rel);
    }
    const auto ma = nlohmann::json::parse(read_text_file(a / name / "manifest.json"));
    const auto mb = nlohmann::json::parse(read_text_file(b / name / "manifest.json"));
    if (ma.at("outputs") != mb.at("outputs")) problems.push_back(name + ": manifest output hashes differ");
    std::printf("  %-8s %zu files compared\n", name.c_str(), fa.size());
  }
  fs::remove_all(root);
  o.pass = problems.empty() && checked > 0;
  o.detail = std::to_string(commands.size()) + " commands replayed, " + std::to_string(checked) + " files";
  o.detail += problems.empty() ? " bit-identical" : ", mismatches:";
  for (const auto& p : problems) o.detail += " " + p;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srpc acceptance criteria"};
  std::vector<std::string> selected;
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("SRPC_THREADS")) g_threads = std::max(1, std::atoi(env));
  app.add_option("criteria", selected,
                 "recovery (1 and 2), oracle, reduction, distributions, invariants, probit, ppc, determinism; "
                 "default all");
  app.add_option("--cli", g_cli, "path to the srpc executable");
  app.add_option("--threads", g_threads, "worker threads");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    selected = {"recovery", "oracle", "reduction", "distributions", "invariants", "probit", "ppc", "determinism"};

  bool all = true;
  auto timed = [&](const std::string& label, const std::function<void()>& f) {
    const auto start = std::chrono::steady_clock::now();
    std::cout << "== " << label << std::endl;
    f();
    std::printf("   (%.1fs)\n", elapsed(start));
  };
  for (const auto& c : selected) {
    if (c == "recovery") {
      timed("simulation recovery and model comparison", [&] {
        const auto [one, two] = recovery_and_comparison();
        report(1, "simulation recovery", one);
        report(2, "model comparison", two);
        all = all && one.pass && two.pass;
      });
    } else if (c == "oracle") {
      timed("oracle equivalence", [&] {
        const Outcome o = oracle_equivalence();
        report(3, "oracle equivalence", o);
        all = all && o.pass;
      });
    } else if (c == "reduction") {
      timed("reduction equivalence", [&] {
        const Outcome o = reduction_equivalence();
        report(4, "reduction equivalence", o);
        all = all && o.pass;
      });
    } else if (c == "distributions") {
      timed("sampler distribution suite", [&] {
        const Outcome o = distribution_suite();
        report(5, "sampler distribution suite", o);
        all = all && o.pass;
      });
    } else if (c == "invariants") {
      timed("invariant suite", [&] {
        const Outcome o = invariant_suite();
        report(6, "invariant suite", o);
        all = all && o.pass;
      });
    } else if (c == "probit") {
      timed("probit recovery", [&] {
        const Outcome o = probit_recovery();
        report(7, "probit recovery", o);
        all = all && o.pass;
      });
    } else if (c == "ppc") {
      timed("ppc dispersion ordering", [&] {
        const Outcome o = ppc_dispersion();
        report(8, "ppc dispersion ordering", o);
        all = all && o.pass;
      });
    } else if (c == "determinism") {
      timed("determinism", [&] {
        const Outcome o = determinism();
        report(9, "determinism", o);
        all = all && o.pass;
      });
    } else {
      std::cerr << "unknown criterion '" << c << "'\n";
      return 2;
    }
  }
  return all ? 0 : 1;
}
