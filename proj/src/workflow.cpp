#include "srpc/workflow.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

#include "srpc/errors.hpp"

namespace srpc {

void parallel_for(int count, int threads, const std::function<void(int)>& job) {
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](int k) {
    try {
      job(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  if (workers == 1) {
    for (int k = 0; k < count; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int k = w; k < count; k += workers) run(k);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

ChainOutput run_chains(const Dataset& ds, ModelKind kind, const Hyperparameters& hyper, const ChainConfig& config,
                       int chains, int threads, const RunProgressFn& progress, const std::string& label) {
  if (chains < 1) throw BadParameter("need at least one chain");
  std::vector<ChainOutput> outs(chains);
  std::mutex mu;
  parallel_for(chains, threads, [&](int c) {
    ChainConfig cfg = config;
    cfg.seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
    ProgressFn fn;
    if (progress) {
      const std::string name = (label.empty() ? "" : label + " ") + "chain " + std::to_string(c + 1);
      fn = [&, name](long it, double ll) {
        std::lock_guard<std::mutex> lock(mu);
        progress(name, it, ll);
      };
    }
    outs[c] = run_model(kind, ds, hyper, cfg, fn);
    // Record the master seed so concatenated output echoes the user's config.
    outs[c].config.seed = config.seed;
  });
  return chains == 1 ? std::move(outs[0]) : ChainOutput::concatenate(outs);
}

StageResult fit_stage(const Dataset& ds, const FitOptions& options, std::optional<int> K0, bool summarize,
                      const std::string& label) {
  ChainConfig cfg = options.chain;
  if (K0) cfg.fixed_K0 = *K0;
  if (!summarize) cfg.keep_parameters = false;
  StageResult r;
  r.chain = run_chains(ds, options.kind, options.hyper, cfg, options.chains, options.threads, options.progress, label);
  ClusteringOptions co;
  co.cut = options.cut;
  co.max_subjects = options.max_subjects;
  co.seed = cfg.seed;
  r.clustering = cluster_chain(r.chain, co);
  if (summarize) {
    r.summary = relabel_and_summarize(r.chain, r.clustering.assignment, r.clustering.K);
    r.summary.warnings.insert(r.summary.warnings.begin(), r.clustering.warnings.begin(), r.clustering.warnings.end());
    r.report = make_fit_report(r.chain, r.summary, ds);
    r.summarized = true;
  }
  return r;
}

FitResult fit_model(const Dataset& ds, const FitOptions& options) {
  FitResult res;
  if (options.k_sweep) {
    const auto [lo, hi] = *options.k_sweep;
    if (lo < 1 || hi < lo) throw BadParameter("K sweep range must satisfy 1 <= a <= b");
    const int count = hi - lo + 1;
    res.sweep_fits.resize(count);
    FitOptions inner = options;
    // Parallelism goes to the sweep; chains inside each K run sequentially.
    inner.threads = 1;
    parallel_for(count, options.threads, [&](int k) {
      res.sweep_fits[k] = fit_stage(ds, inner, lo + k, true, "k=" + std::to_string(lo + k));
    });
    int best = 0;
    for (int k = 0; k < count; ++k) {
      SweepEntry e;
      e.K = lo + k;
      e.clusters = res.sweep_fits[k].clustering.K;
      e.report = res.sweep_fits[k].report;
      res.sweep.push_back(e);
      if (e.report.dic6 < res.sweep[best].report.dic6) best = k;
    }
    res.final = res.sweep_fits[best];
    res.selected_K = lo + best;
    return res;
  }
  if (options.two_stage && !options.k) {
    res.stage1 = fit_stage(ds, options, std::nullopt, false, "stage1");
    res.selected_K = res.stage1->clustering.K;
    FitOptions second = options;
    second.chain.seed = derive_seed(options.chain.seed, 0x2);
    res.final = fit_stage(ds, second, res.selected_K, true, "stage2");
    return res;
  }
  res.final = fit_stage(ds, options, options.k, true, "");
  res.selected_K = options.k ? *options.k : res.final.clustering.K;
  return res;
}

std::vector<double> fitted_probabilities(const PosteriorSummary& summary, const Dataset& ds) {
  if (ds.n != summary.n) throw ShapeError("dataset size differs from the fit");
  const DesignLayout layout(summary.coding, summary.S, summary.K, summary.q);
  std::vector<double> xi = summary.xi.median;
  for (double& v : xi)
    if (std::isnan(v)) v = 0.0;
  std::vector<double> prob(ds.n);
  for (int i = 0; i < ds.n; ++i)
    prob[i] = std_normal_cdf(layout.base_predictor(ds, i, xi) + layout.cluster_effect(summary.assignment[i], xi));
  return prob;
}

Metrics score_fit(const PosteriorSummary& summary, const Dataset& ds, const TruthFile& truth) {
  MetricInputs t, f;
  t.prob = truth.prob;
  t.assignment = truth.global_cluster;
  if (summary.kind == ModelKind::SupervisedRpc) {
    t.nu.assign(truth.truth.nu_flags.begin(), truth.truth.nu_flags.end());
    f.nu = summary.nu.median;
  }
  f.prob = fitted_probabilities(summary, ds);
  f.assignment = summary.assignment;
  return metrics_mse_sensitivity(t, f);
}

TruthFile truth_file_from(const SimResult& sim) {
  TruthFile tf;
  tf.truth = sim.truth;
  tf.global_cluster = sim.global_cluster;
  tf.prob = sim.prob;
  return tf;
}

PpcReport run_ppc(const Dataset& ds, const FitOptions& options, const PpcOptions& ppc) {
  FitOptions inner = options;
  inner.threads = 1;
  inner.progress = {};
  PpcFitFn fit = [inner](const Dataset& train, std::uint64_t seed) {
    FitOptions o = inner;
    o.chain.seed = seed;
    FitResult r = fit_model(train, o);
    return std::make_pair(std::move(r.final.chain), std::move(r.final.summary));
  };
  return ppc_deviance(ds, fit, ppc, options.threads);
}

}  // namespace srpc
