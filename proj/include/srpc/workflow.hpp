#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srpc/data.hpp"
#include "srpc/diagnostics.hpp"
#include "srpc/postprocess.hpp"
#include "srpc/sampler.hpp"
#include "srpc/simgen.hpp"

namespace srpc {

// Progress callback: run label ("chain 1", "stage1 chain 2", "k=4 chain 1"),
// iteration and conditional log-likelihood.
using RunProgressFn = std::function<void(const std::string& label, long iteration, double loglik)>;

struct FitOptions {
  ModelKind kind = ModelKind::SupervisedRpc;
  Hyperparameters hyper;
  ChainConfig chain;
  int chains = 1;
  bool two_stage = false;
  std::optional<int> k;                      // fixed K0, skips selection
  std::optional<std::pair<int, int>> k_sweep;  // inclusive range, DIC6-best reported
  CutSpec cut;
  int max_subjects = 5000;
  int threads = 1;
  RunProgressFn progress;
};

struct StageResult {
  ChainOutput chain;
  ClusteringResult clustering;
  bool summarized = false;
  PosteriorSummary summary;
  FitReport report;
};

struct SweepEntry {
  int K = 0;
  int clusters = 0;  // clusters found by the dendrogram cut
  FitReport report;
};

struct FitResult {
  std::optional<StageResult> stage1;
  std::vector<StageResult> sweep_fits;  // one per K when sweeping
  std::vector<SweepEntry> sweep;
  StageResult final;
  int selected_K = 0;  // stage-1 K*, the DIC6-best K, or the cut of a single fit
};

// Runs `chains` chains (seeds derived from config.seed) and concatenates them.
ChainOutput run_chains(const Dataset& ds, ModelKind kind, const Hyperparameters& hyper, const ChainConfig& config,
                       int chains, int threads, const RunProgressFn& progress = {}, const std::string& label = "");

StageResult fit_stage(const Dataset& ds, const FitOptions& options, std::optional<int> K0, bool summarize,
                      const std::string& label);

FitResult fit_model(const Dataset& ds, const FitOptions& options);

// Scores a fitted summary against simulation truth.
Metrics score_fit(const PosteriorSummary& summary, const Dataset& ds, const TruthFile& truth);
TruthFile truth_file_from(const SimResult& sim);

// Outcome probabilities Phi(W xi) of a summary's hard assignment at the
// posterior medians.
std::vector<double> fitted_probabilities(const PosteriorSummary& summary, const Dataset& ds);

// PPC driver fitting `options` on each training split.
PpcReport run_ppc(const Dataset& ds, const FitOptions& options, const PpcOptions& ppc);

// Runs jobs 0..count-1 on up to `threads` workers; exceptions are rethrown
// in job order after all workers finish.
void parallel_for(int count, int threads, const std::function<void(int)>& job);

}  // namespace srpc
