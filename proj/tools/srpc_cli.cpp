#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "srpc/config.hpp"
#include "srpc/errors.hpp"
#include "srpc/io.hpp"
#include "srpc/text.hpp"
#include "srpc/workflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srpc;

namespace {

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

constexpr int kExitInput = 2;
constexpr int kExitSampler = 3;
constexpr int kExitShape = 4;

int threads_from_env() {
  if (const char* env = std::getenv("SRPC_THREADS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      throw InputError(std::string("SRPC_THREADS is not an integer: ") + env);
    }
  }
  return 1;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  bool timings = false;

  int thread_count() const { return threads ? std::max(1, *threads) : threads_from_env(); }
  fs::path out_dir(const fs::path& fallback) const { return out ? fs::path(*out) : fallback; }
};

// Flags shared by fit and ppc.
struct FitFlags {
  std::optional<std::string> config;
  std::string model = "srpc";
  bool two_stage = false;
  std::optional<int> k;
  std::optional<std::string> k_sweep;
  std::optional<long> iters, burn, thin;
  int chains = 1;
  std::optional<std::string> cut;
  std::optional<std::string> coding;
  std::optional<long> progress;
  std::optional<int> k0, ks;
  int max_subjects = 5000;
  bool keep_latent = false;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--config", f.config, "TOML config with [prior], [chain] and [data] sections");
  cmd->add_option("--model", f.model, "srpc or slca")->capture_default_str();
  cmd->add_flag("--two-stage", f.two_stage, "select K from a stage-1 run, then refit with K0 = K*");
  cmd->add_option("--k", f.k, "fixed number of global clusters (skips selection)");
  cmd->add_option("--k-sweep", f.k_sweep, "fit every K in a:b and report the DIC6-best");
  cmd->add_option("--iters", f.iters, "Gibbs iterations (default 20000)");
  cmd->add_option("--burn", f.burn, "burn-in iterations (default 5000)");
  cmd->add_option("--thin", f.thin, "keep every n-th draw after burn-in");
  cmd->add_option("--chains", f.chains, "independent chains per fit")->capture_default_str();
  cmd->add_option("--cut", f.cut, "dendrogram cut: gap, k=<K> or height=<h>");
  cmd->add_option("--coding", f.coding, "probit design coding: cell-means or reference-cell");
  cmd->add_option("--progress", f.progress, "report every n iterations on stderr");
  cmd->add_option("--k0", f.k0, "upper bound on global clusters");
  cmd->add_option("--ks", f.ks, "upper bound on local clusters");
  cmd->add_option("--max-subjects", f.max_subjects, "subsample the similarity matrix above this size")
      ->capture_default_str();
  cmd->add_flag("--keep-latent", f.keep_latent, "store Z, G and L traces");
}

const std::set<std::string> kKnownKeys{
    "prior.K0", "prior.Ks", "prior.local_k", "prior.alpha0", "prior.alpha_s", "prior.eta", "prior.a_beta",
    "prior.b_beta", "prior.a_sigma", "prior.b_sigma", "prior.mu0", "prior.sigma0",
    "chain.iters", "chain.burn", "chain.thin", "chain.seed", "chain.coding", "chain.keep_latent",
    "chain.global_warmup", "chain.progress_every",
    "data.id_column", "data.subpop_column", "data.outcome_column", "data.exposure_prefix",
    "data.demographic_prefix", "data.exposures", "data.demographics", "data.levels", "data.normalize_demographics",
    "fit.two_stage", "fit.k", "fit.k_sweep", "fit.cut",
    "ppc.permutations", "ppc.train_fraction",
    "simulation.S", "simulation.n_s", "simulation.p", "simulation.d", "simulation.k_global", "simulation.k_local",
    "simulation.local_fraction", "simulation.modal_mass", "simulation.q", "simulation.replicates", "simulation.seed",
    "simulation.truth"};

Config load_config(const std::optional<std::string>& path) {
  if (!path) return Config{};
  Config cfg = Config::load(*path);
  cfg.require_known(kKnownKeys);
  return cfg;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto parts = split(s, ':');
  try {
    if (parts.size() == 2) return {std::stoi(parts[0]), std::stoi(parts[1])};
  } catch (const std::exception&) {
  }
  throw BadParameter("K sweep must look like a:b, got '" + s + "'");
}

FitOptions fit_options(const FitFlags& f, const Config& cfg, const Globals& g) {
  FitOptions o;
  o.kind = model_from_string(f.model);
  o.hyper = hyperparameters_from(cfg);
  if (f.k0) o.hyper.K0 = *f.k0;
  if (f.ks) o.hyper.Ks = *f.ks;
  o.chain = chain_config_from(cfg);
  if (f.iters) o.chain.n_iter = *f.iters;
  if (f.burn) o.chain.burn_in = *f.burn;
  if (f.thin) o.chain.thin = *f.thin;
  if (g.seed) o.chain.seed = *g.seed;
  if (f.coding) o.chain.coding = coding_from_string(*f.coding);
  if (f.progress) o.chain.progress_every = *f.progress;
  o.chain.keep_latent = o.chain.keep_latent || f.keep_latent;
  o.chain.validate();
  o.chains = f.chains;
  o.two_stage = f.two_stage || cfg.get_bool("fit.two_stage").value_or(false);
  o.k = f.k;
  if (!o.k)
    if (auto v = cfg.get_int("fit.k")) o.k = static_cast<int>(*v);
  if (f.k_sweep) o.k_sweep = parse_range(*f.k_sweep);
  else if (auto v = cfg.get_string("fit.k_sweep")) o.k_sweep = parse_range(*v);
  if (auto cut = f.cut ? f.cut : cfg.get_string("fit.cut")) o.cut = cut_from_string(*cut);
  else if (o.k) o.cut = CutSpec{CutRule::FixedK, *o.k, 0.0};
  o.max_subjects = f.max_subjects;
  o.threads = g.thread_count();
  if (o.k && o.k_sweep) throw BadParameter("--k and --k-sweep are mutually exclusive");
  if (o.chains < 1) throw BadParameter("--chains must be at least 1");
  if (o.chain.progress_every > 0) {
    auto mu = std::make_shared<std::mutex>();
    o.progress = [mu](const std::string& label, long it, double ll) {
      std::lock_guard<std::mutex> lock(*mu);
      std::cerr << label << " iteration " << it << " loglik " << format_double(ll) << '\n';
    };
  }
  return o;
}

json options_json(const FitOptions& o) {
  json j{{"model", to_string(o.kind)},
         {"hyper", to_json(o.hyper)},
         {"chain", to_json(o.chain)},
         {"chains", o.chains},
         {"two_stage", o.two_stage},
         {"cut", to_string(o.cut)},
         {"max_subjects", o.max_subjects}};
  j["k"] = o.k ? json(*o.k) : json(nullptr);
  j["k_sweep"] = o.k_sweep ? json{o.k_sweep->first, o.k_sweep->second} : json(nullptr);
  return j;
}

json config_json(const Config& cfg) {
  json j = json::object();
  for (const auto& [key, value] : cfg.values()) j[key] = value;
  return j;
}

Dataset load_data(const fs::path& path, const Config& cfg) {
  if (!fs::exists(path)) throw InputError("data file not found: " + path.string());
  return load_dataset(path, schema_from(cfg), load_options_from(cfg));
}

// Every command records its arguments, effective configuration, inputs and
// output hashes so the run can be replayed and checked.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::optional<double> seconds;
};

std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_text_file(path))); }

void write_manifest(const fs::path& dir, const Manifest& m) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  json outputs = json::object();
  for (const auto& f : files) outputs[f.generic_string()] = file_hash(dir / f);
  json inputs = json::object();
  for (const auto& f : m.inputs) inputs[f.generic_string()] = file_hash(f);
  json j{{"command", m.command}, {"argv", m.argv},   {"config", m.config},
         {"seed", m.seed},       {"inputs", inputs}, {"outputs", outputs}};
  if (m.seconds) j["timings"] = {{"seconds", *m.seconds}};
  write_text_file(dir / "manifest.json", dump_json(j));
}

std::string pad_index(int index, int count) {
  const int width = std::max(2, static_cast<int>(std::to_string(count).size()));
  std::string s = std::to_string(index);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

std::string clusters_csv(const Dataset& ds, const std::vector<int>& assignment) {
  std::string out = "id,subpop,cluster\n";
  for (int i = 0; i < ds.n; ++i)
    out += ds.ids[i] + "," + std::to_string(ds.subpop[i] + 1) + "," + std::to_string(assignment[i] + 1) + "\n";
  return out;
}

std::string dendrogram_csv(const Dendrogram& d) {
  std::string out = "step,a,b,height,size\n";
  for (std::size_t k = 0; k < d.merges.size(); ++k) {
    const Merge& m = d.merges[k];
    out += std::to_string(k + 1) + "," + std::to_string(m.a) + "," + std::to_string(m.b) + "," +
           format_double(m.height) + "," + std::to_string(m.size) + "\n";
  }
  return out;
}

json clustering_json(const ClusteringResult& c, const CutSpec& cut) {
  return json{{"K", c.K}, {"cut", to_string(cut)}, {"subjects", c.subjects.size()}, {"warnings", c.warnings}};
}

void write_outputs(const PosteriorSummary& s, const fs::path& dir, bool svg) {
  write_summary(s, dir);
  if (!svg) return;
  write_text_file(dir / "modal_patterns.svg", modal_pattern_svg(s));
  if (s.kind == ModelKind::SupervisedRpc) write_text_file(dir / "nu_grid.svg", nu_grid_svg(s));
}

void write_stage(const StageResult& r, const Dataset& ds, const CutSpec& cut, const fs::path& dir, bool svg,
                 json report_extra = json::object()) {
  fs::create_directories(dir);
  write_chain(r.chain, dir / "chain");
  write_similarity(r.clustering.similarity, dir / "similarity.bin");
  write_text_file(dir / "dendrogram.csv", dendrogram_csv(r.clustering.dendrogram));
  write_text_file(dir / "clusters.csv", clusters_csv(ds, r.clustering.assignment));
  write_text_file(dir / "clustering.json", dump_json(clustering_json(r.clustering, cut)));
  if (!r.summarized) return;
  write_outputs(r.summary, dir, svg);
  json report = fit_report_to_json(r.report);
  report["model"] = to_string(r.summary.kind);
  report["clusters"] = r.summary.K;
  report.update(report_extra);
  write_text_file(dir / "fit_report.json", dump_json(report));
}

std::string sweep_csv(const std::vector<SweepEntry>& sweep, int selected) {
  std::string out = "K,clusters,dic6,mean_deviance,plugin_deviance,mixture_dic6,selected\n";
  for (const auto& e : sweep)
    out += std::to_string(e.K) + "," + std::to_string(e.clusters) + "," + format_double(e.report.dic6) + "," +
           format_double(e.report.mean_deviance) + "," + format_double(e.report.plugin_deviance) + "," +
           format_double(e.report.mixture_dic6) + "," + (e.K == selected ? "1" : "0") + "\n";
  return out;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// simulate -------------------------------------------------------------------

struct SimulateFlags {
  std::optional<std::string> config;
  std::optional<int> replicates;
};

void cmd_simulate(const SimulateFlags& f, const Globals& g, const std::vector<std::string>& argv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(f.config);
  SimConfig sc = sim_config_from(cfg);
  if (g.seed) sc.seed = *g.seed;
  if (f.replicates) sc.replicates = *f.replicates;
  sc.validate();
  const fs::path out = g.out_dir("srpc_out");
  fs::create_directories(out);
  // Truth tables are shared; only the subject draws vary by replicate.
  const SimTruth truth = sc.truth_path ? truth_from_json_text(read_text_file(*sc.truth_path)) : default_truth_tables(sc);
  parallel_for(sc.replicates, g.thread_count(), [&](int r) {
    SimConfig rc = sc;
    fs::path dir = out;
    if (sc.replicates > 1) {
      rc.seed = derive_seed(sc.seed, static_cast<std::uint64_t>(r));
      dir = out / ("rep" + pad_index(r + 1, sc.replicates));
      fs::create_directories(dir);
    }
    Rng rng(rc.seed, 0x51);
    const SimResult sim = generate(rc, truth, rng);
    write_dataset(sim.data, dir / "data.csv");
    write_truth(sim, rc, dir / "truth.json");
  });
  Manifest m;
  m.command = "simulate";
  m.argv = argv;
  m.config = {{"file", config_json(cfg)},
              {"simulation",
               {{"S", sc.S}, {"n_s", sc.n_s}, {"p", sc.p}, {"d", sc.d}, {"k_global", sc.K_global},
                {"k_local", sc.K_local}, {"local_fraction", sc.local_fraction}, {"modal_mass", sc.modal_mass},
                {"q", sc.q}, {"replicates", sc.replicates}}}};
  m.seed = sc.seed;
  if (f.config) m.inputs.emplace_back(*f.config);
  if (sc.truth_path) m.inputs.push_back(*sc.truth_path);
  if (g.timings) m.seconds = elapsed(start);
  write_manifest(out, m);
  std::cout << "wrote " << sc.replicates << " dataset" << (sc.replicates == 1 ? "" : "s") << " to " << out.string()
            << '\n';
}

// fit --------------------------------------------------------------------------

struct FitCommand {
  std::string data;
  FitFlags flags;
  bool svg = false;
};

void cmd_fit(const FitCommand& f, const Globals& g, const std::vector<std::string>& argv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(f.flags.config);
  const Dataset ds = load_data(f.data, cfg);
  const FitOptions o = fit_options(f.flags, cfg, g);
  const fs::path out = g.out_dir("srpc_out");
  fs::create_directories(out);
  const FitResult r = fit_model(ds, o);
  json extra{{"selected_K", r.selected_K}};
  if (r.stage1) {
    write_stage(*r.stage1, ds, o.cut, out / "stage1", false);
    extra["stage1_K"] = r.stage1->clustering.K;
  }
  if (o.k_sweep) {
    json sweep = json::array();
    for (std::size_t k = 0; k < r.sweep.size(); ++k) {
      write_stage(r.sweep_fits[k], ds, o.cut, out / ("k" + std::to_string(r.sweep[k].K)), f.svg,
                  {{"K0", r.sweep[k].K}});
      sweep.push_back({{"K", r.sweep[k].K}, {"clusters", r.sweep[k].clusters}, {"dic6", r.sweep[k].report.dic6}});
    }
    write_text_file(out / "sweep.csv", sweep_csv(r.sweep, r.selected_K));
    extra["sweep"] = sweep;
  }
  write_stage(r.final, ds, o.cut, out, f.svg, extra);
  Manifest m;
  m.command = "fit";
  m.argv = argv;
  m.config = {{"file", config_json(cfg)}, {"options", options_json(o)}};
  m.seed = o.chain.seed;
  m.inputs.emplace_back(f.data);
  if (f.flags.config) m.inputs.emplace_back(*f.flags.config);
  if (g.timings) m.seconds = elapsed(start);
  write_manifest(out, m);
  std::cout << to_string(o.kind) << " fit: K=" << r.final.summary.K << " DIC6=" << fixed(r.final.report.dic6, 1)
            << " -> " << out.string() << '\n';
}

// summarize ----------------------------------------------------------------------

struct SummarizeFlags {
  std::string fit_dir;
  std::optional<std::string> data;
  std::optional<std::string> config;
  std::string cut = "gap";
  int max_subjects = 5000;
  bool svg = false;
};

void cmd_summarize(const SummarizeFlags& f, const Globals& g, const std::vector<std::string>& argv) {
  const auto start = std::chrono::steady_clock::now();
  const fs::path chain_dir = fs::path(f.fit_dir) / "chain";
  if (!fs::exists(chain_dir / "meta.json")) throw InputError("no chain directory under " + f.fit_dir);
  const ChainOutput chain = read_chain(chain_dir);
  if (chain.pi.empty()) throw InputError("chain under " + f.fit_dir + " was stored without parameter draws");
  const fs::path out = g.out_dir(fs::path(f.fit_dir) / "summarize");
  fs::create_directories(out);
  ClusteringOptions co;
  co.cut = cut_from_string(f.cut);
  co.max_subjects = f.max_subjects;
  co.seed = chain.config.seed;
  const ClusteringResult clustering = cluster_chain(chain, co);
  PosteriorSummary s = relabel_and_summarize(chain, clustering.assignment, clustering.K);
  s.warnings.insert(s.warnings.begin(), clustering.warnings.begin(), clustering.warnings.end());
  write_outputs(s, out, f.svg);
  write_similarity(clustering.similarity, out / "similarity.bin");
  write_text_file(out / "dendrogram.csv", dendrogram_csv(clustering.dendrogram));
  write_text_file(out / "clustering.json", dump_json(clustering_json(clustering, co.cut)));
  Manifest m;
  m.command = "summarize";
  m.argv = argv;
  m.config = {{"cut", to_string(co.cut)}, {"max_subjects", f.max_subjects}};
  m.seed = chain.config.seed;
  for (const auto& e : fs::recursive_directory_iterator(chain_dir))
    if (e.is_regular_file()) m.inputs.push_back(e.path());
  std::sort(m.inputs.begin(), m.inputs.end());
  if (f.data) {
    const Config cfg = load_config(f.config);
    const Dataset ds = load_data(*f.data, cfg);
    write_text_file(out / "fit_report.json", dump_json(fit_report_to_json(make_fit_report(chain, s, ds))));
    m.inputs.emplace_back(*f.data);
  }
  if (g.timings) m.seconds = elapsed(start);
  write_manifest(out, m);
  std::cout << "summary: K=" << s.K << " from " << s.draws << " draws -> " << out.string() << '\n';
}

// compare ------------------------------------------------------------------------

struct CompareFlags {
  std::string truth;
  std::string data;
  std::optional<std::string> config;
  std::vector<std::string> fits;
};

struct CompareRow {
  std::string name;
  std::string model;
  int K = 0;
  Metrics metrics;
  std::optional<double> dic6;
};

bool is_truth_json(const json& j) { return j.contains("theta_global") && j.contains("global_cluster"); }

CompareRow compare_one(const fs::path& path, const Dataset& ds, const TruthFile& truth) {
  CompareRow row;
  row.name = path.generic_string();
  fs::path summary_path = path;
  if (fs::is_directory(path)) summary_path = path / "summary.json";
  if (!fs::exists(summary_path)) throw InputError("no summary at " + summary_path.string());
  json j;
  try {
    j = json::parse(read_text_file(summary_path));
  } catch (const json::exception& e) {
    throw InputError(summary_path.string() + " is not valid JSON: " + e.what());
  }
  if (is_truth_json(j)) {
    const TruthFile other = read_truth(summary_path);
    MetricInputs t, f;
    t.prob = truth.prob;
    t.assignment = truth.global_cluster;
    t.nu.assign(truth.truth.nu_flags.begin(), truth.truth.nu_flags.end());
    f.prob = other.prob;
    f.assignment = other.global_cluster;
    f.nu.assign(other.truth.nu_flags.begin(), other.truth.nu_flags.end());
    row.model = "truth";
    row.K = other.truth.K_global;
    row.metrics = metrics_mse_sensitivity(t, f);
    return row;
  }
  const PosteriorSummary s = summary_from_json(j);
  row.model = to_string(s.kind);
  row.K = s.K;
  row.metrics = score_fit(s, ds, truth);
  if (fs::is_directory(path) && fs::exists(path / "fit_report.json")) {
    const json report = json::parse(read_text_file(path / "fit_report.json"));
    if (report.contains("dic6") && report["dic6"].is_number()) row.dic6 = report["dic6"].get<double>();
  }
  return row;
}

void cmd_compare(const CompareFlags& f, const Globals& g, const std::vector<std::string>& argv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(f.config);
  const Dataset ds = load_data(f.data, cfg);
  if (!fs::exists(f.truth)) throw InputError("truth file not found: " + f.truth);
  const TruthFile truth = read_truth(f.truth);
  if (static_cast<int>(truth.global_cluster.size()) != ds.n || static_cast<int>(truth.prob.size()) != ds.n)
    throw ShapeError("truth file describes a different number of subjects than the data");
  std::vector<CompareRow> rows;
  for (const auto& fit : f.fits) rows.push_back(compare_one(fit, ds, truth));
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  std::string csv = "fit,model,K,sensitivity,mse_outcome,mse_nu,dic6\n";
  for (const auto& r : rows)
    csv += r.name + "," + r.model + "," + std::to_string(r.K) + "," + num(r.metrics.sensitivity) + "," +
           num(r.metrics.mse_outcome) + "," + num(r.metrics.mse_nu) + "," + (r.dic6 ? num(*r.dic6) : "NA") + "\n";
  const fs::path out = g.out_dir("srpc_out");
  fs::create_directories(out);
  write_text_file(out / "compare.csv", csv);
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto cell = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  std::cout << cell("fit", width) << "  " << cell("model", 6) << "  " << cell("K", 3) << "  " << cell("sens", 6) << "  "
            << cell("mse_y", 8) << "  " << cell("mse_nu", 8) << "  dic6\n";
  for (const auto& r : rows)
    std::cout << cell(r.name, width) << "  " << cell(r.model, 6) << "  " << cell(std::to_string(r.K), 3) << "  "
              << cell(fixed(r.metrics.sensitivity, 4), 6) << "  " << cell(fixed(r.metrics.mse_outcome, 5), 8) << "  "
              << cell(fixed(r.metrics.mse_nu, 5), 8) << "  " << (r.dic6 ? fixed(*r.dic6, 1) : "NA") << '\n';
  Manifest m;
  m.command = "compare";
  m.argv = argv;
  m.config = {{"file", config_json(cfg)}};
  m.inputs = {f.truth, f.data};
  for (const auto& fit : f.fits) {
    const fs::path p = fs::is_directory(fit) ? fs::path(fit) / "summary.json" : fs::path(fit);
    m.inputs.push_back(p);
    if (fs::exists(fs::path(fit) / "fit_report.json")) m.inputs.push_back(fs::path(fit) / "fit_report.json");
  }
  if (g.timings) m.seconds = elapsed(start);
  write_manifest(out, m);
}

// ppc ------------------------------------------------------------------------------

struct PpcCommand {
  std::string data;
  FitFlags flags;
  int permutations = 100;
  double train_fraction = 0.9;
};

void cmd_ppc(const PpcCommand& f, const Globals& g, const std::vector<std::string>& argv) {
  const auto start = std::chrono::steady_clock::now();
  const Config cfg = load_config(f.flags.config);
  const Dataset ds = load_data(f.data, cfg);
  FitOptions o = fit_options(f.flags, cfg, g);
  PpcOptions po;
  po.permutations = static_cast<int>(cfg.get_int("ppc.permutations").value_or(f.permutations));
  po.train_fraction = cfg.get_double("ppc.train_fraction").value_or(f.train_fraction);
  po.seed = o.chain.seed;
  const PpcReport r = run_ppc(ds, o, po);
  const fs::path out = g.out_dir("srpc_out");
  fs::create_directories(out);
  std::string csv = "permutation,train_deviance,test_deviance,difference\n";
  for (std::size_t k = 0; k < r.difference.size(); ++k)
    csv += std::to_string(k + 1) + "," + format_double(r.train_deviance[k]) + "," + format_double(r.test_deviance[k]) +
           "," + format_double(r.difference[k]) + "\n";
  write_text_file(out / "ppc.csv", csv);
  json report = ppc_report_to_json(r);
  report["model"] = to_string(o.kind);
  report["train_fraction"] = po.train_fraction;
  write_text_file(out / "ppc_report.json", dump_json(report));
  Manifest m;
  m.command = "ppc";
  m.argv = argv;
  m.config = {{"file", config_json(cfg)},
              {"options", options_json(o)},
              {"permutations", po.permutations},
              {"train_fraction", po.train_fraction}};
  m.seed = po.seed;
  m.inputs.emplace_back(f.data);
  if (f.flags.config) m.inputs.emplace_back(*f.flags.config);
  if (g.timings) m.seconds = elapsed(start);
  write_manifest(out, m);
  std::cout << "ppc " << to_string(o.kind) << ": " << r.difference.size() << " permutations, difference mean "
            << fixed(r.mean, 3) << " sd " << fixed(r.sd, 3) << " range [" << fixed(r.min, 3) << ", " << fixed(r.max, 3)
            << "]\n";
}

int run_cli(const std::vector<std::string>& args);

// replay -----------------------------------------------------------------------------

std::vector<std::string> without_out(const std::vector<std::string>& argv) {
  std::vector<std::string> kept;
  for (std::size_t k = 0; k < argv.size(); ++k) {
    if (argv[k] == "--out") {
      ++k;
      continue;
    }
    if (argv[k].rfind("--out=", 0) == 0) continue;
    kept.push_back(argv[k]);
  }
  return kept;
}

int cmd_replay(const std::string& manifest_path, const Globals& g) {
  json j;
  try {
    j = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw InputError(manifest_path + " is not valid JSON: " + e.what());
  }
  if (!j.contains("argv") || !j.contains("inputs")) throw InputError(manifest_path + " is not a run manifest");
  for (const auto& [path, hash] : j.at("inputs").items()) {
    if (!fs::exists(path)) throw InputError("replay input missing: " + path);
    if (file_hash(path) != hash.get<std::string>()) throw InputError("replay input changed since the run: " + path);
  }
  std::vector<std::string> args = j.at("argv").get<std::vector<std::string>>();
  if (g.out) {
    args = without_out(args);
    args.push_back("--out");
    args.push_back(*g.out);
  }
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Supervised robust profile clustering"};
  app.require_subcommand(1);
  Globals g;
  auto add_globals = [&](CLI::App* cmd) {
    cmd->add_option("--seed", g.seed, "master seed");
    cmd->add_option("--threads", g.threads, "worker threads (default: SRPC_THREADS or 1)");
    cmd->add_option("--out", g.out, "output directory");
    cmd->add_flag("--timings", g.timings, "record wall-clock time in the manifest");
  };

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "generate synthetic datasets with known truth");
  simulate->add_option("--config", sim.config, "TOML config with a [simulation] section");
  simulate->add_option("--replicates", sim.replicates, "number of datasets (numbered subdirectories)");
  add_globals(simulate);

  FitCommand fit;
  auto* fitc = app.add_subcommand("fit", "fit sRPC or sLCA to a dataset");
  fitc->add_option("data", fit.data, "data CSV")->required();
  add_fit_flags(fitc, fit.flags);
  fitc->add_flag("--svg", fit.svg, "also render modal-pattern and nu grids as SVG");
  add_globals(fitc);

  SummarizeFlags sum;
  auto* summarize = app.add_subcommand("summarize", "recompute the posterior summary from a stored chain");
  summarize->add_option("fit_dir", sum.fit_dir, "fit output directory")->required();
  summarize->add_option("--data", sum.data, "data CSV, needed for fit_report.json");
  summarize->add_option("--config", sum.config, "config with a [data] section");
  summarize->add_option("--cut", sum.cut, "dendrogram cut: gap, k=<K> or height=<h>")->capture_default_str();
  summarize->add_option("--max-subjects", sum.max_subjects, "subsample above this size")->capture_default_str();
  summarize->add_flag("--svg", sum.svg, "also render SVG grids");
  add_globals(summarize);

  CompareFlags cmp;
  auto* compare = app.add_subcommand("compare", "score fits against simulation truth");
  compare->add_option("--truth", cmp.truth, "truth.json from simulate")->required();
  compare->add_option("--data", cmp.data, "data CSV the fits were run on")->required();
  compare->add_option("--config", cmp.config, "config with a [data] section");
  compare->add_option("fits", cmp.fits, "fit directories or summary files")->required();
  add_globals(compare);

  PpcCommand ppc;
  auto* ppcc = app.add_subcommand("ppc", "train/test posterior predictive deviance check");
  ppcc->add_option("data", ppc.data, "data CSV")->required();
  add_fit_flags(ppcc, ppc.flags);
  ppcc->add_option("--permutations", ppc.permutations, "random splits")->capture_default_str();
  ppcc->add_option("--train-fraction", ppc.train_fraction, "share of subjects used for fitting")
      ->capture_default_str();
  add_globals(ppcc);

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json")->required();
  replay->add_option("--out", g.out, "write to this directory instead of the recorded one");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (simulate->parsed()) cmd_simulate(sim, g, args);
    else if (fitc->parsed()) cmd_fit(fit, g, args);
    else if (summarize->parsed()) cmd_summarize(sum, g, args);
    else if (compare->parsed()) cmd_compare(cmp, g, args);
    else if (ppcc->parsed()) cmd_ppc(ppc, g, args);
    else if (replay->parsed()) return cmd_replay(manifest, g);
  } catch (const SamplerFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSampler;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
