#include "srpc/simgen.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "srpc/config.hpp"
#include "srpc/errors.hpp"
#include "srpc/text.hpp"

namespace srpc {

using nlohmann::json;

void SimConfig::validate() const {
  if (S < 1 || n_s < 1 || p < 1) throw BadParameter("simulation needs S, n_s and p >= 1");
  if (d < 2) throw BadParameter("simulation needs d >= 2");
  if (K_global < 1 || K_local < 1) throw BadParameter("simulation needs at least one profile");
  if (!(local_fraction > 0.0 && local_fraction <= 1.0)) throw BadParameter("local_fraction must lie in (0, 1]");
  if (!(modal_mass >= 1.0 / d && modal_mass < 1.0)) throw BadParameter("modal_mass must lie in [1/d, 1)");
  if (q < 0) throw BadParameter("q must be non-negative");
  if (replicates < 1) throw BadParameter("replicates must be positive");
}

SimConfig sim_config_from(const Config& cfg) {
  SimConfig c;
  const std::string sec = "simulation.";
  if (auto v = cfg.get_int(sec + "S")) c.S = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "n_s")) c.n_s = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "p")) c.p = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "d")) c.d = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "k_global")) c.K_global = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "k_local")) c.K_local = static_cast<int>(*v);
  if (auto v = cfg.get_double(sec + "local_fraction")) c.local_fraction = *v;
  if (auto v = cfg.get_double(sec + "modal_mass")) c.modal_mass = *v;
  if (auto v = cfg.get_int(sec + "q")) c.q = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "replicates")) c.replicates = static_cast<int>(*v);
  if (auto v = cfg.get_int(sec + "seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_string(sec + "truth")) c.truth_path = *v;
  c.validate();
  return c;
}

void SimTruth::validate() const {
  const std::size_t D = static_cast<std::size_t>(p) * d;
  if (theta_global.size() != static_cast<std::size_t>(K_global) * D ||
      theta_local.size() != static_cast<std::size_t>(S) * K_local * D || nu_flags.size() != static_cast<std::size_t>(S) * p ||
      xi.size() != static_cast<std::size_t>(S + K_global + q - 1))
    throw ShapeError("truth tables do not match their dimensions");
  auto rows_ok = [&](const std::vector<double>& t) {
    for (std::size_t r = 0; r < t.size() / d; ++r) {
      double sum = 0.0;
      for (int k = 0; k < d; ++k) {
        if (!(t[r * d + k] >= 0.0)) return false;
        sum += t[r * d + k];
      }
      if (std::abs(sum - 1.0) > 1e-9) return false;
    }
    return true;
  };
  if (!rows_ok(theta_global) || !rows_ok(theta_local)) throw BadParameter("truth theta rows must be probability vectors");
  for (int s = 0; s < S; ++s) {
    bool any_local = false;
    for (int j = 0; j < p; ++j) any_local = any_local || nu_flags[static_cast<std::size_t>(s) * p + j] == 0;
    if (!any_local) throw BadParameter("every subpopulation needs at least one local variable");
  }
}

SimTruth default_truth_tables(const SimConfig& cfg) {
  cfg.validate();
  SimTruth t;
  t.S = cfg.S;
  t.p = cfg.p;
  t.d = cfg.d;
  t.K_global = cfg.K_global;
  t.K_local = cfg.K_local;
  t.q = cfg.q;
  const int d = cfg.d;
  const double rest = (1.0 - cfg.modal_mass) / (d - 1);
  auto fill_row = [&](double* row, int mode) {
    for (int r = 0; r < d; ++r) row[r] = r == mode ? cfg.modal_mass : rest;
  };
  // Modal level of global profile g at variable j is ((g + j) mod d) + 1 with
  // 1-based g and j; local profiles shift the same pattern by the subpopulation.
  t.theta_global.resize(static_cast<std::size_t>(cfg.K_global) * cfg.p * d);
  for (int g = 0; g < cfg.K_global; ++g)
    for (int j = 0; j < cfg.p; ++j)
      fill_row(&t.theta_global[(static_cast<std::size_t>(g) * cfg.p + j) * d], (g + 1 + j + 1) % d);
  t.theta_local.resize(static_cast<std::size_t>(cfg.S) * cfg.K_local * cfg.p * d);
  for (int s = 0; s < cfg.S; ++s)
    for (int l = 0; l < cfg.K_local; ++l)
      for (int j = 0; j < cfg.p; ++j)
        fill_row(&t.theta_local[((static_cast<std::size_t>(s) * cfg.K_local + l) * cfg.p + j) * d],
                 (l + 1 + j + 1 + s + 1) % d);
  // Subpopulation s deviates on a contiguous block of variables starting at s * block.
  const int block = std::max(1, static_cast<int>(std::lround(cfg.local_fraction * cfg.p)));
  t.nu_flags.assign(static_cast<std::size_t>(cfg.S) * cfg.p, 1);
  for (int s = 0; s < cfg.S; ++s)
    for (int k = 0; k < block; ++k) t.nu_flags[static_cast<std::size_t>(s) * cfg.p + (s * block + k) % cfg.p] = 0;
  const DesignLayout layout(Coding::CellMeans, cfg.S, cfg.K_global, cfg.q);
  t.xi.assign(layout.columns(), 0.0);
  for (int h = 0; h < cfg.K_global; ++h)
    t.xi[layout.cluster_column(h)] = cfg.K_global == 1 ? 0.0 : -0.8 + 1.6 * h / (cfg.K_global - 1);
  for (int s = 1; s < cfg.S; ++s) t.xi[layout.subpop_column(s)] = (s % 2 == 1 ? 0.2 : -0.2);
  for (int k = 0; k < cfg.q; ++k) t.xi[layout.demographic_column(k)] = 0.2;
  return t;
}

SimResult generate(const SimConfig& cfg, const SimTruth& truth, Rng& rng) {
  cfg.validate();
  truth.validate();
  if (truth.S != cfg.S || truth.p != cfg.p || truth.d != cfg.d || truth.q != cfg.q)
    throw ShapeError("truth dimensions differ from the simulation config");
  const int n = cfg.n(), p = cfg.p, d = cfg.d;
  SimResult sim;
  sim.truth = truth;
  Dataset& ds = sim.data;
  ds.n = n;
  ds.p = p;
  ds.S = cfg.S;
  ds.q = cfg.q;
  ds.d.assign(p, d);
  ds.x.resize(static_cast<std::size_t>(n) * p);
  ds.w.resize(static_cast<std::size_t>(n) * cfg.q);
  ds.level_codes.assign(p, {});
  for (int j = 0; j < p; ++j) {
    ds.exposure_names.push_back("x" + std::to_string(j + 1));
    for (int r = 0; r < d; ++r) ds.level_codes[j].push_back(r + 1);
  }
  for (int k = 0; k < cfg.q; ++k) ds.demographic_names.push_back("w" + std::to_string(k + 1));
  const DesignLayout layout(Coding::CellMeans, cfg.S, truth.K_global, cfg.q);
  std::vector<double> row(d);
  for (int i = 0; i < n; ++i) {
    const int s = i / cfg.n_s;
    ds.subpop.push_back(s);
    ds.ids.push_back("s" + std::to_string(i + 1));
    const int g = std::min(static_cast<int>(rng.uniform() * truth.K_global), truth.K_global - 1);
    const int l = std::min(static_cast<int>(rng.uniform() * truth.K_local), truth.K_local - 1);
    sim.global_cluster.push_back(g);
    sim.local_profile.push_back(l);
    for (int j = 0; j < p; ++j) {
      const double* theta = truth.nu_flags[static_cast<std::size_t>(s) * p + j]
                                ? &truth.theta_global[(static_cast<std::size_t>(g) * p + j) * d]
                                : &truth.theta_local[((static_cast<std::size_t>(s) * truth.K_local + l) * p + j) * d];
      ds.x[static_cast<std::size_t>(i) * p + j] = static_cast<int>(sample_categorical({theta, static_cast<std::size_t>(d)}, rng));
    }
    for (int k = 0; k < cfg.q; ++k) ds.w[static_cast<std::size_t>(i) * cfg.q + k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double eta = layout.base_predictor(ds, i, truth.xi) + layout.cluster_effect(g, truth.xi);
    const double prob = std_normal_cdf(eta);
    sim.prob.push_back(prob);
    ds.y.push_back(rng.uniform() < prob ? 1 : 0);
  }
  ds.validate();
  return sim;
}

SimResult generate(const SimConfig& cfg) {
  const SimTruth truth = cfg.truth_path ? truth_from_json_text(read_text_file(*cfg.truth_path)) : default_truth_tables(cfg);
  Rng rng(cfg.seed, 0x51);
  return generate(cfg, truth, rng);
}

namespace {

json tables_json(const SimTruth& t) {
  json j;
  j["S"] = t.S;
  j["p"] = t.p;
  j["d"] = t.d;
  j["k_global"] = t.K_global;
  j["k_local"] = t.K_local;
  j["q"] = t.q;
  j["theta_global"] = t.theta_global;
  j["theta_local"] = t.theta_local;
  j["nu_flags"] = t.nu_flags;
  j["xi"] = t.xi;
  j["xi_labels"] = DesignLayout(Coding::CellMeans, t.S, t.K_global, t.q).labels();
  return j;
}

SimTruth tables_from(const json& j) {
  SimTruth t;
  try {
    t.S = j.at("S").get<int>();
    t.p = j.at("p").get<int>();
    t.d = j.at("d").get<int>();
    t.K_global = j.at("k_global").get<int>();
    t.K_local = j.at("k_local").get<int>();
    t.q = j.value("q", 0);
    t.theta_global = j.at("theta_global").get<std::vector<double>>();
    t.theta_local = j.at("theta_local").get<std::vector<double>>();
    t.nu_flags = j.at("nu_flags").get<std::vector<int>>();
    t.xi = j.at("xi").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed truth file: ") + e.what());
  }
  t.validate();
  return t;
}

}  // namespace

std::string truth_to_json(const SimResult& sim, const SimConfig& cfg) {
  json j = tables_json(sim.truth);
  j["n_s"] = cfg.n_s;
  j["seed"] = cfg.seed;
  j["local_fraction"] = cfg.local_fraction;
  j["modal_mass"] = cfg.modal_mass;
  std::vector<int> g(sim.global_cluster), l(sim.local_profile);
  for (int& v : g) ++v;
  for (int& v : l) ++v;
  j["global_cluster"] = g;
  j["local_profile"] = l;
  j["prob"] = sim.prob;
  return j.dump(1) + "\n";
}

void write_truth(const SimResult& sim, const SimConfig& cfg, const std::filesystem::path& path) {
  write_text_file(path, truth_to_json(sim, cfg));
}

SimTruth truth_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("truth file is not valid JSON: ") + e.what());
  }
  return tables_from(j);
}

TruthFile read_truth(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  TruthFile tf;
  tf.truth = truth_from_json_text(text);
  const json j = json::parse(text);
  if (!j.contains("global_cluster") || !j.contains("prob"))
    throw InputError("truth file lacks per-subject assignments and probabilities");
  tf.global_cluster = j.at("global_cluster").get<std::vector<int>>();
  for (int& v : tf.global_cluster) --v;
  tf.prob = j.at("prob").get<std::vector<double>>();
  return tf;
}

}  // namespace srpc
