#include "srpc/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <functional>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "srpc/errors.hpp"
#include "srpc/text.hpp"

namespace srpc {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_block(const ParamSummary& p) {
  return json{{"mean", p.mean}, {"median", p.median}, {"lower", p.lower}, {"upper", p.upper}};
}

std::string level_label(int j, int r) { return "x" + std::to_string(j + 1) + "_r" + std::to_string(r + 1); }

std::vector<std::string> theta_columns(const std::string& prefix, const std::vector<std::string>& groups,
                                       const std::vector<int>& levels) {
  std::vector<std::string> out;
  for (const auto& g : groups)
    for (std::size_t j = 0; j < levels.size(); ++j)
      for (int r = 0; r < levels[j]; ++r) out.push_back(prefix + g + "_" + level_label(static_cast<int>(j), r));
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, int count) {
  std::vector<std::string> out;
  for (int k = 0; k < count; ++k) out.push_back(prefix + std::to_string(k + 1));
  return out;
}

std::vector<std::string> local_groups(int S, int Ks) {
  std::vector<std::string> out;
  for (int s = 0; s < S; ++s)
    for (int l = 0; l < Ks; ++l) out.push_back("s" + std::to_string(s + 1) + "l" + std::to_string(l + 1));
  return out;
}

std::vector<std::string> nu_columns(int S, int p) {
  std::vector<std::string> out;
  for (int s = 0; s < S; ++s)
    for (int j = 0; j < p; ++j) out.push_back("nu_s" + std::to_string(s + 1) + "_x" + std::to_string(j + 1));
  return out;
}

template <class T>
std::string int_csv(const std::vector<std::string>& columns, const std::vector<T>& values, long rows, int offset) {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += '\n';
  const std::size_t cols = columns.size();
  for (long r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ',';
      out += std::to_string(static_cast<long>(values[r * cols + c]) + offset);
    }
    out += '\n';
  }
  return out;
}

std::vector<double> read_block(const std::filesystem::path& path, long rows, std::size_t width) {
  std::vector<std::string> header;
  const auto table = parse_numeric_csv(read_text_file(path), &header);
  if (static_cast<long>(table.size()) != rows || header.size() != width)
    throw ShapeError("block " + path.filename().string() + " has unexpected dimensions");
  std::vector<double> out;
  out.reserve(rows * width);
  for (const auto& row : table) {
    if (row.size() != width) throw ShapeError("ragged row in " + path.filename().string());
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace

std::string dump_json(const json& j) { return j.dump(1) + "\n"; }

json to_json(const Hyperparameters& h) {
  return json{{"K0", h.K0},
              {"Ks", h.Ks},
              {"local_k", h.local_k},
              {"alpha0", optional_json(h.alpha0)},
              {"alpha_s", optional_json(h.alpha_s)},
              {"eta", h.eta},
              {"a_beta", h.a_beta},
              {"b_beta", h.b_beta},
              {"a_sigma", h.a_sigma},
              {"b_sigma", h.b_sigma},
              {"mu0", h.mu0},
              {"sigma0", h.sigma0}};
}

Hyperparameters hyper_from_json(const json& j) {
  Hyperparameters h;
  h.K0 = j.value("K0", 0);
  h.Ks = j.value("Ks", 0);
  h.local_k = j.value("local_k", std::vector<int>{});
  if (j.contains("alpha0") && !j["alpha0"].is_null()) h.alpha0 = j["alpha0"].get<double>();
  if (j.contains("alpha_s") && !j["alpha_s"].is_null()) h.alpha_s = j["alpha_s"].get<double>();
  h.eta = j.value("eta", 1.0);
  h.a_beta = j.value("a_beta", 1.0);
  h.b_beta = j.value("b_beta", 1.0);
  h.a_sigma = j.value("a_sigma", 2.5);
  h.b_sigma = j.value("b_sigma", 2.5);
  h.mu0 = j.value("mu0", std::vector<double>{});
  h.sigma0 = j.value("sigma0", std::vector<double>{});
  return h;
}

json to_json(const ChainConfig& c) {
  return json{{"n_iter", c.n_iter},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"seed", c.seed},
              {"fixed_K0", c.fixed_K0 ? json(*c.fixed_K0) : json(nullptr)},
              {"coding", to_string(c.coding)},
              {"keep_latent", c.keep_latent},
              {"keep_parameters", c.keep_parameters},
              {"force_global", c.force_global},
              {"fixed_xi", c.fixed_xi},
              {"global_warmup", c.global_warmup},
              {"progress_every", c.progress_every}};
}

ChainConfig chain_config_from_json(const json& j) {
  ChainConfig c;
  c.n_iter = j.value("n_iter", c.n_iter);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  if (j.contains("fixed_K0") && !j["fixed_K0"].is_null()) c.fixed_K0 = j["fixed_K0"].get<int>();
  c.coding = coding_from_string(j.value("coding", std::string("cell")));
  c.keep_latent = j.value("keep_latent", false);
  c.keep_parameters = j.value("keep_parameters", true);
  c.force_global = j.value("force_global", false);
  c.fixed_xi = j.value("fixed_xi", std::vector<double>{});
  c.global_warmup = j.value("global_warmup", 0L);
  c.progress_every = j.value("progress_every", 0L);
  return c;
}

void write_chain(const ChainOutput& chain, const std::filesystem::path& dir) {
  const auto samples = dir / "samples";
  std::filesystem::create_directories(samples);
  const long T = chain.draws;
  write_text_file(samples / "C.csv", int_csv(numbered("C", chain.n), chain.C, T, 1));
  const bool rpc = chain.kind == ModelKind::SupervisedRpc;
  if (!chain.pi.empty()) {
    write_text_file(samples / "pi.csv", format_matrix_csv(numbered("pi", chain.K0), chain.pi, T));
    write_text_file(samples / "theta0.csv",
                    format_matrix_csv(theta_columns("theta0_", numbered("h", chain.K0), chain.levels), chain.theta0, T));
    write_text_file(samples / "xi.csv", format_matrix_csv(chain.xi_labels, chain.xi, T));
    if (rpc) {
      std::vector<std::string> lambda_cols;
      for (const auto& g : local_groups(chain.S, chain.Ks)) lambda_cols.push_back("lambda_" + g);
      write_text_file(samples / "lambda.csv", format_matrix_csv(lambda_cols, chain.lambda, T));
      write_text_file(samples / "theta1.csv",
                      format_matrix_csv(theta_columns("theta1_", local_groups(chain.S, chain.Ks), chain.levels),
                                        chain.theta1, T));
      write_text_file(samples / "nu.csv", format_matrix_csv(nu_columns(chain.S, chain.p), chain.nu, T));
      write_text_file(samples / "beta.csv", format_matrix_csv(numbered("beta", chain.S), chain.beta, T));
    }
  }
  if (rpc && !chain.G_mean.empty()) {
    std::vector<std::string> cols = numbered("x", chain.p);
    write_text_file(samples / "G_mean.csv", format_matrix_csv(cols, chain.G_mean, chain.n));
  }
  if (!chain.Z.empty()) write_text_file(samples / "Z.csv", format_matrix_csv(numbered("Z", chain.n), chain.Z, T));
  if (!chain.G.empty()) {
    std::vector<std::string> cols;
    for (int i = 0; i < chain.n; ++i)
      for (int j = 0; j < chain.p; ++j) cols.push_back("i" + std::to_string(i + 1) + "_x" + std::to_string(j + 1));
    write_text_file(samples / "G.csv", int_csv(cols, chain.G, T, 0));
    write_text_file(samples / "L.csv", int_csv(cols, chain.L, T, 1));
  }

  std::string ll = "iteration,conditional,probit,mixture\n";
  const ChainConfig& c = chain.config;
  const long iters = static_cast<long>(chain.loglik_conditional.size());
  long retained_index = 0;
  for (long t = 0; t < iters; ++t) {
    const long within = t % c.n_iter + 1;
    const bool retained = within > c.burn_in && (within - c.burn_in) % c.thin == 0;
    ll += std::to_string(t + 1) + "," + format_double(chain.loglik_conditional[t]) + "," +
          format_double(chain.loglik_probit[t]) + "," +
          (retained && retained_index < static_cast<long>(chain.loglik_mixture.size())
               ? format_double(chain.loglik_mixture[retained_index++])
               : std::string("nan")) +
          "\n";
  }
  write_text_file(dir / "loglik.csv", ll);

  json meta{{"model", to_string(chain.kind)},
            {"n", chain.n},
            {"p", chain.p},
            {"S", chain.S},
            {"q", chain.q},
            {"K0", chain.K0},
            {"Ks", chain.Ks},
            {"local_k", chain.local_k},
            {"levels", chain.levels},
            {"coding", to_string(chain.coding)},
            {"xi_labels", chain.xi_labels},
            {"hyper", to_json(chain.hyper)},
            {"config", to_json(chain.config)},
            {"mu0", chain.mu0},
            {"sigma0", chain.sigma0},
            {"draws", chain.draws},
            {"has_parameters", !chain.pi.empty()},
            {"has_latent", !chain.Z.empty()}};
  write_text_file(dir / "meta.json", dump_json(meta));
}

ChainOutput read_chain(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.json")) throw InputError("no chain found in " + dir.string());
  json meta;
  try {
    meta = json::parse(read_text_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed meta.json: ") + e.what());
  }
  ChainOutput c;
  c.kind = model_from_string(meta.at("model").get<std::string>());
  c.n = meta.at("n");
  c.p = meta.at("p");
  c.S = meta.at("S");
  c.q = meta.at("q");
  c.K0 = meta.at("K0");
  c.Ks = meta.at("Ks");
  c.local_k = meta.at("local_k").get<std::vector<int>>();
  c.levels = meta.at("levels").get<std::vector<int>>();
  c.coding = coding_from_string(meta.at("coding").get<std::string>());
  c.xi_labels = meta.at("xi_labels").get<std::vector<std::string>>();
  c.hyper = hyper_from_json(meta.at("hyper"));
  c.config = chain_config_from_json(meta.at("config"));
  c.mu0 = meta.at("mu0").get<std::vector<double>>();
  c.sigma0 = meta.at("sigma0").get<std::vector<double>>();
  c.draws = meta.at("draws");
  const auto samples = dir / "samples";
  const long T = c.draws;
  for (double v : read_block(samples / "C.csv", T, c.n)) c.C.push_back(static_cast<int>(v) - 1);
  int D = 0;
  for (int d : c.levels) D += d;
  const bool rpc = c.kind == ModelKind::SupervisedRpc;
  if (meta.value("has_parameters", true)) {
    c.pi = read_block(samples / "pi.csv", T, c.K0);
    c.theta0 = read_block(samples / "theta0.csv", T, static_cast<std::size_t>(c.K0) * D);
    c.xi = read_block(samples / "xi.csv", T, c.xi_labels.size());
    if (rpc) {
      c.lambda = read_block(samples / "lambda.csv", T, static_cast<std::size_t>(c.S) * c.Ks);
      c.theta1 = read_block(samples / "theta1.csv", T, static_cast<std::size_t>(c.S) * c.Ks * D);
      c.nu = read_block(samples / "nu.csv", T, static_cast<std::size_t>(c.S) * c.p);
      c.beta = read_block(samples / "beta.csv", T, c.S);
    }
  }
  if (rpc && std::filesystem::exists(samples / "G_mean.csv")) c.G_mean = read_block(samples / "G_mean.csv", c.n, c.p);
  if (meta.value("has_latent", false)) {
    c.Z = read_block(samples / "Z.csv", T, c.n);
    if (rpc) {
      for (double v : read_block(samples / "G.csv", T, static_cast<std::size_t>(c.n) * c.p))
        c.G.push_back(static_cast<std::uint8_t>(v));
      for (double v : read_block(samples / "L.csv", T, static_cast<std::size_t>(c.n) * c.p))
        c.L.push_back(static_cast<int>(v) - 1);
    }
  }
  std::vector<std::string> header;
  const auto ll = parse_numeric_csv(read_text_file(dir / "loglik.csv"), &header);
  for (const auto& row : ll) {
    if (row.size() != 4) throw ShapeError("loglik.csv must have 4 columns");
    c.loglik_conditional.push_back(row[1]);
    c.loglik_probit.push_back(row[2]);
    if (!std::isnan(row[3])) c.loglik_mixture.push_back(row[3]);
  }
  return c;
}

json summary_to_json(const PosteriorSummary& s) {
  std::vector<int> assignment(s.assignment);
  for (int& a : assignment) ++a;
  json modal = json::array();
  for (const auto& e : s.modal.entries)
    modal.push_back({{"cluster", e.cluster + 1}, {"variable", e.variable + 1}, {"level", e.level},
                     {"probability", e.probability}});
  json j{{"model", to_string(s.kind)},
         {"n", s.n},
         {"p", s.p},
         {"S", s.S},
         {"q", s.q},
         {"K", s.K},
         {"levels", s.levels},
         {"coding", to_string(s.coding)},
         {"draws", s.draws},
         {"assignment", assignment},
         {"cluster_sizes", s.cluster_sizes},
         {"pi", summary_block(s.pi)},
         {"theta0", summary_block(s.theta0)},
         {"xi", summary_block(s.xi)},
         {"xi_labels", s.xi_labels},
         {"prob_positive", s.prob_positive},
         {"modal_patterns", modal},
         {"surplus_draws", s.surplus_draws},
         {"warnings", s.warnings},
         {"modal_warnings", s.modal.warnings}};
  if (s.kind == ModelKind::SupervisedRpc) {
    j["Ks"] = s.Ks;
    j["nu"] = summary_block(s.nu);
    j["beta"] = summary_block(s.beta);
    j["lambda"] = summary_block(s.lambda);
    j["theta1"] = summary_block(s.theta1);
    j["local_marginal"] = summary_block(s.local_marginal);
  }
  return j;
}

namespace {

std::vector<double> nullable_doubles(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.is_null() ? std::nan("") : v.get<double>());
  return out;
}

ParamSummary block_from(const json& j, const char* key) {
  ParamSummary p;
  if (!j.contains(key)) return p;
  const json& b = j.at(key);
  p.mean = nullable_doubles(b.at("mean"));
  p.median = nullable_doubles(b.at("median"));
  p.lower = nullable_doubles(b.at("lower"));
  p.upper = nullable_doubles(b.at("upper"));
  return p;
}

}  // namespace

PosteriorSummary summary_from_json(const json& j) {
  PosteriorSummary s;
  try {
    s.kind = model_from_string(j.at("model").get<std::string>());
    s.n = j.at("n").get<int>();
    s.p = j.at("p").get<int>();
    s.S = j.at("S").get<int>();
    s.q = j.at("q").get<int>();
    s.K = j.at("K").get<int>();
    s.Ks = j.value("Ks", 0);
    s.levels = j.at("levels").get<std::vector<int>>();
    s.coding = coding_from_string(j.at("coding").get<std::string>());
    s.draws = j.at("draws").get<long>();
    s.assignment = j.at("assignment").get<std::vector<int>>();
    for (int& a : s.assignment) --a;
    s.cluster_sizes = j.at("cluster_sizes").get<std::vector<int>>();
    s.xi_labels = j.at("xi_labels").get<std::vector<std::string>>();
    s.pi = block_from(j, "pi");
    s.theta0 = block_from(j, "theta0");
    s.xi = block_from(j, "xi");
    s.nu = block_from(j, "nu");
    s.beta = block_from(j, "beta");
    s.lambda = block_from(j, "lambda");
    s.theta1 = block_from(j, "theta1");
    s.local_marginal = block_from(j, "local_marginal");
    s.prob_positive = nullable_doubles(j.at("prob_positive"));
    s.surplus_draws = j.value("surplus_draws", 0L);
    s.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed summary: ") + e.what());
  }
  if (static_cast<int>(s.assignment.size()) != s.n) throw ShapeError("summary assignment length differs from n");
  return s;
}

PosteriorSummary read_summary(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + " is not valid JSON: " + e.what());
  }
  return summary_from_json(j);
}

std::string modal_patterns_csv(const PosteriorSummary& s) {
  std::string out = "cluster,variable,level,probability\n";
  for (const auto& e : s.modal.entries)
    out += std::to_string(e.cluster + 1) + "," + std::to_string(e.variable + 1) + "," + std::to_string(e.level) + "," +
           format_double(e.probability) + "\n";
  return out;
}

void write_summary(const PosteriorSummary& s, const std::filesystem::path& dir) {
  write_text_file(dir / "summary.json", dump_json(summary_to_json(s)));
  write_text_file(dir / "modal_patterns.csv", modal_patterns_csv(s));
  if (s.kind == ModelKind::SupervisedRpc && !s.nu.median.empty()) {
    std::string grid = "subpop";
    for (int j = 0; j < s.p; ++j) grid += ",x" + std::to_string(j + 1);
    grid += '\n';
    for (int sp = 0; sp < s.S; ++sp) {
      grid += std::to_string(sp + 1);
      for (int j = 0; j < s.p; ++j) grid += "," + format_double(s.nu.median[static_cast<std::size_t>(sp) * s.p + j]);
      grid += '\n';
    }
    write_text_file(dir / "nu_grid.csv", grid);
  }
}

json fit_report_to_json(const FitReport& r) {
  return json{{"dic_form", to_string(r.form)},
              {"mean_deviance", r.mean_deviance},
              {"plugin_deviance", r.plugin_deviance},
              {"dic6", r.dic6},
              {"mixture", {{"mean_deviance", r.mixture_mean_deviance},
                           {"plugin_deviance", r.mixture_plugin_deviance},
                           {"dic6", r.mixture_dic6}}}};
}

json ppc_report_to_json(const PpcReport& r) {
  return json{{"permutations", r.difference.size()},
              {"train_deviance", r.train_deviance},
              {"test_deviance", r.test_deviance},
              {"difference", r.difference},
              {"min", r.min},
              {"max", r.max},
              {"mean", r.mean},
              {"sd", r.sd}};
}

void write_similarity(const SimilarityMatrix& sim, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "SIMILARITY float32 n=" << sim.n << "\n";
  std::vector<char> bytes(sim.values.size() * 4);
  for (std::size_t k = 0; k < sim.values.size(); ++k) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(sim.values[k]);
    for (int b = 0; b < 4; ++b) bytes[k * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

SimilarityMatrix read_similarity(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  const std::string prefix = "SIMILARITY float32 n=";
  if (header.rfind(prefix, 0) != 0) throw InputError("not a similarity file: " + path.string());
  SimilarityMatrix sim;
  sim.n = std::stoi(header.substr(prefix.size()));
  const std::size_t count = static_cast<std::size_t>(sim.n) * sim.n;
  std::vector<unsigned char> bytes(count * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw ShapeError("similarity file truncated");
  sim.values.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[k * 4 + b]) << (8 * b);
    sim.values[k] = std::bit_cast<float>(bits);
  }
  return sim;
}

namespace {

std::string colour(double v) {
  // White to dark blue.
  if (std::isnan(v)) return "#dddddd";
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 215 * v));
  const int g = static_cast<int>(std::lround(255 - 175 * v));
  const int b = static_cast<int>(std::lround(255 - 95 * v));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string grid_svg(const std::string& title, int rows, int cols, const std::vector<std::string>& row_labels,
                     const std::function<double(int, int)>& value, const std::function<std::string(int, int)>& text) {
  const int cell = 18, left = 80, top = 40;
  const int width = left + cols * cell + 20, height = top + rows * cell + 30;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << title << "</text>\n";
  for (int c = 0; c < cols; ++c)
    if (c % 5 == 0 || cols <= 20)
      out << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top - 4 << "\" text-anchor=\"middle\">" << c + 1
          << "</text>\n";
  for (int r = 0; r < rows; ++r) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + r * cell + cell * 2 / 3 << "\" text-anchor=\"end\">"
        << row_labels[r] << "</text>\n";
    for (int c = 0; c < cols; ++c) {
      out << "<rect x=\"" << left + c * cell << "\" y=\"" << top + r * cell << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << colour(value(r, c)) << "\" stroke=\"#ffffff\"/>";
      const std::string t = text(r, c);
      if (!t.empty())
        out << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top + r * cell + cell * 2 / 3
            << "\" text-anchor=\"middle\">" << t << "</text>";
      out << "\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::string modal_pattern_svg(const PosteriorSummary& s) {
  std::vector<std::string> labels;
  for (int h = 0; h < s.K; ++h) labels.push_back("cluster " + std::to_string(h + 1));
  auto entry = [&](int r, int c) -> const ModalEntry& { return s.modal.entries[static_cast<std::size_t>(r) * s.p + c]; };
  return grid_svg(
      "Modal levels by global cluster", s.K, s.p, labels, [&](int r, int c) { return entry(r, c).probability; },
      [&](int r, int c) { return entry(r, c).level > 0 ? std::to_string(entry(r, c).level) : std::string(); });
}

std::string nu_grid_svg(const PosteriorSummary& s) {
  std::vector<std::string> labels;
  for (int sp = 0; sp < s.S; ++sp) labels.push_back("subpop " + std::to_string(sp + 1));
  return grid_svg(
      "Posterior median nu", s.S, s.p, labels,
      [&](int r, int c) { return s.nu.median.empty() ? std::nan("") : s.nu.median[static_cast<std::size_t>(r) * s.p + c]; },
      [](int, int) { return std::string(); });
}

}  // namespace srpc
