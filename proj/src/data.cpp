#include "srpc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "srpc/errors.hpp"
#include "srpc/text.hpp"

namespace srpc {

std::vector<int> Dataset::subpop_sizes() const {
  std::vector<int> sizes(S, 0);
  for (int s : subpop) ++sizes[s];
  return sizes;
}

void Dataset::validate() const {
  if (n <= 0 || p <= 0 || S <= 0) throw InputError("dataset must have subjects, variables and subpopulations");
  if (x.size() != static_cast<std::size_t>(n) * p || subpop.size() != static_cast<std::size_t>(n) ||
      y.size() != static_cast<std::size_t>(n) || w.size() != static_cast<std::size_t>(n) * q ||
      d.size() != static_cast<std::size_t>(p))
    throw ShapeError("dataset arrays do not match the declared dimensions");
  for (int j = 0; j < p; ++j)
    if (d[j] < 2) throw BadLevel("variable " + std::to_string(j + 1) + " has fewer than 2 levels");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      const int v = at(i, j);
      if (v < 0 || v >= d[j])
        throw BadLevel("level out of range at row " + std::to_string(i + 1) + ", variable " +
                       std::to_string(j + 1));
    }
    if (subpop[i] < 0 || subpop[i] >= S) throw BadSubpop("subpopulation index out of range");
    if (y[i] != 0 && y[i] != 1) throw InputError("outcome must be 0 or 1");
  }
  for (double v : w)
    if (!std::isfinite(v)) throw InputError("non-finite demographic value");
  const auto sizes = subpop_sizes();
  for (int s = 0; s < S; ++s)
    if (sizes[s] == 0) throw BadSubpop("subpopulation " + std::to_string(s + 1) + " has no subjects");
}

bool Dataset::operator==(const Dataset& o) const {
  return n == o.n && p == o.p && S == o.S && q == o.q && x == o.x && subpop == o.subpop &&
         y == o.y && w == o.w && d == o.d && ids == o.ids;
}

LevelLayout::LevelLayout(const std::vector<int>& levels) : d(levels), offset(levels.size()) {
  for (std::size_t j = 0; j < levels.size(); ++j) {
    offset[j] = total;
    total += levels[j];
    max_levels = std::max(max_levels, levels[j]);
  }
}

namespace {

bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "." || cell == "NaN";
}

bool parse_long(std::string_view s, long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<int> parse_levels_directive(std::string_view body) {
  std::vector<int> levels;
  for (const auto& tok : split(body, ',')) {
    long v = 0;
    if (!parse_long(trim(tok), v) || v < 2) throw BadLevel("bad levels directive");
    levels.push_back(static_cast<int>(v));
  }
  return levels;
}

bool has_prefix_index(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
  return std::all_of(name.begin() + prefix.size(), name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

Dataset parse_dataset(const std::string& text, const Schema& schema, const LoadOptions& options) {
  std::istringstream in(text);
  std::string line;
  std::vector<int> declared = schema.levels;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      std::string_view body = trim(view.substr(1));
      if (body.starts_with("levels=") && declared.empty())
        declared = parse_levels_directive(body.substr(7));
      continue;
    }
    auto cells = split(view, ',');
    for (auto& c : cells) c = std::string(unquote(trim(c)));
    if (header.empty())
      header = std::move(cells);
    else
      rows.push_back(std::move(cells));
  }
  if (header.empty()) throw InputError("dataset has no header row");

  auto find_col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int id_col = find_col(schema.id_column);
  const int s_col = find_col(schema.subpop_column);
  const int y_col = find_col(schema.outcome_column);
  if (s_col < 0) throw InputError("missing subpopulation column '" + schema.subpop_column + "'");
  if (y_col < 0) throw InputError("missing outcome column '" + schema.outcome_column + "'");

  std::vector<int> x_cols, w_cols;
  if (!schema.exposure_columns.empty()) {
    for (const auto& c : schema.exposure_columns) {
      const int k = find_col(c);
      if (k < 0) throw InputError("missing exposure column '" + c + "'");
      x_cols.push_back(k);
    }
  } else {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (has_prefix_index(header[k], schema.exposure_prefix)) x_cols.push_back(static_cast<int>(k));
  }
  if (!schema.demographic_columns.empty()) {
    for (const auto& c : schema.demographic_columns) {
      const int k = find_col(c);
      if (k < 0) throw InputError("missing demographic column '" + c + "'");
      w_cols.push_back(k);
    }
  } else {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (has_prefix_index(header[k], schema.demographic_prefix)) w_cols.push_back(static_cast<int>(k));
  }
  if (x_cols.empty()) throw InputError("no exposure columns found");
  if (!declared.empty() && declared.size() != x_cols.size())
    throw BadLevel("declared level count does not match the number of exposure columns");

  Dataset ds;
  ds.n = static_cast<int>(rows.size());
  ds.p = static_cast<int>(x_cols.size());
  ds.q = static_cast<int>(w_cols.size());
  if (ds.n == 0) throw InputError("dataset has no rows");
  for (int k : x_cols) ds.exposure_names.push_back(header[k]);
  for (int k : w_cols) ds.demographic_names.push_back(header[k]);

  std::vector<long> raw_x(static_cast<std::size_t>(ds.n) * ds.p);
  std::vector<long> raw_s(ds.n);
  ds.y.resize(ds.n);
  ds.w.resize(static_cast<std::size_t>(ds.n) * ds.q);
  ds.ids.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) {
    const auto& row = rows[i];
    // Rows and columns in error messages are 1-based data coordinates.
    auto cell = [&](int col) -> std::string_view {
      if (col >= static_cast<int>(row.size()) || is_missing(row[col]))
        throw MissingData(static_cast<std::size_t>(i) + 1, static_cast<std::size_t>(col) + 1);
      return row[col];
    };
    ds.ids[i] = id_col >= 0 ? std::string(cell(id_col)) : std::to_string(i + 1);
    long v = 0;
    if (!parse_long(cell(s_col), v) || v < 1)
      throw BadSubpop("subpopulation code must be a positive integer at row " + std::to_string(i + 1));
    raw_s[i] = v;
    if (!parse_long(cell(y_col), v) || (v != 0 && v != 1))
      throw InputError("outcome must be 0 or 1 at row " + std::to_string(i + 1));
    ds.y[i] = static_cast<int>(v);
    for (int j = 0; j < ds.p; ++j) {
      if (!parse_long(cell(x_cols[j]), v) || v < 1)
        throw BadLevel("exposure code must be a positive integer at row " + std::to_string(i + 1) +
                       ", column " + header[x_cols[j]]);
      raw_x[static_cast<std::size_t>(i) * ds.p + j] = v;
    }
    for (int k = 0; k < ds.q; ++k) {
      double dv = 0.0;
      if (!parse_double(cell(w_cols[k]), dv) || !std::isfinite(dv))
        throw InputError("demographic value is not a number at row " + std::to_string(i + 1));
      ds.w[static_cast<std::size_t>(i) * ds.q + k] = dv;
    }
  }

  // Subpopulations must be exactly 1..S.
  ds.S = static_cast<int>(*std::max_element(raw_s.begin(), raw_s.end()));
  std::vector<char> seen(ds.S, 0);
  for (long s : raw_s) seen[s - 1] = 1;
  for (int s = 0; s < ds.S; ++s)
    if (!seen[s]) throw BadSubpop("subpopulation " + std::to_string(s + 1) + " never appears");
  ds.subpop.resize(ds.n);
  for (int i = 0; i < ds.n; ++i) ds.subpop[i] = static_cast<int>(raw_s[i] - 1);

  ds.x.resize(raw_x.size());
  ds.d.resize(ds.p);
  ds.level_codes.resize(ds.p);
  for (int j = 0; j < ds.p; ++j) {
    if (!declared.empty()) {
      ds.d[j] = declared[j];
      for (int r = 0; r < ds.d[j]; ++r) ds.level_codes[j].push_back(r + 1);
      for (int i = 0; i < ds.n; ++i) {
        const long v = raw_x[static_cast<std::size_t>(i) * ds.p + j];
        if (v > ds.d[j])
          throw BadLevel("code " + std::to_string(v) + " exceeds declared levels of " + header[x_cols[j]]);
        ds.x[static_cast<std::size_t>(i) * ds.p + j] = static_cast<int>(v - 1);
      }
      continue;
    }
    std::set<long> codes;
    for (int i = 0; i < ds.n; ++i) codes.insert(raw_x[static_cast<std::size_t>(i) * ds.p + j]);
    if (codes.size() < 2) throw BadLevel("variable " + header[x_cols[j]] + " has fewer than 2 observed levels");
    std::map<long, int> remap;
    for (long c : codes) {
      remap.emplace(c, static_cast<int>(remap.size()));
      ds.level_codes[j].push_back(c);
    }
    ds.d[j] = static_cast<int>(codes.size());
    for (int i = 0; i < ds.n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(i) * ds.p + j;
      ds.x[idx] = remap.at(raw_x[idx]);
    }
  }

  if (options.normalize_demographics) {
    for (int k = 0; k < ds.q; ++k) {
      bool binary = true;
      double mean = 0.0;
      for (int i = 0; i < ds.n; ++i) {
        const double v = ds.dem(i, k);
        binary = binary && (v == 0.0 || v == 1.0);
        mean += v;
      }
      if (binary) continue;
      mean /= ds.n;
      double ss = 0.0;
      for (int i = 0; i < ds.n; ++i) ss += (ds.dem(i, k) - mean) * (ds.dem(i, k) - mean);
      const double sd = ds.n > 1 ? std::sqrt(ss / (ds.n - 1)) : 0.0;
      for (int i = 0; i < ds.n; ++i) {
        double& v = ds.w[static_cast<std::size_t>(i) * ds.q + k];
        v = sd > 0.0 ? (v - mean) / sd : v - mean;
      }
    }
  }
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, const Schema& schema, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema, options);
}

std::string format_dataset(const Dataset& ds) {
  std::string out = "# levels=";
  for (int j = 0; j < ds.p; ++j) out += (j ? "," : "") + std::to_string(ds.d[j]);
  out += "\nid,subpop,y";
  for (int j = 0; j < ds.p; ++j) out += ",x" + std::to_string(j + 1);
  for (int k = 0; k < ds.q; ++k) out += ",w" + std::to_string(k + 1);
  out += '\n';
  for (int i = 0; i < ds.n; ++i) {
    out += ds.ids.empty() ? std::to_string(i + 1) : ds.ids[i];
    out += ',' + std::to_string(ds.subpop[i] + 1) + ',' + std::to_string(ds.y[i]);
    for (int j = 0; j < ds.p; ++j) out += ',' + std::to_string(ds.at(i, j) + 1);
    for (int k = 0; k < ds.q; ++k) out += ',' + format_double(ds.dem(i, k));
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_text_file(path, format_dataset(ds));
}

std::string to_string(Coding c) { return c == Coding::CellMeans ? "cell-means" : "reference-cell"; }

Coding coding_from_string(const std::string& s) {
  if (s == "cell-means" || s == "cell") return Coding::CellMeans;
  if (s == "reference-cell" || s == "reference") return Coding::ReferenceCell;
  throw ConfigError("unknown coding '" + s + "'");
}

int DesignLayout::cluster_column(int h) const {
  if (coding == Coding::CellMeans) return h;
  return h == 0 ? -1 : S + h - 1;
}

int DesignLayout::subpop_column(int s) const {
  if (s == 0) return -1;
  return coding == Coding::CellMeans ? K + s - 1 : s;
}

int DesignLayout::demographic_column(int k) const { return S + K - 1 + k; }

std::vector<std::string> DesignLayout::labels(const std::vector<std::string>& demographic_names) const {
  std::vector<std::string> out(columns());
  if (coding == Coding::ReferenceCell) out[0] = "intercept";
  for (int h = 0; h < K; ++h)
    if (cluster_column(h) >= 0) out[cluster_column(h)] = "cluster" + std::to_string(h + 1);
  for (int s = 1; s < S; ++s) out[subpop_column(s)] = "subpop" + std::to_string(s + 1);
  for (int k = 0; k < q; ++k)
    out[demographic_column(k)] =
        k < static_cast<int>(demographic_names.size()) ? demographic_names[k] : "w" + std::to_string(k + 1);
  return out;
}

double DesignLayout::base_predictor(const Dataset& ds, int i, std::span<const double> xi) const {
  double eta = has_intercept() ? xi[0] : 0.0;
  const int sc = subpop_column(ds.subpop[i]);
  if (sc >= 0) eta += xi[sc];
  for (int k = 0; k < q; ++k) eta += ds.dem(i, k) * xi[demographic_column(k)];
  return eta;
}

void fill_design_matrix(const Dataset& ds, std::span<const int> C, const DesignLayout& layout,
                        Eigen::MatrixXd& W) {
  W.setZero();
  for (int i = 0; i < ds.n; ++i) {
    if (layout.has_intercept()) W(i, 0) = 1.0;
    const int sc = layout.subpop_column(ds.subpop[i]);
    if (sc >= 0) W(i, sc) = 1.0;
    const int cc = layout.cluster_column(C[i]);
    if (cc >= 0) W(i, cc) = 1.0;
    for (int k = 0; k < layout.q; ++k) W(i, layout.demographic_column(k)) = ds.dem(i, k);
  }
}

DesignMatrix build_design_matrix(const Dataset& ds, std::span<const int> C, int K, Coding coding) {
  if (C.size() != static_cast<std::size_t>(ds.n)) throw ShapeError("assignment length differs from n");
  for (int c : C)
    if (c < 0 || c >= K) throw ShapeError("cluster index out of range");
  DesignMatrix dm;
  dm.layout = DesignLayout(coding, ds.S, K, ds.q);
  dm.W = Eigen::MatrixXd::Zero(ds.n, dm.layout.columns());
  fill_design_matrix(ds, C, dm.layout, dm.W);
  dm.column_labels = dm.layout.labels(ds.demographic_names);
  for (Eigen::Index c = 0; c < dm.W.cols(); ++c)
    if (dm.W.col(c).cwiseAbs().maxCoeff() == 0.0)
      dm.warnings.push_back("design column '" + dm.column_labels[c] + "' is all zero (rank deficient)");
  return dm;
}

int default_global_cap(int n) { return std::clamp((n + 19) / 20, 1, 50); }

int default_local_cap(const std::vector<int>& subpop_sizes) {
  const int smallest = subpop_sizes.empty() ? 1 : *std::min_element(subpop_sizes.begin(), subpop_sizes.end());
  return std::clamp((smallest + 19) / 20, 1, 50);
}

void Hyperparameters::validate() const {
  if (K0 < 1 || Ks < 1) throw BadParameter("cluster caps must be at least 1");
  for (int k : local_k)
    if (k < 1 || k > Ks) throw BadParameter("per-subpopulation local caps must lie in [1, Ks]");
  if (!(global_concentration() > 0.0) || !(local_concentration() > 0.0) || !(eta > 0.0) ||
      !(a_beta > 0.0) || !(b_beta > 0.0) || !(a_sigma > 0.0) || !(b_sigma > 0.0))
    throw BadParameter("all concentrations and prior constants must be positive");
  for (double v : sigma0)
    if (!(v > 0.0)) throw BadParameter("prior variances must be positive");
}

Hyperparameters Hyperparameters::resolved(const Dataset& ds) const {
  Hyperparameters h = *this;
  if (h.K0 <= 0) h.K0 = default_global_cap(ds.n);
  if (h.Ks <= 0) {
    h.Ks = h.local_k.empty() ? default_local_cap(ds.subpop_sizes())
                             : *std::max_element(h.local_k.begin(), h.local_k.end());
  }
  if (!h.local_k.empty() && static_cast<int>(h.local_k.size()) != ds.S)
    throw BadParameter("per-subpopulation local caps must have one entry per subpopulation");
  h.validate();
  return h;
}

void ChainConfig::validate() const {
  if (n_iter < 1) throw BadParameter("n_iter must be positive");
  if (burn_in < 0 || burn_in >= n_iter) throw BadParameter("burn_in must lie in [0, n_iter)");
  if (thin < 1) throw BadParameter("thin must be at least 1");
  if (global_warmup < 0) throw BadParameter("global_warmup must be non-negative");
}

}  // namespace srpc
