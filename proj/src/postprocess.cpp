#include "srpc/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "srpc/errors.hpp"
#include "srpc/text.hpp"

namespace srpc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t condensed_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 + (j - i - 1);
}

// Subject-major label traces for fast pairwise comparison.
std::vector<std::uint16_t> transpose_traces(std::span<const int> C, long draws, int n, std::span<const int> subjects) {
  std::vector<std::uint16_t> out(subjects.size() * static_cast<std::size_t>(draws));
  for (long t = 0; t < draws; ++t)
    for (std::size_t a = 0; a < subjects.size(); ++a)
      out[a * draws + t] = static_cast<std::uint16_t>(C[static_cast<std::size_t>(t) * n + subjects[a]]);
  return out;
}

long count_equal(const std::uint16_t* a, const std::uint16_t* b, long len) {
  long c = 0;
  for (long t = 0; t < len; ++t) c += a[t] == b[t];
  return c;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

// Relabel groups 0..K-1 by decreasing size, ties by first member.
std::vector<int> order_by_size(const std::vector<int>& labels) {
  int K = 0;
  for (int l : labels) K = std::max(K, l + 1);
  std::vector<int> size(K, 0), first(K, std::numeric_limits<int>::max());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++size[labels[i]];
    first[labels[i]] = std::min(first[labels[i]], static_cast<int>(i));
  }
  std::vector<int> order;
  for (int k = 0; k < K; ++k)
    if (size[k] > 0) order.push_back(k);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return size[a] != size[b] ? size[a] > size[b] : first[a] < first[b];
  });
  std::vector<int> rank(K, -1);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = rank[labels[i]];
  return out;
}

double quantile_sorted(const std::vector<double>& v, double prob) {
  if (v.empty()) return kNaN;
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Cluster-level values of one coefficient vector: a[h] is the predictor shift
// of cluster h (the intercept folded in under reference coding).
std::vector<double> cluster_values(std::span<const double> xi, const DesignLayout& layout) {
  std::vector<double> a(layout.K);
  const double base = layout.has_intercept() ? xi[0] : 0.0;
  for (int h = 0; h < layout.K; ++h) a[h] = base + layout.cluster_effect(h, xi);
  return a;
}

void write_cluster_values(std::span<const double> a, std::span<const double> src, const DesignLayout& from,
                          const DesignLayout& to, std::span<double> out) {
  for (int s = 1; s < to.S; ++s) out[to.subpop_column(s)] = src[from.subpop_column(s)];
  for (int k = 0; k < to.q; ++k) out[to.demographic_column(k)] = src[from.demographic_column(k)];
  if (to.has_intercept()) {
    out[0] = a[0];
    for (int h = 1; h < to.K; ++h) out[to.cluster_column(h)] = a[h] - a[0];
  } else {
    for (int h = 0; h < to.K; ++h) out[to.cluster_column(h)] = a[h];
  }
}

}  // namespace

SimilarityMatrix similarity_matrix(std::span<const int> C, long draws, int n) {
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  return similarity_matrix(C, draws, n, all);
}

SimilarityMatrix similarity_matrix(std::span<const int> C, long draws, int n, std::span<const int> subjects) {
  if (draws < 1) throw ShapeError("similarity matrix needs at least one draw");
  if (C.size() < static_cast<std::size_t>(draws) * n) throw ShapeError("trace shorter than draws x n");
  const int m = static_cast<int>(subjects.size());
  const auto traces = transpose_traces(C, draws, n, subjects);
  SimilarityMatrix sim;
  sim.n = m;
  sim.values.assign(static_cast<std::size_t>(m) * m, 1.0f);
  const double inv = 1.0 / static_cast<double>(draws);
  for (int a = 0; a < m; ++a) {
    const std::uint16_t* ta = &traces[static_cast<std::size_t>(a) * draws];
    for (int b = a + 1; b < m; ++b) {
      const auto v = static_cast<float>(count_equal(ta, &traces[static_cast<std::size_t>(b) * draws], draws) * inv);
      sim.values[static_cast<std::size_t>(a) * m + b] = v;
      sim.values[static_cast<std::size_t>(b) * m + a] = v;
    }
  }
  return sim;
}

Dendrogram complete_linkage(const SimilarityMatrix& sim) {
  const int n = sim.n;
  std::vector<float> condensed(n > 1 ? static_cast<std::size_t>(n) * (n - 1) / 2 : 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) condensed[condensed_index(n, i, j)] = 1.0f - sim(i, j);
  return complete_linkage(n, std::move(condensed));
}

Dendrogram complete_linkage(int n, std::vector<float> d) {
  // Nearest-neighbour chain; complete linkage is reducible so the chain
  // produces the same merges as the greedy algorithm.
  Dendrogram dend;
  dend.n = n;
  if (n <= 1) return dend;
  std::vector<char> active(n, 1);
  std::vector<int> size(n, 1);
  struct Raw {
    int a, b;
    double h;
  };
  std::vector<Raw> raw;
  raw.reserve(n - 1);
  std::vector<int> chain;
  chain.reserve(n);
  while (static_cast<int>(raw.size()) < n - 1) {
    if (chain.empty()) {
      int first = 0;
      while (!active[first]) ++first;
      chain.push_back(first);
    }
    while (true) {
      const int a = chain.back();
      const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
      int best = -1;
      float best_d = std::numeric_limits<float>::infinity();
      for (int k = 0; k < n; ++k) {
        if (k == a || !active[k]) continue;
        const float v = d[condensed_index(n, a, k)];
        if (v < best_d) {
          best_d = v;
          best = k;
        }
      }
      if (prev >= 0 && d[condensed_index(n, a, prev)] <= best_d) best = prev;
      if (best == prev) {
        chain.pop_back();
        chain.pop_back();
        const int lo = std::min(a, prev), hi = std::max(a, prev);
        raw.push_back({lo, hi, static_cast<double>(d[condensed_index(n, lo, hi)])});
        // Merged cluster lives in slot lo.
        for (int k = 0; k < n; ++k) {
          if (!active[k] || k == lo || k == hi) continue;
          float& dk = d[condensed_index(n, lo, k)];
          dk = std::max(dk, d[condensed_index(n, hi, k)]);
        }
        active[hi] = 0;
        size[lo] += size[hi];
        break;
      }
      chain.push_back(best);
    }
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& x, const Raw& y) { return x.h < y.h; });
  // Renumber with union-find so cluster ids follow merge order.
  UnionFind uf(n);
  std::vector<int> node(n), count(n, 1);
  std::iota(node.begin(), node.end(), 0);
  for (std::size_t m = 0; m < raw.size(); ++m) {
    const int ra = uf.find(raw[m].a), rb = uf.find(raw[m].b);
    Merge mg;
    mg.a = std::min(node[ra], node[rb]);
    mg.b = std::max(node[ra], node[rb]);
    mg.height = raw[m].h;
    mg.size = count[ra] + count[rb];
    dend.merges.push_back(mg);
    uf.parent[rb] = ra;
    count[ra] = mg.size;
    node[ra] = n + static_cast<int>(m);
  }
  return dend;
}

CutSpec cut_from_string(const std::string& s) {
  CutSpec cut;
  if (s.empty() || s == "gap" || s == "largest-gap") return cut;
  try {
    if (s.rfind("k=", 0) == 0) {
      cut.rule = CutRule::FixedK;
      cut.k = std::stoi(s.substr(2));
      if (cut.k < 1) throw ConfigError("cut k must be positive");
      return cut;
    }
    if (s.rfind("height=", 0) == 0) {
      cut.rule = CutRule::Height;
      cut.height = std::stod(s.substr(7));
      return cut;
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("unknown cut rule '" + s + "' (use gap, k=<K> or height=<h>)");
}

std::string to_string(const CutSpec& cut) {
  switch (cut.rule) {
    case CutRule::FixedK: return "k=" + std::to_string(cut.k);
    case CutRule::Height: return "height=" + format_double(cut.height);
    default: return "gap";
  }
}

std::vector<int> cut_tree(const Dendrogram& dend, int K) {
  const int n = dend.n;
  if (n == 0) return {};
  K = std::clamp(K, 1, n);
  UnionFind uf(2 * n);
  for (int m = 0; m < n - K; ++m) {
    const Merge& mg = dend.merges[m];
    uf.parent[uf.find(mg.a)] = n + m;
    uf.parent[uf.find(mg.b)] = n + m;
  }
  std::vector<int> root_label(2 * n, -1), labels(n);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return order_by_size(labels);
}

CutResult select_num_clusters(const Dendrogram& dend, const CutSpec& cut) {
  const int n = dend.n;
  if (n == 0) throw ShapeError("empty dendrogram");
  CutResult res;
  switch (cut.rule) {
    case CutRule::FixedK:
      res.K = std::clamp(cut.k, 1, n);
      if (res.K != cut.k) res.warnings.push_back("requested K clamped to " + std::to_string(res.K));
      break;
    case CutRule::Height: {
      int merged = 0;
      for (const Merge& m : dend.merges)
        if (m.height <= cut.height) ++merged;
      res.K = n - merged;
      break;
    }
    case CutRule::LargestGap: {
      // Performing the first m merges leaves n - m clusters; the cut sits
      // between merges m - 1 and m.
      const auto& mg = dend.merges;
      double best = 0.0;
      int best_m = 0;
      int ties = 0;
      for (int m = 1; m < n - 1; ++m) {
        const double gap = mg[m].height - mg[m - 1].height;
        if (gap > best + 1e-12) {
          best = gap;
          best_m = m;
          ties = 0;
        } else if (best > 1e-12 && std::abs(gap - best) <= 1e-12) {
          best_m = m;
          ++ties;
        }
      }
      if (best <= 1e-12) {
        res.K = 1;
        if (n > 2) res.warnings.push_back("all merge heights equal; no gap to cut, using one cluster");
      } else {
        res.K = n - best_m;
        if (ties > 0) res.warnings.push_back("largest gap is tied; using the smaller cluster count");
      }
      break;
    }
  }
  res.assignment = cut_tree(dend, res.K);
  return res;
}

std::vector<int> max_weight_matching(const std::vector<std::vector<double>>& weight) {
  // Hungarian algorithm (potentials form) on cost = max - weight.
  const int rows = static_cast<int>(weight.size());
  if (rows == 0) return {};
  const int cols = static_cast<int>(weight[0].size());
  if (rows > cols) throw ShapeError("matching needs rows <= columns");
  double mx = 0.0;
  for (const auto& r : weight)
    for (double w : r) mx = std::max(mx, w);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = (mx - weight[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(rows, -1);
  for (int j = 1; j <= cols; ++j)
    if (match[j] > 0) out[match[j] - 1] = j - 1;
  return out;
}

ClusteringResult cluster_chain(const ChainOutput& chain, const ClusteringOptions& options) {
  ClusteringResult res;
  const int n = chain.n;
  if (chain.draws < 1) throw ShapeError("chain has no retained draws");
  std::vector<int> subjects(n);
  std::iota(subjects.begin(), subjects.end(), 0);
  const bool sampled = options.max_subjects > 0 && n > options.max_subjects;
  if (sampled) {
    std::vector<int> pick;
    Rng rng(options.seed, 0x5b5);
    std::sample(subjects.begin(), subjects.end(), std::back_inserter(pick), options.max_subjects, rng.engine());
    subjects = std::move(pick);
    res.warnings.push_back("similarity matrix built on " + std::to_string(subjects.size()) + " of " +
                           std::to_string(n) + " subjects");
  }
  res.similarity = similarity_matrix(chain.C, chain.draws, n, subjects);
  res.dendrogram = complete_linkage(res.similarity);
  CutResult cut = select_num_clusters(res.dendrogram, options.cut);
  res.K = cut.K;
  res.warnings.insert(res.warnings.end(), cut.warnings.begin(), cut.warnings.end());
  if (!sampled) {
    res.assignment = std::move(cut.assignment);
  } else {
    const int m = static_cast<int>(subjects.size());
    std::vector<int> medoid(res.K, -1);
    std::vector<double> best(res.K, -1.0);
    for (int a = 0; a < m; ++a) {
      double total = 0.0;
      for (int b = 0; b < m; ++b)
        if (cut.assignment[b] == cut.assignment[a]) total += res.similarity(a, b);
      if (total > best[cut.assignment[a]]) {
        best[cut.assignment[a]] = total;
        medoid[cut.assignment[a]] = subjects[a];
      }
    }
    std::vector<int> full(n, -1);
    for (int a = 0; a < m; ++a) full[subjects[a]] = cut.assignment[a];
    const auto traces = transpose_traces(chain.C, chain.draws, n, std::vector<int>(medoid.begin(), medoid.end()));
    std::vector<int> self(1);
    for (int i = 0; i < n; ++i) {
      if (full[i] >= 0) continue;
      self[0] = i;
      const auto ti = transpose_traces(chain.C, chain.draws, n, self);
      long best_count = -1;
      for (int k = 0; k < res.K; ++k) {
        const long c = count_equal(ti.data(), &traces[static_cast<std::size_t>(k) * chain.draws], chain.draws);
        if (c > best_count) {
          best_count = c;
          full[i] = k;
        }
      }
    }
    res.assignment = order_by_size(full);
  }
  res.subjects = std::move(subjects);
  return res;
}

ParamSummary summarize_columns(std::span<const double> draws, long rows, int width) {
  ParamSummary s;
  s.mean.assign(width, kNaN);
  s.median.assign(width, kNaN);
  s.lower.assign(width, kNaN);
  s.upper.assign(width, kNaN);
  std::vector<double> col;
  for (int k = 0; k < width; ++k) {
    col.clear();
    for (long t = 0; t < rows; ++t) {
      const double v = draws[static_cast<std::size_t>(t) * width + k];
      if (!std::isnan(v)) col.push_back(v);
    }
    if (col.empty()) continue;
    s.mean[k] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    std::sort(col.begin(), col.end());
    s.median[k] = quantile_sorted(col, 0.5);
    s.lower[k] = quantile_sorted(col, 0.025);
    s.upper[k] = quantile_sorted(col, 0.975);
  }
  return s;
}

ModalPattern modal_pattern(std::span<const double> theta, int K, const std::vector<int>& levels) {
  const LevelLayout layout(levels);
  ModalPattern out;
  for (int h = 0; h < K; ++h) {
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const double* row = &theta[static_cast<std::size_t>(h) * layout.total + layout.offset[j]];
      const int d = levels[j];
      double sum = 0.0;
      for (int r = 0; r < d; ++r) sum += row[r];
      ModalEntry e;
      e.cluster = h;
      e.variable = static_cast<int>(j);
      if (!(sum > 0.0)) {
        e.probability = kNaN;
        out.warnings.push_back("cluster " + std::to_string(h + 1) + " variable " + std::to_string(j + 1) +
                               ": no estimate");
        out.entries.push_back(e);
        continue;
      }
      int arg = 0;
      bool tie = false;
      for (int r = 1; r < d; ++r) {
        const double diff = row[r] / sum - row[arg] / sum;
        if (diff > 1e-12) {
          arg = r;
          tie = false;
        } else if (std::abs(diff) <= 1e-12) {
          tie = true;
        }
      }
      e.level = arg + 1;
      e.probability = row[arg] / sum;
      if (tie)
        out.warnings.push_back("cluster " + std::to_string(h + 1) + " variable " + std::to_string(j + 1) +
                               ": tied modal levels, using level " + std::to_string(e.level));
      out.entries.push_back(e);
    }
  }
  return out;
}

std::vector<double> cell_to_reference(std::span<const double> xi, int S, int K, int q) {
  const DesignLayout from(Coding::CellMeans, S, K, q), to(Coding::ReferenceCell, S, K, q);
  std::vector<double> out(to.columns());
  write_cluster_values(cluster_values(xi, from), xi, from, to, out);
  return out;
}

std::vector<double> reference_to_cell(std::span<const double> xi, int S, int K, int q) {
  const DesignLayout from(Coding::ReferenceCell, S, K, q), to(Coding::CellMeans, S, K, q);
  std::vector<double> out(to.columns());
  write_cluster_values(cluster_values(xi, from), xi, from, to, out);
  return out;
}

RelabelledDraws relabel_global(const ChainOutput& chain, std::span<const int> assignment, int K) {
  const int n = chain.n;
  const int K0 = chain.K0;
  if (static_cast<int>(assignment.size()) != n) throw ShapeError("assignment length differs from n");
  int D = 0;
  for (int d : chain.levels) D += d;
  const DesignLayout from(chain.coding, chain.S, K0, chain.q), to(chain.coding, chain.S, K, chain.q);
  const int P0 = from.columns(), P = to.columns();
  RelabelledDraws out;
  out.pi.assign(static_cast<std::size_t>(chain.draws) * K, kNaN);
  out.theta0.assign(static_cast<std::size_t>(chain.draws) * K * D, kNaN);
  out.xi.assign(static_cast<std::size_t>(chain.draws) * P, kNaN);
  const int side = std::max(K, K0);
  std::vector<std::vector<double>> overlap(side, std::vector<double>(side, 0.0));
  std::vector<int> occupancy(K0);
  for (long t = 0; t < chain.draws; ++t) {
    for (auto& row : overlap) std::fill(row.begin(), row.end(), 0.0);
    std::fill(occupancy.begin(), occupancy.end(), 0);
    const auto C = chain.C_draw(t);
    for (int i = 0; i < n; ++i) {
      overlap[assignment[i]][C[i]] += 1.0;
      ++occupancy[C[i]];
    }
    // Rows are reference clusters, columns draw clusters (padded square).
    const std::vector<int> match = max_weight_matching(overlap);
    std::vector<int> ref_of(K0, -1);
    for (int k = 0; k < K; ++k)
      if (match[k] < K0) ref_of[match[k]] = k;
    bool surplus = false;
    const double* pi = &chain.pi[static_cast<std::size_t>(t) * K0];
    double* pi_out = &out.pi[static_cast<std::size_t>(t) * K];
    for (int k = 0; k < K; ++k) pi_out[k] = match[k] < K0 ? pi[match[k]] : 0.0;
    for (int h = 0; h < K0; ++h) {
      if (ref_of[h] >= 0 || occupancy[h] == 0) continue;
      int best = 0;
      for (int k = 1; k < K; ++k)
        if (overlap[k][h] > overlap[best][h]) best = k;
      pi_out[best] += pi[h];
      surplus = true;
    }
    if (surplus) ++out.surplus_draws;

    const double* th = &chain.theta0[static_cast<std::size_t>(t) * K0 * D];
    double* th_out = &out.theta0[static_cast<std::size_t>(t) * K * D];
    const auto xi = std::span<const double>(&chain.xi[static_cast<std::size_t>(t) * P0], P0);
    const std::vector<double> a = cluster_values(xi, from);
    std::vector<double> a_ref(K, kNaN);
    for (int k = 0; k < K; ++k) {
      const int h = match[k];
      if (h >= K0 || occupancy[h] == 0) continue;
      std::copy(th + static_cast<std::size_t>(h) * D, th + static_cast<std::size_t>(h + 1) * D,
                th_out + static_cast<std::size_t>(k) * D);
      a_ref[k] = a[h];
    }
    write_cluster_values(a_ref, xi, from, to, std::span<double>(&out.xi[static_cast<std::size_t>(t) * P], P));
  }
  return out;
}

namespace {

// Align local labels of every draw within each subpopulation to a reference
// draw; returns relabelled lambda and theta1 blocks (NaN for unused slots).
void relabel_local(const ChainOutput& chain, std::vector<double>& lambda, std::vector<double>& theta1) {
  const int S = chain.S, Ks = chain.Ks;
  int D = 0;
  for (int d : chain.levels) D += d;
  const long T = chain.draws;
  lambda.assign(static_cast<std::size_t>(T) * S * Ks, kNaN);
  theta1.assign(static_cast<std::size_t>(T) * S * Ks * D, kNaN);
  for (int s = 0; s < S; ++s) {
    const int k = chain.local_k.empty() ? Ks : chain.local_k[s];
    auto table = [&](long t, int l) { return &chain.theta1[((static_cast<std::size_t>(t) * S + s) * Ks + l) * D]; };
    // Reference: draw 0, refined once to the mean of the aligned draws.
    std::vector<double> ref(static_cast<std::size_t>(k) * D);
    for (int l = 0; l < k; ++l) std::copy(table(0, l), table(0, l) + D, ref.begin() + static_cast<std::size_t>(l) * D);
    std::vector<std::vector<int>> perm(T);
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<double> next(ref.size(), 0.0);
      for (long t = 0; t < T; ++t) {
        std::vector<std::vector<double>> w(k, std::vector<double>(k));
        for (int r = 0; r < k; ++r)
          for (int l = 0; l < k; ++l) {
            double dist = 0.0;
            const double* a = &ref[static_cast<std::size_t>(r) * D];
            const double* b = table(t, l);
            for (int c = 0; c < D; ++c) dist += std::abs(a[c] - b[c]);
            w[r][l] = -dist;
          }
        perm[t] = max_weight_matching(w);
        for (int r = 0; r < k; ++r) {
          const double* b = table(t, perm[t][r]);
          for (int c = 0; c < D; ++c) next[static_cast<std::size_t>(r) * D + c] += b[c] / static_cast<double>(T);
        }
      }
      ref = std::move(next);
    }
    for (long t = 0; t < T; ++t) {
      for (int r = 0; r < k; ++r) {
        const int l = perm[t][r];
        lambda[(static_cast<std::size_t>(t) * S + s) * Ks + r] =
            chain.lambda[(static_cast<std::size_t>(t) * S + s) * Ks + l];
        std::copy(table(t, l), table(t, l) + D, &theta1[((static_cast<std::size_t>(t) * S + s) * Ks + r) * D]);
      }
    }
  }
}

}  // namespace

PosteriorSummary relabel_and_summarize(const ChainOutput& chain, std::span<const int> assignment, int K) {
  if (chain.draws < 1) throw ShapeError("chain has no retained draws");
  PosteriorSummary sum;
  sum.kind = chain.kind;
  sum.n = chain.n;
  sum.p = chain.p;
  sum.S = chain.S;
  sum.q = chain.q;
  sum.K = K;
  sum.Ks = chain.Ks;
  sum.levels = chain.levels;
  sum.coding = chain.coding;
  sum.xi_labels = DesignLayout(chain.coding, chain.S, K, chain.q).labels(
      std::vector<std::string>(chain.xi_labels.end() - chain.q, chain.xi_labels.end()));
  sum.assignment.assign(assignment.begin(), assignment.end());
  sum.cluster_sizes.assign(K, 0);
  for (int a : assignment) {
    if (a < 0 || a >= K) throw ShapeError("assignment label out of range");
    ++sum.cluster_sizes[a];
  }
  sum.draws = chain.draws;
  int D = 0;
  for (int d : chain.levels) D += d;

  const RelabelledDraws rel = relabel_global(chain, assignment, K);
  sum.surplus_draws = rel.surplus_draws;
  if (rel.surplus_draws > 0)
    sum.warnings.push_back(std::to_string(rel.surplus_draws) +
                           " draws had more occupied clusters than the reference; extra clusters were merged "
                           "into their best-overlapping reference cluster");
  const int P = static_cast<int>(sum.xi_labels.size());
  sum.pi = summarize_columns(rel.pi, chain.draws, K);
  sum.theta0 = summarize_columns(rel.theta0, chain.draws, K * D);
  sum.xi = summarize_columns(rel.xi, chain.draws, P);
  sum.prob_positive.assign(P, kNaN);
  for (int k = 0; k < P; ++k) {
    long pos = 0, total = 0;
    for (long t = 0; t < chain.draws; ++t) {
      const double v = rel.xi[static_cast<std::size_t>(t) * P + k];
      if (std::isnan(v)) continue;
      ++total;
      pos += v > 0.0;
    }
    if (total > 0) sum.prob_positive[k] = static_cast<double>(pos) / static_cast<double>(total);
  }
  sum.modal = modal_pattern(sum.theta0.median, K, chain.levels);

  if (chain.kind == ModelKind::SupervisedRpc) {
    sum.nu = summarize_columns(chain.nu, chain.draws, chain.S * chain.p);
    sum.beta = summarize_columns(chain.beta, chain.draws, chain.S);
    std::vector<double> lambda, theta1;
    relabel_local(chain, lambda, theta1);
    sum.lambda = summarize_columns(lambda, chain.draws, chain.S * chain.Ks);
    sum.theta1 = summarize_columns(theta1, chain.draws, chain.S * chain.Ks * D);
    std::vector<double> marginal(static_cast<std::size_t>(chain.draws) * chain.S * D, 0.0);
    for (long t = 0; t < chain.draws; ++t)
      for (int s = 0; s < chain.S; ++s) {
        const int k = chain.local_k.empty() ? chain.Ks : chain.local_k[s];
        double* out = &marginal[(static_cast<std::size_t>(t) * chain.S + s) * D];
        for (int l = 0; l < k; ++l) {
          const double lam = chain.lambda[(static_cast<std::size_t>(t) * chain.S + s) * chain.Ks + l];
          const double* th = &chain.theta1[((static_cast<std::size_t>(t) * chain.S + s) * chain.Ks + l) * D];
          for (int c = 0; c < D; ++c) out[c] += lam * th[c];
        }
      }
    sum.local_marginal = summarize_columns(marginal, chain.draws, chain.S * D);
    sum.G_mean = chain.G_mean;
  }
  return sum;
}

}  // namespace srpc
