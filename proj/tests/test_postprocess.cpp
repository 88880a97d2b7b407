#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "srpc/errors.hpp"
#include "srpc/postprocess.hpp"
#include "test_support.hpp"

using namespace srpc;
using namespace srpc::test;

namespace {

// Labels renamed in order of first appearance.
std::vector<int> canonical(const std::vector<int>& labels) {
  std::map<int, int> seen;
  std::vector<int> out;
  for (int l : labels) out.push_back(seen.emplace(l, static_cast<int>(seen.size())).first->second);
  return out;
}

struct NaiveLinkage {
  std::vector<double> heights;
  std::vector<std::vector<int>> partitions;  // partitions[K] after merging down to K groups
};

// Complete linkage by repeated scans over all cluster pairs.
NaiveLinkage naive_complete_linkage(int n, const std::vector<std::vector<double>>& dist) {
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups.push_back({i});
  NaiveLinkage out;
  out.partitions.resize(n + 1);
  auto snapshot = [&] {
    std::vector<int> lab(n);
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (int i : groups[g]) lab[i] = static_cast<int>(g);
    out.partitions[groups.size()] = canonical(lab);
  };
  snapshot();
  while (groups.size() > 1) {
    double best = 1e300;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < groups.size(); ++a)
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        double d = 0.0;
        for (int i : groups[a])
          for (int j : groups[b]) d = std::max(d, dist[i][j]);
        if (d < best) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    out.heights.push_back(best);
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    groups.erase(groups.begin() + static_cast<long>(bb));
    snapshot();
  }
  return out;
}

std::vector<float> condensed_of(const std::vector<std::vector<double>>& dist) {
  std::vector<float> c;
  const int n = static_cast<int>(dist.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) c.push_back(static_cast<float>(dist[i][j]));
  return c;
}

}  // namespace

TEST_CASE("similarity counts coassignment frequency") {
  // Four draws of three subjects; subjects 0 and 1 share a cluster in three.
  const std::vector<int> C{0, 0, 1, 2, 2, 2, 1, 0, 0, 1, 1, 0};
  const SimilarityMatrix s = similarity_matrix(C, 4, 3);
  CHECK(s(0, 1) == doctest::Approx(0.75));
  CHECK(s(1, 0) == doctest::Approx(0.75));
  CHECK(s(0, 2) == doctest::Approx(0.25));
  CHECK(s(1, 2) == doctest::Approx(0.5));
  for (int i = 0; i < 3; ++i) CHECK(s(i, i) == 1.0f);

  const std::vector<int> subset{2, 0};
  const SimilarityMatrix r = similarity_matrix(C, 4, 3, subset);
  CHECK(r.n == 2);
  CHECK(r(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("complete linkage on a three-point example") {
  const Dendrogram d = complete_linkage(3, std::vector<float>{0.1f, 0.9f, 0.8f});
  REQUIRE(d.merges.size() == 2);
  CHECK(std::set<int>{d.merges[0].a, d.merges[0].b} == std::set<int>{0, 1});
  CHECK(d.merges[0].height == doctest::Approx(0.1));
  CHECK(d.merges[1].height == doctest::Approx(0.9));
  CHECK(d.merges[1].size == 3);
  CHECK(canonical(cut_tree(d, 2)) == std::vector<int>{0, 0, 1});
}

TEST_CASE("complete linkage agrees with a naive implementation") {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 25;
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        // Rounded to float so both sides see identical values.
        dist[i][j] = dist[j][i] = static_cast<float>(rng.uniform());
      }
    const Dendrogram d = complete_linkage(n, condensed_of(dist));
    const NaiveLinkage naive = naive_complete_linkage(n, dist);
    REQUIRE(d.merges.size() == naive.heights.size());
    for (std::size_t m = 0; m < naive.heights.size(); ++m) CHECK(d.merges[m].height == doctest::Approx(naive.heights[m]));
    for (int K = 1; K <= n; ++K) CHECK(canonical(cut_tree(d, K)) == naive.partitions[K]);
  }
}

TEST_CASE("block similarity is cut at the largest gap") {
  const int n = 9;
  // Three blocks of three; within 0.95, between 0.05.
  std::vector<int> block{0, 0, 0, 1, 1, 1, 2, 2, 2};
  SimilarityMatrix s;
  s.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s.values.push_back(i == j ? 1.0f : (block[i] == block[j] ? 0.95f : 0.05f));
  const Dendrogram d = complete_linkage(s);
  const CutResult gap = select_num_clusters(d, CutSpec{});
  CHECK(gap.K == 3);
  CHECK(canonical(gap.assignment) == block);
  CHECK(select_num_clusters(d, CutSpec{CutRule::FixedK, 2, 0.0}).K == 2);
  CHECK(select_num_clusters(d, CutSpec{CutRule::Height, 0, 0.5}).K == 3);
  CHECK(select_num_clusters(d, CutSpec{CutRule::Height, 0, 0.99}).K == 1);
  const CutResult clamped = select_num_clusters(d, CutSpec{CutRule::FixedK, 20, 0.0});
  CHECK(clamped.K == n);
  CHECK_FALSE(clamped.warnings.empty());

  SimilarityMatrix flat;
  flat.n = 4;
  flat.values.assign(16, 0.5f);
  const CutResult one = select_num_clusters(complete_linkage(flat), CutSpec{});
  CHECK(one.K == 1);
  CHECK_FALSE(one.warnings.empty());
}

TEST_CASE("cut tree labels clusters by decreasing size") {
  const Dendrogram d = complete_linkage(5, std::vector<float>{0.9f, 0.9f, 0.9f, 0.9f,  //
                                                              0.9f, 0.9f, 0.9f,       //
                                                              0.1f, 0.1f,             //
                                                              0.1f});
  CHECK(cut_tree(d, 2) == std::vector<int>{1, 1, 0, 0, 0});
}

TEST_CASE("cut rules parse") {
  CHECK(cut_from_string("gap").rule == CutRule::LargestGap);
  CHECK(cut_from_string("k=4").k == 4);
  CHECK(cut_from_string("height=0.5").height == 0.5);
  CHECK(to_string(cut_from_string("k=4")) == "k=4");
  CHECK_THROWS_AS(cut_from_string("k=0"), ConfigError);
  CHECK_THROWS_AS(cut_from_string("median"), ConfigError);
}

TEST_CASE("matching maximises total weight") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 1 + trial % 5, cols = 5;
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& r : w)
      for (double& v : r) v = std::floor(rng.uniform() * 10);
    const auto match = max_weight_matching(w);
    REQUIRE(static_cast<int>(match.size()) == rows);
    CHECK(std::set<int>(match.begin(), match.end()).size() == static_cast<std::size_t>(rows));
    double got = 0.0;
    for (int k = 0; k < rows; ++k) got += w[k][match[k]];

    std::vector<int> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1.0;
    do {
      double s = 0.0;
      for (int k = 0; k < rows; ++k) s += w[k][perm[k]];
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(got == best);
  }
}

TEST_CASE("relabelling undoes label switching") {
  Rng data_rng(33);
  const Dataset ds = random_dataset(30, 3, 2, 2, 1, data_rng);
  Hyperparameters h;
  h.K0 = 2;
  h.Ks = 2;
  ChainConfig cfg;
  cfg.n_iter = 20;
  cfg.burn_in = 10;
  const ChainOutput chain = run_chain(ds, h, cfg);

  // Swap labels 0 and 1 in every odd draw.
  ChainOutput swapped = chain;
  const int D = chain.theta_width() / chain.K0;
  const int P = chain.xi_width();
  for (long t = 1; t < chain.draws; t += 2) {
    for (int i = 0; i < chain.n; ++i) {
      int& c = swapped.C[static_cast<std::size_t>(t) * chain.n + i];
      c = 1 - c;
    }
    std::swap(swapped.pi[t * 2], swapped.pi[t * 2 + 1]);
    std::swap_ranges(swapped.theta0.begin() + t * 2 * D, swapped.theta0.begin() + t * 2 * D + D,
                     swapped.theta0.begin() + t * 2 * D + D);
    // Cell-means coding: the first K0 columns are the cluster effects.
    std::swap(swapped.xi[t * P], swapped.xi[t * P + 1]);
  }
  const auto first = chain.C_draw(0);
  const std::vector<int> assignment(first.begin(), first.end());
  const RelabelledDraws a = relabel_global(chain, assignment, 2);
  const RelabelledDraws b = relabel_global(swapped, assignment, 2);
  CHECK(a.pi == b.pi);
  CHECK(a.theta0 == b.theta0);
  auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k)
      if (!(x[k] == y[k] || (std::isnan(x[k]) && std::isnan(y[k])))) return false;
    return true;
  };
  CHECK(same(a.xi, b.xi));
}

TEST_CASE("modal pattern") {
  SUBCASE("argmax of the normalised row") {
    const std::vector<double> theta{0.1, 0.2, 0.3, 0.4};
    const ModalPattern m = modal_pattern(theta, 1, {4});
    REQUIRE(m.entries.size() == 1);
    CHECK(m.entries[0].level == 4);
    CHECK(m.entries[0].probability == doctest::Approx(0.4));
    CHECK(m.warnings.empty());
  }
  SUBCASE("unnormalised rows are rescaled") {
    const std::vector<double> theta{2.0, 1.0, 1.0};
    const ModalPattern m = modal_pattern(theta, 1, {3});
    CHECK(m.entries[0].level == 1);
    CHECK(m.entries[0].probability == doctest::Approx(0.5));
  }
  SUBCASE("ties go to the lowest level with a warning") {
    const std::vector<double> theta{0.25, 0.25, 0.25, 0.25};
    const ModalPattern m = modal_pattern(theta, 1, {4});
    CHECK(m.entries[0].level == 1);
    CHECK_FALSE(m.warnings.empty());
  }
  SUBCASE("brute force over random tables") {
    Rng rng(34);
    const std::vector<int> levels{2, 3, 4};
    std::vector<double> theta;
    for (int h = 0; h < 3; ++h)
      for (int d : levels) {
        const auto row = sample_dirichlet(std::vector<double>(d, 1.0), rng);
        theta.insert(theta.end(), row.begin(), row.end());
      }
    const ModalPattern m = modal_pattern(theta, 3, levels);
    std::size_t off = 0;
    for (int h = 0; h < 3; ++h)
      for (std::size_t j = 0; j < levels.size(); ++j) {
        const auto* row = &theta[off];
        const int arg = static_cast<int>(std::max_element(row, row + levels[j]) - row);
        CHECK(m.entries[h * 3 + j].level == arg + 1);
        off += levels[j];
      }
  }
}

TEST_CASE("column summaries skip missing draws") {
  std::vector<double> draws;
  for (int t = 1; t <= 101; ++t) {
    draws.push_back(t);
    draws.push_back(t % 2 ? NAN : 7.0);
  }
  const ParamSummary s = summarize_columns(draws, 101, 2);
  CHECK(s.mean[0] == doctest::Approx(51.0));
  CHECK(s.median[0] == doctest::Approx(51.0));
  CHECK(s.lower[0] < s.median[0]);
  CHECK(s.upper[0] > s.median[0]);
  CHECK(s.lower[0] >= 1.0);
  CHECK(s.upper[0] <= 101.0);
  CHECK(s.mean[1] == 7.0);
}

TEST_CASE("coding transforms preserve the linear predictor") {
  Rng data_rng(35);
  const Dataset ds = random_dataset(40, 2, 3, 2, 2, data_rng);
  const int K = 3;
  std::vector<int> C(ds.n);
  for (int i = 0; i < ds.n; ++i) C[i] = i % K;
  const DesignMatrix cell = build_design_matrix(ds, C, K, Coding::CellMeans);
  const DesignMatrix ref = build_design_matrix(ds, C, K, Coding::ReferenceCell);
  std::vector<double> xi(static_cast<std::size_t>(cell.W.cols()));
  for (double& v : xi) v = data_rng.normal();
  const std::vector<double> r = cell_to_reference(xi, ds.S, K, ds.q);
  REQUIRE(static_cast<long>(r.size()) == ref.W.cols());
  const Eigen::VectorXd a = cell.W * Eigen::Map<const Eigen::VectorXd>(xi.data(), static_cast<long>(xi.size()));
  const Eigen::VectorXd b = ref.W * Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<long>(r.size()));
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  const std::vector<double> back = reference_to_cell(r, ds.S, K, ds.q);
  for (std::size_t k = 0; k < xi.size(); ++k) CHECK(back[k] == doctest::Approx(xi[k]).epsilon(1e-12));
}

TEST_CASE("clustering a chain with subsampling keeps every subject") {
  ChainOutput chain;
  chain.n = 12;
  chain.draws = 20;
  for (long t = 0; t < chain.draws; ++t)
    for (int i = 0; i < chain.n; ++i) chain.C.push_back(i < 6 ? 0 : 1);
  ClusteringOptions opt;
  opt.max_subjects = 5;
  const ClusteringResult r = cluster_chain(chain, opt);
  CHECK(r.subjects.size() == 5u);
  CHECK(r.assignment.size() == 12u);
  CHECK(r.K == 2);
  CHECK(canonical(r.assignment) == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1});

  opt.max_subjects = 5000;
  const ClusteringResult full = cluster_chain(chain, opt);
  CHECK(full.subjects.size() == 12u);
  CHECK(full.similarity(0, 11) == 0.0f);
}
