#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "rrw/regeneration.hpp"

namespace rrw {
namespace {

std::vector<std::int64_t> taus(const std::vector<RegenRecord>& r) {
  std::vector<std::int64_t> out;
  for (const auto& x : r) out.push_back(x.tau);
  return out;
}

std::vector<std::int32_t> monotone(int n) {
  std::vector<std::int32_t> h(n + 1);
  for (int i = 0; i <= n; ++i) h[i] = i;
  return h;
}

TEST(LevelTimes, HandTraces) {
  auto a = level_times(std::vector<std::int32_t>{0, 1, 2, 3});
  EXPECT_EQ(a.first_hit, (std::vector<std::int64_t>{0, 1, 2, 3}));
  EXPECT_EQ(a.last_visit, (std::vector<std::int64_t>{0, 1, 2, 3}));

  auto b = level_times(std::vector<std::int32_t>{0, 1, 0, 1, 2});
  EXPECT_EQ(b.first_hit, (std::vector<std::int64_t>{0, 1, 4}));
  EXPECT_EQ(b.last_visit, (std::vector<std::int64_t>{2, 3, 4}));

  auto c = level_times(std::vector<std::int32_t>{0, 1});
  EXPECT_EQ(c.first_hit[1], 1);
  EXPECT_EQ(c.last_visit[1], 1);
}

TEST(CutTimes, MonotoneTraceCutsEveryLevel) {
  const auto lt = level_times(std::vector<std::int32_t>{0, 1, 2, 3});
  const auto r = cut_times(lt, 3, 0);
  EXPECT_EQ(taus(r), (std::vector<std::int64_t>{0, 1, 2, 3}));
  EXPECT_TRUE(r[0].genuine);
  EXPECT_TRUE(r[2].confirmed);
  EXPECT_FALSE(r[3].confirmed);  // not yet exceeded at the horizon
}

TEST(CutTimes, ReturnBreaksCut) {
  const auto lt = level_times(std::vector<std::int32_t>{0, 1, 0, 1, 2});
  const auto r = cut_times(lt, 4, 0);
  EXPECT_EQ(taus(r), (std::vector<std::int64_t>{0, 4}));
  EXPECT_FALSE(r[0].genuine);  // root revisited; kept by convention
  EXPECT_EQ(r[1].level, 2);
  EXPECT_FALSE(r[1].confirmed);

  for (const auto& x : cut_times(lt, 4, 5)) EXPECT_FALSE(x.confirmed);
}

TEST(CutTimes, BlockFieldsLinkConsecutiveCuts) {
  const auto lt = level_times(std::vector<std::int32_t>{0, 1, 2, 1, 2, 3, 4, 5});
  const auto r = cut_times(lt, 7, 0);
  ASSERT_EQ(taus(r), (std::vector<std::int64_t>{0, 5, 6, 7}));
  EXPECT_EQ(r[0].next_tau, 5);
  EXPECT_EQ(r[0].delta_t, 5);
  EXPECT_EQ(r[0].H, 3);
  EXPECT_EQ(r.back().next_tau, -1);
}

TEST(Increments, Arithmetic) {
  std::vector<RegenRecord> rec(3);
  rec[0] = {0, 0};
  rec[1] = {3, 2};
  rec[2] = {7, 5};
  for (auto& x : rec) x.confirmed = true;
  EXPECT_EQ(increments(rec), (std::vector<IncrementPair>{{3, 2}, {4, 3}}));
  EXPECT_TRUE(increments(std::span(rec).first(1)).empty());
}

TEST(Increments, MonotoneTraceGivesUnitPairs) {
  const int n = 50;
  const auto r = cut_times(level_times(monotone(n)), n, 0);
  const auto p = increments(r);
  // Levels 0..n-1 are confirmed; the top level is still open.
  ASSERT_EQ(p.size(), static_cast<std::size_t>(n - 1));
  for (const auto& q : p) EXPECT_EQ(q, (IncrementPair{1, 1}));
  EXPECT_EQ(truncated_height_sum(p), n - 1);
  EXPECT_EQ(iid_increments(r), p);
}

TEST(Increments, InitialBlockDroppedWhenRootRevisited) {
  const auto r = cut_times(level_times(std::vector<std::int32_t>{0, 1, 0, 1, 2, 3, 4, 5}), 7, 0);
  ASSERT_FALSE(r[0].genuine);
  const auto all = increments(r);
  const auto iid = iid_increments(r);
  ASSERT_EQ(all.size(), iid.size() + 1);
  EXPECT_EQ(all.front(), (IncrementPair{4, 2}));
}

TEST(FilterShortTight, HandFilter) {
  std::vector<IncrementPair> p{{3, 2}, {40, 3}, {4, 9}};
  const auto f = filter_short_tight(p, {5, 10, 0});
  EXPECT_EQ(f.pairs, (std::vector<IncrementPair>{{3, 2}}));
  EXPECT_EQ(f.kept, 1u);
  EXPECT_EQ(f.dropped, 2u);

  const auto id = filter_short_tight(p, {});
  EXPECT_EQ(id.pairs, p);
  EXPECT_TRUE(filter_short_tight({}, {1, 1, 0}).pairs.empty());
}

TEST(TruncatedHeightSum, Examples) {
  EXPECT_EQ(truncated_height_sum(std::vector<IncrementPair>{{3, 2}, {4, 3}}), 5);
  EXPECT_EQ(truncated_height_sum({}), 0);
  EXPECT_EQ(regenerated_height(cut_times(level_times(std::vector<std::int32_t>{0, 1, 0, 1}), 3, 0), 3), 0);
}

TEST(RegenerationProperties, OnSimulatedWalks) {
  for (auto s : {Scheme::linear(2), Scheme::once(2), Scheme::ktimes(2, 3)}) {
    WalkConfig c;
    c.b = 2;
    c.scheme = s;
    c.horizon = 20000;
    c.seed = 9;
    const auto t = run(c);
    const auto r = cut_times(t.levels, c.horizon, 0);
    for (std::size_t i = 0; i + 1 < r.size(); ++i) ASSERT_LT(r[i].tau, r[i + 1].tau);
    // Replay: each cut level is visited exactly once in the recorded heights.
    for (const auto& x : r) {
      if (!x.genuine) continue;
      EXPECT_EQ(std::count(t.heights.begin(), t.heights.end(), x.level), 1);
      EXPECT_EQ(t.heights[x.tau], x.level);
    }
    const auto pairs = iid_increments(cut_times(t.levels, c.horizon, kDefaultMargin));
    for (const auto& q : pairs) {
      EXPECT_GE(q.delta_t, 1);
      EXPECT_GE(q.H, 1);
    }
    // h_n(N, M) <= h_n(N) <= h_n.
    const auto full = truncated_height_sum(pairs);
    const auto n_only = truncated_height_sum(filter_short_tight(pairs, {3, kUnbounded, 0}).pairs);
    const auto nm = truncated_height_sum(filter_short_tight(pairs, {3, 20, 0}).pairs);
    EXPECT_LE(nm, n_only);
    EXPECT_LE(n_only, full);
    // The sandwich h_n <= h(X_n).
    EXPECT_LE(regenerated_height(cut_times(t.levels, c.horizon, kDefaultMargin),
                                 static_cast<std::int64_t>(c.horizon)),
              t.final_height);
  }
}

TEST(Autocorrelation, Basics) {
  std::vector<double> alt{1, -1, 1, -1, 1, -1, 1, -1};
  EXPECT_LT(autocorrelation(alt, 1), -0.8);
  EXPECT_GT(autocorrelation(alt, 2), 0.7);
  std::vector<double> flat(10, 3.0);
  EXPECT_EQ(autocorrelation(flat, 1), 0.0);
}

TEST(KsStatistic, Basics) {
  std::vector<std::int64_t> a{1, 1, 2, 2}, b{1, 1, 2, 2}, c{5, 6, 7, 8};
  EXPECT_DOUBLE_EQ(ks_statistic(a, b), 0.0);
  EXPECT_DOUBLE_EQ(ks_statistic(a, c), 1.0);
}

TEST(IidDiagnostics, TrendIsDetected) {
  std::vector<IncrementPair> p;
  for (int k = 1; k <= 200; ++k) p.push_back({1 + k % 3, k});
  const auto rep = iid_diagnostics(p, 1, 200);
  EXPECT_GT(rep.height.autocorr[0], rep.band);
  EXPECT_FALSE(rep.height.within_band[0]);
  EXPECT_FALSE(rep.autocorr_pass);
  EXPECT_LT(rep.height.ks_p_value, 0.01);
}

TEST(IidDiagnostics, ConstantSequence) {
  std::vector<IncrementPair> p(100, {1, 1});
  const auto rep = iid_diagnostics(p, 1, 50);
  EXPECT_TRUE(rep.delta_t.zero_variance);
  EXPECT_TRUE(rep.height.zero_variance);
  for (double a : rep.height.autocorr) EXPECT_EQ(a, 0.0);
  EXPECT_TRUE(rep.autocorr_pass);
}

TEST(IidDiagnostics, InsufficientData) {
  std::vector<IncrementPair> p(29, {1, 1});
  EXPECT_TRUE(iid_diagnostics(p).insufficient_data);
  p.push_back({2, 1});
  EXPECT_FALSE(iid_diagnostics(p).insufficient_data);
}

TEST(IidDiagnostics, SyntheticGeometricPassRate) {
  // i.i.d. by construction: the run-level pass flag must hold in >= 99% of
  // trials.
  std::mt19937_64 gen(2718);
  std::geometric_distribution<int> geo_t(0.3), geo_h(0.6);
  int passed = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<IncrementPair> p(10000);
    for (auto& q : p) q = {1 + geo_t(gen), 1 + geo_h(gen)};
    const auto rep = iid_diagnostics(p, trial, 0);
    passed += rep.autocorr_pass;
  }
  EXPECT_GE(passed, 99);
}

}  // namespace
}  // namespace rrw
