#include "rrw/regeneration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rrw {

LevelTimes level_times(std::span<const std::int32_t> heights) {
  LevelTimes lt;
  for (std::size_t j = 0; j < heights.size(); ++j)
    lt.observe(static_cast<std::uint32_t>(heights[j]), static_cast<std::int64_t>(j));
  return lt;
}

std::vector<RegenRecord> cut_times(const LevelTimes& levels, std::uint64_t /*horizon*/,
                                   std::uint32_t margin) {
  std::vector<RegenRecord> out;
  if (levels.levels() == 0) return out;
  const auto top = static_cast<std::int64_t>(levels.levels()) - 1;
  auto confirmed = [&](std::int64_t k) {
    return k + static_cast<std::int64_t>(margin) < top;
  };

  RegenRecord origin;
  origin.tau = 0;
  origin.level = 0;
  origin.genuine = levels.last_visit[0] == 0;
  origin.confirmed = confirmed(0);
  out.push_back(origin);

  for (std::int64_t k = 1; k <= top; ++k) {
    if (levels.first_hit[k] != levels.last_visit[k]) continue;
    RegenRecord r;
    r.tau = levels.first_hit[k];
    r.level = k;
    r.confirmed = confirmed(k);
    out.push_back(r);
  }
  for (std::size_t i = 0; i + 1 < out.size(); ++i) {
    out[i].next_tau = out[i + 1].tau;
    out[i].delta_t = out[i + 1].tau - out[i].tau;
    out[i].H = out[i + 1].level - out[i].level;
  }
  return out;
}

std::vector<IncrementPair> increments(std::span<const RegenRecord> records) {
  std::vector<IncrementPair> out;
  const RegenRecord* prev = nullptr;
  for (const auto& r : records) {
    if (!r.confirmed) break;
    if (prev) out.push_back({r.tau - prev->tau, r.level - prev->level});
    prev = &r;
  }
  return out;
}

std::vector<IncrementPair> iid_increments(std::span<const RegenRecord> records) {
  if (!records.empty() && !records.front().genuine) records = records.subspan(1);
  return increments(records);
}

std::int64_t regenerated_height(std::span<const RegenRecord> records, std::int64_t n) {
  std::int64_t h = 0;
  for (const auto& r : records) {
    if (!r.confirmed || r.tau > n) break;
    h = r.level;
  }
  return h;
}

FilterResult filter_short_tight(std::span<const IncrementPair> pairs, const TruncationParams& p) {
  FilterResult res;
  for (const auto& q : pairs) {
    if (q.H <= p.N && q.delta_t <= p.M)
      res.pairs.push_back(q);
  }
  res.kept = res.pairs.size();
  res.dropped = pairs.size() - res.kept;
  return res;
}

std::int64_t truncated_height_sum(std::span<const IncrementPair> pairs) {
  std::int64_t s = 0;
  for (const auto& q : pairs) s += q.H;
  return s;
}

std::int64_t truncated_time_sum(std::span<const IncrementPair> pairs) {
  std::int64_t s = 0;
  for (const auto& q : pairs) s += q.delta_t;
  return s;
}

double autocorrelation(std::span<const double> x, int lag) {
  const std::size_t m = x.size();
  if (m <= static_cast<std::size_t>(lag)) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  double den = 0.0;
  for (double v : x) den += (v - mean) * (v - mean);
  if (den == 0.0) return 0.0;
  double num = 0.0;
  for (std::size_t i = 0; i + lag < m; ++i) num += (x[i] - mean) * (x[i + lag] - mean);
  return num / den;
}

namespace {

// Max CDF gap given per-bucket counts of each sample over a common sorted
// support.
double gap_from_counts(std::span<const std::size_t> ca, std::size_t na,
                       std::span<const std::size_t> cb, std::size_t nb) {
  double fa = 0.0, fb = 0.0, d = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    fa += static_cast<double>(ca[i]) / static_cast<double>(na);
    fb += static_cast<double>(cb[i]) / static_cast<double>(nb);
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

void ks_halves(std::span<const std::int64_t> values, std::uint64_t seed, int permutations,
               SeriesDiagnostics& out) {
  const std::size_t m = values.size();
  const std::size_t half = m / 2;
  if (half == 0) return;

  std::vector<std::int64_t> support(values.begin(), values.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  std::vector<std::size_t> bucket(m);
  for (std::size_t i = 0; i < m; ++i)
    bucket[i] = static_cast<std::size_t>(
        std::lower_bound(support.begin(), support.end(), values[i]) - support.begin());

  std::vector<std::size_t> total(support.size(), 0);
  for (auto k : bucket) ++total[k];

  auto stat = [&](std::span<const std::size_t> order) {
    std::vector<std::size_t> ca(support.size(), 0);
    for (std::size_t i = 0; i < half; ++i) ++ca[order[i]];
    std::vector<std::size_t> cb(support.size());
    for (std::size_t k = 0; k < support.size(); ++k) cb[k] = total[k] - ca[k];
    return gap_from_counts(ca, half, cb, m - half);
  };

  out.ks_statistic = stat(bucket);
  Rng rng(seed);
  std::vector<std::size_t> perm = bucket;
  int extreme = 0;
  for (int p = 0; p < permutations; ++p) {
    // Only the first `half` slots matter: partial Fisher-Yates.
    for (std::size_t i = 0; i < half; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.bounded(m - i));
      std::swap(perm[i], perm[j]);
    }
    if (stat(perm) >= out.ks_statistic - 1e-12) ++extreme;
  }
  out.ks_p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + permutations);
}

void diagnose(std::span<const std::int64_t> values, double band, std::uint64_t seed,
              int permutations, SeriesDiagnostics& out) {
  std::vector<double> x(values.begin(), values.end());
  out.zero_variance = std::all_of(values.begin(), values.end(),
                                  [&](std::int64_t v) { return v == values.front(); });
  for (int lag = 1; lag <= kMaxLag; ++lag) {
    out.autocorr[lag - 1] = out.zero_variance ? 0.0 : autocorrelation(x, lag);
    out.within_band[lag - 1] = std::abs(out.autocorr[lag - 1]) <= band;
  }
  ks_halves(values, seed, permutations, out);
}

double binomial_upper_tail(int n, double p, int k) {
  double tail = 0.0;
  for (int j = k; j <= n; ++j)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                     j * std::log(p) + (n - j) * std::log1p(-p));
  return tail;
}

}  // namespace

double ks_statistic(std::span<const std::int64_t> a, std::span<const std::int64_t> b) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<std::int64_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    std::int64_t v;
    if (j == sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      v = sa[i];
    else
      v = sb[j];
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / sa.size() -
                             static_cast<double>(j) / sb.size()));
  }
  return d;
}

IidReport iid_diagnostics(std::span<const IncrementPair> pairs, std::uint64_t seed,
                          int permutations) {
  IidReport rep;
  rep.m = pairs.size();
  rep.insufficient_data = rep.m < kMinDiagnosticPairs;
  if (rep.m == 0) return rep;
  rep.band = 1.96 / std::sqrt(static_cast<double>(rep.m));

  std::vector<std::int64_t> dt(rep.m), h(rep.m);
  for (std::size_t i = 0; i < rep.m; ++i) {
    dt[i] = pairs[i].delta_t;
    h[i] = pairs[i].H;
  }
  diagnose(dt, rep.band, splitmix64(seed), permutations, rep.delta_t);
  diagnose(h, rep.band, splitmix64(seed + 1), permutations, rep.height);

  for (int l = 0; l < kMaxLag; ++l) {
    rep.outside_band += !rep.delta_t.within_band[l];
    rep.outside_band += !rep.height.within_band[l];
  }
  rep.autocorr_pass =
      binomial_upper_tail(2 * kMaxLag, 0.05, static_cast<int>(rep.outside_band)) >= 0.01;
  return rep;
}

}  // namespace rrw
