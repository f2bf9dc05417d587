#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rrw/walk.hpp"

namespace rrw {

/// One cut time together with the block that starts at it.
struct RegenRecord {
  std::int64_t tau = 0;
  std::int64_t level = 0;        // h(X_tau)
  std::int64_t next_tau = -1;    // -1 when no later cut time exists in the horizon
  std::int64_t delta_t = 0;      // next_tau - tau, 0 when next_tau == -1
  std::int64_t H = 0;            // height gained over the block
  bool confirmed = false;
  /// False only for the step-0 record kept by convention when the root is
  /// revisited (so the root is not actually a cut vertex).
  bool genuine = true;
};

struct IncrementPair {
  std::int64_t delta_t = 0;
  std::int64_t H = 0;
  bool operator==(const IncrementPair&) const = default;
};

inline constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

struct TruncationParams {
  std::int64_t N = kUnbounded;  // height cap
  std::int64_t M = kUnbounded;  // time cap
  std::uint32_t margin = 0;
};

/// Default confirmation margin. A confirmed cut level must have been exceeded
/// by more than this many levels before the horizon.
inline constexpr std::uint32_t kDefaultMargin = 30;

LevelTimes level_times(std::span<const std::int32_t> heights);

/// Cut times (levels visited exactly once within the horizon) plus the step-0
/// record. A record at level k is confirmed when the walk reached a level
/// strictly above k + margin.
std::vector<RegenRecord> cut_times(const LevelTimes& levels, std::uint64_t horizon,
                                   std::uint32_t margin);

/// Differences between consecutive confirmed records. The final open block is
/// never emitted.
std::vector<IncrementPair> increments(std::span<const RegenRecord> records);

/// Increments between genuine confirmed cut times only, i.e. without the
/// initial block from step 0 to the first cut time when the root is not one.
std::vector<IncrementPair> iid_increments(std::span<const RegenRecord> records);

/// h_n: height of the last confirmed cut time at or before step n (0 if none
/// besides the step-0 record).
std::int64_t regenerated_height(std::span<const RegenRecord> records, std::int64_t n);

struct FilterResult {
  std::vector<IncrementPair> pairs;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Keeps N-short, M-tight pairs: H <= N and delta_t <= M.
FilterResult filter_short_tight(std::span<const IncrementPair> pairs, const TruncationParams& p);

std::int64_t truncated_height_sum(std::span<const IncrementPair> pairs);
std::int64_t truncated_time_sum(std::span<const IncrementPair> pairs);

inline constexpr int kMaxLag = 5;
inline constexpr std::size_t kMinDiagnosticPairs = 30;

struct SeriesDiagnostics {
  std::array<double, kMaxLag> autocorr{};
  std::array<bool, kMaxLag> within_band{};
  bool zero_variance = false;
  double ks_statistic = 0.0;  // max CDF gap between first and second half
  double ks_p_value = 1.0;    // permutation p-value
};

struct IidReport {
  std::size_t m = 0;
  double band = 0.0;  // 1.96 / sqrt(m)
  SeriesDiagnostics delta_t;
  SeriesDiagnostics height;
  bool insufficient_data = false;
  std::size_t outside_band = 0;
  /// Exceedances of the 95% bands are consistent with i.i.d. data: the
  /// binomial(2*kMaxLag, 0.05) upper tail at `outside_band` is >= 0.01.
  bool autocorr_pass = true;
};

IidReport iid_diagnostics(std::span<const IncrementPair> pairs, std::uint64_t seed = 0x5eed,
                          int permutations = 1000);

double autocorrelation(std::span<const double> x, int lag);

/// Two-sample max-CDF gap for integer data.
double ks_statistic(std::span<const std::int64_t> a, std::span<const std::int64_t> b);

}  // namespace rrw
