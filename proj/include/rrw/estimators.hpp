#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rrw/regeneration.hpp"
#include "rrw/walk.hpp"

namespace rrw {

// ---------------------------------------------------------------- speeds

enum class SpeedMethod { Direct, Ratio };

struct SpeedEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  SpeedMethod method = SpeedMethod::Direct;
  std::size_t replicas = 0;  // replicas (direct) or increment pairs (ratio)
  std::uint64_t horizon = 0;
};

/// Mean of h(X_n)/n across replicas.
SpeedEstimate speed_direct(std::span<const std::int32_t> final_heights, std::uint64_t horizon);
SpeedEstimate speed_direct(const WalkConfig& base, std::size_t replicas, int workers);

/// Mean height gain over mean duration per regeneration block, with a
/// delta-method standard error.
SpeedEstimate speed_ratio(std::span<const IncrementPair> pairs);

struct RegenMoments {
  std::size_t count = 0;
  double A = 0.0;  // mean delta_t
  double B = 0.0;  // mean H
  double var_A = 0.0;
  double var_B = 0.0;
  double cov_AB = 0.0;
};

RegenMoments regen_moments(std::span<const IncrementPair> pairs);

/// Regeneration increments and endpoints from a batch of replicas.
struct RegenSample {
  std::uint64_t horizon = 0;
  std::uint32_t margin = 0;
  std::vector<IncrementPair> pairs;  // concatenated in replica order
  std::vector<std::size_t> offsets;  // replica r owns pairs[offsets[r], offsets[r+1])
  std::vector<std::int32_t> final_heights;

  std::span<const IncrementPair> replica_pairs(std::size_t r) const {
    return std::span(pairs).subspan(offsets[r], offsets[r + 1] - offsets[r]);
  }
};

RegenSample collect_regeneration(const WalkConfig& base, std::size_t replicas, int workers,
                                 std::uint32_t margin = kDefaultMargin);

// ----------------------------------------------------------------- tails

enum class TailMethod { Naive, Tilted, Exact };
enum class TailSide { Upper, Lower };
/// Endpoint: h(X_n). Regenerated: h_n, the height of the last cut time at or
/// before n, detected on a run extended by `lookahead` steps.
enum class HeightFamily { Endpoint, Regenerated };

std::string_view to_string(TailMethod m);

struct TailEvent {
  TailSide side = TailSide::Upper;
  double threshold = 0.0;  // h >= threshold (upper) or h <= threshold (lower)
  HeightFamily family = HeightFamily::Endpoint;
  std::uint64_t lookahead = 0;
  std::uint32_t margin = kDefaultMargin;
};

struct TailEstimate {
  std::uint64_t n = 0;
  double threshold = 0.0;
  double p_hat = 0.0;
  double std_error = 0.0;
  TailMethod method = TailMethod::Naive;
  std::size_t replicas = 0;
  double tilt = 0.0;
  std::size_t hits = 0;
  double ess = 0.0;
  /// No replica hit; p_hat holds the rule-of-three upper bound 3/replicas.
  bool zero_hit = false;
  bool degenerate_ess = false;
};

inline constexpr double kMinEss = 10.0;

/// Importance-sampled estimate of P(event at step n). The proposal scales
/// every child-edge weight by e^tilt; tilt == 0 is plain Monte Carlo.
TailEstimate estimate_tail(const WalkConfig& base, const TailEvent& event, std::uint64_t n,
                           std::size_t replicas, int workers, double tilt = 0.0);

/// P(h(X_n) >= (speed + epsilon) n), naive Monte Carlo.
TailEstimate tail_upper(const WalkConfig& base, double speed, double epsilon, std::uint64_t n,
                        std::size_t replicas, int workers);
/// Same event under the forward-tilted proposal; tilt >= 0.
TailEstimate tail_upper_tilted(const WalkConfig& base, double speed, double epsilon,
                               std::uint64_t n, std::size_t replicas, int workers, double tilt);
/// P(h(X_n) <= level), naive Monte Carlo.
TailEstimate tail_lower(const WalkConfig& base, double level, std::uint64_t n,
                        std::size_t replicas, int workers);
/// Lower tail under a tilted proposal. Negative tilts push the walk towards
/// the root.
TailEstimate tail_lower_tilted(const WalkConfig& base, double level, std::uint64_t n,
                               std::size_t replicas, int workers, double tilt);

inline constexpr std::size_t kNaiveSufficientHits = 50;

/// Runs a pilot for each tilt on an independent seed and returns the tilt with
/// the largest effective sample size. Tilt 0 is returned as soon as its pilot
/// has at least kNaiveSufficientHits hits, since pilot ESS overstates the
/// quality of heavy-tailed tilted weights. Pilots without hits are skipped;
/// the first grid entry is returned when none hit.
double select_tilt(const WalkConfig& base, const TailEvent& event, std::uint64_t n,
                   std::span<const double> tilts, std::size_t pilot_replicas, int workers);

// ------------------------------------------------------------ rate curves

struct RatePoint {
  std::uint64_t n = 0;
  double rate = 0.0;  // -log(p_hat) / n
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double a_n = 0.0;     // -log(p_hat)
  double a_n_se = 0.0;  // delta-method standard error of a_n
};

struct RateCurve {
  std::vector<RatePoint> points;  // usable points only, ordered by n
  double plateau = 0.0;           // mean rate over the largest-n third
  double plateau_lo = 0.0;
  double plateau_hi = 0.0;
  double spread_min = 0.0;  // smallest and largest rate across the grid
  double spread_max = 0.0;
  bool too_few_points = false;
};

inline constexpr std::size_t kMinRatePoints = 4;

RateCurve rate_curve(std::span<const TailEstimate> estimates, std::uint64_t seed = 0x7a7e,
                     int resamples = 2000);

struct SubadditivityCheck {
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  double lhs = 0.0;       // a_{n+m+1}
  double rhs = 0.0;       // a_n + a_m + log n + N log 2 + log(b+1)
  double mc_error = 0.0;  // combined standard error of the three a values
  bool ok = false;
};

/// Checks a_{n+m+1} <= a_n + a_m + log n + N log 2 + log(b+1) + 3 * error for
/// every (n, m) whose three a values are present in `curve`.
std::vector<SubadditivityCheck> subadditivity_audit(
    const RateCurve& curve, std::uint32_t b, std::int64_t N,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> nm_pairs);

// -------------------------------------------------------- decay classes

enum class DecayClass { Polynomial, Exponential, Inconclusive };

std::string_view to_string(DecayClass c);

struct DecayPoint {
  double n = 0.0;
  double p = 0.0;
  double std_error = 0.0;
};

struct DecayFit {
  DecayClass decision = DecayClass::Inconclusive;
  std::size_t used = 0;
  double poly_slope = 0.0;  // d log p / d log n
  double poly_slope_se = 0.0;
  double poly_r2 = 0.0;
  double poly_chi2 = 0.0;
  double exp_rate = 0.0;  // -d log p / dn
  double exp_rate_se = 0.0;
  double exp_r2 = 0.0;
  double exp_chi2 = 0.0;
  double ic_gap = 0.0;  // |AIC_poly - AIC_exp|
};

inline constexpr double kDecayGapThreshold = 2.0;

/// Weighted fits of log p against log n and against n; picks the better model
/// when the information-criterion gap exceeds `gap_threshold`.
DecayFit decay_classify(std::span<const DecayPoint> points,
                        double gap_threshold = kDecayGapThreshold);

// -------------------------------------------------- increment tail shape

enum class IncrementField { DeltaT, Height };

struct SurvivalPoint {
  std::int64_t m = 0;
  double survival = 0.0;  // P(X >= m)
  double std_error = 0.0;
  std::size_t at_risk = 0;  // #{X >= m}
};

struct BoundCheck {
  std::int64_t k = 0;
  double survival = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  bool ok = false;
};

struct IncrementTailFit {
  std::vector<SurvivalPoint> survival;
  double hazard = 0.0;  // constant-hazard MLE
  double rate = 0.0;    // -log(1 - hazard)
  double rate_lo = 0.0;
  double rate_hi = 0.0;
  /// Slope of the per-m hazard in m; significantly negative hazard slope is a
  /// convex (positive-curvature) log-survival.
  double hazard_slope = 0.0;
  double hazard_slope_se = 0.0;
  bool curvature_violation = false;
  bool degenerate = false;
  bool insufficient_data = false;
  std::vector<BoundCheck> bound_checks;
  bool bound_violation = false;
};

inline constexpr std::size_t kMinTailPairs = 100;

/// Empirical survival of delta_t or H with an exponential-tail fit. When
/// `bound_base` is set, also checks P(X >= k) <= base^k + 3 se for k = 1..5.
IncrementTailFit increment_tail_fit(std::span<const IncrementPair> pairs, IncrementField which,
                                    std::optional<double> bound_base = std::nullopt,
                                    std::size_t min_at_risk = 5);

std::vector<BoundCheck> geometric_bound_check(std::span<const IncrementPair> pairs,
                                              IncrementField which, double base, int k_max = 5);

}  // namespace rrw
