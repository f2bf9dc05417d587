// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "rrw/estimators.hpp"
#include "rrw/oracle.hpp"
#include "rrw/replicate.hpp"
#include "rrw/stats.hpp"
#include "test_oracles.hpp"

using namespace rrw;

namespace {

// Tolerances and sizes.
constexpr double kZ = 3.0;
constexpr std::size_t kOracleReplicas = 100000;
constexpr std::size_t kSpeedReplicas = 100;
constexpr std::uint64_t kSpeedHorizon = 100000;
constexpr std::size_t kBoundReplicas = 20;
constexpr std::uint64_t kBoundHorizon = 100000;
constexpr std::size_t kMinBoundPairs = 10000;
constexpr double kHeightBoundBase = 0.115;
constexpr int kHeightBoundMaxK = 5;
constexpr double kSyntheticNoise = 0.01;
constexpr int kSyntheticTrials = 100;
constexpr double kSyntheticAccuracy = 0.95;
constexpr std::size_t kDecayReplicas = 200000;
constexpr std::size_t kPilotReplicas = 2000;
constexpr double kEpsilon = 0.1;
constexpr std::size_t kUpperReplicas = 20000;
constexpr std::size_t kMinAuditPairs = 10;
constexpr int kIidRuns = 50;
constexpr std::size_t kIidMaxPairs = 5000;
constexpr int kIidPermutations = 200;
constexpr double kIidPassRate = 0.90;
constexpr int kUnbiasedReps = 200;
constexpr std::size_t kUnbiasedReplicas = 1000;

int workers = 1;
int failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const char* name, bool pass, const std::string& detail, double secs,
            double limit) {
  const bool in_time = secs <= limit;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  std::printf("%s  %2d  %-28s %s [%.1fs / limit %.0fs%s]\n", ok ? "PASS" : "FAIL", id, name,
              detail.c_str(), secs, limit, in_time ? "" : ", over time");
  std::fflush(stdout);
}

void info(const std::string& s) {
  std::printf("      info: %s\n", s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

WalkConfig make(std::uint32_t b, Scheme s, std::uint64_t seed, std::uint64_t horizon = 0) {
  WalkConfig c;
  c.b = b;
  c.scheme = s;
  c.seed = seed;
  c.horizon = horizon;
  return c;
}

// 1 ---------------------------------------------------------------------
void oracle_equivalence() {
  const auto t0 = Clock::now();
  int atoms = 0, bad = 0;
  double worst = 0.0;
  std::string worst_at;
  std::uint64_t seed = 1000;
  for (std::uint32_t b : {2u, 3u, 4u}) {
    for (double c : {1.0, 2.0}) {
      for (Scheme s : {Scheme::linear(c), Scheme::once(c), Scheme::ktimes(c, 2)}) {
        for (std::uint32_t n : {2u, 4u, 6u}) {
          const auto law = oracle::exact_distribution(b, s, n);
          const auto cfg = make(b, s, ++seed, n);
          const auto h = map_replicas(kOracleReplicas, workers, [&](std::size_t r) {
            WalkConfig w = cfg;
            w.replica = r;
            w.record_heights = false;
            return run_endpoint(w).final_height;
          });
          std::vector<std::size_t> counts(n + 1, 0);
          for (auto x : h) ++counts[static_cast<std::size_t>(x)];
          for (std::size_t k = 0; k <= n; ++k) {
            const double p = law.at(k);
            const double mc = static_cast<double>(counts[k]) / kOracleReplicas;
            const double se = std::sqrt(p * (1 - p) / kOracleReplicas);
            ++atoms;
            const double diff = std::abs(mc - p);
            const bool ok = se > 0 ? diff <= kZ * se : diff == 0.0;
            if (!ok) ++bad;
            if (se > 0 && diff / se > worst) {
              worst = diff / se;
              worst_at = fmt("b=%u %s c=%g n=%u h=%zu", b, std::string(to_string(s.kind)).c_str(),
                             c, n, k);
            }
          }
        }
      }
    }
  }
  report(1, "oracle-equivalence", bad == 0,
         fmt("%d atoms, %d outside 3se, max |z| = %.2f (%s)", atoms, bad, worst, worst_at.c_str()),
         seconds_since(t0), 120);
}

// 2 ---------------------------------------------------------------------
void simple_walk_calibration() {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  for (std::uint32_t b : {2u, 3u}) {
    const auto e = speed_direct(make(b, Scheme::linear(1), 200 + b, kSpeedHorizon),
                                kSpeedReplicas, workers);
    const double truth = (b - 1.0) / (b + 1.0);
    const double bd = testing::birth_death_speed(b, kSpeedHorizon, 20, 300 + b);
    const bool ok = std::abs(e.estimate - truth) <= kZ * e.std_error;
    pass = pass && ok;
    detail += fmt("b=%u: %.5f +- %.5f vs %.5f (birth-death chain %.5f); ", b, e.estimate,
                  e.std_error, truth, bd);
  }
  report(2, "simple-walk-calibration", pass, detail, seconds_since(t0), 60);
}

struct BoundRun {
  RegenSample sample;
  SpeedEstimate direct;
  SpeedEstimate ratio;
  double seconds = 0.0;
};

BoundRun bound_run(std::uint32_t b, Scheme s, std::uint64_t seed) {
  const auto t0 = Clock::now();
  BoundRun r;
  r.sample = collect_regeneration(make(b, s, seed, kBoundHorizon), kBoundReplicas, workers);
  r.direct = speed_direct(r.sample.final_heights, kBoundHorizon);
  r.ratio = speed_ratio(r.sample.pairs);
  r.seconds = seconds_since(t0);
  return r;
}

// 3, 4 ------------------------------------------------------------------
void speed_bound(int id, const char* name, const BoundRun& r, double bound, double limit) {
  const double upper = r.direct.estimate + kZ * r.direct.std_error;
  report(id, name, upper < bound,
         fmt("speed %.5f +- %.5f, estimate + 3se = %.5f < %.5f", r.direct.estimate,
             r.direct.std_error, upper, bound),
         r.seconds, limit);
}

// 5 ---------------------------------------------------------------------
void height_survival(const BoundRun& r) {
  const auto t0 = Clock::now();
  const auto checks =
      geometric_bound_check(r.sample.pairs, IncrementField::Height, kHeightBoundBase, kHeightBoundMaxK);
  bool pass = r.sample.pairs.size() >= kMinBoundPairs;
  std::string detail = fmt("%zu increments;", r.sample.pairs.size());
  for (const auto& c : checks) {
    pass = pass && c.ok;
    detail += fmt(" k=%lld: %.5f%s%.5f", static_cast<long long>(c.k), c.survival,
                  c.ok ? "<=" : ">", c.bound);
  }
  report(5, "increment-height-survival", pass, detail, r.seconds + seconds_since(t0), 600);
  // Same data against the bound shifted by one, P(H >= k + 1) <= 0.115^k.
  const auto shifted =
      geometric_bound_check(r.sample.pairs, IncrementField::Height, kHeightBoundBase, kHeightBoundMaxK + 1);
  std::string alt;
  for (std::size_t i = 1; i < shifted.size(); ++i) {
    const double bound = std::pow(kHeightBoundBase, static_cast<double>(i));
    const bool ok = shifted[i].survival <= bound + kZ * shifted[i].std_error;
    alt += fmt(" P(H>=%zu)=%.5f%s%.5f", i + 1, shifted[i].survival, ok ? "<=" : ">", bound);
  }
  info("shifted reading:" + alt);
}

// 6 ---------------------------------------------------------------------
void ratio_vs_direct(const BoundRun& linear, const BoundRun& once) {
  bool pass = true;
  std::string detail;
  for (const auto* r : {&linear, &once}) {
    const double se = std::hypot(r->direct.std_error, r->ratio.std_error);
    const bool ok = std::abs(r->direct.estimate - r->ratio.estimate) <= kZ * se;
    pass = pass && ok;
    detail += fmt("%s: direct %.5f ratio %.5f (3se %.5f); ", r == &linear ? "linear b=70" : "once b=2",
                  r->direct.estimate, r->ratio.estimate, kZ * se);
  }
  report(6, "ratio-equals-direct", pass, detail, linear.seconds + once.seconds, 420);
}

// 7 ---------------------------------------------------------------------
double synthetic_accuracy() {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> grid{10, 20, 40, 80, 160};
  int correct = 0;
  for (int t = 0; t < kSyntheticTrials; ++t) {
    const bool poly = t % 2 == 0;
    const double slope = 0.5 + 2.0 * u(gen);
    const double rate = 0.01 + 0.09 * u(gen);
    std::vector<DecayPoint> pts;
    for (double n : grid) {
      const double p = poly ? std::pow(n, -slope) : std::exp(-rate * n);
      pts.push_back({n, p * (1.0 + kSyntheticNoise * z(gen)), kSyntheticNoise * p});
    }
    const auto fit = decay_classify(pts);
    correct += fit.decision == (poly ? DecayClass::Polynomial : DecayClass::Exponential);
  }
  return static_cast<double>(correct) / kSyntheticTrials;
}

DecayFit lower_tail_decay(Scheme s, std::uint64_t seed, const std::vector<std::uint64_t>& grid,
                          std::string& detail) {
  const std::vector<double> tilts{0.0, -0.25, -0.5, -1.0};
  const auto base = make(2, s, seed);
  const TailEvent ev{TailSide::Lower, 1.0};
  std::vector<DecayPoint> pts;
  for (auto n : grid) {
    const double tilt = select_tilt(base, ev, n, tilts, kPilotReplicas, workers);
    const auto e = estimate_tail(base, ev, n, kDecayReplicas, workers, tilt);
    detail += fmt(" n=%llu:%.3g+-%.2g(t=%g)", static_cast<unsigned long long>(n), e.p_hat,
                  e.std_error, tilt);
    if (!e.zero_hit) pts.push_back({static_cast<double>(n), e.p_hat, e.std_error});
  }
  return decay_classify(pts);
}

void decay_dichotomy() {
  const auto t0 = Clock::now();
  const double acc = synthetic_accuracy();
  const bool gate = acc >= kSyntheticAccuracy;
  const std::vector<std::uint64_t> grid{10, 20, 40, 80, 160};
  std::string dl, dor;
  const auto lin = lower_tail_decay(Scheme::linear(2), 701, grid, dl);
  const auto orw = lower_tail_decay(Scheme::once(2), 702, grid, dor);
  const bool pass = gate && lin.decision == DecayClass::Polynomial &&
                    orw.decision == DecayClass::Exponential;
  report(7, "lower-tail-decay-dichotomy", pass,
         fmt("synthetic accuracy %.2f; linear c=2 -> %s (slope %.3f, chi2 poly %.1f exp %.1f); "
             "once c=2 -> %s (slope %.3f, rate %.4f, chi2 poly %.1f exp %.1f)",
             acc, std::string(to_string(lin.decision)).c_str(), lin.poly_slope, lin.poly_chi2,
             lin.exp_chi2, std::string(to_string(orw.decision)).c_str(), orw.poly_slope,
             orw.exp_rate, orw.poly_chi2, orw.exp_chi2),
         seconds_since(t0), 900);
  info("linear P(h<=1):" + dl);
  info("once P(h<=1):" + dor);
}

// 8 ---------------------------------------------------------------------
void upper_rate(const BoundRun& once) {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> small{20, 30, 40, 50, 60};
  std::vector<std::uint64_t> grid = small;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> nm;
  for (std::size_t i = 0; i < small.size(); ++i)
    for (std::size_t j = i; j < small.size(); ++j) {
      nm.emplace_back(small[i], small[j]);
      grid.push_back(small[i] + small[j] + 1);
    }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const std::vector<double> tilts{0.0, 0.25, 0.5, 1.0};

  const auto lin_base = make(2, Scheme::linear(2), 801);
  const double lin_speed = speed_direct(make(2, Scheme::linear(2), 811, kBoundHorizon),
                                        kBoundReplicas, workers)
                               .estimate;
  bool pass = true;
  std::string detail;
  for (auto [name, base, speed] :
       {std::tuple{"linear b=2", lin_base, lin_speed},
        std::tuple{"once b=2", make(2, Scheme::once(2), 802), once.direct.estimate}}) {
    const TailEvent proto{TailSide::Upper, 0.0};
    std::vector<TailEstimate> est;
    for (auto n : grid) {
      TailEvent ev = proto;
      ev.threshold = (speed + kEpsilon) * static_cast<double>(n);
      const double tilt = select_tilt(base, ev, n, tilts, kPilotReplicas, workers);
      est.push_back(estimate_tail(base, ev, n, kUpperReplicas, workers, tilt));
    }
    const auto curve = rate_curve(est, base.seed);
    bool positive = curve.points.size() == grid.size();
    double min_lo = 1e300;
    for (const auto& p : curve.points) {
      positive = positive && p.rate > 0 && p.ci_lo > 0;
      min_lo = std::min(min_lo, p.ci_lo);
    }
    const auto audit = subadditivity_audit(curve, base.b, 1, nm);
    std::size_t ok = 0;
    for (const auto& a : audit) ok += a.ok;
    const bool model_pass = positive && audit.size() >= kMinAuditPairs && ok == audit.size();
    pass = pass && model_pass;
    detail += fmt("%s: speed %.4f, %zu/%zu points, min CI low %.4f, plateau %.4f, audit %zu/%zu; ",
                  name, speed, curve.points.size(), grid.size(), min_lo, curve.plateau, ok,
                  audit.size());
  }
  report(8, "upper-tail-rate-positivity", pass, detail, seconds_since(t0), 900);
}

// 9 ---------------------------------------------------------------------
void iid_regeneration() {
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail;
  struct Model {
    const char* name;
    std::uint32_t b;
    Scheme s;
    std::uint64_t horizon;
  };
  for (const auto& m : {Model{"linear c=2 b=70", 70, Scheme::linear(2), 20000},
                        Model{"once c=2 b=2", 2, Scheme::once(2), 100000}}) {
    const auto sample = collect_regeneration(make(m.b, m.s, 900 + m.b, m.horizon), kIidRuns, workers);
    int eligible = 0, passed = 0, strict = 0;
    for (int r = 0; r < kIidRuns; ++r) {
      auto pairs = sample.replica_pairs(static_cast<std::size_t>(r));
      if (pairs.size() > kIidMaxPairs) pairs = pairs.first(kIidMaxPairs);
      const auto rep = iid_diagnostics(pairs, 9000 + r, kIidPermutations);
      if (rep.insufficient_data) continue;
      ++eligible;
      passed += rep.autocorr_pass;
      strict += rep.outside_band == 0;
    }
    const double rate = eligible ? static_cast<double>(passed) / eligible : 0.0;
    pass = pass && eligible == kIidRuns && rate >= kIidPassRate;
    detail += fmt("%s: %d/%d runs pass (all 10 lags inside: %d); ", m.name, passed, eligible,
                  strict);
  }
  report(9, "iid-regeneration", pass, detail, seconds_since(t0), 600);
}

// 10 --------------------------------------------------------------------
void tilted_unbiasedness() {
  const auto t0 = Clock::now();
  const std::uint64_t n = 6;
  const double threshold = 4.0;
  const double exact = oracle::exact_distribution(2, Scheme::linear(2), n).upper(4);
  bool pass = true;
  std::string detail = fmt("exact %.6f;", exact);
  for (double tilt : {0.0, 0.25, 0.5}) {
    std::vector<double> est(kUnbiasedReps);
    for (int r = 0; r < kUnbiasedReps; ++r) {
      const auto base = make(2, Scheme::linear(2), 10000 + r);
      est[r] = estimate_tail(base, {TailSide::Upper, threshold}, n, kUnbiasedReplicas, workers, tilt)
                   .p_hat;
    }
    const auto m = stats::moments(est);
    const bool ok = std::abs(m.mean - exact) <= kZ * m.std_error();
    pass = pass && ok;
    detail += fmt(" tilt %.2f: %.6f +- %.6f", tilt, m.mean, m.std_error());
  }
  report(10, "tilted-unbiasedness", pass, detail, seconds_since(t0), 600);
}

}  // namespace

int main() {
  workers = default_workers();
  std::printf("acceptance run, %d worker(s)\n", workers);
  oracle_equivalence();
  simple_walk_calibration();
  const auto linear70 = bound_run(70, Scheme::linear(2), 301);
  speed_bound(3, "linear-speed-bound", linear70, 70.0 / 72.0, 300);
  const auto once2 = bound_run(2, Scheme::once(2), 401);
  speed_bound(4, "once-speed-bound", once2, 0.5, 120);
  height_survival(linear70);
  ratio_vs_direct(linear70, once2);
  decay_dichotomy();
  upper_rate(once2);
  iid_regeneration();
  tilted_unbiasedness();
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
