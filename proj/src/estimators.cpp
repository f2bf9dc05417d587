#include "rrw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "rrw/replicate.hpp"
#include "rrw/stats.hpp"

namespace rrw {

std::string_view to_string(TailMethod m) {
  switch (m) {
    case TailMethod::Naive: return "naive";
    case TailMethod::Tilted: return "tilted";
    case TailMethod::Exact: return "exact";
  }
  return "?";
}

std::string_view to_string(DecayClass c) {
  switch (c) {
    case DecayClass::Polynomial: return "polynomial";
    case DecayClass::Exponential: return "exponential";
    case DecayClass::Inconclusive: return "inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------- speeds

SpeedEstimate speed_direct(std::span<const std::int32_t> final_heights, std::uint64_t horizon) {
  if (final_heights.size() < 2)
    throw std::invalid_argument("speed_direct needs at least 2 replicas");
  if (horizon == 0) throw std::invalid_argument("speed_direct needs horizon >= 1");
  std::vector<double> v(final_heights.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(final_heights[i]) / static_cast<double>(horizon);
  const auto m = stats::moments(v);
  return {m.mean, m.std_error(), SpeedMethod::Direct, v.size(), horizon};
}

SpeedEstimate speed_direct(const WalkConfig& base, std::size_t replicas, int workers) {
  base.validate();
  auto heights = map_replicas(replicas, workers, [&](std::size_t r) {
    WalkConfig cfg = base;
    cfg.replica = r;
    return run_endpoint(cfg).final_height;
  });
  return speed_direct(heights, base.horizon);
}

RegenMoments regen_moments(std::span<const IncrementPair> pairs) {
  RegenMoments rm;
  rm.count = pairs.size();
  std::vector<double> dt(pairs.size()), h(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    dt[i] = static_cast<double>(pairs[i].delta_t);
    h[i] = static_cast<double>(pairs[i].H);
  }
  const auto mt = stats::moments(dt);
  const auto mh = stats::moments(h);
  rm.A = mt.mean;
  rm.B = mh.mean;
  rm.var_A = mt.variance;
  rm.var_B = mh.variance;
  rm.cov_AB = stats::covariance(dt, h);
  return rm;
}

SpeedEstimate speed_ratio(std::span<const IncrementPair> pairs) {
  if (pairs.size() < kMinDiagnosticPairs)
    throw std::invalid_argument("speed_ratio needs at least " +
                                std::to_string(kMinDiagnosticPairs) + " increment pairs, got " +
                                std::to_string(pairs.size()));
  const auto rm = regen_moments(pairs);
  const double r = rm.B / rm.A;
  const double var =
      (rm.var_B - 2.0 * r * rm.cov_AB + r * r * rm.var_A) / (static_cast<double>(rm.count) * rm.A * rm.A);
  return {r, std::sqrt(std::max(var, 0.0)), SpeedMethod::Ratio, rm.count, 0};
}

RegenSample collect_regeneration(const WalkConfig& base, std::size_t replicas, int workers,
                                 std::uint32_t margin) {
  base.validate();
  struct Out {
    std::vector<IncrementPair> pairs;
    std::int32_t final_height = 0;
  };
  auto outs = map_replicas(replicas, workers, [&](std::size_t r) {
    WalkConfig cfg = base;
    cfg.replica = r;
    cfg.record_heights = false;
    const auto trace = run(cfg);
    const auto records = cut_times(trace.levels, cfg.horizon, margin);
    return Out{iid_increments(records), trace.final_height};
  });
  RegenSample s;
  s.horizon = base.horizon;
  s.margin = margin;
  s.offsets.push_back(0);
  for (auto& o : outs) {
    s.pairs.insert(s.pairs.end(), o.pairs.begin(), o.pairs.end());
    s.offsets.push_back(s.pairs.size());
    s.final_heights.push_back(o.final_height);
  }
  return s;
}

// ----------------------------------------------------------------- tails

namespace {

struct ReplicaTail {
  bool hit = false;
  double log_lr = 0.0;
};

ReplicaTail tail_replica(const WalkConfig& base, const TailEvent& ev, std::uint64_t n,
                         std::uint64_t seed, std::size_t r, double tilt) {
  WalkConfig cfg = base;
  cfg.seed = seed;
  cfg.replica = r;
  cfg.record_heights = false;
  double h;
  double log_lr;
  if (ev.family == HeightFamily::Endpoint) {
    cfg.horizon = n;
    const auto e = run_endpoint(cfg, tilt);
    h = e.final_height;
    log_lr = e.log_lr;
  } else {
    cfg.horizon = n + ev.lookahead;
    const auto trace = run(cfg, tilt);
    const auto records = cut_times(trace.levels, cfg.horizon, ev.margin);
    h = static_cast<double>(regenerated_height(records, static_cast<std::int64_t>(n)));
    log_lr = trace.log_lr;
  }
  const bool hit = ev.side == TailSide::Upper ? h >= ev.threshold : h <= ev.threshold;
  return {hit, log_lr};
}

TailEstimate estimate_with_seed(const WalkConfig& base, const TailEvent& ev, std::uint64_t n,
                                std::size_t replicas, int workers, double tilt,
                                std::uint64_t seed) {
  base.validate();
  if (replicas == 0) throw std::invalid_argument("tail estimate needs at least one replica");
  auto outs = map_replicas(replicas, workers, [&](std::size_t r) {
    return tail_replica(base, ev, n, seed, r, tilt);
  });

  TailEstimate est;
  est.n = n;
  est.threshold = ev.threshold;
  est.replicas = replicas;
  est.tilt = tilt;
  est.method = tilt == 0.0 ? TailMethod::Naive : TailMethod::Tilted;

  std::vector<double> w(replicas, 0.0);
  stats::Sum sw, sw2;
  for (std::size_t r = 0; r < replicas; ++r) {
    if (!outs[r].hit) continue;
    ++est.hits;
    w[r] = std::exp(outs[r].log_lr);
    sw.add(w[r]);
    sw2.add(w[r] * w[r]);
  }
  const auto m = stats::moments(w);
  est.p_hat = m.mean;
  est.std_error = m.std_error();
  est.ess = sw2.value() > 0.0 ? sw.value() * sw.value() / sw2.value() : 0.0;
  if (est.method == TailMethod::Naive) {
    est.std_error = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(replicas));
  } else {
    est.degenerate_ess = est.ess < kMinEss;
  }
  if (est.hits == 0) {
    est.zero_hit = true;
    est.p_hat = 3.0 / static_cast<double>(replicas);
    est.std_error = 0.0;
  }
  return est;
}

void check_upper(double speed, double epsilon) {
  if (!(speed + epsilon <= 1.0))
    throw std::invalid_argument("upper-tail threshold (speed + epsilon) n exceeds n");
}

}  // namespace

TailEstimate estimate_tail(const WalkConfig& base, const TailEvent& event, std::uint64_t n,
                           std::size_t replicas, int workers, double tilt) {
  return estimate_with_seed(base, event, n, replicas, workers, tilt, base.seed);
}

TailEstimate tail_upper(const WalkConfig& base, double speed, double epsilon, std::uint64_t n,
                        std::size_t replicas, int workers) {
  check_upper(speed, epsilon);
  TailEvent ev{TailSide::Upper, (speed + epsilon) * static_cast<double>(n)};
  return estimate_tail(base, ev, n, replicas, workers);
}

TailEstimate tail_upper_tilted(const WalkConfig& base, double speed, double epsilon,
                               std::uint64_t n, std::size_t replicas, int workers, double tilt) {
  check_upper(speed, epsilon);
  if (!(tilt >= 0.0)) throw std::invalid_argument("upper-tail tilt must be >= 0");
  TailEvent ev{TailSide::Upper, (speed + epsilon) * static_cast<double>(n)};
  return estimate_tail(base, ev, n, replicas, workers, tilt);
}

TailEstimate tail_lower(const WalkConfig& base, double level, std::uint64_t n,
                        std::size_t replicas, int workers) {
  if (!(level >= 0.0)) throw std::invalid_argument("lower-tail level must be >= 0");
  TailEvent ev{TailSide::Lower, level};
  return estimate_tail(base, ev, n, replicas, workers);
}

TailEstimate tail_lower_tilted(const WalkConfig& base, double level, std::uint64_t n,
                               std::size_t replicas, int workers, double tilt) {
  if (!(level >= 0.0)) throw std::invalid_argument("lower-tail level must be >= 0");
  TailEvent ev{TailSide::Lower, level};
  return estimate_tail(base, ev, n, replicas, workers, tilt);
}

double select_tilt(const WalkConfig& base, const TailEvent& event, std::uint64_t n,
                   std::span<const double> tilts, std::size_t pilot_replicas, int workers) {
  if (tilts.empty()) return 0.0;
  const std::uint64_t pilot_seed = splitmix64(base.seed ^ 0x9110'7ba5'e5eeULL ^ n);
  double best = tilts.front();
  double best_ess = -1.0;
  for (double t : tilts) {
    const auto est = estimate_with_seed(base, event, n, pilot_replicas, workers, t, pilot_seed);
    if (est.zero_hit) continue;
    if (t == 0.0 && est.hits >= kNaiveSufficientHits) return 0.0;
    // Naive runs report binomial errors; their ESS is the hit count.
    const double ess = est.method == TailMethod::Naive ? static_cast<double>(est.hits) : est.ess;
    if (ess > best_ess) {
      best_ess = ess;
      best = t;
    }
  }
  return best;
}

// ------------------------------------------------------------ rate curves

RateCurve rate_curve(std::span<const TailEstimate> estimates, std::uint64_t seed, int resamples) {
  RateCurve curve;
  for (const auto& e : estimates) {
    if (e.zero_hit || !(e.p_hat > 0.0) || e.n == 0) continue;
    RatePoint pt;
    pt.n = e.n;
    pt.a_n = -std::log(e.p_hat);
    pt.a_n_se = e.std_error / e.p_hat;
    const double nn = static_cast<double>(e.n);
    pt.rate = pt.a_n / nn;
    pt.ci_lo = pt.rate - 1.96 * pt.a_n_se / nn;
    pt.ci_hi = pt.rate + 1.96 * pt.a_n_se / nn;
    curve.points.push_back(pt);
  }
  std::sort(curve.points.begin(), curve.points.end(),
            [](const RatePoint& a, const RatePoint& b) { return a.n < b.n; });
  curve.too_few_points = curve.points.size() < kMinRatePoints;
  if (curve.points.empty()) return curve;

  curve.spread_min = curve.spread_max = curve.points.front().rate;
  for (const auto& p : curve.points) {
    curve.spread_min = std::min(curve.spread_min, p.rate);
    curve.spread_max = std::max(curve.spread_max, p.rate);
  }

  const std::size_t k = std::max<std::size_t>(1, (curve.points.size() + 2) / 3);
  const auto top = std::span(curve.points).last(k);
  double mean = 0.0;
  for (const auto& p : top) mean += p.rate;
  curve.plateau = mean / static_cast<double>(k);

  // Parametric bootstrap on a_n.
  Rng rng(seed);
  std::vector<double> boot(static_cast<std::size_t>(resamples));
  for (auto& b : boot) {
    double s = 0.0;
    for (const auto& p : top)
      s += (p.a_n + p.a_n_se * stats::normal(rng)) / static_cast<double>(p.n);
    b = s / static_cast<double>(k);
  }
  std::sort(boot.begin(), boot.end());
  if (!boot.empty()) {
    curve.plateau_lo = boot[static_cast<std::size_t>(0.025 * (boot.size() - 1))];
    curve.plateau_hi = boot[static_cast<std::size_t>(0.975 * (boot.size() - 1))];
  }
  return curve;
}

std::vector<SubadditivityCheck> subadditivity_audit(
    const RateCurve& curve, std::uint32_t b, std::int64_t N,
    std::span<const std::pair<std::uint64_t, std::uint64_t>> nm_pairs) {
  std::map<std::uint64_t, const RatePoint*> by_n;
  for (const auto& p : curve.points) by_n[p.n] = &p;
  std::vector<SubadditivityCheck> out;
  for (auto [n, m] : nm_pairs) {
    auto pn = by_n.find(n), pm = by_n.find(m), ps = by_n.find(n + m + 1);
    if (pn == by_n.end() || pm == by_n.end() || ps == by_n.end()) continue;
    SubadditivityCheck c;
    c.n = n;
    c.m = m;
    c.lhs = ps->second->a_n;
    c.rhs = pn->second->a_n + pm->second->a_n + std::log(static_cast<double>(n)) +
            static_cast<double>(N) * std::log(2.0) + std::log(static_cast<double>(b) + 1.0);
    c.mc_error = std::sqrt(ps->second->a_n_se * ps->second->a_n_se +
                           pn->second->a_n_se * pn->second->a_n_se +
                           pm->second->a_n_se * pm->second->a_n_se);
    c.ok = c.lhs <= c.rhs + 3.0 * c.mc_error;
    out.push_back(c);
  }
  return out;
}

// -------------------------------------------------------- decay classes

DecayFit decay_classify(std::span<const DecayPoint> points, double gap_threshold) {
  std::vector<double> logn, n, logp, sigma;
  for (const auto& p : points) {
    if (!(p.p > 0.0) || !(p.n > 0.0)) continue;
    n.push_back(p.n);
    logn.push_back(std::log(p.n));
    logp.push_back(std::log(p.p));
    sigma.push_back(std::max(p.std_error / p.p, 1e-9));
  }
  if (n.empty()) throw std::invalid_argument("decay_classify: no point has p > 0");
  if (n.size() < 5)
    throw std::invalid_argument("decay_classify needs at least 5 points with p > 0");
  const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
  if (*hi < 4.0 * *lo) throw std::invalid_argument("decay_classify needs n spanning a 4x range");

  DecayFit fit;
  fit.used = n.size();
  const auto poly = stats::weighted_line(logn, logp, sigma);
  const auto expo = stats::weighted_line(n, logp, sigma);
  fit.poly_slope = poly.slope;
  fit.poly_slope_se = poly.slope_se;
  fit.poly_r2 = poly.r2;
  fit.poly_chi2 = poly.chi2;
  fit.exp_rate = -expo.slope;
  fit.exp_rate_se = expo.slope_se;
  fit.exp_r2 = expo.r2;
  fit.exp_chi2 = expo.chi2;
  // Both models have two parameters, so the AIC gap is the chi-square gap.
  const double gap = expo.chi2 - poly.chi2;
  fit.ic_gap = std::abs(gap);
  if (fit.ic_gap > gap_threshold)
    fit.decision = gap > 0 ? DecayClass::Polynomial : DecayClass::Exponential;
  return fit;
}

// -------------------------------------------------- increment tail shape

namespace {

std::vector<std::int64_t> field_values(std::span<const IncrementPair> pairs, IncrementField f) {
  std::vector<std::int64_t> v(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    v[i] = f == IncrementField::DeltaT ? pairs[i].delta_t : pairs[i].H;
  return v;
}

}  // namespace

std::vector<BoundCheck> geometric_bound_check(std::span<const IncrementPair> pairs,
                                              IncrementField which, double base, int k_max) {
  const auto v = field_values(pairs, which);
  std::vector<BoundCheck> out;
  if (v.empty()) return out;
  const double total = static_cast<double>(v.size());
  for (int k = 1; k <= k_max; ++k) {
    BoundCheck c;
    c.k = k;
    const auto at_least = std::count_if(v.begin(), v.end(), [k](std::int64_t x) { return x >= k; });
    c.survival = static_cast<double>(at_least) / total;
    c.std_error = std::sqrt(c.survival * (1.0 - c.survival) / total);
    c.bound = std::pow(base, k);
    c.ok = c.survival <= c.bound + 3.0 * c.std_error;
    out.push_back(c);
  }
  return out;
}

IncrementTailFit increment_tail_fit(std::span<const IncrementPair> pairs, IncrementField which,
                                    std::optional<double> bound_base, std::size_t min_at_risk) {
  IncrementTailFit fit;
  if (pairs.size() < kMinTailPairs) {
    fit.insufficient_data = true;
    return fit;
  }
  auto v = field_values(pairs, which);
  std::sort(v.begin(), v.end());
  const double total = static_cast<double>(v.size());

  std::map<std::int64_t, std::size_t> freq;
  for (auto x : v) ++freq[x];

  // Survival from the smallest value to one past the largest.
  std::size_t at_risk = v.size();
  double events = 0.0, exposure = 0.0;
  std::vector<double> hm, hv, hs;
  for (std::int64_t m = v.front(); m <= v.back() + 1; ++m) {
    SurvivalPoint sp;
    sp.m = m;
    sp.at_risk = at_risk;
    sp.survival = static_cast<double>(at_risk) / total;
    sp.std_error = std::sqrt(sp.survival * (1.0 - sp.survival) / total);
    fit.survival.push_back(sp);
    const auto it = freq.find(m);
    const std::size_t d = it == freq.end() ? 0 : it->second;
    if (at_risk >= min_at_risk) {
      events += static_cast<double>(d);
      exposure += static_cast<double>(at_risk);
      const double h = static_cast<double>(d) / static_cast<double>(at_risk);
      const double var = std::max(h * (1.0 - h), 1.0 / static_cast<double>(at_risk)) /
                         static_cast<double>(at_risk);
      hm.push_back(static_cast<double>(m));
      hv.push_back(h);
      hs.push_back(std::sqrt(var));
    }
    at_risk -= d;
  }

  fit.hazard = exposure > 0.0 ? events / exposure : 0.0;
  fit.degenerate = hm.size() < 2 || fit.hazard <= 0.0 || fit.hazard >= 1.0;
  if (!fit.degenerate) {
    fit.rate = -std::log1p(-fit.hazard);
    const double se_h = std::sqrt(fit.hazard * (1.0 - fit.hazard) / exposure);
    const double se_rate = se_h / (1.0 - fit.hazard);
    fit.rate_lo = fit.rate - 1.96 * se_rate;
    fit.rate_hi = fit.rate + 1.96 * se_rate;
  }
  if (hm.size() >= 3) {
    const auto line = stats::weighted_line(hm, hv, hs);
    fit.hazard_slope = line.slope;
    fit.hazard_slope_se = line.slope_se;
    fit.curvature_violation = line.slope < -3.0 * line.slope_se;
  }
  if (bound_base) {
    fit.bound_checks = geometric_bound_check(pairs, which, *bound_base);
    fit.bound_violation = std::any_of(fit.bound_checks.begin(), fit.bound_checks.end(),
                                      [](const BoundCheck& c) { return !c.ok; });
  }
  return fit;
}

}  // namespace rrw
