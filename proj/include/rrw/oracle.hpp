#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rrw/scheme.hpp"

namespace rrw::oracle {

using Rational = boost::multiprecision::cpp_rational;

class StateExplosionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kDefaultMaxSteps = 8;
inline constexpr std::uint32_t kUncollapsedMaxSteps = 5;

/// Law of h(X_n). `exact` is populated when c is a ratio of small integers;
/// `prob` always holds the values (long double accumulation otherwise).
struct ExactLaw {
  std::vector<double> prob;  // index = height
  std::optional<std::vector<Rational>> exact;

  double at(std::size_t h) const { return h < prob.size() ? prob[h] : 0.0; }
  double upper(std::int64_t threshold) const;  // P(h >= threshold)
  double lower(std::int64_t level) const;      // P(h <= level)
};

/// c as p/q with q <= 1000, if it is one.
std::optional<Rational> rational_factor(double c);

/// Exact law by breadth-first enumeration. At each vertex all unvisited
/// children are folded into one branch, and states with identical canonical
/// shape (isomorphic visited subtree, same current vertex, same counts) are
/// merged between steps.
ExactLaw exact_distribution(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                            std::uint32_t n_max = kDefaultMaxSteps);

using HeightPredicate = std::function<bool(std::span<const std::int32_t>)>;

/// Exact probability of an event on the height path h(X_0..n), by depth-first
/// enumeration with unvisited children folded together (no state merging).
double exact_event_prob(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                        const HeightPredicate& event, std::uint32_t n_max = kDefaultMaxSteps);

/// Reference enumerator over every individual neighbour with no folding or
/// merging. Exponential in n; refuses above `n_max`.
ExactLaw exact_distribution_uncollapsed(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                                        std::uint32_t n_max = kUncollapsedMaxSteps);

/// Level k is visited exactly once along the path.
HeightPredicate cut_level_event(std::int32_t k);

}  // namespace rrw::oracle
