#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rrw {

enum class SchemeKind { Linear, Once, KTimes };

/// Edge reinforcement rule. Weights start at 1 and grow with the number of
/// traversals of the edge according to `kind`.
struct Scheme {
  SchemeKind kind = SchemeKind::Linear;
  double c = 2.0;
  std::uint32_t k_max = 1;  // KTimes only

  static Scheme linear(double c) { return {SchemeKind::Linear, c, 1}; }
  static Scheme once(double c) { return {SchemeKind::Once, c, 1}; }
  static Scheme ktimes(double c, std::uint32_t k_max) {
    return {SchemeKind::KTimes, c, k_max};
  }

  void validate() const {
    if (!(c >= 1.0) || !std::isfinite(c))
      throw std::invalid_argument("reinforcement factor c must be finite and >= 1");
    if (kind == SchemeKind::KTimes && k_max < 1)
      throw std::invalid_argument("k_max must be >= 1");
  }

  /// True when every weight the rule can produce is an integer, so step
  /// normalization can be done in exact integer arithmetic.
  bool integral() const {
    return c == std::floor(c) && c < 1e6;
  }
};

/// Weight of an edge that has been traversed `count` times.
inline double weight_after(const Scheme& s, std::uint64_t count) {
  switch (s.kind) {
    case SchemeKind::Linear:
      return 1.0 + static_cast<double>(count) * (s.c - 1.0);
    case SchemeKind::Once:
      return count == 0 ? 1.0 : s.c;
    case SchemeKind::KTimes:
      return 1.0 + static_cast<double>(std::min<std::uint64_t>(count, s.k_max)) * (s.c - 1.0);
  }
  return 1.0;
}

inline std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::Linear: return "linear";
    case SchemeKind::Once: return "once";
    case SchemeKind::KTimes: return "ktimes";
  }
  return "?";
}

inline SchemeKind parse_scheme_kind(std::string_view s) {
  if (s == "linear") return SchemeKind::Linear;
  if (s == "once") return SchemeKind::Once;
  if (s == "ktimes") return SchemeKind::KTimes;
  throw std::invalid_argument("unknown scheme '" + std::string(s) +
                              "' (expected linear, once or ktimes)");
}

}  // namespace rrw
