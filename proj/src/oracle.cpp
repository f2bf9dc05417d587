#include "rrw/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace rrw::oracle {

namespace {

void check_steps(std::uint32_t n, std::uint32_t n_max) {
  if (n > n_max)
    throw StateExplosionError("exact enumeration refused: n = " + std::to_string(n) +
                              " exceeds n_max = " + std::to_string(n_max));
}

// Weight rule in the enumerator's number type.
template <class P>
struct Weights {
  const Scheme& scheme;
  P c;
  P operator()(std::uint32_t count) const {
    switch (scheme.kind) {
      case SchemeKind::Linear:
        return P(1) + P(count) * (c - P(1));
      case SchemeKind::Once:
        return count == 0 ? P(1) : c;
      case SchemeKind::KTimes:
        return P(1) + P(std::min(count, scheme.k_max)) * (c - P(1));
    }
    return P(1);
  }
};

struct ONode {
  int parent = -1;
  int depth = 0;
  std::uint32_t up = 0;
  std::vector<int> children;
};

struct OState {
  std::vector<ONode> nodes{ONode{}};
  int pos = 0;
};

std::string encode(const OState& s, int v) {
  std::vector<std::string> kids;
  for (int ch : s.nodes[v].children) kids.push_back(encode(s, ch));
  std::sort(kids.begin(), kids.end());
  std::string out = "(" + std::to_string(s.nodes[v].up);
  if (v == s.pos) out += '*';
  for (auto& k : kids) out += k;
  out += ')';
  return out;
}

// Applies every folded move from `s`, calling visit(next_state, weight, Z).
template <class P, class Visit>
void expand(const OState& s, std::uint32_t b, const Weights<P>& w, Visit&& visit) {
  const ONode& cur = s.nodes[s.pos];
  const std::uint32_t fresh = b - static_cast<std::uint32_t>(cur.children.size());
  P z = fresh;
  const P wp = s.pos == 0 ? P(0) : w(cur.up);
  z += wp;
  for (int ch : cur.children) z += w(s.nodes[ch].up);

  if (s.pos != 0) {
    OState next = s;
    ++next.nodes[s.pos].up;
    next.pos = cur.parent;
    visit(next, wp, z);
  }
  for (int ch : cur.children) {
    OState next = s;
    ++next.nodes[ch].up;
    next.pos = ch;
    visit(next, w(s.nodes[ch].up), z);
  }
  if (fresh > 0) {
    OState next = s;
    ONode child;
    child.parent = s.pos;
    child.depth = cur.depth + 1;
    child.up = 1;
    next.nodes.push_back(child);
    const int id = static_cast<int>(next.nodes.size()) - 1;
    next.nodes[s.pos].children.push_back(id);
    next.pos = id;
    visit(next, P(fresh), z);
  }
}

template <class P>
std::vector<P> bfs_law(std::uint32_t b, const Weights<P>& w, std::uint32_t n) {
  std::map<std::string, std::pair<OState, P>> frontier;
  OState root;
  frontier.emplace(encode(root, 0), std::make_pair(root, P(1)));
  for (std::uint32_t j = 0; j < n; ++j) {
    std::map<std::string, std::pair<OState, P>> next;
    for (const auto& [key, entry] : frontier) {
      const auto& [state, prob] = entry;
      expand<P>(state, b, w, [&](const OState& s, const P& weight, const P& z) {
        P mass = prob * weight / z;
        auto k = encode(s, 0);
        auto it = next.find(k);
        if (it == next.end())
          next.emplace(std::move(k), std::make_pair(s, mass));
        else
          it->second.second += mass;
      });
    }
    frontier = std::move(next);
  }
  std::vector<P> law(n + 1, P(0));
  for (const auto& [key, entry] : frontier)
    law[entry.first.nodes[entry.first.pos].depth] += entry.second;
  return law;
}

template <class P>
P dfs_event(std::uint32_t b, const Weights<P>& w, std::uint32_t n, const HeightPredicate& event) {
  std::vector<std::int32_t> path{0};
  P total(0);
  auto rec = [&](auto&& self, const OState& s, const P& prob) -> void {
    if (path.size() == n + 1) {
      if (event(path)) total += prob;
      return;
    }
    expand<P>(s, b, w, [&](const OState& next, const P& weight, const P& z) {
      path.push_back(next.nodes[next.pos].depth);
      self(self, next, prob * weight / z);
      path.pop_back();
    });
  };
  rec(rec, OState{}, P(1));
  return total;
}

// Every neighbour enumerated individually; children keyed by explicit index.
template <class P>
std::vector<P> naive_law(std::uint32_t b, const Weights<P>& w, std::uint32_t n) {
  struct NNode {
    int parent;
    int depth;
    std::uint32_t up;
    std::vector<int> child;  // size b, -1 = untouched
  };
  std::vector<NNode> nodes{{-1, 0, 0, std::vector<int>(b, -1)}};
  std::vector<P> law(n + 1, P(0));

  auto rec = [&](auto&& self, int pos, std::uint32_t steps, const P& prob) -> void {
    if (steps == n) {
      law[nodes[pos].depth] += prob;
      return;
    }
    P z(0);
    if (pos != 0) z += w(nodes[pos].up);
    for (std::uint32_t i = 0; i < b; ++i) {
      const int ch = nodes[pos].child[i];
      z += ch < 0 ? P(1) : w(nodes[ch].up);
    }
    if (pos != 0) {
      const P pr = prob * w(nodes[pos].up) / z;
      ++nodes[pos].up;
      self(self, nodes[pos].parent, steps + 1, pr);
      --nodes[pos].up;
    }
    for (std::uint32_t i = 0; i < b; ++i) {
      int ch = nodes[pos].child[i];
      bool created = false;
      if (ch < 0) {
        nodes.push_back({pos, nodes[pos].depth + 1, 0, std::vector<int>(b, -1)});
        ch = static_cast<int>(nodes.size()) - 1;
        nodes[pos].child[i] = ch;
        created = true;
      }
      const P pr = prob * w(nodes[ch].up) / z;
      ++nodes[ch].up;
      self(self, ch, steps + 1, pr);
      --nodes[ch].up;
      if (created) {
        nodes[pos].child[i] = -1;
        nodes.pop_back();
      }
    }
  };
  rec(rec, 0, 0, P(1));
  return law;
}

template <class Fn>
ExactLaw dispatch_law(const Scheme& scheme, Fn&& fn) {
  ExactLaw out;
  if (auto c = rational_factor(scheme.c)) {
    auto law = fn(Weights<Rational>{scheme, *c});
    for (const auto& p : law) out.prob.push_back(static_cast<double>(p));
    out.exact = std::move(law);
  } else {
    auto law = fn(Weights<long double>{scheme, static_cast<long double>(scheme.c)});
    for (const auto& p : law) out.prob.push_back(static_cast<double>(p));
  }
  return out;
}

}  // namespace

double ExactLaw::upper(std::int64_t threshold) const {
  double s = 0.0;
  for (std::size_t h = 0; h < prob.size(); ++h)
    if (static_cast<std::int64_t>(h) >= threshold) s += prob[h];
  return s;
}

double ExactLaw::lower(std::int64_t level) const {
  double s = 0.0;
  for (std::size_t h = 0; h < prob.size(); ++h)
    if (static_cast<std::int64_t>(h) <= level) s += prob[h];
  return s;
}

std::optional<Rational> rational_factor(double c) {
  for (long q = 1; q <= 1000; ++q) {
    const double p = c * static_cast<double>(q);
    if (std::abs(p - std::round(p)) < 1e-9 && std::abs(p) < 1e12)
      return Rational(static_cast<long long>(std::llround(p)), q);
  }
  return std::nullopt;
}

ExactLaw exact_distribution(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                            std::uint32_t n_max) {
  check_steps(n, n_max);
  scheme.validate();
  if (b < 2) throw std::invalid_argument("branching factor b must be >= 2");
  return dispatch_law(scheme, [&](const auto& w) { return bfs_law(b, w, n); });
}

double exact_event_prob(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                        const HeightPredicate& event, std::uint32_t n_max) {
  check_steps(n, n_max);
  scheme.validate();
  if (b < 2) throw std::invalid_argument("branching factor b must be >= 2");
  if (auto c = rational_factor(scheme.c))
    return static_cast<double>(dfs_event(b, Weights<Rational>{scheme, *c}, n, event));
  return static_cast<double>(
      dfs_event(b, Weights<long double>{scheme, static_cast<long double>(scheme.c)}, n, event));
}

ExactLaw exact_distribution_uncollapsed(std::uint32_t b, const Scheme& scheme, std::uint32_t n,
                                        std::uint32_t n_max) {
  check_steps(n, n_max);
  scheme.validate();
  if (b < 2) throw std::invalid_argument("branching factor b must be >= 2");
  return dispatch_law(scheme, [&](const auto& w) { return naive_law(b, w, n); });
}

HeightPredicate cut_level_event(std::int32_t k) {
  return [k](std::span<const std::int32_t> h) {
    return std::count(h.begin(), h.end(), k) == 1;
  };
}

}  // namespace rrw::oracle
