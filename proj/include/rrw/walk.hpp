#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rrw/rng.hpp"
#include "rrw/scheme.hpp"

namespace rrw {

class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vertex named by the child indices along the path from the root.
struct VertexId {
  std::vector<std::uint32_t> path;

  std::size_t depth() const { return path.size(); }
  bool operator==(const VertexId&) const = default;
};

struct WalkConfig {
  std::uint32_t b = 2;
  Scheme scheme{};
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  /// Cap on materialized edges; 0 means horizon + 1.
  std::size_t max_edges = 0;
  bool record_heights = true;

  void validate() const;
};

/// Traversal counts of every edge the walk has touched. Vertices live in an
/// arena; the edge into a vertex is keyed by that vertex. Visited children of
/// a vertex form a singly linked list sorted by child index.
class EdgeWeightTable {
 public:
  struct Node {
    std::int32_t parent = -1;
    std::int32_t first_child = -1;
    std::int32_t next_sibling = -1;
    std::uint32_t child_index = 0;
    std::uint32_t depth = 0;
    std::uint32_t up_count = 0;     // traversals of the edge to the parent
    std::uint32_t n_children = 0;   // visited children
    double child_weight = 0.0;      // sum of visited child edge weights
  };

  EdgeWeightTable() { nodes_.emplace_back(); }

  /// Number of edges ever traversed.
  std::size_t size() const { return nodes_.size() - 1; }
  /// Traversal count of the edge from `v` to its parent; 0 if never traversed.
  std::uint64_t count(const VertexId& v) const;
  std::uint64_t total_traversals() const;
  /// All (vertex, count) pairs in arena order. Paths are materialized, so this
  /// is meant for small trees.
  std::vector<std::pair<VertexId, std::uint64_t>> entries() const;
  VertexId vertex(std::int32_t node) const;

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  friend class Walk;
  std::int32_t find_child(std::int32_t node, std::uint32_t index) const;
  std::vector<Node> nodes_;
};

/// First and last visit step per level, indexed by level.
struct LevelTimes {
  std::vector<std::int64_t> first_hit;
  std::vector<std::int64_t> last_visit;

  std::size_t levels() const { return first_hit.size(); }
  void observe(std::uint32_t height, std::int64_t step) {
    if (height >= first_hit.size()) {
      first_hit.push_back(step);
      last_visit.push_back(step);
    } else {
      last_visit[height] = step;
    }
  }
};

struct TraceSummary {
  std::uint64_t horizon = 0;
  std::vector<std::int32_t> heights;  // empty unless record_heights
  std::int32_t final_height = 0;
  std::int32_t max_height = 0;
  EdgeWeightTable edges;
  LevelTimes levels;
  /// log(dP/dQ) of the sampled path; 0 for untilted runs.
  double log_lr = 0.0;
};

struct Transition {
  VertexId to;
  double probability;
};

/// State of one reinforced walk on the infinite b-ary tree.
class Walk {
 public:
  Walk(std::uint32_t b, Scheme scheme,
       std::size_t max_edges = std::numeric_limits<std::size_t>::max());

  std::uint32_t branching() const { return b_; }
  const Scheme& scheme() const { return scheme_; }
  std::uint32_t height() const { return table_.nodes_[pos_].depth; }
  std::uint64_t steps() const { return steps_; }
  VertexId position() const { return table_.vertex(pos_); }
  const EdgeWeightTable& edges() const { return table_; }

  std::vector<Transition> neighbor_distribution() const;

  /// Total weight at the current vertex with every child edge scaled by
  /// e^tilt.
  double normalizer(double tilt = 0.0) const;
  /// log(p/q) for a move to the parent (to_child = false) or any child, where
  /// p is the walk's law and q the child-tilted proposal.
  double move_log_lr(bool to_child, double tilt) const;

  /// Samples one move. With tilt != 0 the move is drawn from the proposal that
  /// scales child edge weights by e^tilt; the return value is the move's
  /// log-likelihood ratio (0 when tilt == 0).
  double step(Rng& rng, double tilt = 0.0);

  void move_up();
  void move_to_child(std::uint32_t index);

 private:
  double parent_weight() const;
  void traverse_down(std::int32_t child);
  std::int32_t materialize_child(std::uint32_t index);
  std::uint32_t nth_unvisited(std::uint64_t rank) const;

  std::uint32_t b_;
  Scheme scheme_;
  std::size_t max_edges_;
  bool integral_;
  EdgeWeightTable table_;
  std::int32_t pos_ = 0;
  std::uint64_t steps_ = 0;
};

struct Endpoint {
  std::int32_t final_height = 0;
  std::int32_t max_height = 0;
  double log_lr = 0.0;
};

/// Simulates `config.horizon` steps. A nonzero tilt samples from the
/// child-tilted proposal and accumulates the path likelihood ratio.
TraceSummary run(const WalkConfig& config, double tilt = 0.0);

/// Same walk as run() but only keeps the endpoint, maximum and likelihood
/// ratio.
Endpoint run_endpoint(const WalkConfig& config, double tilt = 0.0);

}  // namespace rrw
