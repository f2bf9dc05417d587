#include "rrw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rrw {

void WalkConfig::validate() const {
  if (b < 2) throw std::invalid_argument("branching factor b must be >= 2");
  scheme.validate();
}

std::int32_t EdgeWeightTable::find_child(std::int32_t node, std::uint32_t index) const {
  for (std::int32_t ch = nodes_[node].first_child; ch >= 0; ch = nodes_[ch].next_sibling) {
    if (nodes_[ch].child_index == index) return ch;
    if (nodes_[ch].child_index > index) break;
  }
  return -1;
}

std::uint64_t EdgeWeightTable::count(const VertexId& v) const {
  if (v.path.empty()) return 0;
  std::int32_t node = 0;
  for (auto idx : v.path) {
    node = find_child(node, idx);
    if (node < 0) return 0;
  }
  return nodes_[node].up_count;
}

std::uint64_t EdgeWeightTable::total_traversals() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes_) total += n.up_count;
  return total;
}

VertexId EdgeWeightTable::vertex(std::int32_t node) const {
  VertexId v;
  v.path.resize(nodes_[node].depth);
  for (auto i = v.path.size(); i > 0; --i) {
    v.path[i - 1] = nodes_[node].child_index;
    node = nodes_[node].parent;
  }
  return v;
}

std::vector<std::pair<VertexId, std::uint64_t>> EdgeWeightTable::entries() const {
  std::vector<std::pair<VertexId, std::uint64_t>> out;
  out.reserve(size());
  for (std::size_t i = 1; i < nodes_.size(); ++i)
    out.emplace_back(vertex(static_cast<std::int32_t>(i)), nodes_[i].up_count);
  return out;
}

Walk::Walk(std::uint32_t b, Scheme scheme, std::size_t max_edges)
    : b_(b), scheme_(scheme), max_edges_(max_edges), integral_(scheme.integral()) {
  if (b_ < 2) throw std::invalid_argument("branching factor b must be >= 2");
  scheme_.validate();
}

double Walk::parent_weight() const {
  return pos_ == 0 ? 0.0 : weight_after(scheme_, table_.nodes_[pos_].up_count);
}

double Walk::normalizer(double tilt) const {
  const auto& n = table_.nodes_[pos_];
  const double children = n.child_weight + static_cast<double>(b_ - n.n_children);
  return parent_weight() + std::exp(tilt) * children;
}

double Walk::move_log_lr(bool to_child, double tilt) const {
  if (tilt == 0.0) return 0.0;
  return std::log(normalizer(tilt)) - std::log(normalizer(0.0)) - (to_child ? tilt : 0.0);
}

std::vector<Transition> Walk::neighbor_distribution() const {
  std::vector<Transition> out;
  const double z = normalizer(0.0);
  const VertexId here = position();
  if (pos_ != 0) {
    VertexId up = here;
    up.path.pop_back();
    out.push_back({std::move(up), parent_weight() / z});
  }
  std::int32_t ch = table_.nodes_[pos_].first_child;
  for (std::uint32_t i = 0; i < b_; ++i) {
    double w = 1.0;
    if (ch >= 0 && table_.nodes_[ch].child_index == i) {
      w = weight_after(scheme_, table_.nodes_[ch].up_count);
      ch = table_.nodes_[ch].next_sibling;
    }
    VertexId down = here;
    down.path.push_back(i);
    out.push_back({std::move(down), w / z});
  }
  return out;
}

void Walk::move_up() {
  if (pos_ == 0) throw std::logic_error("root has no parent");
  auto& n = table_.nodes_[pos_];
  const double before = weight_after(scheme_, n.up_count);
  ++n.up_count;
  table_.nodes_[n.parent].child_weight += weight_after(scheme_, n.up_count) - before;
  pos_ = n.parent;
  ++steps_;
}

void Walk::traverse_down(std::int32_t child) {
  auto& n = table_.nodes_[child];
  const double before = weight_after(scheme_, n.up_count);
  ++n.up_count;
  table_.nodes_[pos_].child_weight += weight_after(scheme_, n.up_count) - before;
  pos_ = child;
  ++steps_;
}

std::int32_t Walk::materialize_child(std::uint32_t index) {
  if (table_.size() >= max_edges_)
    throw ResourceLimitError("edge table exceeded budget of " + std::to_string(max_edges_) +
                             " edges");
  EdgeWeightTable::Node fresh;
  fresh.parent = pos_;
  fresh.child_index = index;
  fresh.depth = table_.nodes_[pos_].depth + 1;
  const auto id = static_cast<std::int32_t>(table_.nodes_.size());

  // Keep the sibling list sorted by child index.
  std::int32_t prev = -1;
  std::int32_t cur = table_.nodes_[pos_].first_child;
  while (cur >= 0 && table_.nodes_[cur].child_index < index) {
    prev = cur;
    cur = table_.nodes_[cur].next_sibling;
  }
  fresh.next_sibling = cur;
  table_.nodes_.push_back(fresh);
  if (prev < 0)
    table_.nodes_[pos_].first_child = id;
  else
    table_.nodes_[prev].next_sibling = id;
  auto& parent = table_.nodes_[pos_];
  ++parent.n_children;
  parent.child_weight += 1.0;  // weight of an untraversed edge
  return id;
}

std::uint32_t Walk::nth_unvisited(std::uint64_t rank) const {
  auto idx = static_cast<std::uint32_t>(rank);
  for (std::int32_t ch = table_.nodes_[pos_].first_child; ch >= 0;
       ch = table_.nodes_[ch].next_sibling) {
    if (table_.nodes_[ch].child_index <= idx)
      ++idx;
    else
      break;
  }
  return idx;
}

void Walk::move_to_child(std::uint32_t index) {
  if (index >= b_) throw std::out_of_range("child index out of range");
  std::int32_t ch = table_.find_child(pos_, index);
  if (ch < 0) ch = materialize_child(index);
  traverse_down(ch);
}

double Walk::step(Rng& rng, double tilt) {
  const auto& node = table_.nodes_[pos_];
  const double wp = parent_weight();
  const double visited = node.child_weight;
  const std::uint64_t fresh = b_ - node.n_children;
  const double children = visited + static_cast<double>(fresh);

  // Position inside the untilted child block [0, children), or -1 for parent.
  double t;
  if (tilt == 0.0) {
    const double z = wp + children;
    if (integral_ && z < 0x1.0p53)
      t = static_cast<double>(rng.bounded(static_cast<std::uint64_t>(z)));
    else
      t = rng.uniform() * z;
    t -= wp;
  } else {
    const double scale = std::exp(tilt);
    const double zt = wp + scale * children;
    const double u = rng.uniform() * zt;
    t = u < wp ? -1.0 : (u - wp) / scale;
  }

  const double lr_up = tilt == 0.0 ? 0.0 : move_log_lr(false, tilt);
  const double lr_down = tilt == 0.0 ? 0.0 : move_log_lr(true, tilt);

  if (t < 0.0) {
    move_up();
    return lr_up;
  }
  if (t < visited) {
    std::int32_t last = -1;
    for (std::int32_t ch = node.first_child; ch >= 0; ch = table_.nodes_[ch].next_sibling) {
      const double w = weight_after(scheme_, table_.nodes_[ch].up_count);
      last = ch;
      if (t < w) break;
      t -= w;
    }
    traverse_down(last);
    return lr_down;
  }
  if (fresh == 0) {
    // Only reachable through float rounding at the block boundary.
    std::int32_t last = node.first_child;
    while (table_.nodes_[last].next_sibling >= 0) last = table_.nodes_[last].next_sibling;
    traverse_down(last);
    return lr_down;
  }
  auto rank = static_cast<std::uint64_t>(t - visited);
  rank = std::min(rank, fresh - 1);
  const std::int32_t ch = materialize_child(nth_unvisited(rank));
  traverse_down(ch);
  return lr_down;
}

TraceSummary run(const WalkConfig& config, double tilt) {
  config.validate();
  const std::size_t budget = config.max_edges == 0 ? config.horizon + 1 : config.max_edges;
  Walk walk(config.b, config.scheme, budget);
  Rng rng = Rng::for_replica(config.seed, config.replica);

  TraceSummary trace;
  trace.horizon = config.horizon;
  if (config.record_heights) {
    trace.heights.reserve(config.horizon + 1);
    trace.heights.push_back(0);
  }
  trace.levels.observe(0, 0);
  std::int32_t max_h = 0;
  double log_lr = 0.0;
  for (std::uint64_t j = 1; j <= config.horizon; ++j) {
    log_lr += walk.step(rng, tilt);
    const auto h = static_cast<std::int32_t>(walk.height());
    if (config.record_heights) trace.heights.push_back(h);
    trace.levels.observe(static_cast<std::uint32_t>(h), static_cast<std::int64_t>(j));
    max_h = std::max(max_h, h);
  }
  trace.final_height = static_cast<std::int32_t>(walk.height());
  trace.max_height = max_h;
  trace.log_lr = log_lr;
  trace.edges = walk.edges();
  return trace;
}

Endpoint run_endpoint(const WalkConfig& config, double tilt) {
  config.validate();
  const std::size_t budget = config.max_edges == 0 ? config.horizon + 1 : config.max_edges;
  Walk walk(config.b, config.scheme, budget);
  Rng rng = Rng::for_replica(config.seed, config.replica);
  Endpoint e;
  for (std::uint64_t j = 1; j <= config.horizon; ++j) {
    e.log_lr += walk.step(rng, tilt);
    e.max_height = std::max(e.max_height, static_cast<std::int32_t>(walk.height()));
  }
  e.final_height = static_cast<std::int32_t>(walk.height());
  return e;
}

}  // namespace rrw
