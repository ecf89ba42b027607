#include "taxokit/core.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "taxokit/util.hpp"

namespace taxokit {

TaxonomyGraph::TaxonomyGraph(std::string id, std::vector<Concept> concepts,
                             std::vector<Edge> edges)
    : id_(std::move(id)), concepts_(std::move(concepts)), edges_(std::move(edges)) {
  for (Concept& c : concepts_) {
    c.name = trim(c.name);
    if (c.id.empty()) {
      throw std::invalid_argument("taxonomy '" + id_ + "': concept with empty id");
    }
    if (c.name.empty()) {
      throw std::invalid_argument("taxonomy '" + id_ + "': concept '" + c.id +
                                  "' has an empty name");
    }
  }
  std::sort(concepts_.begin(), concepts_.end(),
            [](const Concept& a, const Concept& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (i > 0 && concepts_[i].id == concepts_[i - 1].id) {
      throw std::invalid_argument("taxonomy '" + id_ + "': duplicate concept id '" +
                                  concepts_[i].id + "'");
    }
    index_.emplace(concepts_[i].id, static_cast<int>(i));
  }
  for (const Edge& e : edges_) {
    if (e.parent == e.child) {
      throw std::invalid_argument("taxonomy '" + id_ + "': self-loop on '" + e.parent + "'");
    }
    if (!has_concept(e.parent) || !has_concept(e.child)) {
      throw std::invalid_argument("taxonomy '" + id_ + "': edge (" + e.parent + " -> " +
                                  e.child + ") references an unknown concept");
    }
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

int TaxonomyGraph::index_of(const std::string& concept_id) const {
  auto it = index_.find(concept_id);
  return it == index_.end() ? -1 : it->second;
}

const Concept* TaxonomyGraph::find_concept(const std::string& concept_id) const {
  int i = index_of(concept_id);
  return i < 0 ? nullptr : &concepts_[static_cast<std::size_t>(i)];
}

std::vector<std::vector<int>> TaxonomyGraph::adjacency() const {
  std::vector<std::vector<int>> adj(concepts_.size());
  for (const Edge& e : edges_) {
    adj[static_cast<std::size_t>(index_of(e.parent))].push_back(index_of(e.child));
  }
  return adj;
}

std::vector<int> TaxonomyGraph::in_degrees() const {
  std::vector<int> deg(concepts_.size(), 0);
  for (const Edge& e : edges_) {
    ++deg[static_cast<std::size_t>(index_of(e.child))];
  }
  return deg;
}

std::vector<Concept> roots(const TaxonomyGraph& t) {
  std::vector<Concept> out;
  const auto deg = t.in_degrees();
  for (std::size_t i = 0; i < t.concept_count(); ++i) {
    if (deg[i] == 0) out.push_back(t.concepts()[i]);
  }
  return out;
}

std::vector<Edge> ancestral_closure(const TaxonomyGraph& t) {
  const auto adj = t.adjacency();
  const int n = static_cast<int>(t.concept_count());
  std::vector<Edge> pairs;
  std::vector<char> seen(static_cast<std::size_t>(n));
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    std::fill(seen.begin(), seen.end(), 0);
    seen[static_cast<std::size_t>(s)] = 1;
    queue.assign(adj[static_cast<std::size_t>(s)].begin(), adj[static_cast<std::size_t>(s)].end());
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      pairs.push_back({t.concepts()[static_cast<std::size_t>(s)].id,
                       t.concepts()[static_cast<std::size_t>(v)].id});
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (!seen[static_cast<std::size_t>(w)]) queue.push_back(w);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

namespace {

// Count of concepts not reachable from any in-degree-zero node.
int unreachable_count(const TaxonomyGraph& t) {
  const auto adj = t.adjacency();
  const auto deg = t.in_degrees();
  const std::size_t n = t.concept_count();
  std::vector<char> seen(n, 0);
  std::deque<int> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] == 0) {
      seen[i] = 1;
      queue.push_back(static_cast<int>(i));
    }
  }
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        queue.push_back(w);
      }
    }
  }
  int unreachable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) ++unreachable;
  }
  return unreachable;
}

}  // namespace

ViolationReport check_consistency(const TaxonomyGraph& t, const ConstraintSet& c) {
  ViolationReport r;
  const auto deg = t.in_degrees();
  for (std::size_t i = 0; i < t.concept_count(); ++i) {
    if (deg[i] == 0) {
      ++r.root_count;
    } else if (deg[i] > 1) {
      r.multi_parent_nodes.emplace_back(t.concepts()[i], deg[i]);
    }
  }
  r.has_no_root = r.root_count == 0;
  r.unreachable_from_root = unreachable_count(t);
  bool ok = true;
  if (c.require_unique_root && r.root_count != 1) ok = false;
  if (c.require_unique_parent && !r.multi_parent_nodes.empty()) ok = false;
  // Both constraints together promise a spanning arborescence. Root and
  // parent counts alone admit a detached cycle (every member still has
  // in-degree 1), so reachability closes the gap.
  if (c.require_unique_root && c.require_unique_parent && r.unreachable_from_root > 0) {
    ok = false;
  }
  r.is_consistent = ok;
  return r;
}

bool is_arborescence(const TaxonomyGraph& t) {
  if (t.concept_count() == 0) return false;
  const auto deg = t.in_degrees();
  int root = -1;
  for (std::size_t i = 0; i < t.concept_count(); ++i) {
    if (deg[i] == 0) {
      if (root >= 0) return false;
      root = static_cast<int>(i);
    } else if (deg[i] != 1) {
      return false;
    }
  }
  if (root < 0) return false;
  // One root, all other in-degrees exactly 1; reachability closes the check.
  const auto adj = t.adjacency();
  std::vector<char> seen(t.concept_count(), 0);
  std::deque<int> queue{root};
  seen[static_cast<std::size_t>(root)] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adj[static_cast<std::size_t>(v)]) {
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  return reached == t.concept_count();
}

WeightedRelationGraph::WeightedRelationGraph(TaxonomyGraph base,
                                             std::map<Edge, double> weights,
                                             double weight_max)
    : base_(std::move(base)), weights_(std::move(weights)), weight_max_(weight_max) {
  for (const Edge& e : base_.edges()) {
    auto it = weights_.find(e);
    if (it == weights_.end()) {
      throw std::invalid_argument("weighted graph: no weight for edge (" + e.parent +
                                  " -> " + e.child + ")");
    }
    if (it->second > weight_max_) {
      throw std::invalid_argument("weighted graph: weight of (" + e.parent + " -> " +
                                  e.child + ") exceeds weight_max");
    }
  }
}

double subgraph_weight(const std::vector<Edge>& selected, const WeightedRelationGraph& g) {
  std::vector<Edge> sel = selected;
  std::sort(sel.begin(), sel.end());
  sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
  for (const Edge& e : sel) {
    if (g.weights().find(e) == g.weights().end()) {
      throw std::invalid_argument("subgraph_weight: edge (" + e.parent + " -> " + e.child +
                                  ") is not a candidate");
    }
  }
  double total = 0.0;
  for (const Edge& e : g.base().edges()) {
    const double w = g.weights().at(e);
    if (std::binary_search(sel.begin(), sel.end(), e)) {
      total += w;
    } else {
      total += g.weight_max() - w;
    }
  }
  return total;
}

}  // namespace taxokit
