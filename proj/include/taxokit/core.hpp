#pragma once

#include <compare>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace taxokit {

/// A named node of a taxonomy. Identity is the id, never the display name:
/// distinct concepts may share a name across taxonomies.
struct Concept {
  std::string id;
  std::string name;

  friend bool operator==(const Concept& a, const Concept& b) {
    return a.id == b.id && a.name == b.name;
  }
};

/// Directed parent -> child relation, by concept id.
struct Edge {
  std::string parent;
  std::string child;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable directed graph of concepts with hierarchical edges.
///
/// Construction validates the structural invariants (unique concept ids,
/// non-empty names, edge endpoints present, no self-loops) and normalizes
/// storage: concepts sorted by id, edges sorted and deduplicated. Instances
/// never mutate afterwards and are safe to share across threads.
class TaxonomyGraph {
 public:
  TaxonomyGraph() = default;
  TaxonomyGraph(std::string id, std::vector<Concept> concepts, std::vector<Edge> edges);

  const std::string& id() const { return id_; }
  const std::vector<Concept>& concepts() const { return concepts_; }
  const std::vector<Edge>& edges() const { return edges_; }

  std::size_t concept_count() const { return concepts_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool has_concept(const std::string& concept_id) const {
    return index_.count(concept_id) != 0;
  }
  /// Index into concepts(), or -1.
  int index_of(const std::string& concept_id) const;
  const Concept* find_concept(const std::string& concept_id) const;

  /// Out-neighbor lists aligned with concepts(); built once per call site.
  std::vector<std::vector<int>> adjacency() const;
  std::vector<int> in_degrees() const;

 private:
  std::string id_;
  std::vector<Concept> concepts_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, int> index_;
};

/// Tree-structure constraints: exactly one root, one parent per non-root.
struct ConstraintSet {
  bool require_unique_root = true;
  bool require_unique_parent = true;
};

struct ViolationReport {
  int root_count = 0;
  bool has_no_root = false;
  std::vector<std::pair<Concept, int>> multi_parent_nodes;  // (concept, parent count)
  int unreachable_from_root = 0;  // concepts not reachable from any root; informational
  bool is_consistent = false;
};

/// Concepts with in-degree zero, sorted by id.
std::vector<Concept> roots(const TaxonomyGraph& t);

/// All ordered pairs (A, B), A != B, with a directed path from A to B.
/// Total on cyclic graphs; each pair appears once. Sorted.
std::vector<Edge> ancestral_closure(const TaxonomyGraph& t);

ViolationReport check_consistency(const TaxonomyGraph& t, const ConstraintSet& c = {});

/// One root, every non-root exactly one parent, all concepts reachable from
/// the root. Stricter than check_consistency, which does not require
/// reachability.
bool is_arborescence(const TaxonomyGraph& t);

/// Candidate relations with weights; weight_max bounds every edge weight
/// (0 for log-probability weights).
class WeightedRelationGraph {
 public:
  WeightedRelationGraph(TaxonomyGraph base, std::map<Edge, double> weights,
                        double weight_max);

  const TaxonomyGraph& base() const { return base_; }
  const std::map<Edge, double>& weights() const { return weights_; }
  double weight_max() const { return weight_max_; }

 private:
  TaxonomyGraph base_;
  std::map<Edge, double> weights_;
  double weight_max_;
};

/// Weight of a subgraph: selected edges contribute their weight, unselected
/// candidates contribute (weight_max - weight). Throws if selected contains
/// an edge outside the candidate set.
double subgraph_weight(const std::vector<Edge>& selected, const WeightedRelationGraph& g);

}  // namespace taxokit
