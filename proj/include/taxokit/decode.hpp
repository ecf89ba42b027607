#pragma once

#include <map>
#include <string>
#include <vector>

#include "taxokit/core.hpp"
#include "taxokit/generation.hpp"
#include "taxokit/scoring.hpp"

namespace taxokit::decode {

// Spanning arborescence over a score matrix's concepts. graph.roots() is
// exactly {root}; total_weight sums log-probability edge weights.
struct Arborescence {
  TaxonomyGraph graph;
  std::string root;
  double total_weight = 0.0;
};

struct MsaOptions {
  double epsilon = 1e-9;  // probability clamp before taking logs
  int jobs = 0;           // worker threads for the per-root sweep; <= 0 takes the runtime default
};

// Threshold decoder: keeps every pair scoring strictly above `threshold`.
// Applies no structural constraints, so the result may have any number of
// roots and multi-parent nodes.
TaxonomyGraph mali(const scoring::PairwiseScoreMatrix& m, double threshold = 0.5);

// Maximum spanning arborescence over log-weights, maximized over all choices
// of root. Ties: higher total weight, then lexicographically smaller root id,
// then lexicographically smaller edge set.
Arborescence msa(const scoring::PairwiseScoreMatrix& m, const MsaOptions& opt = {});

// Same result as msa, computed with a single-threaded root sweep. Kept as the
// reference implementation the parallel path is checked against.
Arborescence msa_serial(const scoring::PairwiseScoreMatrix& m, const MsaOptions& opt = {});

// Exhaustive search over every rooted spanning arborescence, same tie-breaking
// as msa. Only viable for small inputs; errors above 8 concepts.
Arborescence brute_force_arborescence(const scoring::PairwiseScoreMatrix& m,
                                      const MsaOptions& opt = {});

struct AggregatedRelationCounts {
  std::string taxonomy_id;
  int n_runs = 0;
  std::vector<Concept> concepts;  // sorted by id
  std::map<Edge, int> counts;     // occurrences across runs; each run counts once per relation
};

// Tallies how many runs produced each relation. All runs must cover the same
// taxonomy and concept set; failed runs contribute nothing but still count
// toward n_runs.
AggregatedRelationCounts aggregate(const std::vector<GenerationRun>& runs);

// Keeps relations present in at least ceil(n_runs / 2) runs. Like mali, the
// output is unconstrained.
TaxonomyGraph majority_vote(const AggregatedRelationCounts& agg);

}  // namespace taxokit::decode
