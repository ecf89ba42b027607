#include "taxokit/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace taxokit::decode {

namespace {

struct Ed {
  int u, v;    // endpoints in the current (possibly contracted) graph
  double w;
  int src;     // index into the parent level's edge list
  int op, oc;  // original matrix pair, kept for deterministic tie-breaking
};

bool better_incoming(const Ed& a, const Ed& b) {
  if (a.w != b.w) return a.w > b.w;
  if (a.op != b.op) return a.op < b.op;
  return a.oc < b.oc;
}

// Chu-Liu/Edmonds on the current graph; returns indices into `edges` of the
// maximum-weight arborescence rooted at `root`. Every non-root node must have
// an incoming edge, which holds for complete matrices and is preserved by
// contraction.
std::vector<int> solve(int n, int root, const std::vector<Ed>& edges) {
  std::vector<int> best(n, -1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Ed& e = edges[k];
    if (e.v == root || e.u == e.v) continue;
    if (best[e.v] < 0 || better_incoming(e, edges[static_cast<std::size_t>(best[e.v])])) {
      best[e.v] = static_cast<int>(k);
    }
  }
  for (int v = 0; v < n; ++v) {
    if (v != root && best[v] < 0) {
      throw std::logic_error("arborescence search: node with no incoming edge");
    }
  }

  // follow best-incoming parent pointers to find a cycle, if any
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on current walk, 2 settled
  std::vector<int> cycle;
  for (int s = 0; s < n && cycle.empty(); ++s) {
    int v = s;
    std::vector<int> walk;
    while (v != root && state[v] == 0) {
      state[v] = 1;
      walk.push_back(v);
      v = edges[static_cast<std::size_t>(best[v])].u;
    }
    if (v != root && state[v] == 1) {
      int c = v;
      do {
        cycle.push_back(c);
        c = edges[static_cast<std::size_t>(best[c])].u;
      } while (c != v);
    }
    for (int p : walk) state[p] = 2;
  }

  if (cycle.empty()) {
    std::vector<int> out;
    for (int v = 0; v < n; ++v) {
      if (v != root) out.push_back(best[v]);
    }
    return out;
  }

  std::vector<char> in_cycle(static_cast<std::size_t>(n), 0);
  for (int v : cycle) in_cycle[static_cast<std::size_t>(v)] = 1;
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int m = 0;
  for (int v = 0; v < n; ++v) {
    if (!in_cycle[static_cast<std::size_t>(v)]) label[static_cast<std::size_t>(v)] = m++;
  }
  const int super = m++;
  for (int v : cycle) label[static_cast<std::size_t>(v)] = super;

  std::vector<Ed> contracted;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Ed& e = edges[k];
    const bool ui = in_cycle[static_cast<std::size_t>(e.u)];
    const bool vi = in_cycle[static_cast<std::size_t>(e.v)];
    if (ui && vi) continue;
    double w = e.w;
    if (vi) w -= edges[static_cast<std::size_t>(best[e.v])].w;
    contracted.push_back({label[static_cast<std::size_t>(e.u)],
                          label[static_cast<std::size_t>(e.v)], w, static_cast<int>(k), e.op,
                          e.oc});
  }

  const std::vector<int> sub = solve(m, label[static_cast<std::size_t>(root)], contracted);

  // Expand: chosen contracted edges map back through src; the one entering the
  // supernode displaces that cycle member's internal edge. The root never lies
  // on a cycle (it has no incoming pointer), so the entering edge exists.
  std::vector<int> out;
  int entered = -1;
  for (int k : sub) {
    const Ed& ce = contracted[static_cast<std::size_t>(k)];
    out.push_back(ce.src);
    if (ce.v == super) entered = edges[static_cast<std::size_t>(ce.src)].v;
  }
  for (int v : cycle) {
    if (v != entered) out.push_back(best[v]);
  }
  return out;
}

struct RootResult {
  double total = 0.0;
  __int128 exact = 0;
  int root = -1;
  std::vector<std::pair<int, int>> edges;  // original index pairs, sorted
};

// Lower index == lexicographically smaller id: matrix ids are sorted, so
// index-pair comparisons realize the id-level tie-break order. Totals are
// compared through their exact integer images so that equal-weight trees are
// recognized as ties no matter how float summation would have rounded.
bool better_result(const RootResult& a, const RootResult& b) {
  if (b.root < 0) return a.root >= 0;
  if (a.root < 0) return false;
  if (a.exact != b.exact) return a.exact > b.exact;
  if (a.root != b.root) return a.root < b.root;
  return a.edges < b.edges;
}

// Totals are summed over the sorted edge list so that any two decoders
// producing the same edge set produce the identical double.
double canonical_total(const std::vector<std::pair<int, int>>& sorted_edges,
                       const std::vector<double>& w, std::size_t n) {
  double total = 0.0;
  for (const auto& [i, j] : sorted_edges) {
    total += w[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
  }
  return total;
}

// Every log weight is a dyadic rational, so scaling by a shared power of two
// turns each into an integer and tree totals into exact integer sums. The
// exponent spread of clamped logs keeps n^2 terms well inside 128 bits.
std::vector<__int128> exact_weights(const std::vector<double>& w, std::size_t n) {
  int emin = 0;
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || w[i * n + j] == 0.0) continue;
      int e = 0;
      std::frexp(w[i * n + j], &e);
      if (!any || e < emin) emin = e;
      any = true;
    }
  }
  std::vector<__int128> cell(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = w[i * n + j];
      if (i == j || v == 0.0) continue;
      int e = 0;
      const double f = std::frexp(v, &e);
      const auto m = static_cast<long long>(std::ldexp(f, 53));  // exact
      cell[i * n + j] = static_cast<__int128>(m) << (e - emin);
    }
  }
  return cell;
}

__int128 exact_total(const std::vector<std::pair<int, int>>& edges,
                     const std::vector<__int128>& cell, std::size_t n) {
  __int128 total = 0;
  for (const auto& [i, j] : edges) {
    total += cell[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)];
  }
  return total;
}

std::vector<double> log_weights(const scoring::PairwiseScoreMatrix& m, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 0.5)) {
    throw std::invalid_argument("epsilon must lie in (0, 0.5)");
  }
  const std::size_t n = m.size();
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      w[i * n + j] = std::log(std::clamp(m.score_at(i, j), epsilon, 1.0 - epsilon));
    }
  }
  return w;
}

RootResult solve_root(const std::vector<Ed>& base, const std::vector<double>& w,
                      const std::vector<__int128>& cell, std::size_t n, int root) {
  RootResult r;
  r.root = root;
  for (int k : solve(static_cast<int>(n), root, base)) {
    const Ed& e = base[static_cast<std::size_t>(k)];
    r.edges.emplace_back(e.op, e.oc);
  }
  std::sort(r.edges.begin(), r.edges.end());
  r.total = canonical_total(r.edges, w, n);
  r.exact = exact_total(r.edges, cell, n);
  return r;
}

// Distinct arborescences can only share a canonical total when some weights
// collide bitwise; without collisions the sweep winner is already the unique
// optimum and the lex refinement below would commit it edge by edge.
bool has_weight_ties(const std::vector<double>& w, std::size_t n) {
  std::vector<double> vals;
  vals.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) vals.push_back(w[i * n + j]);
    }
  }
  std::sort(vals.begin(), vals.end());
  return std::adjacent_find(vals.begin(), vals.end()) != vals.end();
}

// Maximum arborescence where every head with forced[head] >= 0 may only use
// the edge from that tail. Forced heads keep exactly one incoming edge, so
// the solver's completeness requirement still holds.
RootResult solve_root_forced(const std::vector<Ed>& base, const std::vector<double>& w,
                             const std::vector<__int128>& cell, std::size_t n, int root,
                             const std::vector<int>& forced) {
  std::vector<Ed> allowed;
  allowed.reserve(base.size());
  for (const Ed& e : base) {
    if (forced[static_cast<std::size_t>(e.v)] >= 0 &&
        forced[static_cast<std::size_t>(e.v)] != e.u) {
      continue;
    }
    allowed.push_back(e);
  }
  RootResult r;
  r.root = root;
  for (int k : solve(static_cast<int>(n), root, allowed)) {
    const Ed& e = allowed[static_cast<std::size_t>(k)];
    r.edges.emplace_back(e.op, e.oc);
  }
  std::sort(r.edges.begin(), r.edges.end());
  r.total = canonical_total(r.edges, w, n);
  r.exact = exact_total(r.edges, cell, n);
  return r;
}

// Equal-weight arborescences for the winning root are resolved to the
// lexicographically smallest edge set: sweep candidate edges in index order
// and commit each one some optimum can still extend. The committed set always
// sits inside the currently adopted optimal tree, so scanning a tree edge
// commits it for free; everything else is settled by a forced re-solve, with
// a per-head upper bound pruning candidates that cannot reach the optimum.
void refine_lex_min(const std::vector<Ed>& base, const std::vector<double>& w,
                    const std::vector<__int128>& cell, std::size_t n, RootResult& r) {
  const int root = r.root;
  std::vector<int> parent(n, -1);
  std::vector<int> committed(n, -1);
  for (const auto& [p, c] : r.edges) parent[static_cast<std::size_t>(c)] = p;

  std::vector<double> best_in(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    if (static_cast<int>(v) == root) continue;
    double b = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != v) b = std::max(b, w[i * n + v]);
    }
    best_in[v] = b;
  }

  // covers reordering noise between the bound sum and a canonical total
  const double tol = 1e-7 * (1.0 + std::abs(r.total));
  std::size_t open = n - 1;
  for (std::size_t u = 0; u < n && open > 0; ++u) {
    for (std::size_t v = 0; v < n && open > 0; ++v) {
      if (u == v || static_cast<int>(v) == root || committed[v] >= 0) continue;
      if (parent[v] == static_cast<int>(u)) {
        committed[v] = static_cast<int>(u);
        --open;
        continue;
      }
      double bound = 0.0;
      for (std::size_t h = 0; h < n; ++h) {
        if (static_cast<int>(h) == root) continue;
        if (h == v) {
          bound += w[u * n + v];
        } else if (committed[h] >= 0) {
          bound += w[static_cast<std::size_t>(committed[h]) * n + h];
        } else {
          bound += best_in[h];
        }
      }
      if (bound < r.total - tol) continue;
      // a forced cycle can sit in no arborescence (and would starve the
      // contracted solver of incoming edges)
      int x = static_cast<int>(u);
      while (x >= 0 && x != static_cast<int>(v)) x = committed[static_cast<std::size_t>(x)];
      if (x == static_cast<int>(v)) continue;
      committed[v] = static_cast<int>(u);
      const RootResult trial = solve_root_forced(base, w, cell, n, root, committed);
      if (trial.exact == r.exact) {
        for (const auto& [p, c] : trial.edges) parent[static_cast<std::size_t>(c)] = p;
        --open;
      } else {
        committed[v] = -1;
      }
    }
  }

  r.edges.clear();
  for (std::size_t v = 0; v < n; ++v) {
    if (static_cast<int>(v) != root) r.edges.emplace_back(parent[v], static_cast<int>(v));
  }
  std::sort(r.edges.begin(), r.edges.end());
  r.total = canonical_total(r.edges, w, n);
  r.exact = exact_total(r.edges, cell, n);
}

Arborescence make_arborescence(const scoring::PairwiseScoreMatrix& m, const RootResult& best) {
  std::vector<Concept> concepts;
  for (const std::string& id : m.concept_ids()) concepts.push_back({id, id});
  std::vector<Edge> edges;
  for (const auto& [i, j] : best.edges) {
    edges.push_back({m.concept_ids()[static_cast<std::size_t>(i)],
                     m.concept_ids()[static_cast<std::size_t>(j)]});
  }
  Arborescence a{TaxonomyGraph(m.taxonomy_id(), std::move(concepts), edges),
                 m.concept_ids()[static_cast<std::size_t>(best.root)], best.total};
  return a;
}

Arborescence run_msa(const scoring::PairwiseScoreMatrix& m, const MsaOptions& opt,
                     bool parallel) {
  const std::size_t n = m.size();
  if (n < 1) {
    throw std::invalid_argument("matrix '" + m.taxonomy_id() + "' has no concepts");
  }
  m.validate();
  const std::vector<double> w = log_weights(m, opt.epsilon);
  if (n == 1) {
    return {TaxonomyGraph(m.taxonomy_id(), {{m.concept_ids()[0], m.concept_ids()[0]}}, {}),
            m.concept_ids()[0], 0.0};
  }

  std::vector<Ed> base;
  base.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      base.push_back({static_cast<int>(i), static_cast<int>(j), w[i * n + j],
                      static_cast<int>(base.size()), static_cast<int>(i),
                      static_cast<int>(j)});
    }
  }

  const std::vector<__int128> cell = exact_weights(w, n);
  std::vector<RootResult> results(n);
#ifdef _OPENMP
  const bool threaded = parallel && n > 1 && !omp_in_parallel();
#else
  const bool threaded = false;
  (void)parallel;
#endif
  if (threaded) {
#ifdef _OPENMP
    const int threads = opt.jobs > 0 ? opt.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t r = 0; r < n; ++r) {
      results[r] = solve_root(base, w, cell, n, static_cast<int>(r));
    }
#endif
  } else {
    for (std::size_t r = 0; r < n; ++r) {
      results[r] = solve_root(base, w, cell, n, static_cast<int>(r));
    }
  }

  // serial final reduction keeps the outcome independent of thread schedule
  std::size_t best = 0;
  for (std::size_t r = 1; r < n; ++r) {
    if (better_result(results[r], results[best])) best = r;
  }
  RootResult winner = results[best];
  if (has_weight_ties(w, n)) refine_lex_min(base, w, cell, n, winner);
  return make_arborescence(m, winner);
}

}  // namespace

TaxonomyGraph mali(const scoring::PairwiseScoreMatrix& m, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("mali threshold must be in [0, 1]");
  }
  m.validate();
  std::vector<Concept> concepts;
  for (const std::string& id : m.concept_ids()) concepts.push_back({id, id});
  std::vector<Edge> edges;
  const std::size_t n = m.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && m.score_at(i, j) > threshold) {
        edges.push_back({m.concept_ids()[i], m.concept_ids()[j]});
      }
    }
  }
  return TaxonomyGraph(m.taxonomy_id(), std::move(concepts), std::move(edges));
}

Arborescence msa(const scoring::PairwiseScoreMatrix& m, const MsaOptions& opt) {
  return run_msa(m, opt, true);
}

Arborescence msa_serial(const scoring::PairwiseScoreMatrix& m, const MsaOptions& opt) {
  return run_msa(m, opt, false);
}

Arborescence brute_force_arborescence(const scoring::PairwiseScoreMatrix& m,
                                      const MsaOptions& opt) {
  const std::size_t n = m.size();
  if (n < 1) {
    throw std::invalid_argument("matrix '" + m.taxonomy_id() + "' has no concepts");
  }
  if (n > 8) {
    throw std::invalid_argument("exhaustive arborescence search is capped at 8 concepts");
  }
  m.validate();
  const std::vector<double> w = log_weights(m, opt.epsilon);
  if (n == 1) {
    return {TaxonomyGraph(m.taxonomy_id(), {{m.concept_ids()[0], m.concept_ids()[0]}}, {}),
            m.concept_ids()[0], 0.0};
  }

  const std::vector<__int128> cell = exact_weights(w, n);
  RootResult best;
  std::vector<int> parent(n, -1);
  for (int root = 0; root < static_cast<int>(n); ++root) {
    // children in index order; each tries every other node as parent
    std::vector<int> children;
    for (int v = 0; v < static_cast<int>(n); ++v) {
      if (v != root) children.push_back(v);
    }
    std::vector<int> choice(children.size(), 0);  // mixed-radix counter, base n-1
    while (true) {
      for (std::size_t c = 0; c < children.size(); ++c) {
        int p = choice[c];
        if (p >= children[c]) ++p;  // skip self
        parent[static_cast<std::size_t>(children[c])] = p;
      }
      bool valid = true;
      for (int v : children) {
        int hops = 0;
        int x = v;
        while (x != root && hops <= static_cast<int>(n)) {
          x = parent[static_cast<std::size_t>(x)];
          ++hops;
        }
        if (x != root) {
          valid = false;
          break;
        }
      }
      if (valid) {
        RootResult r;
        r.root = root;
        for (int v : children) r.edges.emplace_back(parent[static_cast<std::size_t>(v)], v);
        std::sort(r.edges.begin(), r.edges.end());
        r.total = canonical_total(r.edges, w, n);
        r.exact = exact_total(r.edges, cell, n);
        if (better_result(r, best)) best = r;
      }
      std::size_t c = 0;
      while (c < choice.size()) {
        if (++choice[c] < static_cast<int>(n) - 1) break;
        choice[c] = 0;
        ++c;
      }
      if (c == choice.size()) break;
    }
  }
  return make_arborescence(m, best);
}

AggregatedRelationCounts aggregate(const std::vector<GenerationRun>& runs) {
  if (runs.empty()) {
    throw std::invalid_argument("aggregate requires at least one run");
  }
  AggregatedRelationCounts agg;
  agg.taxonomy_id = runs.front().taxonomy_id;
  agg.n_runs = static_cast<int>(runs.size());
  agg.concepts = runs.front().concepts;
  std::sort(agg.concepts.begin(), agg.concepts.end(),
            [](const Concept& a, const Concept& b) { return a.id < b.id; });

  std::set<std::string> ids;
  for (const Concept& c : agg.concepts) {
    if (!ids.insert(c.id).second) {
      throw std::runtime_error("aggregate: duplicate concept id '" + c.id + "'");
    }
  }

  for (const GenerationRun& run : runs) {
    if (run.taxonomy_id != agg.taxonomy_id) {
      throw std::runtime_error("aggregate: mixed taxonomy ids ('" + agg.taxonomy_id +
                               "' vs '" + run.taxonomy_id + "')");
    }
    std::set<std::string> run_ids;
    for (const Concept& c : run.concepts) run_ids.insert(c.id);
    if (run_ids != ids) {
      throw std::runtime_error("aggregate: run " + std::to_string(run.run_index) +
                               " has a different concept set");
    }
    const std::set<Edge> uniq(run.parsed.begin(), run.parsed.end());
    for (const Edge& e : uniq) {
      if (!ids.count(e.parent) || !ids.count(e.child)) {
        throw std::runtime_error("aggregate: run " + std::to_string(run.run_index) +
                                 " references unknown concept in relation (" + e.parent +
                                 ", " + e.child + ")");
      }
      ++agg.counts[e];
    }
  }
  return agg;
}

TaxonomyGraph majority_vote(const AggregatedRelationCounts& agg) {
  if (agg.n_runs < 1) {
    throw std::invalid_argument("majority vote requires n_runs >= 1");
  }
  const int need = (agg.n_runs + 1) / 2;
  std::vector<Edge> edges;
  for (const auto& [e, count] : agg.counts) {
    if (count < 1 || count > agg.n_runs) {
      throw std::runtime_error("majority vote: count for (" + e.parent + ", " + e.child +
                               ") outside [1, n_runs]");
    }
    if (count >= need) edges.push_back(e);
  }
  return TaxonomyGraph(agg.taxonomy_id, agg.concepts, edges);
}

}  // namespace taxokit::decode
