#pragma once

// Shared fixtures for the test binaries: random graph generators and the
// independent oracles the property tests compare against. The oracles use
// different algorithms than the library (Floyd-Warshall closure, union-find
// connectivity) so agreement is meaningful.

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "taxokit/core.hpp"
#include "taxokit/rng.hpp"

namespace testhelp {

inline std::string pad_id(int i) {
  std::string s = std::to_string(i);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return "c" + s;
}

inline std::vector<taxokit::Concept> make_concepts(int n) {
  std::vector<taxokit::Concept> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back({pad_id(i), "term " + pad_id(i)});
  return out;
}

// Random arborescence: structural slot i > 0 hangs under a uniform earlier
// slot, then labels are shuffled so the root id is not always the smallest.
inline taxokit::TaxonomyGraph random_tree(int n, taxokit::Rng& rng,
                                          const std::string& id = "tree") {
  std::vector<int> label(n);
  std::iota(label.begin(), label.end(), 0);
  taxokit::shuffle_vec(label, rng);
  const auto concepts = make_concepts(n);
  std::vector<taxokit::Edge> edges;
  for (int slot = 1; slot < n; ++slot) {
    const int parent_slot = static_cast<int>(taxokit::uniform_below(rng, slot));
    edges.push_back({concepts[label[parent_slot]].id, concepts[label[slot]].id});
  }
  return {id, concepts, edges};
}

// Arbitrary digraph: every ordered pair appears independently.
inline taxokit::TaxonomyGraph random_digraph(int n, double edge_prob, taxokit::Rng& rng,
                                             const std::string& id = "graph") {
  const auto concepts = make_concepts(n);
  std::vector<taxokit::Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && taxokit::uniform_unit(rng) < edge_prob) {
        edges.push_back({concepts[i].id, concepts[j].id});
      }
    }
  }
  return {id, concepts, edges};
}

// Transitive closure by Floyd-Warshall; the library walks the graph instead.
inline std::vector<taxokit::Edge> closure_oracle(const taxokit::TaxonomyGraph& t) {
  const int n = static_cast<int>(t.concept_count());
  std::vector<char> reach(static_cast<std::size_t>(n) * n, 0);
  for (const taxokit::Edge& e : t.edges()) {
    reach[static_cast<std::size_t>(t.index_of(e.parent)) * n + t.index_of(e.child)] = 1;
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      if (!reach[static_cast<std::size_t>(i) * n + k]) continue;
      for (int j = 0; j < n; ++j) {
        if (reach[static_cast<std::size_t>(k) * n + j]) {
          reach[static_cast<std::size_t>(i) * n + j] = 1;
        }
      }
    }
  }
  std::vector<taxokit::Edge> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && reach[static_cast<std::size_t>(i) * n + j]) {
        pairs.push_back({t.concepts()[i].id, t.concepts()[j].id});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// Arborescence test by edge count + union-find connectivity + degree scan.
inline bool arborescence_oracle(const taxokit::TaxonomyGraph& t) {
  const int n = static_cast<int>(t.concept_count());
  if (n == 0) return false;
  if (static_cast<int>(t.edge_count()) != n - 1) return false;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> indeg(n, 0);
  for (const taxokit::Edge& e : t.edges()) {
    const int a = t.index_of(e.parent);
    const int b = t.index_of(e.child);
    ++indeg[b];
    const int ra = find(a), rb = find(b);
    if (ra == rb) return false;  // undirected cycle
    parent[ra] = rb;
  }
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) ++roots;
    if (indeg[i] > 1) return false;
  }
  return roots == 1;
}

// Unique scratch directory, removed when the fixture leaves scope.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("taxokit_" + tag + "_" + std::to_string(++counter) + "_" +
            std::to_string(static_cast<unsigned>(::getpid())));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testhelp
