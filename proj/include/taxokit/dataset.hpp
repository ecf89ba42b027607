#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "taxokit/core.hpp"

namespace taxokit::dataset {

struct RawTaxonomySet {
  std::vector<TaxonomyGraph> taxonomies;  // sorted by id, ids unique
  std::string provenance;
};

struct SplitRatios {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
};

struct DatasetSplit {
  std::vector<TaxonomyGraph> train;
  std::vector<TaxonomyGraph> validation;
  std::vector<TaxonomyGraph> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

struct DedupOptions {
  // relations in different taxonomies count as the same when their concept
  // names match; switch to id matching for sources with stable global ids
  bool match_by_name = true;
};

struct DedupStats {
  std::size_t duplicate_relations = 0;  // distinct relations seen in 2+ taxonomies
  std::size_t instances_removed = 0;    // copies removed from surviving taxonomies
  std::vector<std::string> dropped_taxonomies;
  std::size_t concepts_pruned = 0;
};

// SKOS-style concept scheme: concepts with prefLabel names, broader/narrower
// links as parent-child edges. Yields one taxonomy per top concept (no
// broader link), covering that concept's full narrower-descendant subtree.
RawTaxonomySet parse_ccs_owl(const std::filesystem::path& path);

// Replaces every taxonomy with more than max_terms concepts by one
// sub-taxonomy per direct child of its root (the child's descendant subtree;
// the root is dropped). Applied once, not recursively, so outputs may still
// exceed max_terms. Inputs must be single-rooted.
RawTaxonomySet split_large_taxonomies(const RawTaxonomySet& set, std::size_t max_terms = 70);

// Cross-taxonomy duplicate removal. Taxonomies are processed in id order:
// one whose relations (it must have at least one) all occur in other
// still-present taxonomies is dropped. Each remaining duplicated relation is
// kept only in the surviving host with the fewest terms (pre-removal counts;
// ties break to the smaller id). Concepts that lose their last incident
// relation are pruned; concepts that never had one stay.
RawTaxonomySet remove_duplicates(const RawTaxonomySet& set, DedupStats* stats = nullptr,
                                 const DedupOptions& opts = {});

// Shuffles deterministically by seed and partitions by largest-remainder
// rounding. Errors when a positive ratio would receive an empty partition.
DatasetSplit split_dataset(const RawTaxonomySet& set, const SplitRatios& ratios,
                           std::uint64_t seed);

// Directory of per-taxonomy files: "<id>.terms" (one term per line, either
// the bare name or "id<TAB>name") and "<id>.rels" or "<id>.taxo"
// ("parent_id<TAB>child_id" per line).
RawTaxonomySet load_wordnet(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& path, const DatasetSplit& split);

}  // namespace taxokit::dataset
