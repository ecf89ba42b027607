#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "taxokit/core.hpp"

namespace taxokit::eval {

struct AncestralMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ConsistencyMetrics {
  double roots_avg = 0.0;
  double nrg_pct = 0.0;     // share of taxonomies with no root, in percent
  double parents_avg = 0.0; // mean over taxonomies of mean non-root in-degree
  double mpn_pct = 0.0;     // mean over taxonomies of multi-parent share, in percent
};

struct PerTaxonomy {
  std::string taxonomy_id;
  AncestralMetrics ancestral;
  ViolationReport violations;
};

struct EvaluationReport {
  std::vector<PerTaxonomy> per_taxonomy;  // sorted by taxonomy id
  AncestralMetrics macro;
  ConsistencyMetrics consistency;
};

// Precision/recall/F1 over ancestral closures. An empty closure on either
// side contributes 0 to its ratio; F1 is 0 when precision + recall is 0.
AncestralMetrics ancestral_prf(const TaxonomyGraph& predicted, const TaxonomyGraph& truth);

// Arithmetic mean per field. Macro F1 averages per-taxonomy F1 values rather
// than recombining macro precision and recall.
AncestralMetrics macro_average(const std::vector<AncestralMetrics>& per_tax);

ConsistencyMetrics consistency_metrics(const std::vector<TaxonomyGraph>& taxonomies);

// Index of the run with the highest F1 against truth; ties keep the lowest
// index.
std::pair<std::size_t, AncestralMetrics> individual_best(
    const std::vector<TaxonomyGraph>& runs, const TaxonomyGraph& truth);

// Pairs predictions with ground truths by taxonomy id (the sets must match
// exactly) and computes the full report. jobs <= 0 takes the runtime default.
EvaluationReport evaluate_all(const std::vector<TaxonomyGraph>& predicted,
                              const std::vector<TaxonomyGraph>& truth, int jobs = 0);

void write_report_text(std::ostream& out, const EvaluationReport& report);
void write_report_jsonl(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace taxokit::eval
