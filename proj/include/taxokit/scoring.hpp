#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "taxokit/core.hpp"

namespace taxokit::scoring {

/// Probability score for every ordered pair of distinct concepts in one
/// taxonomy. Dense storage; concept ids are kept sorted so pair iteration
/// order is canonical.
class PairwiseScoreMatrix {
 public:
  PairwiseScoreMatrix(std::string taxonomy_id, std::vector<std::string> concept_ids);

  const std::string& taxonomy_id() const { return taxonomy_id_; }
  const std::vector<std::string>& concept_ids() const { return ids_; }
  std::size_t size() const { return ids_.size(); }

  int index_of(const std::string& concept_id) const;

  void set(const std::string& parent_id, const std::string& child_id, double score);
  void set_at(std::size_t parent, std::size_t child, double score);

  double score(const std::string& parent_id, const std::string& child_id) const;
  double score_at(std::size_t parent, std::size_t child) const;

  /// Throws unless every off-diagonal entry is set and inside [0, 1].
  void validate() const;

 private:
  std::string taxonomy_id_;
  std::vector<std::string> ids_;
  std::vector<double> scores_;  // n*n, diagonal unused (NaN)
};

struct TrainingExample {
  std::string text;
  bool label = false;  // true = genuine hierarchical relation
};

/// Synthetic scorer standing in for an externally trained relation model.
/// noise = 1 degenerates to uniform random scores (the random baseline).
struct OracleConfig {
  double noise = 0.0;
  std::uint64_t seed = 0;
  double sharpness = 4.0;  // separation of true/false pair scores around 0.5
};

/// "I am doing the taxonomy research. I think {child} is a subtopic of {parent}".
std::string render_pair_sentence(const Concept& parent, const Concept& child);

/// One positive example per edge plus negatives_per_positive * |edges|
/// negatives sampled without replacement from ordered pairs (A, B) where B is
/// not a descendant of A. Deterministic given the seed; throws when the
/// eligible pool is too small.
std::vector<TrainingExample> generate_training_set(const TaxonomyGraph& t,
                                                   int negatives_per_positive,
                                                   std::uint64_t seed);

PairwiseScoreMatrix oracle_score(const TaxonomyGraph& truth, const OracleConfig& cfg);

/// Parses a score-matrix file (tab-separated: taxonomy_id, parent_id,
/// child_id, score) and validates each matrix against the reference
/// taxonomies: unknown ids, out-of-range or duplicate scores, and missing
/// pairs are all reported with line numbers.
std::vector<PairwiseScoreMatrix> ingest_scores(const std::filesystem::path& path,
                                               const std::vector<TaxonomyGraph>& reference);

void write_scores(std::ostream& out, const std::vector<PairwiseScoreMatrix>& matrices);
void write_scores(const std::filesystem::path& path,
                  const std::vector<PairwiseScoreMatrix>& matrices);

/// Training-data file: one JSON record per line, {"text": ..., "label": "true"|"false"}.
void write_training_set(const std::filesystem::path& path,
                        const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> read_training_set(const std::filesystem::path& path);

}  // namespace taxokit::scoring
