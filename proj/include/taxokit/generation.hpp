#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taxokit/core.hpp"

namespace taxokit {

// One model generation for a taxonomy's concept set. `parsed` holds the
// relations that survived parsing, as concept-id pairs; `dropped` holds the
// lines that did not. A failed run (endpoint gave up after retries) keeps its
// slot so run counts stay meaningful for voting.
struct GenerationRun {
  std::string taxonomy_id;
  int run_index = 0;
  bool failed = false;
  std::string error;
  std::string raw_text;
  std::vector<Concept> concepts;
  std::vector<Edge> parsed;
  std::vector<std::string> dropped;
};

namespace io {

void write_generations(const std::filesystem::path& path,
                       const std::vector<GenerationRun>& runs);
std::vector<GenerationRun> read_generations(const std::filesystem::path& path);

}  // namespace io

}  // namespace taxokit
