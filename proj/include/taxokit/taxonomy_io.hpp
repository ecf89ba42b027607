#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taxokit/core.hpp"

namespace taxokit::io {

// Canonical taxonomy file: one JSON document per line, one line per taxonomy,
// fields {id, concepts: [{id, name}...], relations: [[parent_id, child_id]...]}.
// Writing emits concepts and relations in sorted order, so parse . serialize
// is the identity up to field ordering.

std::string to_json_line(const TaxonomyGraph& t);
TaxonomyGraph from_json_line(const std::string& line);

std::vector<TaxonomyGraph> read_taxonomies(const std::filesystem::path& path);
void write_taxonomies(const std::filesystem::path& path,
                      const std::vector<TaxonomyGraph>& taxonomies);

/// Writes to a sibling temp file, then renames over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

}  // namespace taxokit::io
