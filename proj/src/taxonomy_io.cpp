#include "taxokit/taxonomy_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace taxokit::io {

using nlohmann::json;

std::string to_json_line(const TaxonomyGraph& t) {
  json doc;
  doc["id"] = t.id();
  json concepts = json::array();
  for (const Concept& c : t.concepts()) {
    concepts.push_back({{"id", c.id}, {"name", c.name}});
  }
  doc["concepts"] = std::move(concepts);
  json relations = json::array();
  for (const Edge& e : t.edges()) {
    relations.push_back({e.parent, e.child});
  }
  doc["relations"] = std::move(relations);
  return doc.dump();
}

TaxonomyGraph from_json_line(const std::string& line) {
  json doc = json::parse(line);
  std::vector<Concept> concepts;
  for (const auto& c : doc.at("concepts")) {
    concepts.push_back({c.at("id").get<std::string>(), c.at("name").get<std::string>()});
  }
  std::vector<Edge> edges;
  for (const auto& r : doc.at("relations")) {
    if (!r.is_array() || r.size() != 2) {
      throw std::runtime_error("relation entries must be [parent_id, child_id] pairs");
    }
    edges.push_back({r[0].get<std::string>(), r[1].get<std::string>()});
  }
  return TaxonomyGraph(doc.at("id").get<std::string>(), std::move(concepts), std::move(edges));
}

std::vector<TaxonomyGraph> read_taxonomies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open taxonomy file: " + path.string());
  }
  std::vector<TaxonomyGraph> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_taxonomies(const std::filesystem::path& path,
                      const std::vector<TaxonomyGraph>& taxonomies) {
  std::ostringstream buf;
  for (const TaxonomyGraph& t : taxonomies) {
    buf << to_json_line(t) << '\n';
  }
  write_text_atomic(path, buf.str());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write file: " + tmp.string());
    }
    out << content;
    if (!out.flush()) {
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace taxokit::io
