#include "taxokit/generation.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "taxokit/taxonomy_io.hpp"

namespace taxokit::io {

namespace {

nlohmann::json run_to_json(const GenerationRun& run) {
  nlohmann::json concepts = nlohmann::json::array();
  for (const Concept& c : run.concepts) {
    concepts.push_back({{"id", c.id}, {"name", c.name}});
  }
  nlohmann::json parsed = nlohmann::json::array();
  for (const Edge& e : run.parsed) {
    parsed.push_back({e.parent, e.child});
  }
  return {{"taxonomy_id", run.taxonomy_id}, {"run_index", run.run_index},
          {"failed", run.failed},           {"error", run.error},
          {"raw_text", run.raw_text},       {"concepts", std::move(concepts)},
          {"parsed", std::move(parsed)},    {"dropped", run.dropped}};
}

GenerationRun run_from_json(const nlohmann::json& rec) {
  GenerationRun run;
  run.taxonomy_id = rec.at("taxonomy_id").get<std::string>();
  run.run_index = rec.at("run_index").get<int>();
  run.failed = rec.at("failed").get<bool>();
  run.error = rec.at("error").get<std::string>();
  run.raw_text = rec.at("raw_text").get<std::string>();
  for (const auto& c : rec.at("concepts")) {
    run.concepts.push_back({c.at("id").get<std::string>(), c.at("name").get<std::string>()});
  }
  for (const auto& e : rec.at("parsed")) {
    if (!e.is_array() || e.size() != 2) {
      throw std::runtime_error("generation record: relation must be a [parent, child] pair");
    }
    run.parsed.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
  }
  run.dropped = rec.at("dropped").get<std::vector<std::string>>();
  return run;
}

}  // namespace

void write_generations(const std::filesystem::path& path,
                       const std::vector<GenerationRun>& runs) {
  std::ostringstream buf;
  for (const GenerationRun& run : runs) {
    buf << run_to_json(run).dump() << '\n';
  }
  write_text_atomic(path, buf.str());
}

std::vector<GenerationRun> read_generations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open generations file: " + path.string());
  }
  std::vector<GenerationRun> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(run_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace taxokit::io
