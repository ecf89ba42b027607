#include "taxokit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "json.hpp"
#include "taxokit/rng.hpp"
#include "taxokit/taxonomy_io.hpp"
#include "taxokit/util.hpp"

namespace taxokit::dataset {

namespace {

void finalize(RawTaxonomySet& set) {
  std::sort(set.taxonomies.begin(), set.taxonomies.end(),
            [](const TaxonomyGraph& a, const TaxonomyGraph& b) { return a.id() < b.id(); });
  for (std::size_t i = 1; i < set.taxonomies.size(); ++i) {
    if (set.taxonomies[i - 1].id() == set.taxonomies[i].id()) {
      throw std::runtime_error("duplicate taxonomy id '" + set.taxonomies[i].id() + "' in " +
                               set.provenance);
    }
  }
}

std::string local_name(const std::string& qualified) {
  const auto colon = qualified.rfind(':');
  return colon == std::string::npos ? qualified : qualified.substr(colon + 1);
}

std::string fragment(const std::string& uri) {
  const auto hash = uri.rfind('#');
  if (hash != std::string::npos) return uri.substr(hash + 1);
  const auto slash = uri.rfind('/');
  if (slash != std::string::npos) return uri.substr(slash + 1);
  return uri;
}

using Ptree = boost::property_tree::ptree;

std::string attribute(const Ptree& node, const std::string& local) {
  const auto attrs = node.get_child_optional("<xmlattr>");
  if (!attrs) return {};
  for (const auto& [key, value] : *attrs) {
    if (local_name(key) == local) return value.get_value<std::string>();
  }
  return {};
}

struct CcsConcept {
  std::string name;
  std::vector<std::string> children;  // narrower concept ids
};

void collect_concepts(const Ptree& node, std::map<std::string, CcsConcept>& concepts,
                      std::vector<std::pair<std::string, std::string>>& edges) {
  for (const auto& [key, child] : node) {
    if (key == "<xmlattr>" || key == "<xmlcomment>") continue;
    if (local_name(key) != "Concept") {
      collect_concepts(child, concepts, edges);
      continue;
    }
    std::string about = attribute(child, "about");
    if (about.empty()) about = attribute(child, "ID");
    if (about.empty()) {
      throw std::runtime_error("concept element without rdf:about or rdf:ID");
    }
    const std::string id = fragment(about);
    CcsConcept& entry = concepts[id];

    std::string label_any, label_en;
    for (const auto& [ckey, cnode] : child) {
      const std::string local = local_name(ckey);
      if (local == "prefLabel") {
        const std::string text = trim(cnode.get_value<std::string>());
        if (text.empty()) continue;
        if (label_any.empty()) label_any = text;
        if (attribute(cnode, "lang") == "en" && label_en.empty()) label_en = text;
      } else if (local == "broader" || local == "narrower") {
        const std::string resource = attribute(cnode, "resource");
        if (resource.empty()) {
          throw std::runtime_error("concept '" + id + "': " + local +
                                   " link without rdf:resource");
        }
        const std::string other = fragment(resource);
        if (local == "narrower") {
          edges.emplace_back(id, other);
        } else {
          edges.emplace_back(other, id);
        }
      }
    }
    const std::string label = label_en.empty() ? label_any : label_en;
    if (!label.empty()) {
      if (!entry.name.empty() && entry.name != label) {
        throw std::runtime_error("concept '" + id + "' declared twice with different labels ('" +
                                 entry.name + "' vs '" + label + "')");
      }
      entry.name = label;
    }
    collect_concepts(child, concepts, edges);
  }
}

}  // namespace

RawTaxonomySet parse_ccs_owl(const std::filesystem::path& path) {
  Ptree doc;
  try {
    boost::property_tree::read_xml(path.string(), doc);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw std::runtime_error(std::string("malformed document: ") + e.what());
  }

  std::map<std::string, CcsConcept> concepts;
  std::vector<std::pair<std::string, std::string>> edges;
  collect_concepts(doc, concepts, edges);
  if (concepts.empty()) {
    throw std::runtime_error(path.string() + ": no concept elements found");
  }

  for (const auto& [id, c] : concepts) {
    if (c.name.empty()) {
      throw std::runtime_error("concept '" + id + "' has no label");
    }
  }
  std::set<std::pair<std::string, std::string>> edge_set;
  for (const auto& [parent, child] : edges) {
    if (!concepts.count(parent)) {
      throw std::runtime_error("relation references unknown concept '" + parent + "'");
    }
    if (!concepts.count(child)) {
      throw std::runtime_error("relation references unknown concept '" + child + "'");
    }
    if (parent != child) edge_set.emplace(parent, child);
  }

  std::map<std::string, std::vector<std::string>> narrower;
  std::set<std::string> has_parent;
  for (const auto& [parent, child] : edge_set) {
    narrower[parent].push_back(child);
    has_parent.insert(child);
  }

  RawTaxonomySet out;
  out.provenance = path.string();
  for (const auto& [id, c] : concepts) {
    (void)c;
    if (has_parent.count(id)) continue;
    // top concept: gather its narrower-descendant subtree
    std::set<std::string> subtree;
    std::deque<std::string> queue{id};
    while (!queue.empty()) {
      const std::string cur = queue.front();
      queue.pop_front();
      if (!subtree.insert(cur).second) continue;
      const auto it = narrower.find(cur);
      if (it == narrower.end()) continue;
      for (const std::string& next : it->second) queue.push_back(next);
    }
    std::vector<Concept> members;
    for (const std::string& cid : subtree) members.push_back({cid, concepts.at(cid).name});
    std::vector<Edge> sub_edges;
    for (const auto& [parent, child] : edge_set) {
      if (subtree.count(parent) && subtree.count(child)) sub_edges.push_back({parent, child});
    }
    out.taxonomies.emplace_back(id, std::move(members), std::move(sub_edges));
  }
  finalize(out);
  return out;
}

RawTaxonomySet split_large_taxonomies(const RawTaxonomySet& set, std::size_t max_terms) {
  if (max_terms < 1) {
    throw std::invalid_argument("max_terms must be >= 1");
  }
  RawTaxonomySet out;
  out.provenance = set.provenance;
  for (const TaxonomyGraph& t : set.taxonomies) {
    const std::vector<Concept> root_list = roots(t);
    if (root_list.size() != 1) {
      throw std::runtime_error("taxonomy '" + t.id() + "' has " +
                               std::to_string(root_list.size()) +
                               " roots; the split requires exactly one");
    }
    if (t.concept_count() <= max_terms) {
      out.taxonomies.push_back(t);
      continue;
    }
    const auto adj = t.adjacency();
    const int root = t.index_of(root_list.front().id);
    for (const int child : adj[static_cast<std::size_t>(root)]) {
      std::set<int> subtree;
      std::deque<int> queue{child};
      while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        if (!subtree.insert(cur).second) continue;
        for (const int next : adj[static_cast<std::size_t>(cur)]) queue.push_back(next);
      }
      std::vector<Concept> members;
      for (const int idx : subtree) members.push_back(t.concepts()[static_cast<std::size_t>(idx)]);
      std::vector<Edge> edges;
      for (const Edge& e : t.edges()) {
        const int p = t.index_of(e.parent);
        const int c = t.index_of(e.child);
        if (subtree.count(p) && subtree.count(c)) edges.push_back(e);
      }
      const std::string& child_id = t.concepts()[static_cast<std::size_t>(child)].id;
      out.taxonomies.emplace_back(t.id() + "." + child_id, std::move(members),
                                  std::move(edges));
    }
  }
  finalize(out);
  return out;
}

RawTaxonomySet remove_duplicates(const RawTaxonomySet& set, DedupStats* stats,
                                 const DedupOptions& opts) {
  using Key = std::pair<std::string, std::string>;
  const std::size_t n = set.taxonomies.size();

  const auto key_of = [&](const TaxonomyGraph& t, const Edge& e) -> Key {
    if (!opts.match_by_name) return {e.parent, e.child};
    return {t.find_concept(e.parent)->name, t.find_concept(e.child)->name};
  };

  // snapshot: which taxonomies host each relation, term counts before removal
  std::map<Key, std::vector<std::size_t>> hosts;
  for (std::size_t i = 0; i < n; ++i) {
    for (const Edge& e : set.taxonomies[i].edges()) {
      auto& h = hosts[key_of(set.taxonomies[i], e)];
      if (h.empty() || h.back() != i) h.push_back(i);
    }
  }

  DedupStats local;
  for (const auto& [key, h] : hosts) {
    (void)key;
    if (h.size() >= 2) ++local.duplicate_relations;
  }

  // drop pass, in id order: a taxonomy goes when everything it asserts is
  // already present elsewhere
  std::vector<char> dropped(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const TaxonomyGraph& t = set.taxonomies[i];
    if (t.edge_count() == 0) continue;
    bool all_elsewhere = true;
    for (const Edge& e : t.edges()) {
      const auto& h = hosts.at(key_of(t, e));
      const bool elsewhere = std::any_of(h.begin(), h.end(), [&](std::size_t j) {
        return j != i && !dropped[j];
      });
      if (!elsewhere) {
        all_elsewhere = false;
        break;
      }
    }
    if (all_elsewhere) {
      dropped[i] = 1;
      local.dropped_taxonomies.push_back(t.id());
    }
  }

  // keeper per relation: surviving host with the fewest terms, then smallest id
  std::map<Key, std::size_t> keeper;
  for (const auto& [key, h] : hosts) {
    std::size_t best = n;
    for (const std::size_t j : h) {
      if (dropped[j]) continue;
      if (best == n ||
          set.taxonomies[j].concept_count() < set.taxonomies[best].concept_count()) {
        best = j;  // hosts are in ascending id order, so ties keep the earlier one
      }
    }
    if (best < n) keeper[key] = best;
  }

  RawTaxonomySet out;
  out.provenance = set.provenance;
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped[i]) continue;
    const TaxonomyGraph& t = set.taxonomies[i];
    std::vector<Edge> kept;
    std::set<std::string> had_relation, still_has;
    for (const Edge& e : t.edges()) {
      had_relation.insert(e.parent);
      had_relation.insert(e.child);
      if (keeper.at(key_of(t, e)) == i) {
        kept.push_back(e);
        still_has.insert(e.parent);
        still_has.insert(e.child);
      } else {
        ++local.instances_removed;
      }
    }
    std::vector<Concept> members;
    for (const Concept& c : t.concepts()) {
      if (had_relation.count(c.id) && !still_has.count(c.id)) {
        ++local.concepts_pruned;
        continue;
      }
      members.push_back(c);
    }
    out.taxonomies.emplace_back(t.id(), std::move(members), std::move(kept));
  }
  finalize(out);
  if (stats) *stats = std::move(local);
  return out;
}

DatasetSplit split_dataset(const RawTaxonomySet& set, const SplitRatios& ratios,
                           std::uint64_t seed) {
  const double parts[3] = {ratios.train, ratios.validation, ratios.test};
  double sum = 0.0;
  for (const double r : parts) {
    if (r < 0.0) throw std::invalid_argument("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }

  const std::size_t n = set.taxonomies.size();
  std::size_t counts[3];
  double frac[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = parts[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  // largest remainder, earlier partition on ties
  while (assigned < n) {
    int pick = 0;
    for (int i = 1; i < 3; ++i) {
      if (frac[i] > frac[pick]) pick = i;
    }
    ++counts[pick];
    frac[pick] = -1.0;
    ++assigned;
  }
  const char* names[3] = {"train", "validation", "test"};
  for (int i = 0; i < 3; ++i) {
    if (parts[i] > 0.0 && counts[i] == 0) {
      throw std::runtime_error(std::string("not enough taxonomies: the ") + names[i] +
                               " partition would be empty");
    }
  }

  std::vector<TaxonomyGraph> shuffled = set.taxonomies;
  Rng rng(seed);
  shuffle_vec(shuffled, rng);

  DatasetSplit split;
  split.seed = seed;
  split.ratios = ratios;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < counts[0]; ++i) split.train.push_back(shuffled[cursor++]);
  for (std::size_t i = 0; i < counts[1]; ++i) split.validation.push_back(shuffled[cursor++]);
  for (std::size_t i = 0; i < counts[2]; ++i) split.test.push_back(shuffled[cursor++]);
  return split;
}

RawTaxonomySet load_wordnet(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> term_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".terms") {
      term_files.push_back(entry.path());
    }
  }
  std::sort(term_files.begin(), term_files.end());
  if (term_files.empty()) {
    throw std::runtime_error("no .terms files under " + dir.string());
  }

  RawTaxonomySet out;
  out.provenance = dir.string();
  for (const std::filesystem::path& terms_path : term_files) {
    const std::string tax_id = terms_path.stem().string();
    std::vector<Concept> concepts;
    std::size_t lineno = 0;
    for (const std::string& raw_line : split_lines(io::read_text(terms_path))) {
      ++lineno;
      const std::string line = trim(raw_line);
      if (line.empty()) continue;
      const auto fields = split_on(line, '\t');
      if (fields.size() == 1) {
        concepts.push_back({trim(fields[0]), trim(fields[0])});
      } else if (fields.size() == 2) {
        concepts.push_back({trim(fields[0]), trim(fields[1])});
      } else {
        throw std::runtime_error(terms_path.string() + ":" + std::to_string(lineno) +
                                 ": expected 1 or 2 tab-separated fields");
      }
    }

    std::filesystem::path rels_path = terms_path;
    rels_path.replace_extension(".rels");
    if (!std::filesystem::exists(rels_path)) {
      rels_path.replace_extension(".taxo");
    }
    if (!std::filesystem::exists(rels_path)) {
      throw std::runtime_error("taxonomy '" + tax_id + "': no .rels or .taxo file next to " +
                               terms_path.string());
    }
    std::vector<Edge> edges;
    lineno = 0;
    for (const std::string& raw_line : split_lines(io::read_text(rels_path))) {
      ++lineno;
      const std::string line = trim(raw_line);
      if (line.empty()) continue;
      const auto fields = split_on(line, '\t');
      if (fields.size() != 2) {
        throw std::runtime_error(rels_path.string() + ":" + std::to_string(lineno) +
                                 ": expected parent<TAB>child");
      }
      edges.push_back({trim(fields[0]), trim(fields[1])});
    }
    try {
      TaxonomyGraph(tax_id, concepts, {});
    } catch (const std::exception& e) {
      throw std::runtime_error(terms_path.string() + ": " + e.what());
    }
    try {
      out.taxonomies.emplace_back(tax_id, std::move(concepts), std::move(edges));
    } catch (const std::exception& e) {
      throw std::runtime_error(rels_path.string() + ": " + e.what());
    }
  }
  finalize(out);
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetSplit& split) {
  const auto ids = [](const std::vector<TaxonomyGraph>& list) {
    std::vector<std::string> out;
    for (const TaxonomyGraph& t : list) out.push_back(t.id());
    return out;
  };
  const nlohmann::json doc = {
      {"seed", split.seed},
      {"ratios",
       {{"train", split.ratios.train},
        {"validation", split.ratios.validation},
        {"test", split.ratios.test}}},
      {"train", ids(split.train)},
      {"validation", ids(split.validation)},
      {"test", ids(split.test)},
  };
  io::write_text_atomic(path, doc.dump(2) + "\n");
}

}  // namespace taxokit::dataset
