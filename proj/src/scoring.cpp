#include "taxokit/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "taxokit/rng.hpp"
#include "taxokit/taxonomy_io.hpp"
#include "taxokit/util.hpp"

namespace taxokit::scoring {

PairwiseScoreMatrix::PairwiseScoreMatrix(std::string taxonomy_id,
                                         std::vector<std::string> concept_ids)
    : taxonomy_id_(std::move(taxonomy_id)), ids_(std::move(concept_ids)) {
  std::sort(ids_.begin(), ids_.end());
  if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
    throw std::invalid_argument("score matrix '" + taxonomy_id_ + "': duplicate concept id");
  }
  if (!ids_.empty() && ids_.front().empty()) {
    throw std::invalid_argument("score matrix '" + taxonomy_id_ + "': empty concept id");
  }
  scores_.assign(ids_.size() * ids_.size(), std::numeric_limits<double>::quiet_NaN());
}

int PairwiseScoreMatrix::index_of(const std::string& concept_id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), concept_id);
  if (it == ids_.end() || *it != concept_id) return -1;
  return static_cast<int>(it - ids_.begin());
}

void PairwiseScoreMatrix::set(const std::string& parent_id, const std::string& child_id,
                              double score) {
  int p = index_of(parent_id);
  int c = index_of(child_id);
  if (p < 0 || c < 0) {
    throw std::invalid_argument("score matrix '" + taxonomy_id_ + "': unknown concept id '" +
                                (p < 0 ? parent_id : child_id) + "'");
  }
  set_at(static_cast<std::size_t>(p), static_cast<std::size_t>(c), score);
}

void PairwiseScoreMatrix::set_at(std::size_t parent, std::size_t child, double score) {
  if (parent == child) {
    throw std::invalid_argument("score matrix '" + taxonomy_id_ + "': self pair");
  }
  scores_[parent * ids_.size() + child] = score;
}

double PairwiseScoreMatrix::score(const std::string& parent_id,
                                  const std::string& child_id) const {
  int p = index_of(parent_id);
  int c = index_of(child_id);
  if (p < 0 || c < 0) {
    throw std::invalid_argument("score matrix '" + taxonomy_id_ + "': unknown concept id '" +
                                (p < 0 ? parent_id : child_id) + "'");
  }
  return score_at(static_cast<std::size_t>(p), static_cast<std::size_t>(c));
}

double PairwiseScoreMatrix::score_at(std::size_t parent, std::size_t child) const {
  return scores_[parent * ids_.size() + child];
}

void PairwiseScoreMatrix::validate() const {
  const std::size_t n = ids_.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double s = scores_[i * n + j];
      if (std::isnan(s)) {
        throw std::runtime_error("score matrix '" + taxonomy_id_ + "': missing pair (" +
                                 ids_[i] + ", " + ids_[j] + ")");
      }
      if (s < 0.0 || s > 1.0) {
        throw std::runtime_error("score matrix '" + taxonomy_id_ + "': score for (" + ids_[i] +
                                 ", " + ids_[j] + ") out of [0, 1]");
      }
    }
  }
}

std::string render_pair_sentence(const Concept& parent, const Concept& child) {
  if (parent.id == child.id) {
    throw std::invalid_argument("pair sentence requires two distinct concepts");
  }
  return "I am doing the taxonomy research. I think " + child.name + " is a subtopic of " +
         parent.name;
}

namespace {

// descendants[i] = set of node indices reachable from i (i excluded).
std::vector<std::vector<char>> descendant_table(const TaxonomyGraph& t) {
  const auto adj = t.adjacency();
  const std::size_t n = t.concept_count();
  std::vector<std::vector<char>> desc(n, std::vector<char>(n, 0));
  std::deque<int> queue;
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<char> seen(n, 0);
    seen[s] = 1;
    queue.assign(adj[s].begin(), adj[s].end());
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      desc[s][static_cast<std::size_t>(v)] = 1;
      for (int w : adj[static_cast<std::size_t>(v)]) queue.push_back(w);
    }
    for (int v : adj[s]) desc[s][static_cast<std::size_t>(v)] = 1;
  }
  return desc;
}

}  // namespace

std::vector<TrainingExample> generate_training_set(const TaxonomyGraph& t,
                                                   int negatives_per_positive,
                                                   std::uint64_t seed) {
  if (negatives_per_positive < 0) {
    throw std::invalid_argument("negatives_per_positive must be >= 0");
  }
  std::vector<TrainingExample> out;
  for (const Edge& e : t.edges()) {
    out.push_back({render_pair_sentence(*t.find_concept(e.parent), *t.find_concept(e.child)),
                   true});
  }
  const std::size_t wanted =
      static_cast<std::size_t>(negatives_per_positive) * t.edge_count();
  if (wanted == 0) return out;

  const auto desc = descendant_table(t);
  const std::size_t n = t.concept_count();
  std::vector<std::pair<int, int>> pool;  // canonical order: concepts are sorted by id
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || desc[a][b]) continue;
      pool.emplace_back(static_cast<int>(a), static_cast<int>(b));
    }
  }
  if (pool.size() < wanted) {
    throw std::runtime_error("taxonomy '" + t.id() + "': negative pool has " +
                             std::to_string(pool.size()) + " pairs, need " +
                             std::to_string(wanted));
  }
  Rng rng(mix_seed(seed, t.id()));
  for (std::size_t idx : sample_indices(pool.size(), wanted, rng)) {
    const auto [a, b] = pool[idx];
    out.push_back({render_pair_sentence(t.concepts()[static_cast<std::size_t>(a)],
                                        t.concepts()[static_cast<std::size_t>(b)]),
                   false});
  }
  return out;
}

PairwiseScoreMatrix oracle_score(const TaxonomyGraph& truth, const OracleConfig& cfg) {
  if (cfg.noise < 0.0 || cfg.noise > 1.0) {
    throw std::invalid_argument("oracle noise must be in [0, 1]");
  }
  if (!(cfg.sharpness > 0.0)) {
    throw std::invalid_argument("oracle sharpness must be positive");
  }
  const double margin = 0.4 * cfg.sharpness / (1.0 + cfg.sharpness);
  const double high = 0.5 + margin;
  const double low = 0.5 - margin;

  std::vector<std::string> ids;
  ids.reserve(truth.concept_count());
  for (const Concept& c : truth.concepts()) ids.push_back(c.id);
  PairwiseScoreMatrix m(truth.id(), std::move(ids));

  const std::size_t n = truth.concept_count();
  std::unordered_set<std::size_t> edge_cells;
  for (const Edge& e : truth.edges()) {
    edge_cells.insert(static_cast<std::size_t>(truth.index_of(e.parent)) * n +
                      static_cast<std::size_t>(truth.index_of(e.child)));
  }

  Rng rng(mix_seed(cfg.seed, truth.id()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double s = edge_cells.count(i * n + j) ? high : low;
      if (uniform_unit(rng) < cfg.noise) {
        s = uniform_unit(rng);
      }
      m.set_at(i, j, s);
    }
  }
  m.validate();
  return m;
}

namespace {

std::string format_score(double s) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), s);
  if (ec != std::errc()) {
    throw std::runtime_error("score formatting failed");
  }
  return std::string(buf, end);
}

bool parse_score(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [end, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && end == last;
}

void check_tsv_safe(const std::string& s, const char* what) {
  if (s.find('\t') != std::string::npos || s.find('\n') != std::string::npos) {
    throw std::runtime_error(std::string(what) + " '" + s +
                             "' contains a tab or newline; not representable in score files");
  }
}

}  // namespace

std::vector<PairwiseScoreMatrix> ingest_scores(const std::filesystem::path& path,
                                               const std::vector<TaxonomyGraph>& reference) {
  std::unordered_map<std::string, const TaxonomyGraph*> by_id;
  for (const TaxonomyGraph& t : reference) by_id.emplace(t.id(), &t);

  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open score file: " + path.string());
  }

  std::vector<std::string> errors;
  auto report = [&](std::size_t lineno, const std::string& msg) {
    errors.push_back(path.filename().string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  std::map<std::string, PairwiseScoreMatrix> matrices;
  std::map<std::string, std::unordered_set<std::size_t>> seen_cells;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_on(line, '\t');
    if (fields.size() != 4) {
      report(lineno, "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
      continue;
    }
    const std::string& tax_id = fields[0];
    auto ref = by_id.find(tax_id);
    if (ref == by_id.end()) {
      report(lineno, "unknown taxonomy id '" + tax_id + "'");
      continue;
    }
    auto mit = matrices.find(tax_id);
    if (mit == matrices.end()) {
      std::vector<std::string> ids;
      for (const Concept& c : ref->second->concepts()) ids.push_back(c.id);
      mit = matrices.emplace(tax_id, PairwiseScoreMatrix(tax_id, std::move(ids))).first;
    }
    PairwiseScoreMatrix& m = mit->second;
    int p = m.index_of(fields[1]);
    int c = m.index_of(fields[2]);
    if (p < 0 || c < 0) {
      report(lineno, "unknown concept id '" + (p < 0 ? fields[1] : fields[2]) +
                         "' in taxonomy '" + tax_id + "'");
      continue;
    }
    if (p == c) {
      report(lineno, "self pair (" + fields[1] + ", " + fields[2] + ")");
      continue;
    }
    double s = 0.0;
    if (!parse_score(fields[3], s)) {
      report(lineno, "malformed score '" + fields[3] + "'");
      continue;
    }
    if (s < 0.0 || s > 1.0) {
      report(lineno, "score " + fields[3] + " out of [0, 1]");
      continue;
    }
    const std::size_t cell =
        static_cast<std::size_t>(p) * m.size() + static_cast<std::size_t>(c);
    if (!seen_cells[tax_id].insert(cell).second) {
      report(lineno, "duplicate pair (" + fields[1] + ", " + fields[2] + ") in taxonomy '" +
                         tax_id + "'");
      continue;
    }
    m.set_at(static_cast<std::size_t>(p), static_cast<std::size_t>(c), s);
  }

  for (const auto& [tax_id, m] : matrices) {
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && std::isnan(m.score_at(i, j))) {
          errors.push_back(path.filename().string() + ": taxonomy '" + tax_id +
                           "': missing pair (" + m.concept_ids()[i] + ", " +
                           m.concept_ids()[j] + ")");
        }
      }
    }
  }

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "score file validation failed with " << errors.size() << " error(s):";
    const std::size_t cap = 100;
    for (std::size_t i = 0; i < errors.size() && i < cap; ++i) msg << "\n  " << errors[i];
    if (errors.size() > cap) msg << "\n  ... and " << (errors.size() - cap) << " more";
    throw std::runtime_error(msg.str());
  }

  std::vector<PairwiseScoreMatrix> out;
  for (auto& [tax_id, m] : matrices) out.push_back(std::move(m));
  return out;
}

void write_scores(std::ostream& out, const std::vector<PairwiseScoreMatrix>& matrices) {
  for (const PairwiseScoreMatrix& m : matrices) {
    check_tsv_safe(m.taxonomy_id(), "taxonomy id");
    const std::size_t n = m.size();
    for (std::size_t i = 0; i < n; ++i) {
      check_tsv_safe(m.concept_ids()[i], "concept id");
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        out << m.taxonomy_id() << '\t' << m.concept_ids()[i] << '\t' << m.concept_ids()[j]
            << '\t' << format_score(m.score_at(i, j)) << '\n';
      }
    }
  }
}

void write_scores(const std::filesystem::path& path,
                  const std::vector<PairwiseScoreMatrix>& matrices) {
  std::ostringstream buf;
  write_scores(buf, matrices);
  io::write_text_atomic(path, buf.str());
}

void write_training_set(const std::filesystem::path& path,
                        const std::vector<TrainingExample>& examples) {
  std::ostringstream buf;
  for (const TrainingExample& ex : examples) {
    nlohmann::json rec = {{"text", ex.text}, {"label", ex.label ? "true" : "false"}};
    buf << rec.dump() << '\n';
  }
  io::write_text_atomic(path, buf.str());
}

std::vector<TrainingExample> read_training_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open training file: " + path.string());
  }
  std::vector<TrainingExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = nlohmann::json::parse(line);
    out.push_back({rec.at("text").get<std::string>(),
                   rec.at("label").get<std::string>() == "true"});
  }
  return out;
}

}  // namespace taxokit::scoring
