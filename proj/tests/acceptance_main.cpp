// Acceptance gate: one line per criterion, PASS/FAIL/SKIP, exit status is the
// number of failures. Each check is self-contained and uses independent
// oracles where the criterion asks for agreement.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "taxokit/dataset.hpp"
#include "taxokit/decode.hpp"
#include "taxokit/eval.hpp"
#include "taxokit/prompting.hpp"
#include "taxokit/scoring.hpp"
#include "taxokit/taxonomy_io.hpp"

using namespace taxokit;
using testhelp::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

scoring::PairwiseScoreMatrix random_matrix(int n, Rng& rng, bool quantized) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(testhelp::pad_id(i));
  scoring::PairwiseScoreMatrix m("m", ids);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double s = quantized
                           ? (1.0 + static_cast<double>(uniform_below(rng, 3))) / 4.0
                           : uniform_unit(rng);
      m.set_at(i, j, s);
    }
  }
  return m;
}

int run_tool(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd =
      std::string(TAXOKIT_BIN) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// ---------------------------------------------------------------------------

bool edmonds_matches_brute_force(std::string& detail) {
  const auto t0 = Clock::now();
  Rng rng(2001);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = 2 + static_cast<int>(uniform_below(rng, 5));
    const auto m = random_matrix(n, rng, iter % 2 == 1);
    const auto fast = decode::msa(m);
    const auto slow = decode::brute_force_arborescence(m);
    if (fast.total_weight != slow.total_weight || fast.root != slow.root ||
        fast.graph.edges() != slow.graph.edges()) {
      detail = "disagreement at iteration " + std::to_string(iter) + " (n=" +
               std::to_string(n) + ")";
      return false;
    }
  }
  const double elapsed = seconds_since(t0);
  detail = "200 matrices in " + std::to_string(elapsed) + "s";
  return elapsed < 60.0;
}

bool msa_always_consistent(std::string& detail) {
  const auto t0 = Clock::now();
  Rng rng(2002);
  std::vector<TaxonomyGraph> outputs;
  outputs.reserve(1000);
  for (int iter = 0; iter < 1000; ++iter) {
    const int n = 2 + static_cast<int>(uniform_below(rng, 29));
    const auto m = random_matrix(n, rng, iter % 4 == 0);
    outputs.push_back(decode::msa(m).graph);
  }
  const auto c = eval::consistency_metrics(outputs);
  if (c.roots_avg != 1.0 || c.nrg_pct != 0.0 || c.parents_avg != 1.0 || c.mpn_pct != 0.0) {
    std::ostringstream os;
    os << "metrics (" << c.roots_avg << ", " << c.nrg_pct << ", " << c.parents_avg << ", "
       << c.mpn_pct << ") != (1, 0, 1, 0)";
    detail = os.str();
    return false;
  }
  const double elapsed = seconds_since(t0);
  detail = "1000 matrices in " + std::to_string(elapsed) + "s";
  return elapsed < 60.0;
}

bool oracle_recovery_is_exact(std::string& detail) {
  Rng rng(2003);
  std::vector<eval::AncestralMetrics> via_msa, via_mali;
  for (int iter = 0; iter < 100; ++iter) {
    const int n = 5 + static_cast<int>(uniform_below(rng, 36));
    const auto t = testhelp::random_tree(n, rng, "t" + std::to_string(iter));
    const auto m = scoring::oracle_score(t, {0.0, static_cast<std::uint64_t>(iter), 4.0});
    const TaxonomyGraph msa_graph(t.id(), t.concepts(), decode::msa(m).graph.edges());
    const TaxonomyGraph mali_graph(t.id(), t.concepts(), decode::mali(m, 0.5).edges());
    via_msa.push_back(eval::ancestral_prf(msa_graph, t));
    via_mali.push_back(eval::ancestral_prf(mali_graph, t));
  }
  for (const auto* list : {&via_msa, &via_mali}) {
    const auto macro = eval::macro_average(*list);
    if (macro.precision != 1.0 || macro.recall != 1.0 || macro.f1 != 1.0) {
      std::ostringstream os;
      os << "macro (" << macro.precision << ", " << macro.recall << ", " << macro.f1
         << ") != (1, 1, 1)";
      detail = os.str();
      return false;
    }
  }
  detail = "100 trees recovered exactly by msa and mali";
  return true;
}

bool majority_rule_is_exact(std::string& detail) {
  for (int n = 1; n <= 6; ++n) {
    for (int count = 0; count <= n; ++count) {
      decode::AggregatedRelationCounts agg;
      agg.taxonomy_id = "t";
      agg.n_runs = n;
      agg.concepts = {{"a", "a"}, {"b", "b"}};
      if (count > 0) agg.counts[{"a", "b"}] = count;
      const bool included = decode::majority_vote(agg).edge_count() == 1;
      const bool expected = count >= (n + 1) / 2;
      if (included != expected) {
        detail = "N=" + std::to_string(n) + " count=" + std::to_string(count) +
                 ": included=" + std::to_string(included);
        return false;
      }
    }
  }
  detail = "all N in 1..6, all counts, including N=5 count=3";
  return true;
}

bool metrics_match_oracle(std::string& detail) {
  // the worked example first
  const auto concepts = testhelp::make_concepts(3);
  const TaxonomyGraph chain("t", concepts, {{"c000", "c001"}, {"c001", "c002"}});
  const TaxonomyGraph fan("t", concepts, {{"c000", "c001"}, {"c000", "c002"}});
  const auto ex = eval::ancestral_prf(chain, fan);
  if (ex.precision != 2.0 / 3.0 || ex.recall != 1.0 || std::abs(ex.f1 - 0.8) > 1e-12) {
    std::ostringstream os;
    os << "chain-vs-fan gave (" << ex.precision << ", " << ex.recall << ", " << ex.f1 << ")";
    detail = os.str();
    return false;
  }

  Rng rng(2005);
  for (int iter = 0; iter < 500; ++iter) {
    const int n = 2 + static_cast<int>(uniform_below(rng, 19));
    const auto truth = testhelp::random_tree(n, rng);
    const auto predicted = iter % 2 == 0 ? testhelp::random_tree(n, rng)
                                         : testhelp::random_digraph(n, 0.2, rng);
    const auto got = eval::ancestral_prf(predicted, truth);

    std::set<std::pair<std::string, std::string>> p, t;
    for (const Edge& e : testhelp::closure_oracle(predicted)) p.insert({e.parent, e.child});
    for (const Edge& e : testhelp::closure_oracle(truth)) t.insert({e.parent, e.child});
    std::size_t common = 0;
    for (const auto& pair : p) common += t.count(pair);
    const double precision = p.empty() ? 0.0 : static_cast<double>(common) / p.size();
    const double recall = t.empty() ? 0.0 : static_cast<double>(common) / t.size();
    const double f1 = precision + recall > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    if (std::abs(got.precision - precision) > 1e-12 || std::abs(got.recall - recall) > 1e-12 ||
        std::abs(got.f1 - f1) > 1e-12) {
      detail = "oracle disagreement at iteration " + std::to_string(iter);
      return false;
    }
  }
  detail = "chain-vs-fan exact, 500 random pairs within 1e-12";
  return true;
}

bool preprocessing_semantics_hold(std::string& detail) {
  // 80-term fixture: root with branches of 40 and 39
  std::vector<Concept> cs{{"root", "root"}};
  std::vector<Edge> es;
  for (const std::string prefix : {std::string("lf"), std::string("rt")}) {
    const int size = prefix == "lf" ? 40 : 39;
    for (int i = 0; i < size; ++i) cs.push_back({prefix + std::to_string(i), prefix + std::to_string(i)});
    es.push_back({"root", prefix + "0"});
    for (int i = 1; i < size; ++i) {
      es.push_back({prefix + std::to_string(i / 2), prefix + std::to_string(i)});
    }
  }
  dataset::RawTaxonomySet raw;
  raw.taxonomies.push_back(TaxonomyGraph("big", cs, es));
  const auto split = dataset::split_large_taxonomies(raw, 70);
  if (split.taxonomies.size() != 2) {
    detail = "split produced " + std::to_string(split.taxonomies.size()) + " taxonomies";
    return false;
  }
  std::multiset<Edge> expect, got;
  for (const Edge& e : es) {
    if (e.parent != "root") expect.insert(e);
  }
  for (const TaxonomyGraph& t : split.taxonomies) {
    for (const Edge& e : t.edges()) {
      if (!t.has_concept(e.parent) || !t.has_concept(e.child)) {
        detail = "edge crosses sub-taxonomies";
        return false;
      }
      got.insert(e);
    }
  }
  if (got != expect) {
    detail = "split edge multiset differs from input minus root edges";
    return false;
  }

  // dedup fixture: shared relation, a fewest-term host, a fully duplicated taxonomy
  const TaxonomyGraph small("t1", {{"a1", "x"}, {"a2", "y"}, {"a3", "z"}},
                            {{"a1", "a2"}, {"a1", "a3"}});
  const TaxonomyGraph large("t2", {{"b1", "x"}, {"b2", "y"}, {"b4", "w"}, {"b5", "v"}},
                            {{"b1", "b2"}, {"b1", "b4"}, {"b4", "b5"}});
  const TaxonomyGraph copy("t3", {{"c1", "x"}, {"c2", "y"}}, {{"c1", "c2"}});
  dataset::RawTaxonomySet three;
  three.taxonomies = {small, large, copy};
  dataset::DedupStats stats;
  const auto deduped = dataset::remove_duplicates(three, &stats);

  const bool structure_ok =
      deduped.taxonomies.size() == 2 && deduped.taxonomies[0].id() == "t1" &&
      deduped.taxonomies[0].edges() == small.edges() &&
      deduped.taxonomies[1].id() == "t2" &&
      deduped.taxonomies[1].edges() == std::vector<Edge>{{"b1", "b4"}, {"b4", "b5"}} &&
      stats.dropped_taxonomies == std::vector<std::string>{"t3"};
  if (!structure_ok) {
    detail = "dedup structure differs from the crafted expectation";
    return false;
  }
  detail = "split severs at the root, dedup keeps the fewest-term host";
  return true;
}

bool real_data_counts(std::string& detail, bool& skipped) {
  const char* ccs = std::getenv("TAXOKIT_CCS_OWL");
  const char* wordnet = std::getenv("TAXOKIT_WORDNET_DIR");
  if (!ccs && !wordnet) {
    skipped = true;
    detail = "set TAXOKIT_CCS_OWL and/or TAXOKIT_WORDNET_DIR to check real-data counts";
    return true;
  }
  std::ostringstream os;
  if (ccs) {
    const auto raw = dataset::parse_ccs_owl(ccs);
    const auto split = dataset::split_large_taxonomies(raw, 70);
    dataset::DedupStats stats;
    dataset::remove_duplicates(split, &stats);
    os << "ccs: " << split.taxonomies.size() << " sub-taxonomies, "
       << stats.duplicate_relations << " duplicate relations";
    if (split.taxonomies.size() != 75 || stats.duplicate_relations != 144) {
      detail = os.str() + " (wanted 75 and 144)";
      return false;
    }
  }
  if (wordnet) {
    const auto raw = dataset::load_wordnet(wordnet);
    std::set<std::string> names;
    std::size_t pairs = 0;
    for (const TaxonomyGraph& t : raw.taxonomies) {
      for (const Concept& c : t.concepts()) names.insert(c.name);
      pairs += t.edge_count();
    }
    if (ccs) os << "; ";
    os << "wordnet: " << raw.taxonomies.size() << " taxonomies, " << names.size()
       << " unique terms, " << pairs << " pairs";
    if (raw.taxonomies.size() != 761 || names.size() != 14477 || pairs != 14877) {
      detail = os.str() + " (wanted 761, 14477, 14877)";
      return false;
    }
  }
  detail = os.str();
  return true;
}

bool prompt_pipeline_is_reproducible(std::string& detail) {
  TempDir dir("acceptance_prompt");
  Rng rng(2008);
  std::vector<TaxonomyGraph> targets;
  for (int i = 0; i < 3; ++i) {
    targets.push_back(testhelp::random_tree(6, rng, "target" + std::to_string(i)));
  }
  std::vector<TaxonomyGraph> pool;
  for (int i = 0; i < 4; ++i) {
    pool.push_back(testhelp::random_tree(4, rng, "pool" + std::to_string(i)));
  }
  const auto targets_path = dir.path / "targets.jsonl";
  const auto pool_path = dir.path / "pool.jsonl";
  io::write_taxonomies(targets_path, targets);
  io::write_taxonomies(pool_path, pool);

  // recorded responses: the truth plus stray lines the parser must ignore
  const auto replay = dir.path / "replay";
  for (const TaxonomyGraph& t : targets) {
    for (int run = 0; run < 3; ++run) {
      std::string text = "Sure, here is the taxonomy:\n";
      for (const Edge& e : t.edges()) {
        text += t.find_concept(e.parent)->name + " -> " + t.find_concept(e.child)->name +
                "\n";
      }
      text += "unknown thing -> " + t.concepts()[0].name + "\n";
      const auto path = prompting::replay_path(replay, t.id(), run);
      std::filesystem::create_directories(path.parent_path());
      io::write_text_atomic(path, text);
    }
  }

  const auto run_once = [&](const std::string& tag, std::string& gens_bytes,
                            std::string& mv_bytes) -> bool {
    const auto gens = dir.path / ("gens_" + tag + ".jsonl");
    const auto mv = dir.path / ("mv_" + tag + ".jsonl");
    if (run_tool("prompt-run --taxonomies " + targets_path.string() + " --train " +
                     pool_path.string() + " --out " + gens.string() + " --replay-dir " +
                     replay.string() + " --k-examples 2 --n-runs 3 --seed 17",
                 dir.path / ("prompt_" + tag + ".log")) != 0) {
      return false;
    }
    if (run_tool("construct --method mv --taxonomies " + targets_path.string() +
                     " --generations " + gens.string() + " --out " + mv.string(),
                 dir.path / ("mv_" + tag + ".log")) != 0) {
      return false;
    }
    gens_bytes = io::read_text(gens);
    mv_bytes = io::read_text(mv);
    return true;
  };

  std::string gens_a, mv_a, gens_b, mv_b;
  if (!run_once("a", gens_a, mv_a) || !run_once("b", gens_b, mv_b)) {
    detail = "pipeline run failed; see logs in " + dir.path.string();
    return false;
  }
  if (gens_a != gens_b || mv_a != mv_b) {
    detail = "two identical invocations produced different bytes";
    return false;
  }

  // the voted result over truthful responses is the truth itself
  const auto voted = io::read_taxonomies(dir.path / "mv_a.jsonl");
  if (voted.size() != targets.size()) {
    detail = "vote lost taxonomies";
    return false;
  }
  for (std::size_t i = 0; i < voted.size(); ++i) {
    if (voted[i].edges() != targets[i].edges()) {
      detail = "vote over truthful responses altered the edges";
      return false;
    }
  }

  // fuzz: the parser must never emit out-of-vocabulary relations
  const std::vector<std::string> known{"alpha", "beta", "gamma", "delta five"};
  const std::set<std::string> vocab(known.begin(), known.end());
  const std::vector<std::string> tokens{
      "alpha", "beta", "gamma", "delta five", "zeta", "->", "-", ">", "", " ",
      "ALPHA", "alpha beta", "\t", "x -> y", "alpha ->", "-> beta"};
  Rng fuzz(2088);
  for (int iter = 0; iter < 10000; ++iter) {
    std::string raw;
    const int lines = static_cast<int>(uniform_below(fuzz, 7));
    for (int l = 0; l < lines; ++l) {
      const int parts = 1 + static_cast<int>(uniform_below(fuzz, 5));
      for (int p = 0; p < parts; ++p) {
        raw += tokens[uniform_below(fuzz, tokens.size())];
        if (uniform_unit(fuzz) < 0.5) raw += " ";
      }
      raw += "\n";
    }
    for (const auto& [p, c] : prompting::parse_relations(raw, known).parsed) {
      if (!vocab.count(p) || !vocab.count(c) || p == c) {
        detail = "parser emitted an out-of-vocabulary relation";
        return false;
      }
    }
  }
  detail = "byte-identical reruns, truthful vote, 10000 fuzzed responses stayed in vocabulary";
  return true;
}

bool negative_sampling_is_sound(std::string& detail) {
  Rng rng(2009);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = 6 + static_cast<int>(uniform_below(rng, 15));
    const auto t = testhelp::random_tree(n, rng, "t" + std::to_string(iter));
    const auto examples = scoring::generate_training_set(t, 1, 77);

    std::set<std::pair<std::string, std::string>> descends;
    for (const Edge& e : testhelp::closure_oracle(t)) descends.insert({e.parent, e.child});
    std::map<std::string, std::string> id_by_name;
    for (const Concept& c : t.concepts()) id_by_name[c.name] = c.id;

    const std::string prefix = "I am doing the taxonomy research. I think ";
    const std::string mid = " is a subtopic of ";
    std::size_t positives = 0;
    for (const auto& ex : examples) {
      const auto m = ex.text.find(mid, prefix.size());
      const std::string child = ex.text.substr(prefix.size(), m - prefix.size());
      const std::string parent = ex.text.substr(m + mid.size());
      if (ex.label) {
        ++positives;
        continue;
      }
      if (descends.count({id_by_name.at(parent), id_by_name.at(child)})) {
        detail = "negative pair is an ancestral relation (iteration " +
                 std::to_string(iter) + ")";
        return false;
      }
    }
    if (positives != t.edge_count()) {
      detail = "positive count " + std::to_string(positives) + " != edge count " +
               std::to_string(t.edge_count());
      return false;
    }
  }
  detail = "200 trees, no descendant leaked into the negatives";
  return true;
}

bool noise_sweep_is_sane(std::string& detail) {
  Rng rng(2010);
  std::vector<TaxonomyGraph> trees;
  for (int i = 0; i < 50; ++i) {
    trees.push_back(testhelp::random_tree(5 + static_cast<int>(uniform_below(rng, 21)), rng,
                                          "t" + std::to_string(i)));
  }
  const double noises[3] = {0.0, 0.1, 0.3};
  double means[3] = {0.0, 0.0, 0.0};
  for (int level = 0; level < 3; ++level) {
    double sum = 0.0;
    int count = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::vector<eval::AncestralMetrics> per_tree;
      for (const TaxonomyGraph& t : trees) {
        const auto m = scoring::oracle_score(t, {noises[level], seed, 4.0});
        const TaxonomyGraph decoded(t.id(), t.concepts(), decode::msa(m).graph.edges());
        per_tree.push_back(eval::ancestral_prf(decoded, t));
      }
      sum += eval::macro_average(per_tree).f1;
      ++count;
    }
    means[level] = sum / count;
  }
  std::ostringstream os;
  os << "mean F1 by noise: " << means[0] << ", " << means[1] << ", " << means[2];
  detail = os.str();
  if (means[0] != 1.0) {
    detail += " (noise-free sweep must be exact)";
    return false;
  }
  return means[0] >= means[1] && means[1] >= means[2];
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    std::function<bool(std::string&, bool&)> check;
  };
  const auto plain = [](bool (*fn)(std::string&)) {
    return [fn](std::string& detail, bool&) { return fn(detail); };
  };

  const std::vector<Criterion> criteria = {
      {1, "arborescence decoder matches brute force", plain(edmonds_matches_brute_force)},
      {2, "decoder output is always consistent", plain(msa_always_consistent)},
      {3, "noise-free oracle recovery is exact", plain(oracle_recovery_is_exact)},
      {4, "majority rule includes at ceil(n/2)", plain(majority_rule_is_exact)},
      {5, "ancestral metrics match the closure oracle", plain(metrics_match_oracle)},
      {6, "preprocessing splits and dedups structurally", plain(preprocessing_semantics_hold)},
      {7, "real-data counts", real_data_counts},
      {8, "prompt pipeline reproducibility and parser safety",
       plain(prompt_pipeline_is_reproducible)},
      {9, "negative sampling avoids descendants", plain(negative_sampling_is_sound)},
      {10, "decoded quality degrades monotonically with noise", plain(noise_sweep_is_sane)},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    std::string detail;
    bool skipped = false;
    bool ok = false;
    try {
      ok = c.check(detail, skipped);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    const char* verdict = skipped ? "SKIP" : ok ? "PASS" : "FAIL";
    if (!ok && !skipped) ++failures;
    std::printf("%s %2d %s%s%s\n", verdict, c.number, c.name, detail.empty() ? "" : ": ",
                detail.c_str());
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
  } else {
    std::printf("all criteria passed\n");
  }
  return failures;
}
