#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "helpers.hpp"
#include "taxokit/prompting.hpp"
#include "taxokit/taxonomy_io.hpp"

using namespace taxokit;
using testhelp::TempDir;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const auto out_path = dir.path / "stdout.txt";
  const auto err_path = dir.path / "stderr.txt";
  const std::string cmd = std::string(TAXOKIT_BIN) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = io::read_text(out_path);
  r.err = io::read_text(err_path);
  return r;
}

std::vector<TaxonomyGraph> three_trees() {
  Rng rng(7);
  std::vector<TaxonomyGraph> list;
  for (int i = 0; i < 3; ++i) {
    list.push_back(testhelp::random_tree(6, rng, "tax" + std::to_string(i)));
  }
  return list;
}

}  // namespace

TEST_CASE("preprocess splits, dedups, and writes the dataset") {
  TempDir dir("cli_pre");
  const auto out_dir = dir.path / "out";
  const auto r = run_cli(
      dir, std::string("preprocess --input ") + TAXOKIT_TEST_DATA +
               "/ccs_sample.xml --format ccs --out-dir " + out_dir.string() +
               " --max-terms 3 --seed 5 --train-ratio 0.34 --val-ratio 0.33"
               " --test-ratio 0.33");
  INFO(r.out, r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("after taxonomy split") != std::string::npos);

  std::set<std::string> ids;
  std::size_t total = 0;
  for (const char* name : {"train.jsonl", "validation.jsonl", "test.jsonl"}) {
    for (const TaxonomyGraph& t : io::read_taxonomies(out_dir / name)) {
      ids.insert(t.id());
      ++total;
    }
  }
  CHECK(total == 3);
  CHECK(ids.count("90001") == 1);
  CHECK(ids.count("10002944.10003033") == 1);
  CHECK(ids.count("10002944.10003039") == 1);

  const auto manifest = nlohmann::json::parse(io::read_text(out_dir / "manifest.json"));
  CHECK(manifest.at("seed") == 5);
}

TEST_CASE("preprocess reads the flat term-file layout") {
  TempDir dir("cli_wn");
  const auto src = dir.path / "wn";
  std::filesystem::create_directories(src);
  io::write_text_atomic(src / "a.terms", "x\ny\n");
  io::write_text_atomic(src / "a.rels", "x\ty\n");
  io::write_text_atomic(src / "b.terms", "p\nq\n");
  io::write_text_atomic(src / "b.rels", "p\tq\n");
  io::write_text_atomic(src / "c.terms", "y\nz\n");
  io::write_text_atomic(src / "c.rels", "y\tz\n");
  io::write_text_atomic(src / "d.terms", "k\nl\n");
  io::write_text_atomic(src / "d.rels", "k\tl\n");

  const auto out_dir = dir.path / "out";
  const auto r = run_cli(dir, "preprocess --input " + src.string() +
                                  " --format wordnet --out-dir " + out_dir.string() +
                                  " --train-ratio 0.5 --val-ratio 0.25 --test-ratio 0.25");
  INFO(r.out, r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("unique terms: 7") != std::string::npos);
  CHECK(r.out.find("positive pairs: 4") != std::string::npos);
  CHECK(io::read_taxonomies(out_dir / "train.jsonl").size() == 2);
}

TEST_CASE("gen-train writes labeled sentences") {
  TempDir dir("cli_gen");
  const auto input = dir.path / "trees.jsonl";
  io::write_taxonomies(input, three_trees());
  const auto out = dir.path / "pairs.jsonl";
  const auto r = run_cli(dir, "gen-train --input " + input.string() + " --out " +
                                  out.string() + " --negatives-per-positive 2 --seed 3");
  INFO(r.out, r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("15 positive") != std::string::npos);  // three 6-node trees
  CHECK(r.out.find("30 negative") != std::string::npos);

  std::size_t lines = 0;
  std::istringstream in(io::read_text(out));
  for (std::string line; std::getline(in, line);(void)0) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.contains("text"));
    CHECK((rec.at("label") == "true" || rec.at("label") == "false"));
    ++lines;
  }
  CHECK(lines == 45);
}

TEST_CASE("oracle scores decode back to the truth") {
  TempDir dir("cli_msa");
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, three_trees());
  const auto predicted = dir.path / "predicted.jsonl";
  const auto scores = dir.path / "scores.tsv";

  const auto construct = run_cli(
      dir, "construct --method msa --taxonomies " + truth.string() + " --out " +
               predicted.string() + " --oracle --noise 0 --seed 1 --dump-scores " +
               scores.string());
  INFO(construct.out, construct.err);
  REQUIRE(construct.status == 0);

  const auto report_path = dir.path / "report.tsv";
  const auto evaluate = run_cli(dir, "evaluate --truth " + truth.string() +
                                         " --predicted " + predicted.string() +
                                         " --report " + report_path.string());
  INFO(evaluate.out, evaluate.err);
  REQUIRE(evaluate.status == 0);
  CHECK(evaluate.out.find("f1\t100.00") != std::string::npos);
  CHECK(io::read_text(report_path).find("f1\t100.00") != std::string::npos);

  // the dumped scores replayed through mali give the same edges
  const auto ingest = run_cli(dir, "ingest-scores --scores " + scores.string() +
                                       " --taxonomies " + truth.string());
  INFO(ingest.out, ingest.err);
  CHECK(ingest.status == 0);

  const auto mali_out = dir.path / "mali.jsonl";
  const auto mali = run_cli(dir, "construct --method mali --taxonomies " + truth.string() +
                                     " --scores " + scores.string() + " --out " +
                                     mali_out.string());
  INFO(mali.out, mali.err);
  REQUIRE(mali.status == 0);
  const auto a = io::read_taxonomies(predicted);
  const auto b = io::read_taxonomies(mali_out);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].edges() == b[i].edges());
}

TEST_CASE("corrupt score files fail with a message") {
  TempDir dir("cli_bad");
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, three_trees());
  const auto scores = dir.path / "scores.tsv";
  io::write_text_atomic(scores, "tax0\tbroken\n");
  const auto r = run_cli(dir, "ingest-scores --scores " + scores.string() +
                                  " --taxonomies " + truth.string());
  CHECK(r.status == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(r.err.find("scores.tsv:1") != std::string::npos);
}

TEST_CASE("replayed generations feed majority voting") {
  TempDir dir("cli_mv");
  const auto trees = three_trees();
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, {trees[0]});
  const auto pool = dir.path / "pool.jsonl";
  io::write_taxonomies(pool, {trees[1], trees[2]});

  // recorded responses spell out the truth in display names
  const auto replay = dir.path / "replay";
  for (int run = 0; run < 3; ++run) {
    std::string text;
    for (const Edge& e : trees[0].edges()) {
      text += trees[0].find_concept(e.parent)->name + " -> " +
              trees[0].find_concept(e.child)->name + "\n";
    }
    const auto path = prompting::replay_path(replay, trees[0].id(), run);
    std::filesystem::create_directories(path.parent_path());
    io::write_text_atomic(path, text);
  }

  const auto gens = dir.path / "gens.jsonl";
  const auto prompt = run_cli(dir, "prompt-run --taxonomies " + truth.string() +
                                       " --train " + pool.string() + " --out " +
                                       gens.string() + " --replay-dir " + replay.string() +
                                       " --k-examples 2 --n-runs 3 --seed 4");
  INFO(prompt.out, prompt.err);
  REQUIRE(prompt.status == 0);
  CHECK(prompt.out.find("wrote 3 runs") != std::string::npos);
  CHECK(prompt.out.find("0 failed") != std::string::npos);

  const auto predicted = dir.path / "mv.jsonl";
  const auto construct = run_cli(dir, "construct --method mv --taxonomies " + truth.string() +
                                          " --generations " + gens.string() + " --out " +
                                          predicted.string());
  INFO(construct.out, construct.err);
  REQUIRE(construct.status == 0);

  const auto evaluate = run_cli(dir, "evaluate --truth " + truth.string() + " --predicted " +
                                         predicted.string());
  INFO(evaluate.out, evaluate.err);
  REQUIRE(evaluate.status == 0);
  CHECK(evaluate.out.find("f1\t100.00") != std::string::npos);
}

TEST_CASE("prompt-run without a source is refused") {
  TempDir dir("cli_nosrc");
  const auto trees = three_trees();
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, {trees[0]});
  const auto pool = dir.path / "pool.jsonl";
  io::write_taxonomies(pool, {trees[1], trees[2]});
  const auto r = run_cli(dir, "prompt-run --taxonomies " + truth.string() + " --train " +
                                  pool.string() + " --out " + (dir.path / "g.jsonl").string() +
                                  " --k-examples 1 --n-runs 1");
  CHECK(r.status == 1);
  CHECK(r.err.find("--replay-dir") != std::string::npos);
  CHECK(r.err.find("--live") != std::string::npos);
}

TEST_CASE("missing replay files surface as failed runs") {
  TempDir dir("cli_missing");
  const auto trees = three_trees();
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, {trees[0]});
  const auto pool = dir.path / "pool.jsonl";
  io::write_taxonomies(pool, {trees[1], trees[2]});
  const auto empty_replay = dir.path / "replay";
  std::filesystem::create_directories(empty_replay);
  const auto gens = dir.path / "g.jsonl";
  const auto r = run_cli(dir, "prompt-run --taxonomies " + truth.string() + " --train " +
                                  pool.string() + " --out " + gens.string() +
                                  " --replay-dir " + empty_replay.string() +
                                  " --k-examples 1 --n-runs 2");
  CHECK(r.status == 1);
  CHECK(r.err.find("2 generation runs failed") != std::string::npos);
  CHECK(io::read_generations(gens).size() == 2);  // still persisted for inspection
}

TEST_CASE("individual best picks the strongest run file") {
  TempDir dir("cli_best");
  const auto trees = three_trees();
  const auto truth_path = dir.path / "truth.jsonl";
  io::write_taxonomies(truth_path, {trees[0]});

  const auto runs = dir.path / "runs";
  std::filesystem::create_directories(runs);
  io::write_taxonomies(runs / "run_0.jsonl",
                       {TaxonomyGraph(trees[0].id(), trees[0].concepts(), {})});
  io::write_taxonomies(runs / "run_1.jsonl", {trees[0]});

  const auto r = run_cli(dir, "evaluate --truth " + truth_path.string() + " --runs-dir " +
                                  runs.string() + " --individual-best");
  INFO(r.out, r.err);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("run_1.jsonl") != std::string::npos);
  CHECK(r.out.find("f1\t100.00") != std::string::npos);
}

TEST_CASE("config files supply defaults that flags override") {
  TempDir dir("cli_cfg");
  const auto trees = three_trees();
  const auto truth = dir.path / "truth.jsonl";
  io::write_taxonomies(truth, {trees[0]});
  const auto pool = dir.path / "pool.jsonl";
  io::write_taxonomies(pool, {trees[1], trees[2]});

  const auto replay = dir.path / "replay";
  for (int run = 0; run < 4; ++run) {
    const auto path = prompting::replay_path(replay, trees[0].id(), run);
    std::filesystem::create_directories(path.parent_path());
    io::write_text_atomic(path, "nothing\n");
  }
  const auto config = dir.path / "config.json";
  io::write_text_atomic(config, "{\"n_runs\": 4, \"k_examples\": 1}\n");

  const auto gens = dir.path / "g.jsonl";
  const std::string base = "prompt-run --taxonomies " + truth.string() + " --train " +
                           pool.string() + " --out " + gens.string() + " --replay-dir " +
                           replay.string() + " --config " + config.string();
  const auto from_config = run_cli(dir, base);
  INFO(from_config.out, from_config.err);
  REQUIRE(from_config.status == 0);
  CHECK(from_config.out.find("wrote 4 runs") != std::string::npos);

  const auto flag_wins = run_cli(dir, base + " --n-runs 2");
  INFO(flag_wins.out, flag_wins.err);
  REQUIRE(flag_wins.status == 0);
  CHECK(flag_wins.out.find("wrote 2 runs") != std::string::npos);
}

TEST_CASE("unknown flags and subcommands exit nonzero") {
  TempDir dir("cli_usage");
  CHECK(run_cli(dir, "frobnicate").status != 0);
  CHECK(run_cli(dir, "evaluate --no-such-flag").status != 0);
  CHECK(run_cli(dir, "construct --method nope --taxonomies x --out y").status != 0);
}
