#include "taxokit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "taxokit/dataset.hpp"
#include "taxokit/decode.hpp"
#include "taxokit/eval.hpp"
#include "taxokit/prompting.hpp"
#include "taxokit/scoring.hpp"
#include "taxokit/taxonomy_io.hpp"

namespace taxokit::cli {

namespace {

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json doc;
  in >> doc;
  if (!doc.is_object()) throw std::runtime_error("config file must hold a JSON object");
  return doc;
}

// flags beat config values beat built-in defaults
template <typename T>
void config_fallback(const CLI::Option* opt, const nlohmann::json& cfg, const char* key,
                     T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

prompting::ChatEndpointConfig endpoint_from(const nlohmann::json& cfg) {
  prompting::ChatEndpointConfig out;
  if (!cfg.contains("endpoint")) return out;
  const nlohmann::json& e = cfg.at("endpoint");
  if (e.contains("base_url")) out.base_url = e.at("base_url").get<std::string>();
  if (e.contains("model_id")) out.model_id = e.at("model_id").get<std::string>();
  if (e.contains("temperature")) out.temperature = e.at("temperature").get<double>();
  if (e.contains("max_tokens")) out.max_tokens = e.at("max_tokens").get<int>();
  if (e.contains("api_key_env")) out.api_key_env = e.at("api_key_env").get<std::string>();
  if (e.contains("timeout_ms")) {
    out.timeout = std::chrono::milliseconds(e.at("timeout_ms").get<long long>());
  }
  if (e.contains("max_retries")) out.max_retries = e.at("max_retries").get<int>();
  if (e.contains("backoff_ms")) {
    out.backoff_base = std::chrono::milliseconds(e.at("backoff_ms").get<long long>());
  }
  return out;
}

std::vector<TaxonomyGraph> read_taxonomy_set(const std::filesystem::path& path) {
  std::vector<TaxonomyGraph> list = io::read_taxonomies(path);
  std::sort(list.begin(), list.end(),
            [](const TaxonomyGraph& a, const TaxonomyGraph& b) { return a.id() < b.id(); });
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (list[i - 1].id() == list[i].id()) {
      throw std::runtime_error(path.string() + ": duplicate taxonomy id '" + list[i].id() +
                               "'");
    }
  }
  return list;
}

void write_text_report(const std::filesystem::path& path, const eval::EvaluationReport& rep) {
  std::ostringstream buf;
  eval::write_report_text(buf, rep);
  io::write_text_atomic(path, buf.str());
}

// ---- preprocess ----------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string format = "ccs";
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t max_terms = 70;
  std::string dedup_key = "name";
  double train_ratio = 0.7;
  double val_ratio = 0.15;
  double test_ratio = 0.15;
};

int cmd_preprocess(const PreprocessArgs& args) {
  dataset::RawTaxonomySet raw;
  if (args.format == "ccs") {
    raw = dataset::parse_ccs_owl(args.input);
  } else {
    raw = dataset::load_wordnet(args.input);
  }
  std::cout << "parsed " << raw.taxonomies.size() << " taxonomies from " << args.input
            << "\n";

  if (args.format == "ccs") {
    raw = dataset::split_large_taxonomies(raw, args.max_terms);
    std::cout << "after taxonomy split (max " << args.max_terms << " terms): "
              << raw.taxonomies.size() << " taxonomies\n";
    dataset::DedupStats stats;
    raw = dataset::remove_duplicates(raw, &stats, {args.dedup_key == "name"});
    std::cout << "duplicate relations: " << stats.duplicate_relations << " distinct, "
              << stats.instances_removed << " copies removed, "
              << stats.dropped_taxonomies.size() << " taxonomies dropped, "
              << stats.concepts_pruned << " concepts pruned\n";
    for (const std::string& id : stats.dropped_taxonomies) {
      std::cout << "  dropped: " << id << "\n";
    }
  } else {
    std::set<std::string> names;
    std::size_t pairs = 0;
    for (const TaxonomyGraph& t : raw.taxonomies) {
      for (const Concept& c : t.concepts()) names.insert(c.name);
      pairs += t.edge_count();
    }
    std::cout << "unique terms: " << names.size() << ", positive pairs: " << pairs << "\n";
  }

  const dataset::SplitRatios ratios{args.train_ratio, args.val_ratio, args.test_ratio};
  const dataset::DatasetSplit split = dataset::split_dataset(raw, ratios, args.seed);

  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  io::write_taxonomies(dir / "train.jsonl", split.train);
  io::write_taxonomies(dir / "validation.jsonl", split.validation);
  io::write_taxonomies(dir / "test.jsonl", split.test);
  dataset::write_manifest(dir / "manifest.json", split);
  std::cout << "split (seed " << args.seed << "): train " << split.train.size()
            << ", validation " << split.validation.size() << ", test " << split.test.size()
            << "\nwrote " << (dir / "manifest.json").string() << "\n";
  return 0;
}

// ---- gen-train -----------------------------------------------------------

struct GenTrainArgs {
  std::string input;
  std::string out;
  int negatives_per_positive = 1;
  std::uint64_t seed = 0;
};

int cmd_gen_train(const GenTrainArgs& args) {
  const std::vector<TaxonomyGraph> taxonomies = read_taxonomy_set(args.input);
  std::vector<scoring::TrainingExample> all;
  for (const TaxonomyGraph& t : taxonomies) {
    const auto examples =
        scoring::generate_training_set(t, args.negatives_per_positive, args.seed);
    all.insert(all.end(), examples.begin(), examples.end());
  }
  scoring::write_training_set(args.out, all);
  std::size_t positives = 0;
  for (const auto& ex : all) positives += ex.label ? 1 : 0;
  std::cout << "wrote " << all.size() << " examples (" << positives << " positive, "
            << (all.size() - positives) << " negative) to " << args.out << "\n";
  return 0;
}

// ---- ingest-scores -------------------------------------------------------

struct IngestArgs {
  std::string scores;
  std::string taxonomies;
  std::string out;
};

int cmd_ingest_scores(const IngestArgs& args) {
  const std::vector<TaxonomyGraph> reference = read_taxonomy_set(args.taxonomies);
  const std::vector<scoring::PairwiseScoreMatrix> matrices =
      scoring::ingest_scores(args.scores, reference);
  std::size_t pairs = 0;
  for (const auto& m : matrices) pairs += m.size() * (m.size() - 1);
  std::cout << "validated " << matrices.size() << " score matrices (" << pairs
            << " pairs)\n";
  if (!args.out.empty()) {
    scoring::write_scores(std::filesystem::path(args.out), matrices);
    std::cout << "wrote normalized scores to " << args.out << "\n";
  }
  return 0;
}

// ---- prompt-run ----------------------------------------------------------

struct PromptRunArgs {
  std::string taxonomies;
  std::string train;
  std::string out;
  std::string replay_dir;
  std::string record_dir;
  bool live = false;
  bool case_insensitive = false;
  int k_examples = 3;
  int n_runs = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  nlohmann::json config;
};

int cmd_prompt_run(const PromptRunArgs& args) {
  if (args.replay_dir.empty() && !args.live) {
    throw std::runtime_error(
        "choose a generation source: --replay-dir for recorded responses or --live for the "
        "HTTP endpoint");
  }
  const std::vector<TaxonomyGraph> targets = read_taxonomy_set(args.taxonomies);
  const std::vector<TaxonomyGraph> pool = read_taxonomy_set(args.train);

  std::unique_ptr<prompting::GenerationSource> base;
  if (!args.replay_dir.empty()) {
    base = std::make_unique<prompting::ReplaySource>(args.replay_dir);
  } else {
    base = std::make_unique<prompting::HttpChatClient>(endpoint_from(args.config));
  }
  std::unique_ptr<prompting::RecordingSource> recorder;
  prompting::GenerationSource* source = base.get();
  if (!args.record_dir.empty()) {
    recorder = std::make_unique<prompting::RecordingSource>(*base, args.record_dir);
    source = recorder.get();
  }

  prompting::RunOptions opt;
  opt.k_examples = args.k_examples;
  opt.n_runs = args.n_runs;
  opt.seed = args.seed;
  opt.jobs = args.jobs;
  opt.parse.case_insensitive = args.case_insensitive;
  if (args.config.contains("instruction")) {
    opt.instruction = args.config.at("instruction").get<std::string>();
  }

  std::vector<GenerationRun> all;
  for (const TaxonomyGraph& target : targets) {
    const auto runs = prompting::run_generations(target, pool, opt, *source);
    all.insert(all.end(), runs.begin(), runs.end());
  }
  io::write_generations(args.out, all);

  std::size_t failed = 0, empty = 0;
  for (const GenerationRun& run : all) {
    if (run.failed) {
      ++failed;
    } else if (run.parsed.empty()) {
      ++empty;
    }
  }
  std::cout << "wrote " << all.size() << " runs for " << targets.size() << " taxonomies to "
            << args.out << " (" << failed << " failed, " << empty << " parsed empty)\n";
  if (failed > 0) {
    std::cerr << "error: " << failed << " generation runs failed\n";
    return 1;
  }
  return 0;
}

// ---- construct -----------------------------------------------------------

struct ConstructArgs {
  std::string method;
  std::string taxonomies;
  std::string out;
  bool oracle = false;
  std::string scores;
  std::string generations;
  std::string dump_scores;
  double noise = 0.0;
  double sharpness = 4.0;
  double threshold = 0.5;
  double epsilon = 1e-9;
  std::uint64_t seed = 0;
  int jobs = 0;
  bool serial = false;
};

int cmd_construct(const ConstructArgs& args) {
  const std::vector<TaxonomyGraph> reference = read_taxonomy_set(args.taxonomies);
  std::map<std::string, const TaxonomyGraph*> ref_by_id;
  for (const TaxonomyGraph& t : reference) ref_by_id.emplace(t.id(), &t);

  std::vector<TaxonomyGraph> predicted;

  if (args.method == "mali" || args.method == "msa") {
    if (args.oracle == !args.scores.empty()) {
      throw std::runtime_error("methods mali/msa need exactly one score source: --oracle or "
                               "--scores FILE");
    }
    std::vector<scoring::PairwiseScoreMatrix> matrices;
    if (args.oracle) {
      for (const TaxonomyGraph& t : reference) {
        matrices.push_back(scoring::oracle_score(t, {args.noise, args.seed, args.sharpness}));
      }
    } else {
      matrices = scoring::ingest_scores(args.scores, reference);
      std::set<std::string> have;
      for (const auto& m : matrices) have.insert(m.taxonomy_id());
      for (const TaxonomyGraph& t : reference) {
        if (!have.count(t.id())) {
          throw std::runtime_error("score file has no entries for taxonomy '" + t.id() + "'");
        }
      }
    }
    if (!args.dump_scores.empty()) {
      scoring::write_scores(std::filesystem::path(args.dump_scores), matrices);
    }

    const decode::MsaOptions opt{args.epsilon, args.jobs};
    for (const scoring::PairwiseScoreMatrix& m : matrices) {
      TaxonomyGraph decoded = args.method == "mali"
                                  ? decode::mali(m, args.threshold)
                                  : (args.serial ? decode::msa_serial(m, opt)
                                                 : decode::msa(m, opt))
                                        .graph;
      // decoders know ids only; restore display names from the reference
      const TaxonomyGraph& ref = *ref_by_id.at(m.taxonomy_id());
      predicted.emplace_back(ref.id(), ref.concepts(), decoded.edges());
    }
  } else if (args.method == "mv") {
    if (args.generations.empty()) {
      throw std::runtime_error("method mv needs --generations FILE");
    }
    const std::vector<GenerationRun> runs = io::read_generations(args.generations);
    std::map<std::string, std::vector<GenerationRun>> by_tax;
    std::size_t failed = 0;
    for (const GenerationRun& run : runs) {
      if (run.failed) ++failed;
      by_tax[run.taxonomy_id].push_back(run);
    }
    if (failed > 0) {
      std::cout << failed << " failed runs vote with empty relation sets\n";
    }
    for (const auto& [tax_id, group] : by_tax) {
      const auto ref_it = ref_by_id.find(tax_id);
      if (ref_it == ref_by_id.end()) {
        throw std::runtime_error("generations reference unknown taxonomy '" + tax_id + "'");
      }
      const TaxonomyGraph& ref = *ref_it->second;
      const TaxonomyGraph voted = decode::majority_vote(decode::aggregate(group));

      // votes happen in name space; translate back to the reference's ids
      std::map<std::string, std::string> id_by_name;
      for (const Concept& c : ref.concepts()) {
        if (!id_by_name.emplace(c.name, c.id).second) {
          throw std::runtime_error("taxonomy '" + tax_id +
                                   "': duplicate concept name '" + c.name +
                                   "' prevents vote translation");
        }
      }
      std::vector<Edge> edges;
      for (const Edge& e : voted.edges()) {
        const auto p = id_by_name.find(e.parent);
        const auto c = id_by_name.find(e.child);
        if (p == id_by_name.end() || c == id_by_name.end()) {
          throw std::runtime_error("taxonomy '" + tax_id + "': voted relation (" + e.parent +
                                   ", " + e.child + ") names no reference concept");
        }
        edges.push_back({p->second, c->second});
      }
      predicted.emplace_back(ref.id(), ref.concepts(), std::move(edges));
    }
  } else {
    throw std::runtime_error("unknown method '" + args.method + "'");
  }

  io::write_taxonomies(args.out, predicted);
  std::size_t edge_total = 0;
  for (const TaxonomyGraph& t : predicted) edge_total += t.edge_count();
  std::cout << "wrote " << predicted.size() << " predicted taxonomies (" << edge_total
            << " relations) to " << args.out << "\n";
  return 0;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string truth;
  std::string predicted;
  std::string runs_dir;
  bool individual_best = false;
  std::string report;
  std::string report_jsonl;
  int jobs = 0;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const std::vector<TaxonomyGraph> truth = read_taxonomy_set(args.truth);

  std::vector<TaxonomyGraph> predicted;
  if (args.individual_best) {
    if (args.runs_dir.empty()) {
      throw std::runtime_error("--individual-best needs --runs-dir");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(args.runs_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      throw std::runtime_error("no .jsonl run files under " + args.runs_dir);
    }
    std::vector<std::vector<TaxonomyGraph>> run_sets;
    for (const auto& f : files) run_sets.push_back(read_taxonomy_set(f));

    std::cout << "individual best over " << files.size() << " runs:\n";
    for (const TaxonomyGraph& t : truth) {
      std::vector<TaxonomyGraph> candidates;
      for (std::size_t r = 0; r < run_sets.size(); ++r) {
        const auto it = std::find_if(
            run_sets[r].begin(), run_sets[r].end(),
            [&](const TaxonomyGraph& g) { return g.id() == t.id(); });
        if (it == run_sets[r].end()) {
          throw std::runtime_error(files[r].string() + " has no prediction for taxonomy '" +
                                   t.id() + "'");
        }
        candidates.push_back(*it);
      }
      const auto [index, metrics] = eval::individual_best(candidates, t);
      std::cout << "  " << t.id() << ": " << files[index].filename().string() << " (f1 "
                << 100.0 * metrics.f1 << ")\n";
      predicted.push_back(candidates[index]);
    }
  } else {
    if (args.predicted.empty()) {
      throw std::runtime_error("need --predicted FILE (or --individual-best with --runs-dir)");
    }
    predicted = read_taxonomy_set(args.predicted);
  }

  const eval::EvaluationReport report = eval::evaluate_all(predicted, truth, args.jobs);
  eval::write_report_text(std::cout, report);
  if (!args.report.empty()) write_text_report(args.report, report);
  if (!args.report_jsonl.empty()) eval::write_report_jsonl(args.report_jsonl, report);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"taxonomy construction toolkit"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  CLI::App* pre_cmd = app.add_subcommand("preprocess",
                                         "parse a raw source, apply taxonomy split and "
                                         "duplicate removal, write dataset splits");
  pre_cmd->add_option("--input", pre.input, "source file (ccs) or directory (wordnet)")
      ->required();
  pre_cmd->add_option("--format", pre.format, "ccs | wordnet")
      ->check(CLI::IsMember({"ccs", "wordnet"}));
  pre_cmd->add_option("--out-dir", pre.out_dir, "output directory")->required();
  pre_cmd->add_option("--seed", pre.seed, "split shuffle seed");
  pre_cmd->add_option("--max-terms", pre.max_terms, "taxonomy split threshold");
  pre_cmd->add_option("--dedup-key", pre.dedup_key, "match duplicate relations by name | id")
      ->check(CLI::IsMember({"name", "id"}));
  pre_cmd->add_option("--train-ratio", pre.train_ratio, "train share");
  pre_cmd->add_option("--val-ratio", pre.val_ratio, "validation share");
  pre_cmd->add_option("--test-ratio", pre.test_ratio, "test share");

  GenTrainArgs gen;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-train", "export labeled pair sentences for fine-tuning");
  gen_cmd->add_option("--input", gen.input, "taxonomy file (canonical jsonl)")->required();
  gen_cmd->add_option("--out", gen.out, "training examples output file")->required();
  gen_cmd->add_option("--negatives-per-positive", gen.negatives_per_positive,
                      "negative examples per edge");
  gen_cmd->add_option("--seed", gen.seed, "negative sampling seed");

  IngestArgs ing;
  CLI::App* ing_cmd =
      app.add_subcommand("ingest-scores", "validate (and normalize) a score matrix file");
  ing_cmd->add_option("--scores", ing.scores, "score file (tsv)")->required();
  ing_cmd->add_option("--taxonomies", ing.taxonomies, "reference taxonomy file")->required();
  ing_cmd->add_option("--out", ing.out, "write normalized scores here");

  PromptRunArgs pr;
  std::string pr_config;
  CLI::App* pr_cmd = app.add_subcommand(
      "prompt-run", "generate candidate relations with a chat endpoint or recordings");
  pr_cmd->add_option("--taxonomies", pr.taxonomies, "target taxonomy file")->required();
  pr_cmd->add_option("--train", pr.train, "few-shot example pool (train split)")->required();
  pr_cmd->add_option("--out", pr.out, "generations output file")->required();
  pr_cmd->add_option("--replay-dir", pr.replay_dir, "read recorded responses from here");
  pr_cmd->add_flag("--live", pr.live, "call the configured HTTP endpoint");
  pr_cmd->add_option("--record-dir", pr.record_dir, "record responses here");
  pr_cmd->add_flag("--case-insensitive", pr.case_insensitive,
                   "match concept names ignoring case when parsing");
  const CLI::Option* pr_k = pr_cmd->add_option("--k-examples", pr.k_examples,
                                               "few-shot examples per prompt");
  const CLI::Option* pr_n = pr_cmd->add_option("--n-runs", pr.n_runs, "generations per taxonomy");
  const CLI::Option* pr_seed = pr_cmd->add_option("--seed", pr.seed, "sampling seed");
  const CLI::Option* pr_jobs = pr_cmd->add_option("--jobs", pr.jobs, "concurrent requests");
  pr_cmd->add_option("--config", pr_config, "JSON config (endpoint, instruction, defaults)");

  ConstructArgs con;
  std::string con_config;
  CLI::App* con_cmd =
      app.add_subcommand("construct", "decode predicted taxonomies from scores or generations");
  con_cmd->add_option("--method", con.method, "mali | msa | mv")
      ->required()
      ->check(CLI::IsMember({"mali", "msa", "mv"}));
  con_cmd->add_option("--taxonomies", con.taxonomies, "reference taxonomy file")->required();
  con_cmd->add_option("--out", con.out, "predicted taxonomy output file")->required();
  con_cmd->add_flag("--oracle", con.oracle, "score with the synthetic oracle");
  con_cmd->add_option("--scores", con.scores, "score file (tsv)");
  con_cmd->add_option("--generations", con.generations, "generations file (for mv)");
  con_cmd->add_option("--dump-scores", con.dump_scores, "write the scores used");
  const CLI::Option* con_noise = con_cmd->add_option("--noise", con.noise, "oracle noise");
  const CLI::Option* con_sharp =
      con_cmd->add_option("--sharpness", con.sharpness, "oracle score separation");
  const CLI::Option* con_thresh =
      con_cmd->add_option("--threshold", con.threshold, "mali inclusion threshold");
  const CLI::Option* con_eps = con_cmd->add_option("--epsilon", con.epsilon,
                                                   "probability clamp before log weights");
  const CLI::Option* con_seed = con_cmd->add_option("--seed", con.seed, "oracle seed");
  const CLI::Option* con_jobs = con_cmd->add_option("--jobs", con.jobs, "decoder threads");
  con_cmd->add_flag("--serial", con.serial, "use the single-threaded root sweep");
  con_cmd->add_option("--config", con_config, "JSON config with defaults");

  EvaluateArgs ev;
  CLI::App* ev_cmd =
      app.add_subcommand("evaluate", "score predictions against ground truth");
  ev_cmd->add_option("--truth", ev.truth, "ground-truth taxonomy file")->required();
  ev_cmd->add_option("--predicted", ev.predicted, "predicted taxonomy file");
  ev_cmd->add_option("--runs-dir", ev.runs_dir, "directory of per-run prediction files");
  ev_cmd->add_flag("--individual-best", ev.individual_best,
                   "pick the best run per taxonomy by F1");
  ev_cmd->add_option("--report", ev.report, "write the text report here");
  ev_cmd->add_option("--report-jsonl", ev.report_jsonl, "write the record-per-line report");
  ev_cmd->add_option("--jobs", ev.jobs, "scoring threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*pre_cmd) return cmd_preprocess(pre);
    if (*gen_cmd) return cmd_gen_train(gen);
    if (*ing_cmd) return cmd_ingest_scores(ing);
    if (*pr_cmd) {
      pr.config = load_config(pr_config);
      config_fallback(pr_k, pr.config, "k_examples", pr.k_examples);
      config_fallback(pr_n, pr.config, "n_runs", pr.n_runs);
      config_fallback(pr_seed, pr.config, "seed", pr.seed);
      config_fallback(pr_jobs, pr.config, "jobs", pr.jobs);
      return cmd_prompt_run(pr);
    }
    if (*con_cmd) {
      const nlohmann::json cfg = load_config(con_config);
      config_fallback(con_noise, cfg, "noise", con.noise);
      config_fallback(con_sharp, cfg, "sharpness", con.sharpness);
      config_fallback(con_thresh, cfg, "threshold", con.threshold);
      config_fallback(con_eps, cfg, "epsilon", con.epsilon);
      config_fallback(con_seed, cfg, "seed", con.seed);
      config_fallback(con_jobs, cfg, "jobs", con.jobs);
      return cmd_construct(con);
    }
    if (*ev_cmd) return cmd_evaluate(ev);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace taxokit::cli
