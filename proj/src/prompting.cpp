#include "taxokit/prompting.hpp"

#include <atomic>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "taxokit/rng.hpp"
#include "taxokit/taxonomy_io.hpp"
#include "taxokit/util.hpp"

namespace taxokit::prompting {

std::string default_instruction() {
  return "Task: build a taxonomy over the given concepts. Output every direct "
         "parent-child relation among them, one per line, formatted exactly as: "
         "parent -> child. Use only the listed concepts, spelled exactly as they "
         "appear. Output relations only, nothing else.";
}

namespace {

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string build_prompt(const PromptSpec& spec) {
  if (spec.input_concepts.empty()) {
    throw std::invalid_argument("prompt requires at least one input concept");
  }
  for (const FewShotExample& ex : spec.examples) {
    const std::set<std::string> names(ex.concepts.begin(), ex.concepts.end());
    for (const auto& [parent, child] : ex.relations) {
      if (!names.count(parent) || !names.count(child)) {
        throw std::invalid_argument("example relation (" + parent + ", " + child +
                                    ") references a concept outside the example list");
      }
    }
  }

  Rng rng(spec.shuffle_seed);
  std::ostringstream out;
  out << spec.instruction << '\n';
  for (const FewShotExample& ex : spec.examples) {
    std::vector<std::string> concepts = ex.concepts;
    std::vector<std::pair<std::string, std::string>> relations = ex.relations;
    shuffle_vec(concepts, rng);
    shuffle_vec(relations, rng);
    out << "\nConcepts: " << join(concepts, ", ") << "\nRelations:\n";
    for (const auto& [parent, child] : relations) {
      out << parent << " -> " << child << '\n';
    }
  }
  std::vector<std::string> inputs = spec.input_concepts;
  shuffle_vec(inputs, rng);
  out << "\nConcepts: " << join(inputs, ", ") << "\nRelations:\n";
  return out.str();
}

ParsedRelations parse_relations(const std::string& raw, const std::vector<std::string>& known,
                                const ParseOptions& opts) {
  const std::unordered_set<std::string> exact(known.begin(), known.end());
  std::unordered_map<std::string, std::vector<const std::string*>> by_lower;
  if (opts.case_insensitive) {
    for (const std::string& name : known) by_lower[lowercase(name)].push_back(&name);
  }
  const auto resolve = [&](const std::string& s) -> const std::string* {
    auto hit = exact.find(s);
    if (hit != exact.end()) return &*hit;
    if (opts.case_insensitive) {
      auto it = by_lower.find(lowercase(s));
      // ambiguous casings stay unresolved rather than guessing
      if (it != by_lower.end() && it->second.size() == 1) return it->second.front();
    }
    return nullptr;
  };

  ParsedRelations out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const std::string& line : split_lines(raw)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto pos = t.find("->");
    if (pos == std::string::npos) {
      out.dropped.push_back(t);
      continue;
    }
    const std::string* parent = resolve(trim(t.substr(0, pos)));
    const std::string* child = resolve(trim(t.substr(pos + 2)));
    if (!parent || !child || *parent == *child) {
      out.dropped.push_back(t);
      continue;
    }
    if (seen.emplace(*parent, *child).second) {
      out.parsed.emplace_back(*parent, *child);
    } else {
      out.dropped.push_back(t);  // repeats count once
    }
  }
  return out;
}

HttpChatClient::HttpChatClient(ChatEndpointConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_retries < 0) {
    throw std::invalid_argument("max_retries must be >= 0");
  }
  while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/') cfg_.base_url.pop_back();
}

GenerationResult HttpChatClient::generate(const std::string&, int, const std::string& prompt) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key) {
    throw std::runtime_error("environment variable " + cfg_.api_key_env +
                             " is not set; it must hold the API key");
  }
  nlohmann::json req = {
      {"model", cfg_.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  if (cfg_.temperature) req["temperature"] = *cfg_.temperature;
  if (cfg_.max_tokens) req["max_tokens"] = *cfg_.max_tokens;
  const std::string body = req.dump();
  const httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

  GenerationResult result;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(cfg_.backoff_base * (1LL << (attempt - 1)));
    }
    ++result.attempts;
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(cfg_.timeout);
    cli.set_read_timeout(cfg_.timeout);
    cli.set_write_timeout(cfg_.timeout);
    auto res = cli.Post("/v1/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      const auto parsed = nlohmann::json::parse(res->body);
      result.text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      result.ok = true;
      return result;
    } catch (const std::exception& e) {
      last_error = std::string("malformed response body: ") + e.what();
    }
  }
  result.error = last_error;
  return result;
}

std::filesystem::path replay_path(const std::filesystem::path& dir,
                                  const std::string& taxonomy_id, int run_index) {
  std::string safe;
  for (char c : taxonomy_id) {
    const bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    safe += plain ? c : '_';
  }
  if (safe.empty()) safe = "_";
  return dir / safe / ("run_" + std::to_string(run_index) + ".txt");
}

ReplaySource::ReplaySource(std::filesystem::path dir) : dir_(std::move(dir)) {}

GenerationResult ReplaySource::generate(const std::string& taxonomy_id, int run_index,
                                        const std::string&) {
  const std::filesystem::path path = replay_path(dir_, taxonomy_id, run_index);
  GenerationResult result;
  result.attempts = 1;
  if (!std::filesystem::exists(path)) {
    result.error = "no recorded response at " + path.string();
    return result;
  }
  result.text = io::read_text(path);
  result.ok = true;
  return result;
}

RecordingSource::RecordingSource(GenerationSource& inner, std::filesystem::path dir)
    : inner_(&inner), dir_(std::move(dir)) {}

GenerationResult RecordingSource::generate(const std::string& taxonomy_id, int run_index,
                                           const std::string& prompt) {
  GenerationResult result = inner_->generate(taxonomy_id, run_index, prompt);
  if (result.ok) {
    io::write_text_atomic(replay_path(dir_, taxonomy_id, run_index), result.text);
  }
  return result;
}

namespace {

std::vector<std::string> unique_names(const TaxonomyGraph& t) {
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const Concept& c : t.concepts()) {
    if (!seen.insert(c.name).second) {
      throw std::runtime_error("taxonomy '" + t.id() + "': concept name '" + c.name +
                               "' is not unique; prompting needs unique names");
    }
    names.push_back(c.name);
  }
  return names;
}

}  // namespace

std::vector<GenerationRun> run_generations(const TaxonomyGraph& target,
                                           const std::vector<TaxonomyGraph>& train_pool,
                                           const RunOptions& opt, GenerationSource& source) {
  if (opt.n_runs < 1) {
    throw std::invalid_argument("n_runs must be >= 1");
  }
  if (opt.k_examples < 0) {
    throw std::invalid_argument("k_examples must be >= 0");
  }
  if (static_cast<std::size_t>(opt.k_examples) > train_pool.size()) {
    throw std::invalid_argument("training pool has " + std::to_string(train_pool.size()) +
                                " taxonomies, need at least " +
                                std::to_string(opt.k_examples));
  }

  const std::vector<std::string> target_names = unique_names(target);
  std::vector<Concept> prompt_concepts;
  for (const std::string& n : target_names) prompt_concepts.push_back({n, n});
  const std::string instruction =
      opt.instruction.empty() ? default_instruction() : opt.instruction;

  // prompts are derived before dispatch so sampling never depends on scheduling
  std::vector<std::string> prompts(static_cast<std::size_t>(opt.n_runs));
  for (int i = 0; i < opt.n_runs; ++i) {
    Rng rng(mix_seed(opt.seed, target.id(), static_cast<std::uint64_t>(i)));
    PromptSpec spec;
    spec.instruction = instruction;
    for (std::size_t idx :
         sample_indices(train_pool.size(), static_cast<std::size_t>(opt.k_examples), rng)) {
      const TaxonomyGraph& ex = train_pool[idx];
      FewShotExample fse;
      fse.concepts = unique_names(ex);
      for (const Edge& e : ex.edges()) {
        fse.relations.emplace_back(ex.find_concept(e.parent)->name,
                                   ex.find_concept(e.child)->name);
      }
      spec.examples.push_back(std::move(fse));
    }
    spec.input_concepts = target_names;
    spec.shuffle_seed = rng();
    prompts[static_cast<std::size_t>(i)] = build_prompt(spec);
  }

  std::vector<GenerationRun> runs(static_cast<std::size_t>(opt.n_runs));
  std::vector<std::string> failures(static_cast<std::size_t>(opt.n_runs));
  const auto do_run = [&](int i) {
    const auto slot = static_cast<std::size_t>(i);
    GenerationRun& run = runs[slot];
    run.taxonomy_id = target.id();
    run.run_index = i;
    run.concepts = prompt_concepts;
    try {
      const GenerationResult res = source.generate(target.id(), i, prompts[slot]);
      if (!res.ok) {
        run.failed = true;
        run.error = res.error;
        return;
      }
      run.raw_text = res.text;
      ParsedRelations parsed = parse_relations(res.text, target_names, opt.parse);
      for (const auto& [parent, child] : parsed.parsed) run.parsed.push_back({parent, child});
      run.dropped = std::move(parsed.dropped);
    } catch (const std::exception& e) {
      failures[slot] = e.what();
    }
  };

  if (opt.jobs > 1 && opt.n_runs > 1) {
    std::atomic<int> next{0};
    const int workers = std::min(opt.jobs, opt.n_runs);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < opt.n_runs; i = next.fetch_add(1)) do_run(i);
      });
    }
    for (std::thread& th : pool) th.join();
  } else {
    for (int i = 0; i < opt.n_runs; ++i) do_run(i);
  }

  for (const std::string& f : failures) {
    if (!f.empty()) throw std::runtime_error(f);
  }
  return runs;
}

}  // namespace taxokit::prompting
