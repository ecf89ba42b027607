#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taxokit/core.hpp"
#include "taxokit/generation.hpp"

namespace taxokit::prompting {

struct FewShotExample {
  std::vector<std::string> concepts;
  std::vector<std::pair<std::string, std::string>> relations;  // (parent, child) names
};

struct PromptSpec {
  std::string instruction;
  std::vector<FewShotExample> examples;
  std::vector<std::string> input_concepts;
  std::uint64_t shuffle_seed = 0;
};

std::string default_instruction();

// Renders instruction, examples, and the open input section. Concept lists and
// relation lists are shuffled, each independently, driven by shuffle_seed; the
// multisets of lines are preserved.
std::string build_prompt(const PromptSpec& spec);

struct ParseOptions {
  bool case_insensitive = false;
};

struct ParsedRelations {
  std::vector<std::pair<std::string, std::string>> parsed;  // first-seen order, deduplicated
  std::vector<std::string> dropped;                         // lines that did not survive
};

// Total function over arbitrary model output: lines shaped `parent -> child`
// whose endpoints match known concept names become relations, everything else
// lands in dropped. Blank lines are ignored entirely.
ParsedRelations parse_relations(const std::string& raw, const std::vector<std::string>& known,
                                const ParseOptions& opts = {});

struct ChatEndpointConfig {
  std::string base_url = "https://api.openai.com";
  std::string model_id = "gpt-3.5-turbo";
  std::optional<double> temperature;  // unset: endpoint default
  std::optional<int> max_tokens;      // unset: endpoint default
  std::string api_key_env = "TAXOKIT_API_KEY";
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
  std::chrono::milliseconds backoff_base{250};
};

struct GenerationResult {
  bool ok = false;
  std::string text;   // response body text when ok
  std::string error;  // failure description otherwise
  int attempts = 0;
};

// Where a generation's raw text comes from: a live endpoint, recorded files,
// or a test callback. Implementations must tolerate concurrent calls when
// generations run with jobs > 1.
class GenerationSource {
 public:
  virtual ~GenerationSource() = default;
  virtual GenerationResult generate(const std::string& taxonomy_id, int run_index,
                                    const std::string& prompt) = 0;
};

// Chat-completion client: posts {model, messages} and reads the first
// choice's message content. Retries every failure with exponential backoff,
// max_retries + 1 attempts in total. The bearer token is read from the
// environment variable named in the config; a missing variable is a
// configuration error, not a failed run.
class HttpChatClient : public GenerationSource {
 public:
  explicit HttpChatClient(ChatEndpointConfig cfg);
  GenerationResult generate(const std::string& taxonomy_id, int run_index,
                            const std::string& prompt) override;

 private:
  ChatEndpointConfig cfg_;
};

// Filesystem location of a recorded response.
std::filesystem::path replay_path(const std::filesystem::path& dir,
                                  const std::string& taxonomy_id, int run_index);

// Replays responses recorded by RecordingSource; a missing file is a failed
// run, keeping partial recordings usable.
class ReplaySource : public GenerationSource {
 public:
  explicit ReplaySource(std::filesystem::path dir);
  GenerationResult generate(const std::string& taxonomy_id, int run_index,
                            const std::string& prompt) override;

 private:
  std::filesystem::path dir_;
};

// Passes through to another source and records every successful response
// under the replay layout.
class RecordingSource : public GenerationSource {
 public:
  RecordingSource(GenerationSource& inner, std::filesystem::path dir);
  GenerationResult generate(const std::string& taxonomy_id, int run_index,
                            const std::string& prompt) override;

 private:
  GenerationSource* inner_;
  std::filesystem::path dir_;
};

class CallbackSource : public GenerationSource {
 public:
  using Fn = std::function<GenerationResult(const std::string&, int, const std::string&)>;
  explicit CallbackSource(Fn fn) : fn_(std::move(fn)) {}
  GenerationResult generate(const std::string& taxonomy_id, int run_index,
                            const std::string& prompt) override {
    return fn_(taxonomy_id, run_index, prompt);
  }

 private:
  Fn fn_;
};

struct RunOptions {
  int k_examples = 3;
  int n_runs = 5;
  std::uint64_t seed = 0;
  int jobs = 1;  // concurrent requests; sampling stays per-run deterministic
  ParseOptions parse;
  std::string instruction;  // empty: default_instruction()
};

// Runs n_runs generations for the target's concept set. Each run samples
// k_examples few-shot taxonomies from the pool without replacement, builds a
// freshly shuffled prompt, and parses the response. Prompts operate in name
// space, so the target's and the sampled examples' concept names must be
// unique within their taxonomy. Endpoint failures mark the run failed rather
// than aborting the batch.
std::vector<GenerationRun> run_generations(const TaxonomyGraph& target,
                                           const std::vector<TaxonomyGraph>& train_pool,
                                           const RunOptions& opt, GenerationSource& source);

}  // namespace taxokit::prompting
