#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedtox/corpus.hpp"
#include "fedtox/grid.hpp"
#include "fedtox/labeling.hpp"
#include "fedtox/metrics.hpp"

namespace fedtox {

/// Instruction template; {few_shot} and {cleaned_text} are substituted verbatim.
extern const std::string_view kPromptTemplate;

inline constexpr std::size_t kFewShotPerClass = 10;
inline constexpr std::size_t kDefaultTextBudget = 8000;
inline constexpr std::string_view kTruncationMarker = " [truncated]";

/// "author: text" lines in temporal order with HTML tags removed and whitespace
/// collapsed, cut to `budget` characters (marker included). Toots with no text
/// left are skipped; throws EmptyConversation when none remain.
std::string clean_text(const ConversationTree& tree, std::size_t budget = kDefaultTextBudget);

/// Tag removal, a handful of entity decodes and whitespace collapsing.
std::string strip_html(std::string_view html);

enum class FewShotOrigin { PerInstance, Pooled };

struct FewShotSet {
  std::vector<std::string> toxic;
  std::vector<std::string> nontoxic;
  FewShotOrigin origin = FewShotOrigin::PerInstance;

  /// Throws ConfigError unless both sides hold `per_class` texts.
  void validate(std::size_t per_class = kFewShotPerClass) const;
};

/// Template with the examples rendered as "text\nLABEL: ..." blocks separated
/// by blank lines, toxic examples first.
std::string build_prompt(const FewShotSet& fewshot, std::string_view conversation_text);

/// A conversation ready for prompting.
struct LabeledConversation {
  std::string conversation_id;
  std::string instance;
  std::string text;
  Label label = Label::NonToxic;
};

struct LabeledInstance {
  std::string instance;
  std::vector<LabeledConversation> conversations;
};

/// Pairs cleaned texts with labels. Conversations without a label or without
/// any text are skipped.
LabeledInstance labeled_instance(const InstanceCorpus& corpus, const std::vector<ConversationLabel>& labels,
                                 std::size_t budget = kDefaultTextBudget);

/// A few-shot draw plus the reserved test conversations, as indices into the source.
struct FewShotSplit {
  FewShotSet fewshot;
  std::vector<std::size_t> fewshot_indices;
  std::vector<std::size_t> test_indices;  // balanced, test_per_class of each label
  std::vector<std::size_t> rest_indices;
};

/// Draws `per_class` examples of each label and a balanced test reservation,
/// all disjoint. The few-shot blocks are shuffled by `seed`. Throws
/// InstanceIneligible when a label has fewer than per_class + test_per_class.
FewShotSplit sample_fewshot(std::span<const LabeledConversation> source, std::size_t test_per_class,
                            std::uint64_t seed, std::size_t per_class = kFewShotPerClass,
                            FewShotOrigin origin = FewShotOrigin::PerInstance);

enum class ParseStatus { Clean, Recovered, Defaulted };
std::string_view to_string(ParseStatus status) noexcept;

struct Verdict {
  Label label = Label::NonToxic;
  std::string reason;
  std::string raw;
  ParseStatus status = ParseStatus::Defaulted;
  std::size_t attempts = 0;
  bool transport_failed = false;
};

/// First line containing "LABEL:" (any case) decides; Clean when that line
/// starts with it, Recovered otherwise. nullopt when nothing parses.
std::optional<Verdict> parse_completion(std::string_view completion);

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:11434";
  std::string model = "llama3.2:3b";
  double timeout_seconds = 120.0;
  std::size_t max_retries = 2;  // extra transport attempts after the first

  void validate() const;  // throws ConfigError
};

/// Returns the raw completion for a prompt. Implementations throw
/// EndpointUnavailable on transport failure and must be callable concurrently.
class CompletionTransport {
 public:
  virtual ~CompletionTransport() = default;
  virtual std::string generate(const std::string& prompt) = 0;
};

/// JSON generate endpoint: POST {model, prompt, stream: false} to
/// <base_url>/api/generate and read "response".
std::unique_ptr<CompletionTransport> make_http_transport(const EndpointConfig& config);

/// Answers from the ground truth, looked up by the conversation text at the end
/// of the prompt. Texts in `refuse` get a refusal instead; `always` overrides
/// the answer for every known text.
class OracleTransport final : public CompletionTransport {
 public:
  explicit OracleTransport(std::map<std::string, Label> truth, std::set<std::string> refuse = {},
                           std::optional<Label> always = std::nullopt);
  std::string generate(const std::string& prompt) override;

 private:
  std::map<std::string, Label> truth_;
  std::set<std::string> refuse_;
  std::optional<Label> always_;
};

/// Parses the completion and retries once with the same prompt on a parse
/// failure; a second failure yields (NonToxic, Defaulted). EndpointUnavailable
/// propagates.
Verdict classify(CompletionTransport& transport, const std::string& prompt);

enum class LlmSetup { Local, LocalGlobal, Global };
std::string_view to_string(LlmSetup setup) noexcept;
LlmSetup parse_setup(std::string_view name);  // throws ConfigError

struct LlmEvalConfig {
  std::size_t n_instances = 10;
  std::size_t fewshot_per_class = kFewShotPerClass;
  std::size_t local_test_per_class = 10;
  std::size_t global_test_per_class = 50;
  std::vector<std::uint64_t> seeds = {1, 42, 999};
  std::vector<LlmSetup> setups = {LlmSetup::Local, LlmSetup::LocalGlobal, LlmSetup::Global};
  std::size_t max_in_flight = 1;

  void validate() const;  // throws ConfigError
};

/// Per-seed instance selection and disjoint few-shot / local test / global test draws.
struct LlmSplit {
  std::uint64_t seed = 0;
  std::vector<LabeledInstance> instances;  // selected, sorted by id
  std::vector<FewShotSplit> local;         // aligned with instances
  std::vector<LabeledConversation> global_test;
  FewShotSet pooled_fewshot;
};

/// Throws InstanceIneligible when no instance can supply a few-shot set and a
/// local test set, or when no balanced global test set remains.
LlmSplit prepare_llm_split(const std::vector<LabeledInstance>& instances, const LlmEvalConfig& config,
                           std::uint64_t seed);

struct InstanceScore {
  std::string instance;
  ClassificationMetrics metrics;
};

struct SetupMetrics {
  LlmSetup setup = LlmSetup::Local;
  std::uint64_t seed = 0;
  double macro_f1 = 0.0;  // local setups: mean over instances
  double toxic_precision = 0.0;
  double toxic_recall = 0.0;
  std::size_t instances = 0;
  std::size_t classified = 0;
  std::size_t refusals = 0;  // Defaulted after a parse failure
  std::size_t recovered = 0;
  std::size_t endpoint_failures = 0;  // also Defaulted
  std::vector<InstanceScore> per_instance;
};

/// Per-instance prompts, scored on each instance's local test set (Local) or
/// on the shared global test set (LocalGlobal), averaged over instances.
SetupMetrics run_local_setup(const LlmSplit& split, CompletionTransport& transport, bool global_test,
                             std::size_t max_in_flight = 1);
/// One pooled prompt scored on the global test set.
SetupMetrics run_global_setup(const LlmSplit& split, CompletionTransport& transport, std::size_t max_in_flight = 1);

struct SetupSummary {
  LlmSetup setup = LlmSetup::Local;
  MeanStd macro_f1;
  MeanStd toxic_precision;
  MeanStd toxic_recall;
  std::size_t refusals = 0;
  std::size_t endpoint_failures = 0;
  std::size_t classified = 0;
};

struct LlmEvalReport {
  std::vector<SetupMetrics> runs;  // seed-major
  std::vector<SetupSummary> summary;
};

LlmEvalReport run_llm_evaluation(const std::vector<LabeledInstance>& instances, const LlmEvalConfig& config,
                                 CompletionTransport& transport);

}  // namespace fedtox
