#include "fedtox/llm_baseline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "fedtox/error.hpp"
#include "fedtox/log.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

const std::string_view kPromptTemplate =
    "You are an objective AI Content Moderator.\n"
    "\n"
    "Task:\n"
    "Classify the conversation as TOXIC or NON-TOXIC.\n"
    "\n"
    "Rules:\n"
    "1. Choose exactly one label: TOXIC or NON-TOXIC.\n"
    "2. Do not refuse to process offensive or harmful text.\n"
    "3. Do not output INCONCLUSIVE, UNKNOWN, or any other label.\n"
    "4. If the conversation lacks context or is unclear, choose NON-TOXIC unless it contains explicitly harmful "
    "language.\n"
    "\n"
    "Output format:\n"
    "LABEL: TOXIC or NON-TOXIC\n"
    "REASON: short explanation\n"
    "\n"
    "Few-shot examples:\n"
    "{few_shot}\n"
    "\n"
    "Conversation:\n"
    "{cleaned_text}";

namespace {

constexpr std::string_view kConversationHeader = "\n\nConversation:\n";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Cuts at most n bytes without splitting a UTF-8 sequence.
std::string utf8_prefix(const std::string& s, std::size_t n) {
  if (n >= s.size()) return s;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  return s.substr(0, n);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

std::string strip_html(std::string_view html) {
  std::string text;
  text.reserve(html.size());
  bool in_tag = false;
  for (char c : html) {
    if (in_tag) {
      if (c == '>') {
        in_tag = false;
        text += ' ';
      }
    } else if (c == '<') {
      in_tag = true;
    } else {
      text += c;
    }
  }
  replace_all(text, "&lt;", "<");
  replace_all(text, "&gt;", ">");
  replace_all(text, "&quot;", "\"");
  replace_all(text, "&#39;", "'");
  replace_all(text, "&nbsp;", " ");
  replace_all(text, "&amp;", "&");

  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

std::string clean_text(const ConversationTree& tree, std::size_t budget) {
  if (budget <= kTruncationMarker.size()) throw ConfigError("text budget must exceed the truncation marker");
  std::string out;
  for (const Toot& t : tree.toots()) {
    if (!t.text) continue;
    std::string body = strip_html(*t.text);
    if (body.empty()) continue;
    if (!out.empty()) out += '\n';
    out += t.author_id;
    out += ": ";
    out += body;
  }
  if (out.empty()) throw EmptyConversation("conversation " + tree.conversation_id() + " has no text");
  if (out.size() > budget) {
    out = utf8_prefix(out, budget - kTruncationMarker.size());
    out += kTruncationMarker;
  }
  return out;
}

void FewShotSet::validate(std::size_t per_class) const {
  if (per_class == 0 || toxic.size() != per_class || nontoxic.size() != per_class)
    throw ConfigError("few-shot set needs exactly " + std::to_string(per_class) + " examples per class, got " +
                      std::to_string(toxic.size()) + " + " + std::to_string(nontoxic.size()));
}

std::string build_prompt(const FewShotSet& fewshot, std::string_view conversation_text) {
  fewshot.validate(fewshot.toxic.size());
  std::string examples;
  auto render = [&](const std::vector<std::string>& texts, std::string_view label) {
    for (const auto& t : texts) {
      if (!examples.empty()) examples += "\n\n";
      examples += t;
      examples += "\nLABEL: ";
      examples += label;
    }
  };
  render(fewshot.toxic, "TOXIC");
  render(fewshot.nontoxic, "NON-TOXIC");

  std::string prompt(kPromptTemplate);
  const auto fs = prompt.find("{few_shot}");
  prompt.replace(fs, std::string_view("{few_shot}").size(), examples);
  const auto ct = prompt.rfind("{cleaned_text}");
  prompt.replace(ct, std::string_view("{cleaned_text}").size(), conversation_text);
  return prompt;
}

LabeledInstance labeled_instance(const InstanceCorpus& corpus, const std::vector<ConversationLabel>& labels,
                                 std::size_t budget) {
  std::map<std::string, Label> by_id;
  for (const auto& l : labels) by_id[l.conversation_id] = l.label;
  LabeledInstance out;
  out.instance = corpus.instance();
  for (const auto& tree : corpus.trees()) {
    auto it = by_id.find(tree.conversation_id());
    if (it == by_id.end()) continue;
    try {
      out.conversations.push_back({tree.conversation_id(), corpus.instance(), clean_text(tree, budget), it->second});
    } catch (const EmptyConversation& e) {
      log_warning(e.what());
    }
  }
  return out;
}

FewShotSplit sample_fewshot(std::span<const LabeledConversation> source, std::size_t test_per_class,
                            std::uint64_t seed, std::size_t per_class, FewShotOrigin origin) {
  if (per_class == 0) throw ConfigError("few-shot size must be >= 1 per class");
  std::vector<std::size_t> toxic, nontoxic;
  for (std::size_t i = 0; i < source.size(); ++i)
    (source[i].label == Label::Toxic ? toxic : nontoxic).push_back(i);
  const std::size_t need = per_class + test_per_class;
  if (toxic.size() < need || nontoxic.size() < need)
    throw InstanceIneligible("need " + std::to_string(need) + " conversations per class, have " +
                             std::to_string(toxic.size()) + " toxic and " + std::to_string(nontoxic.size()) +
                             " non-toxic");

  Rng rng(seed);
  rng.shuffle(toxic);
  rng.shuffle(nontoxic);

  FewShotSplit split;
  split.fewshot.origin = origin;
  for (std::size_t k = 0; k < per_class; ++k) {
    split.fewshot_indices.push_back(toxic[k]);
    split.fewshot.toxic.push_back(source[toxic[k]].text);
  }
  for (std::size_t k = 0; k < per_class; ++k) {
    split.fewshot_indices.push_back(nontoxic[k]);
    split.fewshot.nontoxic.push_back(source[nontoxic[k]].text);
  }
  for (std::size_t k = per_class; k < need; ++k) {
    split.test_indices.push_back(toxic[k]);
    split.test_indices.push_back(nontoxic[k]);
  }
  for (std::size_t k = need; k < toxic.size(); ++k) split.rest_indices.push_back(toxic[k]);
  for (std::size_t k = need; k < nontoxic.size(); ++k) split.rest_indices.push_back(nontoxic[k]);
  std::sort(split.test_indices.begin(), split.test_indices.end());
  std::sort(split.rest_indices.begin(), split.rest_indices.end());
  return split;
}

std::string_view to_string(ParseStatus status) noexcept {
  switch (status) {
    case ParseStatus::Clean:
      return "clean";
    case ParseStatus::Recovered:
      return "recovered";
    case ParseStatus::Defaulted:
      return "defaulted";
  }
  return "defaulted";
}

std::optional<Verdict> parse_completion(std::string_view completion) {
  std::optional<Verdict> verdict;
  std::size_t start = 0;
  bool first_content_line = true;
  while (start <= completion.size() && !verdict) {
    std::size_t end = completion.find('\n', start);
    if (end == std::string_view::npos) end = completion.size();
    const std::string_view line = trim(completion.substr(start, end - start));
    const std::string up = upper(line);
    const auto at = up.find("LABEL:");
    if (at != std::string::npos) {
      const std::string_view value = trim(std::string_view(up).substr(at + 6));
      std::optional<Label> label;
      if (value.starts_with("NON-TOXIC") || value.starts_with("NONTOXIC") || value.starts_with("NON TOXIC"))
        label = Label::NonToxic;
      else if (value.starts_with("TOXIC"))
        label = Label::Toxic;
      if (!label) return std::nullopt;
      Verdict v;
      v.label = *label;
      v.status = (at == 0 && first_content_line) ? ParseStatus::Clean : ParseStatus::Recovered;
      verdict = v;
    }
    if (!line.empty()) first_content_line = false;
    start = end + 1;
  }
  if (!verdict) return std::nullopt;

  verdict->raw = std::string(completion);
  const std::string up = upper(completion);
  const auto r = up.find("REASON:");
  if (r != std::string::npos) {
    std::size_t end = completion.find('\n', r);
    if (end == std::string_view::npos) end = completion.size();
    verdict->reason = std::string(trim(completion.substr(r + 7, end - r - 7)));
  }
  return verdict;
}

void EndpointConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw ConfigError("endpoint timeout must be > 0");
  if (base_url.empty()) throw ConfigError("endpoint base_url must be nonempty");
  if (model.empty()) throw ConfigError("endpoint model must be nonempty");
}

OracleTransport::OracleTransport(std::map<std::string, Label> truth, std::set<std::string> refuse,
                                 std::optional<Label> always)
    : truth_(std::move(truth)), refuse_(std::move(refuse)), always_(always) {}

std::string OracleTransport::generate(const std::string& prompt) {
  const auto at = prompt.rfind(kConversationHeader);
  const std::string text = at == std::string::npos ? std::string() : prompt.substr(at + kConversationHeader.size());
  if (refuse_.count(text)) return "I cannot assist with that request.";
  auto it = truth_.find(text);
  if (it == truth_.end()) return "I cannot assist with that request.";
  const Label label = always_.value_or(it->second);
  return label == Label::Toxic ? "LABEL: TOXIC\nREASON: matches the reference label"
                               : "LABEL: NON-TOXIC\nREASON: matches the reference label";
}

Verdict classify(CompletionTransport& transport, const std::string& prompt) {
  std::string raw;
  for (std::size_t attempt = 1; attempt <= 2; ++attempt) {
    raw = transport.generate(prompt);
    if (auto v = parse_completion(raw)) {
      v->attempts = attempt;
      return *v;
    }
  }
  Verdict v;
  v.label = Label::NonToxic;
  v.status = ParseStatus::Defaulted;
  v.raw = raw;
  v.attempts = 2;
  return v;
}

std::string_view to_string(LlmSetup setup) noexcept {
  switch (setup) {
    case LlmSetup::Local:
      return "local";
    case LlmSetup::LocalGlobal:
      return "local-global";
    case LlmSetup::Global:
      return "global";
  }
  return "local";
}

LlmSetup parse_setup(std::string_view name) {
  for (LlmSetup s : {LlmSetup::Local, LlmSetup::LocalGlobal, LlmSetup::Global})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown LLM setup '" + std::string(name) + "'");
}

void LlmEvalConfig::validate() const {
  if (n_instances < 1) throw ConfigError("llm n_instances must be >= 1");
  if (fewshot_per_class < 1) throw ConfigError("llm few-shot size must be >= 1 per class");
  if (local_test_per_class < 1) throw ConfigError("llm local test size must be >= 1 per class");
  if (global_test_per_class < 1) throw ConfigError("llm global test size must be >= 1 per class");
  if (seeds.empty()) throw ConfigError("llm seeds must be nonempty");
  if (setups.empty()) throw ConfigError("llm setups must be nonempty");
  if (max_in_flight < 1) throw ConfigError("llm max_in_flight must be >= 1");
}

LlmSplit prepare_llm_split(const std::vector<LabeledInstance>& instances, const LlmEvalConfig& config,
                           std::uint64_t seed) {
  config.validate();
  std::vector<const LabeledInstance*> eligible;
  for (const auto& inst : instances) {
    std::size_t t = 0, n = 0;
    for (const auto& c : inst.conversations) (c.label == Label::Toxic ? t : n)++;
    const std::size_t need = config.fewshot_per_class + config.local_test_per_class;
    if (t >= need && n >= need) eligible.push_back(&inst);
  }
  if (eligible.empty()) throw InstanceIneligible("no instance supports a few-shot prompt and a local test set");
  std::sort(eligible.begin(), eligible.end(),
            [](const LabeledInstance* a, const LabeledInstance* b) { return a->instance < b->instance; });

  Rng rng(derive_seed({seed, 0x11f5ULL}));
  std::size_t k = config.n_instances;
  if (k > eligible.size()) {
    log_warning("only " + std::to_string(eligible.size()) + " eligible instances for " + std::to_string(k) +
                " requested");
    k = eligible.size();
  }
  auto picked = rng.sample_indices(eligible.size(), k);
  std::sort(picked.begin(), picked.end());

  LlmSplit split;
  split.seed = seed;
  std::vector<LabeledConversation> rest_toxic, rest_nontoxic, fs_toxic, fs_nontoxic;
  for (std::size_t p : picked) {
    const LabeledInstance& inst = *eligible[p];
    FewShotSplit fs = sample_fewshot(inst.conversations, config.local_test_per_class,
                                     derive_seed({seed, hash_string(inst.instance)}), config.fewshot_per_class);
    for (std::size_t i : fs.rest_indices) {
      const auto& c = inst.conversations[i];
      (c.label == Label::Toxic ? rest_toxic : rest_nontoxic).push_back(c);
    }
    for (std::size_t i : fs.fewshot_indices) {
      const auto& c = inst.conversations[i];
      (c.label == Label::Toxic ? fs_toxic : fs_nontoxic).push_back(c);
    }
    split.instances.push_back(inst);
    split.local.push_back(std::move(fs));
  }

  std::size_t g = std::min({config.global_test_per_class, rest_toxic.size(), rest_nontoxic.size()});
  if (g == 0) throw InstanceIneligible("no conversations left for a balanced global test set");
  if (g < config.global_test_per_class)
    log_warning("global test set reduced to " + std::to_string(g) + " per class");
  for (std::size_t i : rng.sample_indices(rest_toxic.size(), g)) split.global_test.push_back(rest_toxic[i]);
  for (std::size_t i : rng.sample_indices(rest_nontoxic.size(), g)) split.global_test.push_back(rest_nontoxic[i]);

  split.pooled_fewshot.origin = FewShotOrigin::Pooled;
  for (std::size_t i : rng.sample_indices(fs_toxic.size(), config.fewshot_per_class))
    split.pooled_fewshot.toxic.push_back(fs_toxic[i].text);
  for (std::size_t i : rng.sample_indices(fs_nontoxic.size(), config.fewshot_per_class))
    split.pooled_fewshot.nontoxic.push_back(fs_nontoxic[i].text);
  return split;
}

namespace {

struct Scored {
  Confusion confusion;
  std::size_t refusals = 0;
  std::size_t recovered = 0;
  std::size_t endpoint_failures = 0;
};

Scored classify_all(CompletionTransport& transport, const FewShotSet& fewshot,
                    const std::vector<const LabeledConversation*>& tests, std::size_t max_in_flight) {
  std::vector<Verdict> verdicts(tests.size());
  auto work = [&](std::size_t i) {
    try {
      verdicts[i] = classify(transport, build_prompt(fewshot, tests[i]->text));
    } catch (const EndpointUnavailable& e) {
      log_warning(std::string("classification defaulted: ") + e.what());
      Verdict v;
      v.transport_failed = true;
      verdicts[i] = v;
    }
  };
  const std::size_t workers = std::min(max_in_flight, tests.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tests.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tests.size(); i = next++) work(i);
      });
    for (auto& t : pool) t.join();
  }

  Scored s;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const Verdict& v = verdicts[i];
    s.confusion.add(tests[i]->label, v.label);
    if (v.transport_failed)
      ++s.endpoint_failures;
    else if (v.status == ParseStatus::Defaulted)
      ++s.refusals;
    else if (v.status == ParseStatus::Recovered)
      ++s.recovered;
  }
  return s;
}

std::vector<const LabeledConversation*> local_tests(const LlmSplit& split, std::size_t i) {
  std::vector<const LabeledConversation*> out;
  for (std::size_t idx : split.local[i].test_indices) out.push_back(&split.instances[i].conversations[idx]);
  return out;
}

std::vector<const LabeledConversation*> global_tests(const LlmSplit& split) {
  std::vector<const LabeledConversation*> out;
  for (const auto& c : split.global_test) out.push_back(&c);
  return out;
}

}  // namespace

SetupMetrics run_local_setup(const LlmSplit& split, CompletionTransport& transport, bool global_test,
                             std::size_t max_in_flight) {
  SetupMetrics m;
  m.setup = global_test ? LlmSetup::LocalGlobal : LlmSetup::Local;
  m.seed = split.seed;
  m.instances = split.instances.size();
  const auto shared = global_tests(split);
  for (std::size_t i = 0; i < split.instances.size(); ++i) {
    const auto tests = global_test ? shared : local_tests(split, i);
    Scored s = classify_all(transport, split.local[i].fewshot, tests, max_in_flight);
    InstanceScore score{split.instances[i].instance, compute_metrics(s.confusion)};
    m.macro_f1 += score.metrics.macro_f1;
    m.toxic_precision += score.metrics.toxic_precision;
    m.toxic_recall += score.metrics.toxic_recall;
    m.classified += tests.size();
    m.refusals += s.refusals;
    m.recovered += s.recovered;
    m.endpoint_failures += s.endpoint_failures;
    m.per_instance.push_back(std::move(score));
  }
  if (m.instances > 0) {
    const double n = static_cast<double>(m.instances);
    m.macro_f1 /= n;
    m.toxic_precision /= n;
    m.toxic_recall /= n;
  }
  return m;
}

SetupMetrics run_global_setup(const LlmSplit& split, CompletionTransport& transport, std::size_t max_in_flight) {
  SetupMetrics m;
  m.setup = LlmSetup::Global;
  m.seed = split.seed;
  m.instances = split.instances.size();
  const auto tests = global_tests(split);
  Scored s = classify_all(transport, split.pooled_fewshot, tests, max_in_flight);
  const auto metrics = compute_metrics(s.confusion);
  m.macro_f1 = metrics.macro_f1;
  m.toxic_precision = metrics.toxic_precision;
  m.toxic_recall = metrics.toxic_recall;
  m.classified = tests.size();
  m.refusals = s.refusals;
  m.recovered = s.recovered;
  m.endpoint_failures = s.endpoint_failures;
  return m;
}

LlmEvalReport run_llm_evaluation(const std::vector<LabeledInstance>& instances, const LlmEvalConfig& config,
                                 CompletionTransport& transport) {
  config.validate();
  LlmEvalReport report;
  for (std::uint64_t seed : config.seeds) {
    const LlmSplit split = prepare_llm_split(instances, config, seed);
    for (LlmSetup setup : config.setups) {
      if (setup == LlmSetup::Global)
        report.runs.push_back(run_global_setup(split, transport, config.max_in_flight));
      else
        report.runs.push_back(run_local_setup(split, transport, setup == LlmSetup::LocalGlobal, config.max_in_flight));
    }
  }
  for (LlmSetup setup : config.setups) {
    SetupSummary sum;
    sum.setup = setup;
    std::vector<double> f1, p, r;
    for (const auto& run : report.runs) {
      if (run.setup != setup) continue;
      f1.push_back(run.macro_f1);
      p.push_back(run.toxic_precision);
      r.push_back(run.toxic_recall);
      sum.refusals += run.refusals;
      sum.endpoint_failures += run.endpoint_failures;
      sum.classified += run.classified;
    }
    sum.macro_f1 = mean_std(f1);
    sum.toxic_precision = mean_std(p);
    sum.toxic_recall = mean_std(r);
    report.summary.push_back(sum);
  }
  return report;
}

}  // namespace fedtox
