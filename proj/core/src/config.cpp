#include "fedtox/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "csv_util.hpp"
#include "fedtox/error.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : s_(text) {}

  TomlDocument parse() {
    TomlDocument doc;
    std::string table;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        skip_ws();
        std::string name;
        while (!eof() && peek() != ']' && peek() != '\n') name += s_[pos_++];
        while (!name.empty() && (name.back() == ' ' || name.back() == '\t')) name.pop_back();
        if (eof() || peek() != ']') fail("unterminated table header");
        ++pos_;
        if (name.empty() || !valid_key(name, true)) fail("invalid table name '" + name + "'");
        table = name;
        end_of_line();
        continue;
      }
      std::string key;
      while (!eof() && is_key_char(peek())) key += s_[pos_++];
      if (key.empty()) fail("expected a key");
      skip_ws();
      if (eof() || peek() != '=') fail("expected '=' after key '" + key + "'");
      ++pos_;
      skip_ws();
      const std::size_t line = line_;
      TomlValue value;
      value.line = line;
      if (!eof() && peek() == '[') {
        value.value = parse_array();
      } else {
        std::visit([&](auto&& x) { value.value = x; }, parse_scalar());
      }
      end_of_line();
      const std::string full = table.empty() ? key : table + "." + key;
      if (!doc.emplace(full, std::move(value)).second) fail_at(line, "duplicate key '" + full + "'");
    }
    return doc;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(line_, msg); }
  [[noreturn]] static void fail_at(std::size_t line, const std::string& msg) {
    throw ConfigError("config line " + std::to_string(line) + ": " + msg);
  }

  static bool is_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }
  static bool valid_key(const std::string& k, bool dotted) {
    for (char c : k)
      if (!is_key_char(c) && !(dotted && c == '.')) return false;
    return k.front() != '.' && k.back() != '.';
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void newline() {
    if (!eof() && peek() == '\r') ++pos_;
    if (!eof() && peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }
  void skip_blank_lines() {
    while (true) {
      skip_ws();
      skip_comment();
      if (eof()) return;
      if (peek() == '\n' || peek() == '\r')
        newline();
      else
        return;
    }
  }
  // Whitespace, comments and newlines, as allowed inside arrays.
  void skip_array_space() { skip_blank_lines(); }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected trailing characters");
    newline();
  }

  std::vector<TomlScalar> parse_array() {
    ++pos_;  // '['
    std::vector<TomlScalar> out;
    while (true) {
      skip_array_space();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(parse_scalar());
      skip_array_space();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  TomlScalar parse_scalar() {
    if (eof()) fail("missing value");
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (s_.substr(pos_, 4) == "true") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "false") {
      pos_ += 5;
      return false;
    }
    std::string tok;
    while (!eof() && std::string_view("0123456789+-._eE").find(peek()) != std::string_view::npos) {
      if (peek() != '_') tok += peek();
      ++pos_;
    }
    if (tok.empty()) fail("invalid value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos;
    const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
    const char* last = tok.data() + tok.size();
    if (is_float) {
      double d = 0.0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec != std::errc() || p != last) fail("invalid number '" + tok + "'");
      return d;
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(first, last, i);
    if (ec != std::errc() || p != last) fail("invalid integer '" + tok + "'");
    return i;
  }

  std::string parse_basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      char e = s_[pos_++];
      switch (e) {
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        case 'r':
          out += '\r';
          break;
        default:
          fail(std::string("unsupported escape '\\") + e + "'");
      }
    }
  }

  std::string parse_literal_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[pos_++];
      if (c == '\'') return out;
      out += c;
    }
  }
};

// Typed accessors.

[[noreturn]] void type_error(const std::string& key, const TomlValue& v, const char* expected) {
  throw ConfigError("config line " + std::to_string(v.line) + ": '" + key + "' must be " + expected);
}

bool as_bool(const TomlValue& v, const std::string& key) {
  if (auto p = std::get_if<bool>(&v.value)) return *p;
  type_error(key, v, "a boolean");
}

std::size_t as_size(const TomlValue& v, const std::string& key) {
  if (auto p = std::get_if<std::int64_t>(&v.value); p && *p >= 0) return static_cast<std::size_t>(*p);
  type_error(key, v, "a non-negative integer");
}

std::uint64_t as_u64(const TomlValue& v, const std::string& key) { return as_size(v, key); }

double as_real(const TomlValue& v, const std::string& key) {
  if (auto p = std::get_if<double>(&v.value)) return *p;
  if (auto p = std::get_if<std::int64_t>(&v.value)) return static_cast<double>(*p);
  type_error(key, v, "a number");
}

std::string as_string(const TomlValue& v, const std::string& key) {
  if (auto p = std::get_if<std::string>(&v.value)) return *p;
  type_error(key, v, "a string");
}

std::string scalar_text(const TomlScalar& s) {
  if (auto p = std::get_if<std::string>(&s)) return *p;
  if (auto p = std::get_if<std::int64_t>(&s)) return std::to_string(*p);
  if (auto p = std::get_if<double>(&s)) return detail::format_double(*p);
  return std::get<bool>(s) ? "true" : "false";
}

std::vector<std::string> as_string_list(const TomlValue& v, const std::string& key, bool allow_numbers) {
  auto p = std::get_if<std::vector<TomlScalar>>(&v.value);
  if (!p) type_error(key, v, "an array");
  std::vector<std::string> out;
  for (const auto& s : *p) {
    if (!std::holds_alternative<std::string>(s) &&
        !(allow_numbers && (std::holds_alternative<std::int64_t>(s) || std::holds_alternative<double>(s))))
      type_error(key, v, "an array of strings");
    out.push_back(scalar_text(s));
  }
  return out;
}

std::vector<std::uint64_t> as_u64_list(const TomlValue& v, const std::string& key) {
  auto p = std::get_if<std::vector<TomlScalar>>(&v.value);
  if (!p) type_error(key, v, "an array");
  std::vector<std::uint64_t> out;
  for (const auto& s : *p) {
    auto i = std::get_if<std::int64_t>(&s);
    if (!i || *i < 0) type_error(key, v, "an array of non-negative integers");
    out.push_back(static_cast<std::uint64_t>(*i));
  }
  return out;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out += c;
    }
  }
  return out + "\"";
}

std::string render_real(double d) {
  std::string s = detail::format_double(d);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string render_bool(bool b) { return b ? "true" : "false"; }

template <typename Range, typename F>
std::string render_list(const Range& r, F&& item) {
  std::string out = "[";
  bool first = true;
  for (const auto& x : r) {
    if (!first) out += ", ";
    first = false;
    out += item(x);
  }
  return out + "]";
}

struct Field {
  std::string table;
  std::string key;
  std::function<void(RunConfig&, const TomlValue&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> render;
};

#define FTX_SIZE(tbl, k, expr)                                                                       \
  Field {                                                                                            \
    tbl, k, [](RunConfig& c, const TomlValue& v, const std::string& n) { expr = as_size(v, n); },   \
        [](const RunConfig& c) { return std::to_string(expr); }                                      \
  }
#define FTX_U64(tbl, k, expr)                                                                        \
  Field {                                                                                            \
    tbl, k, [](RunConfig& c, const TomlValue& v, const std::string& n) { expr = as_u64(v, n); },    \
        [](const RunConfig& c) { return std::to_string(expr); }                                      \
  }
#define FTX_REAL(tbl, k, expr)                                                                       \
  Field {                                                                                            \
    tbl, k, [](RunConfig& c, const TomlValue& v, const std::string& n) { expr = as_real(v, n); },   \
        [](const RunConfig& c) { return render_real(expr); }                                         \
  }
#define FTX_BOOL(tbl, k, expr)                                                                       \
  Field {                                                                                            \
    tbl, k, [](RunConfig& c, const TomlValue& v, const std::string& n) { expr = as_bool(v, n); },   \
        [](const RunConfig& c) { return render_bool(expr); }                                         \
  }
#define FTX_STRING(tbl, k, expr)                                                                     \
  Field {                                                                                            \
    tbl, k, [](RunConfig& c, const TomlValue& v, const std::string& n) { expr = as_string(v, n); }, \
        [](const RunConfig& c) { return quote(expr); }                                               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      FTX_STRING("run", "workdir", c.workdir),
      FTX_STRING("run", "input", c.input),

      Field{"corpus", "languages",
            [](RunConfig& c, const TomlValue& v, const std::string& n) {
              auto list = as_string_list(v, n, false);
              c.pipeline.languages = std::set<std::string>(list.begin(), list.end());
            },
            [](const RunConfig& c) { return render_list(c.pipeline.languages, quote); }},
      FTX_SIZE("corpus", "min_posts", c.pipeline.min_posts),

      FTX_REAL("labeling", "thr_root", c.pipeline.policy.thr_root),
      FTX_SIZE("labeling", "thr_number", c.pipeline.policy.thr_number),
      FTX_REAL("labeling", "thr_fraction", c.pipeline.policy.thr_fraction),

      FTX_BOOL("backbone", "enabled", c.pipeline.backbone),
      FTX_REAL("backbone", "delta", c.pipeline.backbone_delta),

      FTX_SIZE("deepwalk", "walks_per_node", c.pipeline.features.walk.walks_per_node),
      FTX_SIZE("deepwalk", "walk_length", c.pipeline.features.walk.walk_length),
      FTX_SIZE("deepwalk", "window", c.pipeline.features.walk.window),
      FTX_SIZE("deepwalk", "negative", c.pipeline.features.walk.negative),
      FTX_SIZE("deepwalk", "epochs", c.pipeline.features.walk.epochs),
      FTX_SIZE("deepwalk", "dims", c.pipeline.features.walk.dims),
      FTX_REAL("deepwalk", "learning_rate", c.pipeline.features.walk.learning_rate),
      FTX_REAL("deepwalk", "min_learning_rate", c.pipeline.features.walk.min_learning_rate),

      FTX_BOOL("features", "deepwalk", c.pipeline.features.toggles.deepwalk),
      FTX_BOOL("features", "author", c.pipeline.features.toggles.author),
      FTX_BOOL("features", "sentiment", c.pipeline.features.toggles.sentiment),
      FTX_BOOL("features", "conversation", c.pipeline.features.toggles.conversation),
      FTX_BOOL("features", "count_self_replies", c.pipeline.features.count_self_replies),

      FTX_SIZE("train", "local_epochs", c.pipeline.federation.train.local_epochs),
      FTX_REAL("train", "learning_rate", c.pipeline.federation.train.learning_rate),
      FTX_SIZE("train", "batch_size", c.pipeline.federation.train.batch_size),
      Field{"train", "optimizer",
            [](RunConfig& c, const TomlValue& v, const std::string& n) {
              const auto s = as_string(v, n);
              if (s == "adam")
                c.pipeline.federation.train.optimizer = OptimizerKind::Adam;
              else if (s == "sgd")
                c.pipeline.federation.train.optimizer = OptimizerKind::Sgd;
              else
                throw ConfigError("config line " + std::to_string(v.line) + ": optimizer must be \"adam\" or \"sgd\"");
            },
            [](const RunConfig& c) {
              return quote(c.pipeline.federation.train.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
            }},
      FTX_REAL("train", "beta1", c.pipeline.federation.train.beta1),
      FTX_REAL("train", "beta2", c.pipeline.federation.train.beta2),
      FTX_REAL("train", "epsilon", c.pipeline.federation.train.epsilon),

      FTX_SIZE("federation", "rounds", c.pipeline.federation.rounds),
      FTX_SIZE("federation", "clients_per_round", c.pipeline.federation.clients_per_round),
      Field{"federation", "train_cap",
            [](RunConfig& c, const TomlValue& v, const std::string& n) {
              const std::size_t cap = as_size(v, n);
              c.pipeline.federation.train_cap = cap == 0 ? std::nullopt : std::optional<std::size_t>(cap);
            },
            [](const RunConfig& c) { return std::to_string(c.pipeline.federation.train_cap.value_or(0)); }},
      FTX_SIZE("federation", "hidden", c.pipeline.federation.hidden),
      FTX_SIZE("federation", "depth", c.pipeline.federation.depth),
      FTX_REAL("federation", "train_ratio", c.pipeline.federation.train_ratio),
      FTX_SIZE("federation", "eval_every", c.pipeline.federation.eval_every),
      FTX_SIZE("federation", "threads", c.pipeline.federation.threads),
      FTX_U64("federation", "seed", c.pipeline.federation.seed),

      Field{"grid", "axis",
            [](RunConfig& c, const TomlValue& v, const std::string& n) { c.grid.axis = parse_axis(as_string(v, n)); },
            [](const RunConfig& c) { return quote(to_string(c.grid.axis)); }},
      Field{"grid", "values",
            [](RunConfig& c, const TomlValue& v, const std::string& n) { c.grid.values = as_string_list(v, n, true); },
            [](const RunConfig& c) { return render_list(c.grid.values, quote); }},
      FTX_SIZE("grid", "n_seeds", c.grid.n_seeds),

      FTX_SIZE("synth", "n_instances", c.synth.n_instances),
      FTX_SIZE("synth", "users_per_instance", c.synth.users_per_instance),
      FTX_SIZE("synth", "conversations_per_instance", c.synth.conversations_per_instance),
      FTX_REAL("synth", "instance_size_spread", c.synth.instance_size_spread),
      FTX_REAL("synth", "mean_replies", c.synth.mean_replies),
      FTX_REAL("synth", "root_attach_prob", c.synth.root_attach_prob),
      FTX_REAL("synth", "toxic_prevalence", c.synth.toxic_prevalence),
      FTX_REAL("synth", "signal_strength", c.synth.signal_strength),
      FTX_REAL("synth", "shared_user_rate", c.synth.shared_user_rate),
      FTX_REAL("synth", "activity_exponent", c.synth.activity_exponent),
      FTX_REAL("synth", "sentiment_noise", c.synth.sentiment_noise),
      FTX_REAL("synth", "mean_reaction_seconds", c.synth.mean_reaction_seconds),
      FTX_STRING("synth", "lang", c.synth.lang),
      FTX_U64("synth", "seed", c.synth.seed),

      FTX_STRING("llm", "endpoint", c.endpoint.base_url),
      FTX_STRING("llm", "model", c.endpoint.model),
      FTX_REAL("llm", "timeout_seconds", c.endpoint.timeout_seconds),
      FTX_SIZE("llm", "max_retries", c.endpoint.max_retries),
      FTX_SIZE("llm", "n_instances", c.llm.n_instances),
      FTX_SIZE("llm", "fewshot_size", c.llm.fewshot_per_class),
      FTX_SIZE("llm", "local_test_size", c.llm.local_test_per_class),
      FTX_SIZE("llm", "global_test_size", c.llm.global_test_per_class),
      Field{"llm", "seeds",
            [](RunConfig& c, const TomlValue& v, const std::string& n) { c.llm.seeds = as_u64_list(v, n); },
            [](const RunConfig& c) {
              return render_list(c.llm.seeds, [](std::uint64_t s) { return std::to_string(s); });
            }},
      Field{"llm", "setups",
            [](RunConfig& c, const TomlValue& v, const std::string& n) {
              c.llm.setups.clear();
              for (const auto& s : as_string_list(v, n, false)) c.llm.setups.push_back(parse_setup(s));
            },
            [](const RunConfig& c) {
              return render_list(c.llm.setups, [](LlmSetup s) { return quote(to_string(s)); });
            }},
      FTX_SIZE("llm", "max_in_flight", c.llm.max_in_flight),
      FTX_SIZE("llm", "text_budget", c.text_budget),
  };
  return all;
}

#undef FTX_SIZE
#undef FTX_U64
#undef FTX_REAL
#undef FTX_BOOL
#undef FTX_STRING

}  // namespace

TomlDocument parse_toml(std::string_view text) { return TomlParser(text).parse(); }

void RunConfig::validate() const {
  if (workdir.empty()) throw ConfigError("run.workdir must be nonempty");
  pipeline.validate();
  synth.validate();
  if (grid.n_seeds < 1) throw ConfigError("grid.n_seeds must be >= 1");
  for (const auto& v : grid.values) apply_axis_value(pipeline, grid.axis, v);
  endpoint.validate();
  llm.validate();
  if (text_budget <= kTruncationMarker.size()) throw ConfigError("llm.text_budget is too small");
}

RunConfig run_config_from(const TomlDocument& doc) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.table + "." + f.key] = &f;
  RunConfig config;
  for (const auto& [key, value] : doc) {
    auto it = index.find(key);
    if (it == index.end())
      throw ConfigError("config line " + std::to_string(value.line) + ": unknown key '" + key + "'");
    it->second->set(config, value, key);
  }
  return config;
}

RunConfig parse_run_config(std::string_view text) { return run_config_from(parse_toml(text)); }

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
    throw ConfigError("override '" + std::string(assignment) + "' must look like table.key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  const Field* field = nullptr;
  for (const auto& f : fields())
    if (f.table + "." + f.key == key) field = &f;
  if (!field) throw ConfigError("unknown config key '" + key + "'");
  TomlDocument doc;
  try {
    doc = parse_toml("v = " + value + "\n");
  } catch (const ConfigError&) {
    doc = parse_toml("v = " + quote(value) + "\n");
  }
  field->set(config, doc.at("v"), key);
}

std::string to_toml(const RunConfig& config) {
  std::ostringstream os;
  std::string table;
  for (const auto& f : fields()) {
    if (f.table != table) {
      if (!table.empty()) os << '\n';
      table = f.table;
      os << '[' << table << "]\n";
    }
    os << f.key << " = " << f.render(config) << '\n';
  }
  return os.str();
}

std::optional<std::string> resolve_config_path(const std::optional<std::string>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return explicit_path;
  if (const char* env = std::getenv("FEDTOX_CONFIG"); env && *env) return std::string(env);
  if (std::filesystem::exists("fedtox.toml")) return std::string("fedtox.toml");
  return std::nullopt;
}

RunConfig load_run_config(const std::optional<std::string>& explicit_path) {
  const auto path = resolve_config_path(explicit_path);
  if (!path) return RunConfig{};
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + *path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(*path + ": " + e.what());
  }
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Synth:
      return "synth";
    case Stage::Ingest:
      return "ingest";
    case Stage::Label:
      return "label";
    case Stage::Graph:
      return "graph";
    case Stage::Backbone:
      return "backbone";
    case Stage::Features:
      return "features";
    case Stage::Train:
      return "train";
    case Stage::Grid:
      return "grid";
    case Stage::LlmEval:
      return "llm-eval";
    case Stage::Report:
      return "report";
  }
  return "synth";
}

namespace {

// Keys that change scheduling but never results.
const std::set<std::string>& neutral_keys() {
  static const std::set<std::string> keys = {"run.workdir", "federation.threads", "llm.max_in_flight",
                                             "llm.timeout_seconds", "llm.max_retries"};
  return keys;
}

void stage_selectors(Stage stage, std::set<std::string>& out) {
  switch (stage) {
    case Stage::Synth:
      out.insert("synth.*");
      return;
    case Stage::Ingest:
      out.insert("run.input");
      return;
    case Stage::Label:
      stage_selectors(Stage::Ingest, out);
      out.insert({"corpus.*", "labeling.*"});
      return;
    case Stage::Graph:
      stage_selectors(Stage::Ingest, out);
      out.insert("corpus.*");
      return;
    case Stage::Backbone:
      stage_selectors(Stage::Graph, out);
      out.insert("backbone.*");
      return;
    case Stage::Features:
      stage_selectors(Stage::Graph, out);
      out.insert({"deepwalk.*", "features.*", "federation.seed"});
      return;
    case Stage::Train:
      stage_selectors(Stage::Label, out);
      stage_selectors(Stage::Backbone, out);
      stage_selectors(Stage::Features, out);
      out.insert({"train.*", "federation.*"});
      return;
    case Stage::Grid:
      stage_selectors(Stage::Train, out);
      out.insert("grid.*");
      return;
    case Stage::LlmEval:
      stage_selectors(Stage::Label, out);
      out.insert("llm.*");
      return;
    case Stage::Report:
      stage_selectors(Stage::Grid, out);
      stage_selectors(Stage::LlmEval, out);
      return;
  }
}

}  // namespace

std::string stage_fingerprint(const RunConfig& config, Stage stage) {
  std::set<std::string> selectors;
  stage_selectors(stage, selectors);
  std::string out = "stage=" + std::string(to_string(stage)) + "\n";
  for (const auto& f : fields()) {
    const std::string name = f.table + "." + f.key;
    if (neutral_keys().count(name)) continue;
    if (!selectors.count(name) && !selectors.count(f.table + ".*")) continue;
    out += name + "=" + f.render(config) + "\n";
  }
  return out;
}

std::string stage_hash(const RunConfig& config, Stage stage) { return hex_digest(stage_fingerprint(config, stage)); }

}  // namespace fedtox
