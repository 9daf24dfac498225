#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fedtox/config.hpp"
#include "fedtox/error.hpp"
#include "fedtox/log.hpp"

namespace {

using fedtox::RunConfig;
using Applier = std::function<void(RunConfig&)>;

// Registers a typed option whose value is copied into the config only when given.
template <typename T, typename Set>
void option(CLI::App* app, std::vector<Applier>& appliers, const std::string& name, const std::string& help, Set set) {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(name, *value, help);
  appliers.push_back([opt, value, set](RunConfig& c) {
    if (opt->count() > 0) set(c, *value);
  });
}

void federation_options(CLI::App* app, std::vector<Applier>& a) {
  using std::size_t;
  option<size_t>(app, a, "--rounds", "communication rounds",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.rounds = v; });
  option<size_t>(app, a, "--clients-per-round", "clients sampled per round",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.clients_per_round = v; });
  option<size_t>(app, a, "--train-cap", "training nodes per client, 0 = uncapped", [](RunConfig& c, size_t v) {
    c.pipeline.federation.train_cap = v == 0 ? std::nullopt : std::optional<size_t>(v);
  });
  option<size_t>(app, a, "--local-epochs", "local epochs per round",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.train.local_epochs = v; });
  option<double>(app, a, "--lr", "local learning rate",
                 [](RunConfig& c, double v) { c.pipeline.federation.train.learning_rate = v; });
  option<size_t>(app, a, "--batch-size", "graphs per optimizer step",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.train.batch_size = v; });
  option<std::string>(app, a, "--optimizer", "adam or sgd", [](RunConfig& c, const std::string& v) {
    fedtox::apply_override(c, "train.optimizer=" + v);
  });
  option<size_t>(app, a, "--hidden", "hidden units per layer",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.hidden = v; });
  option<size_t>(app, a, "--depth", "GraphSAGE layers", [](RunConfig& c, size_t v) { c.pipeline.federation.depth = v; });
  option<double>(app, a, "--train-ratio", "per-client training fraction",
                 [](RunConfig& c, double v) { c.pipeline.federation.train_ratio = v; });
  option<size_t>(app, a, "--eval-every", "evaluate every n rounds, 0 = final only",
                 [](RunConfig& c, size_t v) { c.pipeline.federation.eval_every = v; });
  option<size_t>(app, a, "--threads", "worker threads", [](RunConfig& c, size_t v) { c.pipeline.federation.threads = v; });
  option<std::uint64_t>(app, a, "--seed", "federation seed",
                        [](RunConfig& c, std::uint64_t v) { c.pipeline.federation.seed = v; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated toxic-conversation detection pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", FEDTOX_VERSION);

  std::optional<std::string> config_path;
  std::string workdir;
  std::vector<std::string> overrides;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "config file (default: $FEDTOX_CONFIG, then ./fedtox.toml)");
  app.add_option("-w,--workdir", workdir, "artifact directory");
  app.add_option("--set", overrides, "override a config key, e.g. --set labeling.thr_root=0.5");
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  std::vector<Applier> appliers;
  using Run = void (*)(const RunConfig&);
  std::vector<std::pair<CLI::App*, Run>> commands;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with planted labels");
  option<std::uint64_t>(synth, appliers, "--synth-seed", "generator seed",
                        [](RunConfig& c, std::uint64_t v) { c.synth.seed = v; });
  option<std::size_t>(synth, appliers, "--instances", "number of instances",
                      [](RunConfig& c, std::size_t v) { c.synth.n_instances = v; });
  option<double>(synth, appliers, "--signal", "signal strength in [0,1]",
                 [](RunConfig& c, double v) { c.synth.signal_strength = v; });
  option<double>(synth, appliers, "--prevalence", "planted toxic fraction",
                 [](RunConfig& c, double v) { c.synth.toxic_prevalence = v; });
  option<double>(synth, appliers, "--shared-user-rate", "author reuse rate",
                 [](RunConfig& c, double v) { c.synth.shared_user_rate = v; });
  commands.emplace_back(synth, &fedtox::cli::run_synth);

  auto* ingest = app.add_subcommand("ingest", "parse and validate a line-delimited JSON corpus");
  option<std::string>(ingest, appliers, "-i,--input", "corpus file (default: synth output)",
                      [](RunConfig& c, const std::string& v) { c.input = v; });
  commands.emplace_back(ingest, &fedtox::cli::run_ingest);

  auto* label = app.add_subcommand("label", "label conversations under the moderation policy");
  option<double>(label, appliers, "--thr-root", "toxicity threshold",
                 [](RunConfig& c, double v) { c.pipeline.policy.thr_root = v; });
  commands.emplace_back(label, &fedtox::cli::run_label);

  commands.emplace_back(app.add_subcommand("graph", "build per-instance conversation graphs"), &fedtox::cli::run_graph);

  auto* backbone = app.add_subcommand("backbone", "extract noise-corrected backbones");
  option<double>(backbone, appliers, "--delta", "significance multiplier",
                 [](RunConfig& c, double v) { c.pipeline.backbone_delta = v; });
  commands.emplace_back(backbone, &fedtox::cli::run_backbone);

  auto* features = app.add_subcommand("features", "extract conversation feature vectors");
  option<std::string>(features, appliers, "--groups", "enabled feature groups, e.g. DW+Auth+Sent+Conv",
                      [](RunConfig& c, const std::string& v) { c.pipeline.features.toggles = fedtox::parse_toggles(v); });
  commands.emplace_back(features, &fedtox::cli::run_features);

  auto* train = app.add_subcommand("train", "run the FedAvg simulation on stage artifacts");
  federation_options(train, appliers);
  commands.emplace_back(train, &fedtox::cli::run_train);

  auto* grid = app.add_subcommand("grid", "re-run the pipeline over one parameter axis");
  federation_options(grid, appliers);
  option<std::string>(grid, appliers, "--axis",
                      "train-size | conv-length | clients-per-round | toxicity-threshold | ablation",
                      [](RunConfig& c, const std::string& v) { c.grid.axis = fedtox::parse_axis(v); });
  option<std::vector<std::string>>(grid, appliers, "--values", "comma-separated axis values",
                                   [](RunConfig& c, const std::vector<std::string>& v) { c.grid.values = v; });
  option<std::size_t>(grid, appliers, "--n-seeds", "seeds per cell",
                      [](RunConfig& c, std::size_t v) { c.grid.n_seeds = v; });
  commands.emplace_back(grid, &fedtox::cli::run_grid);
  for (const auto& opt : grid->get_options())
    if (opt->get_name() == "--values") opt->delimiter(',');

  auto* llm = app.add_subcommand("llm-eval", "evaluate the few-shot LLM baselines");
  option<std::string>(llm, appliers, "--endpoint", "generation server base URL",
                      [](RunConfig& c, const std::string& v) { c.endpoint.base_url = v; });
  option<std::string>(llm, appliers, "--model", "model name", [](RunConfig& c, const std::string& v) { c.endpoint.model = v; });
  option<std::vector<std::string>>(llm, appliers, "--setup", "local | local-global | global (repeatable)",
                                   [](RunConfig& c, const std::vector<std::string>& v) {
                                     c.llm.setups.clear();
                                     for (const auto& s : v) c.llm.setups.push_back(fedtox::parse_setup(s));
                                   });
  option<std::vector<std::uint64_t>>(llm, appliers, "--seeds", "sampling seeds",
                                     [](RunConfig& c, const std::vector<std::uint64_t>& v) { c.llm.seeds = v; });
  option<std::size_t>(llm, appliers, "--test-size", "local test conversations per class",
                      [](RunConfig& c, std::size_t v) { c.llm.local_test_per_class = v; });
  option<std::size_t>(llm, appliers, "--global-test-size", "global test conversations per class",
                      [](RunConfig& c, std::size_t v) { c.llm.global_test_per_class = v; });
  option<std::size_t>(llm, appliers, "--fewshot-size", "few-shot examples per class",
                      [](RunConfig& c, std::size_t v) { c.llm.fewshot_per_class = v; });
  option<std::size_t>(llm, appliers, "--instances", "instances sampled per seed",
                      [](RunConfig& c, std::size_t v) { c.llm.n_instances = v; });
  commands.emplace_back(llm, &fedtox::cli::run_llm_eval);
  for (const auto& opt : llm->get_options()) {
    const auto& n = opt->get_name();
    if (n == "--setup" || n == "--seeds") opt->delimiter(',');
  }

  commands.emplace_back(app.add_subcommand("report", "collect summaries into Markdown and CSV tables"),
                        &fedtox::cli::run_report);
  commands.emplace_back(app.add_subcommand("config", "print the effective configuration as TOML"),
                        [](const RunConfig& c) { std::cout << fedtox::to_toml(c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedtox::exit_code_for(fedtox::ErrorKind::Config);
  }

  if (verbose)
    fedtox::set_log_sink([](fedtox::LogLevel level, const std::string& msg) {
      std::cerr << (level == fedtox::LogLevel::Warning ? "warning: " : "info: ") << msg << "\n";
    });

  try {
    RunConfig config = fedtox::load_run_config(config_path);
    for (const auto& o : overrides) fedtox::apply_override(config, o);
    if (!workdir.empty()) config.workdir = workdir;
    for (const auto& apply : appliers) apply(config);
    config.validate();
    for (const auto& [sub, run] : commands)
      if (sub->parsed()) run(config);
    return 0;
  } catch (const fedtox::Error& e) {
    std::cerr << "fedtox: " << e.what() << "\n";
    return fedtox::exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "fedtox: " << e.what() << "\n";
    return fedtox::exit_code_for(fedtox::ErrorKind::Data);
  }
}
