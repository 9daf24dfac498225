#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "artifacts.hpp"
#include "fedtox/convgraph.hpp"
#include "fedtox/corpus.hpp"
#include "fedtox/error.hpp"
#include "fedtox/features.hpp"
#include "fedtox/federation.hpp"
#include "fedtox/graphsage.hpp"
#include "fedtox/labeling.hpp"
#include "fedtox/llm_baseline.hpp"
#include "fedtox/log.hpp"
#include "fedtox/report.hpp"
#include "fedtox/rng.hpp"
#include "fedtox/synth.hpp"

namespace fedtox::cli {

namespace {

// Clears a stage directory so its contents always match the manifest.
fs::path fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

template <typename F>
std::string render(F&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

fs::path synth_corpus(const RunConfig& c) { return stage_dir(c, Stage::Synth) / "corpus.jsonl"; }
fs::path ingested_corpus(const RunConfig& c) { return stage_dir(c, Stage::Ingest) / "corpus.jsonl"; }

std::vector<InstanceCorpus> load_ingested(const RunConfig& config) {
  require_stage(config, Stage::Ingest);
  std::ifstream in(ingested_corpus(config), std::ios::binary);
  if (!in) throw ParseError("cannot read " + ingested_corpus(config).string());
  ParseResult parsed = parse_corpus(in);
  if (!parsed.rejections.empty())
    throw ParseError(ingested_corpus(config).string() + " has " + std::to_string(parsed.rejections.size()) +
                     " invalid records; re-run `fedtox ingest`");
  return std::move(parsed.corpora);
}

std::vector<InstanceCorpus> filtered(const RunConfig& config, const std::vector<InstanceCorpus>& corpora) {
  std::vector<InstanceCorpus> out;
  for (const auto& c : corpora) {
    InstanceCorpus f = filter_corpus(c, config.pipeline.languages, config.pipeline.min_posts);
    if (!f.empty()) out.push_back(std::move(f));
  }
  if (out.empty()) throw ParseError("no conversations left after language and length filtering");
  return out;
}

std::vector<std::string> names_of(const std::vector<InstanceCorpus>& corpora) {
  std::vector<std::string> names;
  for (const auto& c : corpora) names.push_back(c.instance());
  return names;
}

Manifest manifest_for(const RunConfig& config, Stage stage, std::initializer_list<Stage> upstream) {
  Manifest m;
  m.stage = stage;
  m.dir = stage_dir(config, stage);
  m.config_hash = stage_hash(config, stage);
  for (Stage s : upstream) m.upstream[std::string(to_string(s))] = stage_hash(config, s);
  return m;
}

std::vector<ConversationLabel> read_labels(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_labels_csv(in);
}

}  // namespace

void run_synth(const RunConfig& config) {
  config.synth.validate();
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Synth));
  const SynthCorpus corpus = generate(config.synth);
  write_file(synth_corpus(config), render([&](std::ostream& os) {
               for (const auto& t : corpus.toots) write_toot_jsonl(os, t);
             }));
  write_file(dir / "planted.csv", render([&](std::ostream& os) { write_planted_csv(os, corpus.planted); }));
  Manifest m = manifest_for(config, Stage::Synth, {});
  m.outputs = {synth_corpus(config), dir / "planted.csv"};
  write_manifest(config, m);
  std::cout << "synth: " << corpus.toots.size() << " toots, " << corpus.planted.size() << " conversations -> "
            << dir.string() << "\n";
}

void run_ingest(const RunConfig& config) {
  fs::path input = config.input;
  Manifest m = manifest_for(config, Stage::Ingest, {});
  if (input.empty()) {
    require_stage(config, Stage::Synth);
    input = synth_corpus(config);
    m.upstream["synth"] = stage_hash(config, Stage::Synth);
  }
  std::ifstream in(input, std::ios::binary);
  if (!in) throw ParseError("cannot read corpus " + input.string());
  const ParseResult parsed = parse_corpus(in);
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Ingest));
  write_file(ingested_corpus(config), render([&](std::ostream& os) { write_corpus_jsonl(os, parsed.corpora); }));
  write_file(dir / "rejections.csv", render([&](std::ostream& os) { write_rejections_csv(os, parsed.rejections); }));
  const CorpusStats st = corpus_stats(parsed.corpora);
  std::ostringstream stats;
  stats << "instances,conversations,toots,unique_authors,lines_read,records_accepted,conversations_rejected\n"
        << st.instances << ',' << st.conversations << ',' << st.toots << ',' << st.unique_authors << ','
        << parsed.lines_read << ',' << parsed.records_accepted << ',' << parsed.conversations_rejected << '\n';
  write_file(dir / "stats.csv", stats.str());
  m.inputs = {input};
  m.outputs = {ingested_corpus(config), dir / "rejections.csv", dir / "stats.csv"};
  write_manifest(config, m);
  std::cout << "ingest: " << st.conversations << " conversations in " << st.instances << " instances, "
            << parsed.rejections.size() << " rejections\n";
}

void run_label(const RunConfig& config) {
  const auto corpora = filtered(config, load_ingested(config));
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Label));
  const auto stems = write_instance_index(dir, names_of(corpora));
  Manifest m = manifest_for(config, Stage::Label, {Stage::Ingest});
  m.inputs = {ingested_corpus(config)};
  m.outputs = {dir / "instances.csv"};
  std::ostringstream summary;
  summary << "instance,conversations,toxic,root_toxic,reply_mass\n";
  std::size_t total = 0, toxic = 0;
  for (const auto& c : corpora) {
    const auto labels = label_corpus(c, config.pipeline.policy);
    const fs::path out = dir / (stems.at(c.instance()) + ".labels.csv");
    write_file(out, render([&](std::ostream& os) { write_labels_csv(os, labels); }));
    m.outputs.push_back(out);
    std::size_t t = 0, root = 0, mass = 0;
    for (const auto& l : labels) {
      if (l.label == Label::Toxic) ++t;
      if (l.reason == LabelReason::RootToxic) ++root;
      if (l.reason == LabelReason::ReplyMass) ++mass;
    }
    summary << c.instance() << ',' << labels.size() << ',' << t << ',' << root << ',' << mass << '\n';
    total += labels.size();
    toxic += t;
  }
  write_file(dir / "summary.csv", summary.str());
  m.outputs.push_back(dir / "summary.csv");
  write_manifest(config, m);
  std::cout << "label: " << toxic << " of " << total << " conversations toxic\n";
}

void run_graph(const RunConfig& config) {
  const auto corpora = filtered(config, load_ingested(config));
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Graph));
  const auto stems = write_instance_index(dir, names_of(corpora));
  Manifest m = manifest_for(config, Stage::Graph, {Stage::Ingest});
  m.inputs = {ingested_corpus(config)};
  m.outputs = {dir / "instances.csv"};
  std::ostringstream summary;
  summary << "instance,nodes,edges,density\n";
  for (const auto& c : corpora) {
    const ConversationGraph g = build_graph(c);
    const std::string stem = stems.at(c.instance());
    write_file(dir / (stem + ".nodes.csv"), render([&](std::ostream& os) { write_nodes_csv(os, g); }));
    write_file(dir / (stem + ".edges.csv"), render([&](std::ostream& os) { write_edges_csv(os, g); }));
    m.outputs.push_back(dir / (stem + ".nodes.csv"));
    m.outputs.push_back(dir / (stem + ".edges.csv"));
    summary << c.instance() << ',' << g.node_count() << ',' << g.edge_count() << ','
            << density(g) << '\n';
  }
  write_file(dir / "summary.csv", summary.str());
  m.outputs.push_back(dir / "summary.csv");
  write_manifest(config, m);
  std::cout << "graph: " << corpora.size() << " instance graphs\n";
}

void run_backbone(const RunConfig& config) {
  require_stage(config, Stage::Graph);
  const fs::path gdir = stage_dir(config, Stage::Graph);
  const auto index = read_instance_index(gdir);
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Backbone));
  std::vector<std::string> names;
  for (const auto& [inst, stem] : index) names.push_back(inst);
  const auto stems = write_instance_index(dir, names);
  Manifest m = manifest_for(config, Stage::Backbone, {Stage::Graph});
  m.outputs = {dir / "instances.csv"};
  std::ostringstream summary;
  summary << "instance,nodes,edges_before,edges_after,isolated_nodes,degenerate,node_retention,edge_retention,"
             "density_before,density_after\n";
  for (const auto& [inst, gstem] : index) {
    std::istringstream nodes(read_file(gdir / (gstem + ".nodes.csv")));
    std::istringstream edges(read_file(gdir / (gstem + ".edges.csv")));
    m.inputs.push_back(gdir / (gstem + ".nodes.csv"));
    m.inputs.push_back(gdir / (gstem + ".edges.csv"));
    const ConversationGraph g = read_graph_csv(inst, nodes, edges);
    BackboneResult bb;
    if (config.pipeline.backbone) {
      bb = backbone_graph(g, config.pipeline.backbone_delta);
    } else {
      bb.backbone = g;
      bb.retention = retention(g, g);
    }
    const std::string stem = stems.at(inst);
    write_file(dir / (stem + ".nodes.csv"), render([&](std::ostream& os) { write_nodes_csv(os, bb.backbone); }));
    write_file(dir / (stem + ".edges.csv"), render([&](std::ostream& os) { write_edges_csv(os, bb.backbone); }));
    m.outputs.push_back(dir / (stem + ".nodes.csv"));
    m.outputs.push_back(dir / (stem + ".edges.csv"));
    if (!bb.scores.empty()) {
      write_file(dir / (stem + ".scores.csv"),
                 render([&](std::ostream& os) { write_backbone_csv(os, g, bb.scores, bb.backbone); }));
      m.outputs.push_back(dir / (stem + ".scores.csv"));
    }
    const Retention& r = bb.retention;
    summary << inst << ',' << g.node_count() << ',' << g.edge_count() << ',' << bb.backbone.edge_count() << ','
            << bb.isolated_nodes << ',' << (bb.degenerate ? 1 : 0) << ',' << r.node_retention << ','
            << r.edge_retention << ',' << r.density_before << ',' << r.density_after << '\n';
  }
  write_file(dir / "summary.csv", summary.str());
  m.outputs.push_back(dir / "summary.csv");
  write_manifest(config, m);
  std::cout << "backbone: " << index.size() << " instance graphs"
            << (config.pipeline.backbone ? "" : " (backboning disabled)") << "\n";
}

void run_features(const RunConfig& config) {
  config.pipeline.validate();
  const auto corpora = filtered(config, load_ingested(config));
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Features));
  const auto stems = write_instance_index(dir, names_of(corpora));
  Manifest m = manifest_for(config, Stage::Features, {Stage::Ingest});
  m.inputs = {ingested_corpus(config)};
  m.outputs = {dir / "instances.csv"};
  std::size_t dims = 0;
  for (const auto& c : corpora) {
    const FeatureMatrix f = extract_features(c, config.pipeline.features, config.pipeline.federation.seed);
    dims = static_cast<std::size_t>(f.values.cols());
    const fs::path out = dir / (stems.at(c.instance()) + ".features.csv");
    write_file(out, render([&](std::ostream& os) { write_features_csv(os, f); }));
    m.outputs.push_back(out);
  }
  write_manifest(config, m);
  std::cout << "features: " << corpora.size() << " instances, " << dims << " dimensions ("
            << config.pipeline.features.toggles.describe() << ")\n";
}

void run_train(const RunConfig& config) {
  config.pipeline.validate();
  require_stage(config, Stage::Label);
  require_stage(config, Stage::Backbone);
  require_stage(config, Stage::Features);
  const fs::path ldir = stage_dir(config, Stage::Label);
  const fs::path bdir = stage_dir(config, Stage::Backbone);
  const fs::path fdir = stage_dir(config, Stage::Features);
  const auto lindex = read_instance_index(ldir);
  const auto bindex = read_instance_index(bdir);
  const auto findex = read_instance_index(fdir);
  Manifest m = manifest_for(config, Stage::Train, {Stage::Label, Stage::Backbone, Stage::Features});

  std::vector<ClientData> clients;
  for (const auto& [inst, bstem] : bindex) {
    if (!lindex.count(inst) || !findex.count(inst))
      throw ParseError("instance " + inst + " is missing from the label or features stage");
    const fs::path lpath = ldir / (lindex.at(inst) + ".labels.csv");
    const fs::path npath = bdir / (bstem + ".nodes.csv");
    const fs::path epath = bdir / (bstem + ".edges.csv");
    const fs::path fpath = fdir / (findex.at(inst) + ".features.csv");
    m.inputs.insert(m.inputs.end(), {lpath, npath, epath, fpath});

    std::istringstream nodes(read_file(npath)), edges(read_file(epath)), feats(read_file(fpath));
    const ConversationGraph g = read_graph_csv(inst, nodes, edges);
    FeatureMatrix f = read_features_csv(feats);
    if (f.ids != g.nodes()) throw ShapeError("features and graph of " + inst + " disagree on the node order");
    std::map<std::string, Label> by_id;
    for (const auto& l : read_labels(lpath)) by_id[l.conversation_id] = l.label;
    ClientData c;
    c.client_id = inst;
    c.graph = SageGraph::from(g);
    c.features = std::move(f.values);
    for (const auto& id : g.nodes()) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw ParseError("no label for conversation " + id + " of " + inst);
      c.labels.push_back(it->second);
    }
    clients.push_back(std::move(c));
  }

  const auto states = prepare_clients(clients, config.pipeline.federation);
  FederationResult result = run_federation(states, config.pipeline.federation);
  const std::string hash = hex_digest(config.pipeline.fingerprint());
  for (auto& r : result.history) r.config_hash = hash;

  const fs::path dir = fresh_dir(stage_dir(config, Stage::Train));
  write_file(dir / "report.json", federation_json(result, config.pipeline.federation));
  write_file(dir / "clients.csv",
             render([&](std::ostream& os) { write_client_metrics_csv(os, result.final_report()); }));
  write_file(dir / "rounds.csv", render([&](std::ostream& os) { write_rounds_csv(os, result); }));
  write_file(dir / "model.ckpt", render([&](std::ostream& os) { save_checkpoint(os, result.global); }));
  write_file(dir / "summary.md", "## Federated GraphSAGE\n\n" + evaluation_markdown(result.final_report()));
  m.outputs = {dir / "report.json", dir / "clients.csv", dir / "rounds.csv", dir / "model.ckpt", dir / "summary.md"};
  write_manifest(config, m);
  const auto& r = result.final_report();
  std::cout << "train: " << result.eligible_clients << " clients, macro-F1 " << r.macro_f1() << ", toxic precision "
            << r.toxic_precision() << ", toxic recall " << r.toxic_recall() << "\n";
}

void run_grid(const RunConfig& config) {
  const auto corpora = load_ingested(config);
  const GridReport report = run_experiment_grid(corpora, config.grid, config.pipeline);
  const std::string axis(to_string(config.grid.axis));
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Grid) / axis);
  write_file(dir / (axis + ".csv"), render([&](std::ostream& os) { write_grid_csv(os, report); }));
  write_file(dir / (axis + ".cells.csv"), render([&](std::ostream& os) { write_grid_cells_csv(os, report); }));
  write_file(dir / (axis + ".json"), grid_json(report));
  write_file(dir / (axis + ".md"), grid_markdown(report));
  Manifest m = manifest_for(config, Stage::Grid, {Stage::Ingest});
  m.dir = dir;
  m.inputs = {ingested_corpus(config)};
  m.outputs = {dir / (axis + ".csv"), dir / (axis + ".cells.csv"), dir / (axis + ".json"), dir / (axis + ".md")};
  write_manifest(config, m);
  std::size_t failed = 0;
  for (const auto& c : report.cells) failed += c.ok ? 0 : 1;
  std::cout << "grid " << axis << ": " << report.rows.size() << " rows, " << report.cells.size() << " cells, "
            << failed << " failed\n" << grid_markdown(report);
}

void run_llm_eval(const RunConfig& config) {
  config.llm.validate();
  const auto corpora = filtered(config, load_ingested(config));
  require_stage(config, Stage::Label);
  const fs::path ldir = stage_dir(config, Stage::Label);
  const auto lindex = read_instance_index(ldir);
  Manifest m = manifest_for(config, Stage::LlmEval, {Stage::Ingest, Stage::Label});
  m.inputs = {ingested_corpus(config)};

  std::vector<LabeledInstance> instances;
  std::map<std::string, Label> truth;
  for (const auto& c : corpora) {
    if (!lindex.count(c.instance())) continue;
    const fs::path lpath = ldir / (lindex.at(c.instance()) + ".labels.csv");
    m.inputs.push_back(lpath);
    LabeledInstance li = labeled_instance(c, read_labels(lpath), config.text_budget);
    for (const auto& conv : li.conversations) truth[conv.text] = conv.label;
    instances.push_back(std::move(li));
  }

  std::unique_ptr<CompletionTransport> transport;
  if (config.endpoint.base_url == "mock:oracle") {
    transport = std::make_unique<OracleTransport>(truth);
  } else if (config.endpoint.base_url == "mock:nontoxic") {
    transport = std::make_unique<OracleTransport>(truth, std::set<std::string>{}, Label::NonToxic);
  } else {
    transport = make_http_transport(config.endpoint);
  }

  const LlmEvalReport report = run_llm_evaluation(instances, config.llm, *transport);
  std::size_t classified = 0, failures = 0;
  for (const auto& r : report.runs) {
    classified += r.classified;
    failures += r.endpoint_failures;
  }
  if (classified > 0 && failures == classified)
    throw EndpointUnavailable("no completion received from " + config.endpoint.base_url);

  const fs::path dir = fresh_dir(stage_dir(config, Stage::LlmEval));
  write_file(dir / "llm_eval.json", llm_json(report));
  write_file(dir / "llm_eval.csv", render([&](std::ostream& os) { write_llm_csv(os, report); }));
  write_file(dir / "summary.md", "## LLM few-shot baseline\n\n" + llm_markdown(report));
  m.outputs = {dir / "llm_eval.json", dir / "llm_eval.csv", dir / "summary.md"};
  write_manifest(config, m);
  std::cout << llm_markdown(report);
}

void run_report(const RunConfig& config) {
  const fs::path dir = fresh_dir(stage_dir(config, Stage::Report));
  Manifest m = manifest_for(config, Stage::Report, {});
  std::string md = "# fedtox report\n\n";
  std::string grids, ablation;
  const fs::path train = stage_dir(config, Stage::Train) / "summary.md";
  if (fs::exists(train)) {
    md += read_file(train) + "\n";
    m.inputs.push_back(train);
  }
  const fs::path gdir = stage_dir(config, Stage::Grid);
  for (GridAxis axis : {GridAxis::TrainSize, GridAxis::ConvLength, GridAxis::ClientsPerRound,
                        GridAxis::ToxicityThreshold, GridAxis::FeatureAblation}) {
    const std::string name(to_string(axis));
    const fs::path csv = gdir / name / (name + ".csv");
    const fs::path table = gdir / name / (name + ".md");
    if (!fs::exists(csv) || !fs::exists(table)) continue;
    m.inputs.insert(m.inputs.end(), {csv, table});
    md += "## Grid: " + name + "\n\n" + read_file(table) + "\n";
    std::string body = read_file(csv);
    const auto nl = body.find('\n');
    std::string& target = axis == GridAxis::FeatureAblation ? ablation : grids;
    if (target.empty()) target = body.substr(0, nl + 1);
    target += body.substr(nl + 1);
  }
  const fs::path llm = stage_dir(config, Stage::LlmEval) / "summary.md";
  if (fs::exists(llm)) {
    md += read_file(llm) + "\n";
    m.inputs.push_back(llm);
  }
  if (m.inputs.empty()) throw ParseError("nothing to report; run train, grid or llm-eval first");
  write_file(dir / "summary.md", md);
  m.outputs.push_back(dir / "summary.md");
  if (!grids.empty()) {
    write_file(dir / "grids.csv", grids);
    m.outputs.push_back(dir / "grids.csv");
  }
  if (!ablation.empty()) {
    write_file(dir / "ablation.csv", ablation);
    m.outputs.push_back(dir / "ablation.csv");
  }
  write_manifest(config, m);
  std::cout << md;
}

}  // namespace fedtox::cli
