#include "artifacts.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedtox/error.hpp"
#include "fedtox/rng.hpp"

namespace fedtox::cli {

fs::path stage_dir(const RunConfig& config, Stage stage) { return fs::path(config.workdir) / std::string(to_string(stage)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write " + path.string());
  out << content;
  if (!out) throw ParseError("write failed for " + path.string());
}

std::string file_digest(const fs::path& path) { return hex_digest(read_file(path)); }

std::string file_stem(const std::string& instance) {
  std::string out;
  for (char c : instance) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    out += ok ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

namespace {

std::string display_path(const RunConfig& config, const fs::path& p) {
  const auto rel = p.lexically_relative(config.workdir);
  if (!rel.empty() && rel.native().rfind("..", 0) != 0) return rel.generic_string();
  return p.generic_string();
}

}  // namespace

void write_manifest(const RunConfig& config, const Manifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "fedtox";
  j["version"] = FEDTOX_VERSION;
  j["stage"] = std::string(to_string(m.stage));
  j["config_hash"] = m.config_hash;
  j["seeds"] = {{"synth", config.synth.seed},
                {"federation", config.pipeline.federation.seed},
                {"grid_seeds", config.grid.n_seeds},
                {"llm", config.llm.seeds}};
  j["upstream"] = m.upstream;
  auto files = [&](const std::vector<fs::path>& paths) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) arr.push_back({{"path", display_path(config, p)}, {"digest", file_digest(p)}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  j["fingerprint"] = stage_fingerprint(config, m.stage);
  j["config"] = to_toml(config);
  write_file(m.dir / "manifest.json", j.dump(2) + "\n");
}

std::string require_stage(const RunConfig& config, Stage stage) {
  return require_manifest(stage_dir(config, stage), stage, stage_hash(config, stage));
}

std::string require_manifest(const fs::path& dir, Stage stage, const std::string& expected) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path))
    throw ParseError("missing " + path.string() + "; run `fedtox " + std::string(to_string(stage)) + "` first");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("unreadable manifest " + path.string() + ": " + e.what());
  }
  const std::string recorded = j.value("config_hash", std::string());
  if (recorded != expected)
    throw ConfigError("stale artifacts in " + dir.string() + ": produced with config hash " +
                      recorded + " but the current configuration gives " + expected + "; re-run `fedtox " +
                      std::string(to_string(stage)) + "`");
  return recorded;
}

std::map<std::string, std::string> read_instance_index(const fs::path& dir) {
  std::istringstream in(read_file(dir / "instances.csv"));
  std::map<std::string, std::string> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError("bad row in " + (dir / "instances.csv").string());
    std::string instance = line.substr(0, comma);
    if (instance.size() >= 2 && instance.front() == '"') {
      instance = instance.substr(1, instance.size() - 2);
      std::string unq;
      for (std::size_t i = 0; i < instance.size(); ++i) {
        unq += instance[i];
        if (instance[i] == '"') ++i;
      }
      instance = unq;
    }
    out.emplace(instance, line.substr(comma + 1));
  }
  return out;
}

std::map<std::string, std::string> write_instance_index(const fs::path& dir,
                                                        const std::vector<std::string>& instances) {
  std::string s = "instance,stem\n";
  std::map<std::string, std::string> used;
  std::map<std::string, std::string> mapping;
  for (const auto& inst : instances) {
    std::string stem = file_stem(inst);
    for (int k = 2; used.count(stem); ++k) stem = file_stem(inst) + "-" + std::to_string(k);
    used.emplace(stem, inst);
    mapping.emplace(inst, stem);
    std::string field = inst;
    if (field.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : field) {
        if (c == '"') q += '"';
        q += c;
      }
      field = q + "\"";
    }
    s += field + "," + stem + "\n";
  }
  write_file(dir / "instances.csv", s);
  return mapping;
}

}  // namespace fedtox::cli
