#include "fedtox/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>
#include <thread>

#include "csv_util.hpp"
#include "fedtox/error.hpp"
#include "fedtox/log.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

namespace {

std::size_t test_count(std::size_t n, double train_ratio) {
  const auto t = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - train_ratio)));
  return std::clamp<std::size_t>(t, 1, n - 1);
}

}  // namespace

SplitResult split_client(std::span<const Label> labels, double train_ratio, std::optional<std::size_t> train_cap,
                         std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train ratio must be in (0,1)");
  if (train_cap && *train_cap == 0) throw ConfigError("train cap must be >= 1");
  const std::size_t n = labels.size();
  if (n < 2) throw ClientIneligible("needs >= 2 labeled nodes for a nonempty train and test set, has " + std::to_string(n));

  Rng rng(derive_seed({seed, 0x5b117}));
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<int>(labels[i])].push_back(i);

  SplitResult out;
  std::vector<std::size_t> train_by_class[2];
  if (by_class[0].size() >= 2 && by_class[1].size() >= 2) {
    out.stratified = true;
    for (int c = 0; c < 2; ++c) {
      rng.shuffle(by_class[c]);
      const std::size_t nt = test_count(by_class[c].size(), train_ratio);
      out.test_mask.insert(out.test_mask.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(nt));
      train_by_class[c].assign(by_class[c].begin() + static_cast<std::ptrdiff_t>(nt), by_class[c].end());
    }
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    rng.shuffle(all);
    const std::size_t nt = test_count(n, train_ratio);
    out.test_mask.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(nt));
    for (auto it = all.begin() + static_cast<std::ptrdiff_t>(nt); it != all.end(); ++it)
      train_by_class[static_cast<int>(labels[*it])].push_back(*it);
  }

  const std::size_t train_total = train_by_class[0].size() + train_by_class[1].size();
  if (train_cap) {
    if (train_total < *train_cap)
      throw ClientIneligible("only " + std::to_string(train_total) + " training nodes for a cap of " +
                             std::to_string(*train_cap));
    if (train_total > *train_cap) {
      // Largest-remainder quotas; ties go to the toxic class.
      std::size_t quota[2];
      double remainder[2];
      std::size_t assigned = 0;
      for (int c = 0; c < 2; ++c) {
        const double exact = static_cast<double>(*train_cap) * static_cast<double>(train_by_class[c].size()) /
                             static_cast<double>(train_total);
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
      }
      while (assigned < *train_cap) {
        int c = remainder[0] >= remainder[1] ? 0 : 1;
        if (quota[c] >= train_by_class[c].size()) c = 1 - c;
        ++quota[c];
        remainder[c] = -1.0;
        ++assigned;
      }
      for (int c = 0; c < 2; ++c) train_by_class[c].resize(quota[c]);
    }
  }
  for (int c = 0; c < 2; ++c)
    out.train_mask.insert(out.train_mask.end(), train_by_class[c].begin(), train_by_class[c].end());
  std::sort(out.train_mask.begin(), out.train_mask.end());
  std::sort(out.test_mask.begin(), out.test_mask.end());
  if (out.train_mask.empty()) throw ClientIneligible("empty training set");
  return out;
}

void FederationConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (clients_per_round < 1) throw ConfigError("clients_per_round must be >= 1");
  if (train_cap && *train_cap < 1) throw ConfigError("train_cap must be >= 1");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train_ratio must be in (0,1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  train.validate();
  SageShape{1, hidden, depth}.validate();
}

std::string FederationConfig::fingerprint() const {
  std::ostringstream os;
  os << "rounds=" << rounds << ";clients_per_round=" << clients_per_round
     << ";train_cap=" << (train_cap ? std::to_string(*train_cap) : "none") << ";local_epochs=" << train.local_epochs
     << ";lr=" << detail::format_double(train.learning_rate) << ";batch=" << train.batch_size
     << ";optimizer=" << (train.optimizer == OptimizerKind::Adam ? "adam" : "sgd")
     << ";beta1=" << detail::format_double(train.beta1) << ";beta2=" << detail::format_double(train.beta2)
     << ";eps=" << detail::format_double(train.epsilon) << ";hidden=" << hidden << ";depth=" << depth
     << ";train_ratio=" << detail::format_double(train_ratio) << ";eval_every=" << eval_every << ";seed=" << seed;
  return os.str();
}

std::uint64_t split_seed(std::uint64_t seed, const std::string& client_id) noexcept {
  return derive_seed({seed, hash_string(client_id), 0x59117});
}

std::vector<std::size_t> eligible_clients(std::span<const ClientData> clients, const FederationConfig& config) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    try {
      split_client(clients[i].labels, config.train_ratio, config.train_cap, split_seed(config.seed, clients[i].client_id));
      out.push_back(i);
    } catch (const ClientIneligible&) {
    }
  }
  if (out.empty())
    throw ConfigError("no eligible clients among " + std::to_string(clients.size()) +
                      (config.train_cap ? " for train cap " + std::to_string(*config.train_cap) : std::string()));
  return out;
}

ClientState make_client_state(const ClientData& data, const SplitResult& split) {
  if (static_cast<std::size_t>(data.features.rows()) != data.graph.node_count || data.labels.size() != data.graph.node_count)
    throw ShapeError("client " + data.client_id + " has misaligned graph, features and labels");
  ClientState s;
  s.client_id = data.client_id;
  s.graph = data.graph;
  s.labels = data.labels;
  s.train_mask = split.train_mask;
  s.test_mask = split.test_mask;
  s.stratified = split.stratified;
  s.normalizer = fit_normalizer(data.features, s.train_mask);
  s.features = apply_normalizer(s.normalizer, data.features);
  return s;
}

std::vector<ClientState> prepare_clients(std::span<const ClientData> clients, const FederationConfig& config) {
  std::vector<ClientState> out;
  for (std::size_t i : eligible_clients(clients, config)) {
    const auto& c = clients[i];
    auto split = split_client(c.labels, config.train_ratio, config.train_cap, split_seed(config.seed, c.client_id));
    if (!split.stratified) log_warning("client " + c.client_id + ": too few nodes per class, random split");
    out.push_back(make_client_state(c, split));
  }
  return out;
}

std::vector<std::size_t> sample_round_clients(std::size_t eligible_count, std::size_t k, std::size_t round_index,
                                              std::uint64_t seed) {
  if (k > eligible_count) {
    log_warning("clients_per_round " + std::to_string(k) + " exceeds " + std::to_string(eligible_count) +
                " eligible clients; using all");
    k = eligible_count;
  }
  Rng rng(derive_seed({seed, round_index, 0x5a3b1e}));
  auto picked = rng.sample_indices(eligible_count, k);
  std::sort(picked.begin(), picked.end());
  return picked;
}

SageModel fedavg_aggregate(std::span<const SageModel> models, std::span<const double> weights) {
  if (models.empty()) throw ShapeError("nothing to aggregate");
  if (models.size() != weights.size()) throw ShapeError("one weight per model is required");
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidWeight("aggregation weight " + detail::format_double(w));
  for (const auto& m : models)
    if (!(m.shape() == models.front().shape())) throw ShapeError("models have different shapes");

  // Running weighted mean: exact for a single model and for identical models.
  SageModel out = models.front();
  double total = weights.front();
  for (std::size_t i = 1; i < models.size(); ++i) {
    total += weights[i];
    const double a = weights[i] / total;
    out.parameters() += a * (models[i].parameters() - out.parameters());
  }
  return out;
}

EvaluationReport evaluate(const SageModel& model, std::span<const ClientState> clients) {
  EvaluationReport report;
  Confusion pooled;
  double f1_sum = 0.0;
  for (const auto& c : clients) {
    if (c.test_mask.empty()) continue;
    auto pred = predict(c.graph, c.features, model, c.test_mask);
    Confusion cm;
    for (std::size_t i = 0; i < c.test_mask.size(); ++i) cm.add(c.labels[c.test_mask[i]], pred[i]);
    pooled += cm;
    ClientEvaluation ce{c.client_id, c.test_mask.size(), compute_metrics(cm)};
    f1_sum += ce.metrics.macro_f1;
    report.per_client.push_back(std::move(ce));
  }
  if (pooled.total() == 0) throw NoTestData("no test nodes across " + std::to_string(clients.size()) + " clients");
  report.pooled = compute_metrics(pooled);
  report.client_mean_macro_f1 = f1_sum / static_cast<double>(report.per_client.size());
  if (report.pooled.toxic_class_absent) report.warnings.push_back("toxic class absent from pooled test set");
  if (report.pooled.nontoxic_class_absent) report.warnings.push_back("non-toxic class absent from pooled test set");
  if (report.pooled.toxic_precision_undefined)
    report.warnings.push_back("no toxic predictions; toxic precision reported as 0");
  for (const auto& w : report.warnings) log_warning(w);
  return report;
}

namespace {

struct ClientUpdate {
  bool ok = false;
  SageModel model;
  double first_loss = 0.0;
};

ClientUpdate train_client(const ClientState& c, const SageModel& global, const FederationConfig& config,
                          std::size_t round) {
  ClientUpdate u;
  try {
    auto r = train_local(c.graph, c.features, c.labels, c.train_mask, global, config.train,
                         derive_seed({config.seed, round, hash_string(c.client_id)}));
    u.ok = true;
    u.first_loss = r.losses.front();
    u.model = std::move(r.model);
  } catch (const TrainingDiverged& e) {
    log_warning("round " + std::to_string(round) + ", client " + c.client_id + " skipped: " + e.what());
  }
  return u;
}

}  // namespace

FederationResult run_federation(std::span<const ClientState> clients, const FederationConfig& config) {
  config.validate();
  if (clients.empty()) throw ConfigError("run_federation needs at least one eligible client");
  const auto input_dim = static_cast<std::size_t>(clients.front().features.cols());
  for (const auto& c : clients)
    if (static_cast<std::size_t>(c.features.cols()) != input_dim) throw ShapeError("clients disagree on feature dimension");

  const SageShape shape{input_dim, config.hidden, config.depth};
  const std::string config_hash = hex_digest(config.fingerprint());

  FederationResult result;
  result.eligible_clients = clients.size();
  result.initial = SageModel::initialize(shape, derive_seed({config.seed, 0x1417}));
  result.global = result.initial;

  auto record_eval = [&](std::size_t round) {
    EvaluationReport r = evaluate(result.global, clients);
    r.round = round;
    r.seed = config.seed;
    r.config_hash = config_hash;
    result.history.push_back(std::move(r));
  };

  for (std::size_t round = 0; round < config.rounds; ++round) {
    const auto picked = sample_round_clients(clients.size(), config.clients_per_round, round, config.seed);
    std::vector<ClientUpdate> updates(picked.size());
    if (config.threads <= 1 || picked.size() <= 1) {
      for (std::size_t i = 0; i < picked.size(); ++i) updates[i] = train_client(clients[picked[i]], result.global, config, round);
    } else {
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t i = next++; i < picked.size(); i = next++)
          updates[i] = train_client(clients[picked[i]], result.global, config, round);
      };
      std::vector<std::future<void>> pool;
      const std::size_t n_workers = std::min(config.threads, picked.size());
      for (std::size_t w = 0; w < n_workers; ++w) pool.push_back(std::async(std::launch::async, worker));
      for (auto& f : pool) f.get();
    }

    RoundRecord rec;
    rec.round = round;
    std::vector<SageModel> models;
    std::vector<double> weights;
    double loss_acc = 0.0;
    for (std::size_t i = 0; i < picked.size(); ++i) {
      const auto& c = clients[picked[i]];
      if (!updates[i].ok) {
        rec.skipped.push_back(c.client_id);
        continue;
      }
      rec.participants.push_back(c.client_id);
      const double w = static_cast<double>(c.train_mask.size());
      loss_acc += w * updates[i].first_loss;
      weights.push_back(w);
      models.push_back(std::move(updates[i].model));
    }
    if (models.empty()) throw TrainingDiverged("every sampled client diverged in round " + std::to_string(round));
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    rec.mean_loss = loss_acc / wsum;
    result.global = fedavg_aggregate(models, weights);
    result.rounds.push_back(std::move(rec));

    if (config.eval_every > 0 && (round + 1) % config.eval_every == 0 && round + 1 < config.rounds)
      record_eval(round + 1);
  }
  record_eval(config.rounds);
  return result;
}

}  // namespace fedtox
