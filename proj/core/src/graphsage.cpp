#include "fedtox/graphsage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "fedtox/error.hpp"
#include "fedtox/rng.hpp"

namespace fedtox {

void SageShape::validate() const {
  if (input_dim < 1) throw ConfigError("GraphSAGE input dimension must be >= 1");
  if (hidden < 1) throw ConfigError("GraphSAGE hidden width must be >= 1");
  if (depth < 1) throw ConfigError("GraphSAGE depth must be >= 1");
}

std::size_t SageShape::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden;
    n += 2 * hidden * in + hidden;
  }
  return n + kNumClasses * hidden + kNumClasses;
}

SageModel::SageModel(const SageShape& shape)
    : shape_(shape), params_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.parameter_count()))) {
  shape_.validate();
}

SageModel SageModel::initialize(const SageShape& shape, std::uint64_t seed) {
  SageModel m(shape);
  Rng rng(derive_seed({seed, 0x5a6e}));
  auto fill = [&](MatrixView w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
  };
  for (std::size_t l = 0; l < shape.depth; ++l) {
    fill(m.w_self(l));
    fill(m.w_neigh(l));
  }
  fill(m.w_out());
  return m;
}

std::size_t SageModel::layer_offset(std::size_t layer) const noexcept {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += 2 * shape_.hidden * layer_in(l) + shape_.hidden;
  return off;
}

std::size_t SageModel::head_offset() const noexcept { return layer_offset(shape_.depth); }

namespace {
inline Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
}  // namespace

SageModel::MatrixView SageModel::w_self(std::size_t l) {
  return MatrixView(params_.data() + layer_offset(l), idx(shape_.hidden), idx(layer_in(l)));
}
SageModel::MatrixView SageModel::w_neigh(std::size_t l) {
  return MatrixView(params_.data() + layer_offset(l) + shape_.hidden * layer_in(l), idx(shape_.hidden),
                    idx(layer_in(l)));
}
SageModel::VectorView SageModel::bias(std::size_t l) {
  return VectorView(params_.data() + layer_offset(l) + 2 * shape_.hidden * layer_in(l), idx(shape_.hidden));
}
SageModel::MatrixView SageModel::w_out() {
  return MatrixView(params_.data() + head_offset(), idx(kNumClasses), idx(shape_.hidden));
}
SageModel::VectorView SageModel::b_out() {
  return VectorView(params_.data() + head_offset() + kNumClasses * shape_.hidden, idx(kNumClasses));
}
SageModel::ConstMatrixView SageModel::w_self(std::size_t l) const {
  return ConstMatrixView(params_.data() + layer_offset(l), idx(shape_.hidden), idx(layer_in(l)));
}
SageModel::ConstMatrixView SageModel::w_neigh(std::size_t l) const {
  return ConstMatrixView(params_.data() + layer_offset(l) + shape_.hidden * layer_in(l), idx(shape_.hidden),
                         idx(layer_in(l)));
}
SageModel::ConstVectorView SageModel::bias(std::size_t l) const {
  return ConstVectorView(params_.data() + layer_offset(l) + 2 * shape_.hidden * layer_in(l), idx(shape_.hidden));
}
SageModel::ConstMatrixView SageModel::w_out() const {
  return ConstMatrixView(params_.data() + head_offset(), idx(kNumClasses), idx(shape_.hidden));
}
SageModel::ConstVectorView SageModel::b_out() const {
  return ConstVectorView(params_.data() + head_offset() + kNumClasses * shape_.hidden, idx(kNumClasses));
}

SageGraph SageGraph::from(const ConversationGraph& graph) {
  SageGraph g;
  g.node_count = graph.node_count();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * graph.edge_count());
  for (NodeId v = 0; v < graph.node_count(); ++v) {
    const auto& nbrs = graph.neighbors(v);
    if (nbrs.empty()) continue;
    const double w = 1.0 / static_cast<double>(nbrs.size());
    for (const auto& nb : nbrs) triplets.emplace_back(idx(v), idx(nb.node), w);
  }
  g.mean_adjacency.resize(idx(g.node_count), idx(g.node_count));
  g.mean_adjacency.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

SageGraph SageGraph::edgeless(std::size_t n) {
  SageGraph g;
  g.node_count = n;
  g.mean_adjacency.resize(idx(n), idx(n));
  return g;
}

namespace {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;      // H^{l-1}
  std::vector<Eigen::MatrixXd> aggregates;  // mean over neighbours of H^{l-1}
  std::vector<Eigen::MatrixXd> pre;         // Z^l
  Eigen::MatrixXd last_hidden;
  Eigen::MatrixXd logits;
};

void check_shapes(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model) {
  if (static_cast<std::size_t>(features.rows()) != graph.node_count)
    throw ShapeError("feature rows (" + std::to_string(features.rows()) + ") != graph nodes (" +
                     std::to_string(graph.node_count) + ")");
  if (static_cast<std::size_t>(features.cols()) != model.shape().input_dim)
    throw ShapeError("feature columns (" + std::to_string(features.cols()) + ") != model input dim (" +
                     std::to_string(model.shape().input_dim) + ")");
}

ForwardCache run_forward(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model) {
  check_shapes(graph, features, model);
  ForwardCache cache;
  const std::size_t depth = model.shape().depth;
  cache.inputs.reserve(depth);
  cache.aggregates.reserve(depth);
  cache.pre.reserve(depth);

  Eigen::MatrixXd h = features;
  for (std::size_t l = 0; l < depth; ++l) {
    Eigen::MatrixXd agg = graph.mean_adjacency * h;
    Eigen::MatrixXd z(h.rows(), idx(model.shape().hidden));
    z.noalias() = h * model.w_self(l).transpose();
    z.noalias() += agg * model.w_neigh(l).transpose();
    z.rowwise() += model.bias(l).transpose();
    cache.inputs.push_back(std::move(h));
    cache.aggregates.push_back(std::move(agg));
    h = z.cwiseMax(0.0);
    cache.pre.push_back(std::move(z));
  }
  cache.logits.resize(h.rows(), idx(kNumClasses));
  cache.logits.noalias() = h * model.w_out().transpose();
  cache.logits.rowwise() += model.b_out().transpose();
  cache.last_hidden = std::move(h);
  return cache;
}

std::vector<std::size_t> as_set(std::span<const std::size_t> mask, std::size_t n) {
  std::vector<std::size_t> m(mask.begin(), mask.end());
  std::sort(m.begin(), m.end());
  m.erase(std::unique(m.begin(), m.end()), m.end());
  if (!m.empty() && m.back() >= n) throw ShapeError("mask index out of range");
  return m;
}

}  // namespace

Eigen::MatrixXd forward(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model) {
  return run_forward(graph, features, model).logits;
}

LossAndGrads loss_and_grads(const SageGraph& graph, const Eigen::MatrixXd& features, std::span<const Label> labels,
                            std::span<const std::size_t> mask, const SageModel& model) {
  if (mask.empty()) throw EmptyMask("loss needs at least one masked node");
  if (labels.size() != graph.node_count) throw ShapeError("labels must cover every node");
  const auto nodes = as_set(mask, graph.node_count);
  ForwardCache cache = run_forward(graph, features, model);

  const double inv_m = 1.0 / static_cast<double>(nodes.size());
  Eigen::MatrixXd dlogits = Eigen::MatrixXd::Zero(cache.logits.rows(), cache.logits.cols());
  double loss = 0.0;
  for (std::size_t v : nodes) {
    const Eigen::Index r = idx(v);
    const double a = cache.logits(r, 0);
    const double b = cache.logits(r, 1);
    const double mx = std::max(a, b);
    const double ea = std::exp(a - mx);
    const double eb = std::exp(b - mx);
    const double lse = mx + std::log(ea + eb);
    const int y = static_cast<int>(labels[v]);
    loss += lse - cache.logits(r, y);
    dlogits(r, 0) = ea / (ea + eb) * inv_m;
    dlogits(r, 1) = eb / (ea + eb) * inv_m;
    dlogits(r, y) -= inv_m;
  }
  loss *= inv_m;

  LossAndGrads out{loss, SageModel(model.shape())};
  SageModel& g = out.gradients;
  g.w_out().noalias() = dlogits.transpose() * cache.last_hidden;
  g.b_out() = dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dh = dlogits * model.w_out();
  for (std::size_t l = model.shape().depth; l-- > 0;) {
    Eigen::MatrixXd dz = (cache.pre[l].array() > 0.0).select(dh, 0.0);
    g.w_self(l).noalias() = dz.transpose() * cache.inputs[l];
    g.w_neigh(l).noalias() = dz.transpose() * cache.aggregates[l];
    g.bias(l) = dz.colwise().sum().transpose();
    if (l == 0) break;
    Eigen::MatrixXd dagg = dz * model.w_neigh(l);
    dh.noalias() = dz * model.w_self(l);
    dh.noalias() += graph.mean_adjacency.transpose() * dagg;
  }
  return out;
}

void TrainConfig::validate() const {
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas out of [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

LocalTrainResult train_local(const SageGraph& graph, const Eigen::MatrixXd& features, std::span<const Label> labels,
                             std::span<const std::size_t> train_mask, const SageModel& model,
                             const TrainConfig& config, [[maybe_unused]] std::uint64_t seed) {
  config.validate();
  LocalTrainResult result{model, {}};
  Eigen::VectorXd& theta = result.model.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    LossAndGrads lg = loss_and_grads(graph, features, labels, train_mask, result.model);
    if (!std::isfinite(lg.loss) || !lg.gradients.all_finite())
      throw TrainingDiverged("non-finite loss at local epoch " + std::to_string(epoch));
    result.losses.push_back(lg.loss);
    const Eigen::VectorXd& grad = lg.gradients.parameters();

    if (config.optimizer == OptimizerKind::Sgd) {
      theta.noalias() -= config.learning_rate * grad;
    } else {
      beta1_t *= config.beta1;
      beta2_t *= config.beta2;
      m1 = config.beta1 * m1 + (1.0 - config.beta1) * grad;
      m2 = config.beta2 * m2 + (1.0 - config.beta2) * grad.cwiseProduct(grad);
      const double lr_t = config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      theta.array() -= lr_t * m1.array() / (m2.array().sqrt() + config.epsilon);
    }
    if (!theta.allFinite()) throw TrainingDiverged("non-finite parameters after local epoch " + std::to_string(epoch));
  }
  return result;
}

Label label_from_logits(double toxic_logit, double nontoxic_logit) noexcept {
  return toxic_logit > nontoxic_logit ? Label::Toxic : Label::NonToxic;
}

std::vector<Label> predict(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model,
                           std::span<const std::size_t> mask) {
  const Eigen::MatrixXd logits = forward(graph, features, model);
  std::vector<Label> out;
  out.reserve(mask.size());
  for (std::size_t v : mask) {
    if (v >= graph.node_count) throw ShapeError("mask index out of range");
    out.push_back(label_from_logits(logits(idx(v), 0), logits(idx(v), 1)));
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'T', 'X', 'S', 'A', 'G', 'E', '1'};

template <typename T>
void put_le(std::ostream& out, T v) {
  char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(b, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw ParseError("truncated checkpoint");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void save_checkpoint(std::ostream& out, const SageModel& model) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.shape().depth));
  put_le<std::uint64_t>(out, model.shape().input_dim);
  put_le<std::uint64_t>(out, model.shape().hidden);
  put_le<std::uint64_t>(out, kNumClasses);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(model.parameters().size()));
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i)
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(model.parameters()(i)));
}

SageModel load_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw ParseError("not a GraphSAGE checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  SageShape shape;
  shape.depth = get_le<std::uint32_t>(in);
  shape.input_dim = get_le<std::uint64_t>(in);
  shape.hidden = get_le<std::uint64_t>(in);
  if (get_le<std::uint64_t>(in) != kNumClasses) throw ParseError("checkpoint class count mismatch");
  const auto count = get_le<std::uint64_t>(in);
  SageModel model(shape);
  if (count != static_cast<std::uint64_t>(model.parameters().size())) throw ParseError("checkpoint size mismatch");
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i)
    model.parameters()(i) = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return model;
}

}  // namespace fedtox
