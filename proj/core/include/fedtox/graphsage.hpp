#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "fedtox/convgraph.hpp"
#include "fedtox/labeling.hpp"

namespace fedtox {

inline constexpr std::size_t kNumClasses = 2;  // 0 = Toxic, 1 = NonToxic

struct SageShape {
  std::size_t input_dim = 0;
  std::size_t hidden = 64;
  std::size_t depth = 2;

  void validate() const;  // throws ConfigError
  std::size_t parameter_count() const noexcept;
  bool operator==(const SageShape&) const = default;
};

/// GraphSAGE (mean aggregator) with a linear two-class head. All parameters
/// live in one flat vector so that averaging and optimizer updates are plain
/// vector arithmetic; the accessors below are column-major views into it.
class SageModel {
 public:
  using MatrixView = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixView = Eigen::Map<const Eigen::MatrixXd>;
  using VectorView = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

  SageModel() = default;
  /// All-zero parameters.
  explicit SageModel(const SageShape& shape);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static SageModel initialize(const SageShape& shape, std::uint64_t seed);

  const SageShape& shape() const noexcept { return shape_; }
  const Eigen::VectorXd& parameters() const noexcept { return params_; }
  Eigen::VectorXd& parameters() noexcept { return params_; }

  std::size_t layer_in(std::size_t layer) const noexcept { return layer == 0 ? shape_.input_dim : shape_.hidden; }

  MatrixView w_self(std::size_t layer);           // hidden x in
  MatrixView w_neigh(std::size_t layer);          // hidden x in
  VectorView bias(std::size_t layer);             // hidden
  MatrixView w_out();                             // 2 x hidden
  VectorView b_out();                             // 2
  ConstMatrixView w_self(std::size_t layer) const;
  ConstMatrixView w_neigh(std::size_t layer) const;
  ConstVectorView bias(std::size_t layer) const;
  ConstMatrixView w_out() const;
  ConstVectorView b_out() const;

  bool all_finite() const { return params_.allFinite(); }
  bool operator==(const SageModel& o) const { return shape_ == o.shape_ && params_ == o.params_; }

 private:
  std::size_t layer_offset(std::size_t layer) const noexcept;
  std::size_t head_offset() const noexcept;

  SageShape shape_;
  Eigen::VectorXd params_;
};

/// Row-normalized adjacency: row v holds 1/deg(v) at each neighbour. Isolated
/// nodes have an all-zero row, i.e. a zero neighbour aggregate.
struct SageGraph {
  Eigen::SparseMatrix<double, Eigen::RowMajor> mean_adjacency;
  std::size_t node_count = 0;

  static SageGraph from(const ConversationGraph& graph);
  static SageGraph edgeless(std::size_t n);
};

/// n x 2 logits. Throws ShapeError on dimension mismatch.
Eigen::MatrixXd forward(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model);

struct LossAndGrads {
  double loss = 0.0;
  SageModel gradients;  // same shape as the model
};

/// Mean softmax cross-entropy over the masked nodes and its exact gradient.
/// The mask is treated as a set. Throws EmptyMask.
LossAndGrads loss_and_grads(const SageGraph& graph, const Eigen::MatrixXd& features, std::span<const Label> labels,
                            std::span<const std::size_t> mask, const SageModel& model);

enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  std::size_t local_epochs = 2;
  double learning_rate = 1e-4;
  std::size_t batch_size = 1;  // graphs per step; each client holds one graph
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;  // throws ConfigError
};

struct LocalTrainResult {
  SageModel model;
  std::vector<double> losses;  // loss before each optimizer step
};

/// Full-graph optimization for `local_epochs` steps with fresh optimizer state.
/// Throws TrainingDiverged when the loss or parameters become non-finite.
LocalTrainResult train_local(const SageGraph& graph, const Eigen::MatrixXd& features, std::span<const Label> labels,
                             std::span<const std::size_t> train_mask, const SageModel& model,
                             const TrainConfig& config, std::uint64_t seed);

/// Argmax per masked node; ties go to NonToxic.
std::vector<Label> predict(const SageGraph& graph, const Eigen::MatrixXd& features, const SageModel& model,
                           std::span<const std::size_t> mask);
Label label_from_logits(double toxic_logit, double nontoxic_logit) noexcept;

/// Binary checkpoint: "FTXSAGE1", u32 format version, u32 depth, u64 input dim,
/// u64 hidden, u64 classes, u64 parameter count, then parameters as f64 (all little-endian).
void save_checkpoint(std::ostream& out, const SageModel& model);
SageModel load_checkpoint(std::istream& in);
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace fedtox
