#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedtox/graphsage.hpp"
#include "fedtox/rng.hpp"

namespace fedtox::testing {

struct GradFixture {
  SageGraph graph;
  Eigen::MatrixXd features;
  std::vector<Label> labels;
  std::vector<std::size_t> mask;
  SageModel model;
};

/// Random connected-ish graph with random features, labels and parameters.
inline GradFixture random_grad_fixture(std::uint64_t seed, std::size_t nodes = 6, std::size_t input_dim = 4,
                                       std::size_t hidden = 5, std::size_t depth = 2) {
  Rng rng(seed);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < nodes; ++i) ids.push_back("n" + std::to_string(i));
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = i + 1; j < nodes; ++j)
      if (j == i + 1 || rng.bernoulli(0.3)) edges.push_back({i, j, static_cast<std::int64_t>(1 + rng.index(3))});
  GradFixture f;
  f.graph = SageGraph::from(ConversationGraph("g", ids, edges));
  f.features.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index i = 0; i < f.features.size(); ++i) f.features(i) = rng.normal();
  for (std::size_t i = 0; i < nodes; ++i) {
    f.labels.push_back(rng.bernoulli(0.5) ? Label::Toxic : Label::NonToxic);
    if (i % 3 != 2) f.mask.push_back(i);
  }
  f.model = SageModel::initialize({input_dim, hidden, depth}, derive_seed({seed, 77}));
  // Nonzero biases so that every parameter has a gradient to compare.
  for (Eigen::Index i = 0; i < f.model.parameters().size(); ++i) f.model.parameters()(i) += 0.05 * rng.normal();
  return f;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters = 0;
};

/// Central differences with step h for every parameter, compared with the
/// analytic gradient. Pairs whose magnitudes are both below `floor` are
/// compared on the floor scale.
inline GradCheckResult gradient_check(const GradFixture& f, double h = 1e-5, double floor = 1e-7) {
  const auto analytic = loss_and_grads(f.graph, f.features, f.labels, f.mask, f.model);
  SageModel probe = f.model;
  GradCheckResult r;
  const auto n = probe.parameters().size();
  r.parameters = static_cast<std::size_t>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double original = probe.parameters()(i);
    probe.parameters()(i) = original + h;
    const double up = loss_and_grads(f.graph, f.features, f.labels, f.mask, probe).loss;
    probe.parameters()(i) = original - h;
    const double down = loss_and_grads(f.graph, f.features, f.labels, f.mask, probe).loss;
    probe.parameters()(i) = original;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.gradients.parameters()(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    r.max_relative_error = std::max(r.max_relative_error, std::abs(a - numeric) / denom);
  }
  return r;
}

}  // namespace fedtox::testing
