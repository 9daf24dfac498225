#include "fedtox/metrics.hpp"

#include "fedtox/error.hpp"

namespace fedtox {

void Confusion::add(Label truth, Label predicted) noexcept {
  const bool t = truth == Label::Toxic;
  const bool p = predicted == Label::Toxic;
  if (t && p)
    ++tp;
  else if (!t && p)
    ++fp;
  else if (t && !p)
    ++fn;
  else
    ++tn;
}

Confusion& Confusion::operator+=(const Confusion& o) noexcept {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

Confusion confusion_of(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) c.add(truth[i], predicted[i]);
  return c;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

ClassificationMetrics compute_metrics(const Confusion& c) noexcept {
  ClassificationMetrics m;
  m.confusion = c;
  m.toxic_class_absent = c.tp + c.fn == 0;
  m.nontoxic_class_absent = c.tn + c.fp == 0;

  m.toxic_precision = ratio(c.tp, c.tp + c.fp, m.toxic_precision_undefined);
  m.toxic_recall = ratio(c.tp, c.tp + c.fn, m.toxic_recall_undefined);
  m.toxic_f1 = m.toxic_class_absent ? 0.0 : f1(m.toxic_precision, m.toxic_recall);

  bool unused = false;
  const double nt_precision = ratio(c.tn, c.tn + c.fn, unused);
  const double nt_recall = ratio(c.tn, c.tn + c.fp, unused);
  m.nontoxic_f1 = m.nontoxic_class_absent ? 0.0 : f1(nt_precision, nt_recall);

  m.macro_f1 = 0.5 * (m.toxic_f1 + m.nontoxic_f1);
  return m;
}

}  // namespace fedtox
