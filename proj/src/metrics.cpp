#include "vega/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace vega {

MetricsReport MetricsReport::from_confusion(std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t c = confusion.size();
  if (c == 0) throw std::invalid_argument("confusion matrix is empty");
  for (const auto& row : confusion) {
    if (row.size() != c) throw std::invalid_argument("confusion matrix must be square");
  }
  MetricsReport r;
  r.confusion = std::move(confusion);
  r.support.assign(c, 0);
  r.class_acc.assign(c, 0.0);
  r.class_f1.assign(c, 0.0);
  std::vector<std::size_t> predicted(c, 0);
  std::size_t total = 0, correct = 0;
  for (std::size_t t = 0; t < c; ++t) {
    for (std::size_t p = 0; p < c; ++p) {
      r.support[t] += r.confusion[t][p];
      predicted[p] += r.confusion[t][p];
    }
    total += r.support[t];
    correct += r.confusion[t][t];
  }
  double weighted = 0.0, macro = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double tp = static_cast<double>(r.confusion[k][k]);
    const double recall = r.support[k] ? tp / static_cast<double>(r.support[k]) : 0.0;
    const double precision = predicted[k] ? tp / static_cast<double>(predicted[k]) : 0.0;
    r.class_acc[k] = recall;
    r.class_f1[k] = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    weighted += r.class_f1[k] * static_cast<double>(r.support[k]);
    macro += r.class_f1[k];
  }
  r.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  r.weighted_f1 = total ? weighted / static_cast<double>(total) : 0.0;
  r.macro_f1 = macro / static_cast<double>(c);
  return r;
}

MetricsReport MetricsReport::from_predictions(const std::vector<std::size_t>& truth,
                                              const std::vector<std::size_t>& predicted,
                                              std::size_t num_classes) {
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument("truth and prediction counts differ: " + std::to_string(truth.size()) +
                                " vs " + std::to_string(predicted.size()));
  }
  std::vector<std::vector<std::size_t>> confusion(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw std::out_of_range("label out of range at index " + std::to_string(i));
    }
    ++confusion[truth[i]][predicted[i]];
  }
  return from_confusion(std::move(confusion));
}

nlohmann::json MetricsReport::to_json() const {
  return {{"acc", accuracy},         {"w_f1", weighted_f1}, {"macro_f1", macro_f1},
          {"class_acc", class_acc},  {"class_f1", class_f1}, {"support", support},
          {"confusion", confusion}};
}

std::string MetricsReport::format(const std::vector<std::string>& class_names) const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %8s %8s %8s\n", "class", "support", "ACC", "F1");
  out += line;
  for (std::size_t k = 0; k < class_f1.size(); ++k) {
    const std::string name = k < class_names.size() ? class_names[k] : std::to_string(k);
    std::snprintf(line, sizeof line, "%-14s %8zu %8.2f %8.2f\n", name.c_str(), support[k],
                  100.0 * class_acc[k], 100.0 * class_f1[k]);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-14s %8s %8.2f %8.2f  (w-F1; macro F1 %.2f)\n", "overall", "",
                100.0 * accuracy, 100.0 * weighted_f1, 100.0 * macro_f1);
  out += line;
  return out;
}

}  // namespace vega
