#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

namespace vega {

/// Class-wise ACC (recall) and F1, overall ACC, weighted and macro F1.
/// confusion[t][p] counts utterances of true class t predicted as p.
struct MetricsReport {
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::size_t> support;
  std::vector<double> class_acc;
  std::vector<double> class_f1;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;

  static MetricsReport from_confusion(std::vector<std::vector<std::size_t>> confusion);
  static MetricsReport from_predictions(const std::vector<std::size_t>& truth,
                                        const std::vector<std::size_t>& predicted,
                                        std::size_t num_classes);

  nlohmann::json to_json() const;
  /// Table with one row per class plus the overall line.
  std::string format(const std::vector<std::string>& class_names) const;

  bool operator==(const MetricsReport&) const = default;
};

}  // namespace vega
