#include "cocoa/metrics.hpp"

#include <string>

#include "cocoa/errors.hpp"

namespace cocoa {

double evaluate_macro_f1(std::span<const std::uint32_t> predictions,
                         std::span<const std::uint32_t> labels, std::size_t num_classes,
                         std::vector<std::size_t>* absent_classes) {
  if (predictions.size() != labels.size())
    throw input_error("macro_f1: " + std::to_string(predictions.size()) +
                      " predictions for " + std::to_string(labels.size()) + " labels");
  if (num_classes == 0) throw config_error("macro_f1: num_classes must be >= 1");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::uint32_t p = predictions[i], l = labels[i];
    if (p >= num_classes || l >= num_classes)
      throw input_error("macro_f1: class index out of range");
    if (p == l)
      ++tp[l];
    else {
      ++fp[p];
      ++fn[l];
    }
  }
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t support = tp[c] + fn[c], predicted = tp[c] + fp[c];
    if (support == 0 && predicted == 0) {
      if (absent_classes) absent_classes->push_back(c);
      continue;  // contributes 0
    }
    double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    if (denom > 0.0) total += 2.0 * static_cast<double>(tp[c]) / denom;
  }
  return total / static_cast<double>(num_classes);
}

}  // namespace cocoa
