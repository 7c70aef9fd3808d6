#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cocoa {

/// Unweighted mean of per-class F1 scores. A class absent from both
/// predictions and labels contributes F1 = 0 and is reported in
/// `absent_classes` when given.
double evaluate_macro_f1(std::span<const std::uint32_t> predictions,
                         std::span<const std::uint32_t> labels, std::size_t num_classes,
                         std::vector<std::size_t>* absent_classes = nullptr);

}  // namespace cocoa
