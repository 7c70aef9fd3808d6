#pragma once

#include <cstdint>
#include <vector>

#include "cocoa/batching.hpp"

namespace cocoa {

/// Deterministic synthetic multimodal generator. Every class projects to a
/// partial label per modality (a "factor group"); a modality's two sinusoidal
/// factors depend only on that group, so no single modality separates all
/// classes while the fused modalities do. Each window carries a phase jitter
/// and amplitude scale shared by all modalities (the same underlying event
/// seen through different sensors); only the additive noise is per-modality.
struct SynthConfig {
  std::size_t num_classes = 4;
  std::size_t num_modalities = 3;
  std::size_t channels_per_modality = 3;
  std::size_t window = 64;
  std::size_t windows_per_class = 300;
  double noise_std = 0.75;
  /// Amplitude of the modality-private distractor sinusoid each window
  /// carries (random frequency and phase, independent per modality). Shared
  /// class factors survive cross-modal alignment; distractors do not.
  double distractor_amp = 1.0;
  /// Which class digit each modality observes (0 or 1 in the two-digit class
  /// decomposition). Empty selects the default alternating assignment.
  std::vector<int> factor_split;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset generate(const SynthConfig& config);

}  // namespace cocoa
