#include "cocoa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cocoa/errors.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {

void SynthConfig::validate() const {
  if (num_classes < 2) throw config_error("synth: num_classes must be >= 2");
  if (num_modalities < 2) throw config_error("synth: num_modalities must be >= 2");
  if (channels_per_modality == 0) throw config_error("synth: channels_per_modality must be >= 1");
  if (window == 0) throw config_error("synth: window must be >= 1");
  if (windows_per_class == 0) throw config_error("synth: windows_per_class must be >= 1");
  if (noise_std < 0.0) throw config_error("synth: noise_std must be >= 0");
  if (distractor_amp < 0.0) throw config_error("synth: distractor_amp must be >= 0");
  if (!factor_split.empty()) {
    if (factor_split.size() != num_modalities)
      throw config_error("synth: factor_split must name one digit per modality");
    for (int d : factor_split)
      if (d != 0 && d != 1)
        throw config_error("synth: factor_split leaves a modality without factors (digit " +
                           std::to_string(d) + ")");
  }
}

namespace {

struct Factor {
  double freq, amp, phase;
};

}  // namespace

Dataset generate(const SynthConfig& config) {
  config.validate();
  std::size_t num_classes = config.num_classes;
  std::size_t v_count = config.num_modalities;
  std::size_t w = config.window;
  std::size_t ch = config.channels_per_modality;

  // Two-digit class decomposition: c = digit1 * base + digit0.
  auto base = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(num_classes))));
  auto digit_of = [&](std::size_t c, int digit) { return digit == 0 ? c % base : c / base; };
  std::vector<int> split = config.factor_split;
  if (split.empty()) {
    split.resize(v_count);
    for (std::size_t v = 0; v < v_count; ++v) split[v] = static_cast<int>(v % 2);
  }

  // Per-modality factor banks: two sinusoids per digit group, distinct
  // frequencies within a modality so groups are separable in raw signal space.
  std::vector<std::vector<std::array<Factor, 2>>> banks(v_count);
  std::vector<std::vector<double>> mixing(v_count);  // [2 x ch] row-major
  for (std::size_t v = 0; v < v_count; ++v) {
    std::size_t groups = (digit_of(num_classes - 1, split[v])) + 1;
    auto rng = make_rng(config.seed, 1000 + v);
    std::vector<double> freq_pool;
    for (std::size_t i = 0; i < 2 * groups + 4; ++i)
      freq_pool.push_back(2.0 + static_cast<double>(i));
    std::shuffle(freq_pool.begin(), freq_pool.end(), rng);
    banks[v].resize(groups);
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t k = 0; k < 2; ++k)
        banks[v][g][k] = {freq_pool[2 * g + k], uniform(rng, 0.8, 1.2),
                          uniform(rng, 0.0, 2.0 * std::numbers::pi)};
    // Rows 0-1 mix the two class factors; row 2 mixes the private distractor.
    mixing[v].resize(3 * ch);
    for (double& m : mixing[v]) m = uniform(rng, -1.0, 1.0);
  }

  std::size_t total = num_classes * config.windows_per_class;

  // Per-window latent state shared by every modality: a phase jitter and an
  // amplitude scale drawn once per window. All modalities observe the same
  // underlying event, so cross-modal structure carries window identity as
  // well as class identity; only the additive noise is modality-private.
  std::vector<double> window_jitter(total), window_scale(total);
  {
    auto rng = make_rng(config.seed, 3000);
    for (std::size_t i = 0; i < total; ++i) {
      window_jitter[i] = uniform(rng, -0.4, 0.4);
      window_scale[i] = uniform(rng, 0.6, 1.4);
    }
  }

  Dataset out;
  out.window_span = w;
  out.window_ids.resize(total);
  out.window_starts.resize(total);
  out.labels.resize(total);
  std::iota(out.window_ids.begin(), out.window_ids.end(), 0);
  for (std::size_t i = 0; i < total; ++i) {
    out.window_starts[i] = i * w;
    out.labels[i] = static_cast<std::uint32_t>(i % num_classes);
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    out.classes.push_back("class" + std::to_string(c));

  for (std::size_t v = 0; v < v_count; ++v) {
    ModalityData m;
    m.name = "mod" + std::to_string(v);
    m.channels = ch;
    m.window = w;
    m.values.resize(total * w * ch);
    auto rng = make_rng(config.seed, 2000 + v);
    std::size_t groups = digit_of(num_classes - 1, split[v]) + 1;
    double freq_span = static_cast<double>(2 * groups + 4);
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t cls = out.labels[i];
      const auto& factors = banks[v][digit_of(cls, split[v])];
      // Modality-private distractor: a fresh frequency/phase per window,
      // drawn from the same band as the class factors.
      Factor distractor{uniform(rng, 2.0, 2.0 + freq_span), config.distractor_amp,
                        uniform(rng, 0.0, 2.0 * std::numbers::pi)};
      for (std::size_t t = 0; t < w; ++t) {
        double phase_t = 2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(w);
        double raw[3];
        for (std::size_t k = 0; k < 2; ++k) {
          const Factor& f = factors[k];
          raw[k] = window_scale[i] * f.amp *
                   std::sin(f.freq * phase_t + f.phase + window_jitter[i]);
        }
        raw[2] = distractor.amp * std::sin(distractor.freq * phase_t + distractor.phase);
        for (std::size_t c = 0; c < ch; ++c) {
          double x = mixing[v][0 * ch + c] * raw[0] + mixing[v][1 * ch + c] * raw[1] +
                     mixing[v][2 * ch + c] * raw[2];
          if (config.noise_std > 0.0) x += gaussian(rng, 0.0, config.noise_std);
          // quantize to f32 so the on-disk format round-trips bit-exactly
          m.values[(i * w + t) * ch + c] = static_cast<double>(static_cast<float>(x));
        }
      }
    }
    out.modalities.push_back(std::move(m));
  }
  out.validate();
  return out;
}

}  // namespace cocoa
