#include "cocoa/batching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <string>

#include "cocoa/errors.hpp"
#include "cocoa/hash.hpp"

namespace cocoa {

void Dataset::validate() const {
  if (modalities.empty()) throw config_error("dataset: no modalities");
  std::size_t n = num_windows();
  if (window_starts.size() != n)
    throw config_error("dataset: window_starts/window_ids size mismatch");
  for (const ModalityData& m : modalities) {
    if (m.channels == 0) throw config_error("dataset: modality '" + m.name + "' has 0 channels");
    if (m.values.size() != n * m.window * m.channels)
      throw config_error("dataset: modality '" + m.name + "' tensor size mismatch");
  }
  if (!labels.empty()) {
    if (labels.size() != n) throw config_error("dataset: label count mismatch");
    if (classes.empty()) throw input_error("dataset: labels present but class list empty");
    for (std::uint32_t l : labels)
      if (l >= classes.size())
        throw input_error("dataset: label " + std::to_string(l) + " >= class count " +
                          std::to_string(classes.size()));
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.classes = classes;
  out.window_span = window_span;
  out.window_ids.reserve(rows.size());
  out.window_starts.reserve(rows.size());
  for (std::size_t r : rows) {
    out.window_ids.push_back(window_ids.at(r));
    out.window_starts.push_back(window_starts.at(r));
    if (!labels.empty()) out.labels.push_back(labels[r]);
  }
  for (const ModalityData& m : modalities) {
    ModalityData sm{m.name, m.channels, m.window, {}};
    std::size_t stride = m.window * m.channels;
    sm.values.reserve(rows.size() * stride);
    for (std::size_t r : rows)
      sm.values.insert(sm.values.end(), m.values.begin() + r * stride,
                       m.values.begin() + (r + 1) * stride);
    out.modalities.push_back(std::move(sm));
  }
  return out;
}

Dataset Dataset::select_modalities(const std::vector<std::size_t>& which) const {
  Dataset out = *this;
  out.modalities.clear();
  for (std::size_t i : which) {
    if (i >= modalities.size())
      throw config_error("select_modalities: index " + std::to_string(i) +
                         " out of range for " + std::to_string(modalities.size()) +
                         " modalities");
    out.modalities.push_back(modalities[i]);
  }
  return out;
}

std::uint64_t Dataset::content_hash() const {
  Fnv1a h;
  for (const ModalityData& m : modalities) {
    h.update(m.name);
    h.update_value(m.channels);
    h.update_value(m.window);
    h.update(std::span<const double>(m.values));
  }
  h.update(labels.data(), labels.size() * sizeof(std::uint32_t));
  for (const std::string& c : classes) h.update(c);
  h.update(window_ids.data(), window_ids.size() * sizeof(std::size_t));
  h.update(window_starts.data(), window_starts.size() * sizeof(std::size_t));
  return h.digest();
}

Dataset make_windows(const std::vector<StreamData>& streams, std::size_t window,
                     double overlap_fraction, const std::vector<std::uint32_t>& step_labels,
                     const std::vector<std::string>& classes) {
  if (streams.empty()) throw config_error("make_windows: no streams");
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
    throw config_error("make_windows: overlap_fraction must be in [0,1)");
  std::size_t t = streams[0].length();
  for (const StreamData& s : streams) {
    if (s.channels == 0) throw config_error("make_windows: stream '" + s.name + "' has 0 channels");
    if (s.length() != t)
      throw input_error("make_windows: stream lengths disagree (" + s.name + ")");
  }
  if (window > t)
    throw input_error("make_windows: window " + std::to_string(window) +
                      " longer than stream " + std::to_string(t));
  auto stride = static_cast<std::size_t>(
      std::llround(static_cast<double>(window) * (1.0 - overlap_fraction)));
  if (stride == 0) stride = 1;
  std::size_t count = (t - window) / stride + 1;

  Dataset out;
  out.classes = classes;
  out.window_span = window;
  out.window_ids.resize(count);
  out.window_starts.resize(count);
  std::iota(out.window_ids.begin(), out.window_ids.end(), 0);
  for (std::size_t w = 0; w < count; ++w) out.window_starts[w] = w * stride;

  for (const StreamData& s : streams) {
    ModalityData m{s.name, s.channels, window, {}};
    m.values.reserve(count * window * s.channels);
    for (std::size_t w = 0; w < count; ++w) {
      std::size_t start = w * stride;
      m.values.insert(m.values.end(), s.values.begin() + start * s.channels,
                      s.values.begin() + (start + window) * s.channels);
    }
    out.modalities.push_back(std::move(m));
  }

  if (!step_labels.empty()) {
    if (step_labels.size() != t)
      throw input_error("make_windows: step label count != stream length");
    out.labels.resize(count);
    for (std::size_t w = 0; w < count; ++w) {
      std::size_t start = w * stride;
      std::map<std::uint32_t, std::size_t> votes;
      for (std::size_t i = start; i < start + window; ++i) ++votes[step_labels[i]];
      // majority vote; std::map ordering makes ties resolve to the earlier class
      std::uint32_t best = 0;
      std::size_t best_count = 0;
      for (auto [cls, cnt] : votes)
        if (cnt > best_count) {
          best = cls;
          best_count = cnt;
        }
      out.labels[w] = best;
    }
  }
  out.validate();
  return out;
}

ModalityBatch batch_of(const Dataset& dataset, const std::vector<std::size_t>& rows) {
  ModalityBatch batch;
  batch.window_ids.reserve(rows.size());
  for (std::size_t r : rows) batch.window_ids.push_back(dataset.window_ids.at(r));
  if (!dataset.labels.empty())
    for (std::size_t r : rows) batch.labels.push_back(dataset.labels[r]);
  for (const ModalityData& m : dataset.modalities) {
    std::size_t stride = m.window * m.channels;
    std::vector<double> values;
    values.reserve(rows.size() * stride);
    for (std::size_t r : rows)
      values.insert(values.end(), m.values.begin() + r * stride,
                    m.values.begin() + (r + 1) * stride);
    batch.names.push_back(m.name);
    batch.modalities.push_back(
        Tensor::from_data({rows.size(), m.window, m.channels}, std::move(values)));
  }
  return batch;
}

ModalityBatch sample_batch(const Dataset& dataset, std::size_t batch_size,
                           std::mt19937_64& rng) {
  std::size_t n = dataset.num_windows();
  if (batch_size > n)
    throw sampling_error("sample_batch: batch size " + std::to_string(batch_size) +
                         " > dataset size " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> chosen;
  chosen.reserve(batch_size);
  for (std::size_t r : order) {
    if (chosen.size() == batch_size) break;
    bool overlaps = false;
    for (std::size_t c : chosen) {
      std::size_t a = dataset.window_starts[r], b = dataset.window_starts[c];
      std::size_t gap = a > b ? a - b : b - a;
      if (gap < dataset.window_span) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) chosen.push_back(r);
  }
  if (chosen.size() < batch_size)
    throw sampling_error("sample_batch: only " + std::to_string(chosen.size()) +
                         " non-overlapping windows available for batch of " +
                         std::to_string(batch_size));
  return batch_of(dataset, chosen);
}

ModalityBatch full_batch(const Dataset& dataset) {
  std::vector<std::size_t> rows(dataset.num_windows());
  std::iota(rows.begin(), rows.end(), 0);
  return batch_of(dataset, rows);
}

DatasetSplit split_dataset(const Dataset& dataset, SplitFractions fractions,
                           std::uint64_t /*seed*/) {
  double total = fractions.train + fractions.val + fractions.test;
  if (std::abs(total - 1.0) > 1e-9)
    throw config_error("split_dataset: fractions must sum to 1");
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0)
    throw config_error("split_dataset: negative fraction");
  std::size_t n = dataset.num_windows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dataset.window_starts[a] < dataset.window_starts[b];
  });
  auto n_train = static_cast<std::size_t>(std::llround(fractions.train * n));
  auto n_val = static_cast<std::size_t>(std::llround(fractions.val * n));
  if (n_train + n_val > n) n_val = n - n_train;
  std::size_t n_test = n - n_train - n_val;
  if ((fractions.train > 0 && n_train == 0) || (fractions.val > 0 && n_val == 0) ||
      (fractions.test > 0 && n_test == 0))
    throw config_error("split_dataset: a requested split is empty");

  auto slice = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> rows(order.begin() + begin, order.begin() + begin + count);
    return dataset.subset(rows);
  };
  DatasetSplit split;
  split.train = slice(0, n_train);
  split.val = slice(n_train, n_val);
  split.test = slice(n_train + n_val, n_test);
  return split;
}

}  // namespace cocoa
