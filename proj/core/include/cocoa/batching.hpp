#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cocoa/tensor.hpp"

namespace cocoa {

/// One modality's windowed tensor, [num_windows x window x channels] row-major.
struct ModalityData {
  std::string name;
  std::size_t channels = 0;
  std::size_t window = 0;
  std::vector<double> values;
};

/// A windowed multimodal dataset. All modalities are temporally aligned: row i
/// of every modality covers the same raw-time span.
struct Dataset {
  std::vector<ModalityData> modalities;
  std::vector<std::uint32_t> labels;  // empty when unlabeled
  std::vector<std::string> classes;
  std::vector<std::size_t> window_ids;     // global window indices
  std::vector<std::size_t> window_starts;  // raw-time start per window
  std::size_t window_span = 0;             // raw-time length of one window

  std::size_t num_windows() const { return window_ids.size(); }
  bool labeled() const { return !labels.empty(); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
  Dataset select_modalities(const std::vector<std::size_t>& which) const;
  std::uint64_t content_hash() const;
  void validate() const;
};

/// N aligned windows across all modalities, ready for the encoders.
struct ModalityBatch {
  std::vector<std::string> names;
  std::vector<Tensor> modalities;  // each [N x W_v x C_v]
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> window_ids;
  std::size_t size() const { return window_ids.size(); }
};

/// Raw stream of one modality, [T x channels] row-major.
struct StreamData {
  std::string name;
  std::size_t channels = 0;
  std::vector<double> values;
  std::size_t length() const { return channels ? values.size() / channels : 0; }
};

/// Slices synchronized raw streams into windows. Stride is
/// round(window * (1 - overlap_fraction)); a window's label is the majority
/// label over its span with ties going to the earlier class index.
Dataset make_windows(const std::vector<StreamData>& streams, std::size_t window,
                     double overlap_fraction,
                     const std::vector<std::uint32_t>& step_labels = {},
                     const std::vector<std::string>& classes = {});

/// Uniformly samples `batch_size` distinct windows. Two windows whose raw-time
/// spans overlap are never placed in the same batch, so every in-batch pair is
/// a valid temporally-distant negative.
ModalityBatch sample_batch(const Dataset& dataset, std::size_t batch_size,
                           std::mt19937_64& rng);

/// All windows in storage order, no temporal-distance guard (evaluation only).
ModalityBatch full_batch(const Dataset& dataset);

ModalityBatch batch_of(const Dataset& dataset, const std::vector<std::size_t>& rows);

struct SplitFractions {
  double train = 0.72;
  double val = 0.08;
  double test = 0.20;
};

struct DatasetSplit {
  Dataset train, val, test;
};

/// Contiguous temporal-block split in window start order (train, then val,
/// then test), so no test window overlaps a train window in raw time.
DatasetSplit split_dataset(const Dataset& dataset, SplitFractions fractions,
                           std::uint64_t seed);

}  // namespace cocoa
