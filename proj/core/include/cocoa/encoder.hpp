#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cocoa/batching.hpp"
#include "cocoa/losses.hpp"
#include "cocoa/tensor.hpp"

namespace cocoa {

/// Temporal convolutional encoder stack: three conv layers (kernel 10/8/4,
/// filters 24/48/20), each followed by ReLU and layer normalization, then
/// global average pooling, a modality-specific projection dense layer and a
/// shared fusion dense layer.
struct EncoderConfig {
  std::vector<std::size_t> kernel_sizes{10, 8, 4};
  std::vector<std::size_t> filter_counts{24, 48, 20};
  std::size_t projection_dim = 32;
  std::size_t fusion_dim = 32;
  std::size_t window_length = 64;
  std::vector<std::size_t> input_channels;  // per modality
  std::vector<std::string> modality_names;  // parallel to input_channels
  double layer_norm_eps = 1e-5;

  void validate() const;
  std::size_t num_modalities() const { return input_channels.size(); }
  std::size_t conv_output_length() const;
  std::size_t param_count() const;

  static EncoderConfig for_dataset(const Dataset& dataset);
};

struct ConvBlockParams {
  Tensor kernel;    // [K x C_in x F]
  Tensor bias;      // [F]
  Tensor ln_gain;   // [F]
  Tensor ln_shift;  // [F]
};

struct ModalityParams {
  std::vector<ConvBlockParams> blocks;
  Tensor proj_weight;  // [F_last x projection_dim]
  Tensor proj_bias;
};

/// All trainable encoder state. Modality branches share nothing except the
/// fusion dense layer.
struct EncoderParams {
  EncoderConfig config;
  std::vector<ModalityParams> modalities;
  Tensor fusion_weight;  // [projection_dim x fusion_dim]
  Tensor fusion_bias;

  static EncoderParams init(const EncoderConfig& config, std::uint64_t seed);

  std::vector<Tensor> all_tensors();
  std::vector<std::pair<std::string, Tensor>> named_tensors();
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;

  EncoderParams clone() const;
  void mark_trainable(Tape& tape);
  std::uint64_t hash() const;
};

/// Runs every modality branch; returns one [N x fusion_dim] matrix per
/// modality, in batch modality order.
EmbeddingSet encode(const EncoderParams& params, const ModalityBatch& batch);

/// Per-sample concatenation of the modality embeddings, [N x V*fusion_dim].
Tensor encode_concat(const EncoderParams& params, const ModalityBatch& batch);

Tensor concat_embeddings(const EmbeddingSet& z);

}  // namespace cocoa
