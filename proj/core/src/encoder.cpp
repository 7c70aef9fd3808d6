#include "cocoa/encoder.hpp"

#include <cmath>

#include "cocoa/errors.hpp"
#include "cocoa/hash.hpp"
#include "cocoa/ops.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {

void EncoderConfig::validate() const {
  if (kernel_sizes.size() != filter_counts.size() || kernel_sizes.empty())
    throw config_error("encoder: kernel_sizes and filter_counts must have equal nonzero length");
  if (projection_dim == 0 || fusion_dim == 0)
    throw config_error("encoder: projection_dim and fusion_dim must be positive");
  if (input_channels.empty()) throw config_error("encoder: no modalities configured");
  if (modality_names.size() != input_channels.size())
    throw config_error("encoder: modality_names/input_channels size mismatch");
  for (std::size_t c : input_channels)
    if (c == 0) throw config_error("encoder: modality with 0 channels");
  std::size_t shrink = 0;
  for (std::size_t k : kernel_sizes) shrink += k - 1;
  if (window_length <= shrink)
    throw config_error("encoder: window_length " + std::to_string(window_length) +
                       " too short for kernel stack (needs > " + std::to_string(shrink) + ")");
}

std::size_t EncoderConfig::conv_output_length() const {
  std::size_t t = window_length;
  for (std::size_t k : kernel_sizes) t -= k - 1;
  return t;
}

std::size_t EncoderConfig::param_count() const {
  std::size_t total = 0;
  for (std::size_t cin : input_channels) {
    std::size_t c = cin;
    for (std::size_t l = 0; l < kernel_sizes.size(); ++l) {
      std::size_t f = filter_counts[l];
      total += kernel_sizes[l] * c * f + f;  // conv kernel + bias
      total += 2 * f;                        // layer-norm gain + shift
      c = f;
    }
    total += c * projection_dim + projection_dim;  // projection dense
  }
  total += projection_dim * fusion_dim + fusion_dim;  // shared fusion dense
  return total;
}

EncoderConfig EncoderConfig::for_dataset(const Dataset& dataset) {
  EncoderConfig config;
  if (dataset.modalities.empty()) throw config_error("encoder: dataset has no modalities");
  config.window_length = dataset.modalities[0].window;
  for (const ModalityData& m : dataset.modalities) {
    if (m.window != config.window_length)
      throw config_error("encoder: modality '" + m.name + "' window length differs");
    config.input_channels.push_back(m.channels);
    config.modality_names.push_back(m.name);
  }
  config.validate();
  return config;
}

namespace {

Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.data()) x = uniform(rng, -limit, limit);
  return t;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams params;
  params.config = config;
  for (std::size_t v = 0; v < config.num_modalities(); ++v) {
    auto rng = make_rng(seed, v + 1);
    ModalityParams mp;
    std::size_t cin = config.input_channels[v];
    for (std::size_t l = 0; l < config.kernel_sizes.size(); ++l) {
      std::size_t k = config.kernel_sizes[l], f = config.filter_counts[l];
      ConvBlockParams block;
      block.kernel = he_uniform({k, cin, f}, k * cin, rng);
      block.bias = Tensor::zeros({f});
      block.ln_gain = Tensor::full({f}, 1.0);
      block.ln_shift = Tensor::zeros({f});
      mp.blocks.push_back(std::move(block));
      cin = f;
    }
    mp.proj_weight = he_uniform({cin, config.projection_dim}, cin, rng);
    mp.proj_bias = Tensor::zeros({config.projection_dim});
    params.modalities.push_back(std::move(mp));
  }
  auto rng = make_rng(seed, 0);
  params.fusion_weight =
      he_uniform({config.projection_dim, config.fusion_dim}, config.projection_dim, rng);
  params.fusion_bias = Tensor::zeros({config.fusion_dim});
  return params;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_tensors() {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t v = 0; v < modalities.size(); ++v) {
    const std::string base = config.modality_names[v];
    ModalityParams& mp = modalities[v];
    for (std::size_t l = 0; l < mp.blocks.size(); ++l) {
      std::string prefix = base + ".conv" + std::to_string(l) + ".";
      out.emplace_back(prefix + "kernel", mp.blocks[l].kernel);
      out.emplace_back(prefix + "bias", mp.blocks[l].bias);
      out.emplace_back(prefix + "ln_gain", mp.blocks[l].ln_gain);
      out.emplace_back(prefix + "ln_shift", mp.blocks[l].ln_shift);
    }
    out.emplace_back(base + ".proj.weight", mp.proj_weight);
    out.emplace_back(base + ".proj.bias", mp.proj_bias);
  }
  out.emplace_back("fusion.weight", fusion_weight);
  out.emplace_back("fusion.bias", fusion_bias);
  return out;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named_tensors() const {
  return const_cast<EncoderParams*>(this)->named_tensors();
}

std::vector<Tensor> EncoderParams::all_tensors() {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams out;
  out.config = config;
  for (const ModalityParams& mp : modalities) {
    ModalityParams cp;
    for (const ConvBlockParams& b : mp.blocks)
      cp.blocks.push_back({b.kernel.detached_copy(), b.bias.detached_copy(),
                           b.ln_gain.detached_copy(), b.ln_shift.detached_copy()});
    cp.proj_weight = mp.proj_weight.detached_copy();
    cp.proj_bias = mp.proj_bias.detached_copy();
    out.modalities.push_back(std::move(cp));
  }
  out.fusion_weight = fusion_weight.detached_copy();
  out.fusion_bias = fusion_bias.detached_copy();
  return out;
}

void EncoderParams::mark_trainable(Tape& tape) {
  for (Tensor& t : all_tensors()) t.mark_trainable(tape);
}

std::uint64_t EncoderParams::hash() const {
  Fnv1a h;
  for (const auto& [name, t] : named_tensors()) {
    h.update(name);
    h.update(t.data());
  }
  return h.digest();
}

EmbeddingSet encode(const EncoderParams& params, const ModalityBatch& batch) {
  const EncoderConfig& config = params.config;
  if (batch.modalities.size() != params.modalities.size())
    throw config_error("encode: batch has " + std::to_string(batch.modalities.size()) +
                       " modalities, encoder expects " +
                       std::to_string(params.modalities.size()));
  EmbeddingSet out;
  for (std::size_t v = 0; v < batch.modalities.size(); ++v) {
    const Tensor& x = batch.modalities[v];
    if (x.dim(1) != config.window_length || x.dim(2) != config.input_channels[v])
      throw config_error("encode: modality '" + batch.names[v] + "' shape mismatch (got " +
                         std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                         ", expected " + std::to_string(config.window_length) + "x" +
                         std::to_string(config.input_channels[v]) + ")");
    const ModalityParams& mp = params.modalities[v];
    Tensor h = x;
    for (const ConvBlockParams& block : mp.blocks) {
      h = conv1d(h, block.kernel, block.bias);
      h = relu(h);
      h = layer_norm(h, block.ln_gain, block.ln_shift, config.layer_norm_eps);
    }
    h = global_avg_pool(h);
    h = dense(h, mp.proj_weight, mp.proj_bias);
    h = dense(h, params.fusion_weight, params.fusion_bias);
    out.push_back(std::move(h));
  }
  return out;
}

Tensor concat_embeddings(const EmbeddingSet& z) { return concat_cols(z); }

Tensor encode_concat(const EncoderParams& params, const ModalityBatch& batch) {
  return concat_embeddings(encode(params, batch));
}

}  // namespace cocoa
