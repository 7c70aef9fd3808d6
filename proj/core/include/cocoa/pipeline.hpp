#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cocoa/batching.hpp"
#include "cocoa/encoder.hpp"
#include "cocoa/losses.hpp"
#include "cocoa/metrics.hpp"

namespace cocoa {

enum class Method { cocoa, infonce, dcl, hard_dcl, barlow, cmc, supervised };

Method method_from_string(const std::string& name);
std::string method_name(Method method);

struct LossHyper {
  double tau = 0.1;
  double lambda = 1.0;      // COCOA discriminator weight
  double eps = 1e-7;        // DCL / Hard-DCL floor
  double beta = 1.0;        // Hard-DCL negative concentration
  double lambda_bt = 0.005; // Barlow Twins redundancy weight
};

struct TrainConfig {
  Method method = Method::cocoa;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  double lr = 0.001;
  std::size_t early_stop_patience = 5;
  /// Global L2 gradient-norm clip applied before each optimizer step during
  /// pretraining and fine-tuning; 0 disables. The exponential contrastive
  /// terms occasionally spike on badly misaligned pairs, and an unclipped
  /// spike can knock Adam off a converging trajectory.
  double grad_clip = 0.0;
  LossHyper hyper;
  std::uint64_t seed = 0;
  std::size_t projection_dim = 32;
  std::size_t fusion_dim = 32;

  void validate() const;
};

struct EpochRecord {
  std::string run_id;
  std::string method;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> macro_f1;
  std::uint64_t similarity_evaluations = 0;
  double wall_seconds = 0.0;
};

struct RunMetrics {
  std::string run_id;
  std::vector<EpochRecord> epochs;
  std::optional<double> test_macro_f1;
  std::uint64_t total_similarity_evaluations = 0;
  double wall_seconds = 0.0;
  std::size_t best_epoch = 0;
};

struct PretrainResult {
  EncoderParams params;
  RunMetrics metrics;
};

/// Self-supervised pretraining with early stopping on validation loss;
/// returns the best-validation parameters.
PretrainResult pretrain(const DatasetSplit& split, const TrainConfig& config);

struct Classifier {
  Tensor weight;  // [d_in x num_classes]
  Tensor bias;
};

struct ProbeResult {
  Classifier classifier;
  RunMetrics metrics;
};

/// Trains a linear softmax classifier on frozen-encoder concatenated
/// embeddings; encoder parameters are never touched.
ProbeResult linear_probe(const EncoderParams& encoders, const DatasetSplit& split,
                         const TrainConfig& config);

struct FinetuneResult {
  EncoderParams params;
  Classifier classifier;
  RunMetrics metrics;
};

/// Joint training of encoders + classifier on a class-stratified
/// `label_fraction` subsample of the training labels.
FinetuneResult finetune(const EncoderParams& encoders, const DatasetSplit& split,
                        const TrainConfig& config, double label_fraction);

/// Class-stratified, seed-deterministic subsample of row indices.
std::vector<std::size_t> stratified_subsample(const Dataset& dataset, double fraction,
                                              std::uint64_t seed);

std::vector<std::uint32_t> classify(const EncoderParams& encoders,
                                    const Classifier& classifier, const Dataset& dataset);

struct SweepRow {
  std::string method;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double macro_f1 = 0.0;
  std::uint64_t similarity_evaluations = 0;
  double wall_seconds = 0.0;
};

/// Full pretrain + frozen-probe grid over (method, batch_size, seed).
std::vector<SweepRow> batch_sweep(const Dataset& dataset, const std::vector<Method>& methods,
                                  const std::vector<std::size_t>& batch_sizes,
                                  const std::vector<std::uint64_t>& seeds,
                                  const TrainConfig& base, std::size_t jobs = 1);

struct LabelCurvePoint {
  double fraction = 0.0;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;
  std::vector<double> per_seed;
};

/// Fine-tune at each label fraction across seeds; mean and std per point.
std::vector<LabelCurvePoint> label_curve(const Dataset& dataset, Method method,
                                         const std::vector<double>& fractions,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TrainConfig& base, std::size_t jobs = 1);

/// Newline-delimited JSON metrics sink (one record per epoch plus a summary).
void write_metrics_jsonl(const RunMetrics& metrics, const std::filesystem::path& path);
void append_metrics_jsonl(const RunMetrics& metrics, const std::filesystem::path& path);

}  // namespace cocoa
