#include "cocoa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "cocoa/adam.hpp"
#include "cocoa/errors.hpp"
#include "cocoa/ops.hpp"
#include "cocoa/rng.hpp"

namespace cocoa {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void detach_all(std::vector<Tensor> tensors) {
  for (Tensor& t : tensors) {
    t.impl()->tape = nullptr;
    t.impl()->grad.clear();
  }
}

/// Scales all gradients so their joint L2 norm is at most `clip` (0 = off).
void clip_gradients(const std::vector<Tensor>& tensors, double clip) {
  if (clip <= 0.0) return;
  double sq = 0.0;
  for (const Tensor& t : tensors)
    for (double g : t.impl()->grad) sq += g * g;
  if (sq <= clip * clip) return;
  double scale = clip / std::sqrt(sq);
  for (const Tensor& t : tensors)
    for (double& g : t.impl()->grad) g *= scale;
}

Tensor ssl_loss(Method method, const EmbeddingSet& z, const LossHyper& hyper,
                OpCounter* counter) {
  switch (method) {
    case Method::cocoa:
      return cocoa_loss(z, {hyper.tau, hyper.lambda}, counter);
    case Method::cmc:
      return cmc_loss(z, hyper.tau, counter);
    case Method::infonce:
      return infonce_loss(z.at(0), z.at(1), hyper.tau, SimKind::cosine, counter);
    case Method::dcl:
      return dcl_loss(z.at(0), z.at(1), hyper.tau, hyper.eps, SimKind::cosine, counter);
    case Method::hard_dcl:
      return hard_dcl_loss(z.at(0), z.at(1), hyper.tau, hyper.eps, hyper.beta,
                           SimKind::cosine, counter);
    case Method::barlow:
      return barlow_twins_loss(z.at(0), z.at(1), hyper.lambda_bt);
    case Method::supervised:
      break;
  }
  throw config_error("ssl_loss: method has no self-supervised objective");
}

void check_modality_count(Method method, std::size_t v) {
  switch (method) {
    case Method::cocoa:
    case Method::cmc:
      if (v < 2)
        throw config_error(method_name(method) + " needs at least 2 modalities, dataset has " +
                           std::to_string(v));
      break;
    case Method::infonce:
    case Method::dcl:
    case Method::hard_dcl:
    case Method::barlow:
      if (v != 2)
        throw config_error(method_name(method) + " contrasts exactly 2 modalities, dataset has " +
                           std::to_string(v));
      break;
    case Method::supervised:
      break;
  }
}

EncoderConfig encoder_config_for(const Dataset& dataset, const TrainConfig& config) {
  EncoderConfig ec = EncoderConfig::for_dataset(dataset);
  ec.projection_dim = config.projection_dim;
  ec.fusion_dim = config.fusion_dim;
  ec.validate();
  return ec;
}

/// Frozen-encoder concatenated embeddings for every window, row-major.
std::vector<double> embed_dataset(const EncoderParams& params, const Dataset& dataset,
                                  std::size_t chunk = 128) {
  std::size_t n = dataset.num_windows();
  std::size_t width = params.config.fusion_dim * dataset.modalities.size();
  std::vector<double> out(n * width);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    std::size_t end = std::min(n, begin + chunk);
    std::vector<std::size_t> rows(end - begin);
    std::iota(rows.begin(), rows.end(), begin);
    Tensor emb = encode_concat(params, batch_of(dataset, rows));
    auto src = emb.data();
    std::copy(src.begin(), src.end(), out.begin() + begin * width);
  }
  // The contrastive losses compare fusion vectors under cosine similarity,
  // so only their direction is trained; normalize each modality block to
  // present the probe with the same geometry.
  std::size_t d = params.config.fusion_dim;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t b = 0; b * d < width; ++b) {
      double* block = out.data() + r * width + b * d;
      double sq = 0.0;
      for (std::size_t j = 0; j < d; ++j) sq += block[j] * block[j];
      if (sq > 0.0) {
        double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < d; ++j) block[j] *= inv;
      }
    }
  }
  return out;
}

std::vector<std::uint32_t> argmax_rows(std::span<const double> logits, std::size_t rows,
                                       std::size_t cols) {
  std::vector<std::uint32_t> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j)
      if (logits[i * cols + j] > logits[i * cols + best]) best = j;
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

Classifier init_classifier(std::size_t d_in, std::size_t classes, std::uint64_t seed) {
  auto rng = make_rng(seed, 99);
  double limit = std::sqrt(6.0 / static_cast<double>(d_in));
  Classifier c;
  c.weight = Tensor::zeros({d_in, classes});
  for (double& x : c.weight.data()) x = uniform(rng, -limit, limit);
  c.bias = Tensor::zeros({classes});
  return c;
}

std::vector<std::uint32_t> classify_features(const Classifier& c,
                                             std::span<const double> features,
                                             std::size_t rows, std::size_t d_in) {
  Tensor x = Tensor::from_data({rows, d_in},
                               std::vector<double>(features.begin(), features.end()));
  Tensor logits = dense(x, c.weight, c.bias);
  return argmax_rows(logits.data(), rows, c.bias.dim(0));
}

}  // namespace

Method method_from_string(const std::string& name) {
  if (name == "cocoa") return Method::cocoa;
  if (name == "infonce") return Method::infonce;
  if (name == "dcl") return Method::dcl;
  if (name == "hard_dcl") return Method::hard_dcl;
  if (name == "barlow") return Method::barlow;
  if (name == "cmc") return Method::cmc;
  if (name == "supervised") return Method::supervised;
  throw config_error("unknown method '" + name + "'");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::cocoa: return "cocoa";
    case Method::infonce: return "infonce";
    case Method::dcl: return "dcl";
    case Method::hard_dcl: return "hard_dcl";
    case Method::barlow: return "barlow";
    case Method::cmc: return "cmc";
    case Method::supervised: return "supervised";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw config_error("train: batch_size must be >= 2");
  if (early_stop_patience < 1) throw config_error("train: patience must be >= 1");
  if (max_epochs < 1) throw config_error("train: max_epochs must be >= 1");
  if (lr <= 0.0) throw config_error("train: lr must be > 0");
  if (grad_clip < 0.0) throw config_error("train: grad_clip must be >= 0");
}

PretrainResult pretrain(const DatasetSplit& split, const TrainConfig& config) {
  config.validate();
  if (config.method == Method::supervised)
    throw config_error("pretrain: 'supervised' is not a self-supervised objective");
  check_modality_count(config.method, split.train.modalities.size());

  auto start = Clock::now();
  EncoderParams params =
      EncoderParams::init(encoder_config_for(split.train, config), config.seed);
  Adam adam(params.all_tensors(), {.lr = config.lr});
  auto rng = make_rng(config.seed, 7);

  std::size_t batches = std::max<std::size_t>(1, split.train.num_windows() / config.batch_size);
  RunMetrics metrics;
  {
    std::ostringstream id;
    id << method_name(config.method) << "-b" << config.batch_size << "-s" << config.seed;
    metrics.run_id = id.str();
  }

  EncoderParams best = params.clone();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    OpCounter epoch_counter;
    double train_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      Tape tape;
      params.mark_trainable(tape);
      ModalityBatch batch = sample_batch(split.train, config.batch_size, rng);
      Tensor loss = ssl_loss(config.method, encode(params, batch), config.hyper,
                             &epoch_counter);
      train_loss += loss.value();
      tape.backward(loss);
      clip_gradients(params.all_tensors(), config.grad_clip);
      adam.step();
      detach_all(params.all_tensors());
    }
    train_loss /= static_cast<double>(batches);

    OpCounter val_counter;  // validation cost is not part of the training budget
    Tensor val_loss_t =
        ssl_loss(config.method, encode(params, full_batch(split.val)), config.hyper,
                 &val_counter);
    double val_loss = val_loss_t.value();

    metrics.epochs.push_back({metrics.run_id, method_name(config.method), epoch, train_loss,
                              val_loss, std::nullopt,
                              epoch_counter.similarity_evaluations, seconds_since(start)});
    metrics.total_similarity_evaluations += epoch_counter.similarity_evaluations;

    if (val_loss < best_val) {
      best_val = val_loss;
      best = params.clone();
      metrics.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.early_stop_patience) {
      break;
    }
  }
  metrics.wall_seconds = seconds_since(start);
  return {std::move(best), std::move(metrics)};
}

ProbeResult linear_probe(const EncoderParams& encoders, const DatasetSplit& split,
                         const TrainConfig& config) {
  config.validate();
  if (!split.train.labeled() || !split.val.labeled() || !split.test.labeled())
    throw input_error("linear_probe: dataset has no labels");

  auto start = Clock::now();
  std::size_t d_in = encoders.config.fusion_dim * split.train.modalities.size();
  std::size_t classes = split.train.classes.size();

  auto train_x = embed_dataset(encoders, split.train);
  auto val_x = embed_dataset(encoders, split.val);
  auto test_x = embed_dataset(encoders, split.test);
  std::size_t n_train = split.train.num_windows();

  Classifier clf = init_classifier(d_in, classes, config.seed);
  Adam adam({clf.weight, clf.bias}, {.lr = config.lr});
  auto rng = make_rng(config.seed, 23);
  std::size_t probe_batch = std::min<std::size_t>(config.batch_size, n_train);
  std::size_t batches = std::max<std::size_t>(1, n_train / probe_batch);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  RunMetrics metrics;
  metrics.run_id = "probe-s" + std::to_string(config.seed);
  Classifier best{clf.weight.detached_copy(), clf.bias.detached_copy()};
  double best_f1 = -1.0;
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::size_t lo = b * probe_batch;
      std::size_t hi = std::min(n_train, lo + probe_batch);
      std::vector<double> chunk((hi - lo) * d_in);
      std::vector<std::uint32_t> chunk_labels(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        std::copy_n(train_x.begin() + order[i] * d_in, d_in,
                    chunk.begin() + (i - lo) * d_in);
        chunk_labels[i - lo] = split.train.labels[order[i]];
      }
      Tensor x = Tensor::from_data({hi - lo, d_in}, std::move(chunk));
      Tape tape;
      clf.weight.mark_trainable(tape);
      clf.bias.mark_trainable(tape);
      Tensor loss = softmax_cross_entropy(dense(x, clf.weight, clf.bias), chunk_labels);
      train_loss += loss.value();
      tape.backward(loss);
      adam.step();
      detach_all({clf.weight, clf.bias});
    }
    train_loss /= static_cast<double>(batches);

    auto val_pred = classify_features(clf, val_x, split.val.num_windows(), d_in);
    double val_f1 = evaluate_macro_f1(val_pred, split.val.labels, classes);
    metrics.epochs.push_back({metrics.run_id, "probe", epoch, train_loss, 0.0, val_f1, 0,
                              seconds_since(start)});
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best = {clf.weight.detached_copy(), clf.bias.detached_copy()};
      metrics.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.early_stop_patience) {
      break;
    }
  }
  auto test_pred = classify_features(best, test_x, split.test.num_windows(), d_in);
  metrics.test_macro_f1 = evaluate_macro_f1(test_pred, split.test.labels, classes);
  metrics.wall_seconds = seconds_since(start);
  return {std::move(best), std::move(metrics)};
}

std::vector<std::size_t> stratified_subsample(const Dataset& dataset, double fraction,
                                              std::uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw config_error("stratified_subsample: fraction must be in (0,1]");
  if (!dataset.labeled()) throw input_error("stratified_subsample: dataset has no labels");
  std::vector<std::vector<std::size_t>> per_class(dataset.classes.size());
  for (std::size_t i = 0; i < dataset.num_windows(); ++i)
    per_class[dataset.labels[i]].push_back(i);
  std::vector<std::size_t> chosen;
  auto rng = make_rng(seed, 31);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    auto& rows = per_class[c];
    if (rows.empty()) continue;
    auto take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(rows.size())));
    if (take == 0)
      throw config_error("stratified_subsample: fraction " + std::to_string(fraction) +
                         " leaves class " + std::to_string(c) + " without samples");
    std::shuffle(rows.begin(), rows.end(), rng);
    chosen.insert(chosen.end(), rows.begin(), rows.begin() + take);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

FinetuneResult finetune(const EncoderParams& encoders, const DatasetSplit& split,
                        const TrainConfig& config, double label_fraction) {
  config.validate();
  if (!split.train.labeled() || !split.val.labeled() || !split.test.labeled())
    throw input_error("finetune: dataset has no labels");

  auto start = Clock::now();
  Dataset labeled = split.train.subset(
      stratified_subsample(split.train, label_fraction, config.seed));
  EncoderParams params = encoders.clone();
  std::size_t d_in = params.config.fusion_dim * split.train.modalities.size();
  std::size_t classes = split.train.classes.size();
  Classifier clf = init_classifier(d_in, classes, config.seed);

  auto all_params = params.all_tensors();
  all_params.push_back(clf.weight);
  all_params.push_back(clf.bias);
  Adam adam(all_params, {.lr = config.lr});
  auto rng = make_rng(config.seed, 13);

  std::size_t n = labeled.num_windows();
  std::size_t batch_size = std::min(config.batch_size, n);
  std::size_t batches = std::max<std::size_t>(1, n / batch_size);

  RunMetrics metrics;
  {
    std::ostringstream id;
    id << method_name(config.method) << "-ft" << label_fraction << "-s" << config.seed;
    metrics.run_id = id.str();
  }
  EncoderParams best_params = params.clone();
  Classifier best_clf{clf.weight.detached_copy(), clf.bias.detached_copy()};
  double best_f1 = -1.0;
  std::size_t bad_epochs = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto val_x = embed_dataset(params, split.val);  // recomputed below as encoders move

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<std::size_t> rows(
          order.begin() + b * batch_size,
          order.begin() + std::min(n, (b + 1) * batch_size));
      ModalityBatch batch = batch_of(labeled, rows);
      Tape tape;
      params.mark_trainable(tape);
      clf.weight.mark_trainable(tape);
      clf.bias.mark_trainable(tape);
      Tensor logits = dense(encode_concat(params, batch), clf.weight, clf.bias);
      Tensor loss = softmax_cross_entropy(logits, batch.labels);
      train_loss += loss.value();
      tape.backward(loss);
      auto trainable = params.all_tensors();
      trainable.push_back(clf.weight);
      trainable.push_back(clf.bias);
      clip_gradients(trainable, config.grad_clip);
      adam.step();
      detach_all(params.all_tensors());
      detach_all({clf.weight, clf.bias});
    }
    train_loss /= static_cast<double>(batches);

    val_x = embed_dataset(params, split.val);
    auto val_pred = classify_features(clf, val_x, split.val.num_windows(), d_in);
    double val_f1 = evaluate_macro_f1(val_pred, split.val.labels, classes);
    metrics.epochs.push_back({metrics.run_id, method_name(config.method), epoch, train_loss,
                              0.0, val_f1, 0, seconds_since(start)});
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best_params = params.clone();
      best_clf = {clf.weight.detached_copy(), clf.bias.detached_copy()};
      metrics.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= config.early_stop_patience) {
      break;
    }
  }
  auto test_x = embed_dataset(best_params, split.test);
  auto test_pred = classify_features(best_clf, test_x, split.test.num_windows(), d_in);
  metrics.test_macro_f1 = evaluate_macro_f1(test_pred, split.test.labels, classes);
  metrics.wall_seconds = seconds_since(start);
  return {std::move(best_params), std::move(best_clf), std::move(metrics)};
}

std::vector<std::uint32_t> classify(const EncoderParams& encoders,
                                    const Classifier& classifier, const Dataset& dataset) {
  std::size_t d_in = encoders.config.fusion_dim * dataset.modalities.size();
  auto features = embed_dataset(encoders, dataset);
  return classify_features(classifier, features, dataset.num_windows(), d_in);
}

std::vector<SweepRow> batch_sweep(const Dataset& dataset, const std::vector<Method>& methods,
                                  const std::vector<std::size_t>& batch_sizes,
                                  const std::vector<std::uint64_t>& seeds,
                                  const TrainConfig& base, std::size_t jobs) {
  struct Job {
    Method method;
    std::size_t batch_size;
    std::uint64_t seed;
  };
  std::vector<Job> grid;
  for (Method m : methods)
    for (std::size_t b : batch_sizes)
      for (std::uint64_t s : seeds) grid.push_back({m, b, s});

  std::vector<SweepRow> rows(grid.size());
  auto run_one = [&](std::size_t i) {
    const Job& job = grid[i];
    TrainConfig config = base;
    config.method = job.method;
    config.batch_size = job.batch_size;
    config.seed = job.seed;
    auto start = Clock::now();
    DatasetSplit split = split_dataset(dataset, {}, job.seed);
    double f1 = 0.0;
    std::uint64_t sims = 0;
    if (job.method == Method::supervised) {
      EncoderParams params =
          EncoderParams::init(encoder_config_for(split.train, config), config.seed);
      f1 = finetune(params, split, config, 1.0).metrics.test_macro_f1.value();
    } else {
      PretrainResult pre = pretrain(split, config);
      sims = pre.metrics.total_similarity_evaluations;
      f1 = linear_probe(pre.params, split, config).metrics.test_macro_f1.value();
    }
    rows[i] = {method_name(job.method), job.batch_size, job.seed, f1, sims,
               seconds_since(start)};
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, grid.size()); ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& t : pool) t.join();
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.method, a.batch_size, a.seed) < std::tie(b.method, b.batch_size, b.seed);
  });
  return rows;
}

std::vector<LabelCurvePoint> label_curve(const Dataset& dataset, Method method,
                                         const std::vector<double>& fractions,
                                         const std::vector<std::uint64_t>& seeds,
                                         const TrainConfig& base, std::size_t jobs) {
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0)
      throw config_error("label_curve: fractions must be in (0,1]");

  // One pretrained encoder per seed, reused across fractions.
  std::vector<std::vector<double>> scores(fractions.size(),
                                          std::vector<double>(seeds.size(), 0.0));
  auto run_seed = [&](std::size_t si) {
    TrainConfig config = base;
    config.method = method;
    config.seed = seeds[si];
    DatasetSplit split = split_dataset(dataset, {}, seeds[si]);
    EncoderParams encoders =
        method == Method::supervised
            ? EncoderParams::init(encoder_config_for(split.train, config), config.seed)
            : pretrain(split, config).params;
    for (std::size_t fi = 0; fi < fractions.size(); ++fi)
      scores[fi][si] =
          finetune(encoders, split, config, fractions[fi]).metrics.test_macro_f1.value();
  };

  if (jobs <= 1) {
    for (std::size_t si = 0; si < seeds.size(); ++si) run_seed(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(jobs, seeds.size()); ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1))
          run_seed(i);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<LabelCurvePoint> points;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    LabelCurvePoint p;
    p.fraction = fractions[fi];
    p.per_seed = scores[fi];
    double mean = std::accumulate(p.per_seed.begin(), p.per_seed.end(), 0.0) /
                  static_cast<double>(p.per_seed.size());
    double var = 0.0;
    for (double s : p.per_seed) var += (s - mean) * (s - mean);
    p.mean_macro_f1 = mean;
    p.std_macro_f1 = p.per_seed.size() > 1
                         ? std::sqrt(var / static_cast<double>(p.per_seed.size() - 1))
                         : 0.0;
    points.push_back(std::move(p));
  }
  return points;
}

namespace {

void write_metrics_impl(const RunMetrics& metrics, const std::filesystem::path& path,
                        std::ios::openmode mode) {
  std::ofstream os(path, mode);
  if (!os) throw io_error("metrics: cannot open " + path.string());
  for (const EpochRecord& e : metrics.epochs) {
    nlohmann::json j{{"run_id", e.run_id},
                     {"method", e.method},
                     {"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"val_loss", e.val_loss},
                     {"similarity_evaluations", e.similarity_evaluations},
                     {"wall_seconds", e.wall_seconds}};
    if (e.macro_f1) j["macro_f1"] = *e.macro_f1;
    os << j.dump() << "\n";
  }
  nlohmann::json summary{{"run_id", metrics.run_id},
                         {"summary", true},
                         {"best_epoch", metrics.best_epoch},
                         {"total_similarity_evaluations", metrics.total_similarity_evaluations},
                         {"wall_seconds", metrics.wall_seconds}};
  if (metrics.test_macro_f1) summary["test_macro_f1"] = *metrics.test_macro_f1;
  os << summary.dump() << "\n";
  if (!os) throw io_error("metrics: write failed for " + path.string());
}

}  // namespace

void write_metrics_jsonl(const RunMetrics& metrics, const std::filesystem::path& path) {
  write_metrics_impl(metrics, path, std::ios::out);
}

void append_metrics_jsonl(const RunMetrics& metrics, const std::filesystem::path& path) {
  write_metrics_impl(metrics, path, std::ios::app);
}

}  // namespace cocoa
