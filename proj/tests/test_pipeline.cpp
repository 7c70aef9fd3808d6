#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cocoa/errors.hpp"
#include "cocoa/pipeline.hpp"
#include "cocoa/synth.hpp"

using namespace cocoa;
namespace fs = std::filesystem;

namespace {

Dataset tiny_dataset(std::size_t per_class = 15, std::size_t modalities = 3) {
  SynthConfig c;
  c.windows_per_class = per_class;
  c.num_modalities = modalities;
  if (modalities != 3) c.factor_split.assign(modalities, 0);
  return generate(c);
}

TrainConfig quick_config(Method m = Method::cocoa) {
  TrainConfig c;
  c.method = m;
  c.batch_size = 8;
  c.max_epochs = 3;
  return c;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (auto m : {Method::cocoa, Method::infonce, Method::dcl, Method::hard_dcl,
                 Method::barlow, Method::cmc, Method::supervised})
    CHECK(method_from_string(method_name(m)) == m);
  CHECK_THROWS_AS(method_from_string("simclr"), config_error);
}

TEST_CASE("pretrain runs and accounts for similarity evaluations") {
  DatasetSplit split = split_dataset(tiny_dataset(), {}, 0);
  TrainConfig config = quick_config();
  PretrainResult r = pretrain(split, config);

  REQUIRE(!r.metrics.epochs.empty());
  CHECK(r.metrics.epochs.size() <= config.max_epochs);
  std::size_t batches = split.train.num_windows() / config.batch_size;
  CHECK(r.metrics.epochs[0].similarity_evaluations ==
        batches * count_formula(CountMethod::cocoa, 3, config.batch_size));
  CHECK(r.metrics.best_epoch >= 1);
}

TEST_CASE("pretrain validates method and modality count") {
  DatasetSplit split3 = split_dataset(tiny_dataset(), {}, 0);
  CHECK_THROWS_AS(pretrain(split3, quick_config(Method::supervised)), config_error);
  CHECK_THROWS_AS(pretrain(split3, quick_config(Method::infonce)), config_error);

  DatasetSplit split2 = split_dataset(tiny_dataset(15, 2), {}, 0);
  for (auto m : {Method::infonce, Method::dcl, Method::hard_dcl, Method::barlow}) {
    TrainConfig c = quick_config(m);
    c.max_epochs = 1;
    CHECK_NOTHROW(pretrain(split2, c));
  }
}

TEST_CASE("pretrain is bit-reproducible") {
  DatasetSplit split = split_dataset(tiny_dataset(), {}, 3);
  TrainConfig config = quick_config();
  config.seed = 3;
  PretrainResult a = pretrain(split, config);
  PretrainResult b = pretrain(split, config);
  CHECK(a.params.hash() == b.params.hash());
  REQUIRE(a.metrics.epochs.size() == b.metrics.epochs.size());
  for (std::size_t e = 0; e < a.metrics.epochs.size(); ++e) {
    CHECK(a.metrics.epochs[e].train_loss == b.metrics.epochs[e].train_loss);
    CHECK(a.metrics.epochs[e].val_loss == b.metrics.epochs[e].val_loss);
  }
  TrainConfig other = config;
  other.seed = 4;
  CHECK(pretrain(split, other).params.hash() != a.params.hash());
}

TEST_CASE("linear probe freezes the encoder") {
  DatasetSplit split = split_dataset(tiny_dataset(), {}, 0);
  TrainConfig config = quick_config();
  PretrainResult pre = pretrain(split, config);
  auto hash_before = pre.params.hash();
  ProbeResult probe = linear_probe(pre.params, split, config);
  CHECK(pre.params.hash() == hash_before);
  REQUIRE(probe.metrics.test_macro_f1.has_value());
  CHECK(*probe.metrics.test_macro_f1 >= 0.0);
  CHECK(*probe.metrics.test_macro_f1 <= 1.0);
}

TEST_CASE("early stopping honors patience and max_epochs") {
  DatasetSplit split = split_dataset(tiny_dataset(10), {}, 0);
  TrainConfig config = quick_config();
  config.max_epochs = 100;
  config.early_stop_patience = 2;
  PretrainResult r = pretrain(split, config);
  CHECK(r.metrics.epochs.size() <= 100);
  CHECK(r.metrics.epochs.size() <= r.metrics.best_epoch + config.early_stop_patience);
}

TEST_CASE("stratified_subsample per-class counts") {
  Dataset ds = tiny_dataset(10);  // 10 windows per class
  auto rows = stratified_subsample(ds, 0.5, 1);
  CHECK(rows.size() == 20);
  std::vector<std::size_t> counts(4, 0);
  for (auto r : rows) ++counts[ds.labels[r]];
  for (auto c : counts) CHECK(c == 5);

  CHECK(stratified_subsample(ds, 1.0, 1).size() == ds.num_windows());
  CHECK_THROWS_AS(stratified_subsample(ds, 0.01, 1), config_error);
  CHECK_THROWS_AS(stratified_subsample(ds, 1.5, 1), config_error);
}

TEST_CASE("finetune improves over its starting point on easy data") {
  DatasetSplit split = split_dataset(tiny_dataset(20), {}, 0);
  TrainConfig config = quick_config();
  config.max_epochs = 8;
  EncoderConfig ec = EncoderConfig::for_dataset(split.train);
  ec.projection_dim = config.projection_dim;
  ec.fusion_dim = config.fusion_dim;
  EncoderParams params = EncoderParams::init(ec, 0);
  FinetuneResult r = finetune(params, split, config, 1.0);
  REQUIRE(r.metrics.test_macro_f1.has_value());
  CHECK(*r.metrics.test_macro_f1 > 0.3);
  CHECK(classify(r.params, r.classifier, split.test).size() ==
        split.test.num_windows());
}

TEST_CASE("metrics jsonl is valid line-delimited json") {
  DatasetSplit split = split_dataset(tiny_dataset(10), {}, 0);
  TrainConfig config = quick_config();
  config.max_epochs = 2;
  PretrainResult r = pretrain(split, config);

  fs::path path = fs::temp_directory_path() / "cocoa_metrics_test.jsonl";
  write_metrics_jsonl(r.metrics, path);
  std::ifstream is(path);
  std::string line;
  std::size_t lines = 0;
  bool saw_summary = false;
  while (std::getline(is, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.contains("run_id"));
    if (j.value("summary", false)) saw_summary = true;
    ++lines;
  }
  CHECK(lines == r.metrics.epochs.size() + 1);
  CHECK(saw_summary);
  fs::remove(path);
}

TEST_CASE("batch sweep covers the grid and is sorted") {
  Dataset ds = tiny_dataset(10);
  TrainConfig base = quick_config();
  base.max_epochs = 1;
  auto rows = batch_sweep(ds, {Method::cocoa, Method::cmc}, {8}, {0, 1}, base, 2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "cmc");
  CHECK(rows[2].method == "cocoa");
  CHECK(rows[2].seed == 0);
  CHECK(rows[3].seed == 1);
  for (const auto& r : rows) CHECK(r.similarity_evaluations > 0);
}

TEST_CASE("label curve aggregates across seeds") {
  Dataset ds = tiny_dataset(10);
  TrainConfig base = quick_config();
  base.max_epochs = 1;
  auto points = label_curve(ds, Method::cocoa, {0.5, 1.0}, {0, 1}, base, 2);
  REQUIRE(points.size() == 2);
  for (const auto& p : points) {
    CHECK(p.per_seed.size() == 2);
    CHECK(p.mean_macro_f1 >= 0.0);
    CHECK(p.std_macro_f1 >= 0.0);
  }
  CHECK_THROWS_AS(label_curve(ds, Method::cocoa, {0.0}, {0}, base, 1), config_error);
}
