#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "cocoa/batching.hpp"
#include "cocoa/errors.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/synth.hpp"

using namespace cocoa;

namespace {

std::vector<StreamData> ramp_streams(std::size_t length) {
  StreamData a{"acc", 2, {}};
  StreamData b{"gyro", 1, {}};
  for (std::size_t t = 0; t < length; ++t) {
    a.values.push_back(static_cast<double>(t));
    a.values.push_back(static_cast<double>(t) + 0.5);
    b.values.push_back(static_cast<double>(t) * 2.0);
  }
  return {a, b};
}

}  // namespace

TEST_CASE("make_windows stride and alignment") {
  auto streams = ramp_streams(20);

  SUBCASE("no overlap") {
    Dataset ds = make_windows(streams, 5, 0.0);
    CHECK(ds.num_windows() == 4);
    CHECK(ds.window_starts == std::vector<std::size_t>{0, 5, 10, 15});
    // First value of window 2 in modality 0 is raw step 10.
    CHECK(ds.modalities[0].values[2 * 5 * 2] == 10.0);
  }
  SUBCASE("50 percent overlap") {
    Dataset ds = make_windows(streams, 4, 0.5);
    CHECK(ds.window_starts[1] == 2);
    CHECK(ds.num_windows() == 9);
  }
}

TEST_CASE("make_windows majority label with earlier-class tie break") {
  auto streams = ramp_streams(8);
  std::vector<std::uint32_t> labels{0, 0, 1, 1, 2, 2, 2, 2};
  Dataset ds = make_windows(streams, 4, 0.0, labels, {"a", "b", "c"});
  REQUIRE(ds.num_windows() == 2);
  CHECK(ds.labels[0] == 0);  // 2 vs 2 tie: earlier class wins
  CHECK(ds.labels[1] == 2);
}

TEST_CASE("sample_batch excludes temporally overlapping windows") {
  auto streams = ramp_streams(40);
  Dataset ds = make_windows(streams, 8, 0.5);  // stride 4, heavy overlap
  auto rng = make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    ModalityBatch batch = sample_batch(ds, 3, rng);
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t j = i + 1; j < batch.size(); ++j) {
        auto si = ds.window_starts[batch.window_ids[i]];
        auto sj = ds.window_starts[batch.window_ids[j]];
        CHECK(std::llabs(static_cast<long long>(si) - static_cast<long long>(sj)) >=
              static_cast<long long>(ds.window_span));
      }
  }
}

TEST_CASE("sample_batch is deterministic per rng seed and errors when unfillable") {
  auto streams = ramp_streams(60);
  Dataset ds = make_windows(streams, 10, 0.0);
  auto r1 = make_rng(5), r2 = make_rng(5);
  CHECK(sample_batch(ds, 4, r1).window_ids == sample_batch(ds, 4, r2).window_ids);
  auto r3 = make_rng(5);
  CHECK_THROWS_AS(sample_batch(ds, 7, r3), sampling_error);
}

TEST_CASE("split_dataset contiguity and fractions") {
  SynthConfig sc;
  sc.windows_per_class = 25;  // 100 windows
  Dataset ds = generate(sc);
  DatasetSplit split = split_dataset(ds, {}, 0);
  CHECK(split.train.num_windows() == 72);
  CHECK(split.val.num_windows() == 8);
  CHECK(split.test.num_windows() == 20);

  auto max_start = [](const Dataset& d) {
    return *std::max_element(d.window_starts.begin(), d.window_starts.end());
  };
  auto min_start = [](const Dataset& d) {
    return *std::min_element(d.window_starts.begin(), d.window_starts.end());
  };
  CHECK(max_start(split.train) < min_start(split.val));
  CHECK(max_start(split.val) < min_start(split.test));

  SUBCASE("bad fractions") {
    CHECK_THROWS_AS(split_dataset(ds, {0.5, 0.2, 0.2}, 0), config_error);
  }
  SUBCASE("empty nonzero split") {
    SynthConfig tiny;
    tiny.windows_per_class = 1;
    tiny.num_classes = 2;
    CHECK_THROWS_AS(split_dataset(generate(tiny), {0.9, 0.001, 0.099}, 0), config_error);
  }
}

TEST_CASE("subset and select_modalities") {
  SynthConfig sc;
  sc.windows_per_class = 5;
  Dataset ds = generate(sc);
  Dataset sub = ds.subset({0, 3, 7});
  CHECK(sub.num_windows() == 3);
  CHECK(sub.labels[1] == ds.labels[3]);
  CHECK(sub.modalities[0].values[0] == ds.modalities[0].values[0]);

  Dataset two = ds.select_modalities({2, 0});
  REQUIRE(two.modalities.size() == 2);
  CHECK(two.modalities[0].name == ds.modalities[2].name);
  CHECK(two.modalities[1].name == ds.modalities[0].name);
  CHECK_THROWS_AS(ds.select_modalities({9}), config_error);
}

TEST_CASE("content_hash tracks data changes") {
  SynthConfig sc;
  sc.windows_per_class = 4;
  Dataset a = generate(sc);
  Dataset b = generate(sc);
  CHECK(a.content_hash() == b.content_hash());
  b.modalities[0].values[0] += 1.0;
  CHECK(a.content_hash() != b.content_hash());
}

TEST_CASE("full_batch and batch_of carry labels") {
  SynthConfig sc;
  sc.windows_per_class = 3;
  Dataset ds = generate(sc);
  ModalityBatch all = full_batch(ds);
  CHECK(all.size() == ds.num_windows());
  CHECK(all.labels == ds.labels);

  ModalityBatch some = batch_of(ds, {1, 4});
  CHECK(some.size() == 2);
  CHECK(some.labels[1] == ds.labels[4]);
}
