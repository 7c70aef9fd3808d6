#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cocoa/checkpoint.hpp"
#include "cocoa/encoder.hpp"
#include "cocoa/errors.hpp"
#include "cocoa/ops.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/synth.hpp"
#include "support/gradcheck.hpp"
#include "support/util.hpp"

using namespace cocoa;
namespace fs = std::filesystem;

namespace {

EncoderConfig small_config() {
  EncoderConfig c;
  c.window_length = 64;
  c.input_channels = {3, 2};
  c.modality_names = {"acc", "gyro"};
  c.projection_dim = 8;
  c.fusion_dim = 8;
  return c;
}

ModalityBatch small_batch(std::uint64_t seed = 1) {
  auto rng = make_rng(seed);
  ModalityBatch b;
  b.names = {"acc", "gyro"};
  b.modalities = {testutil::random_tensor({4, 64, 3}, rng),
                  testutil::random_tensor({4, 64, 2}, rng)};
  b.window_ids = {0, 1, 2, 3};
  return b;
}

}  // namespace

TEST_CASE("config validation and derived sizes") {
  EncoderConfig c = small_config();
  c.validate();
  // 64 -> 55 -> 48 -> 45 with kernels 10, 8, 4.
  CHECK(c.conv_output_length() == 45);
  c.window_length = 10;
  CHECK_THROWS_AS(c.validate(), config_error);
}

TEST_CASE("param_count matches the allocated tensors") {
  EncoderConfig c = small_config();
  EncoderParams p = EncoderParams::init(c, 0);
  std::size_t total = 0;
  for (auto& [name, t] : p.named_tensors()) total += t.size();
  CHECK(total == c.param_count());
}

TEST_CASE("init is seed-deterministic and seed-sensitive") {
  EncoderConfig c = small_config();
  CHECK(EncoderParams::init(c, 5).hash() == EncoderParams::init(c, 5).hash());
  CHECK(EncoderParams::init(c, 5).hash() != EncoderParams::init(c, 6).hash());
}

TEST_CASE("encode output shapes and determinism") {
  EncoderParams p = EncoderParams::init(small_config(), 0);
  ModalityBatch b = small_batch();
  EmbeddingSet z = encode(p, b);
  REQUIRE(z.size() == 2);
  CHECK(z[0].shape() == std::vector<std::size_t>{4, 8});
  CHECK(z[1].shape() == std::vector<std::size_t>{4, 8});

  EmbeddingSet z2 = encode(p, b);
  for (std::size_t i = 0; i < z[0].size(); ++i) CHECK(z[0].data()[i] == z2[0].data()[i]);

  Tensor cat = encode_concat(p, b);
  CHECK(cat.shape() == std::vector<std::size_t>{4, 16});
  CHECK(cat.data()[8] == z[1].data()[0]);
}

TEST_CASE("encoder gradients flow to every parameter") {
  EncoderConfig c = small_config();
  c.window_length = 16;
  c.kernel_sizes = {4, 3, 2};
  c.filter_counts = {4, 4, 4};
  EncoderParams p = EncoderParams::init(c, 3);
  auto rng = make_rng(4);
  ModalityBatch b;
  b.names = {"acc", "gyro"};
  b.modalities = {testutil::random_tensor({3, 16, 3}, rng),
                  testutil::random_tensor({3, 16, 2}, rng)};
  b.window_ids = {0, 1, 2};

  Tape tape;
  p.mark_trainable(tape);
  Tensor loss = sum(mul(encode_concat(p, b), encode_concat(p, b)));
  tape.backward(loss);
  for (auto& [name, t] : p.named_tensors()) {
    INFO(name);
    bool any = false;
    for (double g : t.grad())
      if (g != 0.0) any = true;
    CHECK(any);
  }
}

TEST_CASE("encode gradcheck through the full stack") {
  EncoderConfig c = small_config();
  c.window_length = 12;
  c.kernel_sizes = {3, 3, 2};
  c.filter_counts = {3, 3, 3};
  c.projection_dim = 4;
  c.fusion_dim = 4;
  c.input_channels = {2};
  c.modality_names = {"acc"};
  EncoderParams p = EncoderParams::init(c, 9);
  auto rng = make_rng(10);
  ModalityBatch b;
  b.names = {"acc"};
  b.modalities = {testutil::random_tensor({2, 12, 2}, rng)};
  b.window_ids = {0, 1};

  auto leaves = p.all_tensors();
  auto r = testutil::gradcheck([&] { return sum(exp(scale(encode_concat(p, b), 0.5))); },
                               leaves);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("checkpoint round trip preserves every parameter bit") {
  EncoderConfig c = small_config();
  EncoderParams p = EncoderParams::init(c, 21);
  fs::path path = fs::temp_directory_path() / "cocoa_test_ckpt.bin";
  save_checkpoint(p, path);
  EncoderParams q = load_checkpoint(c, path);
  CHECK(p.hash() == q.hash());
  fs::remove(path);
}

TEST_CASE("checkpoint rejects corruption") {
  EncoderConfig c = small_config();
  EncoderParams p = EncoderParams::init(c, 22);
  fs::path path = fs::temp_directory_path() / "cocoa_test_ckpt2.bin";
  save_checkpoint(p, path);

  SUBCASE("truncated file") {
    auto size = fs::file_size(path);
    fs::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(c, path), io_error);
  }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(c, path), input_error);
  }
  SUBCASE("mismatched architecture") {
    EncoderConfig other = c;
    other.projection_dim = 16;
    CHECK_THROWS_AS(load_checkpoint(other, path), input_error);
  }
  fs::remove(path);
}

TEST_CASE("for_dataset mirrors dataset geometry") {
  SynthConfig sc;
  sc.windows_per_class = 4;
  Dataset ds = generate(sc);
  EncoderConfig c = EncoderConfig::for_dataset(ds);
  CHECK(c.window_length == sc.window);
  CHECK(c.input_channels.size() == sc.num_modalities);
  CHECK(c.input_channels[0] == sc.channels_per_modality);
}
