#include <doctest.h>

#include <cmath>

#include "cocoa/errors.hpp"
#include "cocoa/ops.hpp"
#include "cocoa/rng.hpp"
#include "cocoa/tensor.hpp"
#include "support/gradcheck.hpp"
#include "support/util.hpp"

using namespace cocoa;

TEST_CASE("tensor factories and scalar access") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.size() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.data()[5] == 0.0);

  Tensor s = Tensor::scalar(2.5);
  CHECK(s.value() == 2.5);
  CHECK_THROWS_AS(z.value(), usage_error);

  Tensor f = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(f.data()[3] == 4.0);
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), usage_error);
}

TEST_CASE("tape backward on a simple chain") {
  Tape tape;
  Tensor x = Tensor::from_data({3}, {1.0, 2.0, 3.0});
  x.mark_trainable(tape);
  Tensor loss = sum(mul(x, x));  // d/dx = 2x
  tape.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
}

TEST_CASE("tape rejects misuse") {
  Tape tape;
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.mark_trainable(tape);

  SUBCASE("non-scalar loss") { CHECK_THROWS_AS(tape.backward(x), usage_error); }
  SUBCASE("double backward") {
    Tensor loss = sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), usage_error);
  }
  SUBCASE("constant loss leaves gradients zero") {
    Tensor loss = Tensor::scalar(7.0);
    tape.backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(tape.consumed());
  }
}

TEST_CASE("elementwise forward values") {
  Tensor a = Tensor::from_data({2}, {1.0, -2.0});
  Tensor b = Tensor::from_data({2}, {3.0, 4.0});
  CHECK(add(a, b).data()[1] == 2.0);
  CHECK(sub(a, b).data()[0] == -2.0);
  CHECK(mul(a, b).data()[1] == -8.0);
  CHECK(divide(b, a).data()[1] == -2.0);
  CHECK(relu(a).data()[1] == 0.0);
  CHECK(clamp_min(a, 0.5).data()[0] == 1.0);
  CHECK(clamp_min(a, 0.5).data()[1] == 0.5);
  CHECK(exp(Tensor::from_data({1}, {0.0})).data()[0] == 1.0);
  CHECK_THROWS_AS(add(a, Tensor::zeros({3})), usage_error);
}

TEST_CASE("reductions") {
  Tensor m = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum(m).value() == 21.0);
  CHECK(mean(m).value() == 3.5);
  Tensor rows = sum_cols(m);
  CHECK(rows.shape() == std::vector<std::size_t>{2});
  CHECK(rows.data()[0] == 6.0);
  CHECK(rows.data()[1] == 15.0);
}

TEST_CASE("matmul and friends") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 2}, {5, 6, 7, 8});
  Tensor c = matmul(a, b);
  CHECK(c.data()[0] == 19.0);
  CHECK(c.data()[3] == 50.0);

  Tensor ct = matmul_tn(a, b);  // a^T . b
  CHECK(ct.data()[0] == 1 * 5 + 3 * 7);

  CHECK(transpose(a).data()[1] == 3.0);
  CHECK(diag_part(a).data()[1] == 4.0);

  Tensor joined = concat_cols(std::vector<Tensor>{a, b});
  CHECK(joined.shape() == std::vector<std::size_t>{2, 4});
  CHECK(joined.data()[2] == 5.0);
  CHECK(joined.data()[4] == 3.0);
}

TEST_CASE("row geometry") {
  Tensor a = Tensor::from_data({2, 2}, {3, 4, 0, 2});
  Tensor n = row_normalize(a);
  CHECK(n.data()[0] == doctest::Approx(0.6));
  CHECK(n.data()[1] == doctest::Approx(0.8));
  CHECK(n.data()[3] == doctest::Approx(1.0));
  CHECK_THROWS_AS(row_normalize(Tensor::zeros({1, 2})), numeric_error);

  Tensor b = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  CHECK(rowwise_dot(a, b).data()[0] == 3.0);
  CHECK(gram(a, b).data()[1] == 4.0);  // a_0 . b_1

  Tensor u = upper_pairs_dot(Tensor::from_data({3, 1}, {1, 2, 3}));
  CHECK(u.shape() == std::vector<std::size_t>{3});
  CHECK(u.data()[0] == 2.0);  // (0,1)
  CHECK(u.data()[1] == 3.0);  // (0,2)
  CHECK(u.data()[2] == 6.0);  // (1,2)
}

TEST_CASE("standardize_cols zero-variance flagging") {
  Tensor a = Tensor::from_data({3, 2}, {1, 5, 1, 7, 1, 9});
  std::vector<std::size_t> flat;
  Tensor s = standardize_cols(a, 1e-9, &flat);
  REQUIRE(flat.size() == 1);
  CHECK(flat[0] == 0);
  double mu = (s.data()[1] + s.data()[3] + s.data()[5]) / 3.0;
  CHECK(mu == doctest::Approx(0.0));
}

TEST_CASE("conv1d shape and values") {
  // One sample, T=3, C=1; kernel K=2, F=1, weights {1, -1}: discrete diff.
  Tensor x = Tensor::from_data({1, 3, 1}, {1, 4, 9});
  Tensor k = Tensor::from_data({2, 1, 1}, {-1, 1});
  Tensor bias = Tensor::from_data({1}, {0.5});
  Tensor y = conv1d(x, k, bias);
  CHECK(y.shape() == std::vector<std::size_t>{1, 2, 1});
  CHECK(y.data()[0] == doctest::Approx(3.5));
  CHECK(y.data()[1] == doctest::Approx(5.5));
}

TEST_CASE("layer_norm normalizes channels per position") {
  Tensor x = Tensor::from_data({1, 1, 4}, {1, 2, 3, 4});
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor shift = Tensor::zeros({4});
  Tensor y = layer_norm(x, gain, shift, 1e-9);
  double mu = 0.0, var = 0.0;
  for (double v : y.data()) mu += v;
  mu /= 4.0;
  for (double v : y.data()) var += (v - mu) * (v - mu);
  CHECK(mu == doctest::Approx(0.0));
  CHECK(var / 4.0 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("global_avg_pool and dense") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor p = global_avg_pool(x);
  CHECK(p.shape() == std::vector<std::size_t>{1, 2});
  CHECK(p.data()[0] == 2.0);
  CHECK(p.data()[1] == 3.0);

  Tensor w = Tensor::from_data({2, 1}, {1, 1});
  Tensor b = Tensor::from_data({1}, {-1});
  CHECK(dense(p, w, b).data()[0] == 4.0);
}

TEST_CASE("softmax_cross_entropy") {
  Tensor logits = Tensor::from_data({2, 2}, {10, 0, 0, 10});
  std::vector<std::uint32_t> labels{0, 1};
  CHECK(softmax_cross_entropy(logits, labels).value() ==
        doctest::Approx(std::log(1.0 + std::exp(-10.0))));
  std::vector<std::uint32_t> bad{0, 2};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), input_error);
}

TEST_CASE("spot gradient checks across op families") {
  auto rng = make_rng(42);
  // Inputs shifted away from relu/clamp kinks and log/sqrt domain edges.
  Tensor a = testutil::random_tensor({3, 4}, rng, 2.0, 0.3);
  Tensor b = testutil::random_tensor({3, 4}, rng, 3.0, 0.3);

  auto check = [&](const char* what, std::function<Tensor()> f,
                   std::vector<Tensor> leaves) {
    auto r = testutil::gradcheck(f, std::move(leaves));
    INFO(what);
    CHECK(r.max_rel_err < 1e-6);
  };

  check("mul+exp", [&] { return sum(exp(scale(mul(a, b), 0.05))); }, {a, b});
  check("divide+log", [&] { return mean(log(divide(b, a))); }, {a, b});
  check("matmul", [&] { return sum(matmul(a, transpose(b))); }, {a, b});
  check("row_normalize", [&] { return sum(mul(row_normalize(a), b)); }, {a});
  check("standardize", [&] { return sum(mul(standardize_cols(a, 1e-9), b)); }, {a});
}
