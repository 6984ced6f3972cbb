#include "doctest.h"

#include <cmath>

#include "egoexo/grad_check.hpp"
#include "egoexo/optim.hpp"
#include "egoexo/tensor.hpp"

using namespace egoexo;

namespace {
Tensor mat(int r, int c, std::vector<Scalar> v, bool rg = false) {
  return Tensor::from_data({r, c}, std::move(v), rg);
}
}  // namespace

TEST_CASE("matmul identity and hand-computed values") {
  Tensor eye = mat(2, 2, {1, 0, 0, 1});
  Tensor b = mat(2, 2, {3, 4, 5, 6});
  Tensor out = matmul(eye, b);
  for (size_t i = 0; i < 4; ++i) CHECK(out.data()[i] == doctest::Approx(b.data()[i]));

  Tensor a = mat(1, 2, {1, 2});
  Tensor c = mat(2, 1, {3, 4});
  CHECK(matmul(a, c).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul rejects mismatched shapes, naming both") {
  Tensor a = mat(3, 4, std::vector<Scalar>(12, 1.0));
  Tensor b = mat(3, 2, std::vector<Scalar>(6, 1.0));
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[3x4]"), ContractError);
}

TEST_CASE("matmul gradient vs central finite differences") {
  Rng rng(7);
  Tensor a = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor b = Tensor::randn({4, 2}, rng, 1.0, true);
  const double err = grad_check([&]() { return sum(matmul(a, b)); }, {a, b}, 1e-5);
  CHECK(err < 1e-4);
  // gradient of sum(a*b) wrt a equals b summed over columns
  Tensor loss = sum(matmul(a, b));
  a.zero_grad();
  b.zero_grad();
  loss.backward();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k) {
      Scalar expect = 0.0;
      for (int j = 0; j < 2; ++j) expect += b.at(k, j);
      CHECK(a.grad()[static_cast<size_t>(i) * 4 + k] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("softmax symmetry, stability, sums") {
  Tensor x = mat(1, 3, {0, 0, 0});
  Tensor y = softmax(x, 1);
  for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(1.0 / 3.0));

  Tensor big = mat(1, 2, {1000, 0});
  Tensor yb = softmax(big, 1);
  CHECK(yb.data()[0] == doctest::Approx(1.0));
  CHECK(yb.data()[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(yb.data()[0]));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor r = Tensor::randn({4, 6}, rng, 3.0);
    Tensor s = softmax(r, 1);
    for (int row = 0; row < 4; ++row) {
      Scalar total = 0.0;
      for (int c = 0; c < 6; ++c) {
        total += s.at(row, c);
        CHECK(s.at(row, c) >= 0.0);
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("softmax axis out of range") {
  Tensor x = mat(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_AS(softmax(x, 2), ContractError);
}

TEST_CASE("softmax Jacobian vs finite differences") {
  Rng rng(11);
  Tensor x = Tensor::randn({1, 5}, rng, 1.0, true);
  Tensor w = Tensor::randn({1, 5}, rng, 1.0);  // random projection makes the scalar sensitive
  const double err = grad_check([&]() { return sum(mul(softmax(x, 1), w)); }, {x}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("softmax over axis 0 matches finite differences") {
  Rng rng(12);
  Tensor x = Tensor::randn({4, 3}, rng, 1.0, true);
  Tensor w = Tensor::randn({4, 3}, rng, 1.0);
  const double err = grad_check([&]() { return sum(mul(softmax(x, 0), w)); }, {x}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("layer_norm constant row maps to beta") {
  Tensor x = mat(1, 4, {5, 5, 5, 5});
  Tensor gamma = Tensor::full({4}, 1.0);
  Tensor beta = Tensor::zeros({4});
  Tensor y = layer_norm(x, gamma, beta, 1e-5);
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(0.0));
}

TEST_CASE("layer_norm leaves an already-normalized row in place as eps -> 0") {
  Tensor x = mat(1, 2, {1, -1});
  Tensor gamma = Tensor::full({2}, 1.0);
  Tensor beta = Tensor::zeros({2});
  Tensor y = layer_norm(x, gamma, beta, 1e-12);
  CHECK(y.data()[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(y.data()[1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm rejects non-positive eps") {
  Tensor x = mat(1, 2, {1, 2});
  Tensor gamma = Tensor::full({2}, 1.0);
  Tensor beta = Tensor::zeros({2});
  CHECK_THROWS_AS(layer_norm(x, gamma, beta, 0.0), ConfigError);
}

TEST_CASE("layer_norm gradients vs finite differences") {
  Rng rng(5);
  Tensor x = Tensor::randn({2, 8}, rng, 1.0, true);
  Tensor gamma = Tensor::randn({8}, rng, 0.5, true);
  Tensor beta = Tensor::randn({8}, rng, 0.5, true);
  Tensor w = Tensor::randn({2, 8}, rng, 1.0);
  const double err = grad_check(
      [&]() { return sum(mul(layer_norm(x, gamma, beta, 1e-5), w)); }, {x, gamma, beta}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("cross_entropy perfect prediction and uniform logits") {
  // logits forcing probability ~1 on targets
  Tensor logits = mat(2, 4, {50, 0, 0, 0, 0, 50, 0, 0});
  CHECK(cross_entropy(logits, {0, 1}, -1).item() == doctest::Approx(0.0).epsilon(1e-9));

  Tensor uniform = Tensor::zeros({3, 8});
  CHECK(cross_entropy(uniform, {1, 5, 7}, -1).item() == doctest::Approx(std::log(8.0)));
}

TEST_CASE("cross_entropy ignore_index drops positions from the mean") {
  Rng rng(9);
  Tensor logits = Tensor::randn({4, 10}, rng, 1.0);
  const std::vector<int> targets{3, -1, 7, -1};
  // hand-summed per-position NLL over the two active rows
  Scalar expect = 0.0;
  for (int r : {0, 2}) {
    Scalar mx = logits.at(r, 0);
    for (int v = 1; v < 10; ++v) mx = std::max(mx, logits.at(r, v));
    Scalar z = 0.0;
    for (int v = 0; v < 10; ++v) z += std::exp(logits.at(r, v) - mx);
    expect += mx + std::log(z) - logits.at(r, targets[static_cast<size_t>(r)]);
  }
  expect /= 2.0;
  CHECK(cross_entropy(logits, targets, -1).item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("cross_entropy with every position ignored is an explicit error") {
  Tensor logits = Tensor::zeros({2, 4});
  CHECK_THROWS_WITH_AS(cross_entropy(logits, {-1, -1}, -1), doctest::Contains("empty supervision"),
                       ContractError);
}

TEST_CASE("cross_entropy gradient vs finite differences") {
  Rng rng(13);
  Tensor logits = Tensor::randn({3, 6}, rng, 1.0, true);
  const std::vector<int> targets{2, -1, 5};
  const double err =
      grad_check([&]() { return cross_entropy(logits, targets, -1); }, {logits}, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("backward basics: sum and elementwise square") {
  Rng rng(1);
  Tensor x = Tensor::randn({2, 3}, rng, 1.0, true);
  Tensor loss = sum(x);
  loss.backward();
  for (Scalar g : x.grad()) CHECK(g == doctest::Approx(1.0));

  Tensor y = Tensor::randn({2, 3}, rng, 1.0, true);
  Tensor loss2 = sum(mul(y, y));
  loss2.backward();
  for (size_t i = 0; i < y.size(); ++i)
    CHECK(y.grad()[i] == doctest::Approx(2.0 * y.data()[i]));
}

TEST_CASE("backward on a non-scalar is a shape error") {
  Tensor x = Tensor::zeros({2, 2}, true);
  CHECK_THROWS_AS(x.backward(), ContractError);
}

TEST_CASE("repeated backward accumulates until zero_grad") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  auto make_loss = [&]() { return sum(mul(x, x)); };
  make_loss().backward();
  make_loss().backward();
  CHECK(x.grad()[0] == doctest::Approx(4.0));  // 2x accumulated twice
  x.zero_grad();
  make_loss().backward();
  CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("gradient absent off the path to the loss") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  Tensor y = Tensor::from_data({2}, {3.0, 4.0}, true);
  sum(mul(x, x)).backward();
  CHECK(!y.has_grad());
}

TEST_CASE("gelu and composite ops pass finite differences on random shapes") {
  Rng rng(21);
  for (int seed = 0; seed < 20; ++seed) {
    Rng local = rng.fork(static_cast<uint64_t>(seed));
    const int m = 2 + local.next_int(3);
    const int k = 2 + local.next_int(3);
    const int n = 2 + local.next_int(3);
    Tensor a = Tensor::randn({m, k}, local, 1.0, true);
    Tensor b = Tensor::randn({k, n}, local, 1.0, true);
    Tensor bias = Tensor::randn({n}, local, 1.0, true);
    Tensor gamma = Tensor::full({n}, 1.0, true);
    Tensor beta = Tensor::zeros({n}, true);
    std::vector<int> targets(static_cast<size_t>(m));
    for (auto& t : targets) t = local.next_int(n);
    auto fn = [&]() {
      Tensor h = gelu(add_bias(matmul(a, b), bias));
      Tensor ln = layer_norm(h, gamma, beta, 1e-5);
      return cross_entropy(ln, targets, -1);
    };
    const double err = grad_check(fn, {a, b, bias, gamma, beta}, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("grad_check on a linear map is exact to rounding") {
  Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
  Tensor w = Tensor::from_data({3}, {2.0, 3.0, -1.0});
  const double err = grad_check([&]() { return sum(mul(x, w)); }, {x}, 1e-5);
  CHECK(err < 1e-8);
}

TEST_CASE("grad_check on softmax-then-sum sees the constant function") {
  Rng rng(17);
  Tensor x = Tensor::randn({1, 6}, rng, 1.0, true);
  const double err = grad_check([&]() { return sum(softmax(x, 1)); }, {x}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("grad_check composed matmul+layer_norm+cross_entropy") {
  Rng rng(23);
  Tensor a = Tensor::randn({4, 5}, rng, 1.0, true);
  Tensor b = Tensor::randn({5, 7}, rng, 1.0, true);
  Tensor gamma = Tensor::full({7}, 1.0, true);
  Tensor beta = Tensor::zeros({7}, true);
  const std::vector<int> targets{1, 3, -1, 6};
  auto fn = [&]() {
    return cross_entropy(layer_norm(matmul(a, b), gamma, beta, 1e-5), targets, -1);
  };
  CHECK(grad_check(fn, {a, b, gamma, beta}, 1e-5) < 1e-4);
}

TEST_CASE("grad_check rejects non-scalar functions and bad eps") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(grad_check([&]() { return mul(x, x); }, {x}, 1e-5), ContractError);
  CHECK_THROWS_AS(grad_check([&]() { return sum(x); }, {x}, 1e-2), ConfigError);
}

TEST_CASE("slice/concat/embedding/transpose gradients") {
  Rng rng(31);
  Tensor x = Tensor::randn({5, 4}, rng, 1.0, true);
  Tensor table = Tensor::randn({6, 4}, rng, 1.0, true);
  const std::vector<int> ids{1, 1, 4};
  Tensor w = Tensor::randn({3 + 2, 4}, rng, 1.0);
  auto fn = [&]() {
    Tensor top = slice_rows(x, 0, 2);
    Tensor emb = embedding(table, ids);
    Tensor cat = concat_rows({emb, top});
    return sum(mul(cat, w));
  };
  CHECK(grad_check(fn, {x, table}, 1e-5) < 1e-4);

  Tensor y = Tensor::randn({3, 4}, rng, 1.0, true);
  Tensor wy = Tensor::randn({4, 3}, rng, 1.0);
  CHECK(grad_check([&]() { return sum(mul(transpose(y), wy)); }, {y}, 1e-5) < 1e-4);

  Tensor z = Tensor::randn({4, 6}, rng, 1.0, true);
  Tensor wz = Tensor::randn({4, 2}, rng, 1.0);
  CHECK(grad_check([&]() { return sum(mul(slice_cols(z, 1, 3), wz)); }, {z}, 1e-5) < 1e-4);

  Tensor m = Tensor::randn({5, 3}, rng, 1.0, true);
  Tensor wm = Tensor::randn({1, 3}, rng, 1.0);
  CHECK(grad_check([&]() { return sum(mul(mean_rows(m), wm)); }, {m}, 1e-5) < 1e-4);

  Tensor p = Tensor::randn({2, 6}, rng, 1.0, true);
  Tensor q = Tensor::randn({2, 6}, rng, 1.0, true);
  CHECK(grad_check([&]() { return mse(p, q); }, {p, q}, 1e-5) < 1e-4);
}

TEST_CASE("adamw: zero gradient and zero weight decay leave params unchanged") {
  ParamStore store;
  store.add("w", Tensor::from_data({2}, {1.0, -2.0}, true));
  store.at("w").grad();  // allocate zero grads
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt(cfg);
  opt.step(store);
  CHECK(store.at("w").data()[0] == doctest::Approx(1.0));
  CHECK(store.at("w").data()[1] == doctest::Approx(-2.0));
}

TEST_CASE("adamw: first-step magnitude bounded by lr, direction opposes gradient") {
  ParamStore store;
  store.add("p", Tensor::from_data({1}, {1.0}, true));
  store.at("p").grad()[0] = 1.0;
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  cfg.clip_norm = 0.0;
  AdamW opt(cfg);
  opt.step(store);
  const double p = store.at("p").data()[0];
  CHECK(p < 1.0);
  CHECK(std::abs(p - 1.0) <= 0.1 + 1e-12);
}

TEST_CASE("adamw: per-group learning rates scale the update") {
  // identical gradients; lora group at lr 1e-5, base group at 2e-6
  ParamStore store;
  store.add("base.w", Tensor::from_data({1}, {0.5}, true));
  store.add("lora.w", Tensor::from_data({1}, {0.5}, true));
  store.at("base.w").grad()[0] = 1.0;
  store.at("lora.w").grad()[0] = 1.0;
  AdamWConfig cfg;
  cfg.lr = 2e-6;
  cfg.lr_lora = 1e-5;
  cfg.weight_decay = 0.0;
  cfg.clip_norm = 0.0;
  AdamW opt(cfg);
  opt.step(store);
  // hand-recomputed first step: delta = lr * g / (sqrt(g^2) + eps) = lr / (1 + eps)
  const double d_base = 0.5 - store.at("base.w").data()[0];
  const double d_lora = 0.5 - store.at("lora.w").data()[0];
  CHECK(d_base == doctest::Approx(2e-6 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(d_lora == doctest::Approx(1e-5 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(d_lora / d_base == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("adamw: frozen parameters are bit-identical across steps") {
  ParamStore store;
  store.add("frozen.w", Tensor::from_data({2}, {0.25, -0.75}, false));
  store.add("live.w", Tensor::from_data({1}, {1.0}, true));
  const auto before = store.at("frozen.w").data();
  AdamW opt(AdamWConfig{});
  for (int i = 0; i < 5; ++i) {
    store.at("live.w").zero_grad();
    store.at("live.w").grad()[0] = 0.3;
    // frozen param never even receives a grad buffer
    opt.step(store);
  }
  CHECK(store.at("frozen.w").data() == before);
}

TEST_CASE("adamw: NaN gradient aborts naming the parameter") {
  ParamStore store;
  store.add("bad.param", Tensor::from_data({1}, {1.0}, true));
  store.at("bad.param").grad()[0] = std::nan("");
  AdamWConfig cfg;
  cfg.clip_norm = 0.0;
  AdamW opt(cfg);
  CHECK_THROWS_WITH_AS(opt.step(store), doctest::Contains("bad.param"), ContractError);
}

TEST_CASE("adamw: decoupled weight decay shrinks even with zero gradient") {
  ParamStore store;
  store.add("w", Tensor::from_data({1}, {2.0}, true));
  store.at("w").grad();  // zero grad
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  cfg.clip_norm = 0.0;
  AdamW opt(cfg);
  opt.step(store);
  CHECK(store.at("w").data()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
}

TEST_CASE("determinism: identical seeds give bit-identical training trajectories") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    ParamStore store;
    store.add("w", Tensor::randn({4, 4}, rng, 0.1, true));
    AdamW opt(AdamWConfig{});
    for (int step = 0; step < 10; ++step) {
      Tensor x = Tensor::randn({2, 4}, rng, 1.0);
      store.zero_grad();
      Tensor loss = mse(matmul(x, store.at("w")), x);
      loss.backward();
      opt.step(store);
    }
    return store.at("w").data();
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}
