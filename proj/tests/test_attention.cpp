#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vqa/attention.hpp"
#include "vqa/errors.hpp"
#include "vqa/gradcheck.hpp"

using namespace vqa;
using testing::random_tensor;

namespace {

nn::LinearParams random_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {random_tensor({out, in}, rng), random_tensor({out}, rng)};
}

AttentionHeadParams random_head(std::size_t dv, std::size_t h, std::size_t width, bool fc, std::mt19937_64& rng) {
  AttentionHeadParams p;
  p.fa = random_linear(dv, width, rng);
  p.fb = random_linear(h, width, rng);
  if (fc) p.fc = random_linear(width, width, rng);
  p.score = random_linear(width, 1, rng);
  return p;
}

oracle::Affine to_affine(const nn::LinearParams& p) { return {oracle::to_mat(p.weight), oracle::to_vec(p.bias)}; }

oracle::Head to_oracle(const AttentionHeadParams& p) {
  oracle::Head h;
  h.fa = to_affine(p.fa);
  h.fb = to_affine(p.fb);
  h.score = to_affine(p.score);
  if (p.fc) {
    h.has_fc = true;
    h.fc = to_affine(*p.fc);
  }
  return h;
}

const ActivationSpec kLeaky{ad::Activation::kLeakyRelu, 0.1};

struct Case {
  AttentionConfig config;
  std::vector<AttentionHeadParams> heads;
  Tensor features, question;
};

Case random_case(std::mt19937_64& rng, Normalization norm) {
  Case c;
  c.config.heads = testing::random_size(rng, 1, 3);
  c.config.normalization = norm;
  const std::size_t k = testing::random_size(rng, 1, 8), dv = testing::random_size(rng, 1, 5),
                    h = testing::random_size(rng, 1, 4), width = testing::random_size(rng, 1, 6);
  for (std::size_t i = 0; i < c.config.heads; ++i) c.heads.push_back(random_head(dv, h, width, true, rng));
  c.features = random_tensor({k, dv}, rng, -2, 2);
  c.question = random_tensor({h}, rng);
  return c;
}

}  // namespace

TEST_CASE("presets") {
  CHECK(attention_preset("A3").heads == 1);
  CHECK(attention_preset("A3").normalization == Normalization::kSoftmax);
  CHECK(attention_preset("A3S").normalization == Normalization::kSigmoid);
  CHECK(attention_preset("A3x2").heads == 2);
  CHECK(attention_preset("A3x3").heads == 3);
  CHECK(attention_preset("A3Sx2").heads == 2);
  CHECK(attention_preset("A3Sx2").normalization == Normalization::kSigmoid);
  CHECK(attention_preset("A3").use_fc);
  CHECK_THROWS_AS(attention_preset("AP"), ConfigError);
}

TEST_CASE("head_scores examples") {
  std::mt19937_64 rng(1);
  AttentionHeadParams p = random_head(3, 2, 5, true, rng);
  p.score.weight = Tensor(Shape{1, 5});
  p.score.bias = Tensor::vector({3.0});
  const Tensor features = random_tensor({4, 3}, rng);
  const Tensor s = head_scores(features, random_tensor({2}, rng), p);
  for (double v : s.data()) CHECK(v == 3.0);

  AttentionHeadParams q = random_head(3, 2, 5, true, rng);
  q.fa.weight = Tensor(Shape{5, 3});
  q.fa.bias = Tensor(Shape{5});
  const Tensor sq = head_scores(features, random_tensor({2}, rng), q);
  for (double v : sq.data()) CHECK(v == sq[0]);

  CHECK_THROWS_AS(head_scores(Tensor(Shape{0, 3}), random_tensor({2}, rng), p), ContractError);
}

TEST_CASE("head_scores matches the scalar oracle") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    const bool fc = seed % 2 == 0;
    const AttentionHeadParams p = random_head(3, 2, 5, fc, rng);
    const Tensor features = random_tensor({4, 3}, rng), q = random_tensor({2}, rng);
    for (const auto& [spec, name] : {std::pair{kLeaky, "leaky_relu"},
                                     std::pair{ActivationSpec{ad::Activation::kTanh, 0.1}, "tanh"},
                                     std::pair{ActivationSpec{ad::Activation::kRelu, 0.1}, "relu"}}) {
      const Tensor got = head_scores(features, q, p, spec);
      const auto expect = oracle::head_scores(oracle::to_mat(features), oracle::to_vec(q), to_oracle(p), name, 0.1);
      for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(got[i] - expect[i]) <= 1e-12);
    }
  }
}

TEST_CASE("normalize examples") {
  const Tensor zeros = Tensor::vector({0, 0});
  CHECK(normalize(zeros, Normalization::kSoftmax).values() == std::vector<double>{0.5, 0.5});
  CHECK(normalize(zeros, Normalization::kSigmoid).values() == std::vector<double>{0.5, 0.5});
  const Tensor ten = normalize(Tensor::vector({10, 10}), Normalization::kSigmoid);
  CHECK(ten[0] == doctest::Approx(0.9999546021312976).epsilon(1e-15));
  CHECK(ten[0] + ten[1] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("combine_heads examples") {
  const Tensor one = Tensor::matrix(1, 3, {0.2, 0.3, 0.5});
  CHECK(combine_heads(one).values() == one.values());
  const Tensor onehots = Tensor::matrix(2, 4, {1, 0, 0, 0, 0, 1, 0, 0});
  CHECK(combine_heads(onehots).values() == std::vector<double>{1, 1, 0, 0});
  CHECK(combine_heads(onehots, true).values() == std::vector<double>{0.5, 0.5, 0, 0});
}

TEST_CASE("pool examples and oracle") {
  std::mt19937_64 rng(3);
  const Tensor v = random_tensor({5, 3}, rng);
  Tensor onehot(Shape{5});
  onehot[2] = 1.0;
  const Tensor picked = pool(v, onehot);
  for (std::size_t c = 0; c < 3; ++c) CHECK(picked[c] == v.at(2, c));
  const Tensor mean = pool(v, Tensor(Shape{5}, 0.2));
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0;
    for (std::size_t r = 0; r < 5; ++r) m += v.at(r, c);
    CHECK(mean[c] == doctest::Approx(m / 5).epsilon(1e-14));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor f = random_tensor({5, 3}, rng), a = random_tensor({5}, rng, 0, 1);
    const auto expect = oracle::pool(oracle::to_mat(f), oracle::to_vec(a));
    const Tensor got = pool(f, a);
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(got[c] - expect[c]) <= 1e-12);
  }
}

TEST_CASE("attend examples") {
  std::mt19937_64 rng(4);
  AttentionConfig a3 = attention_preset("A3");
  AttentionHeadParams p = random_head(3, 2, 4, true, rng);
  // A score that depends only on f_a's first unit, saturated on row 1.
  p.fa.weight = Tensor(Shape{4, 3});
  p.fa.bias = Tensor(Shape{4});
  p.fa.weight.at(0, 0) = 1.0;
  p.fb.weight = Tensor(Shape{4, 2});
  p.fb.bias = Tensor(Shape{4}, 1.0);
  p.fc.reset();
  p.score.weight = Tensor(Shape{1, 4});
  p.score.weight.at(0, 0) = 1.0;
  Tensor features = random_tensor({5, 3}, rng);
  for (std::size_t r = 0; r < 5; ++r) features.at(r, 0) = 0.0;
  features.at(1, 0) = 50.0;
  const AttentionOutput out = attend(a3, {p}, features, random_tensor({2}, rng), kLeaky);
  for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(out.pooled[c] - features.at(1, c)) <= 1e-9 * std::max(1.0, std::abs(features.at(1, c))));

  const AttentionHeadParams h = random_head(3, 2, 4, true, rng);
  const Tensor q = random_tensor({2}, rng);
  const AttentionOutput single = attend(a3, {h}, features, q, kLeaky);
  const AttentionOutput twice = attend(attention_preset("A3x2"), {h, h}, features, q, kLeaky);
  for (std::size_t i = 0; i < 5; ++i) CHECK(twice.combined[i] == 2.0 * single.combined[i]);
}

TEST_CASE("attend equals composing the public operations, bitwise") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    std::mt19937_64 rng(seed);
    const Case c = random_case(rng, seed % 2 ? Normalization::kSoftmax : Normalization::kSigmoid);
    const AttentionOutput out = attend(c.config, c.heads, c.features, c.question, kLeaky);
    const std::size_t k = c.features.shape()[0];
    Tensor per_head(Shape{c.config.heads, k});
    for (std::size_t h = 0; h < c.config.heads; ++h) {
      const Tensor w = normalize(head_scores(c.features, c.question, c.heads[h], kLeaky), c.config.normalization);
      std::copy(w.data().begin(), w.data().end(), per_head.data().begin() + h * k);
    }
    CHECK(out.weights == per_head);
    const Tensor alpha = combine_heads(per_head);
    CHECK(out.combined == alpha);
    CHECK(out.pooled == pool(c.features, alpha));
  }
}

// ---------------------------------------------------------------------------
// Property suites, >= 100 randomized cases each.

TEST_CASE("property: head sum and simplex") {
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 200; ++trial) {
    const Normalization norm = trial % 2 ? Normalization::kSoftmax : Normalization::kSigmoid;
    const Case c = random_case(rng, norm);
    const AttentionOutput out = attend(c.config, c.heads, c.features, c.question, kLeaky);
    for (double v : out.combined.data()) CHECK(v >= 0.0);
    if (norm == Normalization::kSoftmax) {
      const std::size_t k = c.features.shape()[0];
      for (std::size_t h = 0; h < c.config.heads; ++h) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += out.weights.at(h, i);
        CHECK(std::abs(s - 1.0) <= 1e-9);
      }
      const double total = std::accumulate(out.combined.data().begin(), out.combined.data().end(), 0.0);
      CHECK(std::abs(total - static_cast<double>(c.config.heads)) <= 1e-8);
    } else {
      for (double v : out.weights.data()) CHECK((v > 0.0 && v < 1.0));
    }
  }
}

TEST_CASE("property: permutation equivariance") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 150; ++trial) {
    const Case c = random_case(rng, trial % 2 ? Normalization::kSoftmax : Normalization::kSigmoid);
    const std::size_t k = c.features.shape()[0], dv = c.features.shape()[1];
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor permuted(Shape{k, dv});
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t d = 0; d < dv; ++d) permuted.at(i, d) = c.features.at(perm[i], d);
    const AttentionOutput a = attend(c.config, c.heads, c.features, c.question, kLeaky);
    const AttentionOutput b = attend(c.config, c.heads, permuted, c.question, kLeaky);
    for (std::size_t h = 0; h < c.config.heads; ++h)
      for (std::size_t i = 0; i < k; ++i) CHECK(std::abs(b.weights.at(h, i) - a.weights.at(h, perm[i])) <= 1e-12);
    CHECK(max_abs_difference(a.pooled, b.pooled) <= 1e-10);
  }
}

TEST_CASE("property: softmax weights ignore a score offset") {
  std::mt19937_64 rng(102);
  for (int trial = 0; trial < 100; ++trial) {
    AttentionHeadParams p = random_head(3, 2, 4, true, rng);
    const Tensor f = random_tensor({6, 3}, rng), q = random_tensor({2}, rng);
    const Tensor before = normalize(head_scores(f, q, p, kLeaky), Normalization::kSoftmax);
    p.score.bias[0] += std::uniform_real_distribution<double>(-20, 20)(rng);
    const Tensor after = normalize(head_scores(f, q, p, kLeaky), Normalization::kSoftmax);
    CHECK(max_abs_difference(before, after) <= 1e-12);
  }
}

TEST_CASE("property: pool is linear in alpha and in V") {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t k = testing::random_size(rng, 1, 9), dv = testing::random_size(rng, 1, 6);
    const Tensor v = random_tensor({k, dv}, rng, -3, 3), w = random_tensor({k, dv}, rng, -3, 3);
    const Tensor a1 = random_tensor({k}, rng, 0, 2), a2 = random_tensor({k}, rng, 0, 2);
    Tensor asum = a1, vsum = v;
    for (std::size_t i = 0; i < k; ++i) asum[i] += a2[i];
    for (std::size_t i = 0; i < v.size(); ++i) vsum[i] += w[i];
    Tensor lhs = pool(v, asum), rhs = pool(v, a1);
    const Tensor r2 = pool(v, a2);
    for (std::size_t d = 0; d < dv; ++d) CHECK(std::abs(lhs[d] - (rhs[d] + r2[d])) <= 1e-10);
    lhs = pool(vsum, a1);
    rhs = pool(v, a1);
    const Tensor rw = pool(w, a1);
    for (std::size_t d = 0; d < dv; ++d) CHECK(std::abs(lhs[d] - (rhs[d] + rw[d])) <= 1e-10);
  }
}

TEST_CASE("gradients through attend pass the finite-difference check") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    for (const char* preset : {"A3x2", "A3Sx2"}) {
      const AttentionConfig config = attention_preset(preset);
      ParamStore store;
      init_attention(store, config, 3, 2, true, rng);
      store.add("v", random_tensor({2 * 4, 3}, rng));
      store.add("q", random_tensor({2, 2}, rng));
      const Tensor r = random_tensor({2, 3}, rng, 0.5, 1.5);
      const ActivationSpec tanh_act{ad::Activation::kTanh, 0.1};
      const auto result = grad_check(
          [&](ad::Graph& g) {
            const auto heads = bind_attention(g, config, true);
            const AttentionVars out = attend(config, heads, g.parameter("v"), g.parameter("q"), 4, tanh_act);
            return ad::sum(ad::mul(out.pooled, g.constant(r)));
          },
          store);
      worst = std::max(worst, result.max_error);
    }
  }
  CHECK(worst < 1e-4);
}
