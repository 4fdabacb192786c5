// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <functional>

#include "hiba/attention.hpp"
#include "hiba/autodiff.hpp"
#include "hiba/ops.hpp"
#include "test_util.hpp"

namespace {

namespace ad = hiba::ad;
using T64 = ad::Tensor<double>;
using Builder = std::function<T64(const std::vector<T64>&)>;

// Projects an op's output onto fixed random weights so every output element
// contributes a distinct gradient.
T64 project(const T64& y, std::uint64_t seed) {
  hiba::CounterRng rng(seed ^ 0x5eed);
  return ad::sum(ad::mul(y, testutil::random_tensor(rng, y.shape())));
}

void expect_grads(const std::string& op, std::vector<ad::Shape> shapes, const Builder& build,
                  std::uint64_t seed, double scale = 1.0) {
  hiba::CounterRng rng(seed);
  std::vector<ad::NamedLeaf> leaves;
  std::vector<T64> tensors;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    tensors.push_back(testutil::random_tensor(rng, shapes[i], true, scale));
    leaves.push_back({op + "." + std::to_string(i), tensors.back()});
  }
  const auto report = ad::grad_check([&] { return project(build(tensors), seed); }, leaves);
  for (const auto& leaf : report.leaves) {
    EXPECT_LE(leaf.max_rel_error, 1e-5) << leaf.name << " seed " << seed;
  }
  EXPECT_TRUE(report.passed) << op;
}

struct OpCase {
  std::string name;
  std::function<std::vector<ad::Shape>(std::size_t, std::size_t)> shapes;
  Builder build;
  double scale = 1.0;
};

std::vector<OpCase> op_cases() {
  using S = std::vector<ad::Shape>;
  return {
      {"matmul", [](auto r, auto c) { return S{{r, c}, {c, r + 1}}; },
       [](const auto& t) { return ad::matmul(t[0], t[1]); }},
      {"bmm", [](auto r, auto c) { return S{{2, r, c}, {2, c, 3}}; },
       [](const auto& t) { return ad::bmm(t[0], t[1]); }},
      {"transpose", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::transpose(t[0]); }},
      {"add", [](auto r, auto c) { return S{{r, c}, {c}}; },
       [](const auto& t) { return ad::add(t[0], t[1]); }},
      {"sub", [](auto r, auto c) { return S{{r, c}, {r, c}}; },
       [](const auto& t) { return ad::sub(t[0], t[1]); }},
      {"mul", [](auto r, auto c) { return S{{r, c}, {c}}; },
       [](const auto& t) { return ad::mul(t[0], t[1]); }},
      {"scale", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::add_scalar(ad::scale(t[0], -1.7), 0.3); }},
      {"concat", [](auto r, auto c) { return S{{r, c}, {r, 2}}; },
       [](const auto& t) { return ad::concat<double>(t, 1); }},
      {"slice", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::slice(t[0], 1, 1, t[0].dim(1) - 1); }},
      {"gather_rows", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) {
         const std::vector<std::size_t> idx{0, t[0].dim(0) - 1, 0};
         return ad::gather_rows(t[0], idx);
       }},
      {"reshape", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::reshape(t[0], {t[0].numel()}); }},
      {"softmax", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::softmax(t[0]); }},
      {"masked_softmax", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) {
         std::vector<std::uint8_t> m(t[0].numel(), 0);
         for (std::size_t i = 1; i < m.size(); i += 3) m[i] = 1;
         for (std::size_t r = 0; r < t[0].dim(0); ++r) m[r * t[0].dim(1)] = 0;
         return ad::masked_softmax(t[0], m);
       }},
      {"masked_fill", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) {
         std::vector<std::uint8_t> m(t[0].numel(), 0);
         for (std::size_t i = 0; i < m.size(); i += 2) m[i] = 1;
         return ad::masked_fill(t[0], m, 0.5);
       }},
      {"sigmoid", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::sigmoid(t[0]); }},
      {"silu", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::silu(t[0]); }},
      {"sum", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::scale(ad::sum(ad::mul(t[0], t[0])), 0.5); }},
      {"mean", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::mean(ad::mul(t[0], t[0])); }},
      {"mean_last", [](auto r, auto c) { return S{{r, c}}; },
       [](const auto& t) { return ad::mean_last(t[0]); }},
      {"std_last", [](auto r, auto c) { return S{{r, c + 1}}; },
       [](const auto& t) { return ad::std_last(t[0]); }},
      {"rms_norm", [](auto r, auto c) { return S{{r, c}, {c}}; },
       [](const auto& t) { return ad::rms_norm(t[0], t[1]); }},
      {"rotary", [](auto r, auto) { return S{{r, 8}}; },
       [](const auto& t) {
         std::vector<double> pos(t[0].dim(0));
         for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = double(3 * i + 1);
         return ad::rotary(t[0], pos, 2, 10000.0);
       }},
      {"grouped_attention", [](auto, auto) { return S{{6, 8}, {6, 4}, {6, 4}}; },
       [](const auto& t) {
         const auto plan = hiba::make_plan(hiba::MaskKind::inter_strided_causal, 1, 6, 3);
         return hiba::grouped_attention(t[0], t[1], t[2], plan, 2, 1);
       }},
  };
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesCentralDifferencesOnFiveShapes) {
  const auto cases = op_cases();
  const auto& c = cases.at(GetParam());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t rows = 2 + seed, cols = 3 + seed % 3;
    expect_grads(c.name, c.shapes(rows, cols), c.build, seed, c.scale);
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const auto& info) { return op_cases()[info.param].name; });

TEST(GradCheck, SiluOfLinearPasses) {
  hiba::CounterRng rng(11);
  auto w = testutil::random_tensor(rng, {4, 3}, true);
  auto x = testutil::random_tensor(rng, {5, 4}, true);
  const auto report = ad::grad_check([&] { return ad::sum(ad::silu(ad::matmul(x, w))); },
                                     {{"W", w}, {"x", x}}, 1e-6, 1e-5);
  EXPECT_TRUE(report.passed);
  ASSERT_EQ(report.leaves.size(), 2u);
}

TEST(GradCheck, WrongRuleFails) {
  auto x = T64::from({3}, {0.5, -1.0, 2.0}, true);
  const auto doubled_with_bad_grad = [&] {
    std::vector<double> out;
    for (double v : x.data()) out.push_back(2.0 * v);
    return ad::make_result<double>(x.shape(), std::move(out), "bad", {x}, [](ad::Node<double>& self) {
      auto& g = self.inputs[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * self.grad[i];
    });
  };
  const auto report = ad::grad_check([&] { return ad::sum(doubled_with_bad_grad()); }, {{"x", x}});
  EXPECT_FALSE(report.passed);
  EXPECT_GT(report.leaves[0].max_rel_error, 0.1);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  auto x = T64::from({2}, {1.0, 2.0}, true);
  const auto report = ad::grad_check(
      [&] { return ad::add_scalar(ad::scale(ad::sum(x), 0.0), 4.0); }, {{"x", x}});
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.leaves[0].max_rel_error, 0.0);
}

TEST(GradCheck, RestoresLeafValues) {
  auto x = T64::from({2}, {1.25, -3.5}, true);
  ad::grad_check([&] { return ad::sum(ad::mul(x, x)); }, {{"x", x}});
  EXPECT_EQ(x.data()[0], 1.25);
  EXPECT_EQ(x.data()[1], -3.5);
}

}  // namespace
