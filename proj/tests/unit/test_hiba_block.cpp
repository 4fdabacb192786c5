// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "hiba/errors.hpp"
#include "hiba/hiba_block.hpp"
#include "hiba/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace hiba;
using T64 = ad::Tensor<double>;

HibaParams<double> block_params(std::uint64_t seed, std::size_t d = 8, std::size_t hq = 2,
                                std::size_t hkv = 1) {
  CounterRng rng(seed);
  auto p = HibaParams<double>::init(rng, d, 2 * d, hq, hkv);
  // Non-unit gains so the oracle's norm path is exercised.
  for (auto* g : {&p.norm1, &p.norm2, &p.norm3, &p.norm4}) {
    for (auto& v : g->mutable_data()) v = 1.0 + 0.2 * rng.normal();
  }
  return p;
}

TEST(BlockSchedule, CyclesAndLcm) {
  const BlockSchedule s;
  EXPECT_EQ(s.lcm(), 21u);
  for (std::size_t l = 0; l < 24; ++l) EXPECT_EQ(s.size_for_layer(l), s.sizes[l % 3]);
  EXPECT_EQ(s.num_blocks(336, 0), 112u);
  EXPECT_EQ((BlockSchedule{{4, 6}}).lcm(), 12u);
  EXPECT_THROW((BlockSchedule{{3, 0}}).validate(), ContractViolation);
}

TEST(HibaBlock, ZeroBranchesReduceToFourNorms) {
  auto p = block_params(1);
  p.zero_residual_branches();
  CounterRng rng(2);
  const auto x = testutil::random_tensor(rng, {6, 8});
  const auto y = hiba_block(x, p, 1, 6, 3, {});
  oracle::Matrix e = oracle::values(x);
  for (const auto* g : {&p.norm1, &p.norm2, &p.norm3, &p.norm4}) e = oracle::rms_norm(e, 6, 8, oracle::values(*g));
  EXPECT_LE(oracle::max_abs_diff(oracle::values(y), e), 1e-12);
}

TEST(HibaBlock, ShapePreservedWhenDivisible) {
  const auto p = block_params(3);
  CounterRng rng(4);
  for (std::size_t n : {3u, 6u, 21u}) {
    const auto x = testutil::random_tensor(rng, {n, 8});
    EXPECT_EQ(hiba_block(x, p, 1, n, 3, {}).shape(), x.shape());
  }
  EXPECT_THROW(hiba_block(testutil::random_tensor(rng, {7, 8}), p, 1, 7, 3, {}), ContractViolation);
}

TEST(HibaBlock, MatchesStagedOracle) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (auto [n, b] : {std::pair<std::size_t, std::size_t>{6, 3}, {21, 7}, {42, 21}}) {
      const auto p = block_params(seed + 10, 16, 4, 2);
      CounterRng rng(seed);
      const auto x = testutil::random_tensor(rng, {n, 16});
      const auto y = hiba_block(x, p, 1, n, b, {});
      EXPECT_LE(oracle::max_abs_diff(oracle::values(y), oracle::hiba_block(oracle::values(x), n, b, p)), 1e-5);
      BlockToggles causal;
      causal.causal_intra = true;
      const auto yc = hiba_block(x, p, 1, n, b, causal);
      EXPECT_LE(oracle::max_abs_diff(oracle::values(yc),
                                     oracle::hiba_block(oracle::values(x), n, b, p, true)),
                1e-5);
    }
  }
}

TEST(HibaBlock, BatchedEqualsPerSequence) {
  const auto p = block_params(5);
  CounterRng rng(6);
  const auto a = testutil::random_tensor(rng, {21, 8});
  const auto b = testutil::random_tensor(rng, {21, 8});
  const std::vector<T64> both{a, b};
  const auto y = hiba_block(ad::concat<double>(both, 0), p, 2, 21, 7, {});
  const auto ya = hiba_block(a, p, 1, 21, 7, {});
  const auto yb = hiba_block(b, p, 1, 21, 7, {});
  for (std::size_t i = 0; i < 21 * 8; ++i) {
    EXPECT_NEAR(y.data()[i], ya.data()[i], 1e-12);
    EXPECT_NEAR(y.data()[21 * 8 + i], yb.data()[i], 1e-12);
  }
}

TEST(HibaForward, ZeroLayersIsIdentity) {
  CounterRng rng(7);
  const auto x = testutil::random_tensor(rng, {21, 8});
  const auto y = hiba_forward<double>(x, {}, 1, 21, BlockSchedule{}, {});
  EXPECT_EQ(oracle::values(y), oracle::values(x));
}

TEST(HibaForward, BlockBoundaryCausality) {
  std::vector<HibaParams<double>> layers;
  for (std::uint64_t l = 0; l < 6; ++l) layers.push_back(block_params(20 + l));
  CounterRng rng(8);
  const std::size_t n = 63;
  const auto x = testutil::random_tensor(rng, {n, 8});
  const auto base = hiba_forward<double>(x, layers, 1, n, BlockSchedule{}, {});
  for (std::size_t boundary : {21u, 42u}) {
    auto xp = oracle::values(x);
    for (std::size_t i = boundary * 8; i < xp.size(); ++i) xp[i] += rng.normal();
    const auto y = hiba_forward<double>(T64::from({n, 8}, xp), layers, 1, n, BlockSchedule{}, {});
    for (std::size_t i = 0; i < boundary * 8; ++i) EXPECT_LE(std::abs(y.data()[i] - base.data()[i]), 1e-12);
  }
}

TEST(HibaForward, StandardAttentionIsCausalPerToken) {
  std::vector<HibaParams<double>> layers{block_params(30), block_params(31)};
  BlockToggles t;
  t.standard_attention = true;
  CounterRng rng(9);
  const auto x = testutil::random_tensor(rng, {21, 8});
  const auto base = hiba_forward<double>(x, layers, 1, 21, BlockSchedule{}, t);
  auto xp = oracle::values(x);
  for (std::size_t i = 10 * 8; i < xp.size(); ++i) xp[i] += 1.0;
  const auto y = hiba_forward<double>(T64::from({21, 8}, xp), layers, 1, 21, BlockSchedule{}, t);
  for (std::size_t i = 0; i < 10 * 8; ++i) EXPECT_LE(std::abs(y.data()[i] - base.data()[i]), 1e-12);
  EXPECT_GT(std::abs(y.data()[10 * 8] - base.data()[10 * 8]), 1e-6);
}

TEST(HibaForward, PairCountsPerLayerFollowSchedule) {
  std::vector<HibaParams<double>> layers;
  for (std::uint64_t l = 0; l < 3; ++l) layers.push_back(block_params(40 + l));
  CounterRng rng(10);
  const std::size_t n = 42;
  PairCounter counter;
  hiba_forward<double>(testutil::random_tensor(rng, {n, 8}), layers, 1, n, BlockSchedule{}, {},
                       &counter);
  ASSERT_EQ(counter.per_call.size(), 6u);
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t b = BlockSchedule{}.size_for_layer(l);
    EXPECT_EQ(counter.per_call[2 * l] + counter.per_call[2 * l + 1], n * b + n * n / b);
  }
}

}  // namespace
