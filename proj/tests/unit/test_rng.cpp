#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "transpol/rng.hpp"

namespace {

using transpol::RngStream;

TEST(Rng, SameSeedSameSequence) {
  RngStream a(5), b(5);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsDiffer) {
  const RngStream root(5);
  RngStream a = root.substream(1), b = root.substream(2);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u32() == b.next_u32();
  EXPECT_LT(equal, 3);
}

TEST(Rng, SubstreamIsIndependentOfParentPosition) {
  RngStream root(9);
  const RngStream before = root.substream(3);
  for (int i = 0; i < 17; ++i) root.next_u32();
  RngStream after = root.substream(3);
  RngStream b = before;
  for (int i = 0; i < 50; ++i) EXPECT_EQ(b.next_u64(), after.next_u64());
}

TEST(Rng, UniformIsOpenInterval) {
  RngStream r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  RngStream r(2);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, BelowCoversRangeUniformly) {
  RngStream r(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = r.below(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
}

TEST(Rng, Mix64IsInjectiveOnSmallRange) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(transpol::mix64(i));
  EXPECT_EQ(seen.size(), 10000u);
}

}  // namespace
