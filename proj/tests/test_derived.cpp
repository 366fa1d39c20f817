#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "falldet/derived.hpp"
#include "test_util.hpp"

using namespace falldet;
using falldet::testing::make_window;
using falldet::testing::random_samples;

namespace {

// Direct double sum, straight from the definition.
std::vector<double> fi_oracle(const std::vector<SensorSample> &s, std::size_t history) {
  std::vector<double> out(s.size(), 0.0);
  for (std::size_t t = 1; t < s.size(); ++t) {
    double sum = 0.0;
    std::size_t first = t + 1 >= history + 1 ? t - history + 1 : 1;
    first = std::max<std::size_t>(first, 1);
    for (int a = 0; a < 3; ++a)
      for (std::size_t i = first; i <= t; ++i) {
        double d = s[i].acc[a] - s[i - 1].acc[a];
        sum += d * d;
      }
    out[t] = std::sqrt(sum);
  }
  return out;
}

// Moving average recomputed per index, hold rule applied in a scalar loop.
std::vector<double> avd_oracle(const std::vector<SensorSample> &s, std::size_t span) {
  std::vector<double> out;
  double gx = 0, gy = 0, gz = 1;
  for (std::size_t t = 0; t < s.size(); ++t) {
    double mx = 0, my = 0, mz = 0;
    std::size_t count = 0;
    for (std::size_t i = (t + 1 > span ? t + 1 - span : 0); i <= t; ++i, ++count) {
      mx += s[i].acc[0];
      my += s[i].acc[1];
      mz += s[i].acc[2];
    }
    mx /= double(count);
    my /= double(count);
    mz /= double(count);
    double mag = std::sqrt(mx * mx + my * my + mz * mz);
    if (mag >= 0.05) {
      gx = mx / mag;
      gy = my / mag;
      gz = mz / mag;
    }
    out.push_back(std::abs(s[t].acc[0] * gx + s[t].acc[1] * gy + s[t].acc[2] * gz));
  }
  return out;
}

std::vector<SensorSample> constant(std::size_t n, Vec3 acc, Vec3 gyr = {0, 0, 0}) {
  std::vector<SensorSample> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {double(i) / 25.0, acc, gyr};
  return out;
}

} // namespace

TEST(Smv, Examples) {
  auto w = make_window({{0.0, {0, 0, 0}, {0, 0, 0}}, {0.04, {3, 4, 0}, {0, 0, 0}}, {0.08, {1, 1, 1}, {0, 0, 0}}});
  auto v = smv(w, Sensor::Acc);
  EXPECT_EQ(v[0], 0.0);
  EXPECT_EQ(v[1], 5.0);
  EXPECT_NEAR(v[2], 1.7320508, 1e-7);
}

TEST(Smv, PermutationAndSignInvariantAndDominatesAxes) {
  std::mt19937_64 rng(3);
  auto s = random_samples(rng, 100);
  auto flipped = s;
  for (auto &x : flipped) {
    x.acc = {-x.acc[2], x.acc[0], -x.acc[1]};
    x.gyr = {x.gyr[1], -x.gyr[2], x.gyr[0]};
  }
  auto a = smv(make_window(s), Sensor::Acc), b = smv(make_window(flipped), Sensor::Acc);
  auto ga = smv(make_window(s), Sensor::Gyr), gb = smv(make_window(flipped), Sensor::Gyr);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_NEAR(ga[i], gb[i], 1e-9);
    for (int k = 0; k < 3; ++k) {
      EXPECT_GE(a[i], std::abs(s[i].acc[k]));
      EXPECT_GE(ga[i], std::abs(s[i].gyr[k]));
    }
  }
}

TEST(FallIndex, ConstantWindowIsZero) {
  auto fi = fall_index(make_window(constant(50, {0.1, -0.3, 0.98})));
  for (double v : fi) EXPECT_EQ(v, 0.0);
}

TEST(FallIndex, SingleStepGivesStepHeight) {
  auto s = constant(40, {0, 0, 1});
  const double h = 2.5;
  for (std::size_t i = 10; i < s.size(); ++i) s[i].acc[1] = h;
  auto fi = fall_index(make_window(s), 20);
  EXPECT_EQ(fi[9], 0.0);
  for (std::size_t t = 10; t < 30; ++t) EXPECT_NEAR(fi[t], h, 1e-12) << "t=" << t;
  EXPECT_EQ(fi[30], 0.0); // step has left the 20-difference history
}

TEST(FallIndex, MatchesDoubleSumOracle) {
  std::mt19937_64 rng(50);
  auto s = random_samples(rng, 50);
  auto fi = fall_index(make_window(s), 20);
  auto ref = fi_oracle(s, 20);
  ASSERT_EQ(fi.size(), ref.size());
  EXPECT_EQ(fi[0], 0.0);
  for (std::size_t t = 0; t < fi.size(); ++t) EXPECT_NEAR(fi[t], ref[t], 1e-12 * (1.0 + ref[t]));
}

TEST(FallIndex, FullHistoryEqualsTotalFirstDifferenceEnergy) {
  std::mt19937_64 rng(8);
  auto s = random_samples(rng, 64);
  auto fi = fall_index(make_window(s), s.size());
  double total = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i)
    for (int a = 0; a < 3; ++a) total += (s[i].acc[a] - s[i - 1].acc[a]) * (s[i].acc[a] - s[i - 1].acc[a]);
  EXPECT_NEAR(fi.back(), std::sqrt(total), 1e-12 * std::sqrt(total));
}

TEST(FallIndex, OffsetInvariantAndScalesLinearly) {
  std::mt19937_64 rng(9);
  auto s = random_samples(rng, 80);
  auto shifted = s, scaled = s;
  for (auto &x : shifted) x.acc[0] += 3.0;
  for (auto &x : scaled)
    for (double &v : x.acc) v *= 2.0;
  auto base = fall_index(make_window(s));
  auto fs = fall_index(make_window(shifted));
  auto fc = fall_index(make_window(scaled));
  auto sm = smv(make_window(s), Sensor::Acc), smc = smv(make_window(scaled), Sensor::Acc);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(fs[i], base[i], 1e-9);
    EXPECT_DOUBLE_EQ(fc[i], 2.0 * base[i]);
    EXPECT_DOUBLE_EQ(smc[i], 2.0 * sm[i]);
  }
}

TEST(FallIndex, RejectsZeroHistory) { EXPECT_THROW(fall_index(make_window(constant(5, {0, 0, 1})), 0), Error); }

TEST(Avd, AtRestAlongZ) {
  for (double v : avd(make_window(constant(60, {0, 0, 1})))) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Avd, AtRestAlongYSettlesToOne) {
  auto v = avd(make_window(constant(60, {0, 1, 0})));
  // The gravity estimate is the mean itself from the first sample on.
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], 1.0, 1e-12);
}

TEST(Avd, FreeFallHoldsGravityDirection) {
  auto s = constant(100, {0, 0, 1});
  for (std::size_t i = 50; i < 100; ++i) s[i].acc = {0.001, -0.002, 0.001};
  auto v = avd(make_window(s), 1.0);
  auto ref = avd_oracle(s, 25);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], ref[i], 1e-12);
  EXPECT_LT(v.back(), 0.01);
}

TEST(Avd, MatchesOracleOnRandomWindows) {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 20; ++k) {
    auto s = random_samples(rng, 120, 20.0, 0.3);
    auto v = avd(make_window(s, 20.0), 1.0);
    auto ref = avd_oracle(s, 20);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], ref[i], 1e-12);
  }
}

TEST(DeriveAll, BundlesComponents) {
  std::mt19937_64 rng(5);
  auto w = make_window(random_samples(rng, 75));
  auto d = derive_all(w);
  EXPECT_EQ(d.smv_acc, smv(w, Sensor::Acc));
  EXPECT_EQ(d.smv_gyr, smv(w, Sensor::Gyr));
  EXPECT_EQ(d.fi, fall_index(w));
  EXPECT_EQ(d.avd, avd(w));
  for (const auto *seq : {&d.smv_acc, &d.smv_gyr, &d.fi, &d.avd})
    for (double v : *seq) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
}

TEST(DeriveAll, ConstantWindow) {
  auto d = derive_all(make_window(constant(30, {0.6, 0.0, 0.8}, {1, 2, 2})));
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_NEAR(d.smv_acc[i], 1.0, 1e-12);
    EXPECT_NEAR(d.smv_gyr[i], 3.0, 1e-12);
    EXPECT_EQ(d.fi[i], 0.0);
    EXPECT_NEAR(d.avd[i], 1.0, 1e-12);
  }
}
