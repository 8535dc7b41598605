#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "rbk/sequence_space.hpp"

namespace {

using rbk::ClusterState;
using rbk::Index;
using rbk::InitialCondition;
using rbk::WeightSequence;

ClusterState<> ones3() { return ClusterState<>(std::vector<double>{1, 1, 1}); }

TEST(Moments, Examples) {
  EXPECT_EQ(rbk::weighted_moment(ones3(), WeightSequence::identity()), 6.0);
  EXPECT_EQ(rbk::weighted_moment(ClusterState<>(5), WeightSequence::constant(3.0)), 0.0);
  EXPECT_EQ(rbk::norm_m(ones3(), 1.0), 6.0);
  EXPECT_EQ(rbk::norm_m(ClusterState<>(std::vector<double>{2, 0, 0}), 0.0), 2.0);
  EXPECT_EQ(rbk::tail_first_moment(ones3(), 2), 5.0);
  EXPECT_EQ(rbk::tail_first_moment(ones3(), 1), 6.0);
  EXPECT_EQ(rbk::tail_first_moment(ones3(), 4), 0.0);
  const rbk::BoundSequence one(std::vector<double>(3, 1.0));
  EXPECT_EQ(rbk::a_moment(ones3(), one, 2), 3.0);
  EXPECT_EQ(rbk::a_moment(ClusterState<>(3), one, 1), 0.0);
}

TEST(Moments, GeometricSeriesLimits) {
  // sum_j j 2^{-j} = 2 and sum_j 2^{-j} = 1 in the limit n -> infinity
  const auto ic = InitialCondition::geometric(1.0, 0.5);
  double prev_gap = 1.0;
  for (Index n : {10, 20, 40, 80}) {
    const auto f = ic.realize(n);
    const double gap = 2.0 - rbk::weighted_moment(f, WeightSequence::identity());
    EXPECT_GE(gap, 0.0);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  EXPECT_NEAR(rbk::weighted_moment(ic.realize(80), WeightSequence::identity()), 2.0, 1e-15);
  EXPECT_NEAR(rbk::norm_m(ic.realize(80), 0.0), 1.0, 1e-15);
}

TEST(Moments, AMomentOfDyadicData) {
  // A_i = 2^i, f_i = 4^{-i}: sum 2^{-i} over i <= 30
  const auto A = rbk::BoundSequence::from_function([](Index i) { return std::ldexp(1.0, int(i)); }, 30);
  std::vector<double> f(30);
  for (Index i = 1; i <= 30; ++i) f[i - 1] = std::ldexp(1.0, -2 * int(i));
  EXPECT_NEAR(rbk::a_moment(ClusterState<>(f), A, 1), 1.0, 1e-9);
}

TEST(Moments, Properties) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 1 + rng() % 60;
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    const ClusterState<> f(v);
    EXPECT_GE(rbk::norm_1(f), rbk::norm_m(f, 0.0));
    EXPECT_EQ(rbk::tail_first_moment(f, 1), rbk::norm_1(f));
    double prev = rbk::tail_first_moment(f, 1);
    for (Index m = 2; m <= n + 1; ++m) {
      const double t = rbk::tail_first_moment(f, m);
      EXPECT_LE(t, prev);
      prev = t;
    }
    const rbk::BoundSequence one(std::vector<double>(n, 1.0));
    EXPECT_DOUBLE_EQ(rbk::a_moment(f, one, 1), rbk::norm_m(f, 0.0));
    // monotone in each entry
    auto bumped = v;
    bumped[rng() % n] += 0.25;
    EXPECT_GE(rbk::norm_m(ClusterState<>(bumped), 1.5), rbk::norm_m(f, 1.5));
  }
}

TEST(ClusterState, RejectsNegativeEntries) {
  EXPECT_THROW(ClusterState<>(std::vector<double>{1.0, -1e-3}), std::invalid_argument);
  EXPECT_THROW(ClusterState<>(std::vector<double>{NAN}), std::invalid_argument);
}

TEST(WeightSequence, FlagsAndTail) {
  const auto t = WeightSequence::tail(3);
  EXPECT_EQ(t(2), 0.0);
  EXPECT_EQ(t(3), 3.0);
  EXPECT_TRUE(t.flags_hold(20));
  const auto w = WeightSequence("bad", [](Index i) { return -double(i); }, true, true);
  EXPECT_FALSE(w.flags_hold(3));
  const auto v = WeightSequence::from_values("v", {1.0, -2.0, 3.0});
  EXPECT_FALSE(v.nonnegative());
  EXPECT_FALSE(v.nondecreasing());
}

TEST(InitialCondition, FamiliesAndValidation) {
  EXPECT_THROW(InitialCondition::geometric(1.0, 1.5), std::invalid_argument);
  EXPECT_THROW(InitialCondition::geometric(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(InitialCondition::monodisperse(-1.0), std::invalid_argument);
  EXPECT_THROW(InitialCondition::power_law(1.0, 1.5, 0), std::invalid_argument);

  const auto mono = InitialCondition::monodisperse(2.0).realize(4);
  EXPECT_EQ(mono.values(), (std::vector<double>{2, 0, 0, 0}));
  const auto pl = InitialCondition::power_law(1.0, 2.0, 3).realize(5);
  EXPECT_DOUBLE_EQ(pl.at(2), 0.25);
  EXPECT_EQ(pl.at(4), 0.0);
}

TEST(InitialCondition, DiscardedTailMatchesDirectSum) {
  const auto geo = InitialCondition::geometric(0.7, 0.3);
  for (Index n : {0, 1, 5, 20}) {
    double direct = 0.0;
    for (Index j = 400; j > n; --j) direct += double(j) * geo.value(j);
    EXPECT_NEAR(geo.discarded_tail(n), direct, 1e-14 * std::max(direct, 1e-300)) << n;
  }
  EXPECT_EQ(InitialCondition::monodisperse(1.0).discarded_tail(1), 0.0);
  const auto pl = InitialCondition::power_law(1.0, 3.0, 10);
  double direct = 0.0;
  for (Index j = 5; j <= 10; ++j) direct += double(j) * std::pow(double(j), -3.0);
  EXPECT_NEAR(pl.discarded_tail(4), direct, 1e-15);
  // no cutoff: sum_j j^{-3} j = zeta(2) = pi^2/6
  EXPECT_NEAR(InitialCondition::power_law(1.0, 3.0, 0).first_moment(), M_PI * M_PI / 6.0, 1e-9);
}

TEST(InitialCondition, ScaledToMass) {
  const auto ic = InitialCondition::geometric(1.0, 0.5).scaled_to_mass(1.0);
  EXPECT_NEAR(ic.first_moment(), 1.0, 1e-15);
  EXPECT_NEAR(rbk::norm_1(ic.realize(200)), 1.0, 1e-14);
}

TEST(InitialCondition, CsvRoundTrip) {
  std::istringstream in("i,f\n1,0.5\n3,0.25\n");
  const auto ic = InitialCondition::read_csv(in);
  EXPECT_EQ(ic.realize(4).values(), (std::vector<double>{0.5, 0, 0.25, 0}));
  std::istringstream neg("i,f\n1,-1\n");
  EXPECT_THROW(InitialCondition::read_csv(neg), std::runtime_error);
}

} // namespace
