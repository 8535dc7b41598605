#include <gtest/gtest.h>

#include "rbk/experiments.hpp"

namespace {

using rbk::Index;
using rbk::InitialCondition;
using rbk::Kernel;

rbk::StudyConfig small_study() {
  rbk::StudyConfig s;
  s.n_list = {10, 20, 40};
  s.watch = {1, 2, 5};
  s.integrator.t_end = 2.0;
  s.integrator.rel_tol = 1e-10;
  s.jobs = 2;
  return s;
}

TEST(Convergence, MonodisperseSupportNeverGrows) {
  auto s = small_study();
  s.ic = InitialCondition::monodisperse(1.0);
  const auto t = rbk::truncation_convergence(s);
  EXPECT_TRUE(t.complete());
  EXPECT_TRUE(t.anomalies.empty());
  for (const auto& row : t.sup_diff)
    for (double d : row) EXPECT_EQ(d, 0.0);
  for (double tail : t.discarded_tail) EXPECT_EQ(tail, 0.0);
}

TEST(Convergence, ZeroInitialConditionGivesZeroTable) {
  auto s = small_study();
  s.ic = InitialCondition::custom({});
  const auto t = rbk::truncation_convergence(s);
  EXPECT_TRUE(t.strictly_decreasing());
  for (const auto& row : t.sup_diff)
    for (double d : row) EXPECT_EQ(d, 0.0);
  for (const auto& per_n : t.series)
    for (const auto& sample : per_n)
      for (double v : sample) EXPECT_EQ(v, 0.0);
}

TEST(Convergence, GeometricDifferencesDecayWithTail) {
  const auto t = rbk::truncation_convergence(small_study());
  ASSERT_TRUE(t.complete());
  EXPECT_TRUE(t.anomalies.empty());
  EXPECT_EQ(t.schedule_n, Index(40));
  for (std::size_t w = 0; w < t.watch.size(); ++w)
    for (std::size_t p = 0; p < t.pairs(); ++p) {
      EXPECT_GT(t.sup_diff[w][p], 0.0);
      // bounded by twice the tail discarded at the smaller size
      EXPECT_LE(t.sup_diff[w][p], 2.0 * t.discarded_tail[p] + 1e-12);
    }
  EXPECT_EQ(t.series.size(), 3u);
  EXPECT_EQ(t.series[0].size(), t.sample_times.size());
}

TEST(Convergence, ExtendedPrecisionResolvesDifferencesBelowDoubleEpsilon) {
  auto s = small_study();
  s.n_list = {30, 60, 120};
  s.integrator.t_end = 1.0;
  s.samples = {0.5, 1.0};
  s.extended_precision = true;
  const auto t = rbk::truncation_convergence(s);
  ASSERT_TRUE(t.complete());
  EXPECT_EQ(t.precision, "extended");
  EXPECT_TRUE(t.anomalies.empty());
  EXPECT_LT(t.pair_sup(1), 1e-16);
  EXPECT_GT(t.pair_sup(1), 0.0);
  EXPECT_LE(t.pair_sup(1), 2.0 * t.discarded_tail[1]);
}

TEST(Convergence, IntegratorFailureLeavesMarkers) {
  auto s = small_study();
  s.integrator.max_steps = 3;
  const auto t = rbk::truncation_convergence(s);
  EXPECT_FALSE(t.complete());
  for (const auto& f : t.failure) EXPECT_NE(f.find("step_limit"), std::string::npos);
  EXPECT_TRUE(std::isnan(t.sup_diff[0][0]));
  EXPECT_FALSE(t.strictly_decreasing());
}

TEST(Convergence, ValidationRejectsBadStudies) {
  auto s = small_study();
  s.n_list = {20, 10};
  EXPECT_THROW(rbk::truncation_convergence(s), rbk::configuration_error);
  s = small_study();
  s.watch = {11};
  EXPECT_THROW(rbk::truncation_convergence(s), rbk::configuration_error);
  s = small_study();
  s.n_list = {10};
  EXPECT_THROW(rbk::truncation_convergence(s), rbk::configuration_error);
}

TEST(Stress, MonodisperseReducesToDoubledLogistic) {
  rbk::StressConfig cfg;
  cfg.alphas = {2.0};
  cfg.ic = InitialCondition::monodisperse(1.0);
  cfg.n = 5;
  cfg.integrator.t_end = 3.0;
  cfg.integrator.rel_tol = 1e-10;
  const auto out = rbk::growth_stress(cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].pass());
  // a_{1,1} = 2: f_1 = c / (1 + 2ct)
  rbk::IntegratorConfig direct;
  direct.t_end = 3.0;
  direct.rel_tol = 1e-10;
  const auto traj = rbk::integrate(InitialCondition::monodisperse(1.0).realize(5), Kernel::sum(2.0), direct);
  EXPECT_NEAR(traj.states.back().at(1), 1.0 / 7.0, 1e-9);
}

TEST(Stress, GeometricRapidGrowthPassesAllChecks) {
  rbk::StressConfig cfg;
  cfg.alphas = {1.5, 2.0};
  cfg.n = 100;
  cfg.integrator.t_end = 1.0;
  const auto out = rbk::growth_stress(cfg);
  for (const auto& o : out) {
    EXPECT_TRUE(o.pass()) << "alpha=" << o.alpha << " " << o.failure;
    EXPECT_EQ(o.reports.size(), 5u);
    EXPECT_LE(o.max_norm_increase, 0.0);
  }
}

TEST(Stress, ZeroInitialConditionTriviallyPasses) {
  rbk::StressConfig cfg;
  cfg.alphas = {3.0};
  cfg.ic = InitialCondition::custom({});
  cfg.n = 20;
  EXPECT_TRUE(rbk::growth_stress(cfg).front().pass());
}

TEST(Stress, StiffnessAbortIsReportedPerAlpha) {
  rbk::StressConfig cfg;
  cfg.alphas = {3.0};
  cfg.n = 400;
  cfg.integrator.t_end = 1e6;
  cfg.scale_to_unit_mass = false;
  const auto out = rbk::growth_stress(cfg);
  EXPECT_FALSE(out[0].completed);
  EXPECT_NE(out[0].failure.find("stiffness"), std::string::npos);
  EXPECT_GT(out[0].time_reached, 0.0);
  EXPECT_LT(out[0].time_reached, 1e6);
}

TEST(Stress, AlphaOutsideRangeRejected) {
  rbk::StressConfig cfg;
  cfg.alphas = {1.0};
  EXPECT_THROW(rbk::growth_stress(cfg), rbk::configuration_error);
  cfg.alphas = {3.5};
  EXPECT_THROW(rbk::growth_stress(cfg), rbk::configuration_error);
}

TEST(Stability, IdenticalDataGiveZeroDistance) {
  rbk::StabilityConfig cfg;
  cfg.deltas = {0.0};
  cfg.n = 20;
  const auto rep = rbk::stability_study(cfg);
  EXPECT_TRUE(rep.pass());
  for (double d : rep.cases[0].distance) EXPECT_EQ(d, 0.0);
  EXPECT_FALSE(rep.cases[0].linearity_error.has_value());
}

TEST(Stability, PerturbationsRespectGronwallAndScaleLinearly) {
  rbk::StabilityConfig cfg;
  const auto rep = rbk::stability_study(cfg);
  ASSERT_EQ(rep.cases.size(), 2u);
  EXPECT_TRUE(rep.pass());
  ASSERT_TRUE(rep.cases[0].linearity_error.has_value());
  EXPECT_LT(*rep.cases[0].linearity_error, 0.05);
  EXPECT_FALSE(rep.cases[1].linearity_error.has_value());
  for (std::size_t s = 0; s < rep.times.size(); ++s)
    EXPECT_LE(rep.cases[1].distance[s], rep.cases[1].bound[s] * (1 + 1e-6));
  // E(0) = A_1 delta
  EXPECT_NEAR(rep.cases[0].distance[0], 2.0 * 1e-6, 1e-15);
}

TEST(WeightIdentity, RandomSignedWeightsBalance) {
  const auto rep = rbk::weight_identity_study(Kernel::constant(1.0),
                                              InitialCondition::geometric(1.0, 0.5).realize(64), 1.0,
                                              50, 7, 1e-8);
  EXPECT_TRUE(rep.pass) << rep.worst.residual;
  EXPECT_EQ(rep.entries.size() % 50, 0u);
}

TEST(Bench, SingleComponentIsLossOnly) {
  const rbk::ClusterState<> f(std::vector<double>{0.7});
  const Kernel k = Kernel::product(1.0);
  const auto fast = rbk::rhs_separable_fast(f, k);
  const auto slow = rbk::rhs_naive(f, k);
  EXPECT_EQ(fast.gain[0], 0.0);
  EXPECT_EQ(slow.gain[0], 0.0);
  EXPECT_NEAR(fast.df[0], -0.49, 1e-16);
  EXPECT_DOUBLE_EQ(slow.df[0], -0.49);
}

TEST(Bench, AgreementThenTiming) {
  const auto rep = rbk::rhs_benchmark(Kernel::constant(1.0), {16, 64, 256}, 3, 5);
  ASSERT_EQ(rep.rows.size(), 3u);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.max_rel_error, 1e-11);
    EXPECT_GT(r.naive_median, 0.0);
    EXPECT_GT(r.fast_median, 0.0);
  }
  EXPECT_TRUE(std::isfinite(rep.naive_exponent));
  EXPECT_TRUE(std::isfinite(rep.fast_exponent));
}

TEST(Bench, ComponentwiseErrorOnLargeProductKernels) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const Kernel& k : {Kernel::product(1.0), Kernel::product(0.5)}) {
    std::vector<double> v(4096);
    for (auto& x : v) x = u(rng);
    const rbk::ClusterState<> f(v);
    EXPECT_LE(rbk::fast_path_error(rbk::rhs_separable_fast(f, k), rbk::rhs_naive(f, k), k, f), 1e-11);
  }
}

TEST(Bench, NonProductKernelRejected) {
  EXPECT_THROW(rbk::rhs_benchmark(Kernel::sum(1.0), {16}, 1), rbk::precondition_error);
  EXPECT_THROW(rbk::rhs_benchmark(Kernel::constant(1.0), {16}, 0), rbk::configuration_error);
}

TEST(WorkPool, ResultsIndependentOfJobs) {
  std::vector<int> a(50), b(50);
  rbk::run_pool(50, 1, [&](std::size_t k) { a[k] = int(k * k); });
  rbk::run_pool(50, 4, [&](std::size_t k) { b[k] = int(k * k); });
  EXPECT_EQ(a, b);
  EXPECT_THROW(rbk::run_pool(5, 3, [](std::size_t k) {
                 if (k == 2) throw std::runtime_error("x");
               }),
               std::runtime_error);
}

} // namespace
