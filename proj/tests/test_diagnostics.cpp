#include <gtest/gtest.h>

#include "rbk/diagnostics.hpp"

namespace {

using rbk::BoundSequence;
using rbk::ClusterState;
using rbk::Index;
using rbk::InitialCondition;
using rbk::Kernel;
using rbk::Trajectory;
using rbk::WeightSequence;

Trajectory<> run(const ClusterState<>& ic, const Kernel& k, double t_end,
                 const std::vector<WeightSequence>& weights = {}, double rtol = 1e-10) {
  rbk::IntegratorConfig cfg;
  cfg.t_end = t_end;
  cfg.rel_tol = rtol;
  std::vector<double> samples;
  for (int s = 1; s < 10; ++s) samples.push_back(t_end * s / 10.0);
  return rbk::integrate(ic, k, cfg, weights, samples);
}

ClusterState<> geometric(double q, Index n) { return InitialCondition::geometric(1.0, q).realize(n); }

const std::vector<Index> kZeroTails{1, 2, 5};

TEST(MassBalance, ZeroInitialCondition) {
  const auto traj = run(ClusterState<>(8), Kernel::constant(1.0), 2.0);
  const auto rep = rbk::mass_balance_check(traj, 1e-14);
  EXPECT_TRUE(rep.pass);
  for (const auto& e : rep.entries) EXPECT_EQ(e.residual, 0.0);
}

TEST(MassBalance, MonodisperseSplitsHalfAndHalf) {
  const auto traj = run(InitialCondition::monodisperse(1.0).realize(3), Kernel::constant(1.0), 1.0);
  EXPECT_NEAR(rbk::norm_1(traj.states.back()), 0.5, 1e-9);
  // D(t) = integral of f_1^2 = t / (1 + t)
  EXPECT_NEAR(traj.min_dissipation_integral(traj.samples() - 1), 0.5, 1e-9);
  const auto rep = rbk::mass_balance_check(traj, 1e-8);
  EXPECT_TRUE(rep.pass) << rep.worst.residual;
}

TEST(MassBalance, GeometricLargeTruncation) {
  const auto traj = run(geometric(0.5, 400), Kernel::constant(1.0), 10.0, {}, 1e-9);
  const auto rep = rbk::mass_balance_check(traj, 1e-7);
  EXPECT_TRUE(rep.pass) << rep.worst.residual;
  EXPECT_EQ(rep.entries.size(), traj.samples());
}

TEST(MassBalance, MissingAccumulatorIsConfigurationError) {
  Trajectory<> bare;
  bare.n = 1;
  bare.times = {0.0};
  bare.states = {ClusterState<>(std::vector<double>{1.0})};
  bare.accumulators = {{}};
  EXPECT_THROW(rbk::mass_balance_check(bare, 1e-8), rbk::configuration_error);
  EXPECT_THROW(rbk::derivative_l1_check(bare, 1e-8), rbk::configuration_error);
}

TEST(TailMonotonicity, ExamplesPass) {
  const auto zero = run(ClusterState<>(10), Kernel::sum(1.0), 1.0);
  EXPECT_TRUE(rbk::tail_monotonicity_check(zero, kZeroTails, 0.0).pass);

  const auto traj = run(geometric(0.5, 100), Kernel::sum(1.0), 5.0);
  const auto rep = rbk::tail_monotonicity_check(traj, {1, 5, 25, 100}, 1e-8);
  EXPECT_TRUE(rep.pass) << rep.worst.m << " " << rep.worst.residual;
  // m = 1 is the plain first moment
  for (const auto& e : rep.entries)
    if (e.m == 1) {
      EXPECT_LE(e.lhs, rbk::norm_1(traj.initial()) * (1 + 1e-8));
    }
}

TEST(TailMonotonicity, DetectsGrowthInFabricatedTrajectory) {
  Trajectory<> fake;
  fake.n = 3;
  fake.times = {0.0, 1.0};
  fake.states = {ClusterState<>(std::vector<double>{1, 0, 0}), ClusterState<>(std::vector<double>{0, 0, 1})};
  fake.accumulators = {{0, 0}, {0, 0}};
  const auto rep = rbk::tail_monotonicity_check(fake, {2}, 1e-3);
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.worst.m, Index(2));
  EXPECT_DOUBLE_EQ(rep.worst.residual, 3.0);
}

TEST(TailDissipation, ExamplesPass) {
  const auto weights = rbk::tail_weights({1, 10});
  const auto traj = run(geometric(0.5, 100), Kernel::constant(1.0), 10.0, weights);
  const auto rep = rbk::tail_dissipation_check(traj, {1, 10}, 1e-8);
  EXPECT_TRUE(rep.pass);
  EXPECT_GT(rep.slack(), 0.0);
  // m = 1 specializes to D(t) <= 2 ||f(0)||_1
  for (const auto& e : rep.entries)
    if (e.m == 1) {
      EXPECT_DOUBLE_EQ(e.bound, 2.0 * rbk::norm_1(traj.initial()));
    }

  const auto zero = run(ClusterState<>(12), Kernel::constant(1.0), 1.0, weights);
  EXPECT_TRUE(rbk::tail_dissipation_check(zero, {1, 10}, 0.0).pass);
}

TEST(TailDissipation, UnregisteredTailIsConfigurationError) {
  const auto traj = run(geometric(0.5, 20), Kernel::constant(1.0), 1.0, rbk::tail_weights({1}));
  EXPECT_THROW(rbk::tail_dissipation_check(traj, {1, 5}, 1e-8), rbk::configuration_error);
}

TEST(TailDissipation, AgreesWithMassBalanceAtFirstTail) {
  const auto traj = run(geometric(0.5, 60), Kernel::sum(1.0), 3.0, rbk::tail_weights({1}));
  for (std::size_t s = 0; s < traj.samples(); ++s) {
    const double d = traj.min_dissipation_integral(s);
    const double tail = traj.weight_lower(s, 0) + traj.weight_diag(s, 0);
    EXPECT_LE(std::abs(d - tail), 1e-12 * std::max(d, 1.0));
  }
}

TEST(WeightedTail, ExamplesPass) {
  const BoundSequence ones(std::vector<double>(30, 1.0));
  const auto traj = run(geometric(0.5, 30), Kernel::constant(1.0), 3.0);
  EXPECT_TRUE(rbk::weighted_tail_check(traj, Kernel::constant(1.0), ones, {1}, 1e-10).pass);

  const auto zero = run(ClusterState<>(30), Kernel::constant(1.0), 1.0);
  EXPECT_TRUE(rbk::weighted_tail_check(zero, Kernel::constant(1.0), ones, {1, 5}, 0.0).pass);

  const Kernel prod = Kernel::product(1.0);
  const auto A = rbk::dominating_sequence(prod, 60);
  const auto ptraj = run(geometric(0.25, 60), prod, 2.0);
  const auto rep = rbk::weighted_tail_check(ptraj, prod, A, rbk::log_spaced_indices(60), 1e-8);
  EXPECT_TRUE(rep.pass) << rep.worst.m << " " << rep.worst.residual;
}

TEST(WeightedTail, UncertifiedBoundIsPreconditionError) {
  const BoundSequence ones(std::vector<double>(20, 1.0));
  const auto traj = run(geometric(0.5, 20), Kernel::sum(2.0), 0.5);
  EXPECT_THROW(rbk::weighted_tail_check(traj, Kernel::sum(2.0), ones, {1}, 1e-8),
               rbk::precondition_error);
}

TEST(DerivativeL1, Examples) {
  const auto zero = run(ClusterState<>(5), Kernel::constant(1.0), 1.0);
  EXPECT_TRUE(rbk::derivative_l1_check(zero, 0.0).pass);

  const auto mono = run(InitialCondition::monodisperse(1.0).realize(3), Kernel::constant(1.0), 4.0);
  for (std::size_t s = 0; s < mono.samples(); ++s)
    EXPECT_NEAR(mono.abs_derivative_integral(s), 1.0 - mono.states[s].at(1), 1e-9);
  EXPECT_TRUE(rbk::derivative_l1_check(mono, 1e-6).pass);

  const auto rapid = run(geometric(0.5, 200), Kernel::sum(2.0), 1.0, {}, 1e-8);
  const auto rep = rbk::derivative_l1_check(rapid, 1e-6);
  EXPECT_TRUE(rep.pass) << rep.worst.lhs << " vs " << rep.worst.bound;
}

// f and g share one replayed step schedule so their difference carries no
// step-selection noise.
std::pair<Trajectory<>, Trajectory<>> perturbed_pair(const ClusterState<>& f0, double delta,
                                                     const Kernel& k, double t_end) {
  auto g = f0.values();
  g[0] += delta;
  std::vector<double> samples{0.25 * t_end, 0.5 * t_end, 0.75 * t_end};
  auto f = rbk::reference_integrate(f0, k, t_end, 1e-12, samples);
  auto gt = rbk::integrate_on_schedule(ClusterState<>(g), k, f.step_times, f.times);
  return {std::move(f), std::move(gt)};
}

TEST(Gronwall, IdenticalInitialDataGiveZeroDistance) {
  const auto f = run(geometric(0.5, 20), Kernel::constant(1.0), 2.0);
  const auto A = rbk::dominating_sequence(Kernel::constant(1.0), 20);
  const auto rep = rbk::gronwall_stability_check(f, f, Kernel::constant(1.0), A, 0.0);
  EXPECT_TRUE(rep.pass);
  for (const auto& e : rep.entries) EXPECT_EQ(e.lhs, 0.0);
}

TEST(Gronwall, PerturbationExamples) {
  const Kernel c1 = Kernel::constant(1.0);
  auto [f, g] = perturbed_pair(geometric(0.5, 40), 1e-6, c1, 2.0);
  const auto rep = rbk::gronwall_stability_check(f, g, c1, rbk::dominating_sequence(c1, 40), 1e-6);
  EXPECT_TRUE(rep.pass);
  // large slack: the exponential bound is far above the observed distance
  EXPECT_LT(rep.entries.back().lhs, 0.5 * rep.entries.back().bound);

  const Kernel prod = Kernel::product(1.0);
  const auto A = BoundSequence::from_function([](Index i) { return 1.0 + double(i * i); }, 40);
  auto [fp, gp] = perturbed_pair(geometric(0.125, 40), 1e-3, prod, 1.0);
  EXPECT_TRUE(rbk::gronwall_stability_check(fp, gp, prod, A, 1e-6).pass);
}

TEST(Gronwall, LinearResponseToPerturbationSize) {
  const Kernel c1 = Kernel::constant(1.0);
  const auto A = rbk::dominating_sequence(c1, 40);
  auto [f1, g1] = perturbed_pair(geometric(0.5, 40), 1e-7, c1, 2.0);
  auto [f2, g2] = perturbed_pair(geometric(0.5, 40), 1e-6, c1, 2.0);
  const auto r1 = rbk::gronwall_stability_check(f1, g1, c1, A, 1e-6);
  const auto r2 = rbk::gronwall_stability_check(f2, g2, c1, A, 1e-6);
  ASSERT_EQ(r1.entries.size(), r2.entries.size());
  for (std::size_t s = 0; s < r1.entries.size(); ++s)
    EXPECT_NEAR(r2.entries[s].lhs / r1.entries[s].lhs, 10.0, 0.5) << "t=" << r1.entries[s].t;
}

TEST(Gronwall, MismatchedTrajectoriesAreConfigurationErrors) {
  const Kernel c1 = Kernel::constant(1.0);
  const auto A = rbk::dominating_sequence(c1, 30);
  const auto f = run(geometric(0.5, 20), c1, 1.0);
  const auto other_n = run(geometric(0.5, 30), c1, 1.0);
  const auto other_t = run(geometric(0.5, 20), c1, 2.0);
  const auto other_k = run(geometric(0.5, 20), Kernel::constant(2.0), 1.0);
  EXPECT_THROW(rbk::gronwall_stability_check(f, other_n, c1, A, 1e-6), rbk::configuration_error);
  EXPECT_THROW(rbk::gronwall_stability_check(f, other_t, c1, A, 1e-6), rbk::configuration_error);
  EXPECT_THROW(rbk::gronwall_stability_check(f, other_k, c1, A, 1e-6), rbk::configuration_error);
}

TEST(WeightChecks, BalanceAndMonotonicity) {
  std::vector<double> wave(30);
  for (Index i = 1; i <= 30; ++i) wave[i - 1] = (i % 2 ? 1.0 : -1.0) * double(i);
  const std::vector<WeightSequence> weights{WeightSequence::identity(), WeightSequence::tail(4),
                                            WeightSequence::from_values("wave", wave)};
  const auto traj = run(geometric(0.5, 30), Kernel::sum(1.0), 2.0, weights);
  EXPECT_TRUE(rbk::weight_balance_check(traj, weights, 1e-8).pass);
  const auto mono = rbk::weight_monotonicity_check(traj, weights, 1e-10);
  EXPECT_TRUE(mono.pass);
  // the signed weight is skipped, the other two give one entry per interval
  EXPECT_EQ(mono.entries.size(), 2 * (traj.samples() - 1));
  EXPECT_THROW(rbk::weight_balance_check(traj, {WeightSequence::constant(1.0)}, 1e-8),
               rbk::configuration_error);
}

TEST(Reports, VerdictIsMonotoneInTolerance) {
  const auto traj = run(geometric(0.5, 50), Kernel::sum(2.0), 1.0, rbk::tail_weights({1, 5}), 1e-7);
  const auto A = rbk::dominating_sequence(Kernel::sum(2.0), 50);
  for (const double base : {0.0, 1e-14, 1e-12, 1e-10, 1e-9, 1e-8}) {
    const std::vector<rbk::DiagnosticReport> at = {
        rbk::mass_balance_check(traj, base), rbk::tail_monotonicity_check(traj, {1, 5}, base),
        rbk::tail_dissipation_check(traj, {1, 5}, base),
        rbk::weighted_tail_check(traj, Kernel::sum(2.0), A, {1, 5}, base),
        rbk::derivative_l1_check(traj, base)};
    const std::vector<rbk::DiagnosticReport> looser = {
        rbk::mass_balance_check(traj, base * 10 + 1e-15),
        rbk::tail_monotonicity_check(traj, {1, 5}, base * 10 + 1e-15),
        rbk::tail_dissipation_check(traj, {1, 5}, base * 10 + 1e-15),
        rbk::weighted_tail_check(traj, Kernel::sum(2.0), A, {1, 5}, base * 10 + 1e-15),
        rbk::derivative_l1_check(traj, base * 10 + 1e-15)};
    for (std::size_t c = 0; c < at.size(); ++c)
      if (at[c].pass) {
        EXPECT_TRUE(looser[c].pass) << at[c].name << " tol=" << base;
      }
  }
}

TEST(Reports, PassIffEveryResidualWithinTolerance) {
  rbk::DiagnosticReport rep{"r", 1e-3};
  rep.add({0.0, 0, 1.0, 1.0, 5e-4});
  EXPECT_TRUE(rep.pass);
  rep.add({1.0, 2, 1.0, 1.0, 2e-3});
  EXPECT_FALSE(rep.pass);
  EXPECT_EQ(rep.worst.m, Index(2));
  EXPECT_LT(rep.slack(), 0.0);
}

TEST(Helpers, LogSpacedIndices) {
  EXPECT_EQ(rbk::log_spaced_indices(100), (std::vector<Index>{1, 2, 5, 10, 25, 50, 100}));
  EXPECT_EQ(rbk::log_spaced_indices(4), (std::vector<Index>{1, 2}));
  EXPECT_EQ(rbk::log_spaced_indices(1), (std::vector<Index>{1}));
}

} // namespace
