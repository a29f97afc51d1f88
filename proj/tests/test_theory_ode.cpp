#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "inopca/errors.hpp"
#include "inopca/theory_ode.hpp"
#include "oracles.hpp"

using namespace inopca;

TEST(OdeRhs, MatchesIndependentFormula) {
  for (double q : {-0.7, 0.0, 0.2, 0.9})
    for (double l : {0.3, 1.0, 2.5})
      for (double w : {0.0, 0.5, 2.0})
        for (double tau : {0.1, 0.5, 1.0}) {
          const auto d = ode_rhs(q, l, w, tau);
          const auto ref = oracle::ino_rhs(q, l, w, tau);
          EXPECT_NEAR(d.dq, ref[0], 1e-14);
          EXPECT_NEAR(d.dlambda, ref[1], 1e-14);
        }
}

TEST(OdeRhs, ZeroCosineIsInvariant) {
  for (double l : {0.5, 1.0, 3.0}) EXPECT_EQ(ode_rhs(0.0, l, 1.0, 0.5).dq, 0.0);
}

TEST(OdeRhs, RejectsNonPositiveNorm) {
  EXPECT_THROW(ode_rhs(0.1, 0.0, 1.0, 0.5), DomainError);
  EXPECT_THROW(ode_rhs(0.1, -1.0, 1.0, 0.5), DomainError);
}

TEST(OdeRhs, VanishesAtBothBranches) {
  const double tau = 0.5;
  const double lu = (1.0 + std::sqrt(1.0 + 2.0 * tau)) / 2.0;
  EXPECT_NEAR(ode_rhs(0.0, lu, 1.0, tau).dlambda, 0.0, 1e-12);
  const double q2 = (1.0 + 1.0 - tau / 2) / (1.0 + 1.0 + tau / 2);
  const auto d = ode_rhs(std::sqrt(q2), 2.0, 1.0, tau);
  EXPECT_NEAR(d.dq, 0.0, 1e-12);
  EXPECT_NEAR(d.dlambda, 0.0, 1e-12);
}

TEST(SteadyState, LearningBranchMatchesRootFinding) {
  for (double w : {0.3, 0.5, 1.0, 2.0})
    for (double tau : {0.1, 0.5, 1.0}) {
      if (w * w + w <= tau / 2.0) continue;
      const SteadyState s = steady_state(w, tau);
      ASSERT_EQ(s.branch, Branch::Learning);
      EXPECT_NEAR(s.q_squared, oracle::learning_q_squared(w, tau), 1e-12);
      EXPECT_DOUBLE_EQ(s.lambda, w + 1.0);
    }
}

TEST(SteadyState, KnownValues) {
  const SteadyState a = steady_state(1.0, 0.5);
  EXPECT_EQ(a.branch, Branch::Learning);
  EXPECT_NEAR(a.q_squared, 7.0 / 9.0, 1e-15);
  EXPECT_NEAR(a.q(), 0.8819171036881969, 1e-15);
  const SteadyState b = steady_state(0.1, 0.5);
  EXPECT_EQ(b.branch, Branch::Unstable);
  EXPECT_EQ(b.q_squared, 0.0);
  EXPECT_NEAR(b.lambda, 1.2071067811865475, 1e-15);
}

TEST(SteadyState, TieAtThresholdIsUnstable) {
  // tau = 4 puts the threshold at omega = 1 exactly
  EXPECT_EQ(steady_state(1.0, 4.0).branch, Branch::Unstable);
  EXPECT_EQ(steady_state(1.0, 4.0).q_squared, 0.0);
}

TEST(CriticalSnr, MatchesBisection) {
  for (double tau : {0.05, 0.5, 1.0, 4.0}) EXPECT_NEAR(critical_snr(tau), oracle::critical_snr(tau), 1e-12);
  EXPECT_NEAR(critical_snr(4.0), 1.0, 1e-15);
  EXPECT_NEAR(critical_snr(0.5), 0.207107, 5e-7);
  EXPECT_LT(critical_snr(1e-8), 1e-7);
}

TEST(OptimalNu, ValuesAndOptimality) {
  EXPECT_DOUBLE_EQ(optimal_nu(0.0, 1.7), 1.7);
  EXPECT_DOUBLE_EQ(optimal_nu(1.0, 1.7), 0.0);
  EXPECT_NEAR(optimal_nu(0.5, 1.0), 0.6, 1e-15);
  for (double q : {0.05, 0.3, 0.6, 0.95})
    for (double w : {0.2, 1.0, 3.0}) {
      const double nu = optimal_nu(q, w);
      const double g = alignment_growth(nu, q, w);
      EXPECT_GT(g, alignment_growth(nu * 1.01, q, w));
      EXPECT_GT(g, alignment_growth(nu * 0.99, q, w));
    }
}

TEST(OptimalLambda0, RatioAndDomain) {
  EXPECT_DOUBLE_EQ(optimal_lambda0(0.5, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(optimal_lambda0(0.7, 0.7), 1.0);
  EXPECT_THROW(optimal_lambda0(0.5, 0.0), DomainError);
}

TEST(OjaOde, AgreesWithInoAtUnitNorm) {
  for (double q : {0.0, 0.3, 0.8}) {
    EXPECT_EQ(oja_ode_rhs(0.0, 1.0, 0.5), 0.0);
    EXPECT_NEAR(oja_ode_rhs(q, 1.3, 0.4), ode_rhs(q, 1.0, 1.3, 0.4).dq, 1e-15);
  }
}

TEST(OjaOde, RescaledRateHasSameFixedPoint) {
  for (double w : {0.5, 1.0, 2.0}) {
    const double tau = 0.5;
    const double th = tau / (1.0 + w);
    const double q2 = oracle::bisect([&](double s) { return w - w * s - th * (w * s + 1.0) / 2.0; }, 0.0, 1.0);
    EXPECT_NEAR(q2, steady_state(w, tau).q_squared, 1e-12);
  }
}

TEST(Integrate, ConvergesToLearningFixedPoint) {
  const auto tr = integrate({1.0, 0.5, 0.1, 1.0, OdeModel::InoPca}, 60.0);
  EXPECT_NEAR(tr.q.back(), 0.8819171, 1e-3);
  EXPECT_NEAR(tr.lambda.back(), 2.0, 1e-3);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    ASSERT_LE(std::abs(tr.q[i]), 1.0);
    ASSERT_GT(tr.lambda[i], 0.0);
  }
}

TEST(Integrate, AgreesWithAdaptiveReferenceSolver) {
  const std::vector<double> ts{0.0, 1.0, 5.0, 10.0, 20.0, 30.0};
  const auto ref = oracle::reference_trajectory(1.0, 0.1, 1.0, ts, [](double, double) { return 0.5; });
  const auto tr = integrate({1.0, 0.5, 0.1, 1.0, OdeModel::InoPca}, 30.0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto v = tr.at(ts[i]);
    EXPECT_NEAR(v[0], ref[i][0], 1e-9);
    EXPECT_NEAR(v[1], ref[i][1], 1e-9);
  }
  const auto refa = oracle::reference_trajectory(1.0, 0.1, 1.0, ts, [](double q, double l) {
    return l * (1.0 - q * q) / (q * q + 1.0);
  });
  const auto tra = integrate({1.0, 0.0, 0.1, 1.0, OdeModel::InoPcaAdaptive}, 30.0);
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NEAR(tra.at(ts[i])[0], refa[i][0], 1e-9);
}

TEST(Integrate, FourthOrderInDt) {
  const OdeParams p{1.0, 0.5, 0.1, 1.0, OdeModel::InoPca};
  const auto a = integrate(p, 20.0, 1e-2);
  const auto b = integrate(p, 20.0, 5e-3);
  EXPECT_LE(std::abs(a.q.back() - b.q.back()), 1e-6);
  EXPECT_LE(std::abs(a.lambda.back() - b.lambda.back()), 1e-6);
}

TEST(Integrate, SmallRateApproachesPerfectAlignment) {
  const auto tr = integrate({1.0, 1e-3, 0.1, 1.0, OdeModel::InoPca}, 20000.0, 0.05, 1000);
  EXPECT_GT(tr.q.back(), 0.999);
}

TEST(Integrate, BasinIndependenceOfInitialNorm) {
  std::vector<double> finals;
  for (double l0 : {0.2, 1.0, 3.0}) {
    const auto tr = integrate({1.0, 0.5, 0.1, l0, OdeModel::InoPca}, 100.0, 1e-3, 1000);
    finals.push_back(tr.q.back());
    EXPECT_NEAR(tr.lambda.back(), 2.0, 1e-3);
  }
  EXPECT_NEAR(finals[0], finals[1], 1e-3);
  EXPECT_NEAR(finals[1], finals[2], 1e-3);
}

TEST(Integrate, NormSettlesAtLeadingEigenvalue) {
  const auto tr = integrate({1.0, 0.5, 0.1, 1.0, OdeModel::InoPca}, 200.0, 1e-3, 100);
  EXPECT_LT(std::abs(tr.lambda.back() - 2.0), 1e-3);
  // nondecreasing once past the first few units of time
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (tr.t[i] > 5.0) {
      ASSERT_GE(tr.lambda[i], tr.lambda[i - 1] - 1e-12);
    }
  }
}

TEST(Integrate, AdaptiveDominatesFixedRates) {
  const auto ad = integrate({1.0, 0.0, 0.1, 1.0, OdeModel::InoPcaAdaptive}, 40.0);
  for (double tau : {0.1, 0.5, 1.0}) {
    const auto fx = integrate({1.0, tau, 0.1, 1.0, OdeModel::InoPca}, 40.0);
    for (std::size_t i = 0; i < ad.size(); ++i) ASSERT_GE(ad.q[i], fx.q[i] - 1e-6) << "tau=" << tau << " t=" << ad.t[i];
  }
}

TEST(Integrate, ValidatesInputs) {
  EXPECT_THROW(integrate({1.0, 0.5, 0.0, 1.0, OdeModel::InoPca}, 1.0), DomainError);
  EXPECT_THROW(integrate({1.0, 0.5, 1.0, 1.0, OdeModel::InoPca}, 1.0), DomainError);
  EXPECT_THROW(integrate({1.0, 0.5, 0.1, 0.0, OdeModel::InoPca}, 1.0), DomainError);
  EXPECT_THROW(integrate({1.0, 0.5, 0.1, 1.0, OdeModel::InoPca}, 1.0, 0.0), ConfigError);
}

TEST(Integrate, BlowUpSuggestsSmallerStep) {
  try {
    integrate({1.0, 50.0, 0.5, 0.05, OdeModel::InoPca}, 5.0, 0.5);
    FAIL() << "expected blow-up";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("smaller dt"), std::string::npos);
  }
}

TEST(Trajectory, InterpolatesLinearly) {
  TheoryTrajectory tr{{0.0, 1.0}, {0.0, 0.5}, {1.0, 3.0}};
  const auto v = tr.at(0.25);
  EXPECT_DOUBLE_EQ(v[0], 0.125);
  EXPECT_DOUBLE_EQ(v[1], 1.5);
  EXPECT_DOUBLE_EQ(tr.at(5.0)[1], 3.0);
}
