#include <cmath>

#include <gtest/gtest.h>

#include "inopca/errors.hpp"
#include "inopca/metrics.hpp"
#include "inopca/random.hpp"
#include "inopca/spiked_model.hpp"
#include "inopca/vector_ops.hpp"

using namespace inopca;

TEST(SignalDist, ParsesGrammar) {
  EXPECT_EQ(SignalDist::parse("uniform"), SignalDist::uniform());
  EXPECT_EQ(SignalDist::parse("expshift"), SignalDist::exp_shift(0.9));
  EXPECT_EQ(SignalDist::parse("expshift:0.5"), SignalDist::exp_shift(0.5));
  EXPECT_EQ(SignalDist::parse("sparse:0.05"), SignalDist::sparse(0.05));
  EXPECT_EQ(SignalDist::parse("sparse:0.05").to_string(), "sparse:0.05");
  EXPECT_THROW(SignalDist::parse("sparse"), ConfigError);
  EXPECT_THROW(SignalDist::parse("sparse:1.5"), ConfigError);
  EXPECT_THROW(SignalDist::parse("sparse:0"), ConfigError);
  EXPECT_THROW(SignalDist::parse("gauss"), ConfigError);
}

TEST(MakeSignal, NormIsExactlySqrtP) {
  for (const auto& d : {SignalDist::uniform(), SignalDist::exp_shift(), SignalDist::sparse(0.3)}) {
    for (std::size_t p : {4u, 17u, 1000u}) {
      Rng rng(3);
      const SignalVector xi = make_signal(d, p, rng);
      ASSERT_EQ(xi.dimension(), p);
      EXPECT_NEAR(vec::squared_norm(xi.entries) / static_cast<double>(p), 1.0, 1e-12);
    }
  }
}

TEST(MakeSignal, SparseHasTwoLevels) {
  Rng rng(11);
  const std::size_t p = 20000;
  const SignalVector xi = make_signal(SignalDist::sparse(0.05), p, rng);
  std::size_t nonzero = 0;
  double level = 0.0;
  for (double v : xi.entries)
    if (v != 0.0) {
      ++nonzero;
      if (level == 0.0) level = v;
      EXPECT_DOUBLE_EQ(v, level);
    }
  const double frac = static_cast<double>(nonzero) / p;
  EXPECT_NEAR(frac, 0.05, 0.005);
  // after rescaling the common level is 1/sqrt(frac)
  EXPECT_NEAR(level, 1.0 / std::sqrt(frac), 1e-9);
}

TEST(MakeSignal, DeterministicForSeed) {
  Rng a(5);
  Rng b(5);
  EXPECT_EQ(make_signal(SignalDist::uniform(), 50, a).entries, make_signal(SignalDist::uniform(), 50, b).entries);
}

TEST(MakeSignal, RejectsTinyDimension) {
  Rng rng(1);
  EXPECT_THROW(make_signal(SignalDist::uniform(), 1, rng), ConfigError);
}

TEST(Observation, PureNoiseAtZeroSnr) {
  Rng r1(9);
  const SignalVector xi = make_signal(SignalDist::uniform(), 8, r1);
  Rng a(21);
  Rng b(21);
  const Observation obs = sample_observation(xi, 0.0, a);
  (void)b.normal(); // the latent c is drawn first
  for (double v : obs.y) EXPECT_DOUBLE_EQ(v, b.normal());
}

TEST(Observation, RejectsNegativeSnr) {
  Rng rng(1);
  const SignalVector xi = make_signal(SignalDist::uniform(), 8, rng);
  EXPECT_THROW(sample_observation(xi, -0.1, rng), ConfigError);
}

TEST(Observation, ProjectionMomentsMatchCovariance) {
  // y'xi/sqrt(p) ~ N(0, 1 + omega) under the model
  const std::size_t p = 64;
  const double omega = 1.5;
  Rng rng(17);
  const SignalVector xi = make_signal(SignalDist::uniform(), p, rng);
  const int n = 200000;
  double m1 = 0.0;
  double m2 = 0.0;
  double c2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Observation o = sample_observation(xi, omega, rng);
    const double s = vec::dot(o.y, xi.entries) / std::sqrt(static_cast<double>(p));
    m1 += s;
    m2 += s * s;
    c2 += o.c * o.c;
  }
  m1 /= n;
  m2 /= n;
  c2 /= n;
  EXPECT_NEAR(m1, 0.0, 4.0 * std::sqrt((1 + omega) / n));
  EXPECT_NEAR(m2, 1.0 + omega, 4.0 * (1 + omega) * std::sqrt(2.0 / n));
  EXPECT_NEAR(c2, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(InitEstimate, WarmStartHasExactCosine) {
  Rng rng(2);
  const SignalVector xi = make_signal(SignalDist::exp_shift(), 500, rng);
  for (double c : {0.1, 0.5, 0.9}) {
    for (double l0 : {0.3, 1.0, 4.0}) {
      const EstimateState s = init_estimate(InitSpec::warm(c, l0), xi, rng);
      EXPECT_NEAR(cosine_similarity(s.x, xi.view()), c, 1e-10);
      EXPECT_EQ(s.lambda, l0);
      EXPECT_NEAR(norm_parameter(s.x), l0, 1e-12 * l0);
    }
  }
}

TEST(InitEstimate, ColdStartIsNearlyOrthogonal) {
  const std::size_t p = 10000;
  int big = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const SignalVector xi = make_signal(SignalDist::uniform(), p, rng);
    const EstimateState s = init_estimate(InitSpec::cold(1.0), xi, rng);
    if (std::abs(cosine_similarity(s.x, xi.view())) > 0.05) ++big;
    EXPECT_EQ(s.lambda, 1.0);
  }
  EXPECT_EQ(big, 0);
}

TEST(InitSpec, ParsesAndValidates) {
  EXPECT_EQ(InitSpec::parse("cold").mode, InitSpec::Mode::Cold);
  const InitSpec w = InitSpec::parse("warm:0.3", 2.0);
  EXPECT_EQ(w.mode, InitSpec::Mode::Warm);
  EXPECT_DOUBLE_EQ(w.c, 0.3);
  EXPECT_DOUBLE_EQ(w.lambda0, 2.0);
  EXPECT_DOUBLE_EQ(InitSpec::parse("warm").c, 0.1);
  EXPECT_THROW(InitSpec::parse("warm:1"), ConfigError);
  EXPECT_THROW(InitSpec::parse("warm:0"), ConfigError);
  EXPECT_THROW(InitSpec::parse("cold", 0.0), ConfigError);
  EXPECT_THROW(InitSpec::parse("cold", -1.0), ConfigError);
  EXPECT_THROW(InitSpec::parse("hot"), ConfigError);
}

TEST(Rng, TrialStreamsAreIndependentOfOrder) {
  Rng a = Rng::for_trial(42, 3);
  Rng b = Rng::for_trial(42, 3);
  Rng c = Rng::for_trial(42, 4);
  const double x = a.normal();
  EXPECT_EQ(x, b.normal());
  EXPECT_NE(x, c.normal());
  EXPECT_NE(Rng(42).normal(), Rng::for_trial(42, 0).normal());
}
