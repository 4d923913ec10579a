#include "oracles.hpp"
#include "romrec/diag.hpp"
#include "romrec/harness.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace romrec;

TEST(ExpectationIdentity, ZeroMatrix) {
  const ProbeReport r = probe_expectation_identity(5, 100, SymMatrix(5), 3, 1);
  EXPECT_DOUBLE_EQ(r.measured, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(ExpectationIdentity, IdentityMatrix) {
  // m * trials = 1e6.
  const ProbeReport r = probe_expectation_identity(5, 10000, SymMatrix::identity(5), 100, 2);
  EXPECT_LE(r.measured, 0.05 * (2.0 + 5.0));
  EXPECT_TRUE(r.pass);
}

TEST(ExpectationIdentity, SingleTrialMatchesNaiveAverage) {
  const Index p = 4, m = 30;
  const SymMatrix mat = random_psd(p, 2, 3);
  const ProbeReport r = probe_expectation_identity(p, m, mat, 1, 9);
  const RankOneEnsemble e(p, m, detail::trial_seed(9, 0));
  const Matrix xs = e.vectors();
  const Matrix s = oracle::adjoint(xs, oracle::forward(xs, mat.dense())) / static_cast<double>(m);
  const Matrix target = 2.0 * mat.dense() + mat.dense().trace() * Matrix::Identity(p, p);
  EXPECT_NEAR(r.measured, oracle::spectral_norm(s - target), 1e-9);
}

TEST(ExpectationIdentity, RateCheck) {
  const SymMatrix mat = random_psd(20, 3, 4);
  const ProbeReport r = probe_expectation_rate(20, 500, mat, 50, 4, 5);
  EXPECT_TRUE(r.pass) << r.measured;
}

TEST(MeanObservation, ZeroTruthIsExact) {
  GroundTruth zero{SymMatrix(6), LowRankFactors::zero(6), 1.0};
  const ProbeReport r = probe_mean_observation(zero, 50, 5, 1);
  EXPECT_DOUBLE_EQ(r.measured, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(MeanObservation, BelowBoundAndRate) {
  const GroundTruth t = generate_instance(20, 2, 1.0, 7);
  EXPECT_TRUE(probe_mean_observation(t, 10000, 100, 8).pass);
  const ProbeReport rate = probe_mean_observation_rate(t, 2000, 400, 9);
  EXPECT_TRUE(rate.pass) << rate.measured;
}

TEST(StatisticalError, ZeroNoise) {
  const ProbeReport r = probe_statistical_error(10, 100, 0.0, 3, 1);
  EXPECT_DOUBLE_EQ(r.measured, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(StatisticalError, SpreadAndRates) {
  const ProbeReport r = probe_statistical_error(30, 3000, 0.1, 50, 2);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.measured, 0.0);
  const ProbeReport rate = probe_statistical_error_rate(30, 3000, 0.1, 20, 3);
  EXPECT_TRUE(rate.pass) << rate.measured;
  const ProbeReport growth = probe_statistical_error_growth(30, 3000, 0.1, 20, 4);
  EXPECT_TRUE(growth.pass) << growth.measured << " vs " << growth.predicted;
}

TEST(Curip, DegenerateCases) {
  const SymMatrix l1 = generate_instance(10, 2, 1.0, 1).matrix;
  const SymMatrix l2 = generate_instance(10, 2, 1.0, 2).matrix;
  // rho = 0: lhs is ||L1 - L2||_2, so the ratio is exactly one.
  EXPECT_NEAR(probe_curip(l1, l2, 10, 200, 0.0, 3, 5).measured, 1.0, 1e-12);
  // L1 = L2: lhs = rho |Tr(L1) - ybar|.
  const RankOneEnsemble e(10, 5000, 6);
  const double ybar = apply_operator(e, l1).mean();
  EXPECT_NEAR(curip_lhs(l1, l1, e, 0.5), 0.5 * std::abs(trace(l1) - ybar), 1e-10);
  EXPECT_LT(curip_lhs(l1, l1, e, 0.5), 0.1);
}

TEST(Curip, RatioDecreasesWithM) {
  const SymMatrix l1 = generate_instance(30, 3, 1.0, 3).matrix;
  const SymMatrix l2 = generate_instance(30, 3, 1.0, 4).matrix;
  const ProbeReport r = probe_curip_trend(l1, l2, 30, 1000, 10000, 0.5, 5, 7);
  EXPECT_TRUE(r.pass) << r.param_string();
}

TEST(Projection, CorpusHasRequestedGaps) {
  const auto corpus = projection_corpus(40, 5, 4, 3);
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const oracle::Eig e = oracle::jacobi(corpus[k].dense());
    const double ratio = std::abs(e.values(4)) / std::abs(e.values(5)) - 1.0;
    if (k % 2 == 0)
      EXPECT_GT(ratio, 1.0);
    else
      EXPECT_LE(ratio, 1e-3);
  }
}

TEST(Projection, ConstantsWithinThresholds) {
  const auto reports = probe_projection_constants(40, 5, 0.1, 50, 11);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_TRUE(reports[0].pass) << reports[0].measured;
  EXPECT_TRUE(reports[1].pass) << reports[1].measured;
  EXPECT_GE(reports[0].measured, 1.0 - 1e-12);
  EXPECT_LE(reports[1].measured, 1.0 + 1e-12);
}

TEST(Property, ProbesAreDeterministic) {
  const SymMatrix mat = random_psd(8, 2, 1);
  const ProbeReport a = probe_expectation_identity(8, 200, mat, 5, 42);
  const ProbeReport b = probe_expectation_identity(8, 200, mat, 5, 42);
  EXPECT_EQ(a.measured, b.measured);
  std::ostringstream sa, sb;
  write_probe_row(sa, a);
  write_probe_row(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(probe_expectation_identity(8, 200, mat, 5, 43).measured, a.measured);
}

TEST(Csv, ProbeRowFormat) {
  ProbeReport r{"x", {}, 1.5, 2.0, true, 7};
  r.with("p", 3).with("m", 10);
  std::ostringstream s;
  write_probe_header(s);
  write_probe_row(s, r);
  EXPECT_EQ(s.str(), "probe,param_json,measured,predicted,pass,seed\nx,p=3;m=10,1.5,2,1,7\n");
}

TEST(Probes, ArgumentChecks) {
  EXPECT_THROW(probe_expectation_identity(5, 10, SymMatrix(5), 0, 1), ConfigError);
  EXPECT_THROW(probe_expectation_identity(5, 0, SymMatrix(5), 1, 1), DimensionError);
  EXPECT_THROW(probe_statistical_error(5, 10, -1.0, 1, 1), ConfigError);
}
