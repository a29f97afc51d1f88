#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "inopca/harness.hpp"
#include "inopca/io.hpp"
#include "inopca/multipc.hpp"
#include "oracles.hpp"

using namespace inopca;

namespace {

ExperimentConfig small(std::size_t p = 100, double t_max = 5.0, std::size_t trials = 3) {
  ExperimentConfig c;
  c.p = p;
  c.t_max = t_max;
  c.trials = trials;
  c.threads = 1;
  return c;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("inopca_test_" + name);
  std::ofstream(path) << body;
  return path;
}

} // namespace

TEST(Trial, RecordsEveryStride) {
  const auto tr = run_trial(small(100, 30.0), 0);
  ASSERT_EQ(tr.t.size(), 301u);
  EXPECT_EQ(tr.t.front(), 0.0);
  EXPECT_NEAR(tr.t.back(), 30.0, 1e-12);
  EXPECT_NEAR(tr.t[7], 0.7, 1e-12);
  EXPECT_NEAR(std::abs(tr.q.front()), 0.1, 0.05);
}

TEST(Trial, SeedDeterminesEverything) {
  const auto c = small();
  const auto a = run_trial(c, 2);
  const auto b = run_trial(c, 2);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_NE(a.q, run_trial(c, 1).q);
  auto other = c;
  other.seed = 99;
  EXPECT_NE(a.q, run_trial(other, 2).q);
}

TEST(Trial, Snapshots) {
  auto c = small(200, 3.0, 1);
  c.snapshot_times = {0.0, 1.5, 3.0};
  const auto tr = run_trial(c, 0);
  ASSERT_EQ(tr.snapshots.size(), 3u);
  EXPECT_EQ(tr.snapshots[1].t, 1.5);
  EXPECT_EQ(tr.snapshots[2].x.size(), 200u);
  EXPECT_DOUBLE_EQ(tr.snapshots[2].lambda, tr.lambda.back());
}

TEST(Trial, SwitchChangesTheReferenceSignal) {
  auto c = small(300, 40.0, 1);
  c.switch_at = SwitchSpec{30.0, SignalDist::sparse(0.1)};
  const auto tr = run_trial(c, 0);
  const std::size_t k = 300;
  ASSERT_NEAR(tr.t[k], 30.0, 1e-12);
  EXPECT_GT(std::abs(tr.q[k]), 0.7);
  EXPECT_LT(std::abs(tr.q[k + 1]), 0.4);
}

TEST(Trial, ValidationMessages) {
  auto c = small();
  c.p = 1;
  EXPECT_THROW(c.validated(), ConfigError);
  c = small();
  c.sample_every = 0.001;
  EXPECT_THROW(c.validated(), ConfigError);
  c = small();
  c.switch_at = SwitchSpec{9.0, SignalDist::uniform()};
  EXPECT_THROW(c.validated(), ConfigError);
  c = small();
  c.snapshot_times = {6.0};
  EXPECT_THROW(c.validated(), ConfigError);
  c = small();
  c.trials = 0;
  EXPECT_THROW(c.validated(), ConfigError);
}

TEST(MonteCarlo, IndependentOfThreadCount) {
  auto c = small(100, 5.0, 5);
  const auto one = run_monte_carlo(c);
  c.threads = 3;
  const auto three = run_monte_carlo(c);
  EXPECT_EQ(one.q_mean, three.q_mean);
  EXPECT_EQ(one.lambda_std, three.lambda_std);
}

TEST(MonteCarlo, SingleTrialHasZeroSpread) {
  const auto agg = run_monte_carlo(small(100, 2.0, 1));
  for (double s : agg.q_std) EXPECT_EQ(s, 0.0);
  for (std::size_t i = 0; i < agg.t.size(); ++i) EXPECT_EQ(agg.q_mean[i], std::abs(agg.traces[0].q[i]));
}

TEST(MonteCarlo, TheoryOnlyForOdeBackedAlgorithms) {
  auto c = small(100, 2.0, 1);
  const auto ino = run_monte_carlo(c);
  ASSERT_TRUE(ino.q_theory.has_value());
  EXPECT_NEAR(ino.q_theory->front(), 0.1, 1e-12);
  EXPECT_NEAR(ino.lambda_theory->front(), 1.0, 1e-12);
  c.algo = AlgorithmSpec::parse("ccipca:4");
  EXPECT_FALSE(run_monte_carlo(c).q_theory.has_value());
  c.algo = AlgorithmSpec::ino(0.5);
  c.init = InitSpec::cold();
  EXPECT_FALSE(run_monte_carlo(c).q_theory.has_value());
}

TEST(MonteCarlo, IndexAtAndSteadyEstimate) {
  const auto agg = run_monte_carlo(small(100, 10.0, 1));
  EXPECT_EQ(agg.index_at(0.0), 0u);
  EXPECT_EQ(agg.index_at(2.5), 25u);
  EXPECT_EQ(agg.index_at(99.0), agg.t.size() - 1);
  double s = 0.0;
  for (std::size_t i = 90; i <= 100; ++i) s += std::abs(agg.traces[0].q[i]);
  EXPECT_NEAR(steady_estimate(agg.traces[0]), s / 11.0, 1e-14);
}

TEST(ParallelMap, OrderedResultsAndLowestError) {
  const auto v = parallel_map<int>(10, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (int i = 0; i < 10; ++i) EXPECT_EQ(v[static_cast<std::size_t>(i)], i * i);
  try {
    parallel_map<int>(8, 3, [](std::size_t i) -> int {
      if (i == 3 || i == 6) throw NumericalError("job " + std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "job 3");
  }
}

TEST(Sweeps, NonstationaryRequiresSwitch) {
  EXPECT_THROW(run_nonstationary(small(), {AlgorithmSpec::ino(0.5)}), ConfigError);
  auto c = small(100, 10.0, 1);
  c.switch_at = SwitchSpec{5.0, SignalDist::uniform()};
  EXPECT_THROW(run_nonstationary(c, {AlgorithmSpec::ino(0.5)}, 20.0), ConfigError);
  const auto runs = run_nonstationary(c, {AlgorithmSpec::ino(0.5)}, 5.0);
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_GT(runs[0].pre_switch_q, 0.5);
}

TEST(Sweeps, Lambda0RowCarriesTheory) {
  const auto rows = run_lambda0_sweep({0.5, 2.0}, small(100, 4.0, 1), 3.0);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].theory.lambda.front(), 0.5, 1e-12);
  EXPECT_NEAR(rows[0].q_theory_at_eval, rows[0].theory.at(3.0)[0], 1e-12);
  EXPECT_THROW(run_lambda0_sweep({1.0}, small(), 9.0), ConfigError);
  EXPECT_THROW(run_lambda0_sweep({-1.0}, small(), 1.0), ConfigError);
}

TEST(Sweeps, GridSearchPicksMaximum) {
  const auto r = grid_search_rate(small(100, 3.0, 2), {0.01, 0.5}, 3.0);
  ASSERT_EQ(r.scores.size(), 2u);
  EXPECT_EQ(r.chosen, 0.5);
  EXPECT_THROW(grid_search_rate(small(), {}, 1.0), ConfigError);
}

TEST(Moments, IncrementsMatchDriftAndDiffusion) {
  const auto r = moment_oracle_check(200, 1.0, 0.5, SignalDist::uniform(), InitSpec::warm(0.5, 1.5), 4000, 7);
  EXPECT_NEAR(r.q, 0.5, 0.1);
  EXPECT_GT(r.drift_within_3se, 0.97);
  EXPECT_LT(r.diffusion_rel_error(), 0.1);
  EXPECT_THROW(moment_oracle_check(10, 1.0, 0.5, SignalDist::uniform(), InitSpec::warm(), 1, 1), ConfigError);
}

TEST(MultiPc, RankOneDistanceIsArccos) {
  MultiPcConfig c;
  c.p = 100;
  c.r = 1;
  c.omegas = {2.0};
  c.t_max = 5.0;
  c.algo = AlgorithmSpec::ino(0.5);
  Rng rng(4);
  SpikedSource src(c.omegas, c.xi, c.p, rng);
  Rng stream = rng;
  const auto trace = run_multipc_trial(c, src, rng);
  // replay the same stream through a single-component stepper
  Rng rng2 = stream;
  MultiPcState m(1, c.p, c.algo);
  std::vector<double> y(c.p);
  for (int k = 0; k < 500; ++k) {
    src.next(rng2, y);
    multi_pc_step(m, y);
  }
  const double q = cosine_similarity(m.components[0].x, src.spikes()[0]);
  EXPECT_NEAR(trace.distance.back(), std::acos(std::abs(q)), 1e-9);
}

TEST(MultiPc, SyntheticSubspaceIsLearned) {
  MultiPcConfig c;
  c.p = 100;
  c.t_max = 100.0;
  c.threads = 1;
  const auto r = run_multipc(c);
  EXPECT_GT(r.distance_mean.front(), 1.0);
  EXPECT_LT(r.distance_mean.back(), 0.6);
  c.algo = AlgorithmSpec::parse("ada-ino");
  EXPECT_THROW(run_multipc(c), ConfigError);
  c.algo = AlgorithmSpec::ino(0.05);
  c.omegas = {1.0};
  EXPECT_THROW(run_multipc(c), ConfigError);
}

TEST(MultiPc, MatrixTruthMatchesPowerIteration) {
  Rng rng(8);
  Eigen::MatrixXd data(300, 6);
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (Eigen::Index j = 0; j < data.cols(); ++j) data(i, j) = rng.normal() * static_cast<double>(j + 1) + (j == 2 ? 4.0 : 0.0);
  MatrixSource src(data);
  const Basis truth = src.truth(2);
  Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 300.0;
  std::vector<std::vector<double>> a(6, std::vector<double>(6));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a[i][j] = cov(i, j);
  const auto ref = oracle::top_eigenvectors(a, 2);
  EXPECT_NEAR(grassmann_distance(truth, basis_from_columns(ref)), 0.0, 1e-6);
  std::vector<double> y(6);
  src.next(rng, y);
  for (int j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(y[j], centered(0, j));
}

TEST(Ingest, ParsesNumericCsv) {
  std::istringstream in("1,2,3\n\n4, 5 ,6\n");
  const auto m = parse_matrix(in);
  EXPECT_EQ(m.dim(), 3u);
  EXPECT_EQ(m.rows(), 2u);
}

TEST(Ingest, ReportsRowAndColumn) {
  std::istringstream bad("1,2\n3,x\n");
  try {
    parse_matrix(bad, "data.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
    EXPECT_NE(std::string(e.what()).find("data.csv:2:2"), std::string::npos);
  }
  std::istringstream ragged("1,2\n3\n");
  try {
    parse_matrix(ragged);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
  std::istringstream empty("\n\n");
  EXPECT_THROW(parse_matrix(empty), ParseError);
  EXPECT_THROW(ingest_matrix("/nonexistent/file.csv"), ConfigError);
}

TEST(Toml, FlattensAndNormalizesKeys) {
  const auto path = temp_file("ok.toml", "omega = 0.5\ntrials = 4\nsample_every = 0.25\nfast = true\n"
                                         "omegas = [2.0, 1]\nalgo = \"ino:0.5\"\n[pde]\nn = 512\n");
  const auto s = load_toml_settings(path);
  EXPECT_EQ(s.at("omega"), "0.5");
  EXPECT_EQ(s.at("trials"), "4");
  EXPECT_EQ(s.at("sample-every"), "0.25");
  EXPECT_EQ(s.at("fast"), "true");
  EXPECT_EQ(s.at("omegas"), "2,1");
  EXPECT_EQ(s.at("algo"), "ino:0.5");
  EXPECT_EQ(s.at("pde.n"), "512");
  std::filesystem::remove(path);
}

TEST(Toml, ParseErrorHasLocation) {
  const auto path = temp_file("bad.toml", "omega = 1\ntrials = = 3\n");
  try {
    load_toml_settings(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_GT(e.column(), 0u);
  }
  std::filesystem::remove(path);
}

TEST(Manifest, RoundTripAndArgv) {
  RunManifest m;
  m.command = {"theory", "ode"};
  m.settings = {{"omega", "1"}, {"out", "dir"}, {"paper-scale", "true"}, {"quiet", "false"}, {"p", ""}};
  m.seed = 5;
  m.outputs = {"ode.csv"};
  const auto back = RunManifest::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.command, m.command);
  EXPECT_EQ(back.settings, m.settings);
  EXPECT_EQ(back.seed, 5u);
  EXPECT_EQ(back.argv(), (std::vector<std::string>{"theory", "ode", "--omega", "1", "--paper-scale"}));
  EXPECT_THROW(RunManifest::from_json(nlohmann::json::parse("{\"config\": {}}")), ConfigError);
}

TEST(Csv, AggregateColumns) {
  const auto agg = run_monte_carlo(small(100, 0.2, 2));
  std::ostringstream out;
  write_aggregate_csv(out, agg);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,", 0), 0u);
  EXPECT_NE(header.find("Q_theory"), std::string::npos);
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  EXPECT_EQ(lines, 3);
}
