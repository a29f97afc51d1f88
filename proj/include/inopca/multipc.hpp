#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "inopca/algorithms.hpp"
#include "inopca/errors.hpp"
#include "inopca/harness.hpp"
#include "inopca/metrics.hpp"
#include "inopca/parse.hpp"
#include "inopca/random.hpp"
#include "inopca/spiked_model.hpp"

namespace inopca {

/// A stream of observations of fixed dimension.
class SampleSource {
public:
  virtual ~SampleSource() = default;
  virtual std::size_t dim() const = 0;
  virtual void next(Rng& rng, std::span<double> y) = 0;
  /// Orthonormal p×r basis the estimate is compared against.
  virtual Basis truth(std::size_t r) const = 0;
  virtual std::unique_ptr<SampleSource> clone() const = 0;
};

/// y = Σⱼ √(ωⱼ/p)·cⱼ·ξⱼ + a with the ξⱼ mutually orthogonalized and rescaled to √p.
class SpikedSource final : public SampleSource {
public:
  SpikedSource(std::vector<double> omegas, const SignalDist& dist, std::size_t p, Rng& rng) : omegas_(std::move(omegas)) {
    if (omegas_.empty()) throw ConfigError("need at least one spike");
    for (double w : omegas_)
      if (!(w >= 0.0)) throw ConfigError("spike strengths must be >= 0");
    if (omegas_.size() > p) throw ConfigError("more spikes than dimensions");
    const double sqrt_p = std::sqrt(static_cast<double>(p));
    for (std::size_t j = 0; j < omegas_.size(); ++j) {
      std::vector<double> v = make_signal(dist, p, rng).entries;
      for (const auto& u : spikes_) vec::axpy(v, -vec::dot(v, u) / vec::squared_norm(u), u);
      if (!(vec::norm(v) > 1e-8 * sqrt_p)) throw NumericalError("spike directions are linearly dependent");
      rescale_to_norm(v, sqrt_p);
      spikes_.push_back(std::move(v));
    }
  }

  std::size_t dim() const override { return spikes_.front().size(); }

  void next(Rng& rng, std::span<double> y) override {
    const double p = static_cast<double>(dim());
    for (double& v : y) v = rng.normal();
    for (std::size_t j = 0; j < spikes_.size(); ++j) vec::axpy(y, std::sqrt(omegas_[j] / p) * rng.normal(), spikes_[j]);
  }

  /// Population spike span, strongest spike first.
  Basis truth(std::size_t r) const override {
    if (r > spikes_.size()) throw ConfigError("requested rank exceeds the number of spikes");
    std::vector<std::size_t> order(spikes_.size());
    for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return omegas_[a] > omegas_[b]; });
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < r; ++j) cols.push_back(spikes_[order[j]]);
    return orthonormalize(basis_from_columns(cols));
  }

  std::unique_ptr<SampleSource> clone() const override { return std::make_unique<SpikedSource>(*this); }

  const std::vector<std::vector<double>>& spikes() const noexcept { return spikes_; }

private:
  std::vector<double> omegas_;
  std::vector<std::vector<double>> spikes_;
};

/// Mean-centered data matrix streamed row by row, cycling when exhausted.
class MatrixSource final : public SampleSource {
public:
  static constexpr std::size_t kMaxOracleDim = 2048;

  explicit MatrixSource(Eigen::MatrixXd rows) : data_(std::move(rows)) {
    if (data_.rows() < 1 || data_.cols() < 1) throw ParseError("data matrix is empty");
    data_.rowwise() -= data_.colwise().mean();
  }

  std::size_t dim() const override { return static_cast<std::size_t>(data_.cols()); }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(data_.rows()); }

  void next(Rng&, std::span<double> y) override {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = data_(static_cast<Eigen::Index>(cursor_), static_cast<Eigen::Index>(i));
    cursor_ = (cursor_ + 1) % rows();
  }

  /// Top-r eigenvectors of the sample covariance.
  Basis truth(std::size_t r) const override {
    if (dim() > kMaxOracleDim) throw ConfigError("offline eigendecomposition is capped at p = 2048");
    if (r > dim()) throw ConfigError("requested rank exceeds the dimension");
    const Eigen::MatrixXd cov = data_.transpose() * data_ / static_cast<double>(rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    // eigenvalues come out ascending
    return eig.eigenvectors().rightCols(static_cast<Eigen::Index>(r)).rowwise().reverse();
  }

  std::unique_ptr<SampleSource> clone() const override { return std::make_unique<MatrixSource>(*this); }

private:
  Eigen::MatrixXd data_;
  std::size_t cursor_ = 0;
};

/// Parses a numeric CSV (one sample per row, no header) into a centered stream.
inline MatrixSource parse_matrix(std::istream& in, const std::string& name = "<input>") {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<double> vals;
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell = std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      ++col;
      const auto v = try_parse_number(trim(cell));
      if (!v)
        throw ParseError(name + ":" + std::to_string(row) + ":" + std::to_string(col) + ": non-numeric cell '" +
                             std::string(trim(cell)) + "'",
                         row, col);
      vals.push_back(*v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && vals.size() != rows.front().size())
      throw ParseError(name + ":" + std::to_string(row) + ": expected " + std::to_string(rows.front().size()) + " columns, got " +
                           std::to_string(vals.size()),
                       row, vals.size());
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError(name + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return MatrixSource(std::move(m));
}

inline MatrixSource ingest_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return parse_matrix(in, path);
}

struct MultiPcConfig {
  std::size_t p = 512;
  std::size_t r = 2;
  std::vector<double> omegas{2.0, 1.0};
  SignalDist xi = SignalDist::uniform();
  AlgorithmSpec algo = AlgorithmSpec::ino(0.05);
  double t_max = 200.0;
  double sample_every = 1.0;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string data_path; ///< empty = synthetic spiked stream
};

struct MultiPcTrace {
  std::vector<double> t;
  std::vector<double> distance;
};

struct MultiPcResult {
  std::vector<double> t;
  std::vector<double> distance_mean;
  std::vector<double> distance_std;
  std::vector<MultiPcTrace> traces;
  std::size_t p = 0;
};

/// One multi-PC trial over `source`; records d(t) every ⌊p·sample_every⌋ samples once all r
/// components exist.
inline MultiPcTrace run_multipc_trial(const MultiPcConfig& config, SampleSource& source, Rng& rng) {
  const std::size_t p = source.dim();
  const Basis truth = source.truth(config.r);
  MultiPcState m(config.r, p, config.algo);
  const auto n = static_cast<std::int64_t>(std::floor(static_cast<double>(p) * config.t_max));
  const auto stride = static_cast<std::int64_t>(std::floor(static_cast<double>(p) * config.sample_every));
  if (stride < 1) throw ConfigError("sample_every is below one step at this p");
  std::vector<double> y(p);
  MultiPcTrace trace;
  for (std::int64_t k = 1; k <= n; ++k) {
    source.next(rng, y);
    multi_pc_step(m, y);
    if (k % stride == 0 && k >= static_cast<std::int64_t>(config.r)) {
      std::vector<std::vector<double>> cols;
      for (const auto& c : m.components) cols.push_back(c.x);
      trace.t.push_back(static_cast<double>(k) / static_cast<double>(p));
      trace.distance.push_back(grassmann_distance(basis_from_columns(cols), truth));
    }
  }
  return trace;
}

inline MultiPcResult run_multipc(const MultiPcConfig& config) {
  if (config.r < 1) throw ConfigError("rank r must be >= 1");
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (!(config.t_max > 0.0)) throw ConfigError("t_max must be positive");
  if (config.algo.kind == AlgorithmKind::AdaptiveIno) throw ConfigError("the oracle-adaptive stepper is single-component only");
  std::unique_ptr<SampleSource> data;
  if (!config.data_path.empty()) data = std::make_unique<MatrixSource>(ingest_matrix(config.data_path));
  auto traces = parallel_map<MultiPcTrace>(config.trials, config.threads, [&](std::size_t i) {
    Rng rng = Rng::for_trial(config.seed, i);
    if (data) {
      auto src = data->clone();
      return run_multipc_trial(config, *src, rng);
    }
    if (config.omegas.size() < config.r) throw ConfigError("need at least r spike strengths");
    SpikedSource src(config.omegas, config.xi, config.p, rng);
    return run_multipc_trial(config, src, rng);
  });
  MultiPcResult out;
  out.p = data ? data->dim() : config.p;
  out.t = traces.front().t;
  std::vector<double> d(traces.size());
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    for (std::size_t j = 0; j < traces.size(); ++j) d[j] = traces[j].distance[i];
    double m = 0.0;
    double s = 0.0;
    mean_std(d, m, s);
    out.distance_mean.push_back(m);
    out.distance_std.push_back(s);
  }
  out.traces = std::move(traces);
  return out;
}

} // namespace inopca
