#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "inopca/algorithms.hpp"
#include "inopca/errors.hpp"
#include "inopca/metrics.hpp"
#include "inopca/parse.hpp"
#include "inopca/random.hpp"
#include "inopca/spiked_model.hpp"
#include "inopca/theory_ode.hpp"
#include "inopca/vector_ops.hpp"

namespace inopca {

struct SwitchSpec {
  double t_switch = 50.0;
  SignalDist xi2 = SignalDist::uniform();
};

struct ExperimentConfig {
  std::size_t p = 2000;
  double omega = 1.0;
  AlgorithmSpec algo = AlgorithmSpec::ino(0.5);
  SignalDist xi = SignalDist::uniform();
  InitSpec init = InitSpec::warm(0.1, 1.0);
  double t_max = 30.0;
  std::size_t trials = 10;
  std::uint64_t seed = 1;
  double sample_every = 0.1;
  std::optional<SwitchSpec> switch_at;
  std::vector<double> snapshot_times; ///< times at which full coordinate vectors are kept
  std::size_t threads = 0;            ///< 0 = hardware concurrency

  /// Large-scale settings: p = 10⁴, τ = 0.5, ω = 1, 20 trials.
  static ExperimentConfig large_scale() {
    ExperimentConfig c;
    c.p = 10000;
    c.trials = 20;
    return c;
  }

  ExperimentConfig validated() const {
    if (p < 2) throw ConfigError("dimension p must be >= 2");
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw ConfigError("omega must be finite and >= 0");
    if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be positive");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!(sample_every > 0.0)) throw ConfigError("sample_every must be positive");
    if (stride() < 1) throw ConfigError("sample_every is below one step at this p");
    AlgorithmSpec::validated(algo);
    InitSpec::validated(init);
    if (switch_at && !(switch_at->t_switch > 0.0 && switch_at->t_switch < t_max))
      throw ConfigError("switch time must lie in (0, t_max)");
    for (double t : snapshot_times)
      if (t < 0.0 || t > t_max) throw ConfigError("snapshot time " + format_number(t) + " outside [0, t_max]");
    return *this;
  }

  std::int64_t total_steps() const noexcept { return static_cast<std::int64_t>(std::floor(static_cast<double>(p) * t_max)); }
  std::int64_t stride() const noexcept {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(p) * sample_every));
  }
  double lambda_cap() const noexcept { return 10.0 * std::max({1.0, omega + 1.0, init.lambda0}); }
};

inline std::int64_t step_of(double t, std::size_t p) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(p) * t + 1e-9));
}

struct CoordinateSnapshot {
  double t = 0.0;
  double lambda = 0.0;
  std::vector<double> x;
};

struct TrialTrace {
  std::vector<double> t;
  std::vector<double> q; ///< signed cosine against the active ξ
  std::vector<double> lambda;
  std::vector<CoordinateSnapshot> snapshots;
  std::uint64_t master_seed = 0;
  std::size_t trial = 0;
};

/// One trial. Both signals (when switching) are drawn up front from the trial stream,
/// then x₀, then the observation stream.
inline TrialTrace run_trial(const ExperimentConfig& config, std::size_t trial_index) {
  config.validated();
  const std::size_t p = config.p;
  Rng rng = Rng::for_trial(config.seed, trial_index);
  SignalVector xi = make_signal(config.xi, p, rng);
  std::optional<SignalVector> xi2;
  if (config.switch_at) xi2 = make_signal(config.switch_at->xi2, p, rng);
  EstimateState state = init_estimate(config.init, xi, rng);
  Stepper stepper(config.algo);

  const std::int64_t n = config.total_steps();
  const std::int64_t stride = config.stride();
  const std::int64_t k_switch = config.switch_at ? step_of(config.switch_at->t_switch, p) : n + 1;
  std::vector<std::int64_t> snap_steps;
  for (double t : config.snapshot_times) snap_steps.push_back(step_of(t, p));

  TrialTrace trace;
  trace.master_seed = config.seed;
  trace.trial = trial_index;
  const auto points = static_cast<std::size_t>(n / stride) + 1;
  trace.t.reserve(points);
  trace.q.reserve(points);
  trace.lambda.reserve(points);

  const double cap = config.lambda_cap();
  const bool banded = config.algo.has_norm_dynamics();
  const SignalVector* active = &xi;
  std::vector<double> y(p);

  auto record = [&](std::int64_t k) {
    const double lam = norm_parameter(state.x);
    if (!std::isfinite(lam) || !(lam > 0.0) || (banded && lam > cap))
      throw NumericalError("lambda=" + format_number(lam) + " left the band (0, " + format_number(cap) + "] at step " +
                           std::to_string(k));
    trace.t.push_back(static_cast<double>(k) / static_cast<double>(p));
    trace.q.push_back(cosine_similarity(state.x, active->view()));
    trace.lambda.push_back(lam);
  };
  auto snapshot = [&](std::int64_t k) {
    for (std::size_t j = 0; j < snap_steps.size(); ++j)
      if (snap_steps[j] == k)
        trace.snapshots.push_back({config.snapshot_times[j], norm_parameter(state.x), state.x});
  };

  record(0);
  snapshot(0);
  for (std::int64_t k = 1; k <= n; ++k) {
    sample_observation_into(active->view(), config.omega, rng, y);
    stepper.step(state, y, k, Oracle{config.omega, active->view()});
    if (k % stride == 0) record(k);
    snapshot(k);
    if (k == k_switch) active = &*xi2;
  }
  return trace;
}

/// Runs `count` jobs on up to `threads` workers; results land at their index.
template <typename Result>
std::vector<Result> parallel_map(std::size_t count, std::size_t threads, const std::function<Result(std::size_t)>& job) {
  std::vector<std::optional<Result>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // lowest failing index wins so the reported error does not depend on scheduling
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct Aggregate {
  std::vector<double> t;
  std::vector<double> q_mean; ///< of |Q|
  std::vector<double> q_std;
  std::vector<double> lambda_mean;
  std::vector<double> lambda_std;
  std::optional<std::vector<double>> q_theory;
  std::optional<std::vector<double>> lambda_theory;
  std::size_t trials = 0;
  std::vector<TrialTrace> traces;

  /// Index of the trace point at time `time` (nearest).
  std::size_t index_at(double time) const {
    const auto it = std::lower_bound(t.begin(), t.end(), time - 1e-9);
    if (it == t.end()) return t.size() - 1;
    return static_cast<std::size_t>(it - t.begin());
  }
};

/// ODE model tracking `spec`, if it has one.
inline std::optional<OdeModel> ode_model_for(const AlgorithmSpec& spec) {
  switch (spec.kind) {
  case AlgorithmKind::InoPca: return OdeModel::InoPca;
  case AlgorithmKind::AdaptiveIno: return OdeModel::InoPcaAdaptive;
  case AlgorithmKind::Regularized: return OdeModel::Regularized;
  case AlgorithmKind::Oja: return OdeModel::Oja;
  default: return std::nullopt;
  }
}

/// Theory trajectory for a warm-started, non-switching configuration.
inline std::optional<TheoryTrajectory> theory_for(const ExperimentConfig& config, double dt = 1e-3) {
  const auto model = ode_model_for(config.algo);
  if (!model || config.switch_at || config.init.mode != InitSpec::Mode::Warm) return std::nullopt;
  const double lambda0 = *model == OdeModel::Oja ? 1.0 : config.init.lambda0;
  return integrate({config.omega, config.algo.param, config.init.c, lambda0, *model}, config.t_max, dt, 1);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double a : v) mean += a;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

inline Aggregate aggregate_traces(std::vector<TrialTrace> traces) {
  Aggregate agg;
  agg.trials = traces.size();
  agg.t = traces.front().t;
  const std::size_t n = agg.t.size();
  std::vector<double> qs(traces.size());
  std::vector<double> ls(traces.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < traces.size(); ++j) {
      qs[j] = std::abs(traces[j].q[i]);
      ls[j] = traces[j].lambda[i];
    }
    double m = 0.0;
    double s = 0.0;
    mean_std(qs, m, s);
    agg.q_mean.push_back(m);
    agg.q_std.push_back(s);
    mean_std(ls, m, s);
    agg.lambda_mean.push_back(m);
    agg.lambda_std.push_back(s);
  }
  agg.traces = std::move(traces);
  return agg;
}

/// All trials, reduced in trial order. A failing trial aborts the run and names its seed.
inline Aggregate run_monte_carlo(const ExperimentConfig& config, bool with_theory = true) {
  config.validated();
  auto traces = parallel_map<TrialTrace>(config.trials, config.threads, [&](std::size_t i) {
    try {
      return run_trial(config, i);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (trial " + std::to_string(i) + ", master seed " +
                           std::to_string(config.seed) + ")");
    }
  });
  Aggregate agg = aggregate_traces(std::move(traces));
  if (with_theory) {
    if (auto th = theory_for(config)) {
      agg.q_theory.emplace();
      agg.lambda_theory.emplace();
      for (double t : agg.t) {
        const auto v = th->at(t);
        agg.q_theory->push_back(std::abs(v[0]));
        agg.lambda_theory->push_back(v[1]);
      }
    }
  }
  return agg;
}

/// Mean |Q| over the final 10% of a trace.
inline double steady_estimate(const TrialTrace& trace) {
  const double t_end = trace.t.back();
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < trace.t.size(); ++i)
    if (trace.t[i] >= 0.9 * t_end - 1e-12) {
      s += std::abs(trace.q[i]);
      ++n;
    }
  return s / static_cast<double>(n);
}

struct PhaseRow {
  double omega = 0.0;
  double q_theory = 0.0;
  double lambda_theory = 0.0;
  Branch branch = Branch::Unstable;
  double q_empirical = 0.0;
  double q_empirical_std = 0.0;
};

inline std::vector<PhaseRow> run_phase_sweep(const std::vector<double>& omegas, const ExperimentConfig& base) {
  std::vector<PhaseRow> rows;
  for (double w : omegas) {
    if (!(w >= 0.0)) throw ConfigError("omega values must be >= 0");
    ExperimentConfig c = base;
    c.omega = w;
    const Aggregate agg = run_monte_carlo(c, false);
    std::vector<double> est;
    for (const auto& tr : agg.traces) est.push_back(steady_estimate(tr));
    PhaseRow row;
    row.omega = w;
    const SteadyState s = steady_state(w, c.algo.param);
    row.q_theory = s.q();
    row.lambda_theory = s.lambda;
    row.branch = s.branch;
    mean_std(est, row.q_empirical, row.q_empirical_std);
    rows.push_back(row);
  }
  return rows;
}

struct Lambda0Row {
  double lambda0 = 0.0;
  double q_at_eval = 0.0;
  double q_at_eval_std = 0.0;
  double q_steady = 0.0;
  double q_theory_at_eval = 0.0;
  TheoryTrajectory theory;
};

/// Warm-started INO-PCA at each λ₀; `t_eval` is where Q is compared.
inline std::vector<Lambda0Row> run_lambda0_sweep(const std::vector<double>& lambda0s, const ExperimentConfig& base,
                                                 double t_eval) {
  if (t_eval < 0.0 || t_eval > base.t_max) throw ConfigError("t_eval must lie in [0, t_max]");
  std::vector<Lambda0Row> rows;
  for (double l0 : lambda0s) {
    if (!(l0 > 0.0)) throw ConfigError("lambda0 values must be positive");
    ExperimentConfig c = base;
    c.init.lambda0 = l0;
    const Aggregate agg = run_monte_carlo(c, false);
    Lambda0Row row;
    row.lambda0 = l0;
    const std::size_t i = agg.index_at(t_eval);
    row.q_at_eval = agg.q_mean[i];
    row.q_at_eval_std = agg.q_std[i];
    double sd = 0.0;
    std::vector<double> est;
    for (const auto& tr : agg.traces) est.push_back(steady_estimate(tr));
    mean_std(est, row.q_steady, sd);
    const double q0 = c.init.mode == InitSpec::Mode::Warm ? c.init.c : 1.0 / std::sqrt(static_cast<double>(c.p));
    row.theory = integrate({c.omega, c.algo.param, q0, l0, OdeModel::InoPca}, c.t_max, 1e-3, 10);
    row.q_theory_at_eval = row.theory.at(t_eval)[0];
    rows.push_back(std::move(row));
  }
  return rows;
}

struct NonstationaryRun {
  AlgorithmSpec algo;
  Aggregate aggregate;
  double pre_switch_q = 0.0; ///< mean |Q| at the switch, against the old ξ
  double checkpoint_q = 0.0; ///< mean |Q| at t_switch + recovery window
  double recovery_ratio() const { return checkpoint_q / pre_switch_q; }
};

inline std::vector<NonstationaryRun> run_nonstationary(const ExperimentConfig& base, const std::vector<AlgorithmSpec>& algos,
                                                       double recovery_window = 20.0) {
  if (!base.switch_at) throw ConfigError("non-stationary run needs a switch");
  const double t_check = base.switch_at->t_switch + recovery_window;
  if (t_check > base.t_max + 1e-9) throw ConfigError("recovery checkpoint lies beyond t_max");
  std::vector<NonstationaryRun> out;
  for (const auto& a : algos) {
    ExperimentConfig c = base;
    c.algo = a;
    NonstationaryRun run{a, run_monte_carlo(c, false)};
    run.pre_switch_q = run.aggregate.q_mean[run.aggregate.index_at(base.switch_at->t_switch)];
    run.checkpoint_q = run.aggregate.q_mean[run.aggregate.index_at(t_check)];
    out.push_back(std::move(run));
  }
  return out;
}

struct GridSearchResult {
  double chosen = 0.0;
  std::vector<std::pair<double, double>> scores; ///< (parameter, mean |Q| at t_eval)
};

/// Picks the parameter of `base.algo` with the largest mean |Q| at `t_eval`.
inline GridSearchResult grid_search_rate(const ExperimentConfig& base, const std::vector<double>& candidates, double t_eval) {
  if (candidates.empty()) throw ConfigError("grid search needs candidates");
  GridSearchResult r;
  double best = -1.0;
  for (double v : candidates) {
    ExperimentConfig c = base;
    c.algo.param = v;
    const Aggregate agg = run_monte_carlo(c, false);
    const double score = agg.q_mean[agg.index_at(t_eval)];
    r.scores.emplace_back(v, score);
    if (score > best) {
      best = score;
      r.chosen = v;
    }
  }
  return r;
}

struct MomentReport {
  std::size_t p = 0;
  std::size_t resamples = 0;
  double q = 0.0;
  double lambda = 0.0;
  double drift_within_3se = 0.0; ///< fraction of coordinates
  double max_drift_z = 0.0;
  double diffusion_empirical = 0.0; ///< coordinate average of E[Δ²]
  double diffusion_theory = 0.0;
  double diffusion_rel_error() const { return std::abs(diffusion_empirical - diffusion_theory) / diffusion_theory; }
};

/// Freezes (x, ξ) and resamples INO-PCA increments Δ = x' − x at that state.
inline MomentReport moment_oracle_check(std::size_t p, double omega, double tau, const SignalDist& dist, const InitSpec& init,
                                        std::size_t n_resamples, std::uint64_t seed) {
  if (n_resamples < 2) throw ConfigError("need at least two resamples");
  Rng rng(seed);
  const SignalVector xi = make_signal(dist, p, rng);
  const EstimateState frozen = init_estimate(init, xi, rng);
  const double lambda = frozen.lambda;
  const double q = cosine_similarity(frozen.x, xi.view());
  std::vector<double> sum(p, 0.0);
  std::vector<double> sum_sq(p, 0.0);
  std::vector<double> y(p);
  for (std::size_t s = 0; s < n_resamples; ++s) {
    sample_observation_into(xi.view(), omega, rng, y);
    const double proj = vec::dot(y, frozen.x) / lambda;
    for (std::size_t i = 0; i < p; ++i) {
      const double d = tau / static_cast<double>(p) * (y[i] * proj - frozen.x[i]);
      sum[i] += d;
      sum_sq[i] += d * d;
    }
  }
  MomentReport r;
  r.p = p;
  r.resamples = n_resamples;
  r.q = q;
  r.lambda = lambda;
  const double n = static_cast<double>(n_resamples);
  std::size_t within = 0;
  double second = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double mean = sum[i] / n;
    const double var = (sum_sq[i] - n * mean * mean) / (n - 1.0);
    const double expected = tau / static_cast<double>(p) *
                            (omega * q * xi.entries[i] + frozen.x[i] / lambda - frozen.x[i]);
    const double z = std::abs(mean - expected) / std::sqrt(var / n);
    r.max_drift_z = std::max(r.max_drift_z, z);
    if (z <= 3.0) ++within;
    second += sum_sq[i] / n;
  }
  r.drift_within_3se = static_cast<double>(within) / static_cast<double>(p);
  r.diffusion_empirical = second / static_cast<double>(p);
  r.diffusion_theory = tau * tau / static_cast<double>(p) * (omega * q * q + 1.0);
  return r;
}

} // namespace inopca
