#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "inopca/harness.hpp"
#include "inopca/metrics.hpp"
#include "inopca/theory_ode.hpp"
#include "inopca/theory_pde.hpp"

namespace inopca {

/// One snapshot of the density comparison. Raw compares coordinates xⁱ with P_t(x);
/// rescaled compares xⁱ/λ with λ_t·P_t(λ_t·u).
struct DensitySnapshot {
  double t = 0.0;
  double pde_lambda = 0.0;
  std::vector<double> raw_grid;
  std::vector<double> raw_hist;
  std::vector<double> raw_pde;
  std::vector<double> rescaled_grid;
  std::vector<double> rescaled_hist;
  std::vector<double> rescaled_pde;
  double l1_raw = 0.0;
  double l1_rescaled = 0.0;
  std::size_t clamped = 0;
};

struct DensityComparison {
  std::vector<DensitySnapshot> snapshots;
  PdeResult pde;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

/// Simulates `config` with coordinate snapshots and evolves the PDE from the matching
/// initial density, then bins the pooled coordinates on `bins`-node grids spanning
/// ±`span`·(standard deviation).
inline DensityComparison compare_densities(ExperimentConfig config, const PdeConfig& pde_config, std::size_t atoms,
                                           const std::vector<double>& times, std::size_t bins = 61, double span = 4.5) {
  if (times.empty()) throw ConfigError("need at least one snapshot time");
  if (bins < 3) throw ConfigError("need at least three histogram nodes");
  config.snapshot_times = times;
  const Aggregate agg = run_monte_carlo(config, false);

  PdeConfig pc = pde_config;
  pc.omega = config.omega;
  pc.tau = config.algo.param;
  const DensityField init = initial_density(config.init, discretize_signal(config.xi, atoms), pc);
  DensityComparison out;
  double t_end = 0.0;
  for (double t : times) t_end = std::max(t_end, t);
  out.pde = evolve_density(init, pc, times, std::max(t_end, 1e-9), std::max(t_end, 1e-9) / 100.0);

  for (std::size_t s = 0; s < times.size(); ++s) {
    const double t = times[s];
    const DensityField* field = nullptr;
    for (const auto& f : out.pde.snapshots)
      if (std::abs(f.t - t) < 1e-12) field = &f;
    const OrderParameters op = order_parameters(*field);
    const auto marginal = marginal_density(*field);

    std::vector<double> raw;
    std::vector<double> scaled;
    for (const auto& tr : agg.traces)
      for (const auto& snap : tr.snapshots)
        if (std::abs(snap.t - t) < 1e-12)
          for (double v : snap.x) {
            raw.push_back(v);
            scaled.push_back(v / snap.lambda);
          }

    DensitySnapshot d;
    d.t = t;
    d.pde_lambda = op.lambda;
    d.raw_grid = linspace(-span * op.lambda, span * op.lambda, bins);
    d.rescaled_grid = linspace(-span, span, bins);
    for (double x : d.raw_grid) d.raw_pde.push_back(interpolate(marginal, field->grid, x));
    for (double u : d.rescaled_grid) d.rescaled_pde.push_back(op.lambda * interpolate(marginal, field->grid, op.lambda * u));
    const Histogram hr = empirical_histogram(raw, d.raw_grid);
    const Histogram hs = empirical_histogram(scaled, d.rescaled_grid);
    d.raw_hist = hr.density;
    d.rescaled_hist = hs.density;
    d.clamped = hr.clamped + hs.clamped;
    d.l1_raw = l1_density_distance(d.raw_hist, d.raw_pde, d.raw_grid);
    d.l1_rescaled = l1_density_distance(d.rescaled_hist, d.rescaled_pde, d.rescaled_grid);
    out.snapshots.push_back(std::move(d));
  }
  return out;
}

/// First trace time where the mean |Q| reaches `level`, if it ever does.
inline std::optional<double> first_crossing(const std::vector<double>& t, const std::vector<double>& q, double level) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (q[i] >= level) return t[i];
  return std::nullopt;
}

struct AdaptiveComparison {
  std::vector<double> taus;
  TheoryTrajectory adaptive_ode;
  std::vector<TheoryTrajectory> fixed_ode;
  std::optional<Aggregate> adaptive_sim;
  std::vector<Aggregate> fixed_sim;
};

/// Adaptive INO-PCA against fixed rates, at ODE level and (when `simulate`) by Monte Carlo.
inline AdaptiveComparison compare_adaptive(const ExperimentConfig& base, const std::vector<double>& taus, bool simulate) {
  if (base.init.mode != InitSpec::Mode::Warm) throw ConfigError("adaptive comparison needs a warm start");
  AdaptiveComparison r;
  r.taus = taus;
  const double q0 = base.init.c;
  const double l0 = base.init.lambda0;
  r.adaptive_ode = integrate({base.omega, 0.0, q0, l0, OdeModel::InoPcaAdaptive}, base.t_max);
  for (double tau : taus) r.fixed_ode.push_back(integrate({base.omega, tau, q0, l0, OdeModel::InoPca}, base.t_max));
  if (simulate) {
    ExperimentConfig c = base;
    c.algo = AlgorithmSpec::adaptive_ino();
    r.adaptive_sim = run_monte_carlo(c, false);
    for (double tau : taus) {
      c.algo = AlgorithmSpec::ino(tau);
      r.fixed_sim.push_back(run_monte_carlo(c, false));
    }
  }
  return r;
}

} // namespace inopca
