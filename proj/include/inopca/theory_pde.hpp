#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "inopca/errors.hpp"
#include "inopca/metrics.hpp"
#include "inopca/parse.hpp"
#include "inopca/spiked_model.hpp"
#include "inopca/theory_ode.hpp"

namespace inopca {

/// Drift of a coordinate: G = τ(ωQξ + x/λ − x).
inline double drift_coefficient(double x, double lambda, double xi, double q, double omega, double tau) {
  if (!(lambda > 0.0)) throw DomainError("drift coefficient needs lambda > 0");
  return tau * (omega * q * xi + x / lambda - x);
}

/// Diffusion of a coordinate: J = τ²(ωQ² + 1).
inline double diffusion_coefficient(double q, double omega, double tau) { return tau * tau * (omega * q * q + 1.0); }

struct Atom {
  double xi = 0.0;
  double weight = 0.0;
};

/// Discrete ξ law. Continuous laws become `n_atoms` equal-weight mid-quantile atoms; the
/// atoms are rescaled so Σ w ξ² = 1, mirroring the √p rescaling of sampled signals.
inline std::vector<Atom> discretize_signal(const SignalDist& dist, std::size_t n_atoms = 64) {
  std::vector<Atom> atoms;
  switch (dist.kind) {
  case SignalKind::SparseMixture:
    atoms = {{0.0, 1.0 - dist.param}, {1.0 / std::sqrt(dist.param), dist.param}};
    break;
  case SignalKind::UniformSym:
  case SignalKind::ExpShift:
    if (n_atoms < 1) throw ConfigError("need at least one atom");
    for (std::size_t j = 0; j < n_atoms; ++j) {
      const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(n_atoms);
      const double v = dist.kind == SignalKind::UniformSym ? std::sqrt(3.0) * (2.0 * u - 1.0) : -std::log1p(-u) + dist.param;
      atoms.push_back({v, 1.0 / static_cast<double>(n_atoms)});
    }
    break;
  }
  double second = 0.0;
  for (const Atom& a : atoms) second += a.weight * a.xi * a.xi;
  const double s = 1.0 / std::sqrt(second);
  for (Atom& a : atoms) a.xi *= s;
  return atoms;
}

struct UniformGrid {
  double lo = -1.0;
  double dx = 1.0;
  std::size_t n = 2;

  static UniformGrid symmetric(double half_width, std::size_t n) {
    return {-half_width, 2.0 * half_width / static_cast<double>(n - 1), n};
  }

  double at(std::size_t i) const noexcept { return lo + dx * static_cast<double>(i); }
  double hi() const noexcept { return at(n - 1); }

  std::vector<double> nodes() const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = at(i);
    return out;
  }

  /// Trapezoid weight of node i.
  double weight(std::size_t i) const noexcept { return (i == 0 || i + 1 == n) ? 0.5 * dx : dx; }
};

/// Per-atom conditional densities P_t(x|ξ_a) on a shared grid.
struct DensityField {
  UniformGrid grid;
  std::vector<Atom> atoms;
  std::vector<std::vector<double>> cond;
  double t = 0.0;
};

struct OrderParameters {
  double q = 0.0;
  double lambda = 0.0;
};

inline double trapezoid_uniform(std::span<const double> f, const UniformGrid& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) s += g.weight(i) * f[i];
  return s;
}

/// λ = √(Σ_a w_a ∫x²P), Q = Σ_a w_a ∫(xξ_a/λ)P.
inline OrderParameters order_parameters(const DensityField& f) {
  double second = 0.0;
  double cross = 0.0;
  for (std::size_t a = 0; a < f.atoms.size(); ++a) {
    double m2 = 0.0;
    double m1 = 0.0;
    const auto& p = f.cond[a];
    for (std::size_t i = 0; i < f.grid.n; ++i) {
      const double x = f.grid.at(i);
      const double w = f.grid.weight(i) * p[i];
      m1 += w * x;
      m2 += w * x * x;
    }
    second += f.atoms[a].weight * m2;
    cross += f.atoms[a].weight * f.atoms[a].xi * m1;
  }
  const double lambda = std::sqrt(second);
  return {cross / lambda, lambda};
}

struct PdeConfig {
  std::size_t n = 1024;
  double half_width = 0.0; ///< 0 selects 6·max(1, ω+1, λ₀, max|ξ|·ω)
  double dt = 0.0;         ///< largest time step; 0 lets the stability bound alone decide
  double omega = 1.0;
  double tau = 0.5;
  enum class MomentSource { SelfConsistent, OdeDriven } source = MomentSource::SelfConsistent;
  double cfl_safety = 0.8;
};

inline double default_half_width(const std::vector<Atom>& atoms, double omega, double lambda0) {
  double max_xi = 0.0;
  for (const Atom& a : atoms) max_xi = std::max(max_xi, std::abs(a.xi));
  return 6.0 * std::max({1.0, omega + 1.0, lambda0, max_xi * omega});
}

/// Gaussian conditionals matching `init_estimate`: mean c·λ₀·ξ_a and variance (1−c²)λ₀² for a
/// warm start, mean 0 and variance λ₀² for a cold start.
inline DensityField initial_density(const InitSpec& init, std::vector<Atom> atoms, const PdeConfig& config) {
  InitSpec::validated(init);
  if (config.n < 64) throw ConfigError("PDE grid needs N >= 64");
  double wsum = 0.0;
  for (const Atom& a : atoms) {
    if (a.weight < 0.0) throw ConfigError("atom weights must be nonnegative");
    wsum += a.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("atom weights must sum to 1");
  const double half = config.half_width > 0.0 ? config.half_width : default_half_width(atoms, config.omega, init.lambda0);
  DensityField f{UniformGrid::symmetric(half, config.n), std::move(atoms), {}, 0.0};
  const bool warm = init.mode == InitSpec::Mode::Warm;
  const double var = (warm ? 1.0 - init.c * init.c : 1.0) * init.lambda0 * init.lambda0;
  for (const Atom& a : f.atoms) {
    const double mean = warm ? init.c * init.lambda0 * a.xi : 0.0;
    std::vector<double> p(f.grid.n);
    for (std::size_t i = 0; i < f.grid.n; ++i) {
      const double z = f.grid.at(i) - mean;
      p[i] = std::exp(-z * z / (2.0 * var));
    }
    const double mass = trapezoid_uniform(p, f.grid);
    for (double& v : p) v /= mass;
    f.cond.push_back(std::move(p));
  }
  return f;
}

/// Marginal P_t(x) = Σ_a w_a P_t(x|ξ_a).
inline std::vector<double> marginal_density(const DensityField& f) {
  std::vector<double> m(f.grid.n, 0.0);
  for (std::size_t a = 0; a < f.atoms.size(); ++a)
    for (std::size_t i = 0; i < f.grid.n; ++i) m[i] += f.atoms[a].weight * f.cond[a][i];
  return m;
}

/// Linear interpolation of nodal values, zero outside the grid.
inline double interpolate(std::span<const double> values, const UniformGrid& g, double x) {
  if (x < g.lo || x > g.hi()) return 0.0;
  const double s = (x - g.lo) / g.dx;
  const auto i = std::min(static_cast<std::size_t>(s), g.n - 2);
  const double w = s - static_cast<double>(i);
  return (1.0 - w) * values[i] + w * values[i + 1];
}

/// Density of x/λ_t on the same nodes: λ·P(λu).
inline std::vector<double> rescaled_marginal(const DensityField& f, double lambda) {
  const auto m = marginal_density(f);
  std::vector<double> out(f.grid.n);
  for (std::size_t i = 0; i < f.grid.n; ++i) out[i] = lambda * interpolate(m, f.grid, lambda * f.grid.at(i));
  return out;
}

/// Stationary conditional density ∝ exp((τ/J(Q_s))(2ωQ_sξx + x²/λ_s − x²)) on `grid`, normalized
/// by the trapezoid rule.
inline std::vector<double> steady_density(std::span<const double> grid, double xi, double omega, double tau) {
  const SteadyState s = steady_state(omega, tau);
  if (!(s.lambda > 1.0)) throw DomainError("steady density is not integrable for lambda_s <= 1");
  const double q = s.q();
  const double scale = tau / diffusion_coefficient(q, omega, tau);
  std::vector<double> e(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    e[i] = scale * (2.0 * omega * q * xi * x + x * x / s.lambda - x * x);
  }
  const double emax = *std::max_element(e.begin(), e.end());
  for (double& v : e) v = std::exp(v - emax);
  const double z = trapezoid(e, grid);
  for (double& v : e) v /= z;
  return e;
}

struct PdeTracePoint {
  double t = 0.0;
  double q = 0.0;
  double lambda = 0.0;
  double max_mass_error = 0.0;
};

struct PdeResult {
  std::vector<DensityField> snapshots;
  std::vector<PdeTracePoint> trace;
};

/// Explicit finite-volume solver for the strong-form Fokker–Planck equation
/// ∂P/∂t = −∂x[G P] + ½J ∂²x P with zero-flux walls.
///
/// Face fluxes use central interpolation of G·P while the cell Péclet number
/// |G|Δx/(J/2) stays ≤ 2 (positivity-preserving, second order) and fall back to
/// upwinding otherwise. Node weights equal the trapezoid weights, so the trapezoid
/// mass of every conditional is conserved to round-off. Time stepping is Heun's
/// method with the order parameters re-evaluated at each stage.
class FokkerPlanckSolver {
public:
  FokkerPlanckSolver(DensityField field, PdeConfig config) : f_(std::move(field)), cfg_(config) {
    if (f_.grid.n < 64) throw ConfigError("PDE grid needs N >= 64");
    if (cfg_.dt < 0.0) throw ConfigError("PDE dt must be positive");
    const std::size_t na = f_.atoms.size();
    k1_.assign(na, std::vector<double>(f_.grid.n));
    k2_.assign(na, std::vector<double>(f_.grid.n));
    stage_ = f_;
    initial_mass_.resize(na);
    for (std::size_t a = 0; a < na; ++a) initial_mass_[a] = trapezoid_uniform(f_.cond[a], f_.grid);
    const auto op = order_parameters(f_);
    order_ = op;
    ode_q_ = op.q;
    ode_lambda_ = op.lambda;
  }

  const DensityField& field() const noexcept { return f_; }
  OrderParameters order() const noexcept { return order_; }

  /// Largest stable step at the current order parameters.
  double stable_dt() const {
    double max_xi = 0.0;
    for (const Atom& a : f_.atoms) max_xi = std::max(max_xi, std::abs(a.xi));
    const double gmax = cfg_.tau * (cfg_.omega * std::abs(order_.q) * max_xi +
                                    std::max(std::abs(f_.grid.lo), f_.grid.hi()) * std::abs(1.0 / order_.lambda - 1.0));
    const double j = diffusion_coefficient(order_.q, cfg_.omega, cfg_.tau);
    // wall nodes have half weight, so their outflow rate is 2|G|/dx
    const double rate = j / (f_.grid.dx * f_.grid.dx) + 2.0 * gmax / f_.grid.dx;
    double dt = cfg_.cfl_safety / rate;
    if (cfg_.dt > 0.0) dt = std::min(dt, cfg_.dt);
    return dt;
  }

  /// Advances to time `t_end` exactly.
  void advance_to(double t_end) {
    while (f_.t < t_end - 1e-12) {
      const double dt = std::min(stable_dt(), t_end - f_.t);
      step(dt);
    }
  }

  double max_mass_error() const {
    double err = 0.0;
    for (std::size_t a = 0; a < f_.atoms.size(); ++a)
      err = std::max(err, std::abs(trapezoid_uniform(f_.cond[a], f_.grid) - initial_mass_[a]));
    return err;
  }

  void step(double dt) {
    const OrderParameters start = order_;
    rates(f_, start, k1_);
    for (std::size_t a = 0; a < f_.atoms.size(); ++a)
      for (std::size_t i = 0; i < f_.grid.n; ++i) stage_.cond[a][i] = f_.cond[a][i] + dt * k1_[a][i];

    OrderParameters mid;
    double next_ode_q = ode_q_;
    double next_ode_lambda = ode_lambda_;
    if (cfg_.source == PdeConfig::MomentSource::OdeDriven) {
      const OdeParams params{cfg_.omega, cfg_.tau, ode_q_, ode_lambda_, OdeModel::InoPca};
      const auto next = rk4_step(params, ode_q_, ode_lambda_, dt);
      next_ode_q = next[0];
      next_ode_lambda = next[1];
      mid = {next_ode_q, next_ode_lambda};
    } else {
      mid = order_parameters(stage_);
    }
    rates(stage_, mid, k2_);
    double lowest = 0.0;
    for (std::size_t a = 0; a < f_.atoms.size(); ++a)
      for (std::size_t i = 0; i < f_.grid.n; ++i) {
        double& v = f_.cond[a][i];
        v += 0.5 * dt * (k1_[a][i] + k2_[a][i]);
        lowest = std::min(lowest, v);
      }
    f_.t += dt;
    ode_q_ = next_ode_q;
    ode_lambda_ = next_ode_lambda;
    order_ = cfg_.source == PdeConfig::MomentSource::OdeDriven ? OrderParameters{ode_q_, ode_lambda_} : order_parameters(f_);

    if (lowest < -1e-8)
      throw NumericalError("PDE density went negative (" + format_number(lowest) + ") at t=" + format_number(f_.t));
    if (!std::isfinite(order_.lambda) || !(order_.lambda > 0.0))
      throw NumericalError("PDE order parameters became invalid at t=" + format_number(f_.t));
    const double drift = max_mass_error();
    if (drift > 1e-4 * (1.0 + f_.t))
      throw NumericalError("PDE mass drift " + format_number(drift) + " exceeds tolerance at t=" + format_number(f_.t));
  }

private:
  void rates(const DensityField& src, OrderParameters op, std::vector<std::vector<double>>& out) const {
    const UniformGrid& g = src.grid;
    const double d = 0.5 * diffusion_coefficient(op.q, cfg_.omega, cfg_.tau);
    const double slope = cfg_.tau * (1.0 / op.lambda - 1.0);
    for (std::size_t a = 0; a < src.atoms.size(); ++a) {
      const auto& p = src.cond[a];
      auto& r = out[a];
      const double offset = cfg_.tau * cfg_.omega * op.q * src.atoms[a].xi;
      std::fill(r.begin(), r.end(), 0.0);
      for (std::size_t i = 0; i + 1 < g.n; ++i) {
        const double xf = g.lo + g.dx * (static_cast<double>(i) + 0.5);
        const double gf = offset + slope * xf;
        const double advect = std::abs(gf) * g.dx <= 2.0 * d ? 0.5 * gf * (p[i] + p[i + 1]) : gf * (gf > 0.0 ? p[i] : p[i + 1]);
        const double flux = advect - d * (p[i + 1] - p[i]) / g.dx;
        r[i] -= flux;
        r[i + 1] += flux;
      }
      for (std::size_t i = 0; i < g.n; ++i) r[i] /= g.weight(i);
    }
  }

  DensityField f_;
  PdeConfig cfg_;
  DensityField stage_;
  std::vector<std::vector<double>> k1_;
  std::vector<std::vector<double>> k2_;
  std::vector<double> initial_mass_;
  OrderParameters order_;
  double ode_q_ = 0.0;
  double ode_lambda_ = 1.0;
};

/// Evolves `field` to `t_max`, capturing snapshots at `snapshot_times` and the order
/// parameters every `trace_every` time units.
inline PdeResult evolve_density(DensityField field, const PdeConfig& config, std::span<const double> snapshot_times,
                                double t_max, double trace_every = 0.1) {
  if (!(t_max > 0.0)) throw ConfigError("PDE t_max must be positive");
  if (!(trace_every > 0.0)) throw ConfigError("PDE trace interval must be positive");
  FokkerPlanckSolver solver(std::move(field), config);
  std::vector<double> stops;
  for (double t : snapshot_times) {
    if (t < 0.0 || t > t_max + 1e-12) throw ConfigError("snapshot time " + format_number(t) + " outside [0, t_max]");
    stops.push_back(t);
  }
  const auto n_trace = static_cast<std::size_t>(std::floor(t_max / trace_every + 1e-9));
  for (std::size_t j = 0; j <= n_trace; ++j) stops.push_back(static_cast<double>(j) * trace_every);
  stops.push_back(t_max);
  std::sort(stops.begin(), stops.end());

  PdeResult result;
  std::vector<double> snaps(snapshot_times.begin(), snapshot_times.end());
  std::sort(snaps.begin(), snaps.end());
  std::size_t next_snap = 0;
  std::size_t next_trace = 0;
  for (double stop : stops) {
    solver.advance_to(stop);
    const double now = solver.field().t;
    while (next_snap < snaps.size() && snaps[next_snap] <= now + 1e-12) {
      result.snapshots.push_back(solver.field());
      result.snapshots.back().t = snaps[next_snap];
      ++next_snap;
    }
    while (next_trace <= n_trace && static_cast<double>(next_trace) * trace_every <= now + 1e-12) {
      const auto op = solver.order();
      result.trace.push_back({static_cast<double>(next_trace) * trace_every, op.q, op.lambda, solver.max_mass_error()});
      ++next_trace;
    }
  }
  return result;
}

} // namespace inopca
