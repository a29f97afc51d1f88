#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "inopca/errors.hpp"
#include "inopca/parse.hpp"

namespace inopca {

struct OdeDerivative {
  double dq = 0.0;
  double dlambda = 0.0;
};

/// Right-hand side of the coupled cosine-similarity / norm-parameter ODEs of INO-PCA.
inline OdeDerivative ode_rhs(double q, double lambda, double omega, double tau) {
  if (!(lambda > 0.0)) throw DomainError("ode_rhs requires lambda > 0, got " + format_number(lambda));
  const double s = omega * q * q + 1.0;
  return {tau * q / lambda * (omega - omega * q * q - tau * s / (2.0 * lambda)),
          tau * (s - lambda + tau * s / (2.0 * lambda))};
}

/// Cosine-similarity ODE of Oja's method with rate τ̂ (norm fixed at 1).
inline double oja_ode_rhs(double q, double omega, double tau_hat) {
  return tau_hat * q * (omega - omega * q * q - tau_hat * (omega * q * q + 1.0) / 2.0);
}

/// ν̂ = τ/λ maximizing the instantaneous alignment growth.
inline double optimal_nu(double q, double omega) { return omega * (1.0 - q * q) / (omega * q * q + 1.0); }

/// Instantaneous alignment-growth objective ν·Q·(ω − ωQ² − ν(ωQ² + 1)/2) that ν̂ maximizes.
inline double alignment_growth(double nu, double q, double omega) {
  return nu * q * (omega - omega * q * q - nu * (omega * q * q + 1.0) / 2.0);
}

/// Initial norm maximizing early growth from Q ≈ 0.
inline double optimal_lambda0(double tau, double omega) {
  if (!(omega > 0.0)) throw DomainError("optimal lambda0 needs omega > 0 (no signal, no optimum)");
  return tau / omega;
}

/// Critical SNR below which the steady-state alignment is zero.
inline double critical_snr(double tau) { return (-1.0 + std::sqrt(1.0 + 2.0 * tau)) / 2.0; }

enum class Branch { Unstable, Learning };

inline std::string to_string(Branch b) { return b == Branch::Learning ? "learning" : "unstable"; }

struct SteadyState {
  Branch branch = Branch::Unstable;
  double q_squared = 0.0;
  double lambda = 1.0;

  double q() const { return std::sqrt(q_squared); }
};

/// Fixed point of the ODEs: the learning branch iff ω² + ω − τ/2 > 0, otherwise the
/// no-learning branch with λ_s = (1 + √(1+2τ))/2.
inline SteadyState steady_state(double omega, double tau) {
  if (!(omega >= 0.0)) throw DomainError("steady_state needs omega >= 0");
  if (!(tau > 0.0)) throw DomainError("steady_state needs tau > 0");
  const double numerator = omega * omega + omega - tau / 2.0;
  if (numerator > 0.0)
    return {Branch::Learning, numerator / (omega * omega + omega + tau * omega / 2.0), omega + 1.0};
  return {Branch::Unstable, 0.0, (1.0 + std::sqrt(1.0 + 2.0 * tau)) / 2.0};
}

/// Which limiting dynamics to integrate.
enum class OdeModel {
  InoPca,         ///< fixed τ
  InoPcaAdaptive, ///< τ_t = λ_t·ν̂(Q_t)
  Regularized,    ///< cubic-regularized SGD: INO dynamics with τ replaced by τ·λ_t
  Oja,            ///< projected SGD, λ ≡ 1
};

struct OdeParams {
  double omega = 1.0;
  double tau = 0.5;
  double q0 = 0.1;
  double lambda0 = 1.0;
  OdeModel model = OdeModel::InoPca;
};

/// Derivative for any model.
inline OdeDerivative model_rhs(const OdeParams& params, double q, double lambda) {
  switch (params.model) {
  case OdeModel::InoPca: return ode_rhs(q, lambda, params.omega, params.tau);
  case OdeModel::InoPcaAdaptive: return ode_rhs(q, lambda, params.omega, lambda * optimal_nu(q, params.omega));
  case OdeModel::Regularized: return ode_rhs(q, lambda, params.omega, params.tau * lambda);
  case OdeModel::Oja: return {oja_ode_rhs(q, params.omega, params.tau), 0.0};
  }
  return {};
}

struct TheoryTrajectory {
  std::vector<double> t;
  std::vector<double> q;
  std::vector<double> lambda;

  std::size_t size() const noexcept { return t.size(); }

  /// Linear interpolation at time `time` (clamped to the covered range).
  std::array<double, 2> at(double time) const {
    if (t.empty()) throw DomainError("empty trajectory");
    if (time <= t.front()) return {q.front(), lambda.front()};
    if (time >= t.back()) return {q.back(), lambda.back()};
    const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), time) - t.begin());
    const std::size_t lo = hi - 1;
    const double w = (time - t[lo]) / (t[hi] - t[lo]);
    return {q[lo] + w * (q[hi] - q[lo]), lambda[lo] + w * (lambda[hi] - lambda[lo])};
  }
};

/// One classical RK4 step of the (Q, λ) system.
inline std::array<double, 2> rk4_step(const OdeParams& params, double q, double lambda, double dt) {
  const auto k1 = model_rhs(params, q, lambda);
  const auto k2 = model_rhs(params, q + 0.5 * dt * k1.dq, lambda + 0.5 * dt * k1.dlambda);
  const auto k3 = model_rhs(params, q + 0.5 * dt * k2.dq, lambda + 0.5 * dt * k2.dlambda);
  const auto k4 = model_rhs(params, q + dt * k3.dq, lambda + dt * k3.dlambda);
  return {q + dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq),
          lambda + dt / 6.0 * (k1.dlambda + 2.0 * k2.dlambda + 2.0 * k3.dlambda + k4.dlambda)};
}

/// Fixed-step RK4 over [0, t_max]; stores every `record_every`-th point plus the last.
inline TheoryTrajectory integrate(const OdeParams& params, double t_max, double dt = 1e-3,
                                  std::size_t record_every = 1) {
  if (!(dt > 0.0) || !(t_max > 0.0)) throw ConfigError("integrate needs dt > 0 and t_max > 0");
  if (!(params.q0 != 0.0 && std::abs(params.q0) < 1.0)) throw DomainError("initial cosine Q0 must lie in (-1, 1) \\ {0}");
  if (!(params.lambda0 > 0.0)) throw DomainError("initial norm lambda0 must be positive");
  if (params.model != OdeModel::InoPcaAdaptive && !(params.tau > 0.0)) throw DomainError("tau must be positive");
  record_every = std::max<std::size_t>(record_every, 1);

  const auto steps = static_cast<std::size_t>(std::llround(t_max / dt));
  TheoryTrajectory traj;
  traj.t.reserve(steps / record_every + 2);
  traj.q.reserve(steps / record_every + 2);
  traj.lambda.reserve(steps / record_every + 2);
  double q = params.q0;
  double lambda = params.model == OdeModel::Oja ? 1.0 : params.lambda0;
  traj.t.push_back(0.0);
  traj.q.push_back(q);
  traj.lambda.push_back(lambda);
  for (std::size_t n = 1; n <= steps; ++n) {
    std::array<double, 2> next{};
    try {
      next = rk4_step(params, q, lambda, dt);
    } catch (const DomainError&) {
      next = {q, -1.0};
    }
    q = next[0];
    lambda = next[1];
    if (!std::isfinite(q) || !std::isfinite(lambda) || std::abs(q) > 1.0 + 1e-9 || !(lambda > 0.0))
      throw NumericalError("ODE integration blew up at t=" + format_number(static_cast<double>(n) * dt) +
                           "; try a smaller dt");
    if (n % record_every == 0 || n == steps) {
      traj.t.push_back(static_cast<double>(n) * dt);
      traj.q.push_back(q);
      traj.lambda.push_back(lambda);
    }
  }
  return traj;
}

} // namespace inopca
