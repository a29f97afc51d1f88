#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inopca/errors.hpp"
#include "inopca/parse.hpp"
#include "inopca/spiked_model.hpp"
#include "inopca/vector_ops.hpp"

namespace inopca {

/// Division guard for 1/λ. Crossing it is reported, never clamped.
inline constexpr double kLambdaFloor = 1e-12;

enum class AlgorithmKind { InoPca, Regularized, Oja, Krasulina, AdaptiveIno, Ccipca, AdaOja };

/// Which one-step rule to run, with its scalar parameter (τ, amnesic l, or b₀).
///
/// Grammar: `ino:T`, `reg:T`, `oja:T`, `krasulina:T`, `ada-ino`, `ccipca:L`, `adaoja:B0`.
/// Step-size kinds may omit T when a default τ is supplied.
struct AlgorithmSpec {
  AlgorithmKind kind = AlgorithmKind::InoPca;
  double param = 0.5;

  static AlgorithmSpec ino(double tau) { return validated({AlgorithmKind::InoPca, tau}); }
  static AlgorithmSpec regularized(double tau) { return validated({AlgorithmKind::Regularized, tau}); }
  static AlgorithmSpec oja(double tau) { return validated({AlgorithmKind::Oja, tau}); }
  static AlgorithmSpec krasulina(double tau) { return validated({AlgorithmKind::Krasulina, tau}); }
  static AlgorithmSpec adaptive_ino() { return {AlgorithmKind::AdaptiveIno, 0.0}; }
  static AlgorithmSpec ccipca(double amnesic) { return validated({AlgorithmKind::Ccipca, amnesic}); }
  static AlgorithmSpec adaoja(double b0) { return validated({AlgorithmKind::AdaOja, b0}); }

  static AlgorithmSpec parse(std::string_view text, std::optional<double> default_tau = std::nullopt) {
    auto [head, arg] = split_spec(text);
    auto tau_arg = [&](std::string_view name) {
      if (arg) return parse_number(*arg, std::string(name) + " learning rate");
      if (default_tau) return *default_tau;
      throw ConfigError("'" + std::string(name) + "' needs a learning rate, e.g. " + std::string(name) + ":0.5");
    };
    if (head == "ino") return ino(tau_arg(head));
    if (head == "reg") return regularized(tau_arg(head));
    if (head == "oja") return oja(tau_arg(head));
    if (head == "krasulina") return krasulina(tau_arg(head));
    if (head == "ada-ino") {
      if (arg) throw ConfigError("'ada-ino' takes no parameter");
      return adaptive_ino();
    }
    if (head == "ccipca") return ccipca(arg ? parse_number(*arg, "amnesic parameter") : 4.0);
    if (head == "adaoja") return adaoja(arg ? parse_number(*arg, "AdaOja b0") : 1.0);
    throw ConfigError("unknown algorithm '" + std::string(text) +
                      "' (expected ino:T, reg:T, oja:T, krasulina:T, ada-ino, ccipca:L or adaoja:B0)");
  }

  static AlgorithmSpec validated(AlgorithmSpec s) {
    switch (s.kind) {
    case AlgorithmKind::Ccipca:
      if (!(s.param >= 0.0)) throw ConfigError("CCIPCA amnesic parameter must be >= 0");
      break;
    case AlgorithmKind::AdaOja:
      if (!(s.param > 0.0)) throw ConfigError("AdaOja b0 must be > 0");
      break;
    case AlgorithmKind::AdaptiveIno: break;
    default:
      if (!(s.param > 0.0)) throw ConfigError("learning rate tau must be > 0, got " + format_number(s.param));
    }
    return s;
  }

  std::string to_string() const {
    switch (kind) {
    case AlgorithmKind::InoPca: return "ino:" + format_number(param);
    case AlgorithmKind::Regularized: return "reg:" + format_number(param);
    case AlgorithmKind::Oja: return "oja:" + format_number(param);
    case AlgorithmKind::Krasulina: return "krasulina:" + format_number(param);
    case AlgorithmKind::AdaptiveIno: return "ada-ino";
    case AlgorithmKind::Ccipca: return "ccipca:" + format_number(param);
    case AlgorithmKind::AdaOja: return "adaoja:" + format_number(param);
    }
    return "?";
  }

  /// Kinds whose λ evolves through the regularized dynamics (and is therefore band-checked).
  bool has_norm_dynamics() const noexcept {
    return kind == AlgorithmKind::InoPca || kind == AlgorithmKind::Regularized || kind == AlgorithmKind::AdaptiveIno;
  }

  bool operator==(const AlgorithmSpec&) const = default;
};

namespace detail {

inline void finish_step(EstimateState& state) {
  state.refresh_lambda();
  ++state.k;
  if (!std::isfinite(state.lambda)) throw DegeneracyError("iterate became non-finite", state.k);
}

inline void require_lambda(const EstimateState& state) {
  if (!(state.lambda > kLambdaFloor))
    throw DegeneracyError("norm parameter lambda=" + format_number(state.lambda) + " fell below the floor", state.k);
}

inline double dimension(const EstimateState& state) { return static_cast<double>(state.x.size()); }

} // namespace detail

/// INO-PCA: x' = x + (τ/p)(y(yᵀx)/λ − x).
inline void ino_pca_step(EstimateState& state, std::span<const double> y, double tau) {
  detail::require_lambda(state);
  const double rate = tau / detail::dimension(state);
  const double proj = vec::dot(y, state.x);
  vec::axpby(state.x, 1.0 - rate, rate * proj / state.lambda, y);
  detail::finish_step(state);
}

/// Cubic-regularized SGD: x' = x + (τ/p)(y(yᵀx) − λx).
inline void regularized_step(EstimateState& state, std::span<const double> y, double tau) {
  const double rate = tau / detail::dimension(state);
  const double proj = vec::dot(y, state.x);
  vec::axpby(state.x, 1.0 - rate * state.lambda, rate * proj, y);
  detail::finish_step(state);
}

/// Oja: gradient step x + (τ/p)y(yᵀx), then projection back to ‖x‖ = √p.
inline void oja_step(EstimateState& state, std::span<const double> y, double tau) {
  const double p = detail::dimension(state);
  const double proj = vec::dot(y, state.x);
  vec::axpy(state.x, tau / p * proj, y);
  const double n = vec::norm(state.x);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegeneracyError("Oja intermediate vector is zero or non-finite", state.k);
  vec::scale(state.x, std::sqrt(p) / n);
  state.lambda = 1.0;
  ++state.k;
}

/// Krasulina: x' = x + (τ/p)(y(yᵀx) − ((yᵀx)²/‖x‖²)x). The increment is orthogonal to x.
inline void krasulina_step(EstimateState& state, std::span<const double> y, double tau) {
  const double n2 = vec::squared_norm(state.x);
  if (!(n2 > 0.0)) throw DegeneracyError("Krasulina iterate is zero", state.k);
  const double rate = tau / detail::dimension(state);
  const double proj = vec::dot(y, state.x);
  vec::axpby(state.x, 1.0 - rate * proj * proj / n2, rate * proj, y);
  detail::finish_step(state);
}

/// Oracle-optimal effective rate ν̂ = τ/λ = ω(1 − Q²)/(ωQ² + 1).
inline double optimal_effective_rate(double q, double omega) { return omega * (1.0 - q * q) / (omega * q * q + 1.0); }

/// Adaptive INO-PCA: INO step with τ_k = λ_k·ν̂(Q_k), Q_k measured against the oracle ξ.
inline void adaptive_ino_step(EstimateState& state, std::span<const double> y, double omega, std::span<const double> xi) {
  detail::require_lambda(state);
  const double q = vec::dot(xi, state.x) / (vec::norm(xi) * vec::norm(state.x));
  // ν̂ = 0 at |Q| = 1 is legal: the step then leaves x unchanged.
  ino_pca_step(state, y, state.lambda * optimal_effective_rate(q, omega));
}

/// CCIPCA amnesic average at 1-based sample index `k`:
/// v' = ((k−1−l)/k)·v + ((1+l)/k)·y(yᵀv)/‖v‖. Initialization (v = y) is the caller's job.
inline void ccipca_step(EstimateState& state, std::span<const double> y, std::int64_t k, double amnesic) {
  if (k < 1) throw ConfigError("CCIPCA sample index must be >= 1");
  const double n = vec::norm(state.x);
  if (!(n > 0.0)) throw DegeneracyError("CCIPCA estimate is zero", state.k);
  const double kk = static_cast<double>(k);
  const double proj = vec::dot(y, state.x);
  vec::axpby(state.x, (kk - 1.0 - amnesic) / kk, (1.0 + amnesic) / kk * proj / n, y);
  detail::finish_step(state);
}

/// AdaOja: AdaGrad-normalized Oja step.
///
/// The gradient is measured on the unit-norm iterate, g = y(yᵀx)/‖x‖, the accumulator
/// grows by ‖g‖², and the Oja step uses rate p·b₀/√b, i.e. the unit vector moves by
/// (b₀/√b)·g before re-projection.
inline void adaoja_step(EstimateState& state, std::span<const double> y, double& accumulator, double b0) {
  if (!(accumulator >= 0.0)) throw ConfigError("AdaOja accumulator must be >= 0");
  const double n = vec::norm(state.x);
  if (!(n > 0.0)) throw DegeneracyError("AdaOja iterate is zero", state.k);
  const double proj = vec::dot(y, state.x) / n;
  accumulator += proj * proj * vec::squared_norm(y);
  if (!(accumulator > 0.0)) {
    ++state.k;
    return;
  }
  const double step = b0 / std::sqrt(accumulator);
  oja_step(state, y, step * detail::dimension(state));
}

/// Oracle information that only the adaptive stepper reads.
struct Oracle {
  double omega = 0.0;
  std::span<const double> xi;
};

/// A configured stepper with its per-run auxiliary state (AdaOja accumulator).
class Stepper {
public:
  explicit Stepper(AlgorithmSpec spec) : spec_(AlgorithmSpec::validated(spec)) {}

  const AlgorithmSpec& spec() const noexcept { return spec_; }
  double accumulator() const noexcept { return accumulator_; }

  /// Advances `state` with sample `y`; `sample_index` is the 1-based global sample count.
  void step(EstimateState& state, std::span<const double> y, std::int64_t sample_index, const Oracle& oracle = {}) {
    switch (spec_.kind) {
    case AlgorithmKind::InoPca: ino_pca_step(state, y, spec_.param); break;
    case AlgorithmKind::Regularized: regularized_step(state, y, spec_.param); break;
    case AlgorithmKind::Oja: oja_step(state, y, spec_.param); break;
    case AlgorithmKind::Krasulina: krasulina_step(state, y, spec_.param); break;
    case AlgorithmKind::AdaptiveIno:
      if (oracle.xi.empty()) throw ConfigError("adaptive INO-PCA needs oracle access to xi and omega");
      adaptive_ino_step(state, y, oracle.omega, oracle.xi);
      break;
    case AlgorithmKind::Ccipca:
      if (sample_index == 1) {
        state.x.assign(y.begin(), y.end());
        detail::finish_step(state);
      } else {
        ccipca_step(state, y, sample_index, spec_.param);
      }
      break;
    case AlgorithmKind::AdaOja: adaoja_step(state, y, accumulator_, spec_.param); break;
    }
  }

private:
  AlgorithmSpec spec_;
  double accumulator_ = 0.0;
};

/// r estimates processed with sequential deflation.
struct MultiPcState {
  std::vector<EstimateState> components;
  std::vector<Stepper> steppers;
  std::int64_t samples_seen = 0;

  MultiPcState(std::size_t r, std::size_t p, const AlgorithmSpec& spec) {
    if (r < 1 || r > p) throw ConfigError("component count r must satisfy 1 <= r <= p");
    if (spec.kind == AlgorithmKind::AdaptiveIno)
      throw ConfigError("the oracle-adaptive stepper is single-component only");
    components.resize(r);
    steppers.assign(r, Stepper(spec));
  }

  std::size_t rank() const noexcept { return components.size(); }
};

/// Processes one sample: for each active component, initialize it from (or update it
/// with) the current residual, then remove the component's direction from the residual.
/// `residual` holds y on entry and the fully deflated residual on exit.
inline void multi_pc_step(MultiPcState& m, std::span<double> residual) {
  const std::int64_t k = ++m.samples_seen;
  const std::size_t active = std::min<std::size_t>(m.rank(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < active; ++i) {
    EstimateState& v = m.components[i];
    if (!v.initialized()) {
      v = EstimateState::from_vector(std::vector<double>(residual.begin(), residual.end()));
      if (!(v.lambda > 0.0)) throw DegeneracyError("component " + std::to_string(i + 1) + " initialized to zero", k);
    } else {
      m.steppers[i].step(v, residual, k);
    }
    const double n2 = vec::squared_norm(v.x);
    if (!(n2 > 0.0)) throw DegeneracyError("component " + std::to_string(i + 1) + " has zero norm", k);
    vec::axpy(residual, -vec::dot(residual, v.x) / n2, v.x);
  }
}

} // namespace inopca
