#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inopca/errors.hpp"
#include "inopca/parse.hpp"
#include "inopca/random.hpp"
#include "inopca/vector_ops.hpp"

namespace inopca {

enum class SignalKind { UniformSym, ExpShift, SparseMixture };

/// Distribution of the entries of the hidden direction ξ.
///
/// Grammar: `uniform`, `expshift[:BIAS]` (rate-1 exponential plus BIAS, default 0.9),
/// `sparse:RHO` (mass 1-RHO at 0 and RHO at 1/sqrt(RHO)).
struct SignalDist {
  SignalKind kind = SignalKind::UniformSym;
  double param = 0.0;

  static SignalDist uniform() { return {SignalKind::UniformSym, 0.0}; }
  static SignalDist exp_shift(double bias = 0.9) { return {SignalKind::ExpShift, bias}; }
  static SignalDist sparse(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("sparse mixture requires 0 < rho < 1, got " + format_number(rho));
    return {SignalKind::SparseMixture, rho};
  }

  static SignalDist parse(std::string_view text) {
    auto [head, arg] = split_spec(text);
    if (head == "uniform") {
      if (arg) throw ConfigError("'uniform' takes no parameter");
      return uniform();
    }
    if (head == "expshift") return exp_shift(arg ? parse_number(*arg, "expshift bias") : 0.9);
    if (head == "sparse") {
      if (!arg) throw ConfigError("'sparse' requires a sparsity level, e.g. sparse:0.05");
      return sparse(parse_number(*arg, "sparsity level"));
    }
    throw ConfigError("unknown xi distribution '" + std::string(text) + "' (expected uniform, expshift:B or sparse:R)");
  }

  std::string to_string() const {
    switch (kind) {
    case SignalKind::UniformSym: return "uniform";
    case SignalKind::ExpShift: return "expshift:" + format_number(param);
    case SignalKind::SparseMixture: return "sparse:" + format_number(param);
    }
    return "?";
  }

  /// One raw (pre-rescaling) draw.
  double draw(Rng& rng) const {
    switch (kind) {
    case SignalKind::UniformSym: return rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
    case SignalKind::ExpShift: return rng.exponential() + param;
    case SignalKind::SparseMixture: return rng.bernoulli(param) ? 1.0 / std::sqrt(param) : 0.0;
    }
    return 0.0;
  }

  bool operator==(const SignalDist&) const = default;
};

/// Hidden principal direction with ‖ξ‖ = √p.
struct SignalVector {
  std::vector<double> entries;
  SignalDist dist;

  std::size_t dimension() const noexcept { return entries.size(); }
  std::span<const double> view() const noexcept { return entries; }
};

/// Rescale `v` in place to Euclidean norm `target`. Throws if `v` is zero.
inline void rescale_to_norm(std::span<double> v, double target) {
  const double n = vec::norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("cannot rescale a zero or non-finite vector");
  vec::scale(v, target / n);
}

/// Draw ξ entrywise from `dist` and rescale the whole vector to ‖ξ‖ = √p.
inline SignalVector make_signal(const SignalDist& dist, std::size_t p, Rng& rng) {
  if (p < 2) throw ConfigError("dimension p must be at least 2, got " + std::to_string(p));
  if (dist.kind == SignalKind::SparseMixture && !(dist.param > 0.0 && dist.param < 1.0))
    throw ConfigError("sparse mixture requires 0 < rho < 1");
  SignalVector signal{std::vector<double>(p), dist};
  // A sparse draw can come back all-zero at tiny p; redraw in that case.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (double& v : signal.entries) v = dist.draw(rng);
    if (vec::squared_norm(signal.entries) > 0.0) {
      rescale_to_norm(signal.entries, std::sqrt(static_cast<double>(p)));
      return signal;
    }
  }
  throw ConfigError("could not draw a nonzero signal vector for " + dist.to_string() + " at p=" + std::to_string(p));
}

/// One sample of the spiked covariance stream, y = sqrt(ω/p)·c·ξ + a.
struct Observation {
  std::vector<double> y;
  double c = 0.0;
};

/// Writes a fresh observation into `y` (size p) and returns its latent c.
inline double sample_observation_into(std::span<const double> xi, double omega, Rng& rng, std::span<double> y) {
  if (!(omega >= 0.0)) throw ConfigError("SNR omega must be nonnegative, got " + format_number(omega));
  const double p = static_cast<double>(xi.size());
  const double c = rng.normal();
  const double s = std::sqrt(omega / p) * c;
  for (std::size_t i = 0; i < xi.size(); ++i) y[i] = s * xi[i] + rng.normal();
  return c;
}

inline Observation sample_observation(const SignalVector& signal, double omega, Rng& rng) {
  Observation obs{std::vector<double>(signal.dimension()), 0.0};
  obs.c = sample_observation_into(signal.entries, omega, rng, obs.y);
  return obs;
}

/// Iterate x with cached norm parameter λ = ‖x‖/√p and step counter k.
struct EstimateState {
  std::vector<double> x;
  double lambda = 0.0;
  std::int64_t k = 0;

  static EstimateState from_vector(std::vector<double> x, std::int64_t k = 0) {
    EstimateState s{std::move(x), 0.0, k};
    s.refresh_lambda();
    return s;
  }

  std::size_t dimension() const noexcept { return x.size(); }
  bool initialized() const noexcept { return !x.empty(); }

  void refresh_lambda() { lambda = vec::norm(x) / std::sqrt(static_cast<double>(x.size())); }
};

/// Cold (isotropic Gaussian) or warm (prescribed cosine c with ξ) start, scaled to ‖x₀‖ = √p·λ₀.
struct InitSpec {
  enum class Mode { Cold, Warm };
  Mode mode = Mode::Warm;
  double c = 0.1;
  double lambda0 = 1.0;

  static InitSpec cold(double lambda0 = 1.0) { return validated({Mode::Cold, 0.0, lambda0}); }
  static InitSpec warm(double c = 0.1, double lambda0 = 1.0) { return validated({Mode::Warm, c, lambda0}); }

  /// Grammar: `cold`, `warm[:C]`.
  static InitSpec parse(std::string_view text, double lambda0 = 1.0) {
    auto [head, arg] = split_spec(text);
    if (head == "cold") {
      if (arg) throw ConfigError("'cold' takes no parameter");
      return cold(lambda0);
    }
    if (head == "warm") return warm(arg ? parse_number(*arg, "warm-start cosine") : 0.1, lambda0);
    throw ConfigError("unknown init '" + std::string(text) + "' (expected cold or warm:C)");
  }

  static InitSpec validated(InitSpec s) {
    if (!(s.lambda0 > 0.0)) throw ConfigError("initial norm lambda0 must be positive, got " + format_number(s.lambda0));
    if (s.mode == Mode::Warm && !(s.c > 0.0 && s.c < 1.0))
      throw ConfigError("warm start requires 0 < c < 1, got " + format_number(s.c));
    return s;
  }

  std::string to_string() const { return mode == Mode::Cold ? "cold" : "warm:" + format_number(c); }
};

inline EstimateState init_estimate(const InitSpec& spec, std::span<const double> xi, Rng& rng) {
  InitSpec::validated(spec);
  const std::size_t p = xi.size();
  const double sqrt_p = std::sqrt(static_cast<double>(p));
  std::vector<double> x(p);
  for (double& v : x) v = rng.normal();
  if (spec.mode == InitSpec::Mode::Warm) {
    // z⊥: the fresh Gaussian with its ξ component removed, rescaled to √p.
    vec::axpy(x, -vec::dot(x, xi) / vec::squared_norm(xi), xi);
    rescale_to_norm(x, sqrt_p);
    const double ortho = std::sqrt(1.0 - spec.c * spec.c);
    for (std::size_t i = 0; i < p; ++i) x[i] = spec.c * xi[i] + ortho * x[i];
  }
  rescale_to_norm(x, sqrt_p * spec.lambda0);
  EstimateState state{std::move(x), spec.lambda0, 0};
  return state;
}

inline EstimateState init_estimate(const InitSpec& spec, const SignalVector& signal, Rng& rng) {
  return init_estimate(spec, signal.view(), rng);
}

} // namespace inopca
