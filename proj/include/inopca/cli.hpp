#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "inopca/errors.hpp"
#include "inopca/experiments.hpp"
#include "inopca/harness.hpp"
#include "inopca/io.hpp"
#include "inopca/multipc.hpp"
#include "inopca/parse.hpp"
#include "inopca/theory_ode.hpp"
#include "inopca/theory_pde.hpp"

namespace inopca::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kNumerical = 3 };

/// Effective settings: command line beats config file beats built-in default.
class Settings {
public:
  std::map<std::string, std::string> given;
  std::map<std::string, std::string> file;
  std::map<std::string, std::string> defaults;

  bool has(const std::string& key) const { return !get(key).empty(); }

  std::string get(const std::string& key) const {
    if (auto it = given.find(key); it != given.end()) return it->second;
    if (auto it = file.find(key); it != file.end()) return it->second;
    if (auto it = defaults.find(key); it != defaults.end()) return it->second;
    throw std::logic_error("unregistered setting '" + key + "'");
  }

  double number(const std::string& key) const { return parse_number(get(key), "--" + key); }

  std::uint64_t integer(const std::string& key) const {
    const std::string text = get(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ConfigError("--" + key + " expects a nonnegative integer, got '" + text + "'");
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0" || v.empty()) return false;
    throw ConfigError("--" + key + " expects true or false, got '" + v + "'");
  }

  std::vector<double> grid_or_list(const std::string& key) const {
    const std::string v = get(key);
    return v.find(':') != std::string::npos ? parse_grid(v) : parse_list(v, "--" + key);
  }

  std::map<std::string, std::string> resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : defaults) out[k] = get(k);
    return out;
  }
};

struct OptionDef {
  std::string name;
  std::string default_value;
  std::string help;
  bool is_flag = false;
};

/// Collects the files a command writes. Without `--out`, the primary table goes to stdout
/// and the rest are dropped.
class Output {
public:
  Output(fs::path dir, std::ostream& out, std::ostream& err) : dir_(std::move(dir)), out_(out), err_(err) {}

  bool to_disk() const { return !dir_.empty(); }

  void emit(const std::string& name, const std::string& text, bool primary) {
    if (to_disk()) {
      write_text(dir_ / name, text);
      written_.push_back((dir_ / name).string());
    } else if (primary) {
      out_ << text;
    }
  }

  /// Human-readable key=value results; stdout when tables go to disk, stderr otherwise.
  std::ostream& report() { return to_disk() ? out_ : err_; }
  std::ostream& out() { return out_; }

  void summary(const std::string& key, double value) { summary_[key] = value; }
  const std::map<std::string, double>& summaries() const { return summary_; }
  const std::vector<std::string>& written() const { return written_; }
  const fs::path& dir() const { return dir_; }

private:
  fs::path dir_;
  std::ostream& out_;
  std::ostream& err_;
  std::vector<std::string> written_;
  std::map<std::string, double> summary_;
};

using Handler = std::function<void(const Settings&, Output&)>;

struct Command {
  std::vector<std::string> path;
  std::string help;
  std::vector<OptionDef> options;
  Handler run;
};

// ---------------------------------------------------------------------------
// option tables

inline std::vector<OptionDef> experiment_options(const std::string& p, const std::string& trials, const std::string& t_max,
                                                 const std::string& algo = "ino") {
  return {
      {"p", p, "dimension"},
      {"omega", "1", "SNR parameter"},
      {"tau", "0.5", "learning rate (used when --algo omits its parameter)"},
      {"algo", algo, "ino[:T] reg[:T] oja[:T] krasulina[:T] ada-ino ccipca[:L] adaoja[:B0]"},
      {"xi", "uniform", "signal law: uniform | expshift[:B] | sparse:R"},
      {"init", "warm:0.1", "cold | warm[:C]"},
      {"lambda0", "1", "initial norm parameter"},
      {"t-max", t_max, "macroscopic horizon (steps = floor(p * t))"},
      {"trials", trials, "Monte Carlo trials"},
      {"seed", "1", "master seed"},
      {"sample-every", "0.1", "trace cadence in macroscopic time"},
      {"threads", "0", "worker threads (0: INO_PCA_THREADS or all cores)"},
  };
}

inline std::vector<OptionDef> with(std::vector<OptionDef> a, const std::vector<OptionDef>& b) {
  for (const auto& o : b) {
    bool replaced = false;
    for (auto& e : a)
      if (e.name == o.name) {
        e = o;
        replaced = true;
      }
    if (!replaced) a.push_back(o);
  }
  return a;
}

inline std::size_t thread_count(const Settings& s) {
  if (s.given.count("threads") || s.file.count("threads")) return s.integer("threads");
  if (const char* env = std::getenv("INO_PCA_THREADS")) {
    Settings e;
    e.given["threads"] = env;
    try {
      return e.integer("threads");
    } catch (const ConfigError&) {
      throw ConfigError(std::string("INO_PCA_THREADS expects a nonnegative integer, got '") + env + "'");
    }
  }
  return 0;
}

inline ExperimentConfig experiment_from(const Settings& s) {
  ExperimentConfig c;
  c.p = s.integer("p");
  c.omega = s.number("omega");
  c.algo = AlgorithmSpec::parse(s.get("algo"), s.number("tau"));
  c.xi = SignalDist::parse(s.get("xi"));
  c.init = InitSpec::parse(s.get("init"), s.number("lambda0"));
  c.t_max = s.number("t-max");
  c.trials = s.integer("trials");
  c.seed = s.integer("seed");
  c.sample_every = s.number("sample-every");
  c.threads = thread_count(s);
  if (s.defaults.count("switch-t") && s.has("switch-t"))
    c.switch_at = SwitchSpec{s.number("switch-t"), SignalDist::parse(s.get("xi2"))};
  return c.validated();
}

inline std::string to_csv(const std::function<void(CsvWriter&)>& body) {
  std::ostringstream s;
  CsvWriter w(s);
  body(w);
  return s.str();
}

inline std::string aggregate_csv(const Aggregate& agg) {
  std::ostringstream s;
  write_aggregate_csv(s, agg);
  return s.str();
}

// ---------------------------------------------------------------------------
// handlers

inline void run_simulate(const Settings& s, Output& out) {
  const ExperimentConfig c = experiment_from(s);
  const Aggregate agg = run_monte_carlo(c);
  out.emit("simulate.csv", aggregate_csv(agg), true);
  out.summary("Q_final_mean", agg.q_mean.back());
  out.summary("lambda_final_mean", agg.lambda_mean.back());
}

inline OdeModel parse_model(const std::string& text) {
  if (text == "ino") return OdeModel::InoPca;
  if (text == "ada-ino") return OdeModel::InoPcaAdaptive;
  if (text == "reg") return OdeModel::Regularized;
  if (text == "oja") return OdeModel::Oja;
  throw ConfigError("unknown ODE model '" + text + "' (expected ino, ada-ino, reg or oja)");
}

inline void run_theory_ode(const Settings& s, Output& out) {
  const double dt = s.number("dt");
  const double every = s.number("sample-every");
  if (!(dt > 0.0) || !(every >= dt)) throw ConfigError("need dt > 0 and sample-every >= dt");
  const auto record = static_cast<std::size_t>(std::llround(every / dt));
  const OdeParams params{s.number("omega"), s.number("tau"), s.number("q0"), s.number("lambda0"), parse_model(s.get("model"))};
  const TheoryTrajectory tr = integrate(params, s.number("t-max"), dt, record);
  out.emit("ode.csv", to_csv([&](CsvWriter& w) {
             w.header({"t", "Q", "lambda"});
             for (std::size_t i = 0; i < tr.size(); ++i) w.row({tr.t[i], tr.q[i], tr.lambda[i]});
           }),
           true);
}

inline PdeConfig pde_config_from(const Settings& s) {
  PdeConfig pc;
  pc.n = s.integer("n");
  pc.half_width = s.number("half-width");
  pc.dt = s.number("dt");
  pc.omega = s.number("omega");
  pc.tau = s.number("tau");
  const std::string src = s.get("source");
  if (src == "self") pc.source = PdeConfig::MomentSource::SelfConsistent;
  else if (src == "ode") pc.source = PdeConfig::MomentSource::OdeDriven;
  else throw ConfigError("unknown moment source '" + src + "' (expected self or ode)");
  if (pc.half_width < 0.0) throw ConfigError("--half-width must be >= 0");
  return pc;
}

inline std::string snapshots_csv(const std::vector<DensityField>& snaps) {
  return to_csv([&](CsvWriter& w) {
    w.header({"t", "x", "P_marginal", "P_marginal_rescaled"});
    for (const auto& f : snaps) {
      const auto m = marginal_density(f);
      const auto r = rescaled_marginal(f, order_parameters(f).lambda);
      for (std::size_t i = 0; i < f.grid.n; ++i) w.row({f.t, f.grid.at(i), m[i], r[i]});
    }
  });
}

inline void run_theory_pde(const Settings& s, Output& out) {
  const PdeConfig pc = pde_config_from(s);
  const auto times = s.grid_or_list("snapshots");
  double t_max = s.has("t-max") ? s.number("t-max") : 0.0;
  for (double t : times) t_max = std::max(t_max, t);
  const auto atoms = discretize_signal(SignalDist::parse(s.get("xi")), s.integer("atoms"));
  const DensityField init = initial_density(InitSpec::parse(s.get("init"), s.number("lambda0")), atoms, pc);
  const PdeResult r = evolve_density(init, pc, times, t_max, s.number("sample-every"));
  out.emit("pde.csv", snapshots_csv(r.snapshots), true);
  out.emit("pde_trace.csv", to_csv([&](CsvWriter& w) {
             w.header({"t", "Q", "lambda", "mass_error"});
             for (const auto& p : r.trace) w.row({p.t, p.q, p.lambda, p.max_mass_error});
           }),
           false);
}

inline std::string steady_line(double omega, double tau) {
  const SteadyState st = steady_state(omega, tau);
  return "branch=" + to_string(st.branch) + " Q_s=" + format_fixed6(st.q()) + " lambda_s=" + format_fixed6(st.lambda);
}

inline void run_theory_steady(const Settings& s, Output& out) {
  const double omega = s.number("omega");
  const double tau = s.number("tau");
  if (!(omega >= 0.0) || !(tau > 0.0)) throw ConfigError("need omega >= 0 and tau > 0");
  out.out() << steady_line(omega, tau) << '\n';
  const SteadyState st = steady_state(omega, tau);
  out.summary("Q_s", st.q());
  out.summary("lambda_s", st.lambda);
}

inline void run_theory_phase(const Settings& s, Output& out) {
  const double tau = s.number("tau");
  if (!(tau > 0.0)) throw ConfigError("--tau must be positive");
  const auto omegas = s.grid_or_list("omega-grid");
  const double wc = critical_snr(tau);
  out.emit("phase.csv", to_csv([&](CsvWriter& w) {
             w.header({"omega", "Q_s", "lambda_s", "branch", "omega_c"});
             for (double om : omegas) {
               if (!(om >= 0.0)) throw ConfigError("omega values must be >= 0");
               const SteadyState st = steady_state(om, tau);
               w.row_strings({format_fixed6(om), format_fixed6(st.q()), format_fixed6(st.lambda), to_string(st.branch),
                              format_fixed6(wc)});
             }
           }),
           true);
  out.summary("omega_c", wc);
}

inline std::string phase_rows_csv(const std::vector<PhaseRow>& rows) {
  return to_csv([&](CsvWriter& w) {
    w.header({"omega", "Q_s_theory", "Q_s_empirical", "Q_s_empirical_std"});
    for (const auto& r : rows) w.row({r.omega, r.q_theory, r.q_empirical, r.q_empirical_std});
  });
}

inline void run_sweep_omega(const Settings& s, Output& out) {
  const auto rows = run_phase_sweep(s.grid_or_list("omega-grid"), experiment_from(s));
  out.emit("sweep_omega.csv", phase_rows_csv(rows), true);
  for (const auto& r : rows)
    out.report() << "omega=" << format_number(r.omega) << " Q_s_theory=" << format_fixed6(r.q_theory)
                 << " Q_s_empirical=" << format_fixed6(r.q_empirical) << '\n';
}

inline std::string lambda0_csv(const std::vector<Lambda0Row>& rows) {
  return to_csv([&](CsvWriter& w) {
    w.header({"lambda0", "Q_eval_mean", "Q_eval_std", "Q_eval_theory", "Q_steady_empirical"});
    for (const auto& r : rows) w.row({r.lambda0, r.q_at_eval, r.q_at_eval_std, r.q_theory_at_eval, r.q_steady});
  });
}

inline std::string portrait_csv(const std::vector<std::pair<double, TheoryTrajectory>>& curves) {
  return to_csv([&](CsvWriter& w) {
    w.header({"lambda0", "t", "Q", "lambda"});
    for (const auto& [l0, tr] : curves)
      for (std::size_t i = 0; i < tr.size(); ++i) w.row({l0, tr.t[i], tr.q[i], tr.lambda[i]});
  });
}

inline void run_sweep_lambda0(const Settings& s, Output& out) {
  const ExperimentConfig c = experiment_from(s);
  const auto rows = run_lambda0_sweep(s.grid_or_list("lambda0-list"), c, s.number("t-eval"));
  out.emit("sweep_lambda0.csv", lambda0_csv(rows), true);
  std::vector<std::pair<double, TheoryTrajectory>> curves;
  for (const auto& r : rows) curves.emplace_back(r.lambda0, r.theory);
  out.emit("sweep_lambda0_theory.csv", portrait_csv(curves), false);
  for (const auto& r : rows)
    out.report() << "lambda0=" << format_number(r.lambda0) << " Q_eval=" << format_fixed6(r.q_at_eval)
                 << " Q_steady=" << format_fixed6(r.q_steady) << '\n';
}

inline std::vector<AlgorithmSpec> parse_algos(const std::string& text, double tau) {
  std::vector<AlgorithmSpec> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item(trim(std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (!item.empty()) out.push_back(AlgorithmSpec::parse(item, tau));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("--algos needs at least one algorithm");
  return out;
}

inline std::string nonstationary_csv(const std::vector<NonstationaryRun>& runs) {
  return to_csv([&](CsvWriter& w) {
    std::vector<std::string> head{"t"};
    for (const auto& r : runs) {
      head.push_back(r.algo.to_string() + "_Q_mean");
      head.push_back(r.algo.to_string() + "_Q_std");
    }
    w.header(head);
    const auto& t = runs.front().aggregate.t;
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::vector<double> row{t[i]};
      for (const auto& r : runs) {
        row.push_back(r.aggregate.q_mean[i]);
        row.push_back(r.aggregate.q_std[i]);
      }
      w.row(row);
    }
  });
}

inline void run_switch(const Settings& s, Output& out) {
  ExperimentConfig c = experiment_from(s);
  if (!c.switch_at) throw ConfigError("switch needs --switch-t");
  const auto runs = run_nonstationary(c, parse_algos(s.get("algos"), s.number("tau")), s.number("window"));
  out.emit("switch.csv", nonstationary_csv(runs), true);
  for (const auto& r : runs) {
    out.report() << "algo=" << r.algo.to_string() << " pre_switch_Q=" << format_fixed6(r.pre_switch_q)
                 << " checkpoint_Q=" << format_fixed6(r.checkpoint_q) << " ratio=" << format_fixed6(r.recovery_ratio())
                 << '\n';
    out.summary(r.algo.to_string() + "_recovery_ratio", r.recovery_ratio());
  }
}

inline void run_multipc_cmd(const Settings& s, Output& out) {
  MultiPcConfig c;
  c.p = s.integer("p");
  c.r = s.integer("r");
  c.omegas = parse_list(s.get("omegas"), "--omegas");
  c.xi = SignalDist::parse(s.get("xi"));
  c.algo = AlgorithmSpec::parse(s.get("algo"), s.number("tau"));
  c.t_max = s.number("t-max");
  c.sample_every = s.number("sample-every");
  c.trials = s.integer("trials");
  c.seed = s.integer("seed");
  c.threads = thread_count(s);
  c.data_path = s.get("data");
  const MultiPcResult r = run_multipc(c);
  out.emit("multipc.csv", to_csv([&](CsvWriter& w) {
             w.header({"t", "distance_mean", "distance_std"});
             for (std::size_t i = 0; i < r.t.size(); ++i) w.row({r.t[i], r.distance_mean[i], r.distance_std[i]});
           }),
           true);
  if (!r.distance_mean.empty()) {
    out.report() << "p=" << r.p << " final_distance=" << format_fixed6(r.distance_mean.back()) << '\n';
    out.summary("final_distance", r.distance_mean.back());
  }
}

inline void run_check_moments(const Settings& s, Output& out) {
  const MomentReport r = moment_oracle_check(s.integer("p"), s.number("omega"), s.number("tau"), SignalDist::parse(s.get("xi")),
                                             InitSpec::parse(s.get("init"), s.number("lambda0")), s.integer("resamples"),
                                             s.integer("seed"));
  out.out() << "p=" << r.p << " resamples=" << r.resamples << " Q=" << format_fixed6(r.q) << " lambda=" << format_fixed6(r.lambda)
            << '\n'
            << "drift_within_3se=" << format_fixed6(r.drift_within_3se) << " max_drift_z=" << format_fixed6(r.max_drift_z) << '\n'
            << "diffusion_empirical=" << format_number(r.diffusion_empirical)
            << " diffusion_theory=" << format_number(r.diffusion_theory)
            << " rel_error=" << format_fixed6(r.diffusion_rel_error()) << '\n';
  out.summary("drift_within_3se", r.drift_within_3se);
  out.summary("diffusion_rel_error", r.diffusion_rel_error());
}

// reproduce presets: desk scale unless --paper-scale

inline ExperimentConfig preset(const Settings& s) {
  ExperimentConfig c;
  const bool large = s.flag("paper-scale");
  c.p = s.given.count("p") ? s.integer("p") : (large ? 10000 : 2000);
  c.trials = s.given.count("trials") ? s.integer("trials") : (large ? 20 : 10);
  c.seed = s.integer("seed");
  c.threads = thread_count(s);
  return c;
}

inline void run_fig1(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 30.0;
  PdeConfig pc;
  const std::vector<double> times{2.0, 10.0, 30.0};
  const DensityComparison d = compare_densities(c, pc, 64, times);
  out.emit("fig1_pde.csv", snapshots_csv(d.pde.snapshots), true);
  out.emit("fig1_histograms.csv", to_csv([&](CsvWriter& w) {
             w.header({"t", "x", "hist_raw", "P_marginal", "u", "hist_rescaled", "P_marginal_rescaled"});
             for (const auto& sn : d.snapshots)
               for (std::size_t i = 0; i < sn.raw_grid.size(); ++i)
                 w.row({sn.t, sn.raw_grid[i], sn.raw_hist[i], sn.raw_pde[i], sn.rescaled_grid[i], sn.rescaled_hist[i],
                        sn.rescaled_pde[i]});
           }),
           false);
  for (const auto& sn : d.snapshots) {
    out.report() << "t=" << format_number(sn.t) << " L1_raw=" << format_fixed6(sn.l1_raw)
                 << " L1_rescaled=" << format_fixed6(sn.l1_rescaled) << '\n';
    out.summary("L1_rescaled_t" + format_number(sn.t), sn.l1_rescaled);
    out.summary("L1_raw_t" + format_number(sn.t), sn.l1_raw);
  }
}

inline void run_fig2(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 30.0;
  const Aggregate agg = run_monte_carlo(c);
  out.emit("fig2.csv", aggregate_csv(agg), true);
  double dq = 0.0;
  double dl = 0.0;
  for (std::size_t i = 0; i < agg.t.size(); ++i) {
    dq = std::max(dq, std::abs(agg.q_mean[i] - (*agg.q_theory)[i]));
    dl = std::max(dl, std::abs(agg.lambda_mean[i] - (*agg.lambda_theory)[i]));
  }
  out.report() << "sup_Q_error=" << format_fixed6(dq) << " sup_lambda_error=" << format_fixed6(dl) << '\n';
  out.summary("sup_Q_error", dq);
  out.summary("sup_lambda_error", dl);
}

inline void run_fig4(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 150.0;
  const auto rows = run_phase_sweep({0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.6, 0.8, 1.0}, c);
  out.emit("fig4_sweep.csv", phase_rows_csv(rows), true);
  const double wc = critical_snr(0.5);
  out.emit("fig4_theory.csv", to_csv([&](CsvWriter& w) {
             w.header({"omega", "Q_s", "lambda_s", "branch", "omega_c"});
             for (double om : parse_grid("0:2:0.01")) {
               const SteadyState st = steady_state(om, 0.5);
               w.row_strings({format_number(om), format_number(st.q()), format_number(st.lambda), to_string(st.branch),
                              format_number(wc)});
             }
           }),
           false);
  const auto grid = linspace(-8.0, 8.0, 801);
  out.emit("fig4_steady_density.csv", to_csv([&](CsvWriter& w) {
             w.header({"omega", "x", "P_s"});
             for (double om : {0.1, 0.5, 1.0}) {
               std::vector<double> marginal(grid.size(), 0.0);
               for (const Atom& a : discretize_signal(SignalDist::uniform(), 64)) {
                 const auto p = steady_density(grid, a.xi, om, 0.5);
                 for (std::size_t i = 0; i < grid.size(); ++i) marginal[i] += a.weight * p[i];
               }
               for (std::size_t i = 0; i < grid.size(); ++i) w.row({om, grid[i], marginal[i]});
             }
           }),
           false);
  out.report() << "omega_c=" << format_fixed6(wc) << '\n';
  for (const auto& r : rows)
    out.report() << "omega=" << format_number(r.omega) << " Q_s_theory=" << format_fixed6(r.q_theory)
                 << " Q_s_empirical=" << format_fixed6(r.q_empirical) << '\n';
}

inline void run_fig5(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 40.0;
  const std::vector<double> taus{0.1, 0.5, 1.0};
  const AdaptiveComparison r = compare_adaptive(c, taus, true);
  out.emit("fig5_sim.csv", to_csv([&](CsvWriter& w) {
             std::vector<std::string> head{"t", "adaptive_Q_mean", "adaptive_Q_std"};
             for (double t : taus) {
               head.push_back("tau" + format_number(t) + "_Q_mean");
               head.push_back("tau" + format_number(t) + "_Q_std");
             }
             w.header(head);
             for (std::size_t i = 0; i < r.adaptive_sim->t.size(); ++i) {
               std::vector<double> row{r.adaptive_sim->t[i], r.adaptive_sim->q_mean[i], r.adaptive_sim->q_std[i]};
               for (const auto& a : r.fixed_sim) {
                 row.push_back(a.q_mean[i]);
                 row.push_back(a.q_std[i]);
               }
               w.row(row);
             }
           }),
           true);
  out.emit("fig5_theory.csv", to_csv([&](CsvWriter& w) {
             std::vector<std::string> head{"t", "adaptive_Q"};
             for (double t : taus) head.push_back("tau" + format_number(t) + "_Q");
             w.header(head);
             for (std::size_t i = 0; i < r.adaptive_ode.size(); i += 100) {
               std::vector<double> row{r.adaptive_ode.t[i], r.adaptive_ode.q[i]};
               for (const auto& f : r.fixed_ode) row.push_back(f.q[i]);
               w.row(row);
             }
           }),
           false);
  auto crossing = [&](const Aggregate& a) {
    const auto t = first_crossing(a.t, a.q_mean, 0.8);
    return t ? format_number(*t) : std::string("never");
  };
  out.report() << "adaptive_reaches_0.8_at=" << crossing(*r.adaptive_sim) << '\n';
  for (std::size_t j = 0; j < taus.size(); ++j)
    out.report() << "tau=" << format_number(taus[j]) << "_reaches_0.8_at=" << crossing(r.fixed_sim[j]) << '\n';
}

inline void run_fig6(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 30.0;
  const auto rows = run_lambda0_sweep({0.1, 0.25, 0.5, 1.0, 2.0, 4.0}, c, 3.0);
  out.emit("fig6_sweep.csv", lambda0_csv(rows), true);
  std::vector<std::pair<double, TheoryTrajectory>> curves;
  const double tau = 0.5;
  for (double l0 : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0, (1.0 + std::sqrt(1.0 + 2.0 * tau)) / 2.0})
    curves.emplace_back(l0, integrate({1.0, tau, 1e-2, l0, OdeModel::InoPca}, 30.0, 1e-3, 10));
  out.emit("fig6_portrait.csv", portrait_csv(curves), false);
  for (const auto& r : rows)
    out.report() << "lambda0=" << format_number(r.lambda0) << " Q_t3=" << format_fixed6(r.q_at_eval)
                 << " Q_t3_theory=" << format_fixed6(r.q_theory_at_eval) << " Q_steady=" << format_fixed6(r.q_steady) << '\n';
}

inline void run_fig7(const Settings& s, Output& out) {
  ExperimentConfig c = preset(s);
  c.t_max = 100.0;
  c.switch_at = SwitchSpec{50.0, SignalDist::sparse(0.05)};
  const auto runs =
      run_nonstationary(c, {AlgorithmSpec::adaptive_ino(), AlgorithmSpec::ccipca(4.0), AlgorithmSpec::adaoja(1.0)}, 20.0);
  out.emit("fig7.csv", nonstationary_csv(runs), true);
  for (const auto& r : runs)
    out.report() << "algo=" << r.algo.to_string() << " pre_switch_Q=" << format_fixed6(r.pre_switch_q)
                 << " Q_at_t70=" << format_fixed6(r.checkpoint_q) << " ratio=" << format_fixed6(r.recovery_ratio()) << '\n';
}

// ---------------------------------------------------------------------------
// registry

inline std::vector<Command> commands() {
  const auto pde_opts = std::vector<OptionDef>{
      {"omega", "1", "SNR parameter"},
      {"tau", "0.5", "learning rate"},
      {"xi", "uniform", "signal law: uniform | expshift[:B] | sparse:R"},
      {"atoms", "64", "quantile atoms for continuous signal laws"},
      {"init", "warm:0.1", "cold | warm[:C]"},
      {"lambda0", "1", "initial norm parameter"},
      {"snapshots", "2,10,30", "snapshot times (list or start:stop:step)"},
      {"t-max", "", "horizon (default: last snapshot)"},
      {"n", "1024", "grid points"},
      {"half-width", "0", "grid half-width L (0: automatic)"},
      {"dt", "0", "largest PDE step (0: stability bound only)"},
      {"source", "self", "order parameters: self (from the density) | ode"},
      {"sample-every", "0.1", "trace cadence"},
  };
  const auto reproduce_opts = std::vector<OptionDef>{
      {"paper-scale", "false", "p = 10000, 20 trials", true},
      {"p", "", "dimension (default 2000; 10000 at full scale)"},
      {"trials", "", "trials (default 10; 20 at full scale)"},
      {"seed", "1", "master seed"},
      {"threads", "0", "worker threads (0: INO_PCA_THREADS or all cores)"},
  };
  std::vector<Command> cmds{
      {{"simulate"},
       "Monte Carlo run of one algorithm",
       with(experiment_options("10000", "20", "30"),
            {{"switch-t", "", "switch the signal at this time (default: never)"}, {"xi2", "sparse:0.05", "signal law after the switch"}}),
       run_simulate},
      {{"theory", "ode"},
       "integrate the (Q, lambda) ODEs; CSV t,Q,lambda",
       {{"omega", "1", "SNR parameter"},
        {"tau", "0.5", "learning rate"},
        {"q0", "0.1", "initial cosine"},
        {"lambda0", "1", "initial norm parameter"},
        {"t-max", "30", "horizon"},
        {"dt", "0.001", "RK4 step"},
        {"sample-every", "0.1", "output cadence"},
        {"model", "ino", "ino | ada-ino | reg | oja"}},
       run_theory_ode},
      {{"theory", "pde"}, "evolve the Fokker-Planck density; CSV t,x,P_marginal,P_marginal_rescaled", pde_opts, run_theory_pde},
      {{"theory", "steady"},
       "steady state for (omega, tau)",
       {{"omega", "1", "SNR parameter"}, {"tau", "0.5", "learning rate"}},
       run_theory_steady},
      {{"theory", "phase"},
       "steady-state table over an omega grid",
       {{"tau", "0.5", "learning rate"}, {"omega-grid", "0:1:0.05", "omega values (list or start:stop:step)"}},
       run_theory_phase},
      {{"sweep", "omega"},
       "empirical vs theoretical steady |Q| over omega",
       with(experiment_options("10000", "20", "150"), {{"omega-grid", "0.1,0.15,0.2,0.3,0.5,1", "omega values"}}),
       run_sweep_omega},
      {{"sweep", "lambda0"},
       "INO-PCA over initial norms",
       with(experiment_options("10000", "20", "30"),
            {{"lambda0-list", "0.1,0.25,0.5,1,2,4", "initial norms"}, {"t-eval", "3", "comparison time"}}),
       run_sweep_lambda0},
      {{"switch"},
       "non-stationary run with an abrupt signal change",
       with(experiment_options("10000", "20", "100"),
            {{"switch-t", "50", "switch time"},
             {"xi2", "sparse:0.05", "signal law after the switch"},
             {"algos", "ada-ino,ccipca:4,adaoja:1", "comma-separated algorithms"},
             {"window", "20", "recovery window after the switch"}}),
       run_switch},
      {{"multipc"},
       "multi-component tracking; CSV t,distance_mean,distance_std",
       {{"p", "512", "dimension (synthetic source)"},
        {"r", "2", "components"},
        {"omegas", "2,1", "spike strengths (synthetic source)"},
        {"xi", "uniform", "spike entry law"},
        {"tau", "0.05", "learning rate (used when --algo omits its parameter)"},
        {"algo", "ino", "ino[:T] reg[:T] oja[:T] krasulina[:T] ccipca[:L] adaoja[:B0]"},
        {"t-max", "200", "horizon"},
        {"sample-every", "1", "trace cadence"},
        {"trials", "1", "trials"},
        {"seed", "1", "master seed"},
        {"threads", "0", "worker threads"},
        {"data", "", "CSV data matrix, one sample per row (default: synthetic)"}},
       run_multipc_cmd},
      {{"check", "moments"},
       "resample increments at a frozen state and compare with drift/diffusion",
       {{"p", "500", "dimension"},
        {"omega", "1", "SNR parameter"},
        {"tau", "0.5", "learning rate"},
        {"xi", "uniform", "signal law"},
        {"init", "warm:0.5", "frozen state construction"},
        {"lambda0", "1.5", "frozen norm parameter"},
        {"resamples", "10000", "observations drawn at the frozen state"},
        {"seed", "1", "seed"}},
       run_check_moments},
      {{"reproduce", "fig1"}, "density snapshots vs coordinate histograms", reproduce_opts, run_fig1},
      {{"reproduce", "fig2"}, "Q and lambda trajectories vs ODE", reproduce_opts, run_fig2},
      {{"reproduce", "fig4"}, "steady densities and phase transition", reproduce_opts, run_fig4},
      {{"reproduce", "fig5"}, "adaptive vs fixed learning rates", reproduce_opts, run_fig5},
      {{"reproduce", "fig6"}, "initial-norm sweep and phase portrait", reproduce_opts, run_fig6},
      {{"reproduce", "fig7"}, "recovery after an abrupt signal change", reproduce_opts, run_fig7},
  };
  for (auto& c : cmds) {
    c.options.push_back({"out", "", "output directory (default: primary CSV to stdout)"});
    c.options.push_back({"config", "", "TOML file with settings (flag names as keys)"});
  }
  return cmds;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

inline int run_command(const Command& cmd, const Settings& settings, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  Output sink(settings.get("out"), out, err);
  cmd.run(settings, sink);
  if (sink.to_disk()) {
    RunManifest m;
    m.command = cmd.path;
    m.settings = settings.resolved();
    if (m.settings.count("seed")) m.seed = settings.integer("seed");
    m.outputs = sink.written();
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    nlohmann::json j = m.to_json();
    j["summary"] = sink.summaries();
    write_text(sink.dir() / "run.json", j.dump(2) + "\n");
  }
  return kOk;
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int replay(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"rerun a manifest", "inopca replay"};
  std::string path;
  std::string out_dir;
  app.add_option("manifest", path, "run.json written by an earlier command")->required();
  app.add_option("--out", out_dir, "output directory (default: the manifest's own)");
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse manifest '" + path + "': " + e.what());
  }
  const RunManifest m = RunManifest::from_json(j);
  std::vector<std::string> argv = m.argv();
  const std::string dir = out_dir.empty() ? (m.settings.count("out") ? m.settings.at("out") : "") : out_dir;
  if (!dir.empty()) {
    argv.push_back("--out");
    argv.push_back(dir);
  }
  return dispatch(argv, out, err);
}

inline std::string usage(const std::vector<Command>& cmds) {
  std::string s = "usage: inopca <command> [options]\n\ncommands:\n";
  for (const auto& c : cmds) s += "  " + join(c.path, " ") + std::string(std::max<std::size_t>(2, 20 - join(c.path, " ").size()), ' ') + c.help + "\n";
  s += "  replay MANIFEST     rerun a run.json manifest\n\nRun 'inopca <command> --help' for its flags.\n";
  return s;
}

/// Entry point behind the binary. Exit codes: 0 success, 2 configuration error, 3 numerical failure.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto cmds = commands();
  try {
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
      (args.empty() ? err : out) << usage(cmds);
      return args.empty() ? kConfig : kOk;
    }
    if (args[0] == "--version") {
      out << "inopca " << kToolVersion << " (" << git_describe() << ")\n";
      return kOk;
    }
    if (args[0] == "replay") return replay({args.begin() + 1, args.end()}, out, err);

    const Command* cmd = nullptr;
    std::size_t consumed = 0;
    for (const auto& c : cmds) {
      if (args.size() < c.path.size()) continue;
      if (std::equal(c.path.begin(), c.path.end(), args.begin())) {
        cmd = &c;
        consumed = c.path.size();
      }
    }
    if (!cmd) {
      err << "error: unknown command '" << join({args.begin(), args.begin() + std::min<std::size_t>(args.size(), 2)}, " ")
          << "'\n\n"
          << usage(cmds);
      return kConfig;
    }

    CLI::App app{cmd->help, "inopca " + join(cmd->path, " ")};
    std::map<std::string, std::string> storage;
    std::map<std::string, bool> flags;
    for (const auto& o : cmd->options) {
      const std::string def = o.default_value.empty() ? "none" : o.default_value;
      if (o.is_flag) app.add_flag("--" + o.name, flags[o.name], o.help);
      else app.add_option("--" + o.name, storage[o.name], o.help)->default_str(def);
    }
    std::vector<std::string> rest(args.begin() + static_cast<std::ptrdiff_t>(consumed), args.end());
    std::reverse(rest.begin(), rest.end());
    try {
      app.parse(rest);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\nRun 'inopca " << join(cmd->path, " ") << " --help' for the flag list.\n";
      return kConfig;
    }

    Settings s;
    for (const auto& o : cmd->options) {
      s.defaults[o.name] = o.default_value;
      if (app.count("--" + o.name) > 0) s.given[o.name] = o.is_flag ? (flags[o.name] ? "true" : "false") : storage[o.name];
    }
    if (s.has("config")) {
      s.file = load_toml_settings(s.get("config"));
      for (const auto& [k, v] : s.file)
        if (!s.defaults.count(k) || k == "config")
          throw ConfigError(s.get("config") + ": unknown setting '" + k + "' for '" + join(cmd->path, " ") + "'");
    }
    return run_command(*cmd, s, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DomainError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace inopca::cli
