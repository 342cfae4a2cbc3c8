#ifndef MECHENT_RUNNER_HPP
#define MECHENT_RUNNER_HPP

// Executes a RunConfig and produces CSV tables.

#include <atomic>
#include <cmath>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mechent/closed_form.hpp"
#include "mechent/config.hpp"
#include "mechent/csv.hpp"
#include "mechent/detection.hpp"
#include "mechent/full_model.hpp"
#include "mechent/rwa_model.hpp"

namespace mechent {

struct RunOutput {
  /// file name (relative to the output directory) and its table
  std::vector<std::pair<std::string, CsvTable>> files;
  /// set when a trajectory was cut short; the partial table is still in files
  std::optional<NumericError> failure;
};

namespace detail {

inline CsvTable table_for(const RunConfig& cfg, std::vector<std::string> columns) {
  CsvTable t;
  t.columns = std::move(columns);
  t.config = cfg.entries;
  return t;
}

inline CsvTable trajectory_table(const RunConfig& cfg, const EntanglementTrajectory& traj) {
  std::vector<std::string> cols{"t_s"};
  if (cfg.kappa_units) cols.push_back("kappa_t");
  for (const char* c : {"EN", "photon_number", "occupancy1", "occupancy2"}) cols.push_back(c);
  auto t = table_for(cfg, cols);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    if (cfg.kappa_units) row.push_back(traj.times[k] / cfg.time_unit());
    for (double v : {traj.EN[k], traj.photon_number[k], traj.occupancy1[k], traj.occupancy2[k]}) row.push_back(v);
    t.add_row(row);
  }
  if (traj.aborted_at) t.meta.push_back({"aborted_at_s", CsvTable::cell(*traj.aborted_at)});
  return t;
}

inline SystemParams drive_params(const RunConfig& cfg, CsvTable* meta_sink = nullptr) {
  if (cfg.couplings_from_drives) return cfg.params;
  const auto cal = calibrate_drives(cfg.params, cfg.order);
  if (meta_sink) {
    meta_sink->meta.push_back({"E1_s", CsvTable::cell(cal.params.E1)});
    meta_sink->meta.push_back({"E2_s", CsvTable::cell(cal.params.E2)});
    meta_sink->meta.push_back({"Delta0_s", CsvTable::cell(cal.params.Delta0)});
    meta_sink->meta.push_back({"calibration_residual", CsvTable::cell(cal.residual)});
  }
  return cal.params;
}

inline EntanglementTrajectory closed_form_trajectory(const SystemParams& p, std::span<const double> times) {
  if (p.kappa != 0.0 || p.gamma1 != 0.0 || p.gamma2 != 0.0)
    throw std::invalid_argument("the closed-form model is dissipationless: set kappa = 0 and gamma = 0");
  const auto c0 = initial_state(p);
  EntanglementTrajectory traj;
  for (double t : times) {
    SymplecticMap s;
    if (p.G1 == p.G2) {
      s = equal_coupling_map(t, p.G1, p.Delta);
    } else {
      if (p.G1 > p.G2) throw std::invalid_argument("the closed-form model needs G1 <= G2");
      const auto sq = SqueezeParams::from_couplings(p.G1, p.G2);
      s = hamiltonian_map(t, sq.r, sq.calG, p.Delta);
    }
    traj.record(t, s.apply(c0));
  }
  return traj;
}

inline void apply_axis(SystemParams& p, const std::string& name, double v) {
  if (name == "r") {
    if (!(v > 0.0)) throw std::invalid_argument("r must be positive");
    p.G2 = p.G1 / std::tanh(v);
  } else if (name == "ratio") {
    p.G1 = v * p.G2;
  } else if (name == "gamma") {
    p.gamma1 = p.gamma2 = v;
  } else if (name == "kappa") { p.kappa = v;
  } else if (name == "omega1") { p.omega1 = v;
  } else if (name == "omega2") { p.omega2 = v;
  } else if (name == "gamma1") { p.gamma1 = v;
  } else if (name == "gamma2") { p.gamma2 = v;
  } else if (name == "G1") { p.G1 = v;
  } else if (name == "G2") { p.G2 = v;
  } else if (name == "g") { p.g = v;
  } else if (name == "Delta") { p.Delta = v;
  } else if (name == "nbar1") { p.nbar1 = v;
  } else if (name == "nbar2") { p.nbar2 = v;
  } else {
    throw std::invalid_argument("parameter '" + name + "' cannot be swept");
  }
}

struct SweepPoint {
  std::vector<double> coords;
  bool ok = false;
  bool stable = false;
  double max_re_eig = 0.0;
  double EN = 0.0;
  std::string status;
};

inline SweepPoint sweep_point(const RunConfig& cfg, std::vector<double> coords) {
  SweepPoint pt;
  pt.coords = coords;
  try {
    SystemParams p = cfg.params;
    for (std::size_t a = 0; a < cfg.sweeps.size(); ++a) apply_axis(p, cfg.sweeps[a].name, coords[a]);
    p.validate();
    const auto st = stability_check(p);
    pt.stable = st.stable;
    pt.max_re_eig = st.max_re_eig;
    switch (cfg.sweep_target) {
      case SweepTarget::steady:
        if (st.stable) pt.EN = log_negativity(steady_state(p).reduced({1, 2}));
        break;
      case SweepTarget::final: {
        const std::vector<double> t{0.0, cfg.grid.t_end};
        pt.EN = evolve(initial_state(p), p, t).EN.back();
        break;
      }
      case SweepTarget::decoupled:
      case SweepTarget::approx: {
        const double c1 = cooperativity(p.G1, p.kappa, p.gamma1);
        const double r = coords[0];
        pt.EN = en_from_nu(cfg.sweep_target == SweepTarget::decoupled ? nu_exact_decoupled(r, c1, p)
                                                                      : nu_approx(r, c1, p.nbar1, p.nbar2));
        break;
      }
    }
    pt.ok = true;
    pt.status = pt.stable ? "ok" : "unstable";
  } catch (const std::exception& e) {
    pt.status = std::string("error: ") + e.what();
  }
  return pt;
}

inline RunOutput run_sweep(const RunConfig& cfg) {
  if (cfg.model != Model::rwa) throw ConfigError("sweeps are available for model = rwa only");
  std::vector<std::vector<double>> coords;
  const auto& a0 = cfg.sweeps[0];
  const int n1 = cfg.sweeps.size() > 1 ? cfg.sweeps[1].n : 1;
  for (int i = 0; i < a0.n; ++i)
    for (int j = 0; j < n1; ++j) {
      std::vector<double> c{a0.value(i)};
      if (cfg.sweeps.size() > 1) c.push_back(cfg.sweeps[1].value(j));
      coords.push_back(c);
    }

  std::vector<SweepPoint> results(coords.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < coords.size(); k = next++) results[k] = sweep_point(cfg, coords[k]);
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), 16u));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<std::string> cols;
  for (const auto& ax : cfg.sweeps) cols.push_back(ax.name);
  for (const char* c : {"stable", "max_re_eig", "EN", "status"}) cols.push_back(c);
  auto table = table_for(cfg, cols);
  for (const auto& pt : results) {
    std::vector<std::string> row;
    for (std::size_t a = 0; a < pt.coords.size(); ++a) {
      const double u = detail::is_rate_key(cfg.sweeps[a].name) ? cfg.rate_unit() : 1.0;
      row.push_back(CsvTable::cell(pt.coords[a] / u));
    }
    row.push_back(pt.ok ? (pt.stable ? "1" : "0") : "");
    row.push_back(pt.ok ? CsvTable::cell(pt.max_re_eig) : "");
    // unstable rows carry the flag and max_re_eig instead of a steady-state E_N
    const bool has_en = pt.ok && (pt.stable || cfg.sweep_target != SweepTarget::steady);
    row.push_back(has_en ? CsvTable::cell(pt.EN) : "");
    row.push_back(pt.status);
    table.add_row(std::move(row));
  }
  return {{{"sweep.csv", std::move(table)}}, std::nullopt};
}

inline RunOutput run_steady(const RunConfig& cfg) {
  if (cfg.model != Model::rwa) throw ConfigError("steady requires model = rwa");
  const auto& p = cfg.params;
  const auto st = stability_check(p);
  const auto cm = steady_state(p);
  std::vector<std::string> cols{"EN", "photon_number", "occupancy1", "occupancy2", "max_re_eig"};
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) cols.push_back("c" + std::to_string(i) + std::to_string(j));
  auto t = table_for(cfg, cols);
  std::vector<double> row{log_negativity(cm.reduced({1, 2})), cm.occupancy(0), cm.occupancy(1), cm.occupancy(2),
                          st.max_re_eig};
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) row.push_back(cm(i, j));
  t.add_row(row);
  return {{{"steady.csv", std::move(t)}}, std::nullopt};
}

inline RunOutput run_evolve(const RunConfig& cfg, bool keep_partial) {
  const auto times = cfg.grid.times();
  RunOutput out;
  switch (cfg.model) {
    case Model::rwa:
      out.files.push_back({"evolve.csv", trajectory_table(cfg, evolve(initial_state(cfg.params), cfg.params, times))});
      break;
    case Model::closedform:
      out.files.push_back({"evolve.csv", trajectory_table(cfg, closed_form_trajectory(cfg.params, times))});
      break;
    case Model::full: {
      CsvTable meta;
      const auto q = drive_params(cfg, &meta);
      FullEvolveOptions opt;
      opt.keep_partial = true;
      const auto traj = evolve_full(initial_state(cfg.params), q, times, cfg.order, cfg.field_mode, opt);
      auto t = trajectory_table(cfg, traj);
      t.meta.insert(t.meta.begin(), meta.meta.begin(), meta.meta.end());
      out.files.push_back({"evolve.csv", std::move(t)});
      if (traj.aborted_at && !keep_partial)
        out.failure = NumericError("covariance diverged; trajectory truncated", *traj.aborted_at);
      break;
    }
  }
  return out;
}

inline RunOutput run_floquet(const RunConfig& cfg) {
  CsvTable meta;
  const auto q = drive_params(cfg, &meta);
  const auto fl = floquet_exponents(q, cfg.order);
  auto t = table_for(cfg, {"index", "re", "im"});
  t.meta = meta.meta;
  t.meta.push_back({"period_s", CsvTable::cell(fl.period)});
  t.meta.push_back({"max_re", CsvTable::cell(fl.max_real())});
  t.meta.push_back({"rwa_max_re_eig", CsvTable::cell(stability_check(cfg.params).max_re_eig)});
  for (std::size_t k = 0; k < fl.exponents.size(); ++k)
    t.add_row({double(k), fl.exponents[k].real(), fl.exponents[k].imag()});
  return {{{"floquet.csv", std::move(t)}}, std::nullopt};
}

inline RunOutput run_detect(const RunConfig& cfg) {
  if (cfg.model != Model::rwa) throw ConfigError("detect requires model = rwa");
  const auto truth = steady_state(cfg.params).reduced({1, 2});
  const auto rec = simulate_homodyne(truth, cfg.probe, cfg.seed);
  const auto res = reconstruct_cm(rec, cfg.n_boot);
  auto t = table_for(cfg, {"quantity", "true", "estimate", "stderr"});
  static const char* q[] = {"x1", "p1", "x2", "p2"};
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j)
      t.add_row({std::string(q[i]) + q[j], CsvTable::cell(truth(i, j)), CsvTable::cell(res.cm_est(i, j)),
                 CsvTable::cell(res.stderr_cm(i, j))});
  t.add_row({"EN", CsvTable::cell(log_negativity(truth)), CsvTable::cell(res.EN_est), CsvTable::cell(res.EN_stderr)});
  t.meta.push_back({"backaction_negligible",
                    backaction_negligible(cfg.probe, cfg.params.G1, cfg.params.G2) ? "true" : "false"});
  for (const auto& w : res.warnings) t.meta.push_back({"warning", w});
  RunOutput out;
  out.files.push_back({"detect.csv", std::move(t)});
  if (cfg.dump_records) {
    auto r = table_for(cfg, {"mode", "phase_rad", "sample_index", "value"});
    long long idx = 0;
    for (const auto& s : rec.settings) {
      for (std::size_t i = 0; i < s.v1.size(); ++i, ++idx) {
        r.add_row({"1", CsvTable::cell(s.theta1), std::to_string(idx), CsvTable::cell(s.v1[i])});
        r.add_row({"2", CsvTable::cell(s.theta2), std::to_string(idx), CsvTable::cell(s.v2[i])});
      }
    }
    out.files.push_back({"records.csv", std::move(r)});
  }
  return out;
}

}  // namespace detail

/// Runs one configured task. With keep_partial a diverging full-model
/// trajectory is returned truncated instead of being reported as a failure.
inline RunOutput run_task(const RunConfig& cfg, bool keep_partial = false) {
  switch (cfg.task) {
    case Task::steady: return detail::run_steady(cfg);
    case Task::evolve: return detail::run_evolve(cfg, keep_partial);
    case Task::sweep: return detail::run_sweep(cfg);
    case Task::floquet: return detail::run_floquet(cfg);
    case Task::detect: return detail::run_detect(cfg);
  }
  throw ConfigError("unknown task");
}

}  // namespace mechent

#endif  // MECHENT_RUNNER_HPP
