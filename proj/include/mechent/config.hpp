#ifndef MECHENT_CONFIG_HPP
#define MECHENT_CONFIG_HPP

// Plain-text run configuration: one `key = value` per line, '#' comments.
// Rates are given in s^-1 (units = s) or in multiples of kappa_scale
// (units = kappa); times follow the same choice (s or 1/kappa_scale).
// A value may carry an explicit unit suffix ("s^-1", "s", "kappa",
// "1/kappa"), which must agree with the declared units.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mechent/core.hpp"
#include "mechent/detection.hpp"
#include "mechent/full_model.hpp"
#include "mechent/rwa_model.hpp"

namespace mechent {

enum class Task { evolve, steady, sweep, floquet, detect };
enum class Model { rwa, full, closedform };

inline const char* to_string(Task t) {
  switch (t) {
    case Task::evolve: return "evolve";
    case Task::steady: return "steady";
    case Task::sweep: return "sweep";
    case Task::floquet: return "floquet";
    case Task::detect: return "detect";
  }
  return "?";
}

inline const char* to_string(Model m) {
  switch (m) {
    case Model::rwa: return "rwa";
    case Model::full: return "full";
    case Model::closedform: return "closedform";
  }
  return "?";
}

struct GridSpec {
  double t_end = 0.0;  // s
  double t_min = 0.0;  // s, first nonzero sample of a log grid
  int n_points = 201;
  bool log = false;

  std::vector<double> times() const {
    if (log) return log_grid(t_min, t_end, n_points - 1, true);
    return linear_grid(0.0, t_end, n_points);
  }
};

struct SweepAxis {
  std::string name;
  double from = 0.0;  // internal units (s^-1 for rates)
  double to = 0.0;
  int n = 0;
  bool log = false;

  double value(int k) const {
    if (n == 1) return from;
    const double f = double(k) / (n - 1);
    return log ? from * std::pow(to / from, f) : from + (to - from) * f;
  }
};

enum class SweepTarget { steady, final, decoupled, approx };

struct RunConfig {
  Task task = Task::steady;
  Model model = Model::rwa;
  bool kappa_units = false;
  double kappa_scale = 1e5;
  SystemParams params;
  bool couplings_from_drives = false;
  GridSpec grid;
  int order = 6;
  FieldMode field_mode = FieldMode::transient;
  std::uint64_t seed = 1;
  std::vector<SweepAxis> sweeps;
  SweepTarget sweep_target = SweepTarget::steady;
  ProbeConfig probe;
  int n_boot = 200;
  bool dump_records = false;
  /// every resolved key in canonical order, values in the declared units
  std::vector<std::pair<std::string, std::string>> entries;

  double time_unit() const { return kappa_units ? 1.0 / kappa_scale : 1.0; }
  double rate_unit() const { return kappa_units ? kappa_scale : 1.0; }

  std::string to_text() const {
    std::string s;
    for (const auto& [k, v] : entries) s += k + " = " + v + "\n";
    return s;
  }
};

namespace detail {

inline const std::vector<std::string>& rate_keys() {
  static const std::vector<std::string> k{"kappa", "omega1", "omega2", "gamma", "gamma1", "gamma2",
                                          "G1",    "G2",     "g",      "E1",    "E2",     "Delta",
                                          "Delta0", "Gp1",   "Gp2",    "probe_kappa"};
  return k;
}

inline const std::vector<std::string>& key_order() {
  static const std::vector<std::string> k{
      "task",   "model",      "units",   "kappa_scale", "kappa",       "omega1",    "omega2",
      "gamma",  "gamma1",     "gamma2",  "G1",          "G2",          "g",         "E1",
      "E2",     "Delta",      "Delta0",  "nbar1",       "nbar2",       "t_end",     "t_min",
      "n_points", "grid",     "order",   "field_mode",  "seed",        "sweep1",    "sweep2",
      "sweep_target", "Gp1",  "Gp2",     "probe_kappa", "n_samples",   "phase_grid", "n_boot",
      "dump_records"};
  return k;
}

inline bool is_rate_key(const std::string& k) {
  const auto& r = rate_keys();
  return std::find(r.begin(), r.end(), k) != r.end();
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct RawEntry {
  std::string value;
  int line = 0;
};

class Reader {
public:
  Reader(std::map<std::string, RawEntry> raw, bool kappa_units)
      : raw_(std::move(raw)), kappa_units_(kappa_units) {}

  bool has(const std::string& k) const { return raw_.count(k) > 0; }

  std::string where(const std::string& k) const {
    auto it = raw_.find(k);
    return it == raw_.end() ? "key '" + k + "'" : "line " + std::to_string(it->second.line) + ", key '" + k + "'";
  }

  std::string str(const std::string& k) const { return raw_.at(k).value; }

  /// numeric value with optional unit suffix checked against the declared units
  double number(const std::string& k, const std::string& kind) const {
    std::string v = str(k);
    std::string suffix;
    const auto sp = v.find_first_of(" \t");
    if (sp != std::string::npos) {
      suffix = trim(v.substr(sp));
      v = v.substr(0, sp);
    }
    if (!suffix.empty()) {
      std::string want;
      if (kind == "rate") want = kappa_units_ ? "kappa" : "s^-1";
      else if (kind == "time") want = kappa_units_ ? "1/kappa" : "s";
      if (want.empty() || suffix != want)
        throw ConfigError(where(k) + ": unit mismatch, '" + suffix + "' given but " +
                          (want.empty() ? std::string("the value is dimensionless")
                                        : "declared units require '" + want + "'"));
    }
    std::size_t pos = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != v.size() || v.empty()) throw ConfigError(where(k) + ": not a number: '" + str(k) + "'");
    if (!std::isfinite(d)) throw ConfigError(where(k) + ": value must be finite");
    return d;
  }

  long long integer(const std::string& k) const {
    const double d = number(k, "none");
    if (d != std::floor(d)) throw ConfigError(where(k) + ": expected an integer");
    return static_cast<long long>(d);
  }

private:
  std::map<std::string, RawEntry> raw_;
  bool kappa_units_;
};

}  // namespace detail

/// Extracts the embedded configuration from a CSV written by write_csv.
inline std::string config_text_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) != 0) break;
    const std::string body = detail::trim(line.substr(1));
    if (body.empty() || body[0] == '@' || body.find('=') == std::string::npos) continue;
    out += body + "\n";
  }
  return out;
}

inline RunConfig parse_config(const std::string& text) {
  using detail::trim;
  std::map<std::string, detail::RawEntry> raw;
  const auto& known = detail::key_order();
  std::istringstream in(text);
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(ln) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("line " + std::to_string(ln) + ": unknown key '" + key + "'");
    if (raw.count(key))
      throw ConfigError("line " + std::to_string(ln) + ": duplicate key '" + key + "' (first on line " +
                        std::to_string(raw[key].line) + ")");
    if (value.empty()) throw ConfigError("line " + std::to_string(ln) + ", key '" + key + "': empty value");
    raw[key] = {value, ln};
  }

  auto require = [&](const std::string& k) {
    if (!raw.count(k)) throw ConfigError("missing required key '" + k + "'");
  };
  require("task");
  require("units");

  RunConfig cfg;
  const std::string units = raw["units"].value;
  if (units == "kappa") cfg.kappa_units = true;
  else if (units != "s")
    throw ConfigError("line " + std::to_string(raw["units"].line) + ": units must be 's' or 'kappa'");

  const detail::Reader rd(raw, cfg.kappa_units);
  if (rd.has("kappa_scale")) {
    if (!cfg.kappa_units) throw ConfigError(rd.where("kappa_scale") + ": unit mismatch, kappa_scale needs units = kappa");
    cfg.kappa_scale = rd.number("kappa_scale", "rate_scale");
    if (!(cfg.kappa_scale > 0.0)) throw ConfigError(rd.where("kappa_scale") + ": must be positive");
  }

  const std::string task = rd.str("task");
  if (task == "evolve") cfg.task = Task::evolve;
  else if (task == "steady") cfg.task = Task::steady;
  else if (task == "sweep") cfg.task = Task::sweep;
  else if (task == "floquet") cfg.task = Task::floquet;
  else if (task == "detect") cfg.task = Task::detect;
  else throw ConfigError(rd.where("task") + ": task must be one of evolve|steady|sweep|floquet|detect");

  if (rd.has("model")) {
    const std::string m = rd.str("model");
    if (m == "rwa") cfg.model = Model::rwa;
    else if (m == "full") cfg.model = Model::full;
    else if (m == "closedform") cfg.model = Model::closedform;
    else throw ConfigError(rd.where("model") + ": model must be rwa|full|closedform");
  }

  // values in declared units, kept for the canonical dump
  std::map<std::string, std::string> out;
  auto rate = [&](const std::string& k, double def, bool record_default) {
    if (rd.has(k)) {
      const double v = rd.number(k, "rate");
      out[k] = detail::fmt(v);
      return v * cfg.rate_unit();
    }
    if (record_default) out[k] = detail::fmt(def);
    return def * cfg.rate_unit();
  };
  auto plain = [&](const std::string& k, double def) {
    const double v = rd.has(k) ? rd.number(k, "none") : def;
    out[k] = detail::fmt(v);
    return v;
  };

  require("kappa");
  auto& p = cfg.params;
  p.kappa = rate("kappa", 0.0, true);
  p.omega1 = rate("omega1", 0.0, true);
  p.omega2 = rate("omega2", 0.0, true);
  if (rd.has("gamma") && (rd.has("gamma1") || rd.has("gamma2")))
    throw ConfigError(rd.where("gamma") + ": give either gamma or gamma1/gamma2, not both");
  if (rd.has("gamma")) {
    p.gamma1 = p.gamma2 = rate("gamma", 0.0, true);
  } else {
    p.gamma1 = rate("gamma1", 0.0, true);
    p.gamma2 = rate("gamma2", 0.0, true);
  }
  p.nbar1 = plain("nbar1", 0.0);
  p.nbar2 = plain("nbar2", 0.0);
  p.g = rate("g", 0.0, true);

  const bool g_path = rd.has("G1") || rd.has("G2");
  const bool e_path = rd.has("E1") || rd.has("E2") || rd.has("Delta0");
  if (g_path && e_path)
    throw ConfigError(rd.where(rd.has("E1") ? "E1" : rd.has("E2") ? "E2" : "Delta0") +
                      ": couplings must be given either as G1, G2 (with Delta) or as E1, E2 (with Delta0 and g), not both");
  if (!g_path && !e_path) throw ConfigError("missing coupling specification: give G1, G2 or E1, E2");
  if (g_path) {
    require("G1");
    require("G2");
    p.G1 = rate("G1", 0.0, true);
    p.G2 = rate("G2", 0.0, true);
    p.Delta = rate("Delta", 0.0, true);
  } else {
    require("E1");
    require("E2");
    require("Delta0");
    if (!(p.g > 0.0)) throw ConfigError(rd.where("g") + ": drive amplitudes need g > 0");
    if (rd.has("Delta")) throw ConfigError(rd.where("Delta") + ": with E1, E2 the detuning is set by Delta0");
    cfg.couplings_from_drives = true;
    p.E1 = rate("E1", 0.0, true);
    p.E2 = rate("E2", 0.0, true);
    p.Delta0 = rate("Delta0", 0.0, true);
    // lowest-order fields fix the shifted detuning and the effective couplings
    const auto f = lowest_order_fields(p);
    p.Delta = detuning_shift(p.Delta0, p, f.beta_dc);
    const auto gc = effective_couplings(p);
    p.G1 = gc.abs1();
    p.G2 = gc.abs2();
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (cfg.task == Task::evolve) {
    require("t_end");
    cfg.grid.t_end = rd.number("t_end", "time") * cfg.time_unit();
    out["t_end"] = detail::fmt(rd.number("t_end", "time"));
    if (!(cfg.grid.t_end > 0.0)) throw ConfigError(rd.where("t_end") + ": must be positive");
    cfg.grid.n_points = static_cast<int>(rd.has("n_points") ? rd.integer("n_points") : 201);
    out["n_points"] = std::to_string(cfg.grid.n_points);
    if (cfg.grid.n_points < 2) throw ConfigError(rd.where("n_points") + ": need at least 2 points");
    const std::string grid = rd.has("grid") ? rd.str("grid") : "linear";
    if (grid != "linear" && grid != "log") throw ConfigError(rd.where("grid") + ": grid must be linear|log");
    out["grid"] = grid;
    cfg.grid.log = grid == "log";
    if (cfg.grid.log) {
      const double tmin = rd.has("t_min") ? rd.number("t_min", "time") : 1e-3 * rd.number("t_end", "time");
      out["t_min"] = detail::fmt(tmin);
      cfg.grid.t_min = tmin * cfg.time_unit();
      if (!(cfg.grid.t_min > 0.0 && cfg.grid.t_min < cfg.grid.t_end))
        throw ConfigError(rd.where("t_min") + ": need 0 < t_min < t_end");
    } else if (rd.has("t_min")) {
      throw ConfigError(rd.where("t_min") + ": t_min only applies to grid = log");
    }
  }

  if (cfg.model == Model::full || cfg.task == Task::floquet) {
    cfg.order = static_cast<int>(rd.has("order") ? rd.integer("order") : 6);
    if (cfg.order < 0 || cfg.order > kMaxOrder) throw ConfigError(rd.where("order") + ": order must lie in [0, 8]");
    out["order"] = std::to_string(cfg.order);
    const std::string fm = rd.has("field_mode") ? rd.str("field_mode") : "transient";
    if (fm == "transient") cfg.field_mode = FieldMode::transient;
    else if (fm == "steady") cfg.field_mode = FieldMode::steady;
    else throw ConfigError(rd.where("field_mode") + ": field_mode must be transient|steady");
    out["field_mode"] = fm;
    if (!(p.g > 0.0)) throw ConfigError("the full model needs g > 0");
  }

  if (cfg.task == Task::sweep) {
    require("sweep1");
    for (const char* key : {"sweep1", "sweep2"}) {
      if (!rd.has(key)) continue;
      std::istringstream ss(rd.str(key));
      SweepAxis ax;
      std::string from, to, n, scale;
      ss >> ax.name >> from >> to >> n >> scale;
      if (n.empty()) throw ConfigError(rd.where(key) + ": expected 'name from to n [log]'");
      const bool known_name = ax.name == "r" || ax.name == "ratio" || ax.name == "nbar1" ||
                              ax.name == "nbar2" || detail::is_rate_key(ax.name);
      if (!known_name) throw ConfigError(rd.where(key) + ": cannot sweep '" + ax.name + "'");
      try {
        ax.from = std::stod(from);
        ax.to = std::stod(to);
        ax.n = std::stoi(n);
      } catch (const std::exception&) {
        throw ConfigError(rd.where(key) + ": expected 'name from to n [log]'");
      }
      if (ax.n < 1) throw ConfigError(rd.where(key) + ": need at least one point");
      if (!scale.empty() && scale != "log") throw ConfigError(rd.where(key) + ": trailing token must be 'log'");
      ax.log = scale == "log";
      if (ax.log && !(ax.from > 0.0 && ax.to > 0.0)) throw ConfigError(rd.where(key) + ": log sweep needs positive ends");
      if (detail::is_rate_key(ax.name)) {
        ax.from *= cfg.rate_unit();
        ax.to *= cfg.rate_unit();
      }
      out[key] = rd.str(key);
      cfg.sweeps.push_back(ax);
    }
    const std::string tg = rd.has("sweep_target") ? rd.str("sweep_target") : "steady";
    if (tg == "steady") cfg.sweep_target = SweepTarget::steady;
    else if (tg == "final") cfg.sweep_target = SweepTarget::final;
    else if (tg == "decoupled") cfg.sweep_target = SweepTarget::decoupled;
    else if (tg == "approx") cfg.sweep_target = SweepTarget::approx;
    else throw ConfigError(rd.where("sweep_target") + ": sweep_target must be steady|final|decoupled|approx");
    out["sweep_target"] = tg;
    if (cfg.sweep_target == SweepTarget::final) {
      require("t_end");
      cfg.grid.t_end = rd.number("t_end", "time") * cfg.time_unit();
      out["t_end"] = detail::fmt(rd.number("t_end", "time"));
    }
    if ((cfg.sweep_target == SweepTarget::decoupled || cfg.sweep_target == SweepTarget::approx) &&
        (cfg.sweeps.size() != 1 || cfg.sweeps[0].name != "r"))
      throw ConfigError(rd.where("sweep_target") + ": decoupled/approx targets need a single sweep over r");
  }

  if (cfg.task == Task::detect) {
    for (const char* k : {"Gp1", "Gp2", "n_samples"}) require(k);
    cfg.probe.Gp1 = rate("Gp1", 0.0, true);
    cfg.probe.Gp2 = rate("Gp2", 0.0, true);
    cfg.probe.kappa = rd.has("probe_kappa") ? rate("probe_kappa", 0.0, true) : p.kappa;
    if (!rd.has("probe_kappa")) out["probe_kappa"] = detail::fmt(p.kappa / cfg.rate_unit());
    cfg.probe.n_samples = rd.integer("n_samples");
    out["n_samples"] = std::to_string(cfg.probe.n_samples);
    if (rd.has("phase_grid")) {
      cfg.probe.phase_grid.clear();
      std::string item;
      std::istringstream ss(rd.str("phase_grid"));
      while (std::getline(ss, item, ',')) {
        try {
          cfg.probe.phase_grid.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw ConfigError(rd.where("phase_grid") + ": expected comma-separated phases in rad");
        }
      }
    }
    std::string pg;
    for (double ph : cfg.probe.phase_grid) pg += (pg.empty() ? "" : ",") + detail::fmt(ph);
    out["phase_grid"] = pg;
    cfg.n_boot = static_cast<int>(rd.has("n_boot") ? rd.integer("n_boot") : 200);
    if (cfg.n_boot < 2) throw ConfigError(rd.where("n_boot") + ": need at least 2 resamples");
    out["n_boot"] = std::to_string(cfg.n_boot);
    const std::string dr = rd.has("dump_records") ? rd.str("dump_records") : "false";
    if (dr != "true" && dr != "false") throw ConfigError(rd.where("dump_records") + ": expected true|false");
    cfg.dump_records = dr == "true";
    out["dump_records"] = dr;
    try {
      cfg.probe.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (cfg.task == Task::detect) {
    if (rd.has("seed")) {
      const std::string s = rd.str("seed");
      try {
        std::size_t pos = 0;
        cfg.seed = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw ConfigError(rd.where("seed") + ": expected an unsigned 64-bit integer");
      }
    }
    out["seed"] = std::to_string(cfg.seed);
  }

  // keys that were given but have no role in this task are rejected as well
  for (const auto& k : known) {
    if (!rd.has(k) || out.count(k) || k == "task" || k == "model" || k == "units" || k == "kappa_scale") continue;
    throw ConfigError(rd.where(k) + ": key has no effect for task '" + task + "' with model '" +
                      to_string(cfg.model) + "'");
  }

  cfg.entries.push_back({"task", task});
  cfg.entries.push_back({"model", to_string(cfg.model)});
  cfg.entries.push_back({"units", units});
  if (cfg.kappa_units) cfg.entries.push_back({"kappa_scale", detail::fmt(cfg.kappa_scale)});
  for (const auto& k : known)
    if (out.count(k)) cfg.entries.push_back({k, out[k]});
  return cfg;
}

/// Replaces (or appends) `key = value` in a configuration text.
inline std::string override_key(const std::string& text, const std::string& key, const std::string& value) {
  std::istringstream in(text);
  std::string line, out;
  bool done = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    const auto hash = line.find('#');
    if (eq != std::string::npos && (hash == std::string::npos || hash > eq) &&
        detail::trim(line.substr(0, eq)) == key) {
      out += key + " = " + value + "\n";
      done = true;
    } else {
      out += line + "\n";
    }
  }
  if (!done) out += key + " = " + value + "\n";
  return out;
}

}  // namespace mechent

#endif  // MECHENT_CONFIG_HPP
