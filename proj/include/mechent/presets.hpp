#ifndef MECHENT_PRESETS_HPP
#define MECHENT_PRESETS_HPP

// Parameter sets of the published figures. Each curve is a complete
// configuration text, so a written CSV header reproduces the curve.

#include <string>
#include <vector>

#include "mechent/config.hpp"
#include "mechent/runner.hpp"

namespace mechent {

struct FigureCurve {
  std::string name;
  std::string config;
};

inline const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> n{"fig2", "fig3", "fig4a", "fig4b", "fig4c", "fig5a", "fig5b", "fig5c"};
  return n;
}

struct Fig2Case {
  const char* label;
  double nbar1, nbar2, ratio;
};

inline const std::vector<Fig2Case>& fig2_cases() {
  static const std::vector<Fig2Case> c{{"i", 0.0, 0.0, 0.995},
                                       {"ii", 200.0, 100.0, 0.918},
                                       {"iii", 1000.0, 500.0, 0.82},
                                       {"iv", 2000.0, 1000.0, 0.75}};
  return c;
}

/// Fig. 2 parameters (s^-1): gamma = 10, kappa = G2 = 1e5, Delta = 1e3.
inline SystemParams fig2_params(const Fig2Case& c) {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = p.gamma2 = 10.0;
  p.G2 = 1e5;
  p.G1 = c.ratio * p.G2;
  p.Delta = 1e3;
  p.nbar1 = c.nbar1;
  p.nbar2 = c.nbar2;
  return p;
}

/// Fig. 3 parameters: gamma = 10, kappa = G1 = 1e5, Delta = 0, nbar = (200, 100).
inline SystemParams fig3_params() {
  SystemParams p;
  p.kappa = 1e5;
  p.gamma1 = p.gamma2 = 10.0;
  p.G1 = 1e5;
  p.G2 = p.G1 / std::tanh(1.5);
  p.nbar1 = 200.0;
  p.nbar2 = 100.0;
  return p;
}

struct Fig4Panel {
  double ratio, nbar1, nbar2;
};

struct Fig5Panel {
  double gamma, omega1, omega2, nbar1, nbar2;
};

inline Fig4Panel fig4_panel(char which) {
  switch (which) {
    case 'a': return {0.918, 200.0, 100.0};
    case 'b': return {0.82, 1000.0, 500.0};
    case 'c': return {0.75, 2000.0, 1000.0};
  }
  throw ConfigError(std::string("no Fig. 4 panel '") + which + "'");
}

inline Fig5Panel fig5_panel(char which) {
  switch (which) {
    case 'a': return {0.03, 58.0, 100.0, 2.0, 1.0};
    case 'b': return {0.01, 58.0, 100.0, 2.0, 1.0};
    case 'c': return {0.001, 51.0, 100.0, 20.0, 10.0};
  }
  throw ConfigError(std::string("no Fig. 5 panel '") + which + "'");
}

/// Fig. 4 settings in kappa units: G2 = 1, Delta = 0.01, gamma = g = 1e-4.
/// solid lines: (omega1, omega2) = (50, 100); dashed: (25, 50).
inline SystemParams fig4_params(char which, bool dashed) {
  const auto pn = fig4_panel(which);
  SystemParams p;
  p.kappa = 1.0;
  p.omega1 = dashed ? 25.0 : 50.0;
  p.omega2 = dashed ? 50.0 : 100.0;
  p.G2 = 1.0;
  p.G1 = pn.ratio;
  p.Delta = 0.01;
  p.gamma1 = p.gamma2 = 1e-4;
  p.g = 1e-4;
  p.nbar1 = pn.nbar1;
  p.nbar2 = pn.nbar2;
  return p;
}

/// Fig. 5 settings in kappa units: G1 = G2 = 1, g = 1e-4; Delta = 0.01 (solid) or 5 (dashed).
inline SystemParams fig5_params(char which, bool dashed) {
  const auto pn = fig5_panel(which);
  SystemParams p;
  p.kappa = 1.0;
  p.omega1 = pn.omega1;
  p.omega2 = pn.omega2;
  p.G1 = p.G2 = 1.0;
  p.Delta = dashed ? 5.0 : 0.01;
  p.gamma1 = p.gamma2 = pn.gamma;
  p.g = 1e-4;
  p.nbar1 = pn.nbar1;
  p.nbar2 = pn.nbar2;
  return p;
}

namespace detail {

inline std::string params_text(const SystemParams& p, bool with_omega, bool with_g) {
  std::string s = "kappa = " + fmt(p.kappa) + "\n";
  if (with_omega) s += "omega1 = " + fmt(p.omega1) + "\nomega2 = " + fmt(p.omega2) + "\n";
  s += "gamma = " + fmt(p.gamma1) + "\nG1 = " + fmt(p.G1) + "\nG2 = " + fmt(p.G2) + "\nDelta = " + fmt(p.Delta) +
       "\nnbar1 = " + fmt(p.nbar1) + "\nnbar2 = " + fmt(p.nbar2) + "\n";
  if (with_g) s += "g = " + fmt(p.g) + "\n";
  return s;
}

/// red (RWA), green (steady fields, order 1) and blue (transient fields, order 6) curves
inline std::vector<FigureCurve> model_comparison(const std::string& stem, const SystemParams& p, double t_end,
                                                 const std::string& tag) {
  const std::string base = "task = evolve\nunits = kappa\nkappa_scale = 100000\n" + params_text(p, true, true) +
                           "t_end = " + fmt(t_end) + "\nn_points = 201\ngrid = linear\n";
  return {{stem + "_" + tag + "_rwa", "model = rwa\n" + base},
          {stem + "_" + tag + "_steady_order1", "model = full\norder = 1\nfield_mode = steady\n" + base},
          {stem + "_" + tag + "_transient_order6", "model = full\norder = 6\nfield_mode = transient\n" + base}};
}

}  // namespace detail

/// Time window of the Fig. 2 and Fig. 4 curves: 10 t_s.
inline double fig_window(const SystemParams& p) { return 10.0 * settling_time(p); }

inline std::vector<FigureCurve> figure_curves(const std::string& name) {
  using detail::fmt;
  std::vector<FigureCurve> out;
  if (name == "fig2") {
    for (const auto& c : fig2_cases()) {
      const auto p = fig2_params(c);
      const double te = fig_window(p);
      out.push_back({std::string("fig2_case_") + c.label,
                     "task = evolve\nmodel = rwa\nunits = s\n" + detail::params_text(p, false, false) +
                         "t_end = " + fmt(te) + "\nt_min = " + fmt(te * 1e-4) + "\nn_points = 201\ngrid = log\n"});
    }
  } else if (name == "fig3") {
    const auto p = fig3_params();
    const std::string base = "task = sweep\nmodel = rwa\nunits = s\n" + detail::params_text(p, false, false) +
                             "sweep1 = r 0.5 3 100\n";
    out.push_back({"fig3_exact", base + "sweep_target = steady\n"});
    out.push_back({"fig3_decoupled", base + "sweep_target = decoupled\n"});
    out.push_back({"fig3_approx", base + "sweep_target = approx\n"});
  } else if (name.size() == 5 && name.rfind("fig4", 0) == 0) {
    for (bool dashed : {false, true}) {
      const auto p = fig4_params(name[4], dashed);
      auto c = detail::model_comparison(name, p, fig_window(p), dashed ? "dashed" : "solid");
      out.insert(out.end(), c.begin(), c.end());
    }
  } else if (name.size() == 5 && name.rfind("fig5", 0) == 0) {
    for (bool dashed : {false, true}) {
      const auto p = fig5_params(name[4], dashed);
      auto c = detail::model_comparison(name, p, 1.0 / p.gamma1, dashed ? "dashed" : "solid");
      out.insert(out.end(), c.begin(), c.end());
    }
  } else {
    throw ConfigError("unknown figure '" + name + "' (fig2|fig3|fig4a|fig4b|fig4c|fig5a|fig5b|fig5c)");
  }
  return out;
}

/// Runs every curve of a figure; diverging full-model curves are kept truncated.
inline RunOutput run_figure(const std::string& name) {
  RunOutput out;
  for (const auto& c : figure_curves(name)) {
    auto r = run_task(parse_config(c.config), true);
    for (auto& [file, table] : r.files) {
      table.meta.insert(table.meta.begin(), {"curve", c.name});
      out.files.push_back({c.name + ".csv", std::move(table)});
    }
  }
  return out;
}

}  // namespace mechent

#endif  // MECHENT_PRESETS_HPP
