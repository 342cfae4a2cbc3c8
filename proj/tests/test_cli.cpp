#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mechent/config.hpp"
#include "mechent/presets.hpp"
#include "mechent/runner.hpp"

using namespace mechent;
namespace fs = std::filesystem;

namespace {

const std::string kSteady =
    "task = steady\nmodel = rwa\nunits = s\n"
    "kappa = 1e5\ngamma = 10\nG1 = 9.18e4\nG2 = 1e5\nDelta = 1e3\nnbar1 = 200\nnbar2 = 100\n";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("mechent_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MECHENT_CLI) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesSecondsUnits) {
  const auto cfg = parse_config(kSteady);
  EXPECT_EQ(cfg.task, Task::steady);
  EXPECT_EQ(cfg.model, Model::rwa);
  EXPECT_FALSE(cfg.kappa_units);
  EXPECT_EQ(cfg.params.kappa, 1e5);
  EXPECT_EQ(cfg.params.gamma1, 10.0);
  EXPECT_EQ(cfg.params.gamma2, 10.0);
  EXPECT_EQ(cfg.params.G1, 9.18e4);
  EXPECT_EQ(cfg.params.nbar2, 100.0);
}

TEST(Config, ParsesKappaUnits) {
  const auto cfg = parse_config(
      "task = evolve\nmodel = rwa\nunits = kappa\nkappa_scale = 2e5\nkappa = 1\ngamma = 1e-4 kappa\n"
      "G1 = 0.5\nG2 = 1\nDelta = 0.01\nt_end = 10 1/kappa\n");
  EXPECT_EQ(cfg.params.kappa, 2e5);
  EXPECT_DOUBLE_EQ(cfg.params.gamma1, 20.0);
  EXPECT_EQ(cfg.params.G1, 1e5);
  EXPECT_DOUBLE_EQ(cfg.params.Delta, 2e3);
  EXPECT_DOUBLE_EQ(cfg.grid.t_end, 5e-5);
  EXPECT_EQ(cfg.grid.n_points, 201);
}

TEST(Config, Errors) {
  EXPECT_NE(error_of(kSteady + "bogus = 1\n").find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(error_of(kSteady + "bogus = 1\n").find("line 11"), std::string::npos);
  EXPECT_NE(error_of(kSteady + "kappa = 2\n").find("duplicate key"), std::string::npos);
  EXPECT_NE(error_of(override_key(kSteady, "kappa", "1 kappa")).find("unit mismatch"), std::string::npos);
  EXPECT_NE(error_of(override_key(kSteady, "nbar1", "3 s")).find("unit mismatch"), std::string::npos);
  EXPECT_NE(error_of(kSteady + "E1 = 1e9\nE2 = 1e9\ng = 1\n").find("E1"), std::string::npos);
  EXPECT_NE(error_of(kSteady + "gamma1 = 3\n").find("either gamma or gamma1/gamma2"), std::string::npos);
  EXPECT_NE(error_of(kSteady + "t_end = 1\n").find("no effect"), std::string::npos);
  EXPECT_NE(error_of(override_key(kSteady, "units", "ms")).find("units"), std::string::npos);
  EXPECT_NE(error_of(override_key(kSteady, "task", "evolve")).find("t_end"), std::string::npos);
  EXPECT_NE(error_of("task = steady\n").find("missing required key"), std::string::npos);
  EXPECT_NE(error_of(override_key(kSteady, "G1", "abc")).find("not a number"), std::string::npos);
  EXPECT_EQ(error_of(kSteady), "");
}

TEST(Config, DrivePathDerivesCouplings) {
  const std::string text =
      "task = steady\nmodel = rwa\nunits = kappa\nkappa = 1\ngamma = 1e-4\nomega1 = 50\nomega2 = 100\n"
      "g = 1e-4\nE1 = 4.59e5\nE2 = 1e6\nDelta0 = 0.01\nnbar1 = 200\nnbar2 = 100\n";
  const auto cfg = parse_config(text);
  EXPECT_TRUE(cfg.couplings_from_drives);
  const auto& p = cfg.params;
  const auto f = lowest_order_fields(p);
  EXPECT_NEAR(p.Delta, p.Delta0 + 2.0 * p.g * (f.beta_dc[0].real() + f.beta_dc[1].real()), 1e-12);
  // couplings follow the shifted detuning
  EXPECT_NEAR(p.G1, p.g * p.E1 / std::abs(cplx(p.omega1 - p.Delta, p.kappa)), 1e-9 * p.G1);
  EXPECT_NEAR(p.G2, p.g * p.E2 / std::abs(cplx(p.omega2 + p.Delta, p.kappa)), 1e-9 * p.G2);
  EXPECT_NE(error_of(text + "Delta = 0.01\n").find("Delta0"), std::string::npos);
}

TEST(Config, CanonicalTextRoundTrip) {
  const auto cfg = parse_config(kSteady);
  const auto again = parse_config(cfg.to_text());
  EXPECT_EQ(again.to_text(), cfg.to_text());
  EXPECT_EQ(cfg.entries.front().first, "task");
}

TEST(Runner, CsvHeaderReproducesRunBitIdentically) {
  for (const std::string& text :
       {kSteady, override_key(kSteady, "task", "evolve") + "t_end = 1e-3\nn_points = 11\n",
        override_key(kSteady, "task", "sweep") + "sweep1 = r 0.5 3 5\n"}) {
    const auto first = run_task(parse_config(text));
    ASSERT_EQ(first.files.size(), 1u);
    const std::string csv = first.files[0].second.str();
    EXPECT_EQ(csv.rfind(kCsvMagic, 0), 0u);
    const auto second = run_task(parse_config(config_text_from_csv(csv)));
    EXPECT_EQ(second.files[0].second.str(), csv);
  }
}

TEST(Runner, SteadyOutput) {
  const auto out = run_task(parse_config(kSteady));
  const auto& t = out.files[0].second;
  EXPECT_EQ(out.files[0].first, "steady.csv");
  ASSERT_EQ(t.rows.size(), 1u);
  const auto col = std::find(t.columns.begin(), t.columns.end(), "EN") - t.columns.begin();
  ASSERT_LT(col, static_cast<long>(t.columns.size()));
  const double en = std::stod(t.rows[0][col]);
  EXPECT_NEAR(en, log_negativity(steady_state(fig2_params(fig2_cases()[1])).reduced({1, 2})), 1e-12);
}

TEST(Runner, UnstableSweepRowsFlagged) {
  const auto out = run_task(parse_config(override_key(kSteady, "task", "sweep") + "sweep1 = ratio 0.9 1.2 4\n"));
  const auto& t = out.files[0].second;
  ASSERT_EQ(t.rows.size(), 4u);
  const auto idx = [&](const char* c) { return std::find(t.columns.begin(), t.columns.end(), c) - t.columns.begin(); };
  EXPECT_EQ(t.rows[0][idx("stable")], "1");
  EXPECT_EQ(t.rows[0][idx("status")], "ok");
  EXPECT_EQ(t.rows[3][idx("stable")], "0");
  EXPECT_EQ(t.rows[3][idx("status")], "unstable");
  EXPECT_EQ(t.rows[3][idx("EN")], "");
  EXPECT_GT(std::stod(t.rows[3][idx("max_re_eig")]), 0.0);
}

TEST(Runner, LargeSweepWithinBudget) {
  const auto start = std::chrono::steady_clock::now();
  const auto out = run_task(parse_config(override_key(kSteady, "task", "sweep") +
                                         "sweep1 = r 0.5 3 50\nsweep2 = Delta 0 5e4 50\n"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(out.files[0].second.rows.size(), 2500u);
  EXPECT_LT(secs, 60.0);
}

TEST(Runner, SweepIsDeterministic) {
  const std::string text = override_key(kSteady, "task", "sweep") + "sweep1 = r 0.5 3 20\nsweep2 = nbar1 0 500 5\n";
  EXPECT_EQ(run_task(parse_config(text)).files[0].second.str(), run_task(parse_config(text)).files[0].second.str());
}

TEST(Presets, Table) {
  EXPECT_EQ(figure_names().size(), 8u);
  const std::map<std::string, std::size_t> counts{{"fig2", 4}, {"fig3", 3}, {"fig4a", 6}, {"fig4b", 6},
                                                  {"fig4c", 6}, {"fig5a", 6}, {"fig5b", 6}, {"fig5c", 6}};
  for (const auto& name : figure_names()) {
    const auto curves = figure_curves(name);
    EXPECT_EQ(curves.size(), counts.at(name)) << name;
    for (const auto& c : curves) EXPECT_NO_THROW(parse_config(c.config)) << c.name;
  }
  EXPECT_THROW(figure_curves("fig6"), ConfigError);
  const auto p = fig2_params(fig2_cases()[3]);
  EXPECT_EQ(p.G1, 0.75e5);
  EXPECT_EQ(p.nbar1, 2000.0);
  EXPECT_EQ(fig5_params('c', true).Delta, 5.0);
  EXPECT_EQ(fig4_params('a', true).omega1, 25.0);
}

TEST(Cli, ExitCodesAndOutput) {
  const auto dir = scratch_dir("cli");
  std::ofstream(dir / "steady.cfg") << kSteady;
  EXPECT_EQ(run_cli("--out " + (dir / "out").string() + " steady --config " + (dir / "steady.cfg").string()), 0);
  const auto csv = dir / "out" / "steady.csv";
  ASSERT_TRUE(fs::exists(csv));
  // a written CSV is itself a valid config
  EXPECT_EQ(run_cli("--out " + (dir / "again").string() + " steady --config " + csv.string()), 0);
  EXPECT_EQ(slurp(dir / "again" / "steady.csv"), slurp(csv));

  std::ofstream(dir / "unstable.cfg") << override_key(kSteady, "G1", "1.1e5");
  EXPECT_EQ(run_cli("--out " + dir.string() + " steady --config " + (dir / "unstable.cfg").string()), 3);
  std::ofstream(dir / "bad.cfg") << kSteady << "bogus = 1\n";
  EXPECT_EQ(run_cli("steady --config " + (dir / "bad.cfg").string()), 2);
  EXPECT_EQ(run_cli("evolve --config " + (dir / "steady.cfg").string()), 2);
  EXPECT_EQ(run_cli("steady --config " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(run_cli("steady"), 2);
  EXPECT_EQ(run_cli("figure fig9"), 2);
  fs::remove_all(dir);
}
