// Command-line front end: steady, evolve, sweep, floquet, detect, figure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "mechent/config.hpp"
#include "mechent/presets.hpp"
#include "mechent/runner.hpp"

namespace fs = std::filesystem;
using namespace mechent;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kUnstable = 3, kNumeric = 4 };

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::optional<std::string> lookup(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (detail::trim(line.substr(0, eq)) == key) return detail::trim(line.substr(eq + 1));
  }
  return std::nullopt;
}

void write_all(const RunOutput& out, const fs::path& dir) {
  for (const auto& [name, table] : out.files) {
    table.write(dir / name);
    std::cout << (dir / name).string() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mechanical entanglement simulator"};
  app.require_subcommand(1);
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> order;
  std::optional<std::string> model;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed (detect)");
  app.add_option("--order", order, "expansion order of the full model");
  app.add_option("--model", model, "rwa|full|closedform")->check(CLI::IsMember({"rwa", "full", "closedform"}));

  std::string config_path, figure;
  for (const char* task : {"steady", "evolve", "sweep", "floquet", "detect"}) {
    auto* sub = app.add_subcommand(task, std::string("run task '") + task + "' from a config file");
    sub->add_option("--config", config_path, "config file (key = value, or a CSV written by this tool)")->required();
  }
  auto* fig = app.add_subcommand("figure", "reproduce a figure preset");
  fig->add_option("name", figure, "fig2|fig3|fig4a|fig4b|fig4c|fig5a|fig5b|fig5c")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    RunOutput out;
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "figure") {
      if (seed || order || model) throw ConfigError("--seed, --order and --model do not apply to figure presets");
      out = run_figure(figure);
    } else {
      std::string text = read_file(config_path);
      if (text.rfind(kCsvMagic, 0) == 0) text = config_text_from_csv(text);
      if (auto t = lookup(text, "task"); t && *t != sub)
        throw ConfigError("config declares task '" + *t + "' but subcommand '" + sub + "' was given");
      text = override_key(text, "task", sub);
      if (model) text = override_key(text, "model", *model);
      if (order) text = override_key(text, "order", std::to_string(*order));
      if (seed) text = override_key(text, "seed", std::to_string(*seed));
      out = run_task(parse_config(text));
    }
    write_all(out, out_dir);
    if (out.failure) {
      std::cerr << "numeric failure at t = " << out.failure->time() << " s: " << out.failure->what() << "\n";
      return kNumeric;
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const UnstableError& e) {
    std::cerr << "unstable: " << e.what() << "\n";
    return kUnstable;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
}
