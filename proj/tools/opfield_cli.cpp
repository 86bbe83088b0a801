// Scenario-driven command line front end for the opfield library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opfield/core.hpp"
#include "opfield/scenario.hpp"

namespace {

constexpr const char* VERSION = "0.1.0";

void apply_thread_env() {
  if (const char* env = std::getenv("OPFIELD_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) opfield::set_thread_count(n);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring OPFIELD_THREADS='" << env << "'\n";
    }
  }
}

int run(const std::string& file, const std::vector<std::string>& overrides, std::string report_path,
        const std::string& format, bool timing) {
  namespace sc = opfield::scenario;
  sc::Scenario scenario;
  std::vector<opfield::CheckReport> reports;
  try {
    nlohmann::json doc = sc::load_json_file(file);
    sc::apply_overrides(doc, overrides);
    scenario = sc::parse_scenario(doc);
    reports = sc::run_scenario(scenario);
  } catch (const sc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  if (report_path.empty())
    report_path = std::filesystem::path(file).stem().string() + ".report." + format;
  std::ofstream out(report_path, std::ios::binary);
  if (!out) {
    std::cerr << "configuration error: cannot write report '" << report_path << "'\n";
    return 2;
  }
  if (format == "csv") out << sc::report_csv(scenario, reports, timing);
  else out << sc::report_json(scenario, reports, timing).dump(2) << "\n";

  for (std::size_t i = 0; i < reports.size(); ++i)
    std::cout << "[" << i << "] " << reports[i].name << ": " << opfield::to_string(reports[i].status)
              << " (max residual " << reports[i].max_residual() << ", tolerance " << reports[i].tolerance << ")\n";
  std::cout << "report written to " << report_path << "\n";
  return sc::exit_code(reports);
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();

  CLI::App app{"Operator-algebra field verification runner"};
  app.require_subcommand(1);

  std::string file;
  std::vector<std::string> overrides;
  std::string report_path;
  std::string format = "json";
  bool timing = false;
  auto* run_cmd = app.add_subcommand("run", "Run the checks declared in a scenario file");
  run_cmd->add_option("file", file, "Scenario file")->required();
  run_cmd->add_option("--override", overrides, "Dotted-path override key=value (repeatable)");
  run_cmd->add_option("--report", report_path, "Report output path");
  run_cmd->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  run_cmd->add_flag("--timing", timing, "Record wall-clock times (reports are then not reproducible)");

  auto* list_cmd = app.add_subcommand("list-checks", "List the available check types");
  auto* version_cmd = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*run_cmd) return run(file, overrides, report_path, format, timing);
  if (*list_cmd) {
    std::cout << opfield::scenario::list_checks();
    return 0;
  }
  if (*version_cmd) {
    std::cout << "opfield " << VERSION << " (scenario schema " << opfield::scenario::SCHEMA_VERSION << ")\n";
    return 0;
  }
  return 2;
}
