#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "met/cli/config.hpp"
#include "met/cli/experiments.hpp"
#include "met/cli/result_table.hpp"

namespace {

int report(const std::string& path) {
  const auto t = met::cli::ResultTable::load(path);
  if (t.rows().empty()) throw met::PreconditionError("result file '" + path + "' has no rows");
  std::cout << "experiment " << t.meta("experiment", "?") << "  config " << t.meta("config_hash", "?") << "  version "
            << t.meta("version", "?") << "  wall " << t.meta("wall_time", "?") << " s\n";
  const auto summary = met::cli::summarize(t);
  std::map<std::string, std::vector<met::cli::QuantitySummary>> by;
  for (const auto& s : summary) by[s.quantity].push_back(s);
  for (const auto& [q, rows] : by) {
    // long traces: show the tail only
    const std::size_t from = rows.size() > 4 ? rows.size() - 3 : 0;
    if (from > 0) std::cout << q << ": " << rows.size() << " indices, tail\n";
    for (std::size_t i = from; i < rows.size(); ++i) {
      const auto& s = rows[i];
      std::printf("  %-28s %8ld  %.10g +- %.3g  (%d seeds)\n", q.c_str(), s.index, s.mean, s.stderr_, s.seeds);
    }
  }
  int failed = 0;
  for (const auto& c : met::cli::evaluate_checks(t)) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.description << "\n";
    failed += c.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"met: multiplicative ergodic theorem experiments"};
  app.require_subcommand(1);
  std::string config_path, output, format, result_path;
  auto* run = app.add_subcommand("run", "run an experiment config and write a result table");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--output", output, "result path (default: config 'output' key, else stdout)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* rep = app.add_subcommand("report", "summarize a result table");
  rep->add_option("result", result_path, "result file")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (run->parsed()) {
      const auto cfg = met::cli::Config::load(config_path);
      const std::string fmt = format.empty() ? cfg.str("format", "csv") : format;
      const std::string out = output.empty() ? cfg.str("output", "") : output;
      const auto table = met::cli::run_experiment(cfg);
      if (out.empty()) {
        std::cout << (fmt == "json" ? table.to_json() : table.to_csv());
      } else {
        table.write(out, fmt);
      }
      return 0;
    }
    return report(result_path);
  } catch (const met::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
