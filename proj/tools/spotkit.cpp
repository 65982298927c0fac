// SPDX-License-Identifier: Apache-2.0
//
// spotkit train|infer|evaluate|convert|validate|generate --config <path> [--section.key value ...]

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "spotkit/runner.hpp"

namespace {

// Remaining "--a.b value" / "--a.b=value" arguments as dotted overrides.
bool collect_overrides(const std::vector<std::string>& extras, std::vector<std::pair<std::string, std::string>>& out,
                       std::string& problem) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      problem = "unexpected argument '" + arg + "'";
      return false;
    }
    const std::string body = arg.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) {
      problem = "override '" + arg + "' has no value";
      return false;
    }
    out.emplace_back(body, extras[++i]);
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal action spotting toolkit"};
  app.require_subcommand(1, 1);
  std::string config_path;
  for (const char* name : spotkit::kCommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run config")->required();
    sub->allow_extras();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string problem;
  if (!collect_overrides(sub->remaining(), overrides, problem)) {
    std::cerr << "error: " << problem << '\n';
    return 2;
  }
  spotkit::RunConfig config;
  try {
    config = spotkit::load_run_config(config_path, overrides);
  } catch (const spotkit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return spotkit::exit_code_for(e.code());
  }
  return spotkit::run_command(sub->get_name(), config, std::cout, std::cerr);
}
