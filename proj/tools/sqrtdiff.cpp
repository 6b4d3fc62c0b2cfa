// Command-line front end: flags and an optional JSON config become one
// RunConfig, which cli::run executes.

#include "sqrtdiff/cli.hpp"
#include "sqrtdiff/error.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using nlohmann::json;
namespace cli = sqrtdiff::cli;

namespace {

struct Flag
{
  std::string section; // model | numerics | task | "" for top level
  std::string key;
  bool text = false;
};

std::string flag_name(std::string key)
{
  for (auto& ch : key)
    if (ch == '_')
      ch = '-';
  return "--" + key;
}

json flag_value(const std::string& raw, bool text)
{
  if (text)
    return raw;
  try {
    return json::parse(raw);
  } catch (const json::parse_error&) {
    // left as text, so validation reports the field
    return raw;
  }
}

std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw sqrtdiff::Error(sqrtdiff::ErrorKind::io_error, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"sqrtdiff: densities, boundary behaviour and simulation of square-root diffusions"};
  app.require_subcommand(1);

  const std::vector<Flag> shared = {
    {"model", "family", true},  {"model", "a"},        {"model", "b"},
    {"model", "gamma"},         {"model", "alpha"},    {"model", "eta"},
    {"numerics", "steps"},      {"numerics", "paths"}, {"numerics", "kappa"},
    {"numerics", "gamma0"},     {"numerics", "xi_max"}, {"numerics", "xi_step"},
    {"numerics", "noise_factor"}, {"", "seed"},        {"", "output", true},
  };

  struct Sub
  {
    CLI::App* app = nullptr;
    std::string command;
    std::vector<Flag> flags;
    std::map<std::string, std::string> values;
  };
  std::vector<Sub> subs;
  subs.reserve(cli::commands().size() + 1);
  std::string config_path;
  bool print_config = false;

  auto add_sub = [&](const std::string& name, const std::string& command, const std::string& help) {
    subs.push_back({app.add_subcommand(name, help), command, shared, {}});
    auto& s = subs.back();
    if (!command.empty())
      for (const auto& p : cli::task_params(command))
        s.flags.push_back({"task", p.key, p.type == cli::ParamType::string});
    const json base = cli::to_json(cli::RunConfig{});
    for (const auto& f : s.flags) {
      std::string help_text = f.section.empty() ? f.key : f.section + "." + f.key;
      json fallback;
      if (f.section.empty())
        fallback = base.at(f.key);
      else if (f.section != "task")
        fallback = base.at(f.section).at(f.key);
      if (f.section == "task")
        for (const auto& p : cli::task_params(command))
          if (p.key == f.key) {
            help_text = p.help;
            fallback = p.fallback;
          }
      help_text += fallback.is_null() ? " [default: from the data]" : " [default: " + fallback.dump() + "]";
      s.app->add_option(flag_name(f.key), s.values[f.section + "." + f.key], help_text);
    }
    s.app->add_option("--config", config_path, "JSON config; flags override its values");
    s.app->add_flag("--print-config", print_config, "print the validated config and exit");
  };
  for (const auto& c : cli::commands())
    add_sub(c, c, "run the " + c + " task");
  add_sub("run", "", "run the task named in --config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    const Sub* chosen = nullptr;
    for (const auto& s : subs)
      if (s.app->parsed())
        chosen = &s;

    json raw = config_path.empty() ? json::object() : cli::parse_json(read_file(config_path));
    if (!raw.is_object())
      throw sqrtdiff::Error(sqrtdiff::ErrorKind::validation_error, "config: expected an object");
    if (!chosen->command.empty()) {
      if (!raw.contains("task") || !raw["task"].is_object() ||
          raw["task"].value("command", std::string()) != chosen->command)
        raw["task"] = json{{"command", chosen->command}};
    }
    for (const auto& f : chosen->flags) {
      const std::string id = f.section + "." + f.key;
      if (chosen->app->count(flag_name(f.key)) == 0)
        continue;
      const json v = flag_value(chosen->values.at(id), f.text);
      if (f.section.empty())
        raw[f.key] = v;
      else
        raw[f.section][f.key] = v;
    }

    const auto config = cli::config_from_json(raw);
    if (print_config) {
      std::cout << cli::to_json(config).dump(2) << "\n";
      return 0;
    }
    const auto result = cli::run(config);
    std::cout << result.report.dump(2) << "\n";
    return result.exit_code;
  } catch (const sqrtdiff::Error& e) {
    std::cout << cli::error_json(sqrtdiff::to_string(e.kind()), e.what()).dump(2) << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cout << cli::error_json("internal", e.what()).dump(2) << "\n";
    return 3;
  }
}
