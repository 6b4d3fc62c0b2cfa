#pragma once

#include "sqrtdiff/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sqrtdiff::cli {

inline constexpr std::string_view version = "0.1.0";

//! Subcommands, in the order the front end lists them.
const std::vector<std::string>& commands();

struct ModelConfig
{
  std::string family = "constant"; // constant | tabulated
  double a = 1.0;
  double b = 1.0;
  double gamma = 1.0;
  double alpha = 0.5;
  double eta = 0.0;
  std::optional<model::TabulatedData> table;
};

struct NumericsConfig
{
  int steps = 512;
  std::int64_t paths = 100000;
  double kappa = 1.0;
  double gamma0 = 0.25;
  double xi_max = 256.0;
  double xi_step = 0.05;
  double noise_factor = 1.25;
};

struct TaskConfig
{
  std::string command;
  //! Every parameter of the command, defaults filled.
  nlohmann::json params = nlohmann::json::object();
};

struct RunConfig
{
  ModelConfig model;
  TaskConfig task;
  NumericsConfig numerics;
  std::uint64_t seed = 0;
  std::string output = "out";
};

enum class ParamType
{
  integer,
  number,
  optional_number, // null means "pick from the data"
  boolean,
  string
};

struct ParamSpec
{
  std::string key;
  ParamType type = ParamType::number;
  nlohmann::json fallback;
  std::string help;
};

//! Parameters accepted by a subcommand. Throws ValidationError for an
//! unknown command.
const std::vector<ParamSpec>& task_params(const std::string& command);

//! Strict conversion: unknown keys and mistyped values are ValidationErrors
//! naming the field; defaults are filled and ranges checked.
RunConfig config_from_json(const nlohmann::json& j);

//! Plain JSON parse; ParseError names the line and column.
nlohmann::json parse_json(const std::string& text);

//! Parses text (ParseError with line and column) and validates it.
RunConfig parse_config(const std::string& text);

//! Reads path (IoError) and parses it.
RunConfig load_config(const std::string& path);

//! Canonical form; config_from_json(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& c);

//! FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

model::CoefficientSet build_model(const ModelConfig& m);

//! Shortest text that reads back as the same double ('.' decimal point,
//! at most 17 significant digits, independent of the locale).
std::string format_double(double v);

//! Writes text to path + ".tmp" and renames it over path. Throws IoError.
void write_atomic(const std::string& path, const std::string& text);

//! Two-column CSV. Lines of the preamble are written first, each prefixed
//! with "# ". Throws InvalidArgument on length mismatch, IoError on failure.
void write_csv(std::span<const double> grid,
               std::span<const double> values,
               const std::vector<std::string>& header,
               const std::string& path,
               const std::vector<std::string>& preamble = {});

//! Column-major table of equal-length columns.
void write_table_csv(const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& columns,
                     const std::string& path,
                     const std::vector<std::string>& preamble = {});

struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

//! Reads what write_table_csv writes; '#' lines are skipped.
CsvTable read_csv(const std::string& path);

struct RunResult
{
  int exit_code = 0;
  nlohmann::json report;
  //! Paths of every file written, JSON report first.
  std::vector<std::string> artifacts;
};

//! Dispatches the task and writes its artifacts into config.output.
//! Library errors are caught: exit code 3, report holds the structured
//! error, which is also written to error.json.
RunResult run(const RunConfig& config);

//! Error document shared by run() and the front end.
nlohmann::json error_json(std::string_view kind, const std::string& message);

} // namespace sqrtdiff::cli
