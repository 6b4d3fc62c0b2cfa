#include "sqrtdiff/cli.hpp"

#include "sqrtdiff/boundary.hpp"
#include "sqrtdiff/bounds.hpp"
#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/density.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/mc.hpp"
#include "sqrtdiff/numerics.hpp"
#include "sqrtdiff/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sqrtdiff::cli {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what)
{
  throw Error(ErrorKind::validation_error, field + ": " + what);
}

double get_number(const json& v, const std::string& field)
{
  if (!v.is_number())
    invalid(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x))
    invalid(field, "must be finite");
  return x;
}

std::int64_t get_integer(const json& v, const std::string& field)
{
  if (v.is_number_integer())
    return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9.007199254740992e15)
      return static_cast<std::int64_t>(d);
  }
  invalid(field, "expected an integer");
}

std::string get_string(const json& v, const std::string& field)
{
  if (!v.is_string())
    invalid(field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> get_array(const json& v, const std::string& field)
{
  if (!v.is_array())
    invalid(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(get_number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
  if (!obj.is_object())
    invalid(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      invalid(where.empty() ? key : where + "." + key, "unknown key");
  }
}

ParamSpec P(std::string key, ParamType type, json fallback, std::string help)
{
  return {std::move(key), type, std::move(fallback), std::move(help)};
}

const std::map<std::string, std::vector<ParamSpec>>& param_table()
{
  using T = ParamType;
  static const std::map<std::string, std::vector<ParamSpec>> table = {
    {"bounds",
     {P("m", T::integer, 1, "order m of the bound"),
      P("k", T::integer, 3, "derivative order k"),
      P("t", T::number, 1.0, "time t"),
      P("T", T::number, 1.0, "horizon T >= t"),
      P("R", T::number, 1.0, "ball radius in (0, 1]"),
      P("y0", T::number, 1.0, "ball centre"),
      P("norms", T::string, "ones", "ones | model"),
      P("q", T::number, 2.0, "growth exponent q"),
      P("q_bar", T::number, 0.0, "ellipticity decay exponent")}},
    {"cir-density",
     {P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "time"),
      P("y_min", T::number, 0.0, "grid start"),
      P("y_max", T::number, 5.0, "grid end"),
      P("n", T::integer, 501, "grid points"),
      P("form", T::string, "series", "series | bessel")}},
    {"classify", {P("cpoint", T::number, 1.0, "base point of the scale function")}},
    {"simulate",
     {P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "horizon"),
      P("scheme", T::string, "euler", "euler | exact"),
      P("record_points", T::integer, 17, "states kept per path (0 or >= 2)"),
      P("write_paths", T::boolean, false, "also write the per-path CSV")}},
    {"estimate",
     {P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "horizon"),
      P("scheme", T::string, "euler", "sample source: euler | exact"),
      P("method", T::string, "kde-log", "kde | kde-log | fourier-local"),
      P("y_min", T::number, 0.0, "grid start"),
      P("y_max", T::number, 5.0, "grid end"),
      P("n", T::integer, 501, "grid points"),
      P("y0", T::number, 1.0, "fourier-local centre"),
      P("R", T::number, 1.0, "fourier-local radius"),
      P("bandwidth", T::optional_number, nullptr, "kde bandwidth (default Silverman)")}},
    {"verify-tail",
     {P("source", T::string, "analytic", "analytic | mc"),
      P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "time"),
      P("scheme", T::string, "euler", "mc sample source: euler | exact"),
      P("y_lo", T::optional_number, nullptr, "fit range start"),
      P("y_hi", T::optional_number, nullptr, "fit range end"),
      P("n", T::integer, 251, "grid points")}},
    {"verify-zero",
     {P("source", T::string, "analytic", "analytic | mc"),
      P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "time"),
      P("scheme", T::string, "exact", "mc sample source: euler | exact"),
      P("y_lo", T::optional_number, nullptr, "fit range start"),
      P("y_hi", T::optional_number, nullptr, "fit range end (<= 0.1)"),
      P("n", T::integer, 61, "grid points")}},
    {"report",
     {P("source", T::string, "analytic", "analytic | mc"),
      P("x0", T::number, 1.0, "start value"),
      P("t", T::number, 1.0, "time"),
      P("scheme", T::string, "euler", "mc sample source: euler | exact"),
      P("xval_samples", T::integer, 100000, "samples for the estimator cross-check")}},
  };
  return table;
}

json normalize_param(const ParamSpec& param, const json& v, const std::string& field)
{
  switch (param.type) {
  case ParamType::integer:
    return get_integer(v, field);
  case ParamType::number:
    return get_number(v, field);
  case ParamType::optional_number:
    return v.is_null() ? json() : json(get_number(v, field));
  case ParamType::boolean:
    if (!v.is_boolean())
      invalid(field, "expected true or false");
    return v.get<bool>();
  case ParamType::string:
    return get_string(v, field);
  }
  return v;
}

void require(bool ok, const std::string& field, const std::string& what)
{
  if (!ok)
    invalid(field, what);
}

void check_task(const std::string& cmd, const json& p)
{
  const auto num = [&](const char* k) { return p.at(k).get<double>(); };
  const auto has = [&](const char* k) { return p.contains(k); };
  const std::string f = "task.";
  if (has("t"))
    require(num("t") > 0.0, f + "t", "must be > 0");
  if (has("x0"))
    require(num("x0") > 0.0, f + "x0", "must be > 0");
  if (has("n"))
    require(p.at("n").get<std::int64_t>() >= 2, f + "n", "must be >= 2");
  if (has("y_min"))
    require(num("y_min") < num("y_max"), f + "y_max", "must exceed y_min");
  if (has("y_lo") && has("y_hi") && !p.at("y_lo").is_null() && !p.at("y_hi").is_null())
    require(num("y_lo") < num("y_hi"), f + "y_hi", "must exceed y_lo");
  if (has("R"))
    require(num("R") > 0.0 && num("R") <= 1.0, f + "R", "must lie in (0, 1]");
  if (has("scheme")) {
    const auto s = p.at("scheme").get<std::string>();
    try {
      mc::parse_scheme(s);
    } catch (const Error&) {
      invalid(f + "scheme", "unknown scheme '" + s + "'");
    }
  }
  if (has("source")) {
    const auto s = p.at("source").get<std::string>();
    require(s == "analytic" || s == "mc", f + "source", "must be analytic or mc");
  }
  if (cmd == "bounds") {
    require(p.at("m").get<std::int64_t>() >= 1, f + "m", "must be >= 1");
    require(p.at("k").get<std::int64_t>() >= 0, f + "k", "must be >= 0");
    require(p.at("m").get<std::int64_t>() * p.at("k").get<std::int64_t>() <= 40, f + "k",
            "m k must be <= 40");
    require(num("T") >= num("t"), f + "T", "must be >= t");
    const auto n = p.at("norms").get<std::string>();
    require(n == "ones" || n == "model", f + "norms", "must be ones or model");
    require(num("q") >= 0.0, f + "q", "must be >= 0");
    require(num("q_bar") >= 0.0, f + "q_bar", "must be >= 0");
  } else if (cmd == "cir-density") {
    const auto s = p.at("form").get<std::string>();
    require(s == "series" || s == "bessel", f + "form", "must be series or bessel");
  } else if (cmd == "classify") {
    require(num("cpoint") > 0.0, f + "cpoint", "must be > 0");
  } else if (cmd == "simulate") {
    const auto r = p.at("record_points").get<std::int64_t>();
    require(r == 0 || (r >= 2 && r <= 4097), f + "record_points", "must be 0 or in [2, 4097]");
  } else if (cmd == "estimate") {
    const auto m = p.at("method").get<std::string>();
    require(m == "kde" || m == "kde-log" || m == "fourier-local", f + "method",
            "must be kde, kde-log or fourier-local");
    if (!p.at("bandwidth").is_null())
      require(num("bandwidth") > 0.0, f + "bandwidth", "must be > 0");
  } else if (cmd == "report") {
    require(p.at("xval_samples").get<std::int64_t>() >= 1000, f + "xval_samples", "must be >= 1000");
  }
}

ModelConfig model_from_json(const json& j)
{
  ModelConfig m;
  if (!j.is_object())
    invalid("model", "expected an object");
  if (j.contains("family"))
    m.family = get_string(j["family"], "model.family");
  if (m.family == "constant") {
    reject_unknown(j, {"family", "a", "b", "gamma", "alpha", "eta"}, "model");
    if (j.contains("a"))
      m.a = get_number(j["a"], "model.a");
    if (j.contains("b"))
      m.b = get_number(j["b"], "model.b");
    if (j.contains("gamma"))
      m.gamma = get_number(j["gamma"], "model.gamma");
    require(m.a >= 0.0, "model.a", "a must be >= 0");
    require(m.gamma != 0.0, "model.gamma", "gamma must be nonzero");
  } else if (m.family == "tabulated") {
    reject_unknown(j, {"family", "knots", "a", "b", "gamma", "alpha", "eta"}, "model");
    for (const char* k : {"knots", "a", "b", "gamma"})
      if (!j.contains(k))
        invalid(std::string("model.") + k, "required for the tabulated family");
    model::TabulatedData t;
    t.knots = get_array(j["knots"], "model.knots");
    t.a = get_array(j["a"], "model.a");
    t.b = get_array(j["b"], "model.b");
    t.gamma = get_array(j["gamma"], "model.gamma");
    require(t.knots.size() >= 4, "model.knots", "needs at least four knots");
    for (const char* k : {"a", "b", "gamma"}) {
      const auto& arr = std::string(k) == "a" ? t.a : std::string(k) == "b" ? t.b : t.gamma;
      require(arr.size() == t.knots.size(), std::string("model.") + k, "length must match knots");
    }
    m.table = std::move(t);
  } else {
    invalid("model.family", "must be constant or tabulated");
  }
  if (j.contains("alpha"))
    m.alpha = get_number(j["alpha"], "model.alpha");
  if (j.contains("eta"))
    m.eta = get_number(j["eta"], "model.eta");
  require(m.alpha >= 0.5 && m.alpha < 1.0, "model.alpha", "alpha must lie in [0.5, 1)");
  require(m.eta >= 0.0, "model.eta", "eta must be >= 0");
  return m;
}

NumericsConfig numerics_from_json(const json& j)
{
  NumericsConfig n;
  reject_unknown(j, {"steps", "paths", "kappa", "gamma0", "xi_max", "xi_step", "noise_factor"},
                 "numerics");
  if (j.contains("steps"))
    n.steps = static_cast<int>(get_integer(j["steps"], "numerics.steps"));
  if (j.contains("paths"))
    n.paths = get_integer(j["paths"], "numerics.paths");
  if (j.contains("kappa"))
    n.kappa = get_number(j["kappa"], "numerics.kappa");
  if (j.contains("gamma0"))
    n.gamma0 = get_number(j["gamma0"], "numerics.gamma0");
  if (j.contains("xi_max"))
    n.xi_max = get_number(j["xi_max"], "numerics.xi_max");
  if (j.contains("xi_step"))
    n.xi_step = get_number(j["xi_step"], "numerics.xi_step");
  if (j.contains("noise_factor"))
    n.noise_factor = get_number(j["noise_factor"], "numerics.noise_factor");
  require(n.steps >= 1 && n.steps <= 1 << 20, "numerics.steps", "must lie in [1, 2^20]");
  require(n.paths >= 1 && n.paths <= 100000000, "numerics.paths", "must lie in [1, 1e8]");
  require(n.kappa > 0.0, "numerics.kappa", "must be > 0");
  require(n.gamma0 > 0.0, "numerics.gamma0", "must be > 0");
  require(n.xi_max > 0.0, "numerics.xi_max", "must be > 0");
  require(n.xi_step > 0.0 && n.xi_step < n.xi_max, "numerics.xi_step", "must lie in (0, xi_max)");
  require(n.noise_factor > 0.0, "numerics.noise_factor", "must be > 0");
  return n;
}

std::string position_of(const std::string& text, std::size_t byte)
{
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace

const std::vector<std::string>& commands()
{
  static const std::vector<std::string> list = {"bounds",   "cir-density", "classify",
                                                "simulate", "estimate",    "verify-tail",
                                                "verify-zero", "report"};
  return list;
}

const std::vector<ParamSpec>& task_params(const std::string& command)
{
  const auto& t = param_table();
  const auto it = t.find(command);
  if (it == t.end())
    invalid("task.command", "unknown command '" + command + "'");
  return it->second;
}

RunConfig config_from_json(const json& j)
{
  reject_unknown(j, {"model", "task", "numerics", "seed", "output"}, "");
  RunConfig c;
  if (j.contains("model"))
    c.model = model_from_json(j["model"]);
  if (j.contains("numerics"))
    c.numerics = numerics_from_json(j["numerics"]);
  if (j.contains("seed")) {
    const auto& s = j["seed"];
    if (s.is_number_unsigned())
      c.seed = s.get<std::uint64_t>();
    else
      c.seed = static_cast<std::uint64_t>(get_integer(s, "seed"));
    if (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)
      invalid("seed", "must be >= 0");
  }
  if (j.contains("output")) {
    c.output = get_string(j["output"], "output");
    require(!c.output.empty(), "output", "must not be empty");
  }

  if (!j.contains("task"))
    invalid("task", "required");
  const json& tj = j["task"];
  if (!tj.is_object())
    invalid("task", "expected an object");
  if (!tj.contains("command"))
    invalid("task.command", "required");
  c.task.command = get_string(tj["command"], "task.command");
  const auto& specs = task_params(c.task.command);
  std::set<std::string> allowed = {"command"};
  for (const auto& s : specs)
    allowed.insert(s.key);
  reject_unknown(tj, allowed, "task");
  for (const auto& s : specs) {
    const std::string field = "task." + s.key;
    c.task.params[s.key] = tj.contains(s.key) ? normalize_param(s, tj[s.key], field)
                                              : normalize_param(s, s.fallback, field);
  }
  check_task(c.task.command, c.task.params);

  try {
    model::validate(build_model(c.model));
  } catch (const Error& e) {
    throw Error(ErrorKind::validation_error, std::string("model: ") + e.what());
  }
  return c;
}

json parse_json(const std::string& text)
{
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse_error,
                "config is not valid JSON at " + position_of(text, e.byte > 0 ? e.byte - 1 : 0));
  }
}

RunConfig parse_config(const std::string& text)
{
  return config_from_json(parse_json(text));
}

RunConfig load_config(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::io_error, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json to_json(const RunConfig& c)
{
  json m;
  m["family"] = c.model.family;
  m["alpha"] = c.model.alpha;
  m["eta"] = c.model.eta;
  if (c.model.family == "tabulated" && c.model.table) {
    m["knots"] = c.model.table->knots;
    m["a"] = c.model.table->a;
    m["b"] = c.model.table->b;
    m["gamma"] = c.model.table->gamma;
  } else {
    m["a"] = c.model.a;
    m["b"] = c.model.b;
    m["gamma"] = c.model.gamma;
  }
  json task = c.task.params;
  task["command"] = c.task.command;
  json n = {{"steps", c.numerics.steps},
            {"paths", c.numerics.paths},
            {"kappa", c.numerics.kappa},
            {"gamma0", c.numerics.gamma0},
            {"xi_max", c.numerics.xi_max},
            {"xi_step", c.numerics.xi_step},
            {"noise_factor", c.numerics.noise_factor}};
  return {{"model", m}, {"task", task}, {"numerics", n}, {"seed", c.seed}, {"output", c.output}};
}

std::string config_hash(const RunConfig& c)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

model::CoefficientSet build_model(const ModelConfig& m)
{
  if (m.family == "tabulated" && m.table)
    return model::tabulated_coefficients(*m.table, m.alpha, m.eta);
  auto c = model::constant_coefficients(m.a, m.b, m.gamma, m.alpha);
  c.eta = m.eta;
  return c;
}

std::string format_double(double v)
{
  char buf[64];
  // shortest round-trip form, at most 17 significant digits
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::string& path, const std::string& text)
{
  namespace fs = std::filesystem;
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path())
    fs::create_directories(target.parent_path(), ec);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorKind::io_error, "cannot write " + tmp);
    out << text;
    out.flush();
    if (!out)
      throw Error(ErrorKind::io_error, "write failed for " + tmp);
  }
  fs::rename(tmp, target, ec);
  if (ec)
    throw Error(ErrorKind::io_error, "cannot rename " + tmp + " to " + path + ": " + ec.message());
}

namespace {

std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\r\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

} // namespace

void write_table_csv(const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& columns,
                     const std::string& path,
                     const std::vector<std::string>& preamble)
{
  if (header.size() != columns.size())
    throw Error(ErrorKind::invalid_argument, "csv header and column count differ");
  const std::size_t rows = columns.empty() ? 0 : columns[0].size();
  for (const auto& col : columns)
    if (col.size() != rows)
      throw Error(ErrorKind::invalid_argument, "csv columns must have equal lengths");
  std::string text;
  for (const auto& line : preamble)
    text += "# " + line + "\n";
  for (std::size_t j = 0; j < header.size(); ++j)
    text += (j ? "," : "") + csv_field(header[j]);
  text += "\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j)
        text += ',';
      text += format_double(columns[j][i]);
    }
    text += "\n";
  }
  write_atomic(path, text);
}

void write_csv(std::span<const double> grid,
               std::span<const double> values,
               const std::vector<std::string>& header,
               const std::string& path,
               const std::vector<std::string>& preamble)
{
  if (grid.size() != values.size())
    throw Error(ErrorKind::invalid_argument, "grid and values differ in length");
  if (header.size() != 2)
    throw Error(ErrorKind::invalid_argument, "two header names expected");
  write_table_csv(header,
                  {std::vector<double>(grid.begin(), grid.end()),
                   std::vector<double>(values.begin(), values.end())},
                  path, preamble);
}

CsvTable read_csv(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::io_error, "cannot read " + path);
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    auto fields = split_csv_line(line);
    if (!have_header) {
      t.header = fields;
      t.columns.assign(fields.size(), {});
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw Error(ErrorKind::parse_error, "csv row with " + std::to_string(fields.size()) +
                                            " fields, expected " + std::to_string(t.header.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
      double v = 0.0;
      const auto& f = fields[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw Error(ErrorKind::parse_error, "bad number '" + f + "' in " + path);
      t.columns[j].push_back(v);
    }
  }
  if (!have_header)
    throw Error(ErrorKind::parse_error, "csv without header: " + path);
  return t;
}

json error_json(std::string_view kind, const std::string& message)
{
  return {{"error", {{"kind", std::string(kind)}, {"message", message}}}};
}

// --- dispatch ---------------------------------------------------------------

namespace {

json log_value(const bounds::LogValue& v)
{
  return {{"log", v.log}, {"value", v.value()}, {"saturated", v.saturated()}};
}

json condition_json(const model::ConditionResult& r)
{
  return {{"name", r.name},
          {"status", model::to_string(r.status)},
          {"witnesses", r.witnesses},
          {"note", r.note},
          {"value", r.value ? json(*r.value) : json()}};
}

json boundary_json(const boundary::BoundaryReport& r)
{
  json j;
  j["classification"] = boundary::to_string(r.classification);
  j["rule"] = boundary::to_string(r.rule);
  j["cpoint"] = r.cpoint;
  j["p_c_samples"] = json::array();
  for (const auto& [x, p] : r.p_c_samples)
    j["p_c_samples"].push_back({x, std::isfinite(p) ? json(p) : json(p < 0 ? "-inf" : "inf")});
  j["conditions"] = json::array();
  for (const auto& c : r.conditions)
    j["conditions"].push_back(condition_json(c));
  if (r.l_star)
    j["l_star"] = {{"value", r.l_star->value},
                   {"stable", r.l_star->stable},
                   {"exceeds_one", r.l_star->exceeds_one}};
  else
    j["l_star"] = nullptr;
  j["notes"] = r.notes;
  return j;
}

json bound_values_json(const bounds::BoundValues& v)
{
  return {{"P_0", v.P_0},
          {"P_1", v.P_1},
          {"P_k", v.P_k},
          {"P_sigma_k", v.P_sigma_k},
          {"P_sigma_mk", v.P_sigma_mk},
          {"P_Z_1", v.P_Z_1},
          {"P_C_m", log_value(v.P_C_m)},
          {"C_m", log_value(v.C_m)},
          {"K_m", log_value(v.K_m)},
          {"e_8", log_value(v.e_8)},
          {"e_2pow", log_value(v.e_2pow)},
          {"e_Z_lin", log_value(v.e_Z_lin)},
          {"e_Z_2pow", log_value(v.e_Z_2pow)},
          {"theta_k", log_value(v.theta_k)},
          {"lambda_k", log_value(v.lambda_k)},
          {"phi_k", v.phi_k},
          {"phi_prime_k", v.phi_prime_k},
          {"q_prime_k", v.q_prime_k}};
}

class Emitter
{
public:
  Emitter(const RunConfig& c)
    : config_(c)
    , hash_(config_hash(c))
    , dir_(c.output)
  {}

  const std::string& hash() const { return hash_; }

  std::vector<std::string> preamble() const
  {
    return {"sqrtdiff " + std::string(version), "config_hash " + hash_};
  }

  std::string table(const std::string& name,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& columns)
  {
    const std::string file = name + ".csv";
    write_table_csv(header, columns, (dir_ / file).string(), preamble());
    written_.push_back((dir_ / file).string());
    return file;
  }

  std::string curves(const std::string& prefix, verify::VerificationReport& r)
  {
    for (const auto& c : r.curves)
      r.artifacts.push_back(table(prefix + "_" + c.name, c.columns, c.data));
    return prefix;
  }

  json stamp(json body) const
  {
    body["config_hash"] = hash_;
    body["version"] = std::string(version);
    body["config"] = to_json(config_);
    return body;
  }

  void report(const std::string& name, const json& body)
  {
    const auto path = (dir_ / (name + ".json")).string();
    write_atomic(path, stamp(body).dump(2) + "\n");
    written_.insert(written_.begin(), path);
  }

  std::vector<std::string> written() const { return written_; }

private:
  const RunConfig& config_;
  std::string hash_;
  std::filesystem::path dir_;
  std::vector<std::string> written_;
};

struct Outcome
{
  json body;
  int exit_code = 0;
};

double num(const json& p, const char* key)
{
  return p.at(key).get<double>();
}

std::optional<double> opt(const json& p, const char* key)
{
  const auto& v = p.at(key);
  return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
}

bool is_cir(const ModelConfig& m)
{
  return m.family == "constant" && m.alpha == 0.5;
}

cir::CIRParams require_cir(const RunConfig& c, double x0, double t, const std::string& what)
{
  if (!is_cir(c.model))
    throw Error(ErrorKind::out_of_regime,
                what + " needs the constant family with alpha = 0.5 (the CIR oracle)");
  return cir::cir_params(c.model.a, c.model.b, c.model.gamma, x0, t);
}

double gamma_sup(const ModelConfig& m)
{
  if (m.family == "tabulated" && m.table) {
    double g = 0.0;
    for (double v : m.table->gamma)
      g = std::max(g, std::fabs(v));
    return g;
  }
  return std::fabs(m.gamma);
}

struct Samples
{
  std::vector<double> values;
  std::string scheme;
  std::size_t nonpositive = 0;
};

//! Terminal values X_t. The exact transition needs no time grid, so the
//! exact source draws X_t directly.
Samples draw_samples(const RunConfig& c, double x0, double t, const std::string& scheme_name)
{
  const auto scheme = mc::parse_scheme(scheme_name);
  Samples s;
  s.scheme = mc::to_string(scheme);
  const auto n = static_cast<std::size_t>(c.numerics.paths);
  if (scheme == mc::Scheme::exact_cir) {
    if (!is_cir(c.model))
      throw Error(ErrorKind::scheme_mismatch, "the exact scheme needs a constant model with alpha = 0.5");
    s.values = verify::exact_samples(cir::cir_params(c.model.a, c.model.b, c.model.gamma, x0, t), n, c.seed);
  } else {
    mc::SimulationOptions o;
    o.x = x0;
    o.t = t;
    o.n_steps = c.numerics.steps;
    o.n_paths = n;
    o.scheme = scheme;
    o.master_seed = c.seed;
    o.record_points = 0;
    s.values = simulate_paths(build_model(c.model), o).terminal;
  }
  for (double v : s.values)
    s.nonpositive += v <= 0.0;
  return s;
}

//! Log-kernel estimate on the positive samples, scaled by their share so
//! that the estimate keeps the mass the positive part carries.
density::DensityEstimate log_kde(const Samples& s, std::span<const double> grid, std::optional<double> h)
{
  std::vector<double> pos;
  pos.reserve(s.values.size());
  for (double v : s.values)
    if (v > 0.0)
      pos.push_back(v);
  if (pos.empty())
    throw Error(ErrorKind::nonpositive_sample, "no positive samples for the log kernel");
  const double bw = h ? *h : density::default_bandwidth(pos, density::Kernel::log_gaussian);
  auto d = density::kde(pos, grid, bw, density::Kernel::log_gaussian);
  const double share = static_cast<double>(pos.size()) / static_cast<double>(s.values.size());
  for (auto& v : d.values)
    v *= share;
  d.n_samples = s.values.size();
  return d;
}

json sample_summary(const Samples& s)
{
  return {{"scheme", s.scheme},
          {"n_samples", s.values.size()},
          {"nonpositive", s.nonpositive},
          {"mean", numerics::mean(s.values)}};
}

Outcome cmd_bounds(const RunConfig& c, Emitter&)
{
  const auto& p = c.task.params;
  const int m = static_cast<int>(p.at("m").get<std::int64_t>());
  const int k = static_cast<int>(p.at("k").get<std::int64_t>());
  const auto ctx = bounds::make_context(num(p, "t"), num(p, "T"), num(p, "R"), m, 1, k, c.numerics.kappa);
  const std::string norms = p.at("norms").get<std::string>();
  model::NormTable table;
  if (norms == "ones") {
    table = model::uniform_norm_table(1.0, m * k + 1, num(p, "R"));
    table.y0 = num(p, "y0");
  } else {
    table = model::local_norms(build_model(c.model), num(p, "y0"), num(p, "R"), m * k + 1);
  }
  table.q = num(p, "q");
  table.q_bar = num(p, "q_bar");
  const auto v = bounds::evaluate(table, ctx);
  json sat = json::object();
  sat["any"] = v.any_saturated();
  for (const auto& [name, lv] : std::vector<std::pair<std::string, bounds::LogValue>>{
         {"P_C_m", v.P_C_m}, {"C_m", v.C_m}, {"K_m", v.K_m}, {"e_8", v.e_8},
         {"e_2pow", v.e_2pow}, {"e_Z_lin", v.e_Z_lin}, {"e_Z_2pow", v.e_Z_2pow},
         {"theta_k", v.theta_k}, {"lambda_k", v.lambda_k}})
    sat[name] = lv.saturated();
  json inputs = p;
  inputs["d"] = 1;
  inputs["kappa"] = ctx.kappa;
  inputs["gamma_exponent"] = ctx.gamma_exponent;
  inputs["norms_lower_bound"] = table.lower_bound && norms == "model";
  inputs["c_star"] = table.c_star;
  return {{{"command", "bounds"}, {"inputs", inputs}, {"values", bound_values_json(v)}, {"saturated", sat}}, 0};
}

Outcome cmd_cir_density(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  const auto cp = require_cir(c, num(p, "x0"), num(p, "t"), "cir-density");
  const auto grid = numerics::linspace(num(p, "y_min"), num(p, "y_max"),
                                       static_cast<std::size_t>(p.at("n").get<std::int64_t>()));
  const bool bessel = p.at("form").get<std::string>() == "bessel";
  std::vector<double> pdf(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= 0.0)
      continue;
    pdf[i] = bessel ? cir::ncx2_pdf_bessel(grid[i] / cp.L, cp.delta, cp.zeta).pdf / cp.L
                    : cir::cir_density(cp, grid[i]).pdf;
  }
  const auto file = out.table("cir_density", {"y", "pdf"}, {grid, pdf});
  const auto mv = cir::cir_mean_var(cp);
  return {{{"command", "cir-density"},
           {"form", bessel ? "bessel" : "series"},
           {"parameters", {{"L", cp.L}, {"delta", cp.delta}, {"zeta", cp.zeta}}},
           {"mean", mv.mean},
           {"variance", mv.variance},
           {"mass_on_grid", numerics::trapezoid(grid, pdf)},
           {"artifacts", {file}}},
          0};
}

Outcome cmd_classify(const RunConfig& c, Emitter&)
{
  const auto cs = build_model(c.model);
  const auto r = boundary::classify_zero_boundary(cs, num(c.task.params, "cpoint"));
  json body = boundary_json(r);
  body["command"] = "classify";
  if (c.model.family == "constant")
    body["feller_ratio"] = 2.0 * c.model.a / (c.model.gamma * c.model.gamma);
  return {body, r.classification == boundary::Classification::inconclusive ? 2 : 0};
}

json functional_json(const mc::PathFunctionalResult& r)
{
  return {{"estimate", r.estimate},
          {"std_error", r.std_error},
          {"n_paths", r.n_paths},
          {"descriptor", r.descriptor},
          {"below_floor_fraction", r.below_floor_fraction}};
}

Outcome cmd_simulate(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  mc::SimulationOptions o;
  o.x = num(p, "x0");
  o.t = num(p, "t");
  o.n_steps = c.numerics.steps;
  o.n_paths = static_cast<std::size_t>(c.numerics.paths);
  o.scheme = mc::parse_scheme(p.at("scheme").get<std::string>());
  o.master_seed = c.seed;
  o.record_points = static_cast<int>(p.at("record_points").get<std::int64_t>());
  const auto e = mc::simulate_paths(build_model(c.model), o);

  json body;
  body["command"] = "simulate";
  body["scheme"] = mc::to_string(e.scheme);
  body["seed_rule"] = e.seed_rule;
  body["n_paths"] = e.n_paths;
  body["n_steps"] = e.n_steps;
  body["terminal_mean"] = functional_json(mc::terminal_mean(e));
  body["sup_moment_1"] = functional_json(mc::sup_moment(e, 1.0, mc::Sign::plus));
  body["sup_moment_2"] = functional_json(mc::sup_moment(e, 2.0, mc::Sign::plus));
  const auto inv = mc::sup_moment(e, 1.0, mc::Sign::minus, true);
  body["inverse_inf_moment_1"] = functional_json(inv);
  body["terminal_quantiles"] = json::object();
  for (double q : {0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99})
    body["terminal_quantiles"][format_double(q)] = numerics::quantile(e.terminal, q);
  body["min_path_value"] = *std::min_element(e.path_min.begin(), e.path_min.end());

  std::vector<std::string> files;
  const std::size_t R = e.record_steps.size();
  if (R > 0) {
    std::vector<double> times(R), mean(R), se(R);
    std::vector<double> col(e.n_paths);
    for (std::size_t j = 0; j < R; ++j) {
      times[j] = e.time_grid[static_cast<std::size_t>(e.record_steps[j])];
      for (std::size_t i = 0; i < e.n_paths; ++i)
        col[i] = e.state(i, j);
      mean[j] = numerics::mean(col);
      se[j] = e.n_paths > 1 ? numerics::sample_std(col) / std::sqrt(static_cast<double>(e.n_paths)) : 0.0;
    }
    files.push_back(out.table("simulate_mean", {"t", "mean", "std_error"}, {times, mean, se}));
    if (p.at("write_paths").get<bool>()) {
      std::vector<std::string> header = {"path", "terminal", "path_min", "path_max"};
      std::vector<std::vector<double>> cols(4 + R, std::vector<double>(e.n_paths));
      for (std::size_t i = 0; i < e.n_paths; ++i) {
        cols[0][i] = static_cast<double>(i);
        cols[1][i] = e.terminal[i];
        cols[2][i] = e.path_min[i];
        cols[3][i] = e.path_max[i];
        for (std::size_t j = 0; j < R; ++j)
          cols[4 + j][i] = e.state(i, j);
      }
      for (std::size_t j = 0; j < R; ++j)
        header.push_back("x@" + format_double(times[j]));
      files.push_back(out.table("simulate_paths", header, cols));
    }
    body["record_times"] = times;
  }
  body["artifacts"] = files;
  return {body, 0};
}

Outcome cmd_estimate(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  const auto s = draw_samples(c, num(p, "x0"), num(p, "t"), p.at("scheme").get<std::string>());
  const auto grid = numerics::linspace(num(p, "y_min"), num(p, "y_max"),
                                       static_cast<std::size_t>(p.at("n").get<std::int64_t>()));
  const std::string method = p.at("method").get<std::string>();
  density::DensityEstimate d;
  if (method == "kde") {
    const auto h = opt(p, "bandwidth");
    d = density::kde(s.values, grid,
                     h ? *h : density::default_bandwidth(s.values, density::Kernel::gaussian),
                     density::Kernel::gaussian);
  } else if (method == "kde-log") {
    d = log_kde(s, grid, opt(p, "bandwidth"));
  } else {
    density::FourierOptions fo;
    fo.y0 = num(p, "y0");
    fo.R = num(p, "R");
    fo.xi_max = c.numerics.xi_max;
    fo.xi_step = c.numerics.xi_step;
    fo.noise_factor = c.numerics.noise_factor;
    d = density::fourier_local_density(s.values, grid, fo);
  }
  const auto file = out.table("estimate", {"y", "density"}, {d.grid, d.values});
  json diag = {{"method", method},
               {"bandwidth", d.bandwidth},
               {"n_samples", d.n_samples},
               {"m0", d.m0},
               {"ripple", d.ripple},
               {"imaginary_residue", d.imaginary_residue},
               {"truncation_estimate", d.truncation_estimate},
               {"zero_mass", d.zero_mass}};
  if (d.localization)
    diag["localization"] = {{"y0", d.localization->y0}, {"R", d.localization->R}};
  return {{{"command", "estimate"},
           {"samples", sample_summary(s)},
           {"diagnostics", diag},
           {"mass_on_grid", numerics::trapezoid(d.grid, d.values)},
           {"artifacts", {file}}},
          0};
}

struct TailInput
{
  density::DensityEstimate d;
  double y_lo = 0.0;
  double y_hi = 0.0;
  json source;
};

TailInput tail_input(const RunConfig& c, const std::string& source, double x0, double t,
                     const std::string& scheme, std::optional<double> lo, std::optional<double> hi,
                     std::size_t n)
{
  TailInput in;
  if (source == "analytic") {
    const auto cp = require_cir(c, x0, t, "the analytic source");
    in.y_lo = lo.value_or(x0 + 4.0);
    in.y_hi = hi.value_or(x0 + 29.0);
    in.d = verify::analytic_density(cp, numerics::linspace(in.y_lo, in.y_hi, n));
    in.source = {{"source", "analytic"}};
  } else {
    const auto s = draw_samples(c, x0, t, scheme);
    in.y_lo = lo.value_or(x0 + 1.5);
    // the kernel estimate is usable up to where samples still sit
    in.y_hi = hi.value_or(numerics::quantile(s.values, 0.999));
    if (!(in.y_hi > in.y_lo))
      throw Error(ErrorKind::out_of_regime, "tail range is empty: y_hi = " + format_double(in.y_hi) +
                                              " <= y_lo = " + format_double(in.y_lo));
    const auto grid = numerics::linspace(in.y_lo, in.y_hi, n);
    in.d = density::kde(s.values, grid, density::default_bandwidth(s.values, density::Kernel::gaussian),
                        density::Kernel::gaussian);
    in.source = sample_summary(s);
    in.source["source"] = "mc";
    in.source["bandwidth"] = in.d.bandwidth;
  }
  return in;
}

verify::VerificationReport run_tail(const RunConfig& c, const TailInput& in, double x0, double t)
{
  const auto env = bounds::make_envelope(c.model.alpha, gamma_sup(c.model), x0, t, c.numerics.gamma0);
  auto r = verify::verify_tail(in.d, env, in.y_lo, in.y_hi, c.seed);
  r.parameters["density"] = in.source;
  return r;
}

verify::VerificationReport run_zero(const RunConfig& c, const std::string& source, double x0, double t,
                                    const std::string& scheme, std::optional<double> lo,
                                    std::optional<double> hi, std::size_t n)
{
  verify::ZeroExpectation expect;
  json src;
  density::DensityEstimate d;
  double y_lo = 0.0, y_hi = 0.0;
  auto check_range = [&] {
    if (!(y_lo > 0.0 && y_lo < y_hi))
      throw Error(ErrorKind::out_of_regime, "zero range must satisfy 0 < y_lo < y_hi");
  };
  if (source == "analytic") {
    const auto cp = require_cir(c, x0, t, "the analytic source");
    y_lo = lo.value_or(1e-6);
    y_hi = hi.value_or(1e-3);
    check_range();
    d = verify::analytic_density(cp, numerics::logspace(y_lo, y_hi, n));
    src = {{"source", "analytic"}};
  } else {
    const auto s = draw_samples(c, x0, t, scheme);
    // start where a few hundred samples per 4e5 lie below, span a decade
    y_lo = lo.value_or(std::max(1e-4, numerics::quantile(s.values, 2.5e-4)));
    y_hi = hi.value_or(std::min(0.1, std::max(1e-2, 10.0 * y_lo)));
    check_range();
    d = log_kde(s, numerics::logspace(y_lo, y_hi, n), std::nullopt);
    src = sample_summary(s);
    src["source"] = "mc";
    src["bandwidth"] = d.bandwidth;
  }
  if (is_cir(c.model)) {
    const double delta = 4.0 * c.model.a / (c.model.gamma * c.model.gamma);
    if (source == "analytic")
      expect.delta = delta;
    else if (delta != 2.0)
      expect.expected_sign = delta > 2.0 ? 1 : -1;
  } else {
    expect.l_star = boundary::estimate_l_star(build_model(c.model)).value;
    expect.l_star_threshold = 3.0 + bounds::eval_combinatorial(3, 1, 2.0, 0.0).q_prime_k;
  }
  auto r = verify::verify_zero(d, expect, y_lo, y_hi, c.seed);
  r.parameters["density"] = src;
  return r;
}

Outcome cmd_verify_tail(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  const double x0 = num(p, "x0"), t = num(p, "t");
  const auto in = tail_input(c, p.at("source").get<std::string>(), x0, t, p.at("scheme").get<std::string>(),
                             opt(p, "y_lo"), opt(p, "y_hi"),
                             static_cast<std::size_t>(p.at("n").get<std::int64_t>()));
  auto r = run_tail(c, in, x0, t);
  out.curves("verify_tail", r);
  json body = verify::to_json(r);
  body["command"] = "verify-tail";
  return {body, verify::exit_code(r.outcome)};
}

Outcome cmd_verify_zero(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  auto r = run_zero(c, p.at("source").get<std::string>(), num(p, "x0"), num(p, "t"),
                    p.at("scheme").get<std::string>(), opt(p, "y_lo"), opt(p, "y_hi"),
                    static_cast<std::size_t>(p.at("n").get<std::int64_t>()));
  out.curves("verify_zero", r);
  json body = verify::to_json(r);
  body["command"] = "verify-zero";
  return {body, verify::exit_code(r.outcome)};
}

Outcome cmd_report(const RunConfig& c, Emitter& out)
{
  const auto& p = c.task.params;
  const double x0 = num(p, "x0"), t = num(p, "t");
  const std::string source = p.at("source").get<std::string>();
  const std::string scheme = p.at("scheme").get<std::string>();
  std::vector<verify::VerificationReport> sections;

  if (is_cir(c.model)) {
    const auto cp = cir::cir_params(c.model.a, c.model.b, c.model.gamma, x0, t);
    auto r = verify::cross_validate(cp, static_cast<std::size_t>(p.at("xval_samples").get<std::int64_t>()),
                                    {c.seed, c.seed + 1});
    out.curves("report_xval", r);
    sections.push_back(std::move(r));
  }

  const auto in = tail_input(c, source, x0, t, scheme, std::nullopt, std::nullopt, 251);
  {
    auto r = run_tail(c, in, x0, t);
    out.curves("report_tail", r);
    sections.push_back(std::move(r));
  }
  {
    auto r = run_zero(c, source, x0, t, scheme, std::nullopt, std::nullopt, 61);
    out.curves("report_zero", r);
    sections.push_back(std::move(r));
  }
  for (int order : {1, 2, 5}) {
    auto r = verify::verify_polydecay(in.d, order, in.y_lo, in.y_hi, c.seed);
    out.curves("report_polydecay_" + std::to_string(order), r);
    sections.push_back(std::move(r));
  }

  bool any_fail = false, any_open = false;
  json list = json::array();
  for (const auto& r : sections) {
    any_fail |= r.outcome == verify::Outcome::fail;
    any_open |= r.outcome == verify::Outcome::inconclusive;
    list.push_back(verify::to_json(r));
  }
  const auto overall = any_fail ? verify::Outcome::fail
                       : any_open ? verify::Outcome::inconclusive
                                  : verify::Outcome::pass;
  return {{{"command", "report"}, {"outcome", verify::to_string(overall)}, {"sections", list}},
          verify::exit_code(overall)};
}

} // namespace

RunResult run(const RunConfig& config)
{
  Emitter out(config);
  RunResult result;
  const std::string& cmd = config.task.command;
  try {
    Outcome o;
    if (cmd == "bounds")
      o = cmd_bounds(config, out);
    else if (cmd == "cir-density")
      o = cmd_cir_density(config, out);
    else if (cmd == "classify")
      o = cmd_classify(config, out);
    else if (cmd == "simulate")
      o = cmd_simulate(config, out);
    else if (cmd == "estimate")
      o = cmd_estimate(config, out);
    else if (cmd == "verify-tail")
      o = cmd_verify_tail(config, out);
    else if (cmd == "verify-zero")
      o = cmd_verify_zero(config, out);
    else if (cmd == "report")
      o = cmd_report(config, out);
    else
      throw Error(ErrorKind::validation_error, "task.command: unknown command '" + cmd + "'");
    out.report(cmd, o.body);
    result.exit_code = o.exit_code;
    result.report = out.stamp(o.body);
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    result.report = out.stamp(error_json(err ? to_string(err->kind()) : "internal", e.what()));
    result.exit_code = 3;
    try {
      out.report("error", error_json(err ? to_string(err->kind()) : "internal", e.what()));
    } catch (const std::exception&) {
      // the structured error still reaches the caller through the result
    }
  }
  result.artifacts = out.written();
  return result;
}

} // namespace sqrtdiff::cli
