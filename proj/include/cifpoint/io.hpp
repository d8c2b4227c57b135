#pragma once

// Serialization: curves and test results as JSON, simulation results as CSV
// and JSON, and the key-value scenario configuration format.
//
// Scenario files hold one `key = value` pair per line; `#` starts a comment.
// List-valued keys span a factor grid and the file expands to their Cartesian
// product:
//
//   sizes     = 50:50, 150:150, 50:100   # n1:n2 pairs (or n1 = .. / n2 = ..)
//   shr       = 1, 1.5, 2                # or beta = ... (log SHR)
//   times     = 0.5, 1                   # alias: t
//   censoring = 0, 0.15, 0.30, 0.45      # alias: censor_fraction
//   p = 0.66   alpha = 0.05   reps = 10000   seed = 42
//   censoring_mode = pooled              # or per-group
//   cause = 1

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cifpoint/cif.hpp"
#include "cifpoint/data.hpp"
#include "cifpoint/errors.hpp"
#include "cifpoint/fixed_time_tests.hpp"
#include "cifpoint/simulation.hpp"

namespace cifpoint {

using nlohmann::json;

/// Shortest representation that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return json(v).dump();
}

inline double parse_double_field(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  auto v = detail::parse_real(detail::trim(s));
  if (!v) throw DataError("cannot parse number '" + s + "'");
  return *v;
}

inline std::uint64_t parse_seed(std::string_view s) {
  s = detail::trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("seed must be a nonnegative integer, got '" + std::string(s) + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Curves and test results
// ---------------------------------------------------------------------------

inline json to_json(const StepFunction& f) {
  return {{"knots", f.knots}, {"values", f.values}, {"value_before_first_knot", f.value_before_first_knot}};
}

inline StepFunction step_function_from_json(const json& j) {
  StepFunction f;
  f.knots = j.at("knots").get<std::vector<double>>();
  f.values = j.at("values").get<std::vector<double>>();
  f.value_before_first_knot = j.at("value_before_first_knot").get<double>();
  if (f.knots.size() != f.values.size()) throw DataError("step function knots and values differ in length");
  return f;
}

inline json to_json(const CifCurve& c) {
  json j = {{"group", c.group}, {"cause", c.cause}, {"steps", to_json(c.steps)}, {"increments", c.increments}};
  if (c.variance_steps) {
    j["variance"] = to_json(*c.variance_steps);
    j["variance_kind"] = to_string(*c.variance_kind);
  }
  return j;
}

inline CifCurve cif_curve_from_json(const json& j) {
  CifCurve c;
  c.group = j.at("group").get<std::string>();
  c.cause = j.at("cause").get<int>();
  c.steps = step_function_from_json(j.at("steps"));
  c.increments = j.at("increments").get<std::vector<double>>();
  if (j.contains("variance")) {
    c.variance_steps = step_function_from_json(j.at("variance"));
    c.variance_kind = j.at("variance_kind").get<std::string>() == "aalen" ? VarianceKind::Aalen : VarianceKind::Gaynor;
  }
  return c;
}

/// Method label used by the CLI, e.g. "gaynor/llog" or "pseudo/logit".
inline std::string method_label(const FixedTimeTestResult& r) {
  if (r.link) return std::string("pseudo/") + to_string(*r.link);
  std::string out = r.variance_kind ? std::string(to_string(*r.variance_kind)) + "/" : std::string();
  return out + (r.transform ? to_string(*r.transform) : "?");
}

inline json to_json(const FixedTimeTestResult& r) {
  json groups = json::array();
  for (const auto& g : r.per_group) groups.push_back({{"group", g.group}, {"cif", g.cif}, {"variance", g.variance}});
  json j = {{"method", method_label(r)}, {"t", r.t},           {"statistic", r.statistic},
            {"df", r.df},                {"p_value", r.p_value}, {"per_group", groups}};
  if (r.transform) j["transform"] = to_string(*r.transform);
  if (r.variance_kind) j["variance"] = to_string(*r.variance_kind);
  if (r.link) j["link"] = to_string(*r.link);
  if (r.z) j["z"] = *r.z;
  return j;
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline std::vector<double> parse_real_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) {
    auto v = parse_real(item);
    if (!v) throw DataError("scenario key '" + key + "': cannot parse '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw DataError("scenario key '" + key + "' has no values");
  return out;
}

inline int parse_int_value(const std::string& key, const std::string& value) {
  auto v = parse_integer(trim(value));
  if (!v) throw DataError("scenario key '" + key + "': expected an integer, got '" + value + "'");
  return *v;
}

}  // namespace detail

inline std::vector<Scenario> parse_scenarios(std::istream& in) {
  Scenario base;
  std::vector<std::pair<int, int>> sizes;
  std::optional<int> n1, n2;
  std::vector<double> betas{0.0}, times{base.t_fixed}, censoring{0.0};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("scenario line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(detail::trim(std::string_view(line).substr(0, eq)));
    const std::string value(detail::trim(std::string_view(line).substr(eq + 1)));

    if (key == "sizes") {
      for (const auto& item : detail::split_list(value)) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw DataError("sizes entries must look like n1:n2, got '" + item + "'");
        sizes.emplace_back(detail::parse_int_value(key, item.substr(0, colon)),
                           detail::parse_int_value(key, item.substr(colon + 1)));
      }
    } else if (key == "n1") {
      n1 = detail::parse_int_value(key, value);
    } else if (key == "n2") {
      n2 = detail::parse_int_value(key, value);
    } else if (key == "shr") {
      betas.clear();
      for (double v : detail::parse_real_list(key, value)) {
        if (!(v > 0.0)) throw DataError("shr must be positive");
        betas.push_back(std::log(v));
      }
    } else if (key == "beta") {
      betas = detail::parse_real_list(key, value);
    } else if (key == "times" || key == "t") {
      times = detail::parse_real_list(key, value);
    } else if (key == "censoring" || key == "censor_fraction") {
      censoring = detail::parse_real_list(key, value);
    } else if (key == "p") {
      base.p = detail::parse_real_list(key, value).front();
    } else if (key == "alpha") {
      base.alpha = detail::parse_real_list(key, value).front();
    } else if (key == "reps") {
      base.reps = detail::parse_int_value(key, value);
    } else if (key == "seed") {
      base.master_seed = parse_seed(value);
    } else if (key == "censoring_mode") {
      if (value == "pooled") base.censoring = CensoringMode::Pooled;
      else if (value == "per-group") base.censoring = CensoringMode::PerGroup;
      else throw DataError("censoring_mode must be 'pooled' or 'per-group'");
    } else if (key == "cause") {
      base.cause = detail::parse_int_value(key, value);
    } else {
      throw DataError("scenario line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (n1 || n2) sizes.emplace_back(n1.value_or(base.n1), n2.value_or(n1.value_or(base.n2)));
  if (sizes.empty()) sizes.emplace_back(base.n1, base.n2);

  std::vector<Scenario> out;
  for (double t : times)
    for (auto [a, b] : sizes)
      for (double beta : betas)
        for (double cen : censoring) {
          Scenario s = base;
          s.n1 = a;
          s.n2 = b;
          s.beta = beta;
          s.t_fixed = t;
          s.censor_fraction = cen;
          s.validate();
          out.push_back(s);
        }
  return out;
}

inline std::vector<Scenario> parse_scenarios(const std::string& text) {
  std::istringstream in(text);
  return parse_scenarios(in);
}

// ---------------------------------------------------------------------------
// Simulation results
// ---------------------------------------------------------------------------

inline constexpr const char* kResultCsvHeader =
    "n1,n2,p,beta,shr,censor_fraction,t,alpha,reps,seed,censoring_mode,censor_bound_1,censor_bound_2,"
    "observed_censored_fraction,test,rejections,estimable,not_estimable,rejection_rate";

inline void write_results_csv(std::ostream& out, const std::vector<ScenarioResult>& results) {
  out << kResultCsvHeader << '\n';
  for (const auto& r : results) {
    const auto& s = r.scenario;
    for (std::size_t k = 0; k < kTestCount; ++k) {
      const auto& tally = r.tallies[k];
      out << s.n1 << ',' << s.n2 << ',' << format_double(s.p) << ',' << format_double(s.beta) << ','
          << format_double(s.shr()) << ',' << format_double(s.censor_fraction) << ',' << format_double(s.t_fixed)
          << ',' << format_double(s.alpha) << ',' << s.reps << ',' << s.master_seed << ','
          << (s.censoring == CensoringMode::Pooled ? "pooled" : "per-group") << ','
          << format_double(r.bounds.first) << ',' << format_double(r.bounds.second) << ','
          << format_double(r.observed_censored_fraction()) << ',' << TestId::from_index(k).name() << ','
          << tally.rejections << ',' << tally.estimable << ',' << tally.not_estimable << ','
          << format_double(tally.rate()) << '\n';
    }
  }
}

inline json to_json(const ScenarioResult& r) {
  const auto& s = r.scenario;
  json tests = json::object();
  for (std::size_t k = 0; k < kTestCount; ++k) {
    const auto& t = r.tallies[k];
    tests[TestId::from_index(k).name()] = {{"rejection_rate", t.rate()},
                                           {"rejections", t.rejections},
                                           {"estimable", t.estimable},
                                           {"not_estimable", t.not_estimable}};
  }
  auto bound = [](double b) { return std::isinf(b) ? json(nullptr) : json(b); };
  return {{"scenario",
           {{"n1", s.n1}, {"n2", s.n2}, {"p", s.p}, {"beta", s.beta}, {"shr", s.shr()},
            {"censor_fraction", s.censor_fraction}, {"t", s.t_fixed}, {"alpha", s.alpha}, {"reps", s.reps},
            {"seed", s.master_seed},
            {"censoring_mode", s.censoring == CensoringMode::Pooled ? "pooled" : "per-group"}}},
          {"censor_bounds", {bound(r.bounds.first), bound(r.bounds.second)}},
          {"observed_censored_fraction", r.observed_censored_fraction()},
          {"tests", tests}};
}

/// Reads back the CSV written by write_results_csv.
inline std::vector<ScenarioResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty results file");
  std::vector<std::string> header;
  for (auto f : detail::split_csv_line(line)) header.emplace_back(f);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("results file lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_n1 = col("n1"), c_n2 = col("n2"), c_p = col("p"), c_beta = col("beta"),
                    c_cen = col("censor_fraction"), c_t = col("t"), c_alpha = col("alpha"), c_reps = col("reps"),
                    c_seed = col("seed"), c_test = col("test"), c_rej = col("rejections"),
                    c_est = col("estimable"), c_ne = col("not_estimable");

  std::vector<ScenarioResult> out;
  std::map<std::string, std::size_t> index;
  int row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    std::vector<std::string> f;
    for (auto v : detail::split_csv_line(line)) f.emplace_back(v);
    if (f.size() != header.size()) throw DataError("malformed results row " + std::to_string(row));
    const std::string key = f[c_n1] + "|" + f[c_n2] + "|" + f[c_p] + "|" + f[c_beta] + "|" + f[c_cen] + "|" +
                            f[c_t] + "|" + f[c_alpha] + "|" + f[c_reps] + "|" + f[c_seed];
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      ScenarioResult r;
      auto& s = r.scenario;
      s.n1 = detail::parse_int_value("n1", f[c_n1]);
      s.n2 = detail::parse_int_value("n2", f[c_n2]);
      s.p = parse_double_field(f[c_p]);
      s.beta = parse_double_field(f[c_beta]);
      s.censor_fraction = parse_double_field(f[c_cen]);
      s.t_fixed = parse_double_field(f[c_t]);
      s.alpha = parse_double_field(f[c_alpha]);
      s.reps = detail::parse_int_value("reps", f[c_reps]);
      s.master_seed = parse_seed(f[c_seed]);
      out.push_back(r);
    }
    auto id = TestId::parse(f[c_test]);
    if (!id) throw DataError("unknown test '" + f[c_test] + "' in results row " + std::to_string(row));
    auto& tally = out[it->second].tallies[id->index()];
    tally.rejections = detail::parse_int_value("rejections", f[c_rej]);
    tally.estimable = detail::parse_int_value("estimable", f[c_est]);
    tally.not_estimable = detail::parse_int_value("not_estimable", f[c_ne]);
  }
  if (out.empty()) throw DataError("results file has no rows");
  return out;
}

}  // namespace cifpoint
