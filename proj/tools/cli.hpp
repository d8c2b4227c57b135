#pragma once

// Command-line front end. Kept in a header so tests can drive run_cli directly.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cifpoint/cifpoint.hpp"

namespace cifpoint::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

namespace detail {

struct DataOptions {
  std::string input;
  CsvSchema schema;
  int cause = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--input", o.input, "CSV file with one row per subject")->required();
  cmd->add_option("--time-col", o.schema.time_column, "follow-up time column")->capture_default_str();
  cmd->add_option("--status-col", o.schema.status_column, "status column (0 = censored, k = cause k)")
      ->capture_default_str();
  cmd->add_option("--group-col", o.schema.group_column, "group label column")->capture_default_str();
  cmd->add_option("--cause", o.cause, "cause of interest")->capture_default_str()->check(CLI::PositiveNumber);
}

Dataset load(const DataOptions& o) {
  std::ifstream in(o.input);
  if (!in) throw DataError("cannot open input file '" + o.input + "'");
  return parse_dataset(in, o.schema);
}

std::vector<double> parse_times(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = cifpoint::detail::parse_real(cifpoint::detail::trim(item));
    if (!v || !(*v >= 0.0)) throw CLI::ValidationError("--times", "cannot parse time '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw CLI::ValidationError("--times", "no time points given");
  return out;
}

VarianceKind parse_variance(const std::string& v) {
  return v == "aalen" ? VarianceKind::Aalen : VarianceKind::Gaynor;
}

std::string fixed3(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

void write_output(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write output file '" + path + "'");
  out << text;
}

const std::vector<std::string> kMethods{"linear", "log", "llog", "arcs", "logit", "pseudo-llog", "pseudo-logit", "all"};

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fixed-time inference on cumulative incidence functions under competing risks", "cifpoint"};
  app.require_subcommand(1);

  // estimate ---------------------------------------------------------------
  detail::DataOptions est_data;
  std::string est_times, est_variance = "gaynor", est_method = "llog", est_out;
  double est_level = 0.95;
  bool est_json = false;
  auto* est = app.add_subcommand("estimate", "per-group cumulative incidence, variance and pointwise CI");
  detail::add_data_options(est, est_data);
  est->add_option("--times", est_times, "comma-separated time points")->required();
  est->add_option("--variance", est_variance)->check(CLI::IsMember({"aalen", "gaynor"}))->capture_default_str();
  est->add_option("--method", est_method, "transform used for the pointwise CI")
      ->check(CLI::IsMember({"linear", "log", "llog", "arcs", "logit"}))
      ->capture_default_str();
  est->add_option("--level", est_level, "confidence level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  est->add_flag("--json", est_json, "print JSON instead of a table");
  est->add_option("--out", est_out, "also write the JSON document to this path");

  // test -------------------------------------------------------------------
  detail::DataOptions test_data;
  std::string test_times, test_time, test_method = "llog", test_variance = "gaynor", test_out;
  bool test_json = false;
  auto* tst = app.add_subcommand("test", "fixed-time equality test(s) between groups");
  detail::add_data_options(tst, test_data);
  auto* opt_time = tst->add_option("--time", test_time, "time point(s), comma-separated");
  auto* opt_times = tst->add_option("--times", test_times, "alias of --time");
  opt_time->excludes(opt_times);
  tst->add_option("--method", test_method)->check(CLI::IsMember(detail::kMethods))->capture_default_str();
  tst->add_option("--variance", test_variance)->check(CLI::IsMember({"aalen", "gaynor"}))->capture_default_str();
  tst->add_flag("--json", test_json, "print JSON instead of a table");
  tst->add_option("--out", test_out, "also write the JSON document to this path");

  // simulate ---------------------------------------------------------------
  std::string sim_scenario, sim_out, sim_json_out;
  std::optional<int> sim_reps;
  std::optional<std::string> sim_seed;
  unsigned sim_threads = 0;
  bool sim_json = false;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo rejection rates of the twelve tests");
  sim->add_option("--scenario", sim_scenario, "scenario configuration file")->required();
  sim->add_option("--reps", sim_reps, "override the replication count")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "override the master seed");
  sim->add_option("--threads", sim_threads, "worker threads (0 = hardware concurrency)");
  sim->add_option("--out", sim_out, "write results as CSV");
  sim->add_option("--json-out", sim_json_out, "write results as JSON");
  sim->add_flag("--json", sim_json, "print JSON instead of a table");

  // summarize-anova --------------------------------------------------------
  std::string an_input, an_response = "type1";
  int an_model = 4;
  bool an_json = false;
  auto* an = app.add_subcommand("summarize-anova", "no-intercept ANOVA summary of a simulation grid");
  an->add_option("--input", an_input, "results CSV written by `simulate --out`")->required();
  an->add_option("--model", an_model)->check(CLI::Range(1, 4))->capture_default_str();
  an->add_option("--response", an_response, "type1: percent rejection minus nominal; power: percent rejection")
      ->check(CLI::IsMember({"type1", "power"}))
      ->capture_default_str();
  an->add_flag("--json", an_json, "print JSON instead of a table");

  // plot-data --------------------------------------------------------------
  detail::DataOptions plot_data;
  std::string plot_variance = "gaynor", plot_out;
  auto* plot = app.add_subcommand("plot-data", "tidy CSV of the step curves for external plotting");
  detail::add_data_options(plot, plot_data);
  plot->add_option("--variance", plot_variance)->check(CLI::IsMember({"aalen", "gaynor"}))->capture_default_str();
  plot->add_option("--out", plot_out, "write to this path instead of standard output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help("", CLI::AppFormatMode::All);
    return kUsage;
  }

  try {
    if (*est) {
      const auto data = detail::load(est_data);
      const auto times = detail::parse_times(est_times);
      const auto kind = detail::parse_variance(est_variance);
      const auto transform = *parse_transform(est_method);
      json doc = {{"cause", est_data.cause}, {"variance", est_variance}, {"ci_transform", est_method},
                  {"level", est_level}, {"groups", json::array()}};
      std::ostringstream table;
      table << "group      time      cif   variance     lower     upper\n";
      int status = kOk;
      for (const auto& g : data.groups()) {
        const auto events = build_event_table(data, g);
        const auto curve = with_variance(cif_estimate(events, est_data.cause), events, kind);
        json rows = json::array();
        for (double t : times) {
          const double cif = cif_at(curve, t);
          const double var = cif_variance(kind, events, est_data.cause, t);
          json row = {{"t", t}, {"cif", cif}, {"variance", var}};
          std::string lo = "NA", hi = "NA";
          try {
            auto [l, h] = pointwise_ci(cif, var, transform, est_level);
            row["ci"] = {l, h};
            lo = detail::fixed3(l);
            hi = detail::fixed3(h);
          } catch (const NotEstimable& e) {
            row["ci"] = nullptr;
            row["ci_error"] = e.what();
          }
          rows.push_back(row);
          table << std::left << std::setw(8) << g << std::right << std::setw(7) << t << std::setw(9)
                << detail::fixed3(cif) << std::setw(11) << detail::fixed3(var) << std::setw(10) << lo
                << std::setw(10) << hi << '\n';
        }
        doc["groups"].push_back({{"group", g}, {"estimates", rows}, {"curve", to_json(curve)}});
      }
      if (!est_out.empty()) detail::write_output(est_out, doc.dump(2) + "\n");
      out << (est_json ? doc.dump(2) + "\n" : table.str());
      return status;
    }

    if (*tst) {
      const auto data = detail::load(test_data);
      if (data.groups().size() < 2) throw DataError("the test needs at least two groups");
      const std::string list = !test_time.empty() ? test_time : test_times;
      if (list.empty()) throw CLI::ValidationError("--time", "a time point is required");
      const auto times = detail::parse_times(list);
      std::vector<std::string> methods;
      std::vector<std::string> variances;
      if (test_method == "all") {
        for (auto t : kAllTransforms) methods.push_back(to_string(t));
        methods.push_back("pseudo-llog");
        methods.push_back("pseudo-logit");
        variances = {"gaynor", "aalen"};
      } else {
        methods = {test_method};
        variances = {test_variance};
      }
      std::vector<EventTable> tables;
      for (const auto& g : data.groups()) tables.push_back(build_event_table(data, g));

      json results = json::array();
      std::ostringstream table;
      table << "method            time     p-value (statistic)\n";
      bool failed = false;
      auto record_failure = [&](const std::string& label, double t, const std::exception& e) {
        failed = true;
        results.push_back({{"method", label}, {"t", t}, {"error", e.what()}});
        table << std::left << std::setw(16) << label << std::right << std::setw(7) << t << "     error: " << e.what()
              << '\n';
      };
      auto record = [&](const FixedTimeTestResult& r) {
        results.push_back(to_json(r));
        table << std::left << std::setw(16) << method_label(r) << std::right << std::setw(7) << r.t << "     "
              << (r.p_value < 0.001 ? "<0.001" : detail::fixed3(r.p_value)) << " ("
              << detail::fixed3(r.z ? *r.z : r.statistic) << ")\n";
      };
      for (double t : times) {
        for (const auto& v : variances) {
          for (const auto& m : methods) {
            if (m.starts_with("pseudo")) continue;
            const auto kind = detail::parse_variance(v);
            const std::string label = v + "/" + m;
            try {
              std::vector<GroupEstimate> est;
              for (const auto& tab : tables) est.push_back(estimate_at(tab, test_data.cause, t, kind));
              auto r = est.size() == 2 ? two_sample_test(est[0], est[1], t, *parse_transform(m))
                                       : k_sample_test(est, t, *parse_transform(m));
              r.variance_kind = kind;
              record(r);
            } catch (const NumericalError& e) {
              record_failure(label, t, e);
            }
          }
        }
        for (const auto& m : methods) {
          if (!m.starts_with("pseudo")) continue;
          const LinkKind link = m == "pseudo-llog" ? LinkKind::CLogLog : LinkKind::Logit;
          try {
            record(pseudo_test(data, test_data.cause, t, link));
          } catch (const NumericalError& e) {
            record_failure(std::string("pseudo/") + to_string(link), t, e);
          }
        }
      }
      json doc = {{"cause", test_data.cause}, {"groups", data.groups()}, {"results", results}};
      if (!test_out.empty()) detail::write_output(test_out, doc.dump(2) + "\n");
      out << (test_json ? doc.dump(2) + "\n" : table.str());
      return failed ? kNumerical : kOk;
    }

    if (*sim) {
      std::ifstream in(sim_scenario);
      if (!in) throw DataError("cannot open scenario file '" + sim_scenario + "'");
      auto scenarios = parse_scenarios(in);
      std::vector<ScenarioResult> results;
      for (auto s : scenarios) {
        if (sim_reps) s.reps = *sim_reps;
        if (sim_seed) s.master_seed = parse_seed(*sim_seed);
        results.push_back(run_scenario(s, sim_threads));
      }
      if (!sim_out.empty()) {
        std::ostringstream csv;
        write_results_csv(csv, results);
        detail::write_output(sim_out, csv.str());
      }
      json doc = json::array();
      for (const auto& r : results) doc.push_back(to_json(r));
      if (!sim_json_out.empty()) detail::write_output(sim_json_out, doc.dump(2) + "\n");
      if (sim_json) {
        out << doc.dump(2) << '\n';
      } else {
        out << "    t    n1    n2    SHR  cens ";
        for (std::size_t k = 0; k < kTestCount; ++k) out << std::setw(13) << TestId::from_index(k).name();
        out << '\n';
        for (const auto& r : results) {
          const auto& s = r.scenario;
          out << std::setw(5) << s.t_fixed << std::setw(6) << s.n1 << std::setw(6) << s.n2 << std::setw(7)
              << detail::fixed3(s.shr()) << std::setw(6) << s.censor_fraction << ' ';
          for (const auto& tally : r.tallies) out << std::setw(13) << detail::fixed3(tally.rate());
          out << '\n';
        }
      }
      return kOk;
    }

    if (*an) {
      std::ifstream in(an_input);
      if (!in) throw DataError("cannot open results file '" + an_input + "'");
      const auto grid = read_results_csv(in);
      const auto response = an_response == "power" ? AnovaResponse::Power : AnovaResponse::TypeIDeviation;
      const auto table = anova_summarize(grid, response, an_model);
      if (an_json) {
        json coefs = json::object();
        for (std::size_t i = 0; i < table.column_names.size(); ++i)
          coefs[table.column_names[i]] = table.coefficients(static_cast<Eigen::Index>(i));
        json panel = json::array();
        for (std::size_t r = 0; r < table.panel_rows.size(); ++r) {
          json row = {{"level", table.panel_rows[r]}};
          for (std::size_t k = 0; k < kTestCount; ++k) row[TestId::from_index(k).name()] = table.panel[r][k];
          panel.push_back(row);
        }
        out << json{{"model", table.model}, {"response", an_response}, {"block", table.block_factor},
                    {"coefficients", coefs}, {"panel", panel}}
                   .dump(2)
            << '\n';
      } else {
        out << "Model " << table.model << (table.block_factor.empty() ? "" : " (" + table.block_factor + ")")
            << '\n'
            << std::setw(10) << "level";
        for (std::size_t k = 0; k < kTestCount; ++k) out << std::setw(14) << TestId::from_index(k).name();
        out << '\n';
        for (std::size_t r = 0; r < table.panel_rows.size(); ++r) {
          out << std::setw(10) << table.panel_rows[r];
          for (double v : table.panel[r]) out << std::setw(14) << detail::fixed3(v);
          out << '\n';
        }
      }
      return kOk;
    }

    if (*plot) {
      const auto data = detail::load(plot_data);
      const auto kind = detail::parse_variance(plot_variance);
      std::ostringstream csv;
      csv << plot_data.schema.group_column << ",cause," << plot_data.schema.time_column
          << ",cif,variance,survival\n";
      for (const auto& g : data.groups()) {
        const auto events = build_event_table(data, g);
        const auto curve = with_variance(cif_estimate(events, plot_data.cause), events, kind);
        const auto surv = km_survival(events);
        csv << g << ',' << plot_data.cause << ",0,0,0,1\n";
        for (std::size_t j = 0; j < curve.steps.knots.size(); ++j)
          csv << g << ',' << plot_data.cause << ',' << format_double(curve.steps.knots[j]) << ','
              << format_double(curve.steps.values[j]) << ',' << format_double(curve.variance_steps->values[j])
              << ',' << format_double(surv.values[j]) << '\n';
      }
      if (plot_out.empty()) out << csv.str();
      else detail::write_output(plot_out, csv.str());
      return kOk;
    }
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    err << json{{"error", "numerical"}, {"message", e.what()}}.dump() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace cifpoint::cli
