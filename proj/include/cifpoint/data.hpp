#pragma once

// Ingestion and tabulation of competing-risks data.
//
// A Dataset is the validated, immutable form of a CSV file. An EventTable is
// the per-group reduction every estimator consumes: ordered distinct failure
// times with risk-set sizes and event counts. When a failure and a censoring
// share a time the failure is taken to occur first, so the censored subject
// is still at risk at that time.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cifpoint/errors.hpp"

namespace cifpoint {

struct SubjectRecord {
  double time = 0.0;
  int status = 0;  // 0 = censored, k >= 1 = failure from cause k
  std::string group;
};

struct CsvSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  std::string group_column = "group";
};

class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<SubjectRecord> records) : records_(std::move(records)) {
    std::set<int> causes;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!std::isfinite(r.time) || r.time < 0.0)
        throw DataError("negative or non-finite time at record " + std::to_string(i + 1));
      if (r.status < 0)
        throw DataError("negative status at record " + std::to_string(i + 1));
      if (std::find(groups_.begin(), groups_.end(), r.group) == groups_.end())
        groups_.push_back(r.group);
      if (r.status > 0) causes.insert(r.status);
    }
    causes_.assign(causes.begin(), causes.end());
  }

  const std::vector<SubjectRecord>& records() const noexcept { return records_; }
  /// Distinct group labels in order of first appearance.
  const std::vector<std::string>& groups() const noexcept { return groups_; }
  /// Distinct nonzero status codes, ascending.
  const std::vector<int>& causes() const noexcept { return causes_; }
  std::size_t size() const noexcept { return records_.size(); }

  bool has_group(std::string_view label) const {
    return std::find(groups_.begin(), groups_.end(), label) != groups_.end();
  }

  Dataset subset(std::string_view label) const {
    std::vector<SubjectRecord> out;
    for (const auto& r : records_)
      if (r.group == label) out.push_back(r);
    return Dataset(std::move(out));
  }

 private:
  std::vector<SubjectRecord> records_;
  std::vector<std::string> groups_;
  std::vector<int> causes_;
};

struct EventTable {
  std::string group;
  std::size_t group_size = 0;
  std::vector<double> times;
  std::vector<int> at_risk;
  std::vector<int> all_cause_events;
  std::map<int, std::vector<int>> cause_events;
  std::vector<double> censor_times;

  std::size_t size() const noexcept { return times.size(); }

  /// d_kj for cause k at knot j; zero for causes that never occur.
  int cause_count(int cause, std::size_t j) const {
    auto it = cause_events.find(cause);
    return it == cause_events.end() ? 0 : it->second[j];
  }

  bool has_cause(int cause) const { return cause_events.count(cause) != 0; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_integer(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Accept "2.0"-style integral reals, reject "1.5".
  if (auto r = parse_real(s); r && std::isfinite(*r) && std::floor(*r) == *r &&
                              std::abs(*r) < 1e9)
    return static_cast<int>(*r);
  return std::nullopt;
}

}  // namespace detail

/// Parses a header-led CSV into a Dataset. Row numbers in error messages count
/// data rows from 1 (the header is row 0).
inline Dataset parse_dataset(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  std::optional<std::vector<std::string>> header;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    header.emplace();
    for (auto f : detail::split_csv_line(line)) header->emplace_back(f);
    break;
  }
  if (!header) throw DataError("empty file: no header row");

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header->begin(), header->end(), name);
    if (it == header->end()) throw DataError("missing column '" + name + "' in header");
    return static_cast<std::size_t>(it - header->begin());
  };
  const std::size_t time_col = column(schema.time_column);
  const std::size_t status_col = column(schema.status_column);
  const std::size_t group_col = column(schema.group_column);

  std::vector<SubjectRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_csv_line(line);
    const std::string where = " at row " + std::to_string(row);
    if (fields.size() != header->size())
      throw DataError("malformed row: expected " + std::to_string(header->size()) +
                      " fields, got " + std::to_string(fields.size()) + where);
    auto time = detail::parse_real(fields[time_col]);
    if (!time || !std::isfinite(*time)) throw DataError("malformed row: unparseable time" + where);
    if (*time < 0.0) throw DataError("negative time" + where);
    auto status = detail::parse_integer(fields[status_col]);
    if (!status) throw DataError("non-integer status" + where);
    if (*status < 0) throw DataError("negative status" + where);
    if (fields[group_col].empty()) throw DataError("missing group label" + where);
    records.push_back({*time, *status, std::string(fields[group_col])});
  }
  if (records.empty()) throw DataError("empty file: no data rows");
  return Dataset(std::move(records));
}

inline Dataset parse_dataset(std::string_view text, const CsvSchema& schema = {}) {
  std::istringstream in{std::string(text)};
  return parse_dataset(in, schema);
}

/// Tabulates raw (time, status) pairs of one group.
inline EventTable tabulate(std::span<const double> time, std::span<const int> status,
                           std::string group = {}) {
  const std::size_t n = time.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return time[a] < time[b];
  });

  EventTable table;
  table.group = std::move(group);
  table.group_size = n;
  std::set<int> causes;
  for (std::size_t i = 0; i < n; ++i)
    if (status[i] > 0) causes.insert(status[i]);

  for (int k : causes) table.cause_events[k];

  std::size_t i = 0;
  while (i < n) {
    const double t = time[order[i]];
    const std::size_t at_risk = n - i;
    std::size_t j = i;
    int failures = 0;
    for (; j < n && time[order[j]] == t; ++j) {
      if (status[order[j]] > 0) ++failures;
      else table.censor_times.push_back(t);
    }
    if (failures > 0) {
      table.times.push_back(t);
      table.at_risk.push_back(static_cast<int>(at_risk));
      table.all_cause_events.push_back(failures);
      for (auto& [k, col] : table.cause_events) col.push_back(0);
      for (std::size_t m = i; m < j; ++m)
        if (const int s = status[order[m]]; s > 0) ++table.cause_events[s].back();
    }
    i = j;
  }
  return table;
}

inline EventTable build_event_table(const Dataset& data, std::string_view group) {
  if (!data.has_group(group)) throw DataError("unknown group '" + std::string(group) + "'");
  std::vector<double> time;
  std::vector<int> status;
  for (const auto& r : data.records()) {
    if (r.group != group) continue;
    time.push_back(r.time);
    status.push_back(r.status);
  }
  if (time.empty()) throw DataError("group '" + std::string(group) + "' has no records");
  return tabulate(time, status, std::string(group));
}

/// Pools every record into one table regardless of group.
inline EventTable build_pooled_table(const Dataset& data) {
  std::vector<double> time;
  std::vector<int> status;
  for (const auto& r : data.records()) {
    time.push_back(r.time);
    status.push_back(r.status);
  }
  return tabulate(time, status, "pooled");
}

}  // namespace cifpoint
