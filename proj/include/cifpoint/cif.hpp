#pragma once

// Kaplan-Meier all-cause survival and the Aalen-Johansen cumulative incidence
// estimator. Curves are materialized at failure knots only; censorings enter
// through the risk sets.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cifpoint/data.hpp"

namespace cifpoint {

/// Right-continuous step function.
struct StepFunction {
  std::vector<double> knots;
  std::vector<double> values;
  double value_before_first_knot = 0.0;

  double operator()(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return value_before_first_knot;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  /// Index of the largest knot <= t, if any.
  std::optional<std::size_t> knot_index(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return std::nullopt;
    return static_cast<std::size_t>(it - knots.begin()) - 1;
  }
};

enum class VarianceKind { Aalen, Gaynor };

inline const char* to_string(VarianceKind kind) {
  return kind == VarianceKind::Aalen ? "aalen" : "gaynor";
}

struct CifCurve {
  std::string group;
  int cause = 0;
  StepFunction steps;              // value_before_first_knot == 0
  std::vector<double> increments;  // jump at each knot
  std::optional<StepFunction> variance_steps;
  std::optional<VarianceKind> variance_kind;
};

inline StepFunction km_survival(const EventTable& table) {
  StepFunction s;
  s.value_before_first_knot = 1.0;
  s.knots = table.times;
  s.values.reserve(table.size());
  double surv = 1.0;
  for (std::size_t j = 0; j < table.size(); ++j) {
    surv *= 1.0 - static_cast<double>(table.all_cause_events[j]) / table.at_risk[j];
    s.values.push_back(surv);
  }
  return s;
}

/// Aalen-Johansen estimate for one cause. A cause that never occurs yields the
/// zero curve with no knots.
inline CifCurve cif_estimate(const EventTable& table, int cause) {
  CifCurve curve;
  curve.group = table.group;
  curve.cause = cause;
  curve.steps.value_before_first_knot = 0.0;
  if (!table.has_cause(cause)) return curve;

  curve.steps.knots = table.times;
  curve.steps.values.reserve(table.size());
  curve.increments.reserve(table.size());
  double surv_before = 1.0;
  double cumulative = 0.0;
  for (std::size_t j = 0; j < table.size(); ++j) {
    const double a = table.at_risk[j];
    const double inc = surv_before * table.cause_count(cause, j) / a;
    cumulative += inc;
    curve.increments.push_back(inc);
    curve.steps.values.push_back(cumulative);
    surv_before *= 1.0 - table.all_cause_events[j] / a;
  }
  return curve;
}

inline double cif_at(const CifCurve& curve, double t) { return curve.steps(t); }

}  // namespace cifpoint
