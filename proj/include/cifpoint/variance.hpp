#pragma once

// Variance of the Aalen-Johansen estimate at a fixed time: Aalen's three-sum
// estimator and Gaynor's delta-method (Dinse-Larson) estimator built from the
// per-knot increments.

#include <algorithm>
#include <cstddef>
#include <sstream>
#include <vector>

#include "cifpoint/cif.hpp"
#include "cifpoint/errors.hpp"

namespace cifpoint {

inline constexpr double kNegativeRoundoffTolerance = 1e-14;

namespace detail {

/// Per-knot quantities for knots <= t.
struct KnotTerms {
  std::vector<double> surv_before;  // S(t_{j-1})
  std::vector<double> increment;    // S(t_{j-1}) d_kj / a_j
  std::vector<double> cumulative;   // I_k(t_j)
};

inline KnotTerms knot_terms(const EventTable& table, int cause, std::size_t count) {
  KnotTerms k;
  k.surv_before.reserve(count);
  k.increment.reserve(count);
  k.cumulative.reserve(count);
  double surv = 1.0;
  double cum = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const double a = table.at_risk[j];
    const double inc = surv * table.cause_count(cause, j) / a;
    cum += inc;
    k.surv_before.push_back(surv);
    k.increment.push_back(inc);
    k.cumulative.push_back(cum);
    surv *= 1.0 - table.all_cause_events[j] / a;
  }
  return k;
}

inline std::size_t knots_up_to(const EventTable& table, double t) {
  return static_cast<std::size_t>(
      std::upper_bound(table.times.begin(), table.times.end(), t) - table.times.begin());
}

/// num / den, where a zero denominator is tolerated only with a zero numerator.
inline double guarded_ratio(double num, double den, const EventTable& table, std::size_t j) {
  if (den != 0.0) return num / den;
  if (num == 0.0) return 0.0;
  std::ostringstream msg;
  msg << "degenerate risk set at time " << table.times[j] << " (a=" << table.at_risk[j]
      << ", d=" << table.all_cause_events[j] << ")";
  throw DegenerateRiskSet(msg.str());
}

inline double finalize_variance(double v) {
  if (v >= 0.0) return v;
  if (v > -kNegativeRoundoffTolerance) return 0.0;
  std::ostringstream msg;
  msg << "variance estimate is negative (" << v << ")";
  throw NumericalError(msg.str());
}

}  // namespace detail

inline double aalen_variance(const EventTable& table, int cause, double t) {
  const std::size_t count = detail::knots_up_to(table, t);
  if (count == 0 || !table.has_cause(cause)) return 0.0;
  const auto k = detail::knot_terms(table, cause, count);
  const double at_t = k.cumulative.back();

  double v = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    const double a = table.at_risk[j];
    const double d = table.all_cause_events[j];
    const double dk = table.cause_count(cause, j);
    const double gap = at_t - k.cumulative[j];
    const double s = k.surv_before[j];
    v += detail::guarded_ratio(gap * gap * d, (a - 1.0) * (a - d), table, j);
    v += detail::guarded_ratio(s * s * dk * (a - dk), a * a * (a - 1.0), table, j);
    v -= 2.0 * detail::guarded_ratio(gap * s * dk * (a - dk), a * (a - 1.0) * (a - d), table, j);
  }
  return detail::finalize_variance(v);
}

inline double gaynor_variance(const EventTable& table, int cause, double t) {
  const std::size_t count = detail::knots_up_to(table, t);
  if (count == 0 || !table.has_cause(cause)) return 0.0;
  const auto k = detail::knot_terms(table, cause, count);

  // Greenwood-type accumulation over knots strictly before i.
  std::vector<double> prior(count);
  double acc = 0.0;
  for (std::size_t l = 0; l < count; ++l) {
    prior[l] = acc;
    if (l + 1 == count) break;
    const double a = table.at_risk[l];
    const double d = table.all_cause_events[l];
    acc += detail::guarded_ratio(d, a * (a - d), table, l);
  }

  // Covariances pair increment i with every later increment, so a suffix sum
  // turns the double sum into a single pass.
  double later = 0.0;
  double v = 0.0;
  for (std::size_t i = count; i-- > 0;) {
    const double inc = k.increment[i];
    const double a = table.at_risk[i];
    const double dk = table.cause_count(cause, i);
    if (dk > 0.0) v += inc * inc * ((a - dk) / (dk * a) + prior[i]);
    v += 2.0 * inc * later * (-1.0 / a + prior[i]);
    later += inc;
  }
  return detail::finalize_variance(v);
}

inline double cif_variance(VarianceKind kind, const EventTable& table, int cause, double t) {
  return kind == VarianceKind::Aalen ? aalen_variance(table, cause, t)
                                     : gaynor_variance(table, cause, t);
}

/// Returns the curve with its variance evaluated at every knot.
inline CifCurve with_variance(CifCurve curve, const EventTable& table, VarianceKind kind) {
  StepFunction var;
  var.value_before_first_knot = 0.0;
  var.knots = curve.steps.knots;
  var.values.reserve(var.knots.size());
  for (double knot : var.knots) var.values.push_back(cif_variance(kind, table, curve.cause, knot));
  curve.variance_steps = std::move(var);
  curve.variance_kind = kind;
  return curve;
}

}  // namespace cifpoint
