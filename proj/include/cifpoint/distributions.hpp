#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "cifpoint/errors.hpp"

namespace cifpoint {

/// Upper-tail probability P(X > x) for X ~ chi-squared(df), via the
/// regularized upper incomplete gamma Q(df/2, x/2).
inline double chi_squared_upper_tail(double x, int df) {
  if (df <= 0) throw NumericalError("chi-squared degrees of freedom must be positive");
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Two-sided standard normal critical value for a confidence level in (0, 1).
inline double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw NumericalError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

}  // namespace cifpoint
