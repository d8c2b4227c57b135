#pragma once

// Jackknife pseudo-values of the pooled cumulative incidence and the two-group
// generalized estimating equation fit used to compare groups at fixed times.
//
// Model: g(theta_ih) = alpha_h + beta * x_i, with x_i = 1 for the first group
// and 0 for the second, independence working covariance, and the sandwich
// covariance D^-1 (sum_i U_i U_i^T) D^-1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cifpoint/data.hpp"
#include "cifpoint/distributions.hpp"
#include "cifpoint/errors.hpp"
#include "cifpoint/fixed_time_tests.hpp"

namespace cifpoint {

struct PseudoValueMatrix {
  Eigen::MatrixXd values;  // N x m
  std::vector<double> times;
  std::vector<std::size_t> subject_order;  // row i corresponds to record subject_order[i]
};

struct PseudoValueOptions {
  // When no record is censored strictly before tau, every pseudo-value at tau
  // is exactly the event indicator; use that identity instead of N
  // leave-one-out refits.
  bool uncensored_shortcut = true;
};

namespace detail {

/// Records grouped by distinct time, in ascending order.
struct TieGroups {
  std::vector<double> time;
  std::vector<int> before;    // records with a strictly smaller time
  std::vector<int> failures;  // all causes
  std::vector<int> of_cause;  // the cause of interest
  std::vector<std::size_t> group_of;  // per record
};

inline TieGroups tie_groups(std::span<const double> time, std::span<const int> status, int cause) {
  const std::size_t n = time.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
  TieGroups g;
  g.group_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rec = order[i];
    if (g.time.empty() || time[rec] != g.time.back()) {
      g.time.push_back(time[rec]);
      g.before.push_back(static_cast<int>(i));
      g.failures.push_back(0);
      g.of_cause.push_back(0);
    }
    if (status[rec] > 0) ++g.failures.back();
    if (status[rec] == cause) ++g.of_cause.back();
    g.group_of[rec] = g.time.size() - 1;
  }
  return g;
}

/// Aalen-Johansen estimate at tau with one record optionally left out.
inline double cif_leave_one_out(const TieGroups& g, int n, double tau, std::ptrdiff_t skip_group,
                                int skip_status, int cause) {
  double surv = 1.0;
  double cif = 0.0;
  const int size = skip_group >= 0 ? n - 1 : n;
  for (std::size_t j = 0; j < g.time.size() && g.time[j] <= tau; ++j) {
    int at_risk = size - g.before[j];
    int d = g.failures[j];
    int dk = g.of_cause[j];
    if (skip_group >= 0) {
      const auto sg = static_cast<std::size_t>(skip_group);
      if (sg < j) ++at_risk;  // the skipped record was already counted in `before`
      if (sg == j) {
        if (skip_status > 0) --d;
        if (skip_status == cause) --dk;
      }
    }
    if (d == 0) continue;
    const double a = at_risk;
    cif += surv * dk / a;
    surv *= 1.0 - d / a;
  }
  return cif;
}

}  // namespace detail

inline PseudoValueMatrix pseudo_values(std::span<const double> time, std::span<const int> status,
                                       int cause, std::span<const double> taus,
                                       const PseudoValueOptions& options = {}) {
  const std::size_t n = time.size();
  if (n < 2) throw NumericalError("pseudo-values need at least two records");
  for (double tau : taus)
    if (!(tau > 0.0)) throw NumericalError("pseudo-value times must be positive");

  PseudoValueMatrix out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(taus.size()));
  out.times.assign(taus.begin(), taus.end());
  out.subject_order.resize(n);
  std::iota(out.subject_order.begin(), out.subject_order.end(), std::size_t{0});

  const auto groups = detail::tie_groups(time, status, cause);
  const int size = static_cast<int>(n);
  for (std::size_t h = 0; h < taus.size(); ++h) {
    const double tau = taus[h];
    const auto col = static_cast<Eigen::Index>(h);
    bool censored_before = false;
    for (std::size_t i = 0; i < n && !censored_before; ++i)
      censored_before = status[i] == 0 && time[i] < tau;

    if (options.uncensored_shortcut && !censored_before) {
      for (std::size_t i = 0; i < n; ++i)
        out.values(static_cast<Eigen::Index>(i), col) =
            (status[i] == cause && time[i] <= tau) ? 1.0 : 0.0;
      continue;
    }
    const double full = detail::cif_leave_one_out(groups, size, tau, -1, 0, cause);
    for (std::size_t i = 0; i < n; ++i) {
      const double loo = detail::cif_leave_one_out(
          groups, size, tau, static_cast<std::ptrdiff_t>(groups.group_of[i]), status[i], cause);
      out.values(static_cast<Eigen::Index>(i), col) = size * full - (size - 1) * loo;
    }
  }
  return out;
}

/// Pseudo-values of the pooled sample (all groups together), rows in record order.
inline PseudoValueMatrix pseudo_values(const Dataset& data, int cause, std::span<const double> taus,
                                       const PseudoValueOptions& options = {}) {
  std::vector<double> time;
  std::vector<int> status;
  time.reserve(data.size());
  status.reserve(data.size());
  for (const auto& r : data.records()) {
    time.push_back(r.time);
    status.push_back(r.status);
  }
  return pseudo_values(time, status, cause, taus, options);
}

struct LinkFunction {
  LinkKind kind;

  double link(double x) const {
    return kind == LinkKind::Logit ? std::log(x / (1.0 - x)) : std::log(-std::log1p(-x));
  }
  double mean(double eta) const {
    return kind == LinkKind::Logit ? 1.0 / (1.0 + std::exp(-eta)) : -std::expm1(-std::exp(eta));
  }
  double mean_derivative(double eta) const {
    if (kind == LinkKind::Logit) {
      const double m = mean(eta);
      return m * (1.0 - m);
    }
    return std::exp(eta - std::exp(eta));
  }
};

struct GeeFit {
  Eigen::VectorXd beta;      // (alpha_1 .. alpha_m, group effect)
  Eigen::MatrixXd sandwich;  // robust covariance of beta
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;     // max |U| at the returned iterate

  double group_effect() const { return beta(beta.size() - 1); }
  double group_effect_variance() const {
    return sandwich(sandwich.rows() - 1, sandwich.cols() - 1);
  }
};

struct GeeOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;
  int max_halvings = 30;
};

namespace detail {

struct GeeSystem {
  Eigen::VectorXd score;          // U(beta)
  Eigen::MatrixXd information;    // D(beta)
  std::vector<Eigen::VectorXd> per_subject;  // U_i(beta), filled on request
};

/// Score and information of the two-group design. Sums are accumulated per
/// (time, group) cell before combining so that exchangeable groups give
/// exactly symmetric systems.
inline GeeSystem gee_system(const PseudoValueMatrix& theta, std::span<const int> in_first,
                            const LinkFunction& link, const Eigen::VectorXd& beta,
                            bool per_subject) {
  const auto n = theta.values.rows();
  const auto m = theta.values.cols();
  const Eigen::Index p = m + 1;
  GeeSystem sys;
  sys.score = Eigen::VectorXd::Zero(p);
  sys.information = Eigen::MatrixXd::Zero(p, p);
  if (per_subject) sys.per_subject.assign(static_cast<std::size_t>(n), Eigen::VectorXd::Zero(p));

  for (Eigen::Index h = 0; h < m; ++h) {
    double score_cell[2] = {0.0, 0.0};
    double info_cell[2] = {0.0, 0.0};
    double mu[2], dmu[2];
    for (int x = 0; x < 2; ++x) {
      const double eta = beta(h) + beta(m) * x;
      mu[x] = link.mean(eta);
      dmu[x] = link.mean_derivative(eta);
    }
    double resid_sum[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (Eigen::Index i = 0; i < n; ++i) {
      const int x = in_first[static_cast<std::size_t>(i)] ? 1 : 0;
      const double r = theta.values(i, h) - mu[x];
      resid_sum[x] += r;
      ++count[x];
      if (per_subject) {
        auto& u = sys.per_subject[static_cast<std::size_t>(i)];
        u(h) += dmu[x] * r;
        if (x == 1) u(m) += dmu[x] * r;
      }
    }
    for (int x = 0; x < 2; ++x) {
      score_cell[x] = dmu[x] * resid_sum[x];
      info_cell[x] = count[x] * dmu[x] * dmu[x];
    }
    sys.score(h) = score_cell[1] + score_cell[0];
    sys.score(m) += score_cell[1];
    sys.information(h, h) = info_cell[1] + info_cell[0];
    sys.information(h, m) = info_cell[1];
    sys.information(m, h) = info_cell[1];
    sys.information(m, m) += info_cell[1];
  }
  return sys;
}

}  // namespace detail

/// Solves the estimating equations by damped Fisher scoring and returns the
/// estimate with its sandwich covariance. `in_first[i]` is nonzero for rows of
/// the first group.
inline GeeFit gee_fit(const PseudoValueMatrix& theta, std::span<const int> in_first, LinkKind kind,
                      const GeeOptions& options = {}) {
  const auto n = theta.values.rows();
  const auto m = theta.values.cols();
  if (m < 1) throw NumericalError("GEE fit needs at least one time point");
  if (static_cast<Eigen::Index>(in_first.size()) != n)
    throw NumericalError("group indicator length does not match the pseudo-value rows");
  const LinkFunction link{kind};

  int first_size = 0;
  for (int x : in_first) first_size += x ? 1 : 0;
  if (first_size == 0 || first_size == n) throw NumericalError("both groups must be nonempty");

  for (Eigen::Index h = 0; h < m; ++h) {
    double sum[2] = {0.0, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) sum[in_first[static_cast<std::size_t>(i)] ? 1 : 0] += theta.values(i, h);
    const double mean[2] = {sum[0] / static_cast<double>(n - first_size), sum[1] / first_size};
    for (double v : mean) {
      if (!(v > 0.0 && v < 1.0)) {
        std::ostringstream msg;
        msg << "group mean pseudo-value " << v << " at time " << theta.times[static_cast<std::size_t>(h)]
            << " is outside (0, 1); the " << to_string(kind) << " link cannot be inverted";
        throw SeparationDetected(msg.str());
      }
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m + 1);
  for (Eigen::Index h = 0; h < m; ++h)
    beta(h) = link.link(std::clamp(theta.values.col(h).mean(), 1e-6, 1.0 - 1e-6));

  GeeFit fit;
  auto sys = detail::gee_system(theta, in_first, link, beta, false);
  double residual = sys.score.cwiseAbs().maxCoeff();
  int iter = 0;
  while (residual >= options.tolerance && iter < options.max_iterations) {
    ++iter;
    const Eigen::VectorXd step = sys.information.ldlt().solve(sys.score);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    auto next = detail::gee_system(theta, in_first, link, candidate, false);
    double next_residual = next.score.cwiseAbs().maxCoeff();
    for (int k = 0; k < options.max_halvings && !(next_residual < residual); ++k) {
      scale *= 0.5;
      candidate = beta + scale * step;
      next = detail::gee_system(theta, in_first, link, candidate, false);
      next_residual = next.score.cwiseAbs().maxCoeff();
    }
    if (!(next_residual < residual)) break;  // no descent possible: round-off floor
    beta = candidate;
    sys = std::move(next);
    residual = next_residual;
  }

  fit.beta = beta;
  fit.iterations = iter;
  fit.residual = residual;
  fit.converged = residual < options.tolerance;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "GEE did not converge after " << iter << " iterations (max |U| = " << residual
        << ", group effect = " << beta(m) << ")";
    throw NonConvergence(msg.str(), iter, residual);
  }

  const auto full = detail::gee_system(theta, in_first, link, beta, true);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(m + 1, m + 1);
  for (const auto& u : full.per_subject) meat.noalias() += u * u.transpose();
  const Eigen::MatrixXd bread = full.information.inverse();
  const Eigen::MatrixXd sandwich = bread * meat * bread;
  fit.sandwich = 0.5 * (sandwich + sandwich.transpose());
  return fit;
}

/// Wald test of no group effect from an already computed single-time
/// pseudo-value column.
inline FixedTimeTestResult pseudo_test(const PseudoValueMatrix& theta, std::span<const int> in_first,
                                       LinkKind link, const std::string& first_label = "1",
                                       const std::string& second_label = "2") {
  if (theta.values.cols() != 1) throw NumericalError("pseudo-value test expects a single time");
  const auto fit = gee_fit(theta, in_first, link);
  FixedTimeTestResult r;
  r.t = theta.times.front();
  r.df = 1;
  r.link = link;

  const LinkFunction fn{link};
  const double a = fit.beta(0), b = fit.beta(1);
  const auto& s = fit.sandwich;
  const double d1 = fn.mean_derivative(a + b), d2 = fn.mean_derivative(a);
  r.per_group = {
      {first_label, fn.mean(a + b), d1 * d1 * (s(0, 0) + 2.0 * s(0, 1) + s(1, 1))},
      {second_label, fn.mean(a), d2 * d2 * s(0, 0)}};

  const double beta2 = fit.group_effect();
  const double var = fit.group_effect_variance();
  if (beta2 == 0.0) {
    r.z = 0.0;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  if (!(var > 0.0)) throw ZeroVariance("sandwich variance of the group effect is zero");
  r.z = beta2 / std::sqrt(var);
  r.statistic = *r.z * *r.z;
  r.p_value = chi_squared_upper_tail(r.statistic, 1);
  return r;
}

/// Pseudo-value regression test of equal cumulative incidence at t between the
/// two groups of `data`.
inline FixedTimeTestResult pseudo_test(const Dataset& data, int cause, double t, LinkKind link,
                                       const PseudoValueOptions& options = {}) {
  if (data.groups().size() != 2) throw DataError("pseudo-value test needs exactly two groups");
  if (!(t > 0.0)) throw NumericalError("test time must be positive");
  const double taus[] = {t};
  const auto theta = pseudo_values(data, cause, taus, options);
  std::vector<int> in_first;
  in_first.reserve(data.size());
  for (const auto& r : data.records()) in_first.push_back(r.group == data.groups()[0] ? 1 : 0);
  return pseudo_test(theta, in_first, link, data.groups()[0], data.groups()[1]);
}

}  // namespace cifpoint
