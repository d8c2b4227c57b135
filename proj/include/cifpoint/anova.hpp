#pragma once

// No-intercept least-squares summaries of a simulation grid.
//
// Each grid cell (scenario x test) contributes one response: the percent
// rejection rate, optionally minus the nominal level. Four models are
// supported, each a cell-means block plus dummy-coded (reference = first
// level) remaining factors:
//   1: TEST x NUM + TIME + CEN     2: TEST x TIME + NUM + CEN
//   3: TEST x CEN + TIME + NUM     4: TEST + CEN + TIME + NUM
// The reported panel holds least-squares means: fitted values of each block
// cell averaged with equal weight over the levels of the other factors.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "cifpoint/errors.hpp"
#include "cifpoint/simulation.hpp"

namespace cifpoint {

/// Least squares without intercept via column-pivoted Householder QR.
inline Eigen::VectorXd ols_no_intercept(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) throw NumericalError("design and response lengths differ");
  if (design.rows() < design.cols())
    throw RankDeficientDesign("design has fewer rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    std::ostringstream msg;
    msg << "design is rank deficient (rank " << qr.rank() << " of " << design.cols()
        << "); aliased columns:";
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) msg << ' ' << perm(k);
    throw RankDeficientDesign(msg.str());
  }
  return qr.solve(y);
}

enum class AnovaResponse { TypeIDeviation, Power };

struct AnovaTable {
  int model = 4;
  AnovaResponse response = AnovaResponse::TypeIDeviation;
  std::string block_factor;                 // "NUM", "TIME", "CEN", or "" for model 4
  std::vector<std::string> column_names;
  Eigen::VectorXd coefficients;
  std::vector<std::string> panel_rows;      // block levels (one unnamed row for model 4)
  std::vector<std::vector<double>> panel;   // panel[row][test index]
  double residual_orthogonality = 0.0;      // max |X^T (y - X b)|

  double marginal(std::size_t row, const TestId& id) const { return panel[row][id.index()]; }
};

namespace detail {

struct GridRow {
  std::size_t test, num, time, cen;
  double y;
};

template <class T, class Eq>
std::size_t level_of(std::vector<T>& levels, const T& value, Eq eq) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (eq(levels[i], value)) return i;
  levels.push_back(value);
  return levels.size() - 1;
}

inline std::string format_level(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace detail

inline AnovaTable anova_summarize(const std::vector<ScenarioResult>& grid, AnovaResponse response,
                                  int model) {
  if (model < 1 || model > 4) throw DataError("ANOVA model must be 1, 2, 3 or 4");
  if (grid.empty()) throw DataError("empty simulation grid");

  std::vector<std::pair<int, int>> num_levels;
  std::vector<double> time_levels, cen_levels;
  std::vector<detail::GridRow> rows;
  auto same = [](const auto& a, const auto& b) { return a == b; };
  for (const auto& cell : grid) {
    const auto& s = cell.scenario;
    const std::size_t num = detail::level_of(num_levels, std::pair{s.n1, s.n2}, same);
    const std::size_t time = detail::level_of(time_levels, s.t_fixed, same);
    const std::size_t cen = detail::level_of(cen_levels, s.censor_fraction, same);
    for (std::size_t k = 0; k < kTestCount; ++k) {
      const double pct = 100.0 * cell.tallies[k].rate();
      rows.push_back({k, num, time, cen,
                      response == AnovaResponse::TypeIDeviation ? pct - 100.0 * s.alpha : pct});
    }
  }
  // Re-index TIME and CEN levels in ascending order.
  auto sort_levels = [&](std::vector<double>& levels, std::size_t detail::GridRow::*field) {
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    for (auto& r : rows)
      r.*field = static_cast<std::size_t>(std::find(sorted.begin(), sorted.end(), levels[r.*field]) - sorted.begin());
    levels = sorted;
  };
  sort_levels(time_levels, &detail::GridRow::time);
  sort_levels(cen_levels, &detail::GridRow::cen);

  struct Factor {
    std::string name;
    std::vector<std::string> labels;
    std::size_t detail::GridRow::*field;
  };
  std::vector<Factor> factors;
  {
    Factor num{"NUM", {}, &detail::GridRow::num};
    for (auto [a, b] : num_levels) num.labels.push_back(std::to_string(a) + "," + std::to_string(b));
    Factor time{"TIME", {}, &detail::GridRow::time};
    for (double v : time_levels) time.labels.push_back(detail::format_level(v));
    Factor cen{"CEN", {}, &detail::GridRow::cen};
    for (double v : cen_levels) cen.labels.push_back(detail::format_level(v));
    factors = {num, time, cen};
  }

  AnovaTable table;
  table.model = model;
  table.response = response;
  const int block = model == 1 ? 0 : model == 2 ? 1 : model == 3 ? 2 : -1;
  const std::size_t block_levels = block >= 0 ? factors[static_cast<std::size_t>(block)].labels.size() : 1;
  if (block >= 0) {
    table.block_factor = factors[static_cast<std::size_t>(block)].name;
    table.panel_rows = factors[static_cast<std::size_t>(block)].labels;
  } else {
    table.panel_rows = {"TEST"};
  }

  // Cell-means columns first, then dummies of the remaining factors.
  for (std::size_t b = 0; b < block_levels; ++b)
    for (std::size_t k = 0; k < kTestCount; ++k)
      table.column_names.push_back(TestId::from_index(k).name() +
                                   (block >= 0 ? ":" + table.panel_rows[b] : std::string()));
  struct DummyBlock {
    std::size_t factor;
    std::size_t first_column;
  };
  std::vector<DummyBlock> dummies;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (static_cast<int>(f) == block) continue;
    dummies.push_back({f, table.column_names.size()});
    for (std::size_t l = 1; l < factors[f].labels.size(); ++l)
      table.column_names.push_back(factors[f].name + "=" + factors[f].labels[l]);
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(table.column_names.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const std::size_t b = block >= 0 ? r.*(factors[static_cast<std::size_t>(block)].field) : 0;
    X(i, static_cast<Eigen::Index>(b * kTestCount + r.test)) = 1.0;
    for (const auto& d : dummies) {
      const std::size_t level = r.*(factors[d.factor].field);
      if (level > 0) X(i, static_cast<Eigen::Index>(d.first_column + level - 1)) = 1.0;
    }
    y(i) = r.y;
  }
  table.coefficients = ols_no_intercept(X, y);
  table.residual_orthogonality = (X.transpose() * (y - X * table.coefficients)).cwiseAbs().maxCoeff();

  double adjustment = 0.0;  // equal-weight average of the dummy effects
  for (const auto& d : dummies) {
    const std::size_t levels = factors[d.factor].labels.size();
    double sum = 0.0;
    for (std::size_t l = 1; l < levels; ++l) sum += table.coefficients(static_cast<Eigen::Index>(d.first_column + l - 1));
    adjustment += sum / static_cast<double>(levels);
  }
  table.panel.assign(block_levels, std::vector<double>(kTestCount, 0.0));
  for (std::size_t b = 0; b < block_levels; ++b)
    for (std::size_t k = 0; k < kTestCount; ++k)
      table.panel[b][k] = table.coefficients(static_cast<Eigen::Index>(b * kTestCount + k)) + adjustment;
  return table;
}

}  // namespace cifpoint
