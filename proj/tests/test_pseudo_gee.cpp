#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cifpoint/pseudo_gee.hpp"

using namespace cifpoint;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<double> kTiedTime{0.5, 1.0, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5,
                                    0.7, 1.0, 1.2, 2.0, 2.2, 2.5, 3.1, 3.3, 4.0, 4.4};
const std::vector<int> kTiedStatus{1, 1, 2, 0, 2, 1, 1, 0, 2, 1, 0, 1, 2, 1, 0, 1, 1, 2, 0, 1, 1, 2};

std::vector<int> first_half(std::size_t n, std::size_t k) {
  std::vector<int> g(n, 0);
  for (std::size_t i = 0; i < k; ++i) g[i] = 1;
  return g;
}

// Cause-1 proportions 6/10 and 3/10, no censoring.
struct Saturated {
  std::vector<double> time;
  std::vector<int> status, in_first;
};

Saturated saturated() {
  Saturated s;
  for (int i = 0; i < 20; ++i) {
    const bool first = i < 10;
    const int j = first ? i : i - 10;
    s.time.push_back(0.1 + 0.01 * i);
    s.status.push_back((first ? j < 6 : j < 3) ? 1 : 2);
    s.in_first.push_back(first ? 1 : 0);
  }
  return s;
}

}  // namespace

TEST_CASE("five-subject pseudo-values") {
  const std::vector<double> t{1, 2, 3, 4, 5};
  const std::vector<int> s{1, 0, 1, 2, 0};
  const double tau[] = {3.0};
  const auto pv = pseudo_values(t, s, 1, tau);
  const double expected[] = {1.0000000000000002, 0.33333333333333348, 1.3333333333333335, -0.16666666666666652,
                             -0.16666666666666652};
  for (Eigen::Index i = 0; i < 5; ++i) CHECK_THAT(pv.values(i, 0), WithinAbs(expected[i], 1e-14));
}

TEST_CASE("leave-one-out agrees with re-estimating on the reduced sample") {
  const double taus[] = {1.0, 2.0, 3.4};
  const auto pv = pseudo_values(kTiedTime, kTiedStatus, 1, taus);
  const auto n = static_cast<int>(kTiedTime.size());
  const auto full = cif_estimate(tabulate(kTiedTime, kTiedStatus), 1);
  for (int i = 0; i < n; ++i) {
    std::vector<double> t = kTiedTime;
    std::vector<int> s = kTiedStatus;
    t.erase(t.begin() + i);
    s.erase(s.begin() + i);
    const auto loo = cif_estimate(tabulate(t, s), 1);
    for (int h = 0; h < 3; ++h) {
      const double expected = n * cif_at(full, taus[h]) - (n - 1) * cif_at(loo, taus[h]);
      CHECK_THAT(pv.values(i, h), WithinAbs(expected, 1e-12));
    }
  }
}

TEST_CASE("without censoring pseudo-values are indicators on both routes") {
  std::vector<double> t;
  std::vector<int> s;
  for (int i = 0; i < 30; ++i) {
    t.push_back(0.25 * (i % 9) + 0.1);
    s.push_back(1 + i % 3);
  }
  const double taus[] = {0.6, 1.1, 5.0};
  const auto fast = pseudo_values(t, s, 1, taus, {true});
  const auto general = pseudo_values(t, s, 1, taus, {false});
  for (std::size_t i = 0; i < t.size(); ++i)
    for (int h = 0; h < 3; ++h) {
      const double ind = (s[i] == 1 && t[i] <= taus[h]) ? 1.0 : 0.0;
      CHECK(fast.values(static_cast<Eigen::Index>(i), h) == ind);
      CHECK_THAT(general.values(static_cast<Eigen::Index>(i), h), WithinAbs(ind, 1e-12));
    }
}

TEST_CASE("censoring only after tau still allows the exact shortcut") {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<int> s{1, 2, 1, 0};
  const double tau[] = {3.5};
  const auto fast = pseudo_values(t, s, 1, tau, {true});
  const auto general = pseudo_values(t, s, 1, tau, {false});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK_THAT(fast.values(i, 0), WithinAbs(general.values(i, 0), 1e-13));
}

TEST_CASE("saturated two-group fit matches the closed form") {
  const auto d = saturated();
  const double tau[] = {1.0};
  const auto theta = pseudo_values(d.time, d.status, 1, tau);

  const auto logit = gee_fit(theta, d.in_first, LinkKind::Logit);
  CHECK(logit.converged);
  CHECK_THAT(logit.group_effect(), WithinAbs(1.2527629684953678, 1e-8));
  CHECK_THAT(logit.group_effect_variance(), WithinAbs(0.8928571428571429, 1e-8));

  const auto cll = gee_fit(theta, d.in_first, LinkKind::CLogLog);
  CHECK_THAT(cll.group_effect(), WithinAbs(0.94350886136796763, 1e-8));
  CHECK_THAT(cll.group_effect_variance(), WithinAbs(0.51554106525341792, 1e-8));

  const auto r = pseudo_test(theta, d.in_first, LinkKind::Logit);
  CHECK_THAT(*r.z, WithinAbs(1.3257997065399152, 1e-8));
  CHECK_THAT(r.statistic, WithinAbs(1.3257997065399152 * 1.3257997065399152, 1e-8));
  CHECK_THAT(r.per_group[0].cif, WithinAbs(0.6, 1e-10));
  CHECK_THAT(r.per_group[1].cif, WithinAbs(0.3, 1e-10));
  CHECK_THAT(*pseudo_test(theta, d.in_first, LinkKind::CLogLog).z, WithinAbs(1.3140574448393056, 1e-8));
}

TEST_CASE("single-time sandwich equals the per-group moment formula with censoring") {
  const double tau[] = {3.0};
  const auto theta = pseudo_values(kTiedTime, kTiedStatus, 1, tau);
  const auto in_first = first_half(kTiedTime.size(), 12);
  for (auto kind : {LinkKind::Logit, LinkKind::CLogLog}) {
    const auto fit = gee_fit(theta, in_first, kind);
    const LinkFunction fn{kind};
    double var = 0.0, effect = 0.0;
    for (int x : {1, 0}) {
      double sum = 0.0, sq = 0.0;
      int n = 0;
      for (std::size_t i = 0; i < in_first.size(); ++i)
        if (in_first[i] == x) {
          sum += theta.values(static_cast<Eigen::Index>(i), 0);
          ++n;
        }
      const double mean = sum / n;
      for (std::size_t i = 0; i < in_first.size(); ++i)
        if (in_first[i] == x) sq += std::pow(theta.values(static_cast<Eigen::Index>(i), 0) - mean, 2);
      const double h = 1e-6;
      const double dg = (fn.link(mean + h) - fn.link(mean - h)) / (2 * h);
      var += dg * dg * sq / (static_cast<double>(n) * n);
      effect += x ? fn.link(mean) : -fn.link(mean);
    }
    CHECK_THAT(fit.group_effect(), WithinAbs(effect, 1e-9));
    CHECK_THAT(fit.group_effect_variance(), WithinRel(var, 1e-6));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.sandwich);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("relabelling the groups flips the sign of the effect") {
  const double tau[] = {2.5};
  const auto theta = pseudo_values(kTiedTime, kTiedStatus, 1, tau);
  auto in_first = first_half(kTiedTime.size(), 12);
  const auto a = pseudo_test(theta, in_first, LinkKind::Logit);
  for (int& x : in_first) x = 1 - x;
  const auto b = pseudo_test(theta, in_first, LinkKind::Logit);
  CHECK_THAT(*a.z, WithinAbs(-*b.z, 1e-9));
  CHECK_THAT(a.p_value, WithinAbs(b.p_value, 1e-9));
}

TEST_CASE("several time points fit jointly") {
  const double taus[] = {1.0, 2.0, 3.0};
  const auto theta = pseudo_values(kTiedTime, kTiedStatus, 1, taus);
  const auto fit = gee_fit(theta, first_half(kTiedTime.size(), 12), LinkKind::CLogLog);
  CHECK(fit.converged);
  CHECK(fit.beta.size() == 4);
  CHECK(fit.residual < 1e-10);
  CHECK_THROWS_AS(pseudo_test(theta, first_half(kTiedTime.size(), 12), LinkKind::Logit), NumericalError);
}

TEST_CASE("a group without events cannot be fitted") {
  const std::vector<double> t{1, 2, 3, 4, 5, 6};
  const std::vector<int> s{1, 2, 1, 2, 2, 2};
  const double tau[] = {10.0};
  const auto theta = pseudo_values(t, s, 1, tau);
  CHECK_THROWS_AS(gee_fit(theta, first_half(6, 3), LinkKind::Logit), SeparationDetected);
}

TEST_CASE("identical groups give a zero statistic") {
  std::vector<double> t;
  std::vector<int> s;
  for (int copy = 0; copy < 2; ++copy) {
    t.insert(t.end(), kTiedTime.begin(), kTiedTime.begin() + 12);
    s.insert(s.end(), kTiedStatus.begin(), kTiedStatus.begin() + 12);
  }
  const double tau[] = {2.5};
  const auto theta = pseudo_values(t, s, 1, tau);
  for (auto link : {LinkKind::Logit, LinkKind::CLogLog}) {
    const auto r = pseudo_test(theta, first_half(24, 12), link);
    CHECK(r.statistic == 0.0);
    CHECK(r.p_value == 1.0);
  }
}

TEST_CASE("dataset wrapper uses first-appearance group order") {
  std::vector<SubjectRecord> recs;
  const auto d = saturated();
  for (std::size_t i = 0; i < d.time.size(); ++i) recs.push_back({d.time[i], d.status[i], d.in_first[i] ? "x" : "y"});
  const auto r = pseudo_test(Dataset(recs), 1, 1.0, LinkKind::Logit);
  CHECK(r.per_group[0].group == "x");
  CHECK_THAT(*r.z, WithinAbs(1.3257997065399152, 1e-8));
}
