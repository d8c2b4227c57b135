#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cifpoint/simulation.hpp"

using namespace cifpoint;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("test identifiers round-trip through index and name") {
  std::set<std::string> names;
  for (std::size_t k = 0; k < kTestCount; ++k) {
    const auto id = TestId::from_index(k);
    CHECK(id.index() == k);
    CHECK(TestId::parse(id.name())->index() == k);
    names.insert(id.name());
  }
  CHECK(names.size() == kTestCount);
  CHECK(TestId::from_index(2).name() == "Gaynor/Llog");
  CHECK(TestId::from_index(8).name() == "Aalen/Arcs");
  CHECK(TestId::from_index(10).name() == "Pseudo/Llog");
  CHECK(!TestId::parse("Gaynor/Probit"));
}

TEST_CASE("analytic cumulative incidence") {
  CHECK_THAT(analytic_cif1(0.5, std::log(2.0), 1, 0.66), WithinRel(0.45194075534668987, 1e-14));
  CHECK_THAT(analytic_cif1(0.5, std::log(2.0), 0, 0.66), WithinRel(0.25968976458966198, 1e-14));
  for (double beta : {0.0, std::log(1.5), std::log(2.0)})
    for (int z : {0, 1}) {
      CHECK_THAT(analytic_cif1(60.0, beta, z, 0.66) + analytic_cif2(60.0, beta, z, 0.66), WithinAbs(1.0, 1e-12));
      for (double t : {0.1, 0.5, 1.0, 3.0})
        CHECK_THAT(analytic_survival(t, beta, z, 0.66),
                   WithinAbs(1.0 - analytic_cif1(t, beta, z, 0.66) - analytic_cif2(t, beta, z, 0.66), 1e-15));
    }
}

TEST_CASE("subdistribution hazards are proportional") {
  const double beta = std::log(1.5);
  for (double t : {0.1, 0.7, 2.0}) {
    const double lhs = std::log(1.0 - analytic_cif1(t, beta, 1, 0.66));
    const double rhs = std::exp(beta) * std::log(1.0 - analytic_cif1(t, beta, 0, 0.66));
    CHECK_THAT(lhs, WithinRel(rhs, 1e-12));
  }
}

TEST_CASE("inverse-CDF sampling round-trips") {
  for (double beta : {0.0, std::log(2.0)})
    for (int z : {0, 1})
      for (double u : {1e-6, 0.1, 0.5, 0.9, 0.999999}) {
        const double limit = cause1_limit(beta, z, 0.66);
        CHECK_THAT(analytic_cif1(cause1_time(u, beta, z, 0.66), beta, z, 0.66), WithinAbs(u * limit, 1e-10));
        const double tail = std::pow(0.34, std::exp(beta * z));
        CHECK_THAT(analytic_cif2(cause2_time(u, beta, z), beta, z, 0.66) / tail, WithinAbs(u, 1e-10));
      }
}

TEST_CASE("sampled cause-1 incidence agrees with the closed form") {
  ReplicationRng rng(99, 0);
  const int draws = 200000;
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_subject(std::log(2.0), 1, 0.66, rng);
    hits += s.cause == 1 && s.time <= 0.5;
  }
  const double truth = 0.45194075534668987;
  const double se = std::sqrt(truth * (1 - truth) / draws);
  CHECK(std::abs(hits / double(draws) - truth) < 3.0 * se);
}

TEST_CASE("censoring calibration hits the target") {
  const double beta = std::log(1.5);
  const double b = calibrate_censoring(beta, 0.66, {1.0, 1.0}, 0.30);
  CHECK_THAT(censored_fraction(b, beta, 0.66, {1.0, 1.0}), WithinAbs(0.30, 1e-4));
  CHECK(std::isinf(calibrate_censoring(beta, 0.66, {1.0, 1.0}, 0.0)));
  CHECK_THROWS_AS(calibrate_censoring(beta, 0.66, {1.0, 1.0}, 1.0), UnreachableTarget);

  Scenario s;
  s.beta = beta;
  s.censor_fraction = 0.30;
  s.n1 = 1000;
  s.n2 = 1000;
  const auto bounds = censoring_bounds(s);
  long censored = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto smp = simulate_replication(s, bounds, static_cast<std::uint64_t>(rep));
    for (int st : smp.status1) censored += st == 0;
    for (int st : smp.status2) censored += st == 0;
    total += s.n1 + s.n2;
  }
  const double observed = static_cast<double>(censored) / total;
  CHECK(observed >= 0.29);
  CHECK(observed <= 0.31);
}

TEST_CASE("per-group calibration gives each group its own bound") {
  Scenario s;
  s.beta = std::log(2.0);
  s.censor_fraction = 0.15;
  s.censoring = CensoringMode::PerGroup;
  const auto b = censoring_bounds(s);
  CHECK(b.first != b.second);
  CHECK_THAT(censored_fraction(b.first, s.beta, s.p, {1.0, 0.0}), WithinAbs(0.15, 1e-4));
  CHECK_THAT(censored_fraction(b.second, s.beta, s.p, {0.0, 1.0}), WithinAbs(0.15, 1e-4));
}

TEST_CASE("replications are deterministic and independent of the thread count") {
  Scenario s;
  s.n1 = 30;
  s.n2 = 40;
  s.censor_fraction = 0.15;
  s.reps = 60;
  s.master_seed = 42;
  const auto a = run_scenario(s, 1);
  const auto b = run_scenario(s, 3);
  const auto c = run_scenario(s, 1);
  CHECK(a.censored == b.censored);
  for (std::size_t k = 0; k < kTestCount; ++k) {
    CHECK(a.tallies[k].rejections == b.tallies[k].rejections);
    CHECK(a.tallies[k].estimable == b.tallies[k].estimable);
    CHECK(a.tallies[k].rejections == c.tallies[k].rejections);
  }
  const auto x = simulate_replication(s, censoring_bounds(s), 5);
  const auto y = simulate_replication(s, censoring_bounds(s), 5);
  CHECK(x.time1 == y.time1);
  CHECK(x.status2 == y.status2);
  s.master_seed = 43;
  CHECK(simulate_replication(s, censoring_bounds(s), 5).time1 != x.time1);
}

TEST_CASE("identical samples give a zero statistic for every test") {
  Scenario s;
  s.censor_fraction = 0.3;
  const auto smp = simulate_replication(s, censoring_bounds(s), 1);
  const auto out = evaluate_tests(smp.time1, smp.status1, smp.time1, smp.status1, 1, 0.5);
  for (std::size_t k = 0; k < kTestCount; ++k) {
    INFO(TestId::from_index(k).name());
    REQUIRE(out[k]);
    CHECK(out[k]->statistic == 0.0);
  }
}

TEST_CASE("swapping the group order leaves every statistic unchanged") {
  Scenario s;
  s.beta = std::log(2.0);
  s.censor_fraction = 0.15;
  const auto smp = simulate_replication(s, censoring_bounds(s), 3);
  const auto a = evaluate_tests(smp.time1, smp.status1, smp.time2, smp.status2, 1, 0.5);
  const auto b = evaluate_tests(smp.time2, smp.status2, smp.time1, smp.status1, 1, 0.5);
  for (std::size_t k = 0; k < kTestCount; ++k) {
    INFO(TestId::from_index(k).name());
    REQUIRE(a[k]);
    REQUIRE(b[k]);
    CHECK_THAT(a[k]->statistic, WithinRel(b[k]->statistic, 1e-9));
  }
}

TEST_CASE("a sample without cause-1 events is not estimable under curved transforms") {
  const std::vector<double> t1{0.1, 0.2, 0.3}, t2{0.1, 0.2, 0.3};
  const std::vector<int> s1{2, 2, 2}, s2{1, 2, 1};
  const auto out = evaluate_tests(t1, s1, t2, s2, 1, 0.5);
  CHECK(out[TestId{TestId::Family::Gaynor, TransformKind::Linear}.index()]);
  CHECK(!out[TestId{TestId::Family::Gaynor, TransformKind::Log}.index()]);
  CHECK(!out[TestId{TestId::Family::Pseudo, TransformKind::Linear, LinkKind::Logit}.index()]);
}

TEST_CASE("invalid scenarios are rejected") {
  Scenario s;
  s.n1 = 1;
  CHECK_THROWS_AS(run_scenario(s), DataError);
  s = {};
  s.censor_fraction = 1.2;
  CHECK_THROWS_AS(run_scenario(s), DataError);
}
