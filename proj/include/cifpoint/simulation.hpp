#pragma once

// Monte Carlo harness for type I error and power of the twelve fixed-time
// tests.
//
// Failure times follow the proportional subdistribution hazards generator
//   I1(t) = 1 - [1 - p (1 - e^-t)]^eta,   I2(t) = (1 - p)^eta (1 - e^(-eta t)),
// with eta = exp(beta z), z = 0 for the first group and 1 for the second.
// A subject's cause is drawn first (P(cause 1) = I1(inf)), then the time from
// the normalized conditional distribution by closed-form inversion. Censoring
// times are Uniform(0, b) with b calibrated to a target censored fraction.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "cifpoint/data.hpp"
#include "cifpoint/errors.hpp"
#include "cifpoint/fixed_time_tests.hpp"
#include "cifpoint/pseudo_gee.hpp"
#include "cifpoint/variance.hpp"

namespace cifpoint {

// ---------------------------------------------------------------------------
// Test identities
// ---------------------------------------------------------------------------

inline constexpr std::size_t kTestCount = 12;

struct TestId {
  enum class Family { Gaynor, Aalen, Pseudo };
  Family family = Family::Gaynor;
  TransformKind transform = TransformKind::Linear;  // Gaynor / Aalen
  LinkKind link = LinkKind::Logit;                  // Pseudo

  /// Position in the canonical order: Gaynor x 5, Aalen x 5, Pseudo {llog, logit}.
  std::size_t index() const {
    switch (family) {
      case Family::Gaynor: return static_cast<std::size_t>(transform);
      case Family::Aalen: return 5 + static_cast<std::size_t>(transform);
      case Family::Pseudo: return link == LinkKind::CLogLog ? 10 : 11;
    }
    return 0;
  }

  static TestId from_index(std::size_t i) {
    TestId id;
    if (i < 5) {
      id.family = Family::Gaynor;
      id.transform = kAllTransforms[i];
    } else if (i < 10) {
      id.family = Family::Aalen;
      id.transform = kAllTransforms[i - 5];
    } else {
      id.family = Family::Pseudo;
      id.link = i == 10 ? LinkKind::CLogLog : LinkKind::Logit;
    }
    return id;
  }

  /// Display name such as "Gaynor/Llog" or "Pseudo/Logit".
  std::string name() const {
    static constexpr const char* kTransformNames[] = {"Linear", "Log", "Llog", "Arcs", "Logit"};
    switch (family) {
      case Family::Gaynor: return std::string("Gaynor/") + kTransformNames[static_cast<int>(transform)];
      case Family::Aalen: return std::string("Aalen/") + kTransformNames[static_cast<int>(transform)];
      case Family::Pseudo: return link == LinkKind::CLogLog ? "Pseudo/Llog" : "Pseudo/Logit";
    }
    return "?";
  }

  static std::optional<TestId> parse(std::string_view name) {
    for (std::size_t i = 0; i < kTestCount; ++i)
      if (from_index(i).name() == name) return from_index(i);
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// Per-replication random stream keyed by (master seed, replication index);
/// subjects consume it in a fixed order.
class ReplicationRng {
 public:
  ReplicationRng(std::uint64_t master_seed, std::uint64_t replication) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32), 0x5eedc1fu};
    engine_.seed(seq);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

 private:
  std::mt19937_64 engine_;
};

inline double cause1_limit(double beta, int z, double p) {
  return 1.0 - std::pow(1.0 - p, std::exp(beta * z));
}

inline double analytic_cif1(double t, double beta, int z, double p) {
  return 1.0 - std::pow(1.0 - p * (1.0 - std::exp(-t)), std::exp(beta * z));
}

inline double analytic_cif2(double t, double beta, int z, double p) {
  const double eta = std::exp(beta * z);
  return std::pow(1.0 - p, eta) * (1.0 - std::exp(-t * eta));
}

inline double analytic_survival(double t, double beta, int z, double p) {
  const double eta = std::exp(beta * z);
  return std::pow(1.0 - p * (1.0 - std::exp(-t)), eta) - std::pow(1.0 - p, eta) * (1.0 - std::exp(-t * eta));
}

/// Time of a cause-1 failure at conditional quantile u.
inline double cause1_time(double u, double beta, int z, double p) {
  const double eta = std::exp(beta * z);
  const double limit = 1.0 - std::pow(1.0 - p, eta);
  const double inner = 1.0 - std::pow(1.0 - u * limit, 1.0 / eta);
  return -std::log1p(-inner / p);
}

/// Time of a cause-2 failure at conditional quantile u.
inline double cause2_time(double u, double beta, int z) {
  return -std::log1p(-u) / std::exp(beta * z);
}

struct SimulatedSubject {
  double time = 0.0;
  int cause = 1;
};

inline SimulatedSubject sample_subject(double beta, int z, double p, ReplicationRng& rng) {
  const double u_cause = rng.uniform();
  const double u_time = rng.uniform();
  if (u_cause < cause1_limit(beta, z, p)) return {cause1_time(u_time, beta, z, p), 1};
  return {cause2_time(u_time, beta, z), 2};
}

// ---------------------------------------------------------------------------
// Censoring calibration
// ---------------------------------------------------------------------------

/// Mixture weight of each group (z = 0 and z = 1) in the censoring target.
struct GroupWeights {
  double first = 1.0;
  double second = 1.0;
};

/// P(C < T) for C ~ Uniform(0, b) and T drawn from the weighted two-group mixture.
inline double censored_fraction(double b, double beta, double p, GroupWeights w) {
  if (std::isinf(b)) return 0.0;
  const double total = w.first + w.second;
  double frac = 0.0;
  for (int z = 0; z < 2; ++z) {
    const double weight = (z == 0 ? w.first : w.second) / total;
    if (weight == 0.0) continue;
    auto surv = [&](double c) { return analytic_survival(c, beta, z, p); };
    const double area = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(surv, 0.0, b, 15, 1e-13);
    frac += weight * area / b;
  }
  return frac;
}

/// Upper bound b of Uniform(0, b) censoring giving the target censored
/// fraction; infinity for a zero target.
inline double calibrate_censoring(double beta, double p, GroupWeights w, double target,
                                  double tolerance = 1e-4) {
  if (!(target >= 0.0 && target < 1.0)) throw UnreachableTarget("censoring target must lie in [0, 1)");
  if (target == 0.0) return std::numeric_limits<double>::infinity();

  double lo = 0.0;
  double hi = 1.0;
  int doublings = 0;
  while (censored_fraction(hi, beta, p, w) > target) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) {
      std::ostringstream msg;
      msg << "censoring fraction " << target << " is not reachable for any finite bound";
      throw UnreachableTarget(msg.str());
    }
  }
  // fraction(b) decreases from 1 at b -> 0 towards 0 as b grows.
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f = censored_fraction(mid, beta, p, w);
    if (std::abs(f - target) < tolerance) return mid;
    (f > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

enum class CensoringMode { Pooled, PerGroup };

struct Scenario {
  int n1 = 50;
  int n2 = 50;
  double p = 0.66;
  double beta = 0.0;  // log subdistribution hazard ratio
  double censor_fraction = 0.0;
  double t_fixed = 0.5;
  double alpha = 0.05;
  int reps = 10000;
  std::uint64_t master_seed = 20180601;
  CensoringMode censoring = CensoringMode::Pooled;
  int cause = 1;
  bool swap_groups = false;  // present the z = 1 sample as the first group

  double shr() const { return std::exp(beta); }

  void validate() const {
    if (n1 < 2 || n2 < 2) throw DataError("group sizes must be at least 2");
    if (!(p > 0.0 && p < 1.0)) throw DataError("p must lie in (0, 1)");
    if (!std::isfinite(beta)) throw DataError("beta must be finite");
    if (!(censor_fraction >= 0.0 && censor_fraction < 1.0)) throw DataError("censor fraction must lie in [0, 1)");
    if (!(t_fixed > 0.0)) throw DataError("fixed time must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0, 1)");
    if (reps < 1) throw DataError("reps must be positive");
  }
};

struct CensoringBounds {
  double first = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
};

inline CensoringBounds censoring_bounds(const Scenario& s) {
  if (s.censor_fraction == 0.0) return {};
  if (s.censoring == CensoringMode::Pooled) {
    const double b = calibrate_censoring(s.beta, s.p, {double(s.n1), double(s.n2)}, s.censor_fraction);
    return {b, b};
  }
  return {calibrate_censoring(s.beta, s.p, {1.0, 0.0}, s.censor_fraction),
          calibrate_censoring(s.beta, s.p, {0.0, 1.0}, s.censor_fraction)};
}

/// Observed data of one replication; group 1 has z = 0, group 2 has z = 1.
struct SimulatedSample {
  std::vector<double> time1, time2;
  std::vector<int> status1, status2;
};

inline SimulatedSample simulate_replication(const Scenario& s, const CensoringBounds& bounds,
                                            std::uint64_t replication) {
  ReplicationRng rng(s.master_seed, replication);
  SimulatedSample out;
  auto draw = [&](int n, int z, double bound, std::vector<double>& time, std::vector<int>& status) {
    time.reserve(static_cast<std::size_t>(n));
    status.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto subject = sample_subject(s.beta, z, s.p, rng);
      const double censor = bound * rng.uniform();  // drawn even when unused to keep streams aligned
      if (subject.time <= censor) {
        time.push_back(subject.time);
        status.push_back(subject.cause);
      } else {
        time.push_back(censor);
        status.push_back(0);
      }
    }
  };
  draw(s.n1, 0, bounds.first, out.time1, out.status1);
  draw(s.n2, 1, bounds.second, out.time2, out.status2);
  return out;
}

/// Per-test outcome of one replication: nullopt when the test was not estimable.
using ReplicationOutcome = std::array<std::optional<FixedTimeTestResult>, kTestCount>;

/// Runs all twelve tests on one pair of samples at time t.
inline ReplicationOutcome evaluate_tests(std::span<const double> time1, std::span<const int> status1,
                                         std::span<const double> time2, std::span<const int> status2,
                                         int cause, double t) {
  ReplicationOutcome out;
  const auto table1 = tabulate(time1, status1, "1");
  const auto table2 = tabulate(time2, status2, "2");
  const double cif1 = cif_at(cif_estimate(table1, cause), t);
  const double cif2 = cif_at(cif_estimate(table2, cause), t);

  for (auto kind : {VarianceKind::Gaynor, VarianceKind::Aalen}) {
    std::optional<GroupEstimate> g1, g2;
    try {
      g1 = GroupEstimate{"1", cif1, cif_variance(kind, table1, cause, t)};
      g2 = GroupEstimate{"2", cif2, cif_variance(kind, table2, cause, t)};
    } catch (const NumericalError&) {
      continue;
    }
    for (auto transform : kAllTransforms) {
      TestId id;
      id.family = kind == VarianceKind::Gaynor ? TestId::Family::Gaynor : TestId::Family::Aalen;
      id.transform = transform;
      try {
        auto r = two_sample_test(*g1, *g2, t, transform);
        r.variance_kind = kind;
        out[id.index()] = std::move(r);
      } catch (const NumericalError&) {
      }
    }
  }

  std::vector<double> pooled_time(time1.begin(), time1.end());
  pooled_time.insert(pooled_time.end(), time2.begin(), time2.end());
  std::vector<int> pooled_status(status1.begin(), status1.end());
  pooled_status.insert(pooled_status.end(), status2.begin(), status2.end());
  std::vector<int> in_first(time1.size(), 1);
  in_first.resize(pooled_time.size(), 0);
  const double taus[] = {t};
  const auto theta = pseudo_values(pooled_time, pooled_status, cause, taus);
  for (auto link : {LinkKind::CLogLog, LinkKind::Logit}) {
    TestId id;
    id.family = TestId::Family::Pseudo;
    id.link = link;
    try {
      out[id.index()] = pseudo_test(theta, in_first, link);
    } catch (const NumericalError&) {
    }
  }
  return out;
}

struct TestTally {
  long rejections = 0;
  long estimable = 0;
  long not_estimable = 0;

  double rate() const { return estimable == 0 ? 0.0 : static_cast<double>(rejections) / estimable; }
};

struct ScenarioResult {
  Scenario scenario;
  CensoringBounds bounds;
  long censored = 0;  // censored subjects across all replications
  long subjects = 0;
  std::array<TestTally, kTestCount> tallies{};

  double observed_censored_fraction() const {
    return subjects == 0 ? 0.0 : static_cast<double>(censored) / subjects;
  }
  const TestTally& tally(const TestId& id) const { return tallies[id.index()]; }
  double rejection_rate(const TestId& id) const { return tally(id).rate(); }
};

/// Runs every replication of the scenario. Replication r draws from the
/// stream keyed by (master_seed, r), so results do not depend on `threads`.
inline ScenarioResult run_scenario(const Scenario& s, unsigned threads = 0) {
  s.validate();
  ScenarioResult result;
  result.scenario = s;
  result.bounds = censoring_bounds(s);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(s.reps));

  std::vector<ScenarioResult> partial(threads, result);
  auto work = [&](unsigned worker) {
    auto& acc = partial[worker];
    for (int rep = static_cast<int>(worker); rep < s.reps; rep += static_cast<int>(threads)) {
      const auto sample = simulate_replication(s, result.bounds, static_cast<std::uint64_t>(rep));
      for (int st : sample.status1) acc.censored += st == 0;
      for (int st : sample.status2) acc.censored += st == 0;
      acc.subjects += s.n1 + s.n2;
      const auto outcome =
          s.swap_groups ? evaluate_tests(sample.time2, sample.status2, sample.time1, sample.status1, s.cause, s.t_fixed)
                        : evaluate_tests(sample.time1, sample.status1, sample.time2, sample.status2, s.cause, s.t_fixed);
      for (std::size_t k = 0; k < kTestCount; ++k) {
        auto& tally = acc.tallies[k];
        if (!outcome[k]) {
          ++tally.not_estimable;
          continue;
        }
        ++tally.estimable;
        if (outcome[k]->p_value < s.alpha) ++tally.rejections;
      }
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }

  for (const auto& part : partial) {
    result.censored += part.censored;
    result.subjects += part.subjects;
    for (std::size_t k = 0; k < kTestCount; ++k) {
      result.tallies[k].rejections += part.tallies[k].rejections;
      result.tallies[k].estimable += part.tallies[k].estimable;
      result.tallies[k].not_estimable += part.tallies[k].not_estimable;
    }
  }
  return result;
}

}  // namespace cifpoint
