#include <doctest.h>

#include <cmath>

#include "tiertrack/sim.hpp"

using namespace tiertrack;

namespace {

Scenario mm1_scenario(double lambda, double service, double duration,
                      std::uint64_t seed) {
  Scenario s;
  s.topo.num_tiers = 1;
  s.topo.num_classes = 1;
  s.topo.replicas = {1};
  s.truth = ParamVector::zeros(s.topo);
  s.truth.u0 << 0.0;
  s.truth.d << 0.0;
  s.truth.S << service;
  s.schedule = {{0.0, Workload{Eigen::VectorXd::Constant(1, lambda)}}};
  s.noise_rel = 0.0;
  s.sample_period = 1.0;
  s.duration = duration;
  s.seed = seed;
  return s;
}

double mean_util(const std::vector<MetricSample>& samples, int tier) {
  double sum = 0.0;
  for (const auto& s : samples) sum += s.util(tier);
  return sum / samples.size();
}

double mean_resp(const std::vector<MetricSample>& samples, int cls) {
  double sum = 0.0;
  long n = 0;
  for (const auto& s : samples)
    if (s.resp[cls]) {
      sum += *s.resp[cls];
      ++n;
    }
  return n > 0 ? sum / n : std::nan("");
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("scenario lookups pick the last segment at or before t") {
  Scenario s = mm1_scenario(5.0, 0.01, 100.0, 0);
  s.schedule.push_back({20.0, Workload{Eigen::VectorXd::Constant(1, 9.0)}});
  ParamVector other = s.truth;
  other.S << 0.02;
  s.truth_changes = {{50.0, other}};
  s.validate();
  CHECK(s.workload_at(0.0).lambda(0) == 5.0);
  CHECK(s.workload_at(19.999).lambda(0) == 5.0);
  CHECK(s.workload_at(20.0).lambda(0) == 9.0);
  CHECK(s.truth_at(49.999).S(0, 0) == 0.01);
  CHECK(s.truth_at(50.0).S(0, 0) == 0.02);
  CHECK(s.num_samples() == 100);
  CHECK(mm1_scenario(5.0, 0.01, 10.5, 0).num_samples() == 10);
}

TEST_CASE("scenario validation") {
  Scenario s = mm1_scenario(5.0, 0.01, 100.0, 0);
  CHECK_NOTHROW(s.validate());
  s.schedule[0].start = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mm1_scenario(5.0, 0.01, 100.0, 0);
  s.schedule.push_back({0.0, s.schedule[0].workload});
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mm1_scenario(5.0, 0.01, 0.0, 0);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mm1_scenario(5.0, 0.01, 100.0, 0);
  s.truth_changes = {{0.0, s.truth}};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = mm1_scenario(5.0, 0.01, 100.0, 0);
  s.noise_rel = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("saturated scenarios are rejected up front") {
  Scenario s = mm1_scenario(200.0, 0.01, 100.0, 0);  // u would be 2
  try {
    generate_analytic(s);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("segment 0") != std::string::npos);
  }
  CHECK_THROWS_AS(run_des(s), ConfigError);
}

TEST_CASE("analytic generator is exact at zero noise") {
  Scenario s = mm1_scenario(50.0, 0.01, 20.0, 3);
  auto [samples, truth] = generate_analytic(s);
  REQUIRE(samples.size() == 20);
  REQUIRE(truth.size() == 20);
  const Observation clean =
      evaluate_observation(s.truth, s.schedule[0].workload, s.topo);
  for (size_t k = 0; k < samples.size(); ++k) {
    CHECK(samples[k].util(0) == clean.util(0));
    REQUIRE(samples[k].resp[0].has_value());
    CHECK(*samples[k].resp[0] == clean.resp(0));
    CHECK(samples[k].t == doctest::Approx(k + 1.0));
    CHECK(truth[k].noiseless.resp(0) == clean.resp(0));
  }
}

TEST_CASE("analytic generator is seed-deterministic") {
  Scenario s = mm1_scenario(50.0, 0.01, 50.0, 17);
  s.noise_rel = 0.02;
  auto [a, ta] = generate_analytic(s);
  auto [b, tb] = generate_analytic(s);
  for (size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].util(0) == b[k].util(0));
    CHECK(*a[k].resp[0] == *b[k].resp[0]);
  }
  s.seed = 18;
  auto [c, tc] = generate_analytic(s);
  bool any_diff = false;
  for (size_t k = 0; k < a.size(); ++k)
    any_diff = any_diff || a[k].util(0) != c[k].util(0);
  CHECK(any_diff);
}

TEST_CASE("analytic noise is centered on the clean values") {
  Scenario s = mm1_scenario(50.0, 0.01, 500.0, 23);
  s.noise_rel = 0.05;
  auto [samples, truth] = generate_analytic(s);
  const Observation clean =
      evaluate_observation(s.truth, s.schedule[0].workload, s.topo);
  // 5% relative noise over 500 samples: the mean sits within ~3 sigma/sqrt(n)
  CHECK(mean_util(samples, 0) ==
        doctest::Approx(clean.util(0)).epsilon(3 * 0.05 / std::sqrt(500.0)));
  CHECK(mean_resp(samples, 0) ==
        doctest::Approx(clean.resp(0)).epsilon(3 * 0.05 / std::sqrt(500.0)));
}

TEST_CASE("event simulation reproduces the M/M/1 queue") {
  // u = 0.5, mean sojourn S/(1-u) = 0.02
  Scenario s = mm1_scenario(50.0, 0.01, 600.0, 5);
  auto [samples, truth] = run_des(s);
  CHECK(mean_util(samples, 0) == doctest::Approx(0.5).epsilon(0.03));
  CHECK(mean_resp(samples, 0) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("event simulation is seed-deterministic") {
  Scenario s = mm1_scenario(40.0, 0.012, 60.0, 99);
  auto [a, ta] = run_des(s);
  auto [b, tb] = run_des(s);
  for (size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].util(0) == b[k].util(0));
    CHECK(a[k].resp[0] == b[k].resp[0]);
  }
}

TEST_CASE("zero arrivals produce empty windows") {
  Scenario s = mm1_scenario(0.0, 0.01, 30.0, 1);
  DesEngine engine(s);
  while (!engine.finished()) {
    const WindowStats ws = engine.advance_window();
    CHECK(ws.util(0) == 0.0);
    CHECK(!ws.resp[0].has_value());
  }
  CHECK(engine.arrivals(0) == 0);
  CHECK(engine.completions(0) == 0);
}

TEST_CASE("jobs are conserved") {
  Scenario s = mm1_scenario(80.0, 0.01, 120.0, 31);  // u = 0.8, busy queue
  DesEngine engine(s);
  while (!engine.finished()) engine.advance_window();
  CHECK(engine.arrivals(0) ==
        engine.completions(0) + engine.in_flight(0));
  CHECK(engine.arrivals(0) > 8000);  // sanity: the stream actually ran
}

TEST_CASE("background stream occupies its share of the tier") {
  Scenario s = mm1_scenario(50.0, 0.01, 400.0, 13);
  s.truth.u0 << 0.2;
  auto [samples, truth] = run_des(s);
  // u = u0 + lambda S = 0.7
  CHECK(mean_util(samples, 0) == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("two-tier homogeneous service matches the analytic relations") {
  Scenario s;
  s.topo.num_tiers = 2;
  s.topo.num_classes = 2;
  s.topo.replicas = {1, 1};
  s.truth = ParamVector::zeros(s.topo);
  s.truth.u0 << 0.1, 0.05;
  s.truth.d << 0.005, 0.01;
  s.truth.S << 0.012, 0.02,
               0.012, 0.02;
  Workload w;
  w.lambda = Eigen::VectorXd(2);
  w.lambda << 12.0, 10.0;
  s.schedule = {{0.0, w}};
  s.noise_rel = 0.0;
  s.sample_period = 1.0;
  s.duration = 300.0;
  s.seed = 77;

  auto [samples, truth] = run_des(s);
  const Observation clean = evaluate_observation(s.truth, w, s.topo);
  for (int j = 0; j < 2; ++j)
    CHECK(mean_util(samples, j) ==
          doctest::Approx(clean.util(j)).epsilon(0.05));
  for (int i = 0; i < 2; ++i)
    CHECK(mean_resp(samples, i) ==
          doctest::Approx(clean.resp(i)).epsilon(0.08));
}

TEST_CASE("heterogeneous FCFS service follows Pollaczek-Khinchine") {
  // Multi-class M/G/1 FCFS: every class waits the same
  // W = sum_k lambda_k s_k^2 / (1 - rho) for exponential service, so the
  // per-class sojourn is s_i + W — not s_i/(1-u). The event simulation must
  // match the queueing law, not the tracked model's approximation.
  Scenario s;
  s.topo.num_tiers = 1;
  s.topo.num_classes = 2;
  s.topo.replicas = {1};
  s.truth = ParamVector::zeros(s.topo);
  s.truth.u0 << 0.0;
  s.truth.d << 0.0, 0.0;
  s.truth.S << 0.01,
               0.03;
  Workload w;
  w.lambda = Eigen::VectorXd(2);
  w.lambda << 20.0, 10.0;
  s.schedule = {{0.0, w}};
  s.noise_rel = 0.0;
  s.sample_period = 1.0;
  s.duration = 600.0;
  s.seed = 41;

  auto [samples, truth] = run_des(s);
  const double rho = 20 * 0.01 + 10 * 0.03;  // 0.5
  const double wait = (20 * 0.01 * 0.01 + 10 * 0.03 * 0.03) / (1 - rho);
  CHECK(mean_resp(samples, 0) == doctest::Approx(0.01 + wait).epsilon(0.05));
  CHECK(mean_resp(samples, 1) == doctest::Approx(0.03 + wait).epsilon(0.05));
}

TEST_CASE("replica changes drain and redistribute") {
  Scenario s = mm1_scenario(80.0, 0.02, 60.0, 3);  // needs 2 replicas
  s.topo.replicas = {2};
  DesEngine engine(s);
  for (int k = 0; k < 20; ++k) engine.advance_window();
  CHECK(engine.topology().replicas[0] == 2);

  engine.set_replica_count(0, 1);  // overloaded from here on
  CHECK(engine.topology().replicas[0] == 1);
  WindowStats ws;
  for (int k = 0; k < 20; ++k) ws = engine.advance_window();
  CHECK(!ws.noiseless.has_value());  // model saturates at one replica
  CHECK(ws.util(0) > 0.9);           // the simulation itself keeps running
  CHECK(engine.arrivals(0) == engine.completions(0) + engine.in_flight(0));

  engine.set_replica_count(0, 3);
  while (!engine.finished()) ws = engine.advance_window();
  CHECK(ws.noiseless.has_value());
  CHECK(engine.arrivals(0) == engine.completions(0) + engine.in_flight(0));

  CHECK_THROWS_AS(engine.set_replica_count(0, 0), ConfigError);
  CHECK_THROWS_AS(engine.set_replica_count(5, 1), ConfigError);
}

TEST_CASE("mid-run workload and truth changes take effect") {
  Scenario s = mm1_scenario(30.0, 0.01, 400.0, 59);
  s.schedule.push_back({200.0, Workload{Eigen::VectorXd::Constant(1, 60.0)}});
  ParamVector slower = s.truth;
  slower.S << 0.012;
  s.truth_changes = {{200.0, slower}};
  auto [samples, truth] = run_des(s);
  double early = 0.0, late = 0.0;
  for (int k = 0; k < 200; ++k) early += samples[k].util(0);
  for (int k = 200; k < 400; ++k) late += samples[k].util(0);
  early /= 200;
  late /= 200;
  CHECK(early == doctest::Approx(0.30).epsilon(0.05));
  CHECK(late == doctest::Approx(0.72).epsilon(0.05));
  CHECK(truth[0].truth.S(0, 0) == 0.01);
  CHECK(truth[399].truth.S(0, 0) == 0.012);
}

}  // TEST_SUITE
