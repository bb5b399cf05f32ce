#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tiertrack/cli.hpp"
#include "tiertrack/io.hpp"

using namespace tiertrack;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("tiertrack_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  long n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

// Collects what dispatch prints on a stream so tests can assert on the
// machine-readable error channel without cluttering the runner output.
struct Capture {
  std::ostream& os;
  std::ostringstream ss;
  std::streambuf* saved;
  explicit Capture(std::ostream& o) : os(o) { saved = os.rdbuf(ss.rdbuf()); }
  ~Capture() { os.rdbuf(saved); }
  std::string str() const { return ss.str(); }
};

Scenario mm1_scenario() {
  Scenario s;
  s.topo.num_tiers = 1;
  s.topo.num_classes = 1;
  s.topo.replicas = {1};
  s.truth = ParamVector::zeros(s.topo);
  s.truth.u0 << 0.0;
  s.truth.d << 0.001;
  s.truth.S << 0.01;
  s.schedule = {{0.0, Workload{Eigen::VectorXd::Constant(1, 50.0)}}};
  s.noise_rel = 0.02;
  s.sample_period = 1.0;
  s.duration = 30.0;
  s.seed = 9;
  return s;
}

Scenario ramp_scenario() {
  Scenario s;
  s.topo.num_tiers = 2;
  s.topo.num_classes = 2;
  s.topo.replicas = {1, 1};
  s.truth = ParamVector::zeros(s.topo);
  s.truth.u0 << 0.05, 0.05;
  s.truth.d << 0.002, 0.004;
  s.truth.S << 0.02, 0.03,
               0.025, 0.015;
  Eigen::VectorXd base(2);
  base << 8.0, 6.0;
  s.schedule = {{0.0, Workload{base}},
                {60.0, Workload{(base * 2.5).eval()}}};
  s.sample_period = 1.0;
  s.duration = 120.0;
  s.seed = 5;
  return s;
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("topology and parameters round trip") {
  Topology topo;
  topo.num_tiers = 2;
  topo.num_classes = 3;
  topo.replicas = {2, 5};
  const Json tj = to_json(topo);
  CHECK(tj["tiers"] == 2);
  CHECK(tj["classes"] == 3);
  const Topology topo2 = topology_from_json(tj);
  CHECK(topo2.replicas == topo.replicas);

  ParamVector x = ParamVector::zeros(topo);
  x.u0 << 0.125, 0.0625;
  x.d << 0.005, 0.25, 0.0009765625;
  x.S << 0.01, 0.02,
         0.03, 0.04,
         0.05, 0.06;
  const ParamVector x2 = params_from_json(to_json(x), topo);
  CHECK(x2.flat() == x.flat());  // bit-exact through JSON
}

TEST_CASE("malformed documents are rejected with context") {
  Topology topo;
  topo.num_tiers = 2;
  topo.num_classes = 1;
  topo.replicas = {1, 1};

  Json tj = to_json(topo);
  tj.erase("replicas");
  CHECK_THROWS_AS(topology_from_json(tj), ConfigError);
  tj = to_json(topo);
  tj["replicas"] = {1};
  CHECK_THROWS_AS(topology_from_json(tj), ConfigError);
  tj = to_json(topo);
  tj["replicas"] = {1, 0};
  CHECK_THROWS_AS(topology_from_json(tj), ConfigError);

  ParamVector x = ParamVector::zeros(topo);
  Json pj = to_json(x);
  pj["S"] = {{0.01}};  // S must be classes rows of tiers entries
  try {
    params_from_json(pj, topo);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("S") != std::string::npos);
  }
}

TEST_CASE("metric samples keep null responses") {
  MetricSample s;
  s.t = 3.0;
  s.workload.lambda = Eigen::VectorXd::Constant(2, 4.0);
  s.util = Eigen::VectorXd::Constant(1, 0.25);
  s.resp = {std::optional<double>(0.125), std::nullopt};
  const Json j = to_json(s);
  CHECK(j["resp"][0] == 0.125);
  CHECK(j["resp"][1].is_null());
  const MetricSample s2 = sample_from_json(j);
  CHECK(s2.resp[0] == 0.125);
  CHECK(!s2.resp[1].has_value());
  CHECK(s2.util(0) == 0.25);
}

TEST_CASE("the JSONL reader skips blanks and names bad lines") {
  MetricSample s;
  s.t = 1.0;
  s.workload.lambda = Eigen::VectorXd::Constant(1, 2.0);
  s.util = Eigen::VectorXd::Constant(1, 0.5);
  s.resp = {std::optional<double>(0.01)};
  std::ostringstream out;
  write_metrics_jsonl(out, {s, s});

  std::istringstream ok("\n" + out.str() + "  \n");
  CHECK(read_metrics_jsonl(ok).size() == 2);

  std::istringstream bad(out.str() + "{not json\n");
  try {
    read_metrics_jsonl(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("scenario round trip preserves schedule and truth changes") {
  Scenario s = ramp_scenario();
  ParamVector other = s.truth;
  other.S(0, 0) = 0.04;
  s.truth_changes = {{60.0, other}};
  s.noise_rel = 0.01;
  const Scenario s2 = scenario_from_json(to_json(s));
  CHECK(s2.topo.replicas == s.topo.replicas);
  CHECK(s2.truth.flat() == s.truth.flat());
  REQUIRE(s2.schedule.size() == 2);
  CHECK(s2.schedule[1].start == 60.0);
  CHECK(s2.schedule[1].workload.lambda == s.schedule[1].workload.lambda);
  REQUIRE(s2.truth_changes.size() == 1);
  CHECK(s2.truth_changes[0].truth.S(0, 0) == 0.04);
  CHECK(s2.noise_rel == 0.01);
  CHECK(s2.seed == s.seed);

  // Optional fields fall back to defaults.
  Json j = to_json(mm1_scenario());
  j.erase("noise_rel");
  j.erase("seed");
  j.erase("truth_changes");
  const Scenario s3 = scenario_from_json(j);
  CHECK(s3.noise_rel == 0.01);
  CHECK(s3.seed == 0);
  CHECK(s3.truth_changes.empty());
}

TEST_CASE("policy and sla round trip") {
  ScalingPolicy p;
  p.sla.r_max = Eigen::VectorXd::Constant(2, 0.25);
  p.sla.u_max = 0.9;
  p.headroom = 0.15;
  p.scale_down_util = 0.35;
  p.cooldown = 4;
  p.bounds.min_replicas = {1, 1};
  p.bounds.max_replicas = {6, 4};
  Topology topo = ramp_scenario().topo;
  const ScalingPolicy p2 = policy_from_json(to_json(p), topo);
  CHECK(p2.sla.r_max == p.sla.r_max);
  CHECK(p2.sla.u_max == 0.9);
  CHECK(p2.headroom == 0.15);
  CHECK(p2.cooldown == 4);
  CHECK(p2.bounds.max_replicas == p.bounds.max_replicas);

  Json sj = to_json(p.sla);
  CHECK_THROWS_AS(sla_from_json(sj, 3), ConfigError);  // arity mismatch
}

TEST_CASE("track records expose the pinned schema") {
  const Scenario s = mm1_scenario();
  auto [samples, truth] = generate_analytic(s);
  const auto records = track(samples, s.topo, TrackConfig{});
  REQUIRE(!records.empty());
  const Json j = to_json(records.back());
  REQUIRE(j.size() == 5);
  auto it = j.begin();
  CHECK(it.key() == "t");
  CHECK((++it).key() == "x");
  CHECK((++it).key() == "z_pred");
  CHECK((++it).key() == "innov_norm");
  CHECK((++it).key() == "skipped");
  CHECK(j["x"].size() == 3);       // u0 | d | S flattened
  CHECK(j["z_pred"].size() == 2);  // util | resp
  CHECK(j["innov_norm"].get<double>() >= 0.0);
  CHECK(j["skipped"] == false);
}

TEST_CASE("file loader reports the path") {
  try {
    load_json_file("/nonexistent/nowhere.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("nowhere.json") != std::string::npos);
  }
  const fs::path dir = fresh_dir("loader");
  write_file(dir / "bad.json", "{\"a\":");
  CHECK_THROWS_AS(load_json_file((dir / "bad.json").string()), ConfigError);
}

TEST_CASE("simulate writes deterministic metrics and truth") {
  const fs::path dir = fresh_dir("simulate");
  const Scenario s = mm1_scenario();
  write_file(dir / "scenario.json", to_json(s).dump(2));

  auto run = [&](const std::string& metrics, const std::string& truth,
                 bool des) {
    std::vector<std::string> args = {
        "simulate", "--scenario", (dir / "scenario.json").string(),
        "--out-metrics", (dir / metrics).string(),
        "--out-truth", (dir / truth).string()};
    if (des) args.push_back("--des");
    return dispatch(args);
  };

  CHECK(run("m1.jsonl", "t1.jsonl", false) == 0);
  CHECK(run("m2.jsonl", "t2.jsonl", false) == 0);
  CHECK(count_lines(dir / "m1.jsonl") == 30);
  CHECK(count_lines(dir / "t1.jsonl") == 30);
  CHECK(slurp(dir / "m1.jsonl") == slurp(dir / "m2.jsonl"));
  CHECK(slurp(dir / "t1.jsonl") == slurp(dir / "t2.jsonl"));

  CHECK(run("d1.jsonl", "dt1.jsonl", true) == 0);
  CHECK(run("d2.jsonl", "dt2.jsonl", true) == 0);
  CHECK(slurp(dir / "d1.jsonl") == slurp(dir / "d2.jsonl"));
  CHECK(slurp(dir / "m1.jsonl") != slurp(dir / "d1.jsonl"));

  // An explicit seed overrides the scenario's.
  std::vector<std::string> args = {
      "simulate", "--scenario", (dir / "scenario.json").string(),
      "--out-metrics", (dir / "m3.jsonl").string(),
      "--out-truth", (dir / "t3.jsonl").string(), "--seed", "10"};
  CHECK(dispatch(args) == 0);
  CHECK(slurp(dir / "m1.jsonl") != slurp(dir / "m3.jsonl"));
}

TEST_CASE("track consumes metrics and emits one estimate per sample") {
  const fs::path dir = fresh_dir("track");
  const Scenario s = mm1_scenario();
  write_file(dir / "scenario.json", to_json(s).dump(2));
  write_file(dir / "topology.json", to_json(s.topo).dump(2));
  REQUIRE(dispatch({"simulate", "--scenario", (dir / "scenario.json").string(),
                    "--out-metrics", (dir / "metrics.jsonl").string(),
                    "--out-truth", (dir / "truth.jsonl").string()}) == 0);
  CHECK(dispatch({"track", "--topology", (dir / "topology.json").string(),
                  "--metrics", (dir / "metrics.jsonl").string(),
                  "--out", (dir / "estimates.jsonl").string(),
                  "--q-rel", "0.003", "--r-rel", "0.01"}) == 0);
  CHECK(count_lines(dir / "estimates.jsonl") == 30);
  std::ifstream in(dir / "estimates.jsonl");
  std::string line;
  std::getline(in, line);
  const Json j = Json::parse(line);
  CHECK(j.contains("x"));
  CHECK(j.contains("z_pred"));
  CHECK(j["skipped"] == false);

  // An empty metrics file is not an error: there is just nothing to emit.
  write_file(dir / "empty.jsonl", "");
  CHECK(dispatch({"track", "--topology", (dir / "topology.json").string(),
                  "--metrics", (dir / "empty.jsonl").string(),
                  "--out", (dir / "none.jsonl").string()}) == 0);
  CHECK(count_lines(dir / "none.jsonl") == 0);
}

TEST_CASE("whatif evaluates and guards against saturation") {
  const fs::path dir = fresh_dir("whatif");
  const Scenario s = mm1_scenario();
  write_file(dir / "topology.json", to_json(s.topo).dump(2));
  write_file(dir / "estimate.json", to_json(s.truth).dump(2));

  CHECK(dispatch({"whatif", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "50", "--out", (dir / "obs.json").string()}) ==
        0);
  Json obs = load_json_file((dir / "obs.json").string());
  CHECK(obs["util"][0].get<double>() == doctest::Approx(0.5));
  CHECK(obs["resp"][0].get<double>() == doctest::Approx(0.021));

  CHECK(dispatch({"whatif", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "50", "--replicas", "2",
                  "--out", (dir / "obs2.json").string()}) == 0);
  Json obs2 = load_json_file((dir / "obs2.json").string());
  CHECK(obs2["util"][0].get<double>() == doctest::Approx(0.25));

  Capture err(std::cerr);
  CHECK(dispatch({"whatif", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "200",
                  "--out", (dir / "obs3.json").string()}) == 2);
  const Json ej = Json::parse(err.str());
  CHECK(ej["error"] == "saturation");
  CHECK(ej["tier"] == 0);
  CHECK(!fs::exists(dir / "obs3.json"));
}

TEST_CASE("breakdown decomposes the prediction") {
  const fs::path dir = fresh_dir("breakdown");
  const Scenario s = ramp_scenario();
  write_file(dir / "topology.json", to_json(s.topo).dump(2));
  write_file(dir / "estimate.json", to_json(s.truth).dump(2));
  CHECK(dispatch({"breakdown", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "8,6",
                  "--out", (dir / "b.json").string()}) == 0);
  const Json b = load_json_file((dir / "b.json").string());
  CHECK(b["delay"].size() == 2);
  CHECK(b["residence"].size() == 2);
  CHECK(b["residence"][0].size() == 2);
  CHECK(b["bottleneck"].size() == 2);
}

TEST_CASE("plan reports feasibility through the exit code") {
  const fs::path dir = fresh_dir("plan");
  const Scenario s = mm1_scenario();
  write_file(dir / "topology.json", to_json(s.topo).dump(2));
  write_file(dir / "estimate.json", to_json(s.truth).dump(2));
  write_file(dir / "sla.json", R"({"r_max": [0.05], "u_max": 0.95})");
  CHECK(dispatch({"plan", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "50", "--sla", (dir / "sla.json").string(),
                  "--out", (dir / "plan.json").string()}) == 0);
  Json plan = load_json_file((dir / "plan.json").string());
  CHECK(plan["feasible"] == true);
  CHECK(plan["replicas"] == Json::array({1}));
  CHECK(plan["predicted"]["resp"][0].get<double>() > 0.0);

  // No replica count can beat a ceiling below the service time itself.
  write_file(dir / "tight.json", R"({"r_max": [0.005], "u_max": 0.95})");
  CHECK(dispatch({"plan", "--topology", (dir / "topology.json").string(),
                  "--estimate", (dir / "estimate.json").string(),
                  "--lambda", "50", "--sla", (dir / "tight.json").string(),
                  "--out", (dir / "plan2.json").string()}) == 2);
  Json plan2 = load_json_file((dir / "plan2.json").string());
  CHECK(plan2["feasible"] == false);
  CHECK(plan2["replicas"] == Json::array({8}));  // default upper bound
}

TEST_CASE("autoscale runs the loop end to end") {
  const fs::path dir = fresh_dir("autoscale");
  const Scenario s = ramp_scenario();
  write_file(dir / "scenario.json", to_json(s).dump(2));
  ScalingPolicy p;
  p.sla.r_max = Eigen::VectorXd::Constant(2, 0.25);
  p.sla.u_max = 0.9;
  p.cooldown = 3;
  p.bounds.min_replicas = {1, 1};
  p.bounds.max_replicas = {6, 6};
  write_file(dir / "policy.json", to_json(p).dump(2));

  CHECK(dispatch({"autoscale", "--scenario", (dir / "scenario.json").string(),
                  "--policy", (dir / "policy.json").string(),
                  "--out", (dir / "summary.json").string(),
                  "--out-windows", (dir / "windows.jsonl").string(),
                  "--out-directives", (dir / "directives.jsonl").string(),
                  "--warmup", "20", "--q-rel", "0.003", "--r-rel", "0.01"}) ==
        0);
  const Json summary = load_json_file((dir / "summary.json").string());
  CHECK(summary["windows"] == 100);  // 120 windows minus 20 warmup
  CHECK(summary["violations"].get<int>() >= 0);
  const double frac = summary["violation_fraction"].get<double>();
  CHECK(frac >= 0.0);
  CHECK(frac <= 1.0);
  CHECK(summary["final_replicas"].size() == 2);
  CHECK(count_lines(dir / "windows.jsonl") == 120);

  std::ifstream in(dir / "windows.jsonl");
  std::string line;
  REQUIRE(std::getline(in, line));
  const Json w = Json::parse(line);
  CHECK(w["step"] == 0);
  CHECK(w["replicas"] == Json::array({1, 1}));
  CHECK(w["directives"].is_array());
}

TEST_CASE("usage and data errors map to distinct exit codes") {
  const fs::path dir = fresh_dir("errors");
  Capture err(std::cerr);
  Capture out(std::cout);
  CHECK(dispatch({}) == 1);
  CHECK(dispatch({"frobnicate"}) == 1);
  CHECK(dispatch({"simulate"}) == 1);  // missing required flags
  CHECK(dispatch({"simulate", "--scenario", (dir / "missing.json").string(),
                  "--out-metrics", (dir / "m.jsonl").string(),
                  "--out-truth", (dir / "t.jsonl").string()}) == 2);

  write_file(dir / "topology.json",
             R"({"tiers": 1, "classes": 1, "replicas": [1]})");
  write_file(dir / "garbage.jsonl", "{\"t\": oops\n");
  CHECK(dispatch({"track", "--topology", (dir / "topology.json").string(),
                  "--metrics", (dir / "garbage.jsonl").string(),
                  "--out", (dir / "e.jsonl").string()}) == 2);
  const std::string error_text = err.str();
  CHECK(error_text.find("\"error\"") != std::string::npos);
}

}  // TEST_SUITE
