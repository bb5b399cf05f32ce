#include "tiertrack/io.hpp"

#include <fstream>
#include <sstream>

namespace tiertrack {

namespace {

Json vec_to_json(const Eigen::VectorXd& v) {
  Json arr = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) arr.push_back(v(k));
  return arr;
}

Eigen::VectorXd vec_from_json(const Json& j, const char* what) {
  if (!j.is_array())
    throw ConfigError(std::string(what) + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index k = 0;
  for (const auto& e : j) {
    if (!e.is_number())
      throw ConfigError(std::string(what) + ": expected numbers");
    v(k++) = e.get<double>();
  }
  return v;
}

Eigen::VectorXd sized_vec(const Json& j, const char* what, int n) {
  Eigen::VectorXd v = vec_from_json(j, what);
  if (v.size() != n)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(n) +
                      " entries, got " + std::to_string(v.size()));
  return v;
}

const Json& field(const Json& j, const char* key, const char* ctx) {
  if (!j.is_object())
    throw ConfigError(std::string(ctx) + ": expected an object");
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(std::string(ctx) + ": missing \"" + key + "\"");
  return *it;
}

double num_field(const Json& j, const char* key, const char* ctx) {
  const Json& v = field(j, key, ctx);
  if (!v.is_number())
    throw ConfigError(std::string(ctx) + ": \"" + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace

// --- model -------------------------------------------------------------------

Json to_json(const Topology& topo) {
  Json j;
  j["tiers"] = topo.num_tiers;
  j["classes"] = topo.num_classes;
  j["replicas"] = topo.replicas;
  return j;
}

Topology topology_from_json(const Json& j) {
  Topology topo;
  topo.num_tiers = static_cast<int>(num_field(j, "tiers", "topology"));
  topo.num_classes = static_cast<int>(num_field(j, "classes", "topology"));
  const Json& reps = field(j, "replicas", "topology");
  if (!reps.is_array())
    throw ConfigError("topology: \"replicas\" must be an array");
  topo.replicas.clear();
  for (const auto& e : reps) topo.replicas.push_back(e.get<int>());
  topo.validate();
  return topo;
}

Json to_json(const ParamVector& x) {
  Json j;
  j["u0"] = vec_to_json(x.u0);
  j["d"] = vec_to_json(x.d);
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < x.S.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < x.S.cols(); ++k) row.push_back(x.S(i, k));
    rows.push_back(std::move(row));
  }
  j["S"] = std::move(rows);
  return j;
}

ParamVector params_from_json(const Json& j, const Topology& topo) {
  ParamVector x = ParamVector::zeros(topo);
  x.u0 = sized_vec(field(j, "u0", "params"), "params.u0", topo.num_tiers);
  x.d = sized_vec(field(j, "d", "params"), "params.d", topo.num_classes);
  const Json& rows = field(j, "S", "params");
  if (!rows.is_array() ||
      rows.size() != static_cast<size_t>(topo.num_classes))
    throw ConfigError("params.S: expected " +
                      std::to_string(topo.num_classes) + " rows");
  for (int i = 0; i < topo.num_classes; ++i)
    x.S.row(i) = sized_vec(rows[i], "params.S row", topo.num_tiers).transpose();
  x.validate(topo);
  return x;
}

Json to_json(const Observation& obs) {
  Json j;
  j["util"] = vec_to_json(obs.util);
  j["resp"] = vec_to_json(obs.resp);
  return j;
}

// --- samples -----------------------------------------------------------------

Json to_json(const MetricSample& s) {
  Json j;
  j["t"] = s.t;
  j["lambda"] = vec_to_json(s.workload.lambda);
  j["util"] = vec_to_json(s.util);
  Json resp = Json::array();
  for (const auto& r : s.resp) {
    if (r) resp.push_back(*r);
    else resp.push_back(nullptr);
  }
  j["resp"] = std::move(resp);
  return j;
}

MetricSample sample_from_json(const Json& j) {
  MetricSample s;
  s.t = num_field(j, "t", "sample");
  s.workload.lambda = vec_from_json(field(j, "lambda", "sample"), "sample.lambda");
  s.util = vec_from_json(field(j, "util", "sample"), "sample.util");
  const Json& resp = field(j, "resp", "sample");
  if (!resp.is_array()) throw ConfigError("sample.resp: expected an array");
  for (const auto& e : resp) {
    if (e.is_null()) s.resp.push_back(std::nullopt);
    else if (e.is_number()) s.resp.push_back(e.get<double>());
    else throw ConfigError("sample.resp: entries must be numbers or null");
  }
  return s;
}

std::vector<MetricSample> read_metrics_jsonl(std::istream& in) {
  std::vector<MetricSample> samples;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("metrics line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    samples.push_back(sample_from_json(j));
  }
  return samples;
}

void write_metrics_jsonl(std::ostream& out,
                         const std::vector<MetricSample>& samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

// --- scenario and configuration ----------------------------------------------

Json to_json(const Scenario& s) {
  Json j;
  j["topology"] = to_json(s.topo);
  j["truth"] = to_json(s.truth);
  Json sched = Json::array();
  for (const auto& seg : s.schedule) {
    Json e;
    e["start"] = seg.start;
    e["lambda"] = vec_to_json(seg.workload.lambda);
    sched.push_back(std::move(e));
  }
  j["schedule"] = std::move(sched);
  if (!s.truth_changes.empty()) {
    Json changes = Json::array();
    for (const auto& tc : s.truth_changes) {
      Json e;
      e["time"] = tc.time;
      e["truth"] = to_json(tc.truth);
      changes.push_back(std::move(e));
    }
    j["truth_changes"] = std::move(changes);
  }
  j["noise_rel"] = s.noise_rel;
  j["sample_period"] = s.sample_period;
  j["duration"] = s.duration;
  j["seed"] = s.seed;
  return j;
}

Scenario scenario_from_json(const Json& j) {
  Scenario s;
  s.topo = topology_from_json(field(j, "topology", "scenario"));
  s.truth = params_from_json(field(j, "truth", "scenario"), s.topo);
  const Json& sched = field(j, "schedule", "scenario");
  if (!sched.is_array() || sched.empty())
    throw ConfigError("scenario.schedule: expected a non-empty array");
  for (const auto& e : sched) {
    ScheduleSegment seg;
    seg.start = num_field(e, "start", "schedule segment");
    seg.workload.lambda = sized_vec(field(e, "lambda", "schedule segment"),
                                    "segment.lambda", s.topo.num_classes);
    s.schedule.push_back(std::move(seg));
  }
  if (j.contains("truth_changes")) {
    for (const auto& e : j["truth_changes"]) {
      TruthChange tc;
      tc.time = num_field(e, "time", "truth change");
      tc.truth = params_from_json(field(e, "truth", "truth change"), s.topo);
      s.truth_changes.push_back(std::move(tc));
    }
  }
  if (j.contains("noise_rel")) s.noise_rel = j["noise_rel"].get<double>();
  if (j.contains("sample_period"))
    s.sample_period = j["sample_period"].get<double>();
  s.duration = num_field(j, "duration", "scenario");
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  s.validate();
  return s;
}

Json to_json(const SlaSpec& sla) {
  Json j;
  j["r_max"] = vec_to_json(sla.r_max);
  j["u_max"] = sla.u_max;
  return j;
}

SlaSpec sla_from_json(const Json& j, int num_classes) {
  SlaSpec sla;
  sla.r_max = sized_vec(field(j, "r_max", "sla"), "sla.r_max", num_classes);
  if (j.contains("u_max")) sla.u_max = j["u_max"].get<double>();
  sla.validate(num_classes);
  return sla;
}

Json to_json(const ReplicaBounds& bounds) {
  Json j;
  j["min"] = bounds.min_replicas;
  j["max"] = bounds.max_replicas;
  return j;
}

ReplicaBounds bounds_from_json(const Json& j, int num_tiers) {
  ReplicaBounds bounds;
  const Json& lo = field(j, "min", "bounds");
  const Json& hi = field(j, "max", "bounds");
  if (!lo.is_array() || !hi.is_array())
    throw ConfigError("bounds: \"min\" and \"max\" must be arrays");
  for (const auto& e : lo) bounds.min_replicas.push_back(e.get<int>());
  for (const auto& e : hi) bounds.max_replicas.push_back(e.get<int>());
  bounds.validate(num_tiers);
  return bounds;
}

Json to_json(const ScalingPolicy& policy) {
  Json j;
  j["sla"] = to_json(policy.sla);
  j["headroom"] = policy.headroom;
  j["scale_down_util"] = policy.scale_down_util;
  j["cooldown"] = policy.cooldown;
  j["bounds"] = to_json(policy.bounds);
  return j;
}

ScalingPolicy policy_from_json(const Json& j, const Topology& topo) {
  ScalingPolicy policy;
  policy.sla = sla_from_json(field(j, "sla", "policy"), topo.num_classes);
  if (j.contains("headroom")) policy.headroom = j["headroom"].get<double>();
  if (j.contains("scale_down_util"))
    policy.scale_down_util = j["scale_down_util"].get<double>();
  if (j.contains("cooldown")) policy.cooldown = j["cooldown"].get<int>();
  policy.bounds = bounds_from_json(field(j, "bounds", "policy"),
                                   topo.num_tiers);
  policy.validate(topo);
  return policy;
}

NoiseConfig noise_from_json(const Json& j) {
  NoiseConfig noise;
  if (j.contains("q_rel")) noise.q_rel = j["q_rel"].get<double>();
  if (j.contains("r_rel")) noise.r_rel = j["r_rel"].get<double>();
  if (j.contains("q_diag"))
    noise.q_diag = vec_from_json(j["q_diag"], "noise.q_diag");
  if (j.contains("r_diag"))
    noise.r_diag = vec_from_json(j["r_diag"], "noise.r_diag");
  return noise;
}

// --- outputs -------------------------------------------------------------------

Json to_json(const TrackRecord& r) {
  Json j;
  j["t"] = r.t;
  j["x"] = vec_to_json(r.estimate.flat());
  if (r.predicted) j["z_pred"] = vec_to_json(r.predicted->flat());
  else j["z_pred"] = nullptr;
  if (r.skipped || r.diag.innovation.size() == 0)
    j["innov_norm"] = nullptr;
  else
    j["innov_norm"] = r.diag.innovation.norm();
  j["skipped"] = r.skipped;
  return j;
}

Json to_json(const GroundTruthEntry& e) {
  Json j;
  j["t"] = e.t;
  j["truth"] = to_json(e.truth);
  j["util"] = vec_to_json(e.noiseless.util);
  j["resp"] = vec_to_json(e.noiseless.resp);
  return j;
}

void write_truth_jsonl(std::ostream& out, const GroundTruthLog& log) {
  for (const auto& e : log) out << to_json(e).dump() << '\n';
}

Json to_json(const ScalingDirective& d) {
  Json j;
  j["tier"] = d.tier;
  j["action"] = d.action == ScalingAction::Add ? "add" : "remove";
  j["count"] = d.count;
  j["reason"] = d.reason;
  return j;
}

Json to_json(const LoopWindowRecord& r) {
  Json j;
  j["step"] = r.step;
  j["t"] = r.t_end;
  j["replicas"] = r.topology.replicas;
  j["util"] = vec_to_json(r.sample.util);
  Json resp = Json::array();
  for (const auto& v : r.sample.resp) {
    if (v) resp.push_back(*v);
    else resp.push_back(nullptr);
  }
  j["resp"] = std::move(resp);
  j["violated"] = r.violated;
  j["skipped"] = r.skipped;
  Json ds = Json::array();
  for (const auto& d : r.directives) ds.push_back(to_json(d));
  j["directives"] = std::move(ds);
  return j;
}

Json to_json(const CapacityPlan& plan) {
  Json j;
  j["replicas"] = plan.replicas;
  j["feasible"] = plan.feasible;
  if (plan.predicted) j["predicted"] = to_json(*plan.predicted);
  else j["predicted"] = nullptr;
  return j;
}

Json to_json(const ResponseBreakdown& b) {
  Json j;
  j["delay"] = vec_to_json(b.delay);
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < b.residence.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < b.residence.cols(); ++k)
      row.push_back(b.residence(i, k));
    rows.push_back(std::move(row));
  }
  j["residence"] = std::move(rows);
  j["bottleneck"] = b.bottleneck;
  return j;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace tiertrack
