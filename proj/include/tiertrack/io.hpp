#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tiertrack/autoscaler.hpp"
#include "tiertrack/ekf.hpp"
#include "tiertrack/loop.hpp"
#include "tiertrack/planner.hpp"
#include "tiertrack/sim.hpp"

namespace tiertrack {

// Insertion-ordered JSON keeps emitted files reproducible byte for byte.
using Json = nlohmann::ordered_json;

// --- model ------------------------------------------------------------------

Json to_json(const Topology& topo);
Topology topology_from_json(const Json& j);

Json to_json(const ParamVector& x);
ParamVector params_from_json(const Json& j, const Topology& topo);

Json to_json(const Observation& obs);

// --- samples ----------------------------------------------------------------

Json to_json(const MetricSample& s);
MetricSample sample_from_json(const Json& j);

// One JSON object per line; blank lines are skipped.
std::vector<MetricSample> read_metrics_jsonl(std::istream& in);
void write_metrics_jsonl(std::ostream& out,
                         const std::vector<MetricSample>& samples);

// --- scenario and configuration ---------------------------------------------

Json to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);

Json to_json(const SlaSpec& sla);
SlaSpec sla_from_json(const Json& j, int num_classes);

Json to_json(const ReplicaBounds& bounds);
ReplicaBounds bounds_from_json(const Json& j, int num_tiers);

Json to_json(const ScalingPolicy& policy);
ScalingPolicy policy_from_json(const Json& j, const Topology& topo);

NoiseConfig noise_from_json(const Json& j);

// --- outputs ----------------------------------------------------------------

Json to_json(const TrackRecord& r);
Json to_json(const GroundTruthEntry& e);
void write_truth_jsonl(std::ostream& out, const GroundTruthLog& log);

Json to_json(const ScalingDirective& d);
Json to_json(const LoopWindowRecord& r);

Json to_json(const CapacityPlan& plan);
Json to_json(const ResponseBreakdown& b);

// Parses one JSON document from a file, with the file name in error text.
Json load_json_file(const std::string& path);

}  // namespace tiertrack
