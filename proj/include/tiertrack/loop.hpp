#pragma once

#include <vector>

#include "tiertrack/autoscaler.hpp"
#include "tiertrack/ekf.hpp"
#include "tiertrack/sim.hpp"

namespace tiertrack {

// Closed-loop run: the event simulator produces one metrics window per
// sample period, the tracker refines its estimate from it, and (after the
// warmup) the scaling policy may resize tiers for the next window.
struct LoopConfig {
  Scenario scenario;   // scenario.topo is the starting topology
  ScalingPolicy policy;
  TrackConfig track;
  int warmup = 30;     // windows before the policy may act

  void validate() const;
};

struct LoopWindowRecord {
  int step = 0;        // window index, 0-based
  double t_end = 0.0;
  Topology topology;   // replica counts in effect during the window
  MetricSample sample; // measured metrics for the window
  ParamVector estimate;
  bool skipped = false;   // filter skipped the update (saturated prior)
  bool violated = false;  // some measured response exceeded its target
  std::vector<ScalingDirective> directives;  // issued at the window's end
};

struct LoopResult {
  std::vector<LoopWindowRecord> windows;
  Topology final_topology;
  int counted_windows = 0;  // windows at or past the warmup
  int violations = 0;       // violated windows among those
};

LoopResult run_autoscale_loop(const LoopConfig& cfg);

// Same scenario and accounting with the topology pinned: the baseline a
// closed loop is judged against.
LoopResult run_static_loop(const Scenario& scenario, const SlaSpec& sla,
                           int warmup);

}  // namespace tiertrack
