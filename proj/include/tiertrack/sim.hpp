#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "tiertrack/ekf.hpp"
#include "tiertrack/model.hpp"

namespace tiertrack {

struct ScheduleSegment {
  double start = 0.0;
  Workload workload;
};

struct TruthChange {
  double time = 0.0;
  ParamVector truth;
};

// Ground-truth generator setup: topology, hidden parameters, a piecewise-
// constant workload schedule and optional parameter step changes. All
// randomness flows from the seed.
struct Scenario {
  Topology topo;
  ParamVector truth;
  std::vector<ScheduleSegment> schedule;
  std::vector<TruthChange> truth_changes;
  double noise_rel = 0.01;
  double sample_period = 1.0;
  double duration = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  const Workload& workload_at(double t) const;
  const ParamVector& truth_at(double t) const;
  int num_samples() const;
};

struct GroundTruthEntry {
  double t = 0.0;
  ParamVector truth;       // at the sample window start
  Observation noiseless;   // closed-form observation at that truth/workload
};

// Aligned 1:1 with the emitted MetricSample stream.
using GroundTruthLog = std::vector<GroundTruthEntry>;

// Closed-form generator: z = h(truth; lambda) with multiplicative Gaussian
// noise of relative std noise_rel, utilizations clipped to [0, 0.999].
// Rejects the scenario up front (SaturationError-derived ConfigError naming
// the offending segment) if any segment saturates.
std::pair<std::vector<MetricSample>, GroundTruthLog> generate_analytic(
    const Scenario& s);

// Event-driven simulation of the open network: Poisson arrivals per class,
// tiers visited in sequence, FCFS single servers with exponential service
// joined by shortest-queue dispatch, class delay added as a pure time shift.
// Background utilization runs as an explicit background job stream per tier.
// Same up-front feasibility rejection as generate_analytic.
std::pair<std::vector<MetricSample>, GroundTruthLog> run_des(const Scenario& s);

// Per-window measurements from the event simulator.
struct WindowStats {
  double t_end = 0.0;
  Workload workload;                        // lambda at the window start
  Eigen::VectorXd util;                     // busy fraction per tier, [0, 1]
  std::vector<std::optional<double>> resp;  // per class, null when no
                                            // completions in the window
  ParamVector truth;                        // truth at the window start
  std::optional<Observation> noiseless;     // absent when the model saturates
  Topology topo;                            // replica counts at window start

  MetricSample sample() const;
};

// Stepwise simulator used by run_des and the closed autoscaling loop.
// Replica counts may change between windows; removed servers drain their
// current job while their queues redistribute immediately.
class DesEngine {
 public:
  explicit DesEngine(const Scenario& s);
  ~DesEngine();
  DesEngine(DesEngine&&) noexcept;
  DesEngine& operator=(DesEngine&&) noexcept;

  WindowStats advance_window();
  bool finished() const;
  double now() const;
  const Topology& topology() const;
  void set_replica_count(int tier, int count);

  long arrivals(int cls) const;
  long completions(int cls) const;
  // Structural count of jobs currently queued or in service.
  long in_flight(int cls) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tiertrack
