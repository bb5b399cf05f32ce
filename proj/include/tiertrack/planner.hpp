#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "tiertrack/model.hpp"

namespace tiertrack {

// Per-class response-time ceilings plus a utilization ceiling that keeps
// plans off the saturation boundary.
struct SlaSpec {
  Eigen::VectorXd r_max;  // C, seconds, > 0
  double u_max = 0.95;

  void validate(int num_classes) const;
};

// Per-tier replica search space.
struct ReplicaBounds {
  std::vector<int> min_replicas;
  std::vector<int> max_replicas;

  void validate(int num_tiers) const;
};

struct CapacityPlan {
  std::vector<int> replicas;
  // Observation at the planned topology; absent when even the fallback
  // topology saturates.
  std::optional<Observation> predicted;
  bool feasible = false;
};

// True iff every class meets its response ceiling and every tier is at or
// below u_max.
bool sla_met(const Observation& obs, const SlaSpec& sla);

// Stable what-if entry point: identical to evaluate_observation, so queries
// over modified lambda, S or replicas are first-class.
Observation whatif_response(const ParamVector& x, const Workload& w,
                            const Topology& topo);

// Minimum-total-replica plan meeting the SLA and u_max, ties broken by the
// lexicographically smallest vector. Exhaustive over the bounded lattice up
// to 1e6 points, greedy highest-utilization ascent beyond that. Infeasibility
// is a result, not an exception.
CapacityPlan plan_capacity(const ParamVector& x, const Workload& w,
                           const SlaSpec& sla, const ReplicaBounds& bounds);

// Largest load scale alpha (within 1e-4 relative) such that the model at
// alpha*direction is feasible and meets the SLA. Returns 0 when even zero
// load violates the SLA and +infinity when the direction drives no tier
// traffic while the SLA holds. Throws ConfigError on a zero direction.
double max_supported_load(const ParamVector& x, const Topology& topo,
                          const SlaSpec& sla, const Workload& direction);

}  // namespace tiertrack
