#pragma once

#include <string>
#include <vector>

#include "tiertrack/model.hpp"
#include "tiertrack/planner.hpp"

namespace tiertrack {

struct ScalingPolicy {
  SlaSpec sla;
  double headroom = 0.1;        // scale up once R exceeds (1+headroom)*r_max
  double scale_down_util = 0.3; // tiers below this are shrink candidates
  int cooldown = 0;             // evaluation periods between directives per tier
  ReplicaBounds bounds;

  void validate(const Topology& topo) const;
};

enum class ScalingAction { Add, Remove };

struct ScalingDirective {
  int tier = 0;
  ScalingAction action = ScalingAction::Add;
  int count = 1;
  std::string reason;
};

struct AutoscalerState {
  Topology topology;
  std::vector<long> last_action_step;  // per tier; start far in the past
  long step = 0;

  static AutoscalerState initial(const Topology& topo);
  // True when the cooldown window for a tier has elapsed.
  bool eligible(int tier, int cooldown) const;
  // Stamps the directives' tiers with the current step.
  void record(const std::vector<ScalingDirective>& ds);
};

// One policy evaluation. Scale-up: a class predicted over (1+headroom)*r_max
// at the forecast workload triggers add directives toward the capacity plan
// (best-effort scale-to-max when no plan within bounds is feasible).
// Scale-down: with every class inside the headroom band, the least-utilized
// tier below scale_down_util loses one replica, gated on the post-removal
// prediction still meeting the SLA. Cooldown suppresses per-tier directives.
std::vector<ScalingDirective> evaluate_policy(const AutoscalerState& as,
                                              const ParamVector& xhat,
                                              const Workload& w,
                                              const Workload& forecast_w,
                                              const ScalingPolicy& policy);

// Applies add/remove directives to replica counts. Order-independent for
// directives on distinct tiers. Throws BoundsError naming the directive that
// would leave the configured bounds.
Topology apply_directives(const Topology& topo,
                          const std::vector<ScalingDirective>& ds,
                          const ReplicaBounds& bounds);

}  // namespace tiertrack
