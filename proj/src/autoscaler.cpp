#include "tiertrack/autoscaler.hpp"

#include <algorithm>
#include <limits>
#include <optional>

namespace tiertrack {

void ScalingPolicy::validate(const Topology& topo) const {
  sla.validate(topo.num_classes);
  bounds.validate(topo.num_tiers);
  if (!(headroom >= 0.0)) throw ConfigError("policy: headroom must be >= 0");
  if (!(scale_down_util > 0.0 && scale_down_util < 1.0))
    throw ConfigError("policy: scale_down_util must lie in (0, 1)");
  if (cooldown < 0) throw ConfigError("policy: cooldown must be >= 0");
  for (int j = 0; j < topo.num_tiers; ++j)
    if (topo.replicas[j] < bounds.min_replicas[j] ||
        topo.replicas[j] > bounds.max_replicas[j])
      throw ConfigError("policy: current topology outside bounds at tier " +
                        std::to_string(j));
}

AutoscalerState AutoscalerState::initial(const Topology& topo) {
  AutoscalerState as;
  as.topology = topo;
  as.last_action_step.assign(topo.num_tiers,
                             std::numeric_limits<long>::min() / 2);
  return as;
}

bool AutoscalerState::eligible(int tier, int cooldown) const {
  return step - last_action_step[tier] > cooldown;
}

void AutoscalerState::record(const std::vector<ScalingDirective>& ds) {
  for (const auto& d : ds) last_action_step[d.tier] = step;
}

namespace {

std::optional<Observation> try_observe(const ParamVector& x, const Workload& w,
                                       const Topology& topo) {
  try {
    return evaluate_observation(x, w, topo);
  } catch (const SaturationError&) {
    return std::nullopt;
  }
}

std::vector<ScalingDirective> scale_up(const AutoscalerState& as,
                                       const ParamVector& xhat,
                                       const Workload& forecast_w,
                                       const ScalingPolicy& policy,
                                       const std::string& trigger) {
  std::vector<ScalingDirective> out;
  const CapacityPlan plan =
      plan_capacity(xhat, forecast_w, policy.sla, policy.bounds);
  const std::vector<int>& target =
      plan.feasible ? plan.replicas : policy.bounds.max_replicas;
  const char* why = plan.feasible ? "toward capacity plan"
                                  : "sla unattainable within bounds, scaling "
                                    "to max";
  for (int j = 0; j < as.topology.num_tiers; ++j) {
    const int delta = target[j] - as.topology.replicas[j];
    if (delta > 0 && as.eligible(j, policy.cooldown))
      out.push_back({j, ScalingAction::Add, delta, trigger + "; " + why});
  }
  return out;
}

}  // namespace

std::vector<ScalingDirective> evaluate_policy(const AutoscalerState& as,
                                              const ParamVector& xhat,
                                              const Workload& w,
                                              const Workload& forecast_w,
                                              const ScalingPolicy& policy) {
  const Topology& topo = as.topology;
  policy.validate(topo);
  w.validate(topo);
  forecast_w.validate(topo);

  const auto predicted = try_observe(xhat, forecast_w, topo);
  if (!predicted)
    return scale_up(as, xhat, forecast_w, policy,
                    "forecast saturates current topology");

  const Eigen::ArrayXd ceiling = (1.0 + policy.headroom) * policy.sla.r_max.array();
  for (int i = 0; i < topo.num_classes; ++i)
    if (predicted->resp(i) > ceiling(i))
      return scale_up(as, xhat, forecast_w, policy,
                      "class " + std::to_string(i) +
                          " predicted response over ceiling");

  // Scale-down only from a comfortable position: every class inside the
  // headroom band.
  const Eigen::ArrayXd floor_band =
      (1.0 - std::min(policy.headroom, 1.0)) * policy.sla.r_max.array();
  if (!(predicted->resp.array() <= floor_band).all()) return {};

  int pick = -1;
  for (int j = 0; j < topo.num_tiers; ++j) {
    if (predicted->util(j) >= policy.scale_down_util) continue;
    if (topo.replicas[j] <= policy.bounds.min_replicas[j]) continue;
    if (!as.eligible(j, policy.cooldown)) continue;
    if (pick < 0 || predicted->util(j) < predicted->util(pick)) pick = j;
  }
  if (pick < 0) return {};

  Topology shrunk = topo;
  --shrunk.replicas[pick];
  const auto after = try_observe(xhat, forecast_w, shrunk);
  if (!after || !sla_met(*after, policy.sla)) return {};
  return {{pick, ScalingAction::Remove, 1,
           "tier " + std::to_string(pick) + " utilization below scale-down "
           "floor; sla holds after removal"}};
}

Topology apply_directives(const Topology& topo,
                          const std::vector<ScalingDirective>& ds,
                          const ReplicaBounds& bounds) {
  topo.validate();
  bounds.validate(topo.num_tiers);
  Topology out = topo;
  for (const auto& d : ds) {
    if (d.tier < 0 || d.tier >= topo.num_tiers)
      throw BoundsError(d.tier, "directive: unknown tier " +
                                    std::to_string(d.tier));
    if (d.count < 1)
      throw BoundsError(d.tier, "directive: count must be >= 1");
    const int delta = d.action == ScalingAction::Add ? d.count : -d.count;
    const int next = out.replicas[d.tier] + delta;
    if (next < bounds.min_replicas[d.tier] ||
        next > bounds.max_replicas[d.tier])
      throw BoundsError(
          d.tier, "directive " + std::string(d.action == ScalingAction::Add
                                                 ? "add"
                                                 : "remove") +
                      " x" + std::to_string(d.count) + " on tier " +
                      std::to_string(d.tier) + " leaves bounds [" +
                      std::to_string(bounds.min_replicas[d.tier]) + ", " +
                      std::to_string(bounds.max_replicas[d.tier]) + "]");
    out.replicas[d.tier] = next;
  }
  return out;
}

}  // namespace tiertrack
