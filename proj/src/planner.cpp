#include "tiertrack/planner.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tiertrack {

void SlaSpec::validate(int num_classes) const {
  if (r_max.size() != num_classes)
    throw ConfigError("sla: r_max size != num_classes");
  if (!r_max.allFinite() || !(r_max.array() > 0.0).all())
    throw ConfigError("sla: r_max entries must be finite and > 0");
  if (!(u_max > 0.0 && u_max < 1.0))
    throw ConfigError("sla: u_max must lie in (0, 1)");
}

void ReplicaBounds::validate(int num_tiers) const {
  if (static_cast<int>(min_replicas.size()) != num_tiers ||
      static_cast<int>(max_replicas.size()) != num_tiers)
    throw ConfigError("bounds: per-tier min/max sizes must equal num_tiers");
  for (int j = 0; j < num_tiers; ++j) {
    if (min_replicas[j] < 1)
      throw ConfigError("bounds: min replicas must be >= 1");
    if (max_replicas[j] < min_replicas[j])
      throw ConfigError("bounds: max replicas below min at tier " +
                        std::to_string(j));
  }
}

bool sla_met(const Observation& obs, const SlaSpec& sla) {
  if ((obs.util.array() > sla.u_max).any()) return false;
  return (obs.resp.array() <= sla.r_max.array()).all();
}

Observation whatif_response(const ParamVector& x, const Workload& w,
                            const Topology& topo) {
  return evaluate_observation(x, w, topo);
}

namespace {

// Feasible here means: below saturation and meeting SLA + u_max.
std::optional<Observation> try_observe(const ParamVector& x, const Workload& w,
                                       const Topology& topo) {
  try {
    return evaluate_observation(x, w, topo);
  } catch (const SaturationError&) {
    return std::nullopt;
  }
}

CapacityPlan exhaustive_plan(const ParamVector& x, const Workload& w,
                             const SlaSpec& sla, const ReplicaBounds& bounds,
                             Topology topo) {
  const int m = topo.num_tiers;
  std::vector<int> current = bounds.min_replicas;
  std::optional<std::vector<int>> best;
  long best_total = std::numeric_limits<long>::max();
  std::optional<Observation> best_obs;

  // Lexicographic sweep of the lattice; ties on total resolve to the first
  // (lexicographically smallest) vector seen.
  bool done = false;
  while (!done) {
    const long total = std::accumulate(current.begin(), current.end(), 0L);
    if (total < best_total) {
      topo.replicas = current;
      if (auto obs = try_observe(x, w, topo); obs && sla_met(*obs, sla)) {
        best = current;
        best_total = total;
        best_obs = std::move(obs);
      }
    }
    for (int j = m - 1;; --j) {
      if (j < 0) {
        done = true;
        break;
      }
      if (++current[j] <= bounds.max_replicas[j]) break;
      current[j] = bounds.min_replicas[j];
    }
  }

  CapacityPlan plan;
  if (best) {
    plan.replicas = *best;
    plan.predicted = std::move(best_obs);
    plan.feasible = true;
  } else {
    plan.replicas = bounds.max_replicas;
    topo.replicas = plan.replicas;
    plan.predicted = try_observe(x, w, topo);
    plan.feasible = false;
  }
  return plan;
}

CapacityPlan greedy_plan(const ParamVector& x, const Workload& w,
                         const SlaSpec& sla, const ReplicaBounds& bounds,
                         Topology topo) {
  topo.replicas = bounds.min_replicas;
  for (;;) {
    if (auto obs = try_observe(x, w, topo); obs && sla_met(*obs, sla)) {
      CapacityPlan plan;
      plan.replicas = topo.replicas;
      plan.predicted = std::move(obs);
      plan.feasible = true;
      return plan;
    }
    // Add a replica to the hottest tier that still has room.
    const Eigen::VectorXd u = tier_utilizations(x, w, topo);
    int pick = -1;
    for (int j = 0; j < topo.num_tiers; ++j) {
      if (topo.replicas[j] >= bounds.max_replicas[j]) continue;
      if (pick < 0 || u(j) > u(pick)) pick = j;
    }
    if (pick < 0) break;  // everything at max and still violating
    ++topo.replicas[pick];
  }
  CapacityPlan plan;
  plan.replicas = bounds.max_replicas;
  topo.replicas = plan.replicas;
  plan.predicted = try_observe(x, w, topo);
  plan.feasible = false;
  return plan;
}

}  // namespace

CapacityPlan plan_capacity(const ParamVector& x, const Workload& w,
                           const SlaSpec& sla, const ReplicaBounds& bounds) {
  const int m = static_cast<int>(x.u0.size());
  Topology topo{m, static_cast<int>(x.d.size()),
                std::vector<int>(static_cast<size_t>(m), 1)};
  topo.validate();
  x.validate(topo);
  w.validate(topo);
  sla.validate(topo.num_classes);
  bounds.validate(m);

  double lattice = 1.0;
  for (int j = 0; j < m; ++j)
    lattice *= bounds.max_replicas[j] - bounds.min_replicas[j] + 1;
  if (lattice <= 1e6) return exhaustive_plan(x, w, sla, bounds, topo);
  return greedy_plan(x, w, sla, bounds, topo);
}

double max_supported_load(const ParamVector& x, const Topology& topo,
                          const SlaSpec& sla, const Workload& direction) {
  topo.validate();
  x.validate(topo);
  direction.validate(topo);
  sla.validate(topo.num_classes);
  if (!(direction.lambda.array() > 0.0).any())
    throw ConfigError("max load: direction must have a positive entry");

  auto ok = [&](double alpha) {
    Workload w{(alpha * direction.lambda.array()).matrix()};
    auto obs = try_observe(x, w, topo);
    return obs && sla_met(*obs, sla);
  };

  if (!ok(0.0)) return 0.0;

  // Utilization is affine in alpha; the u_max ceiling gives the bisection's
  // upper bound. No tier traffic means R is constant in alpha.
  double hi = std::numeric_limits<double>::infinity();
  for (int j = 0; j < topo.num_tiers; ++j) {
    double slope = 0.0;
    for (int i = 0; i < topo.num_classes; ++i)
      slope += direction.lambda(i) * x.S(i, j);
    slope /= topo.replicas[j];
    if (slope > 0.0) hi = std::min(hi, (sla.u_max - x.u0(j)) / slope);
  }
  if (std::isinf(hi)) return hi;
  if (ok(hi)) return hi;

  double lo = 0.0;
  while (hi - lo > 1e-4 * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace tiertrack
