#include "tiertrack/loop.hpp"

namespace tiertrack {

void LoopConfig::validate() const {
  scenario.validate();
  policy.validate(scenario.topo);
  track.noise.validate(scenario.topo);
  if (warmup < 0) throw ConfigError("loop: warmup must be >= 0");
}

namespace {

bool window_violated(const MetricSample& sample, const SlaSpec& sla) {
  for (size_t i = 0; i < sample.resp.size(); ++i)
    if (sample.resp[i] && *sample.resp[i] > sla.r_max(static_cast<int>(i)))
      return true;
  return false;
}

}  // namespace

LoopResult run_autoscale_loop(const LoopConfig& cfg) {
  cfg.validate();

  DesEngine engine(cfg.scenario);
  Tracker tracker(cfg.scenario.topo, cfg.track);
  AutoscalerState as = AutoscalerState::initial(cfg.scenario.topo);

  LoopResult result;
  result.windows.reserve(cfg.scenario.num_samples());

  while (!engine.finished()) {
    WindowStats ws = engine.advance_window();

    LoopWindowRecord rec;
    rec.step = static_cast<int>(as.step);
    rec.t_end = ws.t_end;
    rec.topology = ws.topo;
    rec.sample = ws.sample();

    TrackRecord tr = tracker.step(rec.sample);
    rec.estimate = tr.estimate;
    rec.skipped = tr.skipped;
    rec.violated = window_violated(rec.sample, cfg.policy.sla);
    if (rec.step >= cfg.warmup) {
      ++result.counted_windows;
      if (rec.violated) ++result.violations;
    }

    // Decide for the next window once the estimate has had time to settle.
    if (rec.step >= cfg.warmup && tracker.initialized() && !engine.finished()) {
      const Workload& forecast = cfg.scenario.workload_at(ws.t_end);
      rec.directives = evaluate_policy(as, rec.estimate, rec.sample.workload,
                                       forecast, cfg.policy);
      if (!rec.directives.empty()) {
        const Topology next =
            apply_directives(as.topology, rec.directives, cfg.policy.bounds);
        for (int j = 0; j < next.num_tiers; ++j)
          if (next.replicas[j] != as.topology.replicas[j])
            engine.set_replica_count(j, next.replicas[j]);
        tracker.set_topology(next);
        as.topology = next;
        as.record(rec.directives);
      }
    }
    ++as.step;
    result.windows.push_back(std::move(rec));
  }

  result.final_topology = as.topology;
  return result;
}

LoopResult run_static_loop(const Scenario& scenario, const SlaSpec& sla,
                           int warmup) {
  scenario.validate();
  sla.validate(scenario.topo.num_classes);
  if (warmup < 0) throw ConfigError("loop: warmup must be >= 0");

  DesEngine engine(scenario);
  LoopResult result;
  result.windows.reserve(scenario.num_samples());

  int step = 0;
  while (!engine.finished()) {
    WindowStats ws = engine.advance_window();
    LoopWindowRecord rec;
    rec.step = step;
    rec.t_end = ws.t_end;
    rec.topology = ws.topo;
    rec.sample = ws.sample();
    rec.estimate = scenario.truth_at(ws.t_end);  // no filter in the baseline
    rec.violated = window_violated(rec.sample, sla);
    if (step >= warmup) {
      ++result.counted_windows;
      if (rec.violated) ++result.violations;
    }
    ++step;
    result.windows.push_back(std::move(rec));
  }
  result.final_topology = scenario.topo;
  return result;
}

}  // namespace tiertrack
