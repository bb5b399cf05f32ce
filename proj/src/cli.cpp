#include "tiertrack/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tiertrack/io.hpp"

namespace tiertrack {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

void emit(const Json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Workload workload_from_flags(const std::vector<double>& lambda,
                             const Topology& topo) {
  Workload w;
  w.lambda = Eigen::Map<const Eigen::VectorXd>(
      lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  w.validate(topo);
  return w;
}

struct SimulateArgs {
  std::string scenario_path, metrics_path, truth_path;
  bool use_des = false;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  Json sj = load_json_file(a.scenario_path);
  Scenario s = scenario_from_json(sj);
  if (a.seed) s.seed = *a.seed;
  auto [samples, truth] = a.use_des ? run_des(s) : generate_analytic(s);
  auto metrics_out = open_out(a.metrics_path);
  write_metrics_jsonl(metrics_out, samples);
  auto truth_out = open_out(a.truth_path);
  write_truth_jsonl(truth_out, truth);
  return kExitOk;
}

struct FilterFlags {
  std::string x0_path;
  double p0_scale = 1.0;
  double q_rel = 0.01;
  double r_rel = 0.05;

  TrackConfig config(const Topology& topo) const {
    TrackConfig cfg;
    cfg.p0_scale = p0_scale;
    cfg.noise.q_rel = q_rel;
    cfg.noise.r_rel = r_rel;
    if (!x0_path.empty())
      cfg.x0 = params_from_json(load_json_file(x0_path), topo);
    return cfg;
  }
};

struct TrackArgs {
  std::string topology_path, metrics_path, out_path;
  FilterFlags filter;
};

int run_track(const TrackArgs& a) {
  Topology topo = topology_from_json(load_json_file(a.topology_path));
  std::ifstream in(a.metrics_path);
  if (!in) throw ConfigError("cannot open " + a.metrics_path);
  std::vector<MetricSample> samples = read_metrics_jsonl(in);
  std::vector<TrackRecord> records = track(samples, topo, a.filter.config(topo));
  auto out = open_out(a.out_path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  return kExitOk;
}

struct QueryArgs {
  std::string topology_path, estimate_path, out_path;
  std::vector<double> lambda;
  std::vector<int> replicas;  // optional override
};

Topology query_topology(const QueryArgs& a) {
  Topology topo = topology_from_json(load_json_file(a.topology_path));
  if (!a.replicas.empty()) {
    topo.replicas = a.replicas;
    topo.validate();
  }
  return topo;
}

int run_whatif(const QueryArgs& a) {
  Topology topo = query_topology(a);
  ParamVector x = params_from_json(load_json_file(a.estimate_path), topo);
  Observation obs =
      whatif_response(x, workload_from_flags(a.lambda, topo), topo);
  emit(to_json(obs), a.out_path);
  return kExitOk;
}

int run_breakdown(const QueryArgs& a) {
  Topology topo = query_topology(a);
  ParamVector x = params_from_json(load_json_file(a.estimate_path), topo);
  ResponseBreakdown b =
      response_breakdown(x, workload_from_flags(a.lambda, topo), topo);
  emit(to_json(b), a.out_path);
  return kExitOk;
}

struct PlanArgs {
  QueryArgs query;
  std::string sla_path;
  std::vector<int> min_replicas, max_replicas;
};

int run_plan(const PlanArgs& a) {
  Topology topo = topology_from_json(load_json_file(a.query.topology_path));
  ParamVector x =
      params_from_json(load_json_file(a.query.estimate_path), topo);
  SlaSpec sla =
      sla_from_json(load_json_file(a.sla_path), topo.num_classes);
  ReplicaBounds bounds;
  bounds.min_replicas = a.min_replicas.empty()
                            ? std::vector<int>(topo.num_tiers, 1)
                            : a.min_replicas;
  bounds.max_replicas = a.max_replicas.empty()
                            ? std::vector<int>(topo.num_tiers, 8)
                            : a.max_replicas;
  bounds.validate(topo.num_tiers);
  CapacityPlan plan = plan_capacity(
      x, workload_from_flags(a.query.lambda, topo), sla, bounds);
  emit(to_json(plan), a.query.out_path);
  return plan.feasible ? kExitOk : kExitData;
}

struct AutoscaleArgs {
  std::string scenario_path, policy_path;
  std::string windows_path, directives_path, out_path;
  FilterFlags filter;
  int warmup = 30;
  std::optional<std::uint64_t> seed;
};

int run_autoscale(const AutoscaleArgs& a) {
  LoopConfig cfg;
  cfg.scenario = scenario_from_json(load_json_file(a.scenario_path));
  if (a.seed) cfg.scenario.seed = *a.seed;
  cfg.policy =
      policy_from_json(load_json_file(a.policy_path), cfg.scenario.topo);
  cfg.track = a.filter.config(cfg.scenario.topo);
  cfg.warmup = a.warmup;

  LoopResult result = run_autoscale_loop(cfg);

  if (!a.windows_path.empty()) {
    auto out = open_out(a.windows_path);
    for (const auto& w : result.windows) out << to_json(w).dump() << '\n';
  }
  if (!a.directives_path.empty()) {
    auto out = open_out(a.directives_path);
    for (const auto& w : result.windows)
      for (const auto& d : w.directives) {
        Json j;
        j["step"] = w.step;
        j["t"] = w.t_end;
        j["tier"] = d.tier;
        j["action"] = d.action == ScalingAction::Add ? "add" : "remove";
        j["count"] = d.count;
        j["reason"] = d.reason;
        out << j.dump() << '\n';
      }
  }

  Json summary;
  summary["windows"] = result.counted_windows;
  summary["violations"] = result.violations;
  summary["violation_fraction"] =
      result.counted_windows > 0
          ? static_cast<double>(result.violations) / result.counted_windows
          : 0.0;
  summary["final_replicas"] = result.final_topology.replicas;
  summary["final_window_violated"] =
      result.windows.empty() ? false : result.windows.back().violated;
  emit(summary, a.out_path);
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Queueing-model performance tracker and autoscaler"};
  app.name("tiertrack");
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand(
      "simulate", "Generate a metrics stream from a scenario");
  simulate->add_option("--scenario", sim.scenario_path, "Scenario JSON")
      ->required();
  simulate->add_option("--out-metrics", sim.metrics_path, "Metrics JSONL out")
      ->required();
  simulate->add_option("--out-truth", sim.truth_path, "Ground-truth JSONL out")
      ->required();
  simulate->add_flag("--des", sim.use_des,
                     "Event simulation instead of the analytic generator");
  std::uint64_t sim_seed = 0;
  auto* sim_seed_opt =
      simulate->add_option("--seed", sim_seed, "Override the scenario seed");

  TrackArgs trk;
  auto* track_cmd = app.add_subcommand(
      "track", "Estimate hidden parameters from a metrics stream");
  track_cmd->add_option("--topology", trk.topology_path, "Topology JSON")
      ->required();
  track_cmd->add_option("--metrics", trk.metrics_path, "Metrics JSONL in")
      ->required();
  track_cmd->add_option("--out", trk.out_path, "Estimates JSONL out")
      ->required();
  auto add_filter_flags = [](CLI::App* cmd, FilterFlags& f) {
    cmd->add_option("--x0", f.x0_path, "Initial state JSON (default: bootstrap)");
    cmd->add_option("--p0-scale", f.p0_scale, "Initial covariance scale");
    cmd->add_option("--q-rel", f.q_rel, "Relative process noise");
    cmd->add_option("--r-rel", f.r_rel, "Relative measurement noise");
  };
  add_filter_flags(track_cmd, trk.filter);

  QueryArgs whatif_args;
  auto* whatif_cmd = app.add_subcommand(
      "whatif", "Predict utilization and response for a workload");
  auto add_query_flags = [](CLI::App* cmd, QueryArgs& q, bool replicas) {
    cmd->add_option("--topology", q.topology_path, "Topology JSON")->required();
    cmd->add_option("--estimate", q.estimate_path, "Parameter snapshot JSON")
        ->required();
    cmd->add_option("--lambda", q.lambda, "Per-class arrival rates")
        ->required()
        ->delimiter(',');
    if (replicas)
      cmd->add_option("--replicas", q.replicas, "Replica count override")
          ->delimiter(',');
    cmd->add_option("--out", q.out_path, "Output JSON (default: stdout)");
  };
  add_query_flags(whatif_cmd, whatif_args, true);

  QueryArgs breakdown_args;
  auto* breakdown_cmd = app.add_subcommand(
      "breakdown", "Per-class decomposition into delay and tier residence");
  add_query_flags(breakdown_cmd, breakdown_args, true);

  PlanArgs plan_args;
  auto* plan_cmd = app.add_subcommand(
      "plan", "Minimal replica counts meeting an SLA");
  add_query_flags(plan_cmd, plan_args.query, false);
  plan_cmd->add_option("--sla", plan_args.sla_path, "SLA JSON")->required();
  plan_cmd->add_option("--min-replicas", plan_args.min_replicas,
                       "Per-tier lower bounds (default: 1)")
      ->delimiter(',');
  plan_cmd->add_option("--max-replicas", plan_args.max_replicas,
                       "Per-tier upper bounds (default: 8)")
      ->delimiter(',');

  AutoscaleArgs loop_args;
  auto* autoscale_cmd = app.add_subcommand(
      "autoscale", "Closed loop: simulate, track, and rescale");
  autoscale_cmd
      ->add_option("--scenario", loop_args.scenario_path, "Scenario JSON")
      ->required();
  autoscale_cmd->add_option("--policy", loop_args.policy_path, "Policy JSON")
      ->required();
  autoscale_cmd->add_option("--out-windows", loop_args.windows_path,
                            "Per-window JSONL out");
  autoscale_cmd->add_option("--out-directives", loop_args.directives_path,
                            "Directive JSONL out");
  autoscale_cmd->add_option("--out", loop_args.out_path,
                            "Summary JSON (default: stdout)");
  autoscale_cmd->add_option("--warmup", loop_args.warmup,
                            "Windows before the policy may act");
  std::uint64_t loop_seed = 0;
  auto* loop_seed_opt = autoscale_cmd->add_option(
      "--seed", loop_seed, "Override the scenario seed");
  add_filter_flags(autoscale_cmd, loop_args.filter);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (sim_seed_opt->count() > 0) sim.seed = sim_seed;
  if (loop_seed_opt->count() > 0) loop_args.seed = loop_seed;

  try {
    if (simulate->parsed()) return run_simulate(sim);
    if (track_cmd->parsed()) return run_track(trk);
    if (whatif_cmd->parsed()) return run_whatif(whatif_args);
    if (breakdown_cmd->parsed()) return run_breakdown(breakdown_args);
    if (plan_cmd->parsed()) return run_plan(plan_args);
    if (autoscale_cmd->parsed()) return run_autoscale(loop_args);
  } catch (const SaturationError& e) {
    Json err;
    err["error"] = "saturation";
    err["tier"] = e.tier();
    err["utilization"] = e.utilization();
    std::cerr << err.dump() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    Json err;
    err["error"] = "invalid";
    err["detail"] = e.what();
    std::cerr << err.dump() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? argc - 1 : 0);
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return dispatch(args);
}

}  // namespace tiertrack
