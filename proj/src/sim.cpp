#include "tiertrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <random>
#include <string>

namespace tiertrack {

void Scenario::validate() const {
  topo.validate();
  truth.validate(topo);
  if (schedule.empty()) throw ConfigError("scenario: schedule must be non-empty");
  if (schedule.front().start != 0.0)
    throw ConfigError("scenario: schedule must start at time 0");
  for (size_t k = 0; k < schedule.size(); ++k) {
    schedule[k].workload.validate(topo);
    if (k > 0 && !(schedule[k].start > schedule[k - 1].start))
      throw ConfigError("scenario: schedule times must be strictly increasing");
  }
  for (size_t k = 0; k < truth_changes.size(); ++k) {
    truth_changes[k].truth.validate(topo);
    if (!(truth_changes[k].time > 0.0))
      throw ConfigError("scenario: truth change times must be > 0");
    if (k > 0 && !(truth_changes[k].time > truth_changes[k - 1].time))
      throw ConfigError("scenario: truth change times must be strictly "
                        "increasing");
  }
  if (!(duration > 0.0)) throw ConfigError("scenario: duration must be > 0");
  if (!(sample_period > 0.0))
    throw ConfigError("scenario: sample_period must be > 0");
  if (!(noise_rel >= 0.0)) throw ConfigError("scenario: noise_rel must be >= 0");
}

const Workload& Scenario::workload_at(double t) const {
  size_t k = 0;
  while (k + 1 < schedule.size() && schedule[k + 1].start <= t) ++k;
  return schedule[k].workload;
}

const ParamVector& Scenario::truth_at(double t) const {
  const ParamVector* current = &truth;
  for (const auto& tc : truth_changes) {
    if (tc.time <= t) current = &tc.truth;
    else break;
  }
  return *current;
}

int Scenario::num_samples() const {
  return static_cast<int>(std::floor(duration / sample_period + 1e-9));
}

namespace {

// Saturation at any (segment, truth interval) combination rejects the
// scenario before anything is generated.
void reject_if_saturated(const Scenario& s) {
  for (size_t seg = 0; seg < s.schedule.size(); ++seg) {
    std::vector<double> probes{s.schedule[seg].start};
    for (const auto& tc : s.truth_changes) probes.push_back(tc.time);
    for (double t : probes) {
      if (t < s.schedule[seg].start || t >= s.duration) continue;
      if (seg + 1 < s.schedule.size() && t >= s.schedule[seg + 1].start)
        continue;
      try {
        evaluate_observation(s.truth_at(t), s.schedule[seg].workload, s.topo);
      } catch (const SaturationError& e) {
        throw ConfigError("scenario: segment " + std::to_string(seg) +
                          " (start " + std::to_string(s.schedule[seg].start) +
                          ") saturates tier " + std::to_string(e.tier()));
      }
    }
  }
}

double positive_floor(double v) { return std::max(v, 1e-12); }

}  // namespace

std::pair<std::vector<MetricSample>, GroundTruthLog> generate_analytic(
    const Scenario& s) {
  s.validate();
  reject_if_saturated(s);

  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int n = s.num_samples();
  std::vector<MetricSample> samples;
  GroundTruthLog log;
  samples.reserve(n);
  log.reserve(n);

  for (int k = 0; k < n; ++k) {
    const double start = k * s.sample_period;
    const double end = (k + 1) * s.sample_period;
    const Workload& w = s.workload_at(start);
    const ParamVector& truth = s.truth_at(start);
    const Observation clean = evaluate_observation(truth, w, s.topo);

    MetricSample sample;
    sample.t = end;
    sample.workload = w;
    sample.util = Eigen::VectorXd(s.topo.num_tiers);
    sample.resp.resize(s.topo.num_classes);
    for (int j = 0; j < s.topo.num_tiers; ++j) {
      const double v = clean.util(j) * (1.0 + s.noise_rel * gauss(rng));
      sample.util(j) = std::clamp(v, 0.0, 0.999);
    }
    for (int i = 0; i < s.topo.num_classes; ++i) {
      const double v = clean.resp(i) * (1.0 + s.noise_rel * gauss(rng));
      sample.resp[i] = positive_floor(v);
    }
    samples.push_back(std::move(sample));
    log.push_back({end, truth, clean});
  }
  return {std::move(samples), std::move(log)};
}

MetricSample WindowStats::sample() const {
  MetricSample s;
  s.t = t_end;
  s.workload = workload;
  s.util = util;
  s.resp = resp;
  return s;
}

// ---------------------------------------------------------------------------
// Event simulator
// ---------------------------------------------------------------------------

namespace {

constexpr int kBackgroundClass = -1;

struct Job {
  int cls = 0;                 // kBackgroundClass for background work
  double arrival = 0.0;        // external arrival time
  double delay_snapshot = 0.0; // d_i at arrival
  int tier = 0;
};

struct Event {
  double time = 0.0;
  long seq = 0;
  enum Kind { ClassArrival, BgArrival, Completion, SegmentChange } kind;
  int a = 0;  // class / tier
  int b = 0;  // generation / server index
};

struct EventLater {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.seq > y.seq;
  }
};

struct Server {
  bool active = true;
  bool busy = false;
  Job current;
  std::deque<Job> queue;
};

}  // namespace

struct DesEngine::Impl {
  Scenario scenario;
  Topology topo;  // live replica counts
  std::mt19937_64 rng;
  std::priority_queue<Event, std::vector<Event>, EventLater> events;
  long next_seq = 0;

  std::vector<std::vector<Server>> tiers;  // [tier][server]
  std::vector<int> arrival_gen;            // per class
  std::vector<int> bg_gen;                 // per tier
  std::vector<double> bg_service;          // s0 per tier

  double now = 0.0;
  int windows_done = 0;

  // busy/capacity integrals, reset per window
  double accum_at = 0.0;
  std::vector<int> busy_count;
  std::vector<double> busy_integral;
  std::vector<double> capacity_integral;
  std::vector<long> window_completions;
  std::vector<double> window_resp_sum;

  std::vector<long> total_arrivals;
  std::vector<long> total_completions;

  explicit Impl(const Scenario& s) : scenario(s), topo(s.topo), rng(s.seed) {
    const int m = topo.num_tiers;
    const int c = topo.num_classes;
    tiers.resize(m);
    for (int j = 0; j < m; ++j)
      tiers[j].assign(static_cast<size_t>(topo.replicas[j]), Server{});
    arrival_gen.assign(c, 0);
    bg_gen.assign(m, 0);
    busy_count.assign(m, 0);
    busy_integral.assign(m, 0.0);
    capacity_integral.assign(m, 0.0);
    window_completions.assign(c, 0);
    window_resp_sum.assign(c, 0.0);
    total_arrivals.assign(c, 0);
    total_completions.assign(c, 0);

    // Background stream service time: traffic-weighted mean class service
    // time at t=0, so the tier's job mix stays close to the modeled one.
    bg_service.assign(m, 0.0);
    const Workload& w0 = scenario.workload_at(0.0);
    const ParamVector& x0 = scenario.truth_at(0.0);
    for (int j = 0; j < m; ++j) {
      double traffic = 0.0, rate = 0.0, plain = 0.0;
      for (int i = 0; i < c; ++i) {
        traffic += w0.lambda(i) * x0.S(i, j);
        rate += w0.lambda(i);
        plain += x0.S(i, j);
      }
      if (rate > 0.0 && traffic > 0.0) bg_service[j] = traffic / rate;
      else if (plain > 0.0) bg_service[j] = plain / c;
      else bg_service[j] = 0.005;
    }

    for (int i = 0; i < c; ++i) schedule_class_arrival(i);
    for (int j = 0; j < m; ++j) schedule_bg_arrival(j);
    for (size_t k = 1; k < scenario.schedule.size(); ++k)
      push(scenario.schedule[k].start, Event::SegmentChange, 0, 0);
    for (const auto& tc : scenario.truth_changes)
      push(tc.time, Event::SegmentChange, 0, 0);
  }

  void push(double time, Event::Kind kind, int a, int b) {
    events.push(Event{time, next_seq++, kind, a, b});
  }

  double draw_exp(double mean) {
    std::exponential_distribution<double> dist(1.0 / mean);
    return dist(rng);
  }

  void schedule_class_arrival(int cls) {
    const double rate = scenario.workload_at(now).lambda(cls);
    if (rate <= 0.0) return;
    push(now + draw_exp(1.0 / rate), Event::ClassArrival, cls,
         arrival_gen[cls]);
  }

  void schedule_bg_arrival(int tier) {
    const double u0 = scenario.truth_at(now).u0(tier);
    if (u0 <= 0.0 || bg_service[tier] <= 0.0) return;
    const double rate = u0 * topo.replicas[tier] / bg_service[tier];
    if (rate <= 0.0) return;
    push(now + draw_exp(1.0 / rate), Event::BgArrival, tier, bg_gen[tier]);
  }

  void integrate_to(double t) {
    const double dt = t - accum_at;
    if (dt > 0.0) {
      for (int j = 0; j < topo.num_tiers; ++j) {
        busy_integral[j] += busy_count[j] * dt;
        capacity_integral[j] += topo.replicas[j] * dt;
      }
      accum_at = t;
    }
  }

  double service_mean(const Job& job, int tier) {
    if (job.cls == kBackgroundClass) return bg_service[tier];
    return scenario.truth_at(now).S(job.cls, tier);
  }

  void start_service(int tier, int sid, Job job) {
    Server& sv = tiers[tier][sid];
    sv.busy = true;
    sv.current = job;
    ++busy_count[tier];
    const double mean = service_mean(job, tier);
    const double dur = mean > 0.0 ? draw_exp(mean) : 0.0;
    push(now + dur, Event::Completion, tier, sid);
  }

  void dispatch(int tier, const Job& job) {
    // Shortest queue among active servers, lowest index on ties.
    int pick = -1;
    long best = 0;
    for (int sid = 0; sid < static_cast<int>(tiers[tier].size()); ++sid) {
      const Server& sv = tiers[tier][sid];
      if (!sv.active) continue;
      const long load = (sv.busy ? 1 : 0) + static_cast<long>(sv.queue.size());
      if (pick < 0 || load < best) {
        pick = sid;
        best = load;
      }
    }
    if (pick < 0)
      throw ConfigError("simulator: tier " + std::to_string(tier) +
                        " has no active server");
    Server& sv = tiers[tier][pick];
    if (!sv.busy) start_service(tier, pick, job);
    else sv.queue.push_back(job);
  }

  void handle_class_arrival(const Event& ev) {
    if (ev.b != arrival_gen[ev.a]) return;  // stale generation
    Job job;
    job.cls = ev.a;
    job.arrival = now;
    job.delay_snapshot = scenario.truth_at(now).d(ev.a);
    job.tier = 0;
    ++total_arrivals[ev.a];
    dispatch(0, job);
    schedule_class_arrival(ev.a);
  }

  void handle_bg_arrival(const Event& ev) {
    if (ev.b != bg_gen[ev.a]) return;
    Job job;
    job.cls = kBackgroundClass;
    job.arrival = now;
    job.tier = ev.a;
    dispatch(ev.a, job);
    schedule_bg_arrival(ev.a);
  }

  void handle_completion(const Event& ev) {
    const int tier = ev.a;
    Server& sv = tiers[tier][ev.b];
    Job done = sv.current;
    sv.busy = false;
    --busy_count[tier];
    if (sv.active && !sv.queue.empty()) {
      Job next = sv.queue.front();
      sv.queue.pop_front();
      start_service(tier, ev.b, next);
    }
    if (done.cls == kBackgroundClass) return;
    if (done.tier + 1 < topo.num_tiers) {
      Job moved = done;
      ++moved.tier;
      dispatch(moved.tier, moved);
      return;
    }
    const double response = (now - done.arrival) + done.delay_snapshot;
    ++total_completions[done.cls];
    ++window_completions[done.cls];
    window_resp_sum[done.cls] += response;
  }

  void handle_segment_change() {
    // Rates are memoryless: drop pending draws and redraw at the boundary.
    for (int i = 0; i < topo.num_classes; ++i) {
      ++arrival_gen[i];
      schedule_class_arrival(i);
    }
    for (int j = 0; j < topo.num_tiers; ++j) {
      ++bg_gen[j];
      schedule_bg_arrival(j);
    }
  }

  WindowStats advance_window() {
    const double start = windows_done * scenario.sample_period;
    const double end = start + scenario.sample_period;
    WindowStats ws;
    ws.t_end = end;
    ws.workload = scenario.workload_at(start);
    ws.truth = scenario.truth_at(start);
    ws.topo = topo;
    try {
      ws.noiseless = evaluate_observation(ws.truth, ws.workload, topo);
    } catch (const SaturationError&) {
      ws.noiseless = std::nullopt;
    }

    while (!events.empty() && events.top().time < end) {
      const Event ev = events.top();
      events.pop();
      integrate_to(ev.time);
      now = ev.time;
      switch (ev.kind) {
        case Event::ClassArrival: handle_class_arrival(ev); break;
        case Event::BgArrival: handle_bg_arrival(ev); break;
        case Event::Completion: handle_completion(ev); break;
        case Event::SegmentChange: handle_segment_change(); break;
      }
    }
    integrate_to(end);
    now = end;
    ++windows_done;

    ws.util = Eigen::VectorXd(topo.num_tiers);
    for (int j = 0; j < topo.num_tiers; ++j) {
      const double cap = capacity_integral[j];
      ws.util(j) = cap > 0.0 ? std::clamp(busy_integral[j] / cap, 0.0, 1.0) : 0.0;
      busy_integral[j] = 0.0;
      capacity_integral[j] = 0.0;
    }
    ws.resp.resize(topo.num_classes);
    for (int i = 0; i < topo.num_classes; ++i) {
      if (window_completions[i] > 0)
        ws.resp[i] = window_resp_sum[i] / window_completions[i];
      else
        ws.resp[i] = std::nullopt;
      window_completions[i] = 0;
      window_resp_sum[i] = 0.0;
    }
    return ws;
  }

  void set_replica_count(int tier, int count) {
    if (tier < 0 || tier >= topo.num_tiers)
      throw ConfigError("simulator: unknown tier");
    if (count < 1) throw ConfigError("simulator: replica count must be >= 1");
    integrate_to(now);
    auto& pool = tiers[tier];
    int active = 0;
    for (const auto& sv : pool) active += sv.active ? 1 : 0;

    while (active < count) {
      // Reuse a drained idle slot if one exists.
      int slot = -1;
      for (int sid = 0; sid < static_cast<int>(pool.size()); ++sid)
        if (!pool[sid].active && !pool[sid].busy) {
          slot = sid;
          break;
        }
      if (slot < 0) pool.push_back(Server{});
      else pool[slot].active = true;
      ++active;
    }
    while (active > count) {
      // Retire the highest-index active server; its queue redistributes now,
      // its in-service job drains.
      int slot = -1;
      for (int sid = static_cast<int>(pool.size()) - 1; sid >= 0; --sid)
        if (pool[sid].active) {
          slot = sid;
          break;
        }
      pool[slot].active = false;
      std::deque<Job> orphans;
      orphans.swap(pool[slot].queue);
      --active;
      for (const auto& job : orphans) dispatch(tier, job);
    }
    topo.replicas[tier] = count;
    // Background load scales with the replica count.
    ++bg_gen[tier];
    schedule_bg_arrival(tier);
  }

  long in_flight(int cls) const {
    long n = 0;
    for (const auto& pool : tiers)
      for (const auto& sv : pool) {
        if (sv.busy && sv.current.cls == cls) ++n;
        for (const auto& job : sv.queue)
          if (job.cls == cls) ++n;
      }
    return n;
  }
};

DesEngine::DesEngine(const Scenario& s) {
  s.validate();
  impl_ = std::make_unique<Impl>(s);
}

DesEngine::~DesEngine() = default;
DesEngine::DesEngine(DesEngine&&) noexcept = default;
DesEngine& DesEngine::operator=(DesEngine&&) noexcept = default;

WindowStats DesEngine::advance_window() { return impl_->advance_window(); }

bool DesEngine::finished() const {
  return impl_->windows_done >= impl_->scenario.num_samples();
}

double DesEngine::now() const { return impl_->now; }

const Topology& DesEngine::topology() const { return impl_->topo; }

void DesEngine::set_replica_count(int tier, int count) {
  impl_->set_replica_count(tier, count);
}

long DesEngine::arrivals(int cls) const { return impl_->total_arrivals[cls]; }

long DesEngine::completions(int cls) const {
  return impl_->total_completions[cls];
}

long DesEngine::in_flight(int cls) const { return impl_->in_flight(cls); }

std::pair<std::vector<MetricSample>, GroundTruthLog> run_des(const Scenario& s) {
  s.validate();
  reject_if_saturated(s);
  DesEngine engine(s);
  std::vector<MetricSample> samples;
  GroundTruthLog log;
  const int n = s.num_samples();
  samples.reserve(n);
  log.reserve(n);
  while (!engine.finished()) {
    WindowStats ws = engine.advance_window();
    samples.push_back(ws.sample());
    log.push_back({ws.t_end, ws.truth, *ws.noiseless});
  }
  return {std::move(samples), std::move(log)};
}

}  // namespace tiertrack
