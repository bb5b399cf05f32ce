#include "tiertrack/ekf.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>

namespace tiertrack {

namespace {

Eigen::VectorXd scaled_sq(const Eigen::VectorXd& v, double rel) {
  return (rel * v.array().max(kScaleFloor)).square().matrix();
}

}  // namespace

Eigen::VectorXd NoiseConfig::process_diag(const Eigen::VectorXd& xhat) const {
  if (q_diag.size() > 0) return q_diag;
  return scaled_sq(xhat, q_rel);
}

Eigen::VectorXd NoiseConfig::measurement_diag(const Eigen::VectorXd& z) const {
  if (r_diag.size() > 0) return r_diag;
  return scaled_sq(z, r_rel);
}

void NoiseConfig::validate(const Topology& topo) const {
  if (q_diag.size() > 0) {
    if (q_diag.size() != state_dim(topo))
      throw ConfigError("noise: Q diagonal size != state dimension");
    if (!(q_diag.array() > 0.0).all())
      throw ConfigError("noise: Q diagonal entries must be > 0");
  } else if (!(q_rel > 0.0)) {
    throw ConfigError("noise: q_rel must be > 0");
  }
  if (r_diag.size() > 0) {
    if (r_diag.size() != observation_dim(topo))
      throw ConfigError("noise: R diagonal size != observation dimension");
    if (!(r_diag.array() > 0.0).all())
      throw ConfigError("noise: R diagonal entries must be > 0");
  } else if (!(r_rel > 0.0)) {
    throw ConfigError("noise: r_rel must be > 0");
  }
}

void MetricSample::validate(const Topology& topo) const {
  workload.validate(topo);
  if (util.size() != topo.num_tiers)
    throw ConfigError("sample: util size != num_tiers");
  if (!util.allFinite() || (util.array() < 0.0).any() ||
      (util.array() > 1.0).any())
    throw ConfigError("sample: measured utilization must lie in [0, 1]");
  if (static_cast<int>(resp.size()) != topo.num_classes)
    throw ConfigError("sample: resp size != num_classes");
  for (const auto& r : resp)
    if (r && !(std::isfinite(*r) && *r >= 0.0))
      throw ConfigError("sample: response entries must be finite and >= 0");
}

ParamVector project_constraints(ParamVector x) {
  auto clamp_nonneg = [](double v) { return v <= 0.0 ? 0.0 : v; };
  for (int j = 0; j < x.u0.size(); ++j)
    x.u0(j) = std::min(clamp_nonneg(x.u0(j)), 0.999);
  for (int i = 0; i < x.d.size(); ++i) x.d(i) = clamp_nonneg(x.d(i));
  for (int i = 0; i < x.S.rows(); ++i)
    for (int j = 0; j < x.S.cols(); ++j) x.S(i, j) = clamp_nonneg(x.S(i, j));
  return x;
}

FilterState init_filter(const ParamVector& x0, double p0_scale,
                        NoiseConfig noise, const Topology& topo) {
  topo.validate();
  noise.validate(topo);
  if (!(p0_scale > 0.0))
    throw ConfigError("filter: P0_scale must be > 0 (a zero prior covariance "
                      "never moves)");
  FilterState fs;
  fs.xhat = project_constraints(x0);
  fs.xhat.validate(topo);
  const Eigen::VectorXd x = fs.xhat.flat();
  fs.P = (p0_scale * x.array().max(kScaleFloor).square()).matrix().asDiagonal();
  fs.noise = std::move(noise);
  return fs;
}

ParamVector bootstrap_state(const MetricSample& first, const Topology& topo) {
  first.validate(topo);
  const int m = topo.num_tiers;
  const int c = topo.num_classes;
  ParamVector x = ParamVector::zeros(topo);
  x.u0.setConstant(0.01);
  for (int i = 0; i < c; ++i)
    x.d(i) = first.resp[i] ? 0.1 * *first.resp[i] : 1e-3;

  int active = 0;
  for (int i = 0; i < c; ++i)
    if (first.workload.lambda(i) > 0.0) ++active;
  for (int j = 0; j < m; ++j) {
    const double traffic_target = 0.8 * first.util(j) * topo.replicas[j];
    for (int i = 0; i < c; ++i) {
      double s = kScaleFloor;
      if (first.workload.lambda(i) > 0.0 && active > 0)
        s = traffic_target / (active * first.workload.lambda(i));
      x.S(i, j) = std::max(s, kScaleFloor);
    }
  }
  return project_constraints(x);
}

FilterState predict_step(FilterState fs) {
  const Eigen::VectorXd q = fs.noise.process_diag(fs.xhat.flat());
  fs.P += q.asDiagonal();
  fs.P = (0.5 * (fs.P + fs.P.transpose())).eval();
  return fs;
}

std::pair<FilterState, UpdateDiagnostics> update_step(FilterState fs,
                                                      const MetricSample& sample,
                                                      const Topology& topo) {
  sample.validate(topo);
  const int m = topo.num_tiers;
  const int c = topo.num_classes;
  const int n = state_dim(topo);

  // Throws SaturationError when the predicted state is infeasible here.
  const Observation pred = evaluate_observation(fs.xhat, sample.workload, topo);
  const Eigen::MatrixXd jac =
      observation_jacobian(fs.xhat, sample.workload, topo);

  // Utilization rows are always observed; response rows only when measured.
  std::vector<int> rows;
  rows.reserve(m + c);
  for (int j = 0; j < m; ++j) rows.push_back(j);
  for (int i = 0; i < c; ++i)
    if (sample.resp[i]) rows.push_back(m + i);
  const int mr = static_cast<int>(rows.size());

  Eigen::VectorXd z(mr), h(mr);
  Eigen::MatrixXd H(mr, n);
  const Eigen::VectorXd h_full = pred.flat();
  for (int r = 0; r < mr; ++r) {
    const int row = rows[r];
    z(r) = row < m ? sample.util(row) : *sample.resp[row - m];
    h(r) = h_full(row);
    H.row(r) = jac.row(row);
  }

  const Eigen::VectorXd r_m = fs.noise.measurement_diag(z);
  Eigen::MatrixXd S = H * fs.P * H.transpose();
  S += r_m.asDiagonal();
  S = (0.5 * (S + S.transpose())).eval();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
  const Eigen::VectorXd dvec = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(dvec.minCoeff() > 0.0) ||
      dvec.minCoeff() < 1e-13 * dvec.maxCoeff())
    throw SingularInnovationError(
        "innovation covariance is singular to working precision");

  // K = P H^T S^{-1}, via the solve S K^T = H P (no explicit inverse).
  const Eigen::MatrixXd gain = ldlt.solve(H * fs.P).transpose();
  const Eigen::VectorXd innovation = z - h;

  const Eigen::VectorXd x_prior = fs.xhat.flat();
  const Eigen::VectorXd x_shifted = x_prior + gain * innovation;
  ParamVector x_post =
      project_constraints(ParamVector::from_flat(x_shifted, topo));
  const Eigen::VectorXd x_post_flat = x_post.flat();

  UpdateDiagnostics diag;
  diag.innovation = innovation;
  diag.innovation_cov = S;
  diag.gain = gain;
  diag.observed_rows = rows;
  diag.projected.resize(n);
  for (int k = 0; k < n; ++k)
    diag.projected[k] = x_post_flat(k) != x_shifted(k);

  // Joseph form keeps P symmetric positive-semidefinite under roundoff.
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(n, n) - gain * H;
  Eigen::MatrixXd P_post = ikh * fs.P * ikh.transpose();
  P_post += gain * r_m.asDiagonal() * gain.transpose();
  fs.P = (0.5 * (P_post + P_post.transpose())).eval();
  fs.xhat = std::move(x_post);
  ++fs.step_count;
  return {std::move(fs), std::move(diag)};
}

Tracker::Tracker(Topology topo, TrackConfig config)
    : topo_(std::move(topo)), config_(std::move(config)) {
  topo_.validate();
  config_.noise.validate(topo_);
  if (!(config_.p0_scale > 0.0))
    throw ConfigError("filter: P0_scale must be > 0");
}

void Tracker::set_topology(const Topology& topo) {
  topo.validate();
  if (topo.num_tiers != topo_.num_tiers ||
      topo.num_classes != topo_.num_classes)
    throw ConfigError("tracker: tier/class counts are fixed per stream");
  topo_ = topo;
}

const FilterState& Tracker::state() const {
  if (!state_) throw ConfigError("tracker: no sample processed yet");
  return *state_;
}

TrackRecord Tracker::step(const MetricSample& sample) {
  sample.validate(topo_);
  if (seen_sample_ && !(sample.t > last_t_))
    throw ConfigError("tracker: sample timestamps must be strictly increasing");
  last_t_ = sample.t;
  seen_sample_ = true;

  if (!state_) {
    const ParamVector x0 =
        config_.x0 ? *config_.x0 : bootstrap_state(sample, topo_);
    state_ = init_filter(x0, config_.p0_scale, config_.noise, topo_);
  }

  FilterState prior = predict_step(*state_);
  TrackRecord rec;
  rec.t = sample.t;
  try {
    auto [posterior, diag] = update_step(prior, sample, topo_);
    rec.predicted = evaluate_observation(prior.xhat, sample.workload, topo_);
    rec.diag = std::move(diag);
    state_ = std::move(posterior);
  } catch (const SaturationError&) {
    // Transient saturation: keep the time update, skip the measurement.
    rec.skipped = true;
    state_ = std::move(prior);
  }
  rec.estimate = state_->xhat;
  return rec;
}

std::vector<TrackRecord> track(const std::vector<MetricSample>& samples,
                               const Topology& topo,
                               const TrackConfig& config) {
  Tracker tracker(topo, config);
  std::vector<TrackRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(tracker.step(s));
  return out;
}

}  // namespace tiertrack
