#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "tiertrack/model.hpp"

namespace tiertrack {

// Floor used when scaling noise and the initial covariance by state or
// observation magnitude.
inline constexpr double kScaleFloor = 1e-4;

// Diagonal process/measurement noise. When the explicit diagonals are empty
// the scale-aware defaults apply: Q_kk = (q_rel * max(xhat_k, eps))^2 and
// Rm_ll = (r_rel * max(z_l, eps))^2.
struct NoiseConfig {
  Eigen::VectorXd q_diag;  // state dim, or empty for the relative rule
  Eigen::VectorXd r_diag;  // observation dim, or empty for the relative rule
  double q_rel = 0.01;
  double r_rel = 0.05;

  Eigen::VectorXd process_diag(const Eigen::VectorXd& xhat) const;
  Eigen::VectorXd measurement_diag(const Eigen::VectorXd& z) const;
  void validate(const Topology& topo) const;
};

// One monitoring sample: workload plus measured utilizations and per-class
// mean response times. A missing response entry (no completions observed in
// the window) is nullopt and masks that observation row in the update.
struct MetricSample {
  double t = 0.0;
  Workload workload;
  Eigen::VectorXd util;                      // M
  std::vector<std::optional<double>> resp;   // C

  void validate(const Topology& topo) const;
};

// EKF state: estimate, covariance, noise settings.
struct FilterState {
  ParamVector xhat;
  Eigen::MatrixXd P;
  NoiseConfig noise;
  long step_count = 0;
};

struct UpdateDiagnostics {
  Eigen::VectorXd innovation;        // masked rows
  Eigen::MatrixXd innovation_cov;    // masked, symmetric positive-definite
  Eigen::MatrixXd gain;              // state dim x masked rows
  std::vector<bool> projected;       // per state entry
  std::vector<int> observed_rows;    // indices into the full (u | R) vector
};

// Clamps every entry to >= 0 and u0 to <= 0.999. Negative zeros normalize
// to +0.0 so a no-op projection is bitwise identity.
ParamVector project_constraints(ParamVector x);

// P = p0_scale * diag(max(x0_k, eps)^2). Throws ConfigError when p0_scale
// or any noise diagonal is not positive.
FilterState init_filter(const ParamVector& x0, double p0_scale,
                        NoiseConfig noise, const Topology& topo);

// Order-of-magnitude start when no x0 is given: u0 = 0.01 per tier, d_i = 10%
// of the first observed R_i, and S_ij sized so each tier's traffic term
// reproduces 80% of the first observed u_j, split equally across the classes
// with nonzero arrival rate.
ParamVector bootstrap_state(const MetricSample& first, const Topology& topo);

// Time update: xhat unchanged (identity transition), P += Q, symmetry
// re-enforced by averaging with the transpose.
FilterState predict_step(FilterState fs);

// Measurement update at the sample's workload: Jacobian-linearized gain via
// an LDLT solve, Joseph-form covariance, constraint projection on the new
// estimate. Throws SaturationError if the predicted state is infeasible at
// the sample workload and SingularInnovationError if S is numerically
// singular.
std::pair<FilterState, UpdateDiagnostics> update_step(FilterState fs,
                                                      const MetricSample& sample,
                                                      const Topology& topo);

struct TrackConfig {
  std::optional<ParamVector> x0;  // bootstrap from the first sample if absent
  double p0_scale = 1.0;
  NoiseConfig noise;
};

// One output row per consumed sample.
struct TrackRecord {
  double t = 0.0;
  ParamVector estimate;
  // One-step prediction h(x_prior) at the sample workload; absent when the
  // sample was skipped for saturation.
  std::optional<Observation> predicted;
  UpdateDiagnostics diag;
  bool skipped = false;
};

// Incremental tracker: predict + update per sample, skipping samples where
// the predicted state is infeasible at the sample's workload. Single writer
// per instance; instances are plain values.
class Tracker {
 public:
  Tracker(Topology topo, TrackConfig config);

  // Processes one sample. The first sample bootstraps the state when no x0
  // was configured. Topology may be swapped between steps (replica scaling).
  TrackRecord step(const MetricSample& sample);

  void set_topology(const Topology& topo);
  const Topology& topology() const { return topo_; }
  bool initialized() const { return state_.has_value(); }
  const FilterState& state() const;

 private:
  Topology topo_;
  TrackConfig config_;
  std::optional<FilterState> state_;
  double last_t_ = 0.0;
  bool seen_sample_ = false;
};

// Batch form of the same recursion.
std::vector<TrackRecord> track(const std::vector<MetricSample>& samples,
                               const Topology& topo, const TrackConfig& config);

}  // namespace tiertrack
