#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tiertrack/errors.hpp"

namespace tiertrack {

// Deployment shape: M tiers, C request classes, homogeneous replicas per tier.
struct Topology {
  int num_tiers = 0;
  int num_classes = 0;
  std::vector<int> replicas;

  // Throws ConfigError unless M >= 1, C >= 1 and every replica count >= 1.
  void validate() const;
};

// Per-class arrival rates, requests/second.
struct Workload {
  Eigen::VectorXd lambda;

  void validate(const Topology& topo) const;
};

// Hidden model parameters: background utilizations u0 (per tier), class
// delays d (seconds) and mean service times S (class-by-tier, seconds).
// Flattened order is (u0 | d | S row-major by class); the Jacobian layout
// relies on it.
struct ParamVector {
  Eigen::VectorXd u0;  // M
  Eigen::VectorXd d;   // C
  Eigen::MatrixXd S;   // C x M

  static ParamVector zeros(const Topology& topo);
  static ParamVector from_flat(const Eigen::VectorXd& x, const Topology& topo);

  Eigen::VectorXd flat() const;
  int dim() const { return static_cast<int>(u0.size() + d.size() + S.size()); }

  // Throws ConfigError on negative entries, u0 >= 1 or dimension mismatch.
  void validate(const Topology& topo) const;
};

// Flat state dimension M + C + C*M.
int state_dim(const Topology& topo);
// Observation dimension M + C.
int observation_dim(const Topology& topo);

// The measurable vector z: per-tier utilizations and per-class mean response
// times. Flattened order is (u | R).
struct Observation {
  Eigen::VectorXd util;  // M
  Eigen::VectorXd resp;  // C

  Eigen::VectorXd flat() const;
  static Observation from_flat(const Eigen::VectorXd& z, const Topology& topo);
};

// Per-class response decomposition: delay(i) + sum_j residence(i,j) == resp(i).
struct ResponseBreakdown {
  Eigen::VectorXd delay;           // C
  Eigen::MatrixXd residence;       // C x M, S_ij/(1-u_j)
  std::vector<int> bottleneck;     // per class, argmax_j residence (0-based)

  double total(int cls) const { return delay(cls) + residence.row(cls).sum(); }
};

// Raw per-replica tier utilizations u_j = u0_j + sum_i lambda_i S_ij / n_j.
// Does not throw on saturation; values may reach or exceed 1.
Eigen::VectorXd tier_utilizations(const ParamVector& x, const Workload& w,
                                  const Topology& topo);

// Closed-form observation map h(x; lambda). Throws SaturationError naming the
// first tier with u_j >= 1.
Observation evaluate_observation(const ParamVector& x, const Workload& w,
                                 const Topology& topo);

// Analytic Jacobian dh/dx, (M+C) x (M+C+C*M), at the flattened state order.
// Throws SaturationError as evaluate_observation does.
Eigen::MatrixXd observation_jacobian(const ParamVector& x, const Workload& w,
                                     const Topology& topo);

// Splits each R_i into its delay and per-tier residence terms and marks the
// argmax tier as the latency bottleneck.
ResponseBreakdown response_breakdown(const ParamVector& x, const Workload& w,
                                     const Topology& topo);

}  // namespace tiertrack
