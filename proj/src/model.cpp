#include "tiertrack/model.hpp"

#include <cmath>
#include <string>

namespace tiertrack {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

void Topology::validate() const {
  if (num_tiers < 1) throw ConfigError("topology: num_tiers must be >= 1");
  if (num_classes < 1) throw ConfigError("topology: num_classes must be >= 1");
  if (static_cast<int>(replicas.size()) != num_tiers)
    throw ConfigError("topology: replicas size " +
                      std::to_string(replicas.size()) + " != num_tiers " +
                      std::to_string(num_tiers));
  for (int j = 0; j < num_tiers; ++j)
    if (replicas[j] < 1)
      throw ConfigError("topology: replicas[" + std::to_string(j) +
                        "] must be >= 1");
}

void Workload::validate(const Topology& topo) const {
  if (lambda.size() != topo.num_classes)
    throw ConfigError("workload: lambda size " + std::to_string(lambda.size()) +
                      " != num_classes " + std::to_string(topo.num_classes));
  if (!all_finite(lambda) || (lambda.array() < 0.0).any())
    throw ConfigError("workload: rates must be finite and >= 0");
}

int state_dim(const Topology& topo) {
  return topo.num_tiers + topo.num_classes + topo.num_classes * topo.num_tiers;
}

int observation_dim(const Topology& topo) {
  return topo.num_tiers + topo.num_classes;
}

ParamVector ParamVector::zeros(const Topology& topo) {
  ParamVector x;
  x.u0 = Eigen::VectorXd::Zero(topo.num_tiers);
  x.d = Eigen::VectorXd::Zero(topo.num_classes);
  x.S = Eigen::MatrixXd::Zero(topo.num_classes, topo.num_tiers);
  return x;
}

ParamVector ParamVector::from_flat(const Eigen::VectorXd& x,
                                   const Topology& topo) {
  const int m = topo.num_tiers;
  const int c = topo.num_classes;
  if (x.size() != state_dim(topo))
    throw ConfigError("param vector: flat size " + std::to_string(x.size()) +
                      " != " + std::to_string(state_dim(topo)));
  ParamVector p;
  p.u0 = x.segment(0, m);
  p.d = x.segment(m, c);
  p.S = Eigen::MatrixXd(c, m);
  for (int i = 0; i < c; ++i) p.S.row(i) = x.segment(m + c + i * m, m);
  return p;
}

Eigen::VectorXd ParamVector::flat() const {
  const int m = static_cast<int>(u0.size());
  const int c = static_cast<int>(d.size());
  Eigen::VectorXd x(dim());
  x.segment(0, m) = u0;
  x.segment(m, c) = d;
  for (int i = 0; i < c; ++i) x.segment(m + c + i * m, m) = S.row(i);
  return x;
}

void ParamVector::validate(const Topology& topo) const {
  if (u0.size() != topo.num_tiers || d.size() != topo.num_classes ||
      S.rows() != topo.num_classes || S.cols() != topo.num_tiers)
    throw ConfigError("param vector: dimensions do not match topology");
  if (!u0.allFinite() || !d.allFinite() || !S.allFinite())
    throw ConfigError("param vector: entries must be finite");
  if ((u0.array() < 0.0).any() || (d.array() < 0.0).any() ||
      (S.array() < 0.0).any())
    throw ConfigError("param vector: entries must be >= 0");
  if ((u0.array() >= 1.0).any())
    throw ConfigError("param vector: background utilization must be < 1");
}

Eigen::VectorXd Observation::flat() const {
  Eigen::VectorXd z(util.size() + resp.size());
  z << util, resp;
  return z;
}

Observation Observation::from_flat(const Eigen::VectorXd& z,
                                   const Topology& topo) {
  if (z.size() != observation_dim(topo))
    throw ConfigError("observation: flat size mismatch");
  Observation obs;
  obs.util = z.segment(0, topo.num_tiers);
  obs.resp = z.segment(topo.num_tiers, topo.num_classes);
  return obs;
}

Eigen::VectorXd tier_utilizations(const ParamVector& x, const Workload& w,
                                  const Topology& topo) {
  Eigen::VectorXd u(topo.num_tiers);
  for (int j = 0; j < topo.num_tiers; ++j) {
    double traffic = 0.0;
    for (int i = 0; i < topo.num_classes; ++i)
      traffic += w.lambda(i) * x.S(i, j);
    u(j) = x.u0(j) + traffic / topo.replicas[j];
  }
  return u;
}

namespace {

// Shared feasibility gate: returns u with all entries < 1 or throws.
Eigen::VectorXd feasible_utilizations(const ParamVector& x, const Workload& w,
                                      const Topology& topo) {
  topo.validate();
  x.validate(topo);
  w.validate(topo);
  Eigen::VectorXd u = tier_utilizations(x, w, topo);
  for (int j = 0; j < topo.num_tiers; ++j)
    if (u(j) >= 1.0) throw SaturationError(j, u(j));
  return u;
}

}  // namespace

Observation evaluate_observation(const ParamVector& x, const Workload& w,
                                 const Topology& topo) {
  const Eigen::VectorXd u = feasible_utilizations(x, w, topo);
  Observation obs;
  obs.util = u;
  obs.resp = Eigen::VectorXd(topo.num_classes);
  for (int i = 0; i < topo.num_classes; ++i) {
    double r = x.d(i);
    for (int j = 0; j < topo.num_tiers; ++j) r += x.S(i, j) / (1.0 - u(j));
    obs.resp(i) = r;
  }
  return obs;
}

Eigen::MatrixXd observation_jacobian(const ParamVector& x, const Workload& w,
                                     const Topology& topo) {
  const Eigen::VectorXd u = feasible_utilizations(x, w, topo);
  const int m = topo.num_tiers;
  const int c = topo.num_classes;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m + c, m + c + c * m);

  auto s_col = [&](int cls, int tier) { return m + c + cls * m + tier; };

  // u_j rows: linear in u0_j and S_ij.
  for (int j = 0; j < m; ++j) {
    jac(j, j) = 1.0;
    for (int i = 0; i < c; ++i)
      jac(j, s_col(i, j)) = w.lambda(i) / topo.replicas[j];
  }

  // R_i rows. du_j/dS_kj = lambda_k/n_j feeds the chain term
  // S_ij/(1-u_j)^2 * du_j/d(.) for every parameter that moves u_j.
  for (int i = 0; i < c; ++i) {
    const int row = m + i;
    jac(row, m + i) = 1.0;  // dR_i/dd_i
    for (int j = 0; j < m; ++j) {
      const double denom = 1.0 - u(j);
      const double chain = x.S(i, j) / (denom * denom);
      jac(row, j) = chain;  // via u0_j
      for (int k = 0; k < c; ++k) {
        double v = chain * w.lambda(k) / topo.replicas[j];
        if (k == i) v += 1.0 / denom;
        jac(row, s_col(k, j)) = v;
      }
    }
  }
  return jac;
}

ResponseBreakdown response_breakdown(const ParamVector& x, const Workload& w,
                                     const Topology& topo) {
  const Eigen::VectorXd u = feasible_utilizations(x, w, topo);
  ResponseBreakdown bd;
  bd.delay = x.d;
  bd.residence = Eigen::MatrixXd(topo.num_classes, topo.num_tiers);
  bd.bottleneck.resize(topo.num_classes);
  for (int i = 0; i < topo.num_classes; ++i) {
    int arg = 0;
    for (int j = 0; j < topo.num_tiers; ++j) {
      bd.residence(i, j) = x.S(i, j) / (1.0 - u(j));
      if (bd.residence(i, j) > bd.residence(i, arg)) arg = j;
    }
    bd.bottleneck[i] = arg;
  }
  return bd;
}

}  // namespace tiertrack
