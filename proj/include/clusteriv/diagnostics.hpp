#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "clusteriv/estimators.hpp"

namespace clusteriv {

struct DesignDiagnostics {
  double s_z = 0.0;
  double s_z_in = 0.0;
  double kappa_hat = 0.0;   // S_{Z,in} / S_Z
  double c_hat = 0.0;       // N^-1 sum n_g^2 phi_hat_g
  Eigen::VectorXd phi_hat;  // (Zbar_g - Zbar)^2 / S_Z, one-draw proxy
  double s_zd = 0.0;
  double s_zd_in = 0.0;
  int n_effective_clusters = 0;  // clusters with within-variation in z
  bool fe_admissible = true;     // false when z cluster-constant everywhere
};

inline DesignDiagnostics design_diagnostics(const Dataset& data) {
  const Eigen::Index n = data.z.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double zbar = data.z.mean();
  const double dbar = data.d.mean();
  DesignDiagnostics out;
  out.s_z = (data.z.array() - zbar).square().sum() * inv_n;
  if (out.s_z == 0.0)
    throw DegenerateInstrument("design_diagnostics: instrument constant");
  Eigen::VectorXd zc = center_by_cluster(data.z, data.idx);
  Eigen::VectorXd dc = center_by_cluster(data.d, data.idx);
  out.s_z_in = zc.squaredNorm() * inv_n;
  out.kappa_hat = out.s_z_in / out.s_z;
  out.s_zd =
      ((data.z.array() - zbar) * (data.d.array() - dbar)).sum() * inv_n;
  out.s_zd_in = zc.dot(dc) * inv_n;

  const int G = data.n_clusters();
  out.phi_hat.resize(G);
  Eigen::VectorXd zg = cluster_means(data.z, data.idx);
  double c = 0.0;
  for (int g = 0; g < G; ++g) {
    const double ng = static_cast<double>(data.idx.size(g));
    out.phi_hat[g] = (zg[g] - zbar) * (zg[g] - zbar) / out.s_z;
    c += ng * ng * out.phi_hat[g];
  }
  out.c_hat = c * inv_n;
  out.n_effective_clusters = detail::count_within_varying(zc, data.idx, 1e-12);
  out.fe_admissible = out.n_effective_clusters > 0;
  return out;
}

/// Design/outcome parameters for the asymptotic efficiency comparison.
/// These are user-supplied or simulation-known; nothing here is estimated
/// from a single dataset.
struct EfficiencyModel {
  double sigma_alpha2 = 0.0;  // variance of cluster-specific effects
  double sigma_eps2 = 1.0;    // variance of unit-level errors
  double kappa = 1.0;         // in (0, 1]
  double c = 0.0;             // >= 0
  double pi_c = 1.0;          // complier probability
  double sigma_z2 = 0.25;     // var(Z_i)

  void validate() const {
    if (sigma_alpha2 < 0 || sigma_eps2 <= 0 || kappa <= 0 || kappa > 1 ||
        c < 0 || pi_c <= 0 || pi_c > 1 || sigma_z2 <= 0 || sigma_z2 > 0.25)
      throw Error("EfficiencyModel: parameter out of range");
  }
};

struct EfficiencyResult {
  double ratio = 0.0;  // v_ls / v_2sfe
  double v_ls = 0.0;
  double v_2sfe = 0.0;
};

/// v_ls / v_2sfe = kappa * (1 + (sigma_alpha^2/sigma_eps^2) * c), plus the
/// two limits themselves.
inline EfficiencyResult efficiency_ratio(const EfficiencyModel& m) {
  m.validate();
  EfficiencyResult out;
  const double denom = m.sigma_z2 * m.pi_c * m.pi_c;
  out.v_ls = (m.sigma_eps2 + m.sigma_alpha2 * m.c) / denom;
  out.v_2sfe = m.sigma_eps2 / (m.kappa * denom);
  out.ratio = m.kappa * (1.0 + (m.sigma_alpha2 / m.sigma_eps2) * m.c);
  return out;
}

struct EfficiencyCutoff {
  double cutoff = 0.0;  // 2SFE is asymptotically better when
                        // sigma_alpha^2/sigma_eps^2 exceeds this
  bool degenerate = false;
  std::string note;
};

inline EfficiencyCutoff efficiency_cutoff(double kappa, double c) {
  if (kappa <= 0 || kappa > 1 || c < 0)
    throw Error("efficiency_cutoff: need kappa in (0,1], c >= 0");
  EfficiencyCutoff out;
  if (kappa == 1.0) {
    // kappa = 1 forces c = 0: the two variances coincide.
    out.cutoff = 0.0;
    out.degenerate = true;
    out.note = "kappa = 1 implies c = 0; v_ls = v_2sfe identically";
  } else if (c == 0.0) {
    out.cutoff = std::numeric_limits<double>::infinity();
    out.degenerate = true;
    out.note = "c = 0 with kappa < 1: 2SFE never improves efficiency";
  } else {
    out.cutoff = (1.0 - kappa) / kappa / c;
  }
  return out;
}

struct CovariateAdjustmentRatios {
  double se2_lsx_over_ls = 0.0;
  double se2_lsx_over_fe = 0.0;
};

/// Limits of se^2_{2sls-x}/se^2_2sls and se^2_{2sls-x}/se^2_2sfe for a
/// cluster-constant covariate explaining var_proj of the cluster effect.
inline CovariateAdjustmentRatios covariate_adjustment_ratios(
    const EfficiencyModel& m, double var_proj) {
  m.validate();
  if (var_proj < 0 || var_proj > m.sigma_alpha2 + 1e-12)
    throw Error("covariate_adjustment_ratios: var_proj not in [0, sigma_alpha2]");
  CovariateAdjustmentRatios out;
  out.se2_lsx_over_ls =
      1.0 - var_proj * m.c / (m.sigma_eps2 + m.sigma_alpha2 * m.c);
  out.se2_lsx_over_fe = out.se2_lsx_over_ls * m.kappa *
                        (1.0 + (m.sigma_alpha2 / m.sigma_eps2) * m.c);
  return out;
}

struct ClusterParams {
  double n_g = 0.0;
  double phi_g = 0.0;
  double sigma_zg2 = 0.0;
  double pi_cg = 0.0;
  double tau_cg = 0.0;
};

struct HeteroWeights {
  Eigen::VectorXd kappa_2sfe;
  Eigen::VectorXd kappa_2sls;  // size 0 unless equal_e
  Eigen::VectorXd tau_c;
  double limit_2sfe = 0.0;  // sum kappa_{g,2sfe} tau_{c,g}
  double limit_2sls = 0.0;  // defined only under equal e_g
  bool has_2sls = false;
};

/// Cluster-LATE weights: kappa_{g,2sfe} proportional to
/// n_g (1 - phi_g) sigma_{Z,g}^2 pi_{c,g}; under equal e_g, kappa_{g,2sls}
/// proportional to n_g pi_{c,g}.
inline HeteroWeights fe_weights(const std::vector<ClusterParams>& params,
                                bool equal_e) {
  const int G = static_cast<int>(params.size());
  HeteroWeights out;
  out.kappa_2sfe.resize(G);
  out.tau_c.resize(G);
  double tot_fe = 0.0, tot_ls = 0.0;
  for (int g = 0; g < G; ++g) {
    const auto& p = params[g];
    out.kappa_2sfe[g] = p.n_g * (1.0 - p.phi_g) * p.sigma_zg2 * p.pi_cg;
    if (out.kappa_2sfe[g] < 0)
      throw Error("fe_weights: negative weight component");
    tot_fe += out.kappa_2sfe[g];
    tot_ls += p.n_g * p.pi_cg;
    out.tau_c[g] = p.tau_cg;
  }
  if (tot_fe == 0.0)
    throw AllZeroWeights("fe_weights: every n_g(1-phi_g)sigma_zg2 pi_cg = 0");
  out.kappa_2sfe /= tot_fe;
  out.limit_2sfe = out.kappa_2sfe.dot(out.tau_c);
  if (equal_e) {
    out.has_2sls = true;
    out.kappa_2sls.resize(G);
    for (int g = 0; g < G; ++g)
      out.kappa_2sls[g] = params[g].n_g * params[g].pi_cg / tot_ls;
    out.limit_2sls = out.kappa_2sls.dot(out.tau_c);
  }
  return out;
}

}  // namespace clusteriv
