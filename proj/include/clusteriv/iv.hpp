#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "clusteriv/cluster_index.hpp"
#include "clusteriv/errors.hpp"
#include "clusteriv/regress.hpp"

namespace clusteriv {

inline constexpr double kTolIdent = 1e-10;

struct TslsFit {
  Eigen::VectorXd coefficients;     // beta-hat, length m
  Eigen::VectorXd residuals;        // r_i = u_i - v_i' beta, length N
  Eigen::MatrixXd crse_cov;         // cluster-robust sandwich, m x m
  int n_clusters = 0;
  Eigen::MatrixXd instrumented_gram;  // V' P_W V
};

struct ScalarIvFit {
  double tau_hat = 0.0;
  double se = 0.0;
  Eigen::VectorXd residuals;          // length N
  double s_zd = 0.0;                  // N^-1 sum z*_i d*_i after partialling
  double s_zy = 0.0;
  Eigen::VectorXd per_cluster_scores; // sum_{i in g} z*_i r_i, length G
  Eigen::VectorXd control_coefs;      // coefficients of the partialled block
};

namespace detail {

// Per-cluster score accumulation for the sandwich middle matrix:
// sum_g (B_g' r_g)(B_g' r_g)'.  Groups are reduced in ascending id order.
inline Eigen::MatrixXd cluster_meat(const Eigen::MatrixXd& B,
                                    const Eigen::VectorXd& r,
                                    const ClusterIndex& idx) {
  const Eigen::Index m = B.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd s(m);
  for (int g = 0; g < idx.n_groups(); ++g) {
    s.setZero();
    for (int i : idx.members(g)) s += B.row(i).transpose() * r[i];
    meat.noalias() += s * s.transpose();
  }
  return meat;
}

}  // namespace detail

/// Cluster-robust sandwich covariance of a just-identified 2SLS fit.
///
/// Computes (V'P_W V)^-1 (V'P_W Omega P_W V) (V'P_W V)^-1 with the block
/// diagonal Omega = diag(r_[g] r_[g]') implied by per-cluster score sums;
/// neither P_W nor Omega is materialized. No degrees-of-freedom correction.
inline Eigen::MatrixXd crse_from_parts(const Eigen::MatrixXd& V,
                                       const Eigen::MatrixXd& W,
                                       const Eigen::VectorXd& residuals,
                                       const ClusterIndex& idx) {
  const Eigen::Index n = V.rows();
  const Eigen::Index m = V.cols();
  if (W.rows() != n || W.cols() != m)
    throw DimensionMismatch("crse_from_parts: V and W must be N x m");
  if (residuals.size() != n)
    throw DimensionMismatch("crse_from_parts: residuals length != N");

  // B = P_W V via a thin QR of W.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrw(W);
  if (qrw.rank() < m)
    throw RankDeficient("crse_from_parts: W'W singular");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  Eigen::MatrixXd B = Q * (Q.transpose() * V);

  Eigen::MatrixXd bread = B.transpose() * V;  // V' P_W V (symmetric)
  Eigen::MatrixXd meat = detail::cluster_meat(B, residuals, idx);
  Eigen::MatrixXd bread_inv =
      bread.fullPivLu().solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd cov = bread_inv * meat * bread_inv.transpose();
  return 0.5 * (cov + cov.transpose());  // symmetrize roundoff
}

/// Just-identified 2SLS of u on V instrumented by W, with cluster-robust
/// covariance per the sandwich above.
inline TslsFit tsls_fit(const Eigen::VectorXd& u, const Eigen::MatrixXd& V,
                        const Eigen::MatrixXd& W, const ClusterIndex& idx) {
  const Eigen::Index n = V.rows();
  const Eigen::Index m = V.cols();
  if (u.size() != n) throw DimensionMismatch("tsls_fit: len(u) != rows(V)");
  if (W.rows() != n || W.cols() != m)
    throw DimensionMismatch("tsls_fit: W and V must have the same shape");
  if (idx.n_units() != n)
    throw DimensionMismatch("tsls_fit: cluster index size != N");

  // Identification check on N^-1 W'V, relative to column scales.
  Eigen::MatrixXd WtV = W.transpose() * V / static_cast<double>(n);
  double scale = 1.0;
  for (Eigen::Index j = 0; j < m; ++j)
    scale *= std::max(W.col(j).norm(), 1.0) * std::max(V.col(j).norm(), 1.0) /
             static_cast<double>(n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(WtV);
  double det_proxy = std::abs(lu.matrixLU().diagonal().prod());
  if (!lu.isInvertible() || det_proxy < kTolIdent * (scale + 1e-300))
    throw WeakIdentification("tsls_fit: N^-1 W'V numerically singular");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qrw(W);
  if (qrw.rank() < m) throw RankDeficient("tsls_fit: W'W singular");

  TslsFit fit;
  fit.coefficients = lu.solve(W.transpose() * u / static_cast<double>(n));
  fit.residuals = u - V * fit.coefficients;
  fit.n_clusters = idx.n_groups();
  fit.crse_cov = crse_from_parts(V, W, fit.residuals, idx);

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  Eigen::MatrixXd QtV = Q.transpose() * V;
  fit.instrumented_gram = QtV.transpose() * QtV;
  return fit;
}

/// Scalar FWL reduction: residualize (u, d*, z*) on the control block Wc,
/// then tau = S_{ZY|W}/S_{ZD|W} with the per-cluster score CRSE. Residuals
/// equal those of the full 2SLS with Wc included. Wc may have zero columns.
inline ScalarIvFit fwl_scalar_fit(const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& d_star,
                                  const Eigen::VectorXd& z_star,
                                  const Eigen::MatrixXd& Wc,
                                  const ClusterIndex& idx) {
  const Eigen::Index n = u.size();
  if (d_star.size() != n || z_star.size() != n)
    throw DimensionMismatch("fwl_scalar_fit: input lengths differ");
  if (Wc.cols() > 0 && Wc.rows() != n)
    throw DimensionMismatch("fwl_scalar_fit: rows(Wc) != N");

  Eigen::VectorXd u_r = u, d_r = d_star, z_r = z_star;
  if (Wc.cols() > 0) {
    auto su = ols_fit(Wc, u);
    auto sd = ols_fit(Wc, d_star);
    auto sz = ols_fit(Wc, z_star);
    if (!su.rank_ok || !sd.rank_ok || !sz.rank_ok)
      throw RankDeficient("fwl_scalar_fit: control block rank-deficient");
    u_r = su.residuals;
    d_r = sd.residuals;
    z_r = sz.residuals;
  }

  ScalarIvFit fit;
  const double inv_n = 1.0 / static_cast<double>(n);
  fit.s_zd = z_r.dot(d_r) * inv_n;
  fit.s_zy = z_r.dot(u_r) * inv_n;

  const double scale =
      (z_r.norm() * inv_n) * (d_r.norm() * inv_n) * static_cast<double>(n);
  if (std::abs(fit.s_zd) < kTolIdent * (scale + 1e-300))
    throw WeakIdentification(
        "fwl_scalar_fit: instrument-treatment cross moment ~ 0");

  fit.tau_hat = fit.s_zy / fit.s_zd;
  fit.residuals = u_r - d_r * fit.tau_hat;

  fit.per_cluster_scores.resize(idx.n_groups());
  double ss = 0.0;
  for (int g = 0; g < idx.n_groups(); ++g) {
    double s = 0.0;
    for (int i : idx.members(g)) s += z_r[i] * fit.residuals[i];
    fit.per_cluster_scores[g] = s;
    ss += s * s;
  }
  fit.se = std::sqrt(ss) * inv_n / std::abs(fit.s_zd);

  // Control coefficients recovered from the estimating equation
  // Wc'(u - d tau - Wc gamma) = 0.
  if (Wc.cols() > 0)
    fit.control_coefs = ols_fit(Wc, u - d_star * fit.tau_hat).coefficients;
  else
    fit.control_coefs.resize(0);
  return fit;
}

}  // namespace clusteriv
