#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "clusteriv/cluster_index.hpp"
#include "clusteriv/errors.hpp"

namespace clusteriv {

/// Scale-aware orthogonality tolerance: 1e-8 * (1 + ||y||_inf).
inline double tol_orth(const Eigen::VectorXd& y) {
  return 1e-8 * (1.0 + y.lpNorm<Eigen::Infinity>());
}

struct LeastSquaresSolution {
  Eigen::VectorXd coefficients;  // length p
  Eigen::VectorXd residuals;     // length N
  bool rank_ok = true;
  double gram_condition = 0.0;   // |R(0,0)/R(p-1,p-1)| from the pivoted QR
};

/// Minimum-norm least squares via column-pivoted Householder QR.
///
/// Singular directions (pivoted R diagonal below max(N,p)*eps*|R(0,0)|) are
/// flagged through rank_ok rather than thrown; callers that need a hard
/// failure check the flag.
inline LeastSquaresSolution ols_fit(const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n)
    throw DimensionMismatch("ols_fit: len(y)=" + std::to_string(y.size()) +
                            " != rows(X)=" + std::to_string(n));
  if (n < p || p < 1)
    throw DimensionMismatch("ols_fit: need N >= p >= 1");
  if (!X.allFinite() || !y.allFinite())
    throw Error("ols_fit: non-finite entries in input");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  const double rmax = std::abs(qr.matrixR()(0, 0));
  const double thresh =
      static_cast<double>(std::max(n, p)) *
      std::numeric_limits<double>::epsilon() * rmax;
  qr.setThreshold(rmax > 0 ? thresh / rmax : 0.0);

  LeastSquaresSolution out;
  out.rank_ok = (qr.rank() == p);
  out.coefficients = qr.solve(y);
  out.residuals = y - X * out.coefficients;
  const double rmin = std::abs(qr.matrixR()(p - 1, p - 1));
  out.gram_condition = rmin > 0 ? rmax / rmin
                                : std::numeric_limits<double>::infinity();
  return out;
}

/// Per-group means of v, group order 0..G-1.
inline Eigen::VectorXd cluster_means(const Eigen::VectorXd& v,
                                     const ClusterIndex& idx) {
  if (v.size() != idx.n_units())
    throw DimensionMismatch("cluster_means: vector length != N");
  Eigen::VectorXd m(idx.n_groups());
  for (int g = 0; g < idx.n_groups(); ++g) {
    double s = 0.0;
    for (int i : idx.members(g)) s += v[i];
    m[g] = s / idx.size(g);
  }
  return m;
}

/// Subtract each unit's cluster mean. Singleton clusters center to zero.
inline Eigen::VectorXd center_by_cluster(const Eigen::VectorXd& v,
                                         const ClusterIndex& idx) {
  const Eigen::VectorXd m = cluster_means(v, idx);
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = v[i] - m[idx.group_of(static_cast<int>(i))];
  return out;
}

inline Eigen::MatrixXd center_by_cluster(const Eigen::MatrixXd& v,
                                         const ClusterIndex& idx) {
  if (v.rows() != idx.n_units())
    throw DimensionMismatch("center_by_cluster: row count != N");
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    out.col(c) = center_by_cluster(Eigen::VectorXd(v.col(c)), idx);
  return out;
}

}  // namespace clusteriv
