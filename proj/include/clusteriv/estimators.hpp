#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clusteriv/cluster_index.hpp"
#include "clusteriv/errors.hpp"
#include "clusteriv/iv.hpp"
#include "clusteriv/regress.hpp"

namespace clusteriv {

inline constexpr double kCritical95 = 1.96;

struct Dataset {
  Eigen::VectorXd y;  // outcome
  Eigen::VectorXd d;  // binary treatment
  Eigen::VectorXd z;  // binary instrument
  Eigen::MatrixXd x;  // covariates, N x p (p may be 0)
  std::vector<std::string> covariate_names;
  ClusterIndex idx;

  int n_units() const { return static_cast<int>(y.size()); }
  int n_clusters() const { return idx.n_groups(); }

  void validate() const {
    const auto n = y.size();
    if (d.size() != n || z.size() != n || idx.n_units() != n ||
        (x.cols() > 0 && x.rows() != n))
      throw DimensionMismatch("Dataset: column lengths differ");
    if (!y.allFinite()) throw Error("Dataset: non-finite outcome");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d[i] != 0.0 && d[i] != 1.0)
        throw NonBinaryColumn("Dataset: treatment not in {0,1} at row " +
                              std::to_string(i));
      if (z[i] != 0.0 && z[i] != 1.0)
        throw NonBinaryColumn("Dataset: instrument not in {0,1} at row " +
                              std::to_string(i));
    }
  }
};

struct FitResult {
  std::string strategy;
  double tau_hat = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;
  Eigen::VectorXd residuals;
  Eigen::VectorXd per_cluster_scores;
  double s_zd = 0.0;  // partialled instrument-treatment cross moment
  int n_units = 0;
  int n_clusters = 0;
  // clusters where the working instrument varies (fe-family diagnostics)
  int n_within_varying_clusters = 0;
};

// Table-ordered strategy tags.
inline const std::vector<std::string>& strategy_tags() {
  static const std::vector<std::string> tags = {
      "2sls", "2sfe", "2sls-x", "2sfe-x", "ols", "fe", "ols-x", "fe-x"};
  return tags;
}

namespace detail {

inline int count_within_varying(const Eigen::VectorXd& zc,
                                const ClusterIndex& idx, double tol) {
  int count = 0;
  for (int g = 0; g < idx.n_groups(); ++g) {
    for (int i : idx.members(g)) {
      if (std::abs(zc[i]) > tol) {
        ++count;
        break;
      }
    }
  }
  return count;
}

inline FitResult finalize(const std::string& strategy, const ScalarIvFit& f,
                          const Dataset& data, int n_within_varying) {
  FitResult r;
  r.strategy = strategy;
  r.tau_hat = f.tau_hat;
  r.se = f.se;
  r.ci_low = f.tau_hat - kCritical95 * f.se;
  r.ci_high = f.tau_hat + kCritical95 * f.se;
  r.residuals = f.residuals;
  r.per_cluster_scores = f.per_cluster_scores;
  r.s_zd = f.s_zd;
  r.n_units = data.n_units();
  r.n_clusters = data.n_clusters();
  r.n_within_varying_clusters = n_within_varying;
  r.coefficients.emplace_back("tau", f.tau_hat);
  return r;
}

// Drop (or reject) covariate columns that the within transformation
// annihilates. Returns kept column indices.
inline std::vector<int> check_centered_covariates(const Eigen::MatrixXd& xc,
                                                  const Eigen::MatrixXd& x,
                                                  const Dataset& data,
                                                  bool throw_on_constant) {
  std::vector<int> kept;
  std::string offending;
  for (Eigen::Index j = 0; j < xc.cols(); ++j) {
    const double tol = 1e-10 * (1.0 + x.col(j).lpNorm<Eigen::Infinity>());
    if (xc.col(j).lpNorm<Eigen::Infinity>() < tol) {
      if (!offending.empty()) offending += ", ";
      offending += j < static_cast<Eigen::Index>(data.covariate_names.size())
                       ? data.covariate_names[j]
                       : "x" + std::to_string(j);
    } else {
      kept.push_back(static_cast<int>(j));
    }
  }
  if (!offending.empty() && throw_on_constant)
    throw ClusterConstantCovariate(
        "cluster-constant covariate(s) inadmissible under fixed effects: " +
        offending);
  return kept;
}

}  // namespace detail

/// Canonical 2SLS: 2sls(y ~ 1 + d | 1 + z); tau = S_ZY/S_ZD.
inline FitResult fit_canonical_2sls(const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& d,
                                    const Eigen::VectorXd& z,
                                    const Dataset& data,
                                    const std::string& tag) {
  const Eigen::Index n = y.size();
  if ((z.array() == z[0]).all())
    throw DegenerateInstrument(tag + ": instrument has no variation");
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
  ScalarIvFit f = fwl_scalar_fit(y, d, z, ones, data.idx);
  FitResult r = detail::finalize(tag, f, data, data.n_clusters());
  r.coefficients.clear();
  r.coefficients.emplace_back("(intercept)", f.control_coefs[0]);
  r.coefficients.emplace_back("tau", f.tau_hat);
  return r;
}

inline FitResult fit_canonical_2sls(const Dataset& data) {
  return fit_canonical_2sls(data.y, data.d, data.z, data, "2sls");
}

/// 2SFE via the cluster-centering route: tau = S_{ZY,in}/S_{ZD,in}.
inline FitResult fit_2sfe(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const Eigen::VectorXd& z, const Dataset& data,
                          const std::string& tag) {
  Eigen::VectorXd yc = center_by_cluster(y, data.idx);
  Eigen::VectorXd dc = center_by_cluster(d, data.idx);
  Eigen::VectorXd zc = center_by_cluster(z, data.idx);
  const double ztol = 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>());
  const int varying = detail::count_within_varying(zc, data.idx, ztol);
  if (varying == 0)
    throw DegenerateWithinVariation(
        tag + ": instrument constant within every cluster");
  ScalarIvFit f =
      fwl_scalar_fit(yc, dc, zc, Eigen::MatrixXd(data.n_units(), 0), data.idx);
  return detail::finalize(tag, f, data, varying);
}

inline FitResult fit_2sfe(const Dataset& data) {
  return fit_2sfe(data.y, data.d, data.z, data, "2sfe");
}

/// Covariate-adjusted canonical 2SLS: partial out (1, X) from (y, d, z).
inline FitResult fit_2sls_x(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                            const Eigen::VectorXd& z, const Dataset& data,
                            const std::string& tag) {
  if (data.x.cols() == 0)
    return fit_canonical_2sls(y, d, z, data, tag);
  const Eigen::Index n = y.size();
  if ((z.array() == z[0]).all())
    throw DegenerateInstrument(tag + ": instrument has no variation");
  Eigen::MatrixXd Wc(n, 1 + data.x.cols());
  Wc.col(0).setOnes();
  Wc.rightCols(data.x.cols()) = data.x;
  ScalarIvFit f = fwl_scalar_fit(y, d, z, Wc, data.idx);
  FitResult r = detail::finalize(tag, f, data, data.n_clusters());
  r.coefficients.clear();
  r.coefficients.emplace_back("(intercept)", f.control_coefs[0]);
  r.coefficients.emplace_back("tau", f.tau_hat);
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    std::string name =
        j < static_cast<Eigen::Index>(data.covariate_names.size())
            ? data.covariate_names[j]
            : "x" + std::to_string(j);
    r.coefficients.emplace_back(name, f.control_coefs[1 + j]);
  }
  return r;
}

inline FitResult fit_2sls_x(const Dataset& data) {
  return fit_2sls_x(data.y, data.d, data.z, data, "2sls-x");
}

/// Covariate-adjusted 2SFE: cluster-center everything, then partial the
/// centered covariates out of the centered (y, d, z). Cluster-constant
/// covariates are rejected by name.
inline FitResult fit_2sfe_x(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                            const Eigen::VectorXd& z, const Dataset& data,
                            const std::string& tag) {
  if (data.x.cols() == 0) return fit_2sfe(y, d, z, data, tag);
  Eigen::VectorXd yc = center_by_cluster(y, data.idx);
  Eigen::VectorXd dc = center_by_cluster(d, data.idx);
  Eigen::VectorXd zc = center_by_cluster(z, data.idx);
  Eigen::MatrixXd xc = center_by_cluster(data.x, data.idx);
  detail::check_centered_covariates(xc, data.x, data, true);
  const double ztol = 1e-12 * (1.0 + z.lpNorm<Eigen::Infinity>());
  const int varying = detail::count_within_varying(zc, data.idx, ztol);
  if (varying == 0)
    throw DegenerateWithinVariation(
        tag + ": instrument constant within every cluster");
  ScalarIvFit f = fwl_scalar_fit(yc, dc, zc, xc, data.idx);
  FitResult r = detail::finalize(tag, f, data, varying);
  r.coefficients.clear();
  r.coefficients.emplace_back("tau", f.tau_hat);
  for (Eigen::Index j = 0; j < xc.cols(); ++j) {
    std::string name =
        j < static_cast<Eigen::Index>(data.covariate_names.size())
            ? data.covariate_names[j]
            : "x" + std::to_string(j);
    r.coefficients.emplace_back(name, f.control_coefs[j]);
  }
  return r;
}

inline FitResult fit_2sfe_x(const Dataset& data) {
  return fit_2sfe_x(data.y, data.d, data.z, data, "2sfe-x");
}

/// OLS counterparts: identical structure with the treatment as its own
/// instrument.
inline FitResult fit_strategy(const Dataset& data, const std::string& tag) {
  if (tag == "2sls") return fit_canonical_2sls(data);
  if (tag == "2sfe") return fit_2sfe(data);
  if (tag == "2sls-x") return fit_2sls_x(data);
  if (tag == "2sfe-x") return fit_2sfe_x(data);
  if (tag == "ols")
    return fit_canonical_2sls(data.y, data.d, data.d, data, tag);
  if (tag == "fe") return fit_2sfe(data.y, data.d, data.d, data, tag);
  if (tag == "ols-x") return fit_2sls_x(data.y, data.d, data.d, data, tag);
  if (tag == "fe-x") return fit_2sfe_x(data.y, data.d, data.d, data, tag);
  throw Error("unknown strategy: " + tag);
}

struct StrategyOutcome {
  std::string strategy;
  std::optional<FitResult> fit;
  std::string error;  // non-empty when the strategy failed
};

/// Run every strategy; per-strategy failures are recorded, not fatal.
inline std::vector<StrategyOutcome> fit_all(const Dataset& data) {
  std::vector<StrategyOutcome> out;
  for (const auto& tag : strategy_tags()) {
    StrategyOutcome o;
    o.strategy = tag;
    try {
      o.fit = fit_strategy(data, tag);
    } catch (const Error& e) {
      o.error = e.what();
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace clusteriv
