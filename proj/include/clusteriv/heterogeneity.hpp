#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "clusteriv/estimators.hpp"
#include "clusteriv/rng.hpp"

namespace clusteriv {

/// Two-sided standard normal p-value.
inline double normal_two_sided_p(double t) {
  return std::erfc(std::abs(t) / std::sqrt(2.0));
}

struct JointHetResult {
  double tau_ls = 0.0;
  double tau_fe = 0.0;
  Eigen::Matrix2d cov2 = Eigen::Matrix2d::Zero();
  double se_diff = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
  bool reject_05 = false;
  std::string method = "analytic";
  int bootstrap_reps = 0;
};

/// Joint cluster-robust covariance of (tau_2sls, tau_2sfe) and the
/// heterogeneity t-statistic. The off-diagonal pairs the normalized
/// per-cluster scores of the two fits; se_diff uses the single-sum
/// squared-difference form, which is algebraically identical to
/// se_ls^2 + se_fe^2 - 2*cov.
inline JointHetResult joint_cov(const Dataset& data) {
  FitResult ls = fit_canonical_2sls(data);
  FitResult fe = fit_2sfe(data);
  const double n = static_cast<double>(data.n_units());
  const int G = data.n_clusters();

  JointHetResult out;
  out.tau_ls = ls.tau_hat;
  out.tau_fe = fe.tau_hat;

  double c01 = 0.0, sdiff2 = 0.0;
  for (int g = 0; g < G; ++g) {
    const double a = ls.per_cluster_scores[g] / ls.s_zd;
    const double b = fe.per_cluster_scores[g] / fe.s_zd;
    c01 += a * b;
    sdiff2 += (a - b) * (a - b);
  }
  c01 /= n * n;
  sdiff2 /= n * n;

  out.cov2(0, 0) = ls.se * ls.se;
  out.cov2(1, 1) = fe.se * fe.se;
  out.cov2(0, 1) = out.cov2(1, 0) = c01;
  out.se_diff = std::sqrt(sdiff2);
  if (out.se_diff == 0.0)
    throw NonPositiveSeDiff("joint_cov: se_diff is exactly zero");
  out.t_stat = (out.tau_ls - out.tau_fe) / out.se_diff;
  out.p_value = normal_two_sided_p(out.t_stat);
  out.reject_05 = std::abs(out.t_stat) > kCritical95;
  return out;
}

/// Cluster-heterogeneity test: |t| > 1.96 rejects homogeneity at 5%.
inline JointHetResult hettest(const Dataset& data) { return joint_cov(data); }

struct BootstrapResult {
  std::vector<double> tau_ls;    // one entry per valid replicate
  std::vector<double> tau_fe;
  std::vector<double> diff;
  double se_diff_boot = 0.0;     // empirical sd of diff
  int n_requested = 0;
  int n_excluded = 0;            // degenerate replicates
  std::uint64_t seed = 0;
};

namespace detail {

inline Dataset resample_clusters(const Dataset& data, std::mt19937_64& rng) {
  const int G = data.n_clusters();
  std::uniform_int_distribution<int> pick(0, G - 1);
  std::vector<int> rows;
  std::vector<std::string> labels;
  rows.reserve(data.n_units());
  for (int b = 0; b < G; ++b) {
    const int g = pick(rng);
    // repeated draws of the same cluster become distinct groups
    for (int i : data.idx.members(g)) {
      rows.push_back(i);
      labels.push_back("b" + std::to_string(b));
    }
  }
  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.y.resize(n);
  out.d.resize(n);
  out.z.resize(n);
  if (data.x.cols() > 0) out.x.resize(n, data.x.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    out.y[k] = data.y[rows[k]];
    out.d[k] = data.d[rows[k]];
    out.z[k] = data.z[rows[k]];
    if (data.x.cols() > 0) out.x.row(k) = data.x.row(rows[k]);
  }
  out.covariate_names = data.covariate_names;
  out.idx = ClusterIndex::from_labels(labels);
  return out;
}

}  // namespace detail

/// Pairs-cluster bootstrap of (tau_2sls, tau_2sfe): resamples G whole
/// clusters with replacement per replicate. Replicate b draws from
/// substream(seed, b), so output is a pure function of (data, B, seed).
/// Degenerate replicates are excluded and counted; more than 20% failures
/// is an error.
inline BootstrapResult cluster_bootstrap(const Dataset& data, int B,
                                         std::uint64_t seed) {
  if (B < 1) throw Error("cluster_bootstrap: B must be >= 1");
  if (data.n_clusters() < 2)
    throw Error("cluster_bootstrap: need at least 2 clusters");
  BootstrapResult out;
  out.n_requested = B;
  out.seed = seed;
  for (int b = 0; b < B; ++b) {
    auto rng = substream(seed, static_cast<std::uint64_t>(b));
    Dataset rep = detail::resample_clusters(data, rng);
    try {
      FitResult ls = fit_canonical_2sls(rep);
      FitResult fe = fit_2sfe(rep);
      out.tau_ls.push_back(ls.tau_hat);
      out.tau_fe.push_back(fe.tau_hat);
      out.diff.push_back(ls.tau_hat - fe.tau_hat);
    } catch (const Error&) {
      ++out.n_excluded;
    }
  }
  if (B >= 100 && out.n_excluded > B / 5)
    throw TooFewValidReplicates(
        "cluster_bootstrap: " + std::to_string(out.n_excluded) + " of " +
        std::to_string(B) + " replicates degenerate");
  const auto m = out.diff.size();
  if (m >= 2) {
    double mean = 0.0;
    for (double v : out.diff) mean += v;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : out.diff) ss += (v - mean) * (v - mean);
    out.se_diff_boot = std::sqrt(ss / static_cast<double>(m - 1));
  }
  return out;
}

}  // namespace clusteriv
