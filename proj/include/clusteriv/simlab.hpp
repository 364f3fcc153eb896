#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "clusteriv/diagnostics.hpp"
#include "clusteriv/estimators.hpp"
#include "clusteriv/heterogeneity.hpp"
#include "clusteriv/rng.hpp"

namespace clusteriv {

// ---------------------------------------------------------------------------
// Configurations

struct HomogeneousSimConfig {
  int n_clusters = 200;
  double cluster_size_mean = 10.0;  // Poisson mean, zero-truncated
  double e_low = 0.4, e_high = 0.6;
  double pi_a = 0.3, pi_c = 0.5, pi_n = 0.2;
  double sigma_x = 1.0;
  double sigma_eta = 1.0;
  double mu_a = 2.0, mu_c = 0.0, mu_n = -3.0;
  double tau = 1.0;

  void validate() const {
    if (std::abs(pi_a + pi_c + pi_n - 1.0) > 1e-12)
      throw Error("HomogeneousSimConfig: compliance probs must sum to 1");
    if (sigma_x < 0 || sigma_eta < 0 || n_clusters < 2)
      throw Error("HomogeneousSimConfig: invalid parameter");
  }

  // marginal variance of the type-mean mixture plus unit noise
  double mixture_eps_variance() const {
    const double m = pi_a * mu_a + pi_c * mu_c + pi_n * mu_n;
    const double m2 = pi_a * mu_a * mu_a + pi_c * mu_c * mu_c +
                      pi_n * mu_n * mu_n;
    return 1.0 + m2 - m * m;
  }
};

struct HeteroSimConfig {
  int n_clusters = 100;   // first half type 1, second half type 2
  int cluster_size = 20;
  double delta = 0.0;     // cluster effect of type-2 clusters
  double pi_c = 0.7;
  double pi_n = 0.3;
  double tau = 0.0;       // common effect (type 1 when tau_type2 is set)
  double tau_type2 = 0.0; // extra effect of D_i in type-2 clusters
  bool override_equal_e = false;  // force e_g = 0.5 in every cluster

  double e_g(int g) const {
    if (override_equal_e) return 0.5;
    const double alpha = (g >= n_clusters / 2) ? delta : 0.0;
    return 1.0 / (1.0 + std::exp(-0.5 * alpha));
  }
  double alpha_g(int g) const { return (g >= n_clusters / 2) ? delta : 0.0; }
  double tau_c_g(int g) const {
    return tau + ((g >= n_clusters / 2) ? tau_type2 : 0.0);
  }
};

// Latent truth alongside a generated dataset, for oracle checks.
struct LatentRecord {
  std::vector<int> unit_type;        // 0 = always, 1 = complier, 2 = never
  Eigen::VectorXd alpha;             // per cluster
  Eigen::VectorXd e;                 // per cluster
  double tau = 0.0;
  double sigma_alpha2 = 0.0;
  double eps_conditional_variance = 1.0;
  double eps_mixture_variance = 0.0;  // computed from the type mixture
};

// ---------------------------------------------------------------------------
// Data-generating processes

/// Homogeneous-cluster DGP: zero-truncated Poisson sizes, cluster IV
/// propensities e_g ~ U(e_low, e_high), multinomial compliance types,
/// Y = D tau + X*_g + X'_i + alpha_g + eps_i with alpha_g = X*_g + eta_g.
inline Dataset gen_homogeneous(const HomogeneousSimConfig& cfg,
                               std::uint64_t seed,
                               LatentRecord* latent = nullptr,
                               std::uint64_t stream = 0) {
  cfg.validate();
  auto rng = substream(seed, stream);
  std::poisson_distribution<int> pois(cfg.cluster_size_mean);
  std::uniform_real_distribution<double> unif_e(cfg.e_low, cfg.e_high);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::normal_distribution<double> stdnorm(0.0, 1.0);

  const int G = cfg.n_clusters;
  std::vector<int> sizes(G);
  int n = 0;
  for (int g = 0; g < G; ++g) {
    int ng = 0;
    while (ng < 1) ng = pois(rng);  // zero-truncation by rejection
    sizes[g] = ng;
    n += ng;
  }

  Eigen::VectorXd e(G), xstar(G), alpha(G);
  for (int g = 0; g < G; ++g) e[g] = unif_e(rng);
  for (int g = 0; g < G; ++g) xstar[g] = cfg.sigma_x * stdnorm(rng);
  for (int g = 0; g < G; ++g) alpha[g] = xstar[g] + cfg.sigma_eta * stdnorm(rng);

  Dataset data;
  data.y.resize(n);
  data.d.resize(n);
  data.z.resize(n);
  data.x.resize(n, 2);
  data.covariate_names = {"x_cluster", "x_unit"};
  std::vector<std::string> labels(n);
  std::vector<int> types(n);

  int i = 0;
  for (int g = 0; g < G; ++g) {
    for (int j = 0; j < sizes[g]; ++j, ++i) {
      const double uu = unif01(rng);
      const int type = uu < cfg.pi_a ? 0 : (uu < cfg.pi_a + cfg.pi_c ? 1 : 2);
      types[i] = type;
      const double zi = unif01(rng) < e[g] ? 1.0 : 0.0;
      const double di = (type == 0) ? 1.0 : (type == 1 ? zi : 0.0);
      const double mu = type == 0 ? cfg.mu_a : (type == 1 ? cfg.mu_c : cfg.mu_n);
      const double xi = stdnorm(rng);
      const double eps = mu + stdnorm(rng);
      data.z[i] = zi;
      data.d[i] = di;
      data.x(i, 0) = xstar[g];
      data.x(i, 1) = xi;
      data.y[i] = di * cfg.tau + xstar[g] + xi + alpha[g] + eps;
      labels[i] = std::to_string(g);
    }
  }
  data.idx = ClusterIndex::from_labels(labels);

  if (latent) {
    latent->unit_type = std::move(types);
    latent->alpha = alpha;
    latent->e = e;
    latent->tau = cfg.tau;
    latent->sigma_alpha2 = cfg.sigma_x * cfg.sigma_x +
                           cfg.sigma_eta * cfg.sigma_eta;
    latent->eps_conditional_variance = 1.0;
    latent->eps_mixture_variance = cfg.mixture_eps_variance();
  }
  return data;
}

/// Two-type heterogeneous-cluster DGP: alpha_g = delta for the second half
/// of the clusters, e_g = logistic(0.5 alpha_g), D = Z 1{complier},
/// Y = alpha_g + eps + D * tau_c(g).
inline Dataset gen_heterogeneous(const HeteroSimConfig& cfg,
                                 std::uint64_t seed,
                                 LatentRecord* latent = nullptr,
                                 std::uint64_t stream = 0) {
  auto rng = substream(seed, stream);
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::normal_distribution<double> stdnorm(0.0, 1.0);

  const int G = cfg.n_clusters;
  const int ng = cfg.cluster_size;
  const int n = G * ng;
  Dataset data;
  data.y.resize(n);
  data.d.resize(n);
  data.z.resize(n);
  std::vector<std::string> labels(n);
  std::vector<int> types(n);
  Eigen::VectorXd alpha(G), e(G);

  int i = 0;
  for (int g = 0; g < G; ++g) {
    alpha[g] = cfg.alpha_g(g);
    e[g] = cfg.e_g(g);
    const double tau_g = cfg.tau_c_g(g);
    for (int j = 0; j < ng; ++j, ++i) {
      const int type = unif01(rng) < cfg.pi_c ? 1 : 2;  // complier or never
      types[i] = type;
      const double zi = unif01(rng) < e[g] ? 1.0 : 0.0;
      const double di = (type == 1) ? zi : 0.0;
      data.z[i] = zi;
      data.d[i] = di;
      data.y[i] = alpha[g] + stdnorm(rng) + di * tau_g;
      labels[i] = std::to_string(g);
    }
  }
  data.idx = ClusterIndex::from_labels(labels);
  if (latent) {
    latent->unit_type = std::move(types);
    latent->alpha = alpha;
    latent->e = e;
    latent->tau = cfg.tau;
  }
  return data;
}

// ---------------------------------------------------------------------------
// Monte Carlo drivers

namespace detail {

/// Deterministic replicate map: results are stored by replicate index, so
/// aggregation is independent of the number of worker threads.
template <typename T, typename Fn>
std::vector<T> run_replicates(int n_reps, int n_threads, Fn&& fn) {
  std::vector<T> out(n_reps);
  if (n_threads <= 1) {
    for (int r = 0; r < n_reps; ++r) out[r] = fn(r);
    return out;
  }
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&] {
      int r;
      while ((r = next.fetch_add(1)) < n_reps) out[r] = fn(r);
    });
  }
  for (auto& w : workers) w.join();
  return out;
}

}  // namespace detail

struct StrategySummary {
  double mse = 0.0;
  double coverage = 0.0;
  double coverage_mc_se = 0.0;
  double mean_ci_length = 0.0;
  double mean_tau = 0.0;
};

struct Table2Summary {
  std::map<std::string, StrategySummary> by_strategy;  // four 2sls strategies
  int n_reps = 0;
  int n_failed_reps = 0;
  std::uint64_t seed = 0;
  double sigma_x = 0.0, sigma_eta = 0.0, tau = 1.0;
};

/// MSE / coverage / CI-length study over the homogeneous DGP. The -x
/// strategies follow the table convention: 2sls-x adjusts for both the
/// cluster-level and unit-level covariates, 2sfe-x for the unit-level one
/// only.
inline Table2Summary run_table2(const HomogeneousSimConfig& cfg, int n_reps,
                                std::uint64_t seed, int n_threads = 1) {
  struct RepRow {
    bool ok = false;
    double tau[4] = {0, 0, 0, 0};
    double lo[4] = {0, 0, 0, 0};
    double hi[4] = {0, 0, 0, 0};
  };
  const std::vector<std::string> tags = {"2sls", "2sfe", "2sls-x", "2sfe-x"};

  auto rows = detail::run_replicates<RepRow>(n_reps, n_threads, [&](int r) {
    RepRow row;
    // replicate r draws from substream (seed, r+1)
    Dataset base = gen_homogeneous(cfg, seed, nullptr,
                                   static_cast<std::uint64_t>(r) + 1);
    try {
      Dataset d_full = base;  // both covariate columns
      Dataset d_unit = base;  // unit-level covariate only
      d_unit.x = base.x.col(1);
      d_unit.covariate_names = {"x_unit"};
      FitResult f0 = fit_canonical_2sls(base);
      FitResult f1 = fit_2sfe(base);
      FitResult f2 = fit_2sls_x(d_full);
      FitResult f3 = fit_2sfe_x(d_unit);
      const FitResult* fs[4] = {&f0, &f1, &f2, &f3};
      for (int k = 0; k < 4; ++k) {
        row.tau[k] = fs[k]->tau_hat;
        row.lo[k] = fs[k]->ci_low;
        row.hi[k] = fs[k]->ci_high;
      }
      row.ok = true;
    } catch (const Error&) {
      row.ok = false;
    }
    return row;
  });

  Table2Summary out;
  out.n_reps = n_reps;
  out.seed = seed;
  out.sigma_x = cfg.sigma_x;
  out.sigma_eta = cfg.sigma_eta;
  out.tau = cfg.tau;
  int ok = 0;
  std::vector<StrategySummary> acc(4);
  for (const auto& row : rows) {
    if (!row.ok) continue;
    ++ok;
    for (int k = 0; k < 4; ++k) {
      const double err = row.tau[k] - cfg.tau;
      acc[k].mse += err * err;
      acc[k].mean_tau += row.tau[k];
      acc[k].mean_ci_length += row.hi[k] - row.lo[k];
      if (row.lo[k] <= cfg.tau && cfg.tau <= row.hi[k]) acc[k].coverage += 1.0;
    }
  }
  out.n_failed_reps = n_reps - ok;
  for (int k = 0; k < 4; ++k) {
    if (ok > 0) {
      acc[k].mse /= ok;
      acc[k].mean_tau /= ok;
      acc[k].mean_ci_length /= ok;
      acc[k].coverage /= ok;
      acc[k].coverage_mc_se =
          std::sqrt(acc[k].coverage * (1.0 - acc[k].coverage) / ok);
    }
    out.by_strategy[tags[k]] = acc[k];
  }
  return out;
}

struct HettestSummary {
  double mean_tau_ls = 0.0;
  double mean_tau_fe = 0.0;
  double mean_t = 0.0;
  double rejection_rate = 0.0;
  double rejection_mc_se = 0.0;
  std::vector<double> t_values;       // per replicate, ordered
  std::vector<double> hist_edges;     // length n_bins + 1
  std::vector<int> hist_counts;       // length n_bins
  int n_reps = 0;
  int n_failed_reps = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;
};

/// Heterogeneity-test power study over the two-type DGP.
inline HettestSummary run_hettest_mc(const HeteroSimConfig& cfg, int n_reps,
                                     std::uint64_t seed, int n_threads = 1) {
  struct RepRow {
    bool ok = false;
    double t = 0.0, tau_ls = 0.0, tau_fe = 0.0;
  };
  auto rows = detail::run_replicates<RepRow>(n_reps, n_threads, [&](int r) {
    RepRow row;
    Dataset data = gen_heterogeneous(cfg, seed, nullptr,
                                     static_cast<std::uint64_t>(r) + 1);
    try {
      JointHetResult h = hettest(data);
      row.t = h.t_stat;
      row.tau_ls = h.tau_ls;
      row.tau_fe = h.tau_fe;
      row.ok = true;
    } catch (const Error&) {
    }
    return row;
  });

  HettestSummary out;
  out.n_reps = n_reps;
  out.seed = seed;
  out.delta = cfg.delta;
  int ok = 0;
  for (const auto& row : rows) {
    if (!row.ok) continue;
    ++ok;
    out.t_values.push_back(row.t);
    out.mean_t += row.t;
    out.mean_tau_ls += row.tau_ls;
    out.mean_tau_fe += row.tau_fe;
    if (std::abs(row.t) > kCritical95) out.rejection_rate += 1.0;
  }
  out.n_failed_reps = n_reps - ok;
  if (ok > 0) {
    out.mean_t /= ok;
    out.mean_tau_ls /= ok;
    out.mean_tau_fe /= ok;
    out.rejection_rate /= ok;
    out.rejection_mc_se =
        std::sqrt(out.rejection_rate * (1.0 - out.rejection_rate) / ok);
  }

  // histogram, 0.25-wide bins covering the observed range
  if (ok > 0) {
    double lo = *std::min_element(out.t_values.begin(), out.t_values.end());
    double hi = *std::max_element(out.t_values.begin(), out.t_values.end());
    const double width = 0.25;
    const double left = std::floor(lo / width) * width;
    const int n_bins =
        std::max(1, static_cast<int>(std::ceil((hi - left) / width + 1e-12)));
    out.hist_counts.assign(n_bins, 0);
    for (int b = 0; b <= n_bins; ++b) out.hist_edges.push_back(left + b * width);
    for (double t : out.t_values) {
      int b = static_cast<int>((t - left) / width);
      if (b >= n_bins) b = n_bins - 1;
      ++out.hist_counts[b];
    }
  }
  return out;
}

struct PlimCheck {
  double predicted_2sfe = 0.0;
  double mc_mean_2sfe = 0.0;
  double mc_se_2sfe = 0.0;
  double predicted_2sls = 0.0;  // only under equal e_g
  double mc_mean_2sls = 0.0;
  double mc_se_2sls = 0.0;
  bool has_2sls = false;
  int n_reps = 0;
};

/// Compare the weighted-LATE limits computed from known DGP parameters
/// (pi_c, phi_g = 1/n_g for independent within-cluster assignment,
/// sigma_{Z,g}^2 = e_g(1-e_g)) against Monte Carlo means of the fitted
/// estimators.
inline PlimCheck oracle_plim_check(const HeteroSimConfig& cfg, int n_reps,
                                   std::uint64_t seed, int n_threads = 1) {
  std::vector<ClusterParams> params(cfg.n_clusters);
  for (int g = 0; g < cfg.n_clusters; ++g) {
    const double eg = cfg.e_g(g);
    params[g] = {static_cast<double>(cfg.cluster_size),
                 1.0 / cfg.cluster_size, eg * (1.0 - eg), cfg.pi_c,
                 cfg.tau_c_g(g)};
  }
  HeteroWeights w = fe_weights(params, cfg.override_equal_e);

  struct RepRow {
    bool ok = false;
    double tau_ls = 0.0, tau_fe = 0.0;
  };
  auto rows = detail::run_replicates<RepRow>(n_reps, n_threads, [&](int r) {
    RepRow row;
    Dataset data = gen_heterogeneous(cfg, seed, nullptr,
                                     static_cast<std::uint64_t>(r) + 1);
    try {
      row.tau_ls = fit_canonical_2sls(data).tau_hat;
      row.tau_fe = fit_2sfe(data).tau_hat;
      row.ok = true;
    } catch (const Error&) {
    }
    return row;
  });

  PlimCheck out;
  out.predicted_2sfe = w.limit_2sfe;
  out.has_2sls = w.has_2sls;
  if (w.has_2sls) out.predicted_2sls = w.limit_2sls;
  std::vector<double> fe_vals, ls_vals;
  for (const auto& row : rows) {
    if (!row.ok) continue;
    fe_vals.push_back(row.tau_fe);
    ls_vals.push_back(row.tau_ls);
  }
  out.n_reps = static_cast<int>(fe_vals.size());
  auto mean_se = [](const std::vector<double>& v, double& mean, double& se) {
    const auto m = v.size();
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = m > 1 ? std::sqrt(ss / (static_cast<double>(m - 1) *
                                 static_cast<double>(m)))
               : 0.0;
  };
  if (!fe_vals.empty()) {
    mean_se(fe_vals, out.mc_mean_2sfe, out.mc_se_2sfe);
    mean_se(ls_vals, out.mc_mean_2sls, out.mc_se_2sls);
  }
  return out;
}

}  // namespace clusteriv
