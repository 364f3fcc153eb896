// clusteriv: cluster-aware IV estimation, heterogeneity testing, design
// diagnostics, and Monte Carlo studies on CSV datasets.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "clusteriv/csv.hpp"
#include "clusteriv/diagnostics.hpp"
#include "clusteriv/estimators.hpp"
#include "clusteriv/heterogeneity.hpp"
#include "clusteriv/simlab.hpp"

using json = nlohmann::json;
namespace civ = clusteriv;

namespace {

constexpr int kSchemaVersion = 1;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct DataOpts {
  std::string path;
  std::string outcome = "y";
  std::string treatment = "d";
  std::string instrument = "z";
  std::string cluster = "cluster";
  std::vector<std::string> covariates;
  bool drop_missing = false;

  civ::InputSpec spec() const {
    civ::InputSpec s;
    s.path = path;
    s.outcome_col = outcome;
    s.treatment_col = treatment;
    s.instrument_col = instrument;
    s.cluster_col = cluster;
    s.covariate_cols = covariates;
    s.missing_policy = drop_missing ? civ::MissingPolicy::drop_row
                                    : civ::MissingPolicy::error;
    return s;
  }
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--data", d.path, "input CSV file")->required();
  cmd->add_option("--outcome", d.outcome, "outcome column name");
  cmd->add_option("--treatment", d.treatment, "treatment column name");
  cmd->add_option("--instrument", d.instrument, "instrument column name");
  cmd->add_option("--cluster", d.cluster, "cluster label column name");
  cmd->add_option("--covariates", d.covariates, "covariate column names")
      ->delimiter(',');
  cmd->add_flag("--drop-missing", d.drop_missing,
                "drop rows with missing values instead of erroring");
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("CLUSTERIV_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

json fit_to_json(const civ::FitResult& f) {
  json coefs = json::object();
  for (const auto& [name, value] : f.coefficients) coefs[name] = value;
  json j = {
      {"strategy", f.strategy},
      {"tau_hat", f.tau_hat},
      {"se", f.se},
      {"ci_low", f.ci_low},
      {"ci_high", f.ci_high},
      {"coefficients", coefs},
      {"s_zd", f.s_zd},
      {"n_units", f.n_units},
      {"n_clusters", f.n_clusters},
      {"n_within_varying_clusters", f.n_within_varying_clusters},
  };
  return j;
}

json het_to_json(const civ::JointHetResult& h) {
  return json{
      {"tau_2sls", h.tau_ls},
      {"tau_2sfe", h.tau_fe},
      {"cov2",
       {{h.cov2(0, 0), h.cov2(0, 1)}, {h.cov2(1, 0), h.cov2(1, 1)}}},
      {"se_diff", h.se_diff},
      {"t_stat", h.t_stat},
      {"p_value", h.p_value},
      {"reject_at_5pct", h.reject_05},
      {"method", h.method},
  };
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw civ::Error("cannot write output file: " + out_path);
    f << j.dump(2) << "\n";
  }
}

int cmd_fit(const DataOpts& d, const std::vector<std::string>& strategies,
            const std::string& out_path) {
  civ::Dataset data = civ::load_csv(d.spec());
  std::vector<std::string> tags =
      strategies.empty() ? civ::strategy_tags() : strategies;
  json fits = json::array();
  bool any_ok = false;
  for (const auto& tag : tags) {
    json entry;
    try {
      civ::FitResult f = civ::fit_strategy(data, tag);
      entry = fit_to_json(f);
      any_ok = true;
      std::fprintf(stderr, "%-8s tau=%- .6g se=%.6g ci=[%.6g, %.6g]\n",
                   tag.c_str(), f.tau_hat, f.se, f.ci_low, f.ci_high);
    } catch (const civ::Error& e) {
      entry = {{"strategy", tag}, {"error", e.what()}};
      std::fprintf(stderr, "%-8s error: %s\n", tag.c_str(), e.what());
    }
    fits.push_back(entry);
  }
  emit(json{{"schema_version", kSchemaVersion},
            {"command", "fit"},
            {"n_units", data.n_units()},
            {"n_clusters", data.n_clusters()},
            {"fits", fits}},
       out_path);
  return any_ok ? 0 : kExitNumerical;
}

int cmd_hettest(const DataOpts& d, const std::string& out_path) {
  civ::Dataset data = civ::load_csv(d.spec());
  civ::JointHetResult h = civ::hettest(data);
  std::fprintf(stderr,
               "heterogeneity test: t = %.4f, p = %.4g, se_diff = %.6g (%s "
               "at 5%%)\n",
               h.t_stat, h.p_value, h.se_diff,
               h.reject_05 ? "reject" : "fail to reject");
  json j = het_to_json(h);
  j["schema_version"] = kSchemaVersion;
  j["command"] = "hettest";
  emit(j, out_path);
  return 0;
}

int cmd_bootstrap(const DataOpts& d, int reps, std::uint64_t seed,
                  const std::string& out_path) {
  civ::Dataset data = civ::load_csv(d.spec());
  civ::BootstrapResult b = civ::cluster_bootstrap(data, reps, seed);
  std::fprintf(stderr,
               "cluster bootstrap: B=%d (excluded %d), sd(tau_2sls - "
               "tau_2sfe) = %.6g\n",
               b.n_requested, b.n_excluded, b.se_diff_boot);
  emit(json{{"schema_version", kSchemaVersion},
            {"command", "bootstrap"},
            {"n_requested", b.n_requested},
            {"n_excluded", b.n_excluded},
            {"seed", b.seed},
            {"se_diff_boot", b.se_diff_boot},
            {"tau_2sls", b.tau_ls},
            {"tau_2sfe", b.tau_fe},
            {"diff", b.diff}},
       out_path);
  return 0;
}

int cmd_diagnose(const DataOpts& d, const std::string& out_path) {
  civ::Dataset data = civ::load_csv(d.spec());
  civ::DesignDiagnostics g = civ::design_diagnostics(data);
  std::fprintf(stderr,
               "kappa_hat = %.4f  c_hat = %.4f  S_Z = %.4f  S_Z,in = %.4f  "
               "effective clusters = %d\n",
               g.kappa_hat, g.c_hat, g.s_z, g.s_z_in, g.n_effective_clusters);
  if (!g.fe_admissible)
    std::fprintf(stderr,
                 "warning: instrument is cluster-constant; 2SFE-family "
                 "estimators are inadmissible on this data\n");
  emit(json{{"schema_version", kSchemaVersion},
            {"command", "diagnose"},
            {"s_z", g.s_z},
            {"s_z_in", g.s_z_in},
            {"kappa_hat", g.kappa_hat},
            {"c_hat", g.c_hat},
            {"phi_hat",
             std::vector<double>(g.phi_hat.data(),
                                 g.phi_hat.data() + g.phi_hat.size())},
            {"phi_hat_note",
             "single-realization plug-in (Zbar_g - Zbar)^2 / S_Z"},
            {"s_zd", g.s_zd},
            {"s_zd_in", g.s_zd_in},
            {"n_effective_clusters", g.n_effective_clusters},
            {"fe_admissible", g.fe_admissible}},
       out_path);
  return 0;
}

int cmd_simulate_table2(double sigma_x, double sigma_eta, int clusters,
                        int reps, std::uint64_t seed, int threads,
                        const std::string& out_path) {
  civ::HomogeneousSimConfig cfg;
  cfg.sigma_x = sigma_x;
  cfg.sigma_eta = sigma_eta;
  cfg.n_clusters = clusters;
  civ::Table2Summary s = civ::run_table2(cfg, reps, seed, threads);
  json by = json::object();
  for (const auto& [tag, v] : s.by_strategy) {
    by[tag] = {{"mse", v.mse},
               {"coverage", v.coverage},
               {"coverage_mc_se", v.coverage_mc_se},
               {"mean_ci_length", v.mean_ci_length},
               {"mean_tau", v.mean_tau}};
    std::fprintf(stderr, "%-8s mse=%.4f coverage=%.3f ci_len=%.4f\n",
                 tag.c_str(), v.mse, v.coverage, v.mean_ci_length);
  }
  emit(json{{"schema_version", kSchemaVersion},
            {"command", "simulate table2"},
            {"sigma_x", s.sigma_x},
            {"sigma_eta", s.sigma_eta},
            {"tau", s.tau},
            {"n_reps", s.n_reps},
            {"n_failed_reps", s.n_failed_reps},
            {"seed", s.seed},
            {"by_strategy", by}},
       out_path);
  return 0;
}

int cmd_simulate_hettest(double delta, int clusters, int cluster_size,
                         int reps, std::uint64_t seed, int threads,
                         const std::string& out_path,
                         const std::string& hist_csv) {
  civ::HeteroSimConfig cfg;
  cfg.delta = delta;
  cfg.n_clusters = clusters;
  cfg.cluster_size = cluster_size;
  civ::HettestSummary s = civ::run_hettest_mc(cfg, reps, seed, threads);
  std::fprintf(stderr,
               "delta=%.2f: mean t=%.3f rejection=%.3f mean tau=(%.4f, "
               "%.4f)\n",
               delta, s.mean_t, s.rejection_rate, s.mean_tau_ls,
               s.mean_tau_fe);
  if (!hist_csv.empty()) {
    std::ofstream f(hist_csv);
    if (!f) throw civ::Error("cannot write histogram CSV: " + hist_csv);
    f << "bin_left,bin_right,count\n";
    for (std::size_t b = 0; b < s.hist_counts.size(); ++b)
      f << s.hist_edges[b] << "," << s.hist_edges[b + 1] << ","
        << s.hist_counts[b] << "\n";
  }
  emit(json{{"schema_version", kSchemaVersion},
            {"command", "simulate hettest"},
            {"delta", s.delta},
            {"n_reps", s.n_reps},
            {"n_failed_reps", s.n_failed_reps},
            {"seed", s.seed},
            {"mean_tau_2sls", s.mean_tau_ls},
            {"mean_tau_2sfe", s.mean_tau_fe},
            {"mean_t", s.mean_t},
            {"rejection_rate", s.rejection_rate},
            {"rejection_mc_se", s.rejection_mc_se},
            {"hist_edges", s.hist_edges},
            {"hist_counts", s.hist_counts}},
       out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cluster-aware instrumental-variables estimation toolkit"};
  app.require_subcommand(1);

  DataOpts d_fit, d_het, d_boot, d_diag;
  std::string out_fit, out_het, out_boot, out_diag, out_t2, out_mc, hist_csv;
  std::vector<std::string> strategies;
  int boot_reps = 1000;
  std::uint64_t boot_seed = 0, t2_seed = 0, mc_seed = 0;
  double sigma_x = 1.0, sigma_eta = 1.0, delta = 0.0;
  int t2_clusters = 200, t2_reps = 1000, mc_clusters = 100, mc_size = 20,
      mc_reps = 1000, threads = 0;

  auto* fit = app.add_subcommand("fit", "fit estimation strategies");
  add_data_opts(fit, d_fit);
  fit->add_option("--strategies", strategies,
                  "subset of 2sls,2sfe,2sls-x,2sfe-x,ols,fe,ols-x,fe-x "
                  "(default: all)")
      ->delimiter(',');
  fit->add_option("--out", out_fit, "write JSON here instead of stdout");

  auto* het = app.add_subcommand("hettest", "cluster-heterogeneity t-test");
  add_data_opts(het, d_het);
  het->add_option("--out", out_het, "write JSON here instead of stdout");

  auto* boot = app.add_subcommand("bootstrap", "pairs-cluster bootstrap");
  add_data_opts(boot, d_boot);
  boot->add_option("--reps", boot_reps, "bootstrap replicates")
      ->check(CLI::PositiveNumber);
  boot->add_option("--seed", boot_seed, "RNG seed")->required();
  boot->add_option("--out", out_boot, "write JSON here instead of stdout");

  auto* diag = app.add_subcommand("diagnose", "design diagnostics");
  add_data_opts(diag, d_diag);
  diag->add_option("--out", out_diag, "write JSON here instead of stdout");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo studies");
  sim->require_subcommand(1);
  auto* t2 = sim->add_subcommand(
      "table2", "MSE/coverage/CI-length study (homogeneous clusters)");
  t2->add_option("--sigma-x", sigma_x, "sd of the cluster-level covariate");
  t2->add_option("--sigma-eta", sigma_eta, "sd of the residual cluster effect");
  t2->add_option("--clusters", t2_clusters, "number of clusters");
  t2->add_option("--reps", t2_reps, "replications")->check(CLI::PositiveNumber);
  t2->add_option("--seed", t2_seed, "RNG seed")->required();
  t2->add_option("--threads", threads, "worker threads (default 1)");
  t2->add_option("--out", out_t2, "write JSON here instead of stdout");

  auto* mc = sim->add_subcommand(
      "hettest", "heterogeneity-test power study (two cluster types)");
  mc->add_option("--delta", delta, "cluster effect of the second type");
  mc->add_option("--clusters", mc_clusters, "number of clusters");
  mc->add_option("--cluster-size", mc_size, "units per cluster");
  mc->add_option("--reps", mc_reps, "replications")->check(CLI::PositiveNumber);
  mc->add_option("--seed", mc_seed, "RNG seed")->required();
  mc->add_option("--threads", threads, "worker threads (default 1)");
  mc->add_option("--out", out_mc, "write JSON here instead of stdout");
  mc->add_option("--hist-csv", hist_csv, "write t-statistic histogram bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (*fit) return cmd_fit(d_fit, strategies, out_fit);
    if (*het) return cmd_hettest(d_het, out_het);
    if (*boot) return cmd_bootstrap(d_boot, boot_reps, boot_seed, out_boot);
    if (*diag) return cmd_diagnose(d_diag, out_diag);
    if (*t2)
      return cmd_simulate_table2(sigma_x, sigma_eta, t2_clusters, t2_reps,
                                 t2_seed, resolve_threads(threads), out_t2);
    if (*mc)
      return cmd_simulate_hettest(delta, mc_clusters, mc_size, mc_reps,
                                  mc_seed, resolve_threads(threads), out_mc,
                                  hist_csv);
  } catch (const civ::ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const civ::NonBinaryColumn& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const civ::MissingValue& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const civ::DimensionMismatch& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const civ::Error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumerical;
  }
  return 2;
}
