// Benchmark CLI: nested particle filtering experiments with CSV output.
//
// Subcommands:
//   run          one algorithm/model configuration, many replicates
//   compare      {algorithm, n_x, n_z} grid with paired replicate seeds
//   bandit       online decomposition-order selection (Hedge/Exp3)
//   oracle-check filters vs. the exact Kalman posterior on the
//                linear-Gaussian model
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure
// (every replicate diverged).

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npf/harness.hpp"
#include "npf/kalman.hpp"

namespace {

struct CliState {
  std::string config_path;
  // Flag spellings -> config keys; values arrive as raw strings and reuse the
  // config-file parser so both paths accept the same syntax.
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_flags(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "flat key = value config file");
  static const std::vector<std::pair<std::string, std::string>> kFlags = {
      {"--model", "model"},
      {"--algorithm", "algorithm"},
      {"--T", "T"},
      {"--runs", "runs"},
      {"--n-x", "n_x"},
      {"--n-z", "n_z"},
      {"--n-x-prime", "n_x_prime"},
      {"--n-z-prime", "n_z_prime"},
      {"--pf-particles", "pf_particles"},
      {"--marginal-mode", "marginal_mode"},
      {"--resampling", "resampling"},
      {"--bandit-mode", "bandit_mode"},
      {"--eta", "eta"},
      {"--gamma", "gamma"},
      {"--alpha", "alpha"},
      {"--change-point", "change_point"},
      {"--exp3-keep-alive", "exp3_keep_alive"},
      {"--reuse-lookahead", "reuse_lookahead"},
      {"--seed", "seed"},
      {"--out", "out"},
      {"--threads", "threads"},
      {"--grid-algorithms", "grid_algorithms"},
      {"--grid-n-x", "grid_n_x"},
      {"--grid-n-z", "grid_n_z"},
  };
  for (const auto& [flag, key] : kFlags) {
    const std::string key_copy = key;
    cmd->add_option_function<std::string>(
        flag,
        [&state, key_copy](const std::string& value) {
          state.overrides.emplace_back(key_copy, value);
        },
        "override config key '" + key + "'");
  }
}

npf::ExperimentConfig build_config(const CliState& state) {
  npf::ExperimentConfig config;
  if (!state.config_path.empty()) {
    config = npf::load_config_file(state.config_path);
  }
  for (const auto& [key, value] : state.overrides) {
    npf::apply_config_entry(config, key, value);
  }
  config.validate();
  return config;
}

void print_aggregates(const npf::ExperimentResult& result) {
  std::printf("component  mean_rmse_all  mean_rmse_nondiv  median  q05  q95\n");
  for (const auto& c : result.aggregates.components) {
    std::printf("%-9s  %13.5f  %16.5f  %6.4f  %6.4f  %6.4f\n",
                c.component.c_str(), c.mean_rmse_all, c.mean_rmse_nondiverged,
                c.median_rmse_nondiverged, c.q05, c.q95);
  }
  std::printf("divergence_rate %.4f  mean_wall_time_s %.4f  mean_likelihood_evals %.0f\n",
              result.aggregates.divergence_rate,
              result.aggregates.mean_wall_time_s,
              result.aggregates.mean_likelihood_evals);
}

int cmd_run(const npf::ExperimentConfig& config) {
  const npf::ExperimentResult result = npf::run_experiment(config);
  print_aggregates(result);
  if (result.aggregates.divergence_rate >= 1.0) {
    std::fprintf(stderr, "error: every replicate diverged\n");
    return 3;
  }
  return 0;
}

int cmd_compare(const npf::ExperimentConfig& config) {
  const auto rows = npf::compare_suite(config);
  std::size_t diverged = 0;
  for (const auto& row : rows) diverged += row.diverged ? 1 : 0;
  std::printf("compare grid: %zu rows, %zu flagged diverged\n", rows.size(),
              diverged);
  if (!rows.empty() && diverged == rows.size()) {
    std::fprintf(stderr, "error: every replicate diverged\n");
    return 3;
  }
  return 0;
}

int cmd_bandit(const npf::ExperimentConfig& config) {
  const auto results = npf::bandit_demo(config);
  int diverged = 0;
  for (const auto& r : results) diverged += r.diverged ? 1 : 0;
  std::printf("bandit runs: %d, with a diverged action: %d\n",
              static_cast<int>(results.size()), diverged);
  if (!results.empty()) {
    const auto& last = results[0].steps.back();
    std::printf("run 0 final hedge p = (");
    for (std::size_t a = 0; a < last.p.size(); ++a) {
      std::printf("%s%.4f", a ? ", " : "", last.p[a]);
    }
    std::printf("), chosen %d\n", last.chosen);
  }
  return 0;
}

int cmd_oracle_check(npf::ExperimentConfig config) {
  config.model = "linear_gaussian";
  const auto model = npf::make_model(config);
  const auto* lg =
      dynamic_cast<const npf::LinearGaussianModel*>(model.get());

  const char* algorithms[] = {"pf", "dpf", "ladpf"};
  std::printf("algorithm  mean_abs_error_vs_kalman (runs=%d, T=%d)\n",
              config.runs, config.T);
  double worst = 0.0;
  for (const char* algorithm : algorithms) {
    npf::ExperimentConfig sub = config;
    sub.algorithm = algorithm;
    double total = 0.0;
    for (int r = 0; r < sub.runs; ++r) {
      const std::uint64_t seed_r = npf::RngStream::derive(sub.seed, r + 1);
      npf::RngStream trajectory_stream(seed_r, 0);
      const npf::Trajectory truth =
          npf::simulate_trajectory(*model, sub.T, trajectory_stream);
      const npf::KalmanResult kalman = npf::kalman_filter(*lg, truth.ys);
      auto filter = npf::make_filter(sub, model, seed_r);
      double err = 0.0;
      for (int t = 0; t < sub.T; ++t) {
        filter->step(truth.ys[t]);
        err += (filter->estimate() - kalman.means[t]).cwiseAbs().mean();
      }
      total += err / sub.T;
    }
    const double mean_err = total / sub.runs;
    worst = std::max(worst, mean_err);
    std::printf("%-9s  %.5f\n", algorithm, mean_err);
  }
  return worst < 1.0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested / decentralized particle filtering benchmarks"};
  app.require_subcommand(1);

  CliState run_state, compare_state, bandit_state, oracle_state;
  CLI::App* run_cmd = app.add_subcommand("run", "run one configuration");
  add_config_flags(run_cmd, run_state);
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "run an {algorithm, n_x, n_z} grid");
  add_config_flags(compare_cmd, compare_state);
  CLI::App* bandit_cmd =
      app.add_subcommand("bandit", "online decomposition selection");
  add_config_flags(bandit_cmd, bandit_state);
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle-check", "validate the filters against the Kalman oracle");
  add_config_flags(oracle_cmd, oracle_state);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(build_config(run_state));
    if (compare_cmd->parsed()) return cmd_compare(build_config(compare_state));
    if (bandit_cmd->parsed()) return cmd_bandit(build_config(bandit_state));
    if (oracle_cmd->parsed()) {
      npf::ExperimentConfig config = build_config(oracle_state);
      if (oracle_state.overrides.empty() && oracle_state.config_path.empty()) {
        config.runs = 10;
        config.T = 50;
        config.n_x = 50;
        config.n_z = 19;
      }
      return cmd_oracle_check(config);
    }
  } catch (const npf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
