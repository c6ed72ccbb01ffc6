#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npf/bandit.hpp"
#include "npf/dpf.hpp"
#include "npf/ladpf.hpp"
#include "npf/model.hpp"
#include "npf/models.hpp"
#include "npf/pf.hpp"

namespace npf {

/// Declarative description of one benchmark experiment. Every key of the flat
/// `key = value` config file maps to one field; CLI flags override file
/// values which override the defaults here.
struct ExperimentConfig {
  std::string model = "model1";     // model1|model2|linear_gaussian|swapped(...)
  std::string algorithm = "dpf";    // pf|dpf|ladpf|bandit
  int T = 250;
  int runs = 500;
  int n_x = 100;
  int n_z = 19;
  int n_x_prime = 5;
  int n_z_prime = 5;
  int pf_particles = 0;             // 0 derives n_x * (n_z + 1)
  std::string marginal_mode = "monte_carlo";  // monte_carlo|gaussian
  std::string resampling = "systematic";      // systematic|multinomial

  std::string bandit_mode = "exp3";  // hedge|exp3|fixed0|fixed1
  double eta = 0.5;
  double gamma = 0.2;
  double alpha = 0.001;
  int change_point = 0;              // 0 disables the mid-run dynamics swap
  bool exp3_keep_alive = true;
  bool reuse_lookahead = true;

  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;

  // compare grids
  std::vector<std::string> grid_algorithms = {"pf", "dpf", "ladpf"};
  std::vector<int> grid_n_x = {25, 50, 100};
  std::vector<int> grid_n_z = {19};

  void validate() const;  // throws ConfigError naming the offending field
  int pf_particle_count() const {
    return pf_particles > 0 ? pf_particles : n_x * (n_z + 1);
  }
};

/// Applies one `key = value` assignment; throws ConfigError for unknown keys
/// or unparsable values.
void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value);
ExperimentConfig load_config_file(const std::string& path);

/// Per-replicate metrics.
struct RunRecord {
  int run = 0;
  std::vector<double> rmse;  // one entry per state component (x..., z...)
  bool diverged_degenerate = false;  // a weight normalization degenerated
  bool diverged_rmse = false;        // error blew past 10x the state std
  int divergence_step = -1;
  double wall_time_s = 0.0;
  std::uint64_t likelihood_evals = 0;

  bool diverged() const { return diverged_degenerate || diverged_rmse; }
};

/// Per-config aggregates. RMSE means are reported both over all runs and
/// over non-diverged runs only.
struct ComponentAggregate {
  std::string component;
  double mean_rmse_all = 0.0;
  double mean_rmse_nondiverged = 0.0;
  double median_rmse_nondiverged = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

struct Aggregates {
  std::vector<ComponentAggregate> components;
  double divergence_rate = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_likelihood_evals = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  Aggregates aggregates;
  std::vector<std::string> component_names;
};

/// Root-mean-square error of one state component over the whole run.
double rmse(const Trajectory& truth, std::span<const Vec> estimates,
            int component);

/// Fraction of runs flagged diverged (either trigger).
double divergence_rate(std::span<const RunRecord> records);

Aggregates aggregate(std::span<const RunRecord> records,
                     std::span<const std::string> component_names);

/// Builds the configured model (handles swapped(...) and change_point).
std::shared_ptr<const StateSpaceModel> make_model(const ExperimentConfig& config);

/// Builds the configured filter for one replicate seed.
std::unique_ptr<NestedFilter> make_filter(
    const ExperimentConfig& config,
    const std::shared_ptr<const StateSpaceModel>& model, std::uint64_t seed);

/// Runs `config.runs` replicates (fresh trajectory and filter per replicate,
/// derived sub-seeds, optional worker pool) and aggregates. Writes the
/// per-run CSV when config.out is set. Deterministic for fixed (seed, config)
/// regardless of thread count.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// One row of the compare grid output.
struct CompareRow {
  std::string algorithm;
  int n_x, n_z;
  int run;
  std::string component;
  double rmse;
  bool diverged;
  double wall_time_s;
  std::uint64_t likelihood_evals;
};

/// Runs the {algorithm, n_x, n_z} grid with common random numbers across
/// algorithms (replicate seeds are shared so comparisons pair up).
std::vector<CompareRow> compare_suite(const ExperimentConfig& config);
void write_compare_csv(std::span<const CompareRow> rows,
                       const std::string& path);

/// Per-step record of one bandit-controlled run.
struct BanditStepRow {
  int run, t, chosen;
  double reward;
  std::vector<double> p, p_hat, epsilon;
};

struct BanditRunResult {
  std::vector<BanditStepRow> steps;
  std::vector<double> rmse;  // physical components, chosen-action estimates
  bool diverged = false;
};

/// One bandit-controlled replicate over a fresh trajectory.
BanditRunResult run_bandit(const ExperimentConfig& config, int run_index);

/// Runs all replicates and writes the per-step probability/action/reward CSV.
std::vector<BanditRunResult> bandit_demo(const ExperimentConfig& config);

void write_run_csv(const ExperimentResult& result,
                   std::span<const std::string> component_names,
                   const std::string& path);
void write_bandit_csv(std::span<const BanditRunResult> results,
                      const std::string& path);

/// Worker pool over [0, n): deterministic output is the caller's job (each
/// index writes only its own slot).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

std::vector<std::string> component_names_for(const StateSpaceModel& model);

}  // namespace npf
