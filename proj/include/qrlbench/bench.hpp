#pragma once

#include "qrlbench/beam.hpp"
#include "qrlbench/env.hpp"
#include "qrlbench/models.hpp"
#include "qrlbench/rl.hpp"
#include "qrlbench/stats.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/// Experiment orchestration: configuration schema, run logs, checkpoints and
/// the command implementations behind the `bench` tool.
namespace qrlbench::bench {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration.

struct EnvironmentConfig {
    /// Either an inline antenna list or (antenna_seed, n_antennas) to sample one.
    std::vector<beam::Antenna> antennas;
    std::uint64_t antenna_seed = 0;
    int n_antennas = 2;
    double domain_size = 6.0;
    double min_distance = 1.5;
    double cutoff_radius = 0.001;
    int n_senders = 17;
    int codebook_size = 9;
    env::EnvSettings settings;

    std::shared_ptr<const beam::AntennaConfig> build() const;
};

enum class Algorithm { DDQN, PPO };

struct SweepConfig {
    int n_seeds = 100;
    std::uint64_t base_seed = 0;
};

struct EstimatorConfig {
    stats::EpsDeltaGrid grid = stats::EpsDeltaGrid::standard();
    int n_resamples = 1000;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    std::string experiment = "experiment";
    EnvironmentConfig environment;
    Algorithm algorithm = Algorithm::DDQN;
    rl::DdqnConfig ddqn;
    rl::PpoConfig ppo;
    models::ModelSpec model = models::ClassicalSpec{};
    /// PPO critic; defaults to the actor's architecture.
    std::optional<models::ModelSpec> critic;
    SweepConfig sweep;
    EstimatorConfig estimator;
    std::string output = "runs";
};

/// Strict parse: unknown keys and type mismatches raise ConfigError carrying
/// the offending field path (e.g. "algorithm.batch_size").
ExperimentConfig parse_config(const json &j);
ExperimentConfig load_config(const fs::path &path);
json to_json(const ExperimentConfig &config);

json to_json(const beam::AntennaConfig &config);
beam::AntennaConfig antenna_config_from_json(const json &j, const std::string &path = "");
/// {support_points, degree, seed, domain_size}; the spline is rebuilt from the points.
json to_json(const trajectory::Trajectory &trajectory, std::uint64_t seed);
trajectory::Trajectory trajectory_from_json(const json &j, const std::string &path = "");
json to_json(const models::ModelSpec &spec);
models::ModelSpec model_spec_from_json(const json &j, const std::string &path = "model");

/// FNV-1a over the canonical JSON of everything that influences a run.
std::string config_hash(const ExperimentConfig &config);
/// BENCH_OUT if set, otherwise the config's output field.
fs::path output_root(const ExperimentConfig &config);
/// <root>/<experiment>/<config-hash>
fs::path run_directory(const ExperimentConfig &config);
fs::path run_log_path(const fs::path &directory, std::uint64_t seed);
fs::path checkpoint_path(const fs::path &directory, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Run logs and checkpoints.

json epoch_record(const std::string &run_id, std::uint64_t seed, const rl::EpochLog &entry);
rl::RunLog read_run_log(const fs::path &path);
/// Loads every run-*.jsonl file of a directory, ordered by seed.
std::vector<std::pair<fs::path, rl::RunLog>> read_run_logs(const fs::path &directory);
/// Assembles the N x T matrix; ragged logs are rejected with the offending files listed.
stats::RunMatrix load_run_matrix(const fs::path &directory);

struct Checkpoint {
    std::string algorithm = "ddqn";
    models::ModelSpec model = models::ClassicalSpec{};
    Eigen::Index input_dim = 0;
    Eigen::Index output_dim = 0;
    Eigen::VectorXd parameters;
};

void save_checkpoint(const fs::path &path, const Checkpoint &checkpoint);
Checkpoint load_checkpoint(const fs::path &path);
/// Rebuilds the network; throws if the stored parameter count does not match the shape.
std::unique_ptr<models::Network> restore_network(const Checkpoint &checkpoint);

// ---------------------------------------------------------------------------
// Commands.

struct SeedRange {
    std::uint64_t first = 0;
    std::uint64_t last = 0; ///< inclusive
};

/// Parses "A..B" (inclusive).
SeedRange parse_seed_range(const std::string &text);
std::vector<double> parse_number_list(const std::string &text);

struct TrainOptions {
    std::optional<SeedRange> seeds;
    int jobs = 1;
    std::ostream *progress = nullptr;
};

struct TrainSummary {
    fs::path directory;
    std::vector<fs::path> trained;
    std::vector<fs::path> skipped;
};

/// Trains one run per seed; complete logs are skipped, partial ones redone.
TrainSummary cmd_train(const ExperimentConfig &config, const TrainOptions &options = {});

/// Trains a single seed into `directory`, writing the log and final checkpoint.
rl::RunLog train_run(const ExperimentConfig &config, std::uint64_t seed, const fs::path &directory);

std::vector<stats::ComplexityCell> cmd_complexity(const fs::path &log_dir,
                                                  const EstimatorConfig &estimator,
                                                  std::ostream &csv);

stats::OutperformanceVerdict cmd_compare(const fs::path &dir_a, const fs::path &dir_b,
                                         const EstimatorConfig &estimator, std::ostream &csv);

/// Ground-truth map on a res x res grid of cell centres; returns the row count.
long cmd_render(const EnvironmentConfig &environment, int resolution, std::ostream &csv);

struct BiasCurve {
    double delta = 0.0;
    std::vector<stats::BiasPoint> points;
};

/// P_t grid 0.05, 0.06, ..., 0.95.
std::vector<double> default_bias_grid();

std::vector<BiasCurve> cmd_biascheck(int n_runs, const std::vector<double> &deltas, int n_trials,
                                     std::uint64_t seed, std::ostream &csv,
                                     const std::vector<double> &p_grid = default_bias_grid());

struct EvaluationSummary {
    int episodes = 0;
    double mean_relative_return = 0.0;
    double mean_policy = 0.0;
    double mean_random = 0.0;
    double mean_optimal = 0.0;
};

EvaluationSummary cmd_evaluate(const Checkpoint &checkpoint, const EnvironmentConfig &environment,
                               int n_episodes, std::uint64_t seed, std::ostream &csv);

} // namespace qrlbench::bench
