#pragma once

#include "qrlbench/beam.hpp"
#include "qrlbench/trajectory.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

namespace qrlbench::env {

/// What the agent sees about the previous step: normalised antenna index,
/// normalised codebook index and the received intensity.
struct Observation {
    double antenna_norm = 0.0;
    double codebook_norm = 0.0;
    double intensity = 0.0;

    Eigen::Vector3d vector() const { return {antenna_norm, codebook_norm, intensity}; }
};

/// index / (count - 1), or 0 for a single-entry set.
double normalize_index(int index, int count);
std::pair<double, double> normalize_indices(int antenna, int element, int n_antennas,
                                            int n_elements);

struct EpisodeRecord {
    std::vector<double> rewards;
    std::vector<double> optimal;
};

/// Sum of rewards over sum of ground-truth intensities.
double relative_return(const EpisodeRecord &record);

struct EnvSettings {
    int trajectory_degree = 3;
    int horizon = 200;
    int observation_stack = 1;
};

struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;
};

/// One BeamManagement6G episode stream over a shared, immutable antenna
/// configuration. The value type is copyable; a copy is a full snapshot of the
/// episode state.
class BeamManagementEnv {
public:
    BeamManagementEnv(std::shared_ptr<const beam::AntennaConfig> config, EnvSettings settings = {});

    /// Samples a fresh trajectory and starts at tau = 0 with antenna 0 and its
    /// best codebook element selected.
    Eigen::VectorXd reset(std::uint64_t trajectory_seed);
    /// Starts an episode on a caller-supplied trajectory.
    Eigen::VectorXd reset(trajectory::Trajectory trajectory);

    StepResult step(int action);

    int n_actions() const { return config_->n_antennas(); }
    int observation_dim() const { return 3 * settings_.observation_stack; }
    int horizon() const { return settings_.horizon; }
    int step_index() const { return step_index_; }
    bool done() const { return started_ && step_index_ == settings_.horizon; }

    const beam::Selection &last_selection() const { return last_; }
    Observation last_observation() const;
    const EpisodeRecord &record() const { return record_; }
    const trajectory::Trajectory &current_trajectory() const { return trajectory_; }
    const beam::AntennaConfig &config() const { return *config_; }
    const EnvSettings &settings() const { return settings_; }

    beam::Point user_position() const;

private:
    Eigen::VectorXd stacked() const;

    std::shared_ptr<const beam::AntennaConfig> config_;
    EnvSettings settings_;
    trajectory::Trajectory trajectory_;
    int step_index_ = 0;
    bool started_ = false;
    beam::Selection last_;
    std::deque<Observation> history_;
    EpisodeRecord record_;
};

} // namespace qrlbench::env
