#include "qrlbench/env.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace qrlbench::env {

double normalize_index(int index, int count)
{
    if (count < 1 || index < 0 || index >= count) {
        throw std::out_of_range("index " + std::to_string(index) + " invalid for count " +
                                std::to_string(count));
    }
    return count > 1 ? static_cast<double>(index) / (count - 1) : 0.0;
}

std::pair<double, double> normalize_indices(int antenna, int element, int n_antennas,
                                            int n_elements)
{
    return {normalize_index(antenna, n_antennas), normalize_index(element, n_elements)};
}

double relative_return(const EpisodeRecord &record)
{
    if (record.rewards.empty() || record.rewards.size() != record.optimal.size()) {
        throw std::invalid_argument("episode record must be non-empty with matching lengths");
    }
    const double received = std::accumulate(record.rewards.begin(), record.rewards.end(), 0.0);
    const double optimal = std::accumulate(record.optimal.begin(), record.optimal.end(), 0.0);
    if (!(optimal > 0.0)) {
        throw std::domain_error("relative return undefined: optimal intensity sums to zero");
    }
    return received / optimal;
}

BeamManagementEnv::BeamManagementEnv(std::shared_ptr<const beam::AntennaConfig> config,
                                     EnvSettings settings)
    : config_(std::move(config)), settings_(settings)
{
    if (!config_) {
        throw std::invalid_argument("environment needs an antenna configuration");
    }
    config_->validate();
    if (settings_.horizon < 1) {
        throw std::invalid_argument("horizon must be positive");
    }
    if (settings_.observation_stack < 1) {
        throw std::invalid_argument("observation_stack must be positive");
    }
    if (settings_.trajectory_degree < 2) {
        throw std::invalid_argument("trajectory_degree must be at least 2");
    }
}

Eigen::VectorXd BeamManagementEnv::reset(std::uint64_t trajectory_seed)
{
    return reset(trajectory::sample_trajectory(settings_.trajectory_degree, config_->domain_size,
                                               trajectory_seed));
}

Eigen::VectorXd BeamManagementEnv::reset(trajectory::Trajectory trajectory)
{
    trajectory_ = std::move(trajectory);
    step_index_ = 0;
    started_ = true;
    record_ = {};
    record_.rewards.reserve(settings_.horizon);
    record_.optimal.reserve(settings_.horizon);

    last_ = beam::best_codebook(config_->antennas.front(), trajectory_.position(0.0),
                                config_->codebook, config_->cutoff_radius);
    last_.antenna = 0;
    history_.assign(settings_.observation_stack, last_observation());
    return stacked();
}

StepResult BeamManagementEnv::step(int action)
{
    if (!started_) {
        throw std::logic_error("step called before reset");
    }
    if (done()) {
        throw std::logic_error("step called on a finished episode");
    }
    if (action < 0 || action >= n_actions()) {
        throw std::out_of_range("action " + std::to_string(action) + " outside [0, " +
                                std::to_string(n_actions()) + ")");
    }

    ++step_index_;
    const beam::Point user = user_position();
    last_ = beam::best_codebook(config_->antennas[action], user, config_->codebook,
                                config_->cutoff_radius);
    last_.antenna = action;
    record_.rewards.push_back(last_.intensity);
    record_.optimal.push_back(beam::ground_truth(*config_, user).intensity);

    history_.pop_front();
    history_.push_back(last_observation());
    return {stacked(), last_.intensity, done()};
}

beam::Point BeamManagementEnv::user_position() const
{
    return trajectory_.position(static_cast<double>(step_index_) / settings_.horizon);
}

Observation BeamManagementEnv::last_observation() const
{
    const auto [antenna, element] = normalize_indices(
        last_.antenna, last_.element, config_->n_antennas(), config_->codebook.n_elements);
    return {antenna, element, last_.intensity};
}

Eigen::VectorXd BeamManagementEnv::stacked() const
{
    Eigen::VectorXd out(observation_dim());
    int k = 0;
    for (const Observation &o : history_) {
        out.segment<3>(3 * k++) = o.vector();
    }
    return out;
}

} // namespace qrlbench::env
