#pragma once

#include "qrlbench/env.hpp"
#include "qrlbench/models.hpp"
#include "qrlbench/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

/// DDQN and PPO training loops over interleaved BeamManagementEnv streams.
namespace qrlbench::rl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Transition {
    VectorXd state;
    int action = 0;
    double reward = 0.0;
    VectorXd next_state;
    bool done = false;
};

/// Fixed-capacity FIFO ring with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 1000);

    void push(Transition t);
    /// Indices into the current contents, drawn with replacement.
    std::vector<std::size_t> sample_indices(std::size_t batch, Rng &rng) const;
    std::vector<const Transition *> sample(std::size_t batch, Rng &rng) const;

    /// i-th stored transition in insertion order (0 = oldest).
    const Transition &at(std::size_t i) const;
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return storage_.size(); }

private:
    std::vector<Transition> storage_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

/// paper: the online network evaluates the action selected by the target
/// network. conventional: online selects, target evaluates.
enum class DdqnVariant { Paper, Conventional };

std::string to_string(DdqnVariant v);
DdqnVariant parse_ddqn_variant(const std::string &name);

struct DdqnConfig {
    double epsilon_greedy = 0.1;
    double lr_classical = 5e-4;
    double lr_quantum = 1e-3;
    double gamma = 0.95;
    int sync_interval = 1000;
    int buffer_capacity = 1000;
    int batch_size = 64;
    int epochs = 100;
    int train_envs = 10;
    int validation_envs = 100;
    DdqnVariant variant = DdqnVariant::Paper;
    bool fixed_validation_set = false;

    void validate() const;
};

struct PpoConfig {
    double clip = 0.1;
    double lr_classical = 1e-3;
    double lr_quantum = 1e-3;
    double gamma = 0.95;
    double gae_lambda = 0.95;
    double value_coef = 0.5;
    int batch_size = 64;
    int repeat = 10;
    int epochs = 500;
    int train_envs = 10;
    int validation_envs = 100;
    bool normalize_advantages = false;
    bool fixed_validation_set = false;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    long steps = 0;
    double value = 0.0;
    double mean_loss = 0.0;
};

struct RunLog {
    std::string run_id;
    std::uint64_t seed = 0;
    std::vector<EpochLog> epochs;
};

/// Produces identically configured environments sharing one antenna layout.
struct EnvFactory {
    std::shared_ptr<const beam::AntennaConfig> config;
    env::EnvSettings settings;

    env::BeamManagementEnv make() const { return env::BeamManagementEnv(config, settings); }
};

/// Counts gradient steps and copies online into target every `interval` of them.
class TargetSync {
public:
    explicit TargetSync(int interval);

    /// Records one gradient step; returns true when it triggered a copy.
    bool after_gradient_step(const models::Network &online, models::Network &target);
    long gradient_steps() const { return steps_; }

private:
    int interval_;
    long steps_ = 0;
};

/// Called after every epoch's validation with the current policy network.
using EpochCallback = std::function<void(const EpochLog &, const models::Network &)>;

int argmax(const Eigen::Ref<const VectorXd> &values);
int epsilon_greedy(const Eigen::Ref<const VectorXd> &q_values, double epsilon, Rng &rng);

struct LossResult {
    double loss = 0.0;
    VectorXd gradient;
    VectorXd targets;
};

/// Mean squared TD error with the target held constant. Gradient is with
/// respect to the online parameters only.
LossResult ddqn_loss(const std::vector<const Transition *> &batch, models::Network &online,
                     const models::Network &target, double gamma,
                     DdqnVariant variant = DdqnVariant::Paper);

/// Greedy rollout of one fresh episode per seed, in lockstep; mean relative return.
double evaluate_greedy(const models::Network &policy, const EnvFactory &factory,
                       const std::vector<std::uint64_t> &trajectory_seeds);

/// Mean relative return of the uniform random policy.
double random_policy_value(const EnvFactory &factory,
                           const std::vector<std::uint64_t> &trajectory_seeds, std::uint64_t seed);

/// Validation trajectory seeds for one epoch.
std::vector<std::uint64_t> validation_seeds(std::uint64_t run_seed, int epoch, int n_envs, bool fixed);

RunLog ddqn_train(const EnvFactory &factory, const models::ModelSpec &model,
                  const DdqnConfig &config, std::uint64_t seed, const EpochCallback &on_epoch = {});

/// Softmax of every column of logits.
MatrixXd softmax(const MatrixXd &logits);

struct PpoBatch {
    MatrixXd states;
    std::vector<int> actions;
    VectorXd old_log_probs;
    VectorXd advantages;
    VectorXd returns;
};

struct PpoLossResult {
    double loss = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    VectorXd actor_gradient;
    VectorXd critic_gradient;
};

PpoLossResult ppo_loss(const PpoBatch &batch, models::Network &actor, models::Network &critic,
                       double clip, double value_coef = 0.5);

/// Generalised advantage estimates for one episode stream; `next_value` is the
/// bootstrap value after the last reward (ignored when the last step is done).
VectorXd gae(const VectorXd &rewards, const VectorXd &values, const std::vector<bool> &dones,
             double next_value, double gamma, double lambda);

RunLog ppo_train(const EnvFactory &factory, const models::ModelSpec &actor_model,
                 const models::ModelSpec &critic_model, const PpoConfig &config, std::uint64_t seed,
                 const EpochCallback &on_epoch = {});

} // namespace qrlbench::rl
