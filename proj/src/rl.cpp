#include "qrlbench/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qrlbench::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity)
{
    if (capacity == 0) {
        throw std::invalid_argument("replay buffer capacity must be positive");
    }
}

void ReplayBuffer::push(Transition t)
{
    storage_[head_] = std::move(t);
    head_ = (head_ + 1) % storage_.size();
    size_ = std::min(size_ + 1, storage_.size());
}

const Transition &ReplayBuffer::at(std::size_t i) const
{
    if (i >= size_) {
        throw std::out_of_range("replay buffer index " + std::to_string(i) + " >= size " +
                                std::to_string(size_));
    }
    const std::size_t oldest = size_ < storage_.size() ? 0 : head_;
    return storage_[(oldest + i) % storage_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng &rng) const
{
    if (size_ == 0) {
        throw std::logic_error("sampling from an empty replay buffer");
    }
    std::vector<std::size_t> idx(batch);
    for (auto &i : idx) {
        i = static_cast<std::size_t>(uniform_index(rng, size_));
    }
    return idx;
}

std::vector<const Transition *> ReplayBuffer::sample(std::size_t batch, Rng &rng) const
{
    std::vector<const Transition *> out;
    out.reserve(batch);
    for (std::size_t i : sample_indices(batch, rng)) {
        out.push_back(&at(i));
    }
    return out;
}

std::string to_string(DdqnVariant v)
{
    return v == DdqnVariant::Paper ? "paper" : "conventional";
}

DdqnVariant parse_ddqn_variant(const std::string &name)
{
    if (name == "paper") return DdqnVariant::Paper;
    if (name == "conventional") return DdqnVariant::Conventional;
    throw std::invalid_argument("unknown ddqn_variant '" + name + "' (expected paper|conventional)");
}

void DdqnConfig::validate() const
{
    if (!(epsilon_greedy >= 0.0 && epsilon_greedy <= 1.0)) {
        throw std::invalid_argument("epsilon_greedy must lie in [0, 1]");
    }
    if (!(lr_classical > 0.0) || !(lr_quantum > 0.0) || !(gamma > 0.0) || gamma > 1.0) {
        throw std::invalid_argument("learning rates must be positive and gamma in (0, 1]");
    }
    if (sync_interval < 1 || buffer_capacity < 1 || batch_size < 1 || epochs < 1 ||
        train_envs < 1 || validation_envs < 1) {
        throw std::invalid_argument("DDQN counts must be positive");
    }
}

void PpoConfig::validate() const
{
    if (!(clip > 0.0 && clip < 1.0)) {
        throw std::invalid_argument("clip must lie in (0, 1)");
    }
    if (!(lr_classical > 0.0) || !(lr_quantum > 0.0) || !(gamma > 0.0) || gamma > 1.0) {
        throw std::invalid_argument("learning rates must be positive and gamma in (0, 1]");
    }
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0) || !(value_coef >= 0.0)) {
        throw std::invalid_argument("gae_lambda must lie in [0, 1] and value_coef be non-negative");
    }
    if (batch_size < 1 || repeat < 1 || epochs < 1 || train_envs < 1 || validation_envs < 1) {
        throw std::invalid_argument("PPO counts must be positive");
    }
}

int argmax(const Eigen::Ref<const VectorXd> &values)
{
    if (values.size() == 0) {
        throw std::invalid_argument("argmax of an empty vector");
    }
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values(i) > values(best)) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

int epsilon_greedy(const Eigen::Ref<const VectorXd> &q_values, double epsilon, Rng &rng)
{
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("epsilon must lie in [0, 1]");
    }
    if (epsilon > 0.0 && uniform01(rng) < epsilon) {
        return static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(q_values.size())));
    }
    return argmax(q_values);
}

namespace {

MatrixXd stack_columns(const std::vector<const Transition *> &batch, bool next)
{
    const Eigen::Index dim = (next ? batch.front()->next_state : batch.front()->state).size();
    MatrixXd m(dim, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        m.col(static_cast<Eigen::Index>(b)) = next ? batch[b]->next_state : batch[b]->state;
    }
    return m;
}

MatrixXd stack_observations(const std::vector<VectorXd> &obs)
{
    MatrixXd m(obs.front().size(), static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        m.col(static_cast<Eigen::Index>(i)) = obs[i];
    }
    return m;
}

void apply_adam(models::Adam &adam, models::Network &net, const VectorXd &grad, double lr_c,
                double lr_q)
{
    adam.step(net.parameters(), grad, lr_c, lr_q);
}

} // namespace

TargetSync::TargetSync(int interval) : interval_(interval)
{
    if (interval < 1) {
        throw std::invalid_argument("sync interval must be positive");
    }
}

bool TargetSync::after_gradient_step(const models::Network &online, models::Network &target)
{
    if (++steps_ % interval_ != 0) {
        return false;
    }
    target.parameters() = online.parameters();
    return true;
}

LossResult ddqn_loss(const std::vector<const Transition *> &batch, models::Network &online,
                     const models::Network &target, double gamma, DdqnVariant variant)
{
    if (batch.empty()) {
        throw std::invalid_argument("ddqn_loss needs a non-empty batch");
    }
    const auto n = static_cast<Eigen::Index>(batch.size());
    const MatrixXd next = stack_columns(batch, true);
    const MatrixXd q_next_online = online.predict(next);
    const MatrixXd q_next_target = target.predict(next);

    LossResult result;
    result.targets.resize(n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const Transition &t = *batch[b];
        double bootstrap = 0.0;
        if (!t.done) {
            if (variant == DdqnVariant::Paper) {
                bootstrap = q_next_online(argmax(q_next_target.col(b)), b);
            } else {
                bootstrap = q_next_target(argmax(q_next_online.col(b)), b);
            }
        }
        result.targets(b) = t.reward + gamma * bootstrap;
    }

    const MatrixXd q = online.forward(stack_columns(batch, false));
    MatrixXd upstream = MatrixXd::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
        const int a = batch[b]->action;
        if (a < 0 || a >= q.rows()) {
            throw std::out_of_range("transition action " + std::to_string(a) + " outside [0, " +
                                    std::to_string(q.rows()) + ")");
        }
        const double err = q(a, b) - result.targets(b);
        loss += err * err;
        upstream(a, b) = 2.0 * err / static_cast<double>(n);
    }
    result.loss = loss / static_cast<double>(n);
    result.gradient = online.backward(upstream);
    return result;
}

double evaluate_greedy(const models::Network &policy, const EnvFactory &factory,
                       const std::vector<std::uint64_t> &trajectory_seeds)
{
    if (trajectory_seeds.empty()) {
        throw std::invalid_argument("evaluation needs at least one episode");
    }
    std::vector<env::BeamManagementEnv> envs;
    std::vector<VectorXd> obs;
    envs.reserve(trajectory_seeds.size());
    for (std::uint64_t s : trajectory_seeds) {
        envs.push_back(factory.make());
        obs.push_back(envs.back().reset(s));
    }
    const int horizon = factory.settings.horizon;
    for (int step = 0; step < horizon; ++step) {
        const MatrixXd q = policy.predict(stack_observations(obs));
        for (std::size_t i = 0; i < envs.size(); ++i) {
            obs[i] = envs[i].step(argmax(q.col(static_cast<Eigen::Index>(i)))).observation;
        }
    }
    double total = 0.0;
    for (const auto &e : envs) {
        total += env::relative_return(e.record());
    }
    return total / static_cast<double>(envs.size());
}

double random_policy_value(const EnvFactory &factory,
                           const std::vector<std::uint64_t> &trajectory_seeds, std::uint64_t seed)
{
    if (trajectory_seeds.empty()) {
        throw std::invalid_argument("evaluation needs at least one episode");
    }
    Rng rng = make_rng(derive_seed(seed, Stream::Evaluation, 0));
    double total = 0.0;
    for (std::uint64_t s : trajectory_seeds) {
        env::BeamManagementEnv e = factory.make();
        e.reset(s);
        const auto n_actions = static_cast<std::uint64_t>(e.n_actions());
        while (!e.done()) {
            e.step(static_cast<int>(uniform_index(rng, n_actions)));
        }
        total += env::relative_return(e.record());
    }
    return total / static_cast<double>(trajectory_seeds.size());
}

std::vector<std::uint64_t> validation_seeds(std::uint64_t run_seed, int epoch, int n_envs, bool fixed)
{
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_envs));
    const std::uint64_t base = fixed ? 0 : static_cast<std::uint64_t>(epoch) * n_envs;
    for (int j = 0; j < n_envs; ++j) {
        seeds[j] = derive_seed(run_seed, Stream::ValidationEnv, base + j);
    }
    return seeds;
}

RunLog ddqn_train(const EnvFactory &factory, const models::ModelSpec &model,
                  const DdqnConfig &config, std::uint64_t seed, const EpochCallback &on_epoch)
{
    config.validate();
    const int horizon = factory.settings.horizon;
    std::vector<env::BeamManagementEnv> envs;
    for (int i = 0; i < config.train_envs; ++i) {
        envs.push_back(factory.make());
    }
    const int obs_dim = envs.front().observation_dim();
    const int n_actions = envs.front().n_actions();

    auto online = models::make_network(model, obs_dim, n_actions,
                                       derive_seed(seed, Stream::Weights, 0));
    auto target = online->clone();
    models::Adam adam(online->n_parameters(), online->groups());
    ReplayBuffer buffer(static_cast<std::size_t>(config.buffer_capacity));
    Rng explore = make_rng(derive_seed(seed, Stream::Exploration, 0));
    Rng replay = make_rng(derive_seed(seed, Stream::Replay, 0));

    RunLog log{"ddqn-" + std::to_string(seed), seed, {}};
    long steps = 0;
    TargetSync sync(config.sync_interval);
    std::vector<VectorXd> obs(envs.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = 0; i < envs.size(); ++i) {
            obs[i] = envs[i].reset(
                derive_seed(seed, Stream::TrainEnv, static_cast<std::uint64_t>(epoch) * envs.size() + i));
        }
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int tick = 0; tick < horizon; ++tick) {
            const MatrixXd q = online->predict(stack_observations(obs));
            for (std::size_t i = 0; i < envs.size(); ++i) {
                const int action =
                    epsilon_greedy(q.col(static_cast<Eigen::Index>(i)), config.epsilon_greedy, explore);
                env::StepResult r = envs[i].step(action);
                buffer.push({obs[i], action, r.reward, r.observation, r.done});
                obs[i] = std::move(r.observation);
                ++steps;
            }
            for (std::size_t i = 0; i < envs.size(); ++i) {
                if (buffer.size() < static_cast<std::size_t>(config.batch_size)) {
                    break;
                }
                const LossResult lr = ddqn_loss(
                    buffer.sample(static_cast<std::size_t>(config.batch_size), replay), *online,
                    *target, config.gamma, config.variant);
                apply_adam(adam, *online, lr.gradient, config.lr_classical, config.lr_quantum);
                loss_sum += lr.loss;
                ++loss_count;
                sync.after_gradient_step(*online, *target);
            }
        }
        EpochLog entry;
        entry.epoch = epoch + 1;
        entry.steps = steps;
        entry.value = evaluate_greedy(
            *online, factory,
            validation_seeds(seed, epoch, config.validation_envs, config.fixed_validation_set));
        entry.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        log.epochs.push_back(entry);
        if (on_epoch) {
            on_epoch(entry, *online);
        }
    }
    return log;
}

MatrixXd softmax(const MatrixXd &logits)
{
    MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const Eigen::ArrayXd e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
        p.col(c) = e / e.sum();
    }
    return p;
}

PpoLossResult ppo_loss(const PpoBatch &batch, models::Network &actor, models::Network &critic,
                       double clip, double value_coef)
{
    const Eigen::Index n = batch.states.cols();
    if (n == 0 || static_cast<Eigen::Index>(batch.actions.size()) != n ||
        batch.old_log_probs.size() != n || batch.advantages.size() != n ||
        batch.returns.size() != n) {
        throw std::invalid_argument("inconsistent PPO batch");
    }
    if (!batch.advantages.allFinite()) {
        throw std::invalid_argument("PPO advantages must be finite");
    }
    const MatrixXd probs = softmax(actor.forward(batch.states));
    const MatrixXd values = critic.forward(batch.states);

    PpoLossResult r;
    MatrixXd up_actor = MatrixXd::Zero(probs.rows(), n);
    MatrixXd up_critic(1, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const int a = batch.actions[b];
        const double adv = batch.advantages(b);
        const double ratio = std::exp(std::log(probs(a, b)) - batch.old_log_probs(b));
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
        r.actor_loss -= std::min(unclipped, clipped);
        if (unclipped <= clipped) {
            // d(-ratio A / n)/d logits = -(ratio A / n) (onehot(a) - p)
            const double scale = -unclipped / static_cast<double>(n);
            up_actor.col(b) = -scale * probs.col(b);
            up_actor(a, b) += scale;
        }
        const double err = values(0, b) - batch.returns(b);
        r.critic_loss += err * err;
        up_critic(0, b) = value_coef * 2.0 * err / static_cast<double>(n);
    }
    r.actor_loss /= static_cast<double>(n);
    r.critic_loss /= static_cast<double>(n);
    r.loss = r.actor_loss + value_coef * r.critic_loss;
    r.actor_gradient = actor.backward(up_actor);
    r.critic_gradient = critic.backward(up_critic);
    return r;
}

VectorXd gae(const VectorXd &rewards, const VectorXd &values, const std::vector<bool> &dones,
             double next_value, double gamma, double lambda)
{
    const Eigen::Index n = rewards.size();
    if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
        throw std::invalid_argument("gae inputs have mismatched lengths");
    }
    VectorXd adv(n);
    double running = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
        const double following = t + 1 < n ? values(t + 1) : next_value;
        const double live = dones[t] ? 0.0 : 1.0;
        const double delta = rewards(t) + gamma * following * live - values(t);
        running = delta + gamma * lambda * live * running;
        adv(t) = running;
    }
    return adv;
}

RunLog ppo_train(const EnvFactory &factory, const models::ModelSpec &actor_model,
                 const models::ModelSpec &critic_model, const PpoConfig &config, std::uint64_t seed,
                 const EpochCallback &on_epoch)
{
    config.validate();
    const int horizon = factory.settings.horizon;
    std::vector<env::BeamManagementEnv> envs;
    for (int i = 0; i < config.train_envs; ++i) {
        envs.push_back(factory.make());
    }
    const int obs_dim = envs.front().observation_dim();
    const int n_actions = envs.front().n_actions();
    const auto n_envs = static_cast<Eigen::Index>(envs.size());

    auto actor = models::make_network(actor_model, obs_dim, n_actions,
                                      derive_seed(seed, Stream::Weights, 0));
    auto critic = models::make_network(critic_model, obs_dim, 1, derive_seed(seed, Stream::Weights, 1));
    models::Adam adam_actor(actor->n_parameters(), actor->groups());
    models::Adam adam_critic(critic->n_parameters(), critic->groups());
    Rng explore = make_rng(derive_seed(seed, Stream::Exploration, 0));
    Rng shuffle = make_rng(derive_seed(seed, Stream::Replay, 0));

    RunLog log{"ppo-" + std::to_string(seed), seed, {}};
    long steps = 0;
    const Eigen::Index total = n_envs * horizon;
    std::vector<VectorXd> obs(envs.size());
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (Eigen::Index i = 0; i < n_envs; ++i) {
            obs[i] = envs[i].reset(
                derive_seed(seed, Stream::TrainEnv, static_cast<std::uint64_t>(epoch) * n_envs + i));
        }
        // Sample k = i * horizon + t.
        PpoBatch all;
        all.states.resize(obs_dim, total);
        all.actions.assign(static_cast<std::size_t>(total), 0);
        all.old_log_probs.resize(total);
        MatrixXd rewards(n_envs, horizon);
        MatrixXd values(n_envs, horizon);
        std::vector<std::vector<bool>> dones(envs.size(), std::vector<bool>(horizon));
        for (int t = 0; t < horizon; ++t) {
            const MatrixXd states = stack_observations(obs);
            const MatrixXd probs = softmax(actor->predict(states));
            const MatrixXd v = critic->predict(states);
            for (Eigen::Index i = 0; i < n_envs; ++i) {
                const double u = uniform01(explore);
                int a = 0;
                double cum = probs(0, i);
                while (u >= cum && a + 1 < n_actions) {
                    cum += probs(++a, i);
                }
                const Eigen::Index k = i * horizon + t;
                all.states.col(k) = states.col(i);
                all.actions[k] = a;
                all.old_log_probs(k) = std::log(probs(a, i));
                values(i, t) = v(0, i);
                env::StepResult r = envs[i].step(a);
                rewards(i, t) = r.reward;
                dones[i][t] = r.done;
                obs[i] = std::move(r.observation);
                ++steps;
            }
        }
        all.advantages.resize(total);
        all.returns.resize(total);
        const MatrixXd last_values = critic->predict(stack_observations(obs));
        for (Eigen::Index i = 0; i < n_envs; ++i) {
            const VectorXd adv = gae(rewards.row(i).transpose(), values.row(i).transpose(), dones[i],
                                     last_values(0, i), config.gamma, config.gae_lambda);
            all.advantages.segment(i * horizon, horizon) = adv;
            all.returns.segment(i * horizon, horizon) = adv + values.row(i).transpose();
        }
        if (config.normalize_advantages && total > 1) {
            const double mean = all.advantages.mean();
            const double sd = std::sqrt((all.advantages.array() - mean).square().sum() /
                                        static_cast<double>(total - 1));
            all.advantages = (all.advantages.array() - mean) / (sd + 1e-8);
        }

        std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
        double loss_sum = 0.0;
        long loss_count = 0;
        for (int pass = 0; pass < config.repeat; ++pass) {
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            for (std::size_t i = order.size() - 1; i > 0; --i) {
                std::swap(order[i], order[uniform_index(shuffle, i + 1)]);
            }
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(config.batch_size)) {
                const std::size_t end =
                    std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
                const auto m = static_cast<Eigen::Index>(end - start);
                PpoBatch mb;
                mb.states.resize(obs_dim, m);
                mb.actions.resize(static_cast<std::size_t>(m));
                mb.old_log_probs.resize(m);
                mb.advantages.resize(m);
                mb.returns.resize(m);
                for (Eigen::Index j = 0; j < m; ++j) {
                    const Eigen::Index k = order[start + static_cast<std::size_t>(j)];
                    mb.states.col(j) = all.states.col(k);
                    mb.actions[j] = all.actions[k];
                    mb.old_log_probs(j) = all.old_log_probs(k);
                    mb.advantages(j) = all.advantages(k);
                    mb.returns(j) = all.returns(k);
                }
                const PpoLossResult lr = ppo_loss(mb, *actor, *critic, config.clip, config.value_coef);
                apply_adam(adam_actor, *actor, lr.actor_gradient, config.lr_classical, config.lr_quantum);
                apply_adam(adam_critic, *critic, lr.critic_gradient, config.lr_classical,
                           config.lr_quantum);
                loss_sum += lr.loss;
                ++loss_count;
            }
        }

        EpochLog entry;
        entry.epoch = epoch + 1;
        entry.steps = steps;
        entry.value = evaluate_greedy(
            *actor, factory,
            validation_seeds(seed, epoch, config.validation_envs, config.fixed_validation_set));
        entry.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        log.epochs.push_back(entry);
        if (on_epoch) {
            on_epoch(entry, *actor);
        }
    }
    return log;
}

} // namespace qrlbench::rl
