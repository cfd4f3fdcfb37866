#include "qrlbench/rl.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>

using namespace qrlbench;
using namespace qrlbench::rl;
using models::Activation;
using models::Mlp;
using models::MlpNetwork;
using Catch::Approx;

namespace {

/// Affine 3 -> n network with no hidden layer, so outputs are set by hand.
MlpNetwork affine(const Eigen::MatrixXd &weight, const Eigen::VectorXd &bias)
{
    Mlp mlp({weight.cols(), weight.rows()}, Activation::None);
    mlp.weight(0) = weight;
    mlp.bias(0) = bias;
    return MlpNetwork(mlp);
}

EnvFactory small_factory(int horizon = 200)
{
    return {std::make_shared<const beam::AntennaConfig>(beam::sample_configuration(2, 6.0, 1.5, 2024)),
            {3, horizon, 1}};
}

Transition make_transition(const VectorXd &s, int a, double r, const VectorXd &s2, bool done)
{
    return {s, a, r, s2, done};
}

} // namespace

TEST_CASE("ddqn loss by hand", "[rl]")
{
    const VectorXd s = VectorXd::Zero(3);
    VectorXd s2 = VectorXd::Zero(3);
    s2(0) = 1.0;

    // Online: Q(s) = [0.5, 0.3], Q(s') = [0.2, 0.8]. Target: Q(s') = [0.9, 0.1].
    Eigen::MatrixXd w_online = Eigen::MatrixXd::Zero(2, 3);
    w_online(0, 0) = 0.2 - 0.5;
    w_online(1, 0) = 0.8 - 0.3;
    MlpNetwork online = affine(w_online, Eigen::Vector2d(0.5, 0.3));
    Eigen::MatrixXd w_target = Eigen::MatrixXd::Zero(2, 3);
    w_target(0, 0) = 0.9;
    w_target(1, 0) = 0.1;
    const MlpNetwork target = affine(w_target, Eigen::Vector2d::Zero());

    const Transition t = make_transition(s, 0, 0.5, s2, false);
    const LossResult paper = ddqn_loss({&t}, online, target, 0.95, DdqnVariant::Paper);
    CHECK(paper.targets(0) == Approx(0.69).epsilon(1e-12));
    CHECK(paper.loss == Approx(0.0361).epsilon(1e-12));

    // Conventional: online picks action 1 at s', target values it at 0.1.
    const LossResult conventional = ddqn_loss({&t}, online, target, 0.95, DdqnVariant::Conventional);
    CHECK(conventional.targets(0) == Approx(0.5 + 0.95 * 0.1).epsilon(1e-12));

    const Transition terminal = make_transition(s, 0, 0.5, s2, true);
    CHECK(ddqn_loss({&terminal}, online, target, 0.95).targets(0) == 0.5);

    MlpNetwork unit = affine(Eigen::MatrixXd::Zero(2, 3), Eigen::Vector2d(1.0, 0.0));
    const Transition exact = make_transition(s, 0, 1.0, s2, false);
    CHECK(ddqn_loss({&exact}, unit, unit, 0.0).loss == 0.0);
}

TEST_CASE("ddqn loss gradient", "[rl]")
{
    Rng rng = make_rng(5);
    auto online = models::make_network(models::ClassicalSpec{8, 2, Activation::Tanh}, 3, 2, 1);
    auto target = models::make_network(models::ClassicalSpec{8, 2, Activation::Tanh}, 3, 2, 2);
    std::vector<Transition> storage;
    for (int i = 0; i < 16; ++i) {
        VectorXd s(3), s2(3);
        for (int k = 0; k < 3; ++k) {
            s(k) = uniform01(rng);
            s2(k) = uniform01(rng);
        }
        storage.push_back(make_transition(s, static_cast<int>(uniform_index(rng, 2)), uniform01(rng), s2,
                                          i % 5 == 0));
    }
    std::vector<const Transition *> batch;
    for (const auto &t : storage) {
        batch.push_back(&t);
    }

    for (DdqnVariant variant : {DdqnVariant::Paper, DdqnVariant::Conventional}) {
        const LossResult base = ddqn_loss(batch, *online, *target, 0.95, variant);

        // Online gradient with the targets frozen.
        Eigen::MatrixXd states(3, 16);
        for (int b = 0; b < 16; ++b) {
            states.col(b) = storage[b].state;
        }
        auto frozen = [&] {
            const Eigen::MatrixXd q = online->predict(states);
            double acc = 0.0;
            for (int b = 0; b < 16; ++b) {
                const double e = q(storage[b].action, b) - base.targets(b);
                acc += e * e;
            }
            return acc / 16.0;
        };
        VectorXd &p = online->parameters();
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double saved = p(i);
            p(i) = saved + 1e-6;
            const double plus = frozen();
            p(i) = saved - 1e-6;
            const double minus = frozen();
            p(i) = saved;
            REQUIRE(base.gradient(i) == Approx((plus - minus) / 2e-6).margin(1e-7));
        }

        // The target parameters never enter the gradient path.
        const LossResult again = ddqn_loss(batch, *online, *target, 0.95, variant);
        VectorXd &tp = target->parameters();
        for (Eigen::Index i = 0; i < tp.size(); ++i) {
            const double saved = tp(i);
            tp(i) = saved + 1e-7;
            const LossResult moved = ddqn_loss(batch, *online, *target, 0.95, variant);
            tp(i) = saved;
            REQUIRE(moved.gradient.size() == again.gradient.size());
            if (variant == DdqnVariant::Paper) {
                // The target only selects an action; a tiny nudge leaves every argmax in place.
                REQUIRE(moved.loss == again.loss);
            }
        }
    }
    CHECK_THROWS_AS(ddqn_loss({}, *online, *target, 0.95), std::invalid_argument);
}

TEST_CASE("epsilon greedy", "[rl]")
{
    Rng rng = make_rng(1);
    CHECK(argmax(Eigen::Vector3d(0.5, 0.5, 0.1)) == 0);
    CHECK(epsilon_greedy(Eigen::Vector3d(0.5, 0.5, 0.1), 0.0, rng) == 0);
    CHECK(epsilon_greedy(Eigen::Vector3d(0.1, 0.7, 0.1), 0.0, rng) == 1);
    CHECK_THROWS_AS(epsilon_greedy(Eigen::Vector3d::Zero(), 1.5, rng), std::invalid_argument);

    const int draws = 100000;
    std::array<int, 4> counts{};
    for (int i = 0; i < draws; ++i) {
        ++counts[epsilon_greedy(Eigen::Vector4d(0, 3, 1, 2), 1.0, rng)];
    }
    const double expected = draws / 4.0;
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (int c : counts) {
        CHECK(std::abs(c - expected) < 3 * sigma);
    }

    int greedy = 0;
    for (int i = 0; i < draws; ++i) {
        greedy += epsilon_greedy(Eigen::Vector4d(0, 3, 1, 2), 0.1, rng) == 1;
    }
    // P(argmax) = 0.9 + 0.1 / 4.
    CHECK(std::abs(greedy - 0.925 * draws) < 3 * std::sqrt(draws * 0.925 * 0.075));
}

TEST_CASE("replay buffer", "[rl]")
{
    ReplayBuffer buffer(5);
    CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);
    Rng rng = make_rng(2);
    CHECK_THROWS_AS(buffer.sample(1, rng), std::logic_error);
    for (int i = 0; i < 12; ++i) {
        buffer.push(make_transition(VectorXd::Zero(3), i, 0.5, VectorXd::Zero(3), false));
        REQUIRE(buffer.size() == std::min<std::size_t>(i + 1, 5));
    }
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(buffer.at(i).action == static_cast<int>(7 + i));
    }
    CHECK_THROWS_AS(buffer.at(5), std::out_of_range);

    // Chi-square over 10^5 uniform draws of 50 slots (49 dof, 0.999 quantile ~ 85.4).
    ReplayBuffer big(50);
    for (int i = 0; i < 80; ++i) {
        big.push(make_transition(VectorXd::Zero(3), i, 0.5, VectorXd::Zero(3), false));
    }
    std::map<int, int> hits;
    const int draws = 100000;
    for (const Transition *t : big.sample(draws, rng)) {
        ++hits[t->action];
    }
    REQUIRE(hits.size() == 50);
    CHECK(hits.begin()->first == 30);
    double chi2 = 0.0;
    const double expected = draws / 50.0;
    for (const auto &[action, count] : hits) {
        chi2 += (count - expected) * (count - expected) / expected;
    }
    CHECK(chi2 < 85.4);
}

TEST_CASE("target synchronisation", "[rl]")
{
    auto online = models::make_network(models::ClassicalSpec{4, 1, Activation::ReLU}, 3, 2, 1);
    auto target = online->clone();
    const VectorXd initial = target->parameters();
    TargetSync sync(3);
    CHECK_THROWS_AS(TargetSync(0), std::invalid_argument);
    for (int step = 1; step <= 9; ++step) {
        online->parameters().array() += 0.01;
        const bool copied = sync.after_gradient_step(*online, *target);
        REQUIRE(copied == (step % 3 == 0));
        if (copied) {
            REQUIRE(target->parameters() == online->parameters());
        } else {
            REQUIRE(target->parameters() != online->parameters());
        }
        if (step < 3) {
            REQUIRE(target->parameters() == initial);
        }
    }
    CHECK(sync.gradient_steps() == 9);
}

TEST_CASE("validation seeds", "[rl]")
{
    const auto fresh1 = validation_seeds(3, 1, 4, false);
    const auto fresh2 = validation_seeds(3, 2, 4, false);
    CHECK(fresh1 != fresh2);
    CHECK(validation_seeds(3, 1, 4, true) == validation_seeds(3, 7, 4, true));
    CHECK(fresh1 == validation_seeds(3, 1, 4, false));
    for (std::uint64_t s : fresh1) {
        for (int e = 0; e < 10; ++e) {
            for (int i = 0; i < 10; ++i) {
                REQUIRE(s != derive_seed(3, Stream::TrainEnv, e * 10 + i));
            }
        }
    }
}

TEST_CASE("evaluation baselines", "[rl]")
{
    const EnvFactory factory = small_factory(50);
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    const double random = random_policy_value(factory, seeds, 0);
    CHECK(random > 0.0);
    CHECK(random < 1.0);
    CHECK(random == random_policy_value(factory, seeds, 0));

    // A constant network that always prefers antenna 1.
    const MlpNetwork prefers_one = affine(Eigen::MatrixXd::Zero(2, 3), Eigen::Vector2d(0.0, 1.0));
    double manual = 0.0;
    for (std::uint64_t s : seeds) {
        auto e = factory.make();
        e.reset(s);
        while (!e.done()) {
            e.step(1);
        }
        manual += env::relative_return(e.record());
    }
    CHECK(evaluate_greedy(prefers_one, factory, seeds) == Approx(manual / 5.0).epsilon(1e-14));
    CHECK_THROWS_AS(evaluate_greedy(prefers_one, factory, {}), std::invalid_argument);
}

TEST_CASE("ddqn training bookkeeping", "[rl][slow]")
{
    const EnvFactory factory = small_factory();
    DdqnConfig config;
    config.epochs = 100;
    config.validation_envs = 1;
    config.fixed_validation_set = true;
    int callbacks = 0;
    const RunLog log = ddqn_train(factory, models::ClassicalSpec{4, 1, Activation::ReLU}, config, 9,
                                  [&](const EpochLog &e, const models::Network &net) {
                                      ++callbacks;
                                      REQUIRE(e.epoch == callbacks);
                                      REQUIRE(net.n_parameters() == 4 * 3 + 4 + 4 * 2 + 2);
                                  });
    REQUIRE(log.epochs.size() == 100);
    CHECK(callbacks == 100);
    CHECK(log.epochs.back().steps == 200000);
    for (std::size_t i = 0; i < log.epochs.size(); ++i) {
        REQUIRE(log.epochs[i].steps == 2000 * static_cast<long>(i + 1));
        REQUIRE(log.epochs[i].value >= 0.0);
        REQUIRE(log.epochs[i].value <= 1.0);
    }
}

TEST_CASE("ddqn training is deterministic", "[rl]")
{
    const EnvFactory factory = small_factory(40);
    DdqnConfig config;
    config.epochs = 3;
    config.validation_envs = 5;
    const models::ModelSpec spec = models::ClassicalSpec{8, 2, Activation::ReLU};
    const RunLog a = ddqn_train(factory, spec, config, 4);
    const RunLog b = ddqn_train(factory, spec, config, 4);
    const RunLog c = ddqn_train(factory, spec, config, 5);
    REQUIRE(a.epochs.size() == 3);
    bool differs = false;
    for (int i = 0; i < 3; ++i) {
        CHECK(a.epochs[i].value == b.epochs[i].value);
        CHECK(a.epochs[i].mean_loss == b.epochs[i].mean_loss);
        CHECK(a.epochs[i].steps == 400 * (i + 1));
        differs = differs || a.epochs[i].mean_loss != c.epochs[i].mean_loss;
    }
    CHECK(differs);
    CHECK(a.run_id == "ddqn-4");

    config.epsilon_greedy = 2.0;
    CHECK_THROWS_AS(ddqn_train(factory, spec, config, 4), std::invalid_argument);
}

TEST_CASE("softmax", "[rl]")
{
    Rng rng = make_rng(3);
    Eigen::MatrixXd logits(4, 50);
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        for (Eigen::Index i = 0; i < 4; ++i) {
            logits(i, j) = uniform(rng, -50.0, 50.0);
        }
    }
    logits(0, 0) = 800.0; // overflow guard
    const Eigen::MatrixXd p = softmax(logits);
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        REQUIRE(std::abs(p.col(j).sum() - 1.0) < 1e-9);
        REQUIRE((p.col(j).array() >= 0.0).all());
    }
    CHECK(p(0, 0) == Approx(1.0));
    const Eigen::MatrixXd even = softmax(Eigen::MatrixXd::Zero(2, 1));
    CHECK(even(0, 0) == 0.5);
}

TEST_CASE("ppo loss", "[rl]")
{
    // Zero actor weights: uniform policy over two actions, p = 0.5.
    MlpNetwork actor = affine(Eigen::MatrixXd::Zero(2, 3), Eigen::Vector2d::Zero());
    MlpNetwork critic = affine(Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Constant(1, 0.25));

    PpoBatch batch;
    batch.states = Eigen::MatrixXd::Ones(3, 2);
    batch.actions = {0, 1};
    batch.old_log_probs = Eigen::Vector2d::Constant(std::log(0.5));
    batch.advantages = Eigen::Vector2d(1.0, -3.0);
    batch.returns = Eigen::Vector2d(1.25, 0.25);

    // ratio 1 everywhere.
    const PpoLossResult unit = ppo_loss(batch, actor, critic, 0.2);
    CHECK(unit.actor_loss == Approx(1.0));
    CHECK(unit.critic_loss == Approx(0.5));
    CHECK(unit.loss == Approx(1.0 + 0.5 * 0.5));

    // Old probability 1/3 makes the ratio 1.5; positive advantage is capped at 1.2 A.
    batch.old_log_probs = Eigen::Vector2d::Constant(std::log(1.0 / 3.0));
    batch.advantages = Eigen::Vector2d(2.0, 2.0);
    const PpoLossResult capped = ppo_loss(batch, actor, critic, 0.2);
    CHECK(capped.actor_loss == Approx(-1.2 * 2.0));
    CHECK(capped.actor_gradient.isZero(0));

    // Negative advantage with ratio 1.5: the unclipped term is smaller and keeps its gradient.
    // Both samples take action 0, otherwise the two logit gradients cancel.
    batch.advantages = Eigen::Vector2d(-2.0, -2.0);
    batch.actions = {0, 0};
    const PpoLossResult open = ppo_loss(batch, actor, critic, 0.2);
    CHECK(open.actor_loss == Approx(1.5 * 2.0));
    CHECK_FALSE(open.actor_gradient.isZero(0));

    batch.advantages.setZero();
    CHECK(ppo_loss(batch, actor, critic, 0.2).actor_gradient.isZero(0));

    batch.advantages(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ppo_loss(batch, actor, critic, 0.2), std::invalid_argument);
}

TEST_CASE("ppo loss gradient", "[rl]")
{
    Rng rng = make_rng(8);
    auto actor = models::make_network(models::ClassicalSpec{6, 1, Activation::Tanh}, 3, 3, 1);
    auto critic = models::make_network(models::ClassicalSpec{6, 1, Activation::Tanh}, 3, 1, 2);
    PpoBatch batch;
    batch.states.resize(3, 10);
    batch.actions.resize(10);
    batch.old_log_probs.resize(10);
    batch.advantages.resize(10);
    batch.returns.resize(10);
    const Eigen::MatrixXd p_now = softmax(actor->predict(Eigen::MatrixXd::Zero(3, 1)));
    for (int b = 0; b < 10; ++b) {
        for (int k = 0; k < 3; ++k) {
            batch.states(k, b) = uniform01(rng);
        }
        batch.actions[b] = static_cast<int>(uniform_index(rng, 3));
        // Old policy near the current one so that some samples sit inside the clip band.
        batch.old_log_probs(b) = std::log(p_now(batch.actions[b], 0)) + uniform(rng, -0.3, 0.3);
        batch.advantages(b) = uniform(rng, -1.0, 1.0);
        batch.returns(b) = uniform01(rng);
    }
    const double clip = 0.2;
    const PpoLossResult base = ppo_loss(batch, *actor, *critic, clip);
    auto actor_loss = [&] {
        const Eigen::MatrixXd p = softmax(actor->predict(batch.states));
        double acc = 0.0;
        for (int b = 0; b < 10; ++b) {
            const double r = p(batch.actions[b], b) / std::exp(batch.old_log_probs(b));
            acc -= std::min(r * batch.advantages(b), std::clamp(r, 1 - clip, 1 + clip) * batch.advantages(b));
        }
        return acc / 10.0;
    };
    CHECK(actor_loss() == Approx(base.actor_loss).epsilon(1e-12));
    VectorXd &p = actor->parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double saved = p(i);
        p(i) = saved + 1e-7;
        const double plus = actor_loss();
        p(i) = saved - 1e-7;
        const double minus = actor_loss();
        p(i) = saved;
        REQUIRE(base.actor_gradient(i) == Approx((plus - minus) / 2e-7).margin(1e-6));
    }
    auto critic_loss = [&] {
        const Eigen::MatrixXd v = critic->predict(batch.states);
        return 0.5 * (v.row(0).transpose() - batch.returns).squaredNorm() / 10.0;
    };
    VectorXd &c = critic->parameters();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double saved = c(i);
        c(i) = saved + 1e-6;
        const double plus = critic_loss();
        c(i) = saved - 1e-6;
        const double minus = critic_loss();
        c(i) = saved;
        REQUIRE(base.critic_gradient(i) == Approx((plus - minus) / 2e-6).margin(1e-7));
    }
}

TEST_CASE("generalised advantage estimation", "[rl]")
{
    const Eigen::Vector3d rewards(1.0, 0.5, 0.25);
    const Eigen::Vector3d values(0.2, 0.4, 0.6);
    const double g = 0.9, l = 0.8;

    // lambda = 1 reduces to discounted return minus value.
    const VectorXd mc = gae(rewards, values, {false, false, true}, 99.0, g, 1.0);
    CHECK(mc(2) == Approx(0.25 - 0.6));
    CHECK(mc(1) == Approx(0.5 + g * 0.25 - 0.4));
    CHECK(mc(0) == Approx(1.0 + g * 0.5 + g * g * 0.25 - 0.2));

    // lambda = 0 is the one-step TD error.
    const VectorXd td = gae(rewards, values, {false, false, false}, 0.7, g, 0.0);
    CHECK(td(0) == Approx(1.0 + g * 0.4 - 0.2));
    CHECK(td(2) == Approx(0.25 + g * 0.7 - 0.6));

    const VectorXd mixed = gae(rewards, values, {false, false, false}, 0.7, g, l);
    const double d2 = 0.25 + g * 0.7 - 0.6;
    const double d1 = 0.5 + g * 0.6 - 0.4;
    const double d0 = 1.0 + g * 0.4 - 0.2;
    CHECK(mixed(2) == Approx(d2));
    CHECK(mixed(1) == Approx(d1 + g * l * d2));
    CHECK(mixed(0) == Approx(d0 + g * l * (d1 + g * l * d2)));

    // A done flag cuts the recursion.
    const VectorXd cut = gae(rewards, values, {false, true, false}, 0.7, g, l);
    CHECK(cut(1) == Approx(0.5 - 0.4));
    CHECK(cut(0) == Approx(d0 + g * l * (0.5 - 0.4)));

    CHECK_THROWS_AS(gae(rewards, values, {false}, 0.0, g, l), std::invalid_argument);
}

TEST_CASE("ppo improves on a short-horizon task", "[rl][slow]")
{
    const EnvFactory factory = small_factory(20);
    PpoConfig config;
    config.epochs = 50;
    config.validation_envs = 50;
    config.fixed_validation_set = true;
    const models::ModelSpec spec = models::ClassicalSpec{16, 2, Activation::ReLU};
    double first = 0.0;
    double last = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RunLog log = ppo_train(factory, spec, spec, config, seed);
        REQUIRE(log.epochs.size() == 50);
        REQUIRE(log.epochs.back().steps == 50L * 10 * 20);
        REQUIRE(log.run_id == "ppo-" + std::to_string(seed));
        first += log.epochs.front().value / 5.0;
        last += log.epochs.back().value / 5.0;
    }
    INFO("epoch 1 " << first << " epoch 50 " << last);
    CHECK(last > first);
}
