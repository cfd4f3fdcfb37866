#include "qrlbench/env.hpp"
#include "qrlbench/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <array>

using namespace qrlbench;
using namespace qrlbench::env;
using Catch::Approx;

namespace {

std::shared_ptr<const beam::AntennaConfig> two_antennas(std::uint64_t seed = 2024)
{
    return std::make_shared<const beam::AntennaConfig>(beam::sample_configuration(2, 6.0, 1.5, seed));
}

bool in_unit(const Eigen::VectorXd &v) { return (v.array() >= 0.0).all() && (v.array() <= 1.0).all(); }

} // namespace

TEST_CASE("normalised indices", "[env]")
{
    CHECK(normalize_index(0, 1) == 0.0);
    CHECK(normalize_index(3, 9) == 0.375);
    CHECK(normalize_index(8, 9) == 1.0);
    CHECK(normalize_indices(1, 4, 2, 9) == std::pair{1.0, 0.5});
    CHECK_THROWS_AS(normalize_index(2, 2), std::out_of_range);
    CHECK_THROWS_AS(normalize_index(-1, 2), std::out_of_range);
    CHECK_THROWS_AS(normalize_index(0, 0), std::out_of_range);
}

TEST_CASE("relative return", "[env]")
{
    CHECK(relative_return({{0.5, 0.25}, {1.0, 0.5}}) == 0.5);
    CHECK(relative_return({{0.3, 0.6}, {0.3, 0.6}}) == 1.0);
    CHECK_THROWS_AS(relative_return({{0.0}, {0.0}}), std::domain_error);
    CHECK_THROWS_AS(relative_return({{0.1}, {0.1, 0.2}}), std::invalid_argument);
    CHECK_THROWS_AS(relative_return({}), std::invalid_argument);
}

TEST_CASE("reset", "[env]")
{
    BeamManagementEnv env(two_antennas());
    CHECK(env.n_actions() == 2);
    CHECK(env.observation_dim() == 3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Eigen::VectorXd obs = env.reset(seed);
        REQUIRE(obs.size() == 3);
        REQUIRE(in_unit(obs));
        REQUIRE(obs(0) == 0.0);
        const beam::Selection best = beam::best_codebook(env.config().antennas[0], env.user_position(),
                                                         env.config().codebook,
                                                         env.config().cutoff_radius);
        REQUIRE(obs(1) == normalize_index(best.element, 9));
        REQUIRE(obs(2) == best.intensity);
    }
    const Eigen::VectorXd a = env.reset(7);
    const Eigen::VectorXd b = env.reset(7);
    CHECK(a == b);
}

TEST_CASE("episode mechanics", "[env]")
{
    BeamManagementEnv env(two_antennas(), {3, 5, 1});
    CHECK_THROWS_AS(env.step(0), std::logic_error);
    env.reset(1);
    CHECK_THROWS_AS(env.step(2), std::out_of_range);
    CHECK_THROWS_AS(env.step(-1), std::out_of_range);
    for (int t = 1; t <= 5; ++t) {
        REQUIRE_FALSE(env.done());
        const StepResult r = env.step(t % 2);
        REQUIRE(env.step_index() == t);
        REQUIRE(r.done == (t == 5));
        REQUIRE(r.observation(0) == static_cast<double>(t % 2));
        REQUIRE(r.observation(2) == r.reward);
        REQUIRE(r.reward > 0.0);
        REQUIRE(r.reward <= 1.0);
    }
    CHECK(env.done());
    CHECK_THROWS_AS(env.step(0), std::logic_error);
    CHECK((env.user_position() - env.current_trajectory().position(1.0)).norm() == 0.0);
    CHECK(env.record().rewards.size() == 5);
}

TEST_CASE("single antenna always attains the optimum", "[env]")
{
    auto cfg = std::make_shared<const beam::AntennaConfig>(beam::sample_configuration(1, 6.0, 1.5, 5));
    BeamManagementEnv env(cfg, {3, 50, 1});
    env.reset(11);
    while (!env.done()) {
        env.step(0);
    }
    CHECK(relative_return(env.record()) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ground-truth policy", "[env]")
{
    BeamManagementEnv env(two_antennas(), {4, 200, 1});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        env.reset(seed);
        while (!env.done()) {
            // The oracle knows the next position.
            const double tau = static_cast<double>(env.step_index() + 1) / env.horizon();
            const beam::Point next = env.current_trajectory().position(tau);
            env.step(beam::ground_truth(env.config(), next).antenna);
        }
        REQUIRE(relative_return(env.record()) == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("rewards never exceed the optimum", "[env][property]")
{
    BeamManagementEnv env(two_antennas(9), {3, 200, 1});
    Rng rng = make_rng(3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        env.reset(seed);
        while (!env.done()) {
            const StepResult r = env.step(static_cast<int>(uniform_index(rng, 2)));
            REQUIRE(in_unit(r.observation));
        }
        const EpisodeRecord &rec = env.record();
        for (std::size_t t = 0; t < rec.rewards.size(); ++t) {
            REQUIRE(rec.rewards[t] > 0.0);
            REQUIRE(rec.rewards[t] <= rec.optimal[t]);
        }
        REQUIRE(relative_return(rec) <= 1.0);
    }
}

TEST_CASE("exhaustive policies on a short horizon", "[env]")
{
    BeamManagementEnv env(two_antennas(), {3, 3, 1});
    double best = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
        env.reset(21);
        for (int t = 0; t < 3; ++t) {
            env.step((mask >> t) & 1);
        }
        const double v = relative_return(env.record());
        REQUIRE(v <= 1.0 + 1e-12);
        best = std::max(best, v);
    }
    // Brute force over the visited points gives the attainable optimum directly.
    env.reset(21);
    double attainable = 0.0;
    double optimal = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const beam::Point p = env.current_trajectory().position(t / 3.0);
        double per_antenna = 0.0;
        for (const auto &antenna : env.config().antennas) {
            per_antenna = std::max(per_antenna, beam::best_codebook(antenna, p, env.config().codebook,
                                                                    env.config().cutoff_radius)
                                                    .intensity);
        }
        attainable += per_antenna;
        optimal += beam::ground_truth(env.config(), p).intensity;
    }
    CHECK(best == Approx(attainable / optimal).epsilon(1e-12));
    CHECK(best == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("snapshot and restore", "[env]")
{
    BeamManagementEnv env(two_antennas(), {3, 40, 1});
    env.reset(4);
    for (int t = 0; t < 17; ++t) {
        env.step(t % 2);
    }
    const BeamManagementEnv snapshot = env;
    std::vector<double> first;
    for (int t = 0; t < 10; ++t) {
        first.push_back(env.step((t * 7) % 2).reward);
    }
    BeamManagementEnv restored = snapshot;
    for (int t = 0; t < 10; ++t) {
        REQUIRE(restored.step((t * 7) % 2).reward == first[t]);
    }
}

TEST_CASE("observation stacking", "[env]")
{
    BeamManagementEnv env(two_antennas(), {3, 10, 3});
    const Eigen::VectorXd obs = env.reset(2);
    REQUIRE(obs.size() == 9);
    CHECK(obs.segment<3>(0) == obs.segment<3>(6));
    const StepResult r = env.step(1);
    CHECK(r.observation.segment<3>(3) == obs.segment<3>(6));
    CHECK(r.observation(6) == 1.0);
}

TEST_CASE("golden reward sequence", "[env][regression]")
{
    BeamManagementEnv env(two_antennas(), {3, 200, 1});
    env.reset(derive_seed(0, Stream::TrainEnv, 0));
    std::vector<double> rewards;
    for (int t = 0; t < 200; ++t) {
        rewards.push_back(env.step((t / 13) % 2).reward);
    }
    const std::array<int, 6> probes{0, 1, 50, 99, 150, 199};
    // Produced by the first build and frozen.
    const std::array<double, 6> golden{0.15770430732082594, 0.15552345623599501, 0.0034136714679917257,
                                       0.0046730809024281726, 1.0, 0.0046532956340856911};
    for (std::size_t i = 0; i < probes.size(); ++i) {
        INFO("step " << probes[i] << " reward " << std::to_string(rewards[probes[i]]));
        CHECK(rewards[probes[i]] == Approx(golden[i]).epsilon(1e-12));
    }
    CHECK(relative_return(env.record()) == Approx(0.51626784678183069).epsilon(1e-12));
}

TEST_CASE("validation", "[env]")
{
    CHECK_THROWS_AS(BeamManagementEnv(nullptr), std::invalid_argument);
    CHECK_THROWS_AS(BeamManagementEnv(two_antennas(), {3, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(BeamManagementEnv(two_antennas(), {1, 10, 1}), std::invalid_argument);
    CHECK_THROWS_AS(BeamManagementEnv(two_antennas(), {3, 10, 0}), std::invalid_argument);
}
