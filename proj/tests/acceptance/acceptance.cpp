// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run everything
//   acceptance 4 6 7      run a subset

#include "qrlbench/bench.hpp"
#include "qrlbench/qsim.hpp"
#include "qrlbench/rng.hpp"
#include "qrlbench/trajectory.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace qrlbench;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

void progress(const std::string &line)
{
    std::cerr << "  .. " << line << std::endl;
}

const qsim::Structure kStructures[] = {qsim::Structure::IQP, qsim::Structure::EntCX,
                                       qsim::Structure::EntCZ};
const qsim::GateFamily kFamilies[] = {qsim::GateFamily::ROT, qsim::GateFamily::XYZ,
                                      qsim::GateFamily::U3};

// ---------------------------------------------------------------------------

Outcome parameter_counts()
{
    using models::param_count_classical;
    using models::param_count_quantum;
    struct Row {
        bool quantum;
        int size;
        long expected;
    };
    const Row rows[] = {{false, 16, 387}, {false, 32, 1283}, {false, 64, 4611},
                        {true, 10, 313},  {true, 14, 437},   {true, 6, 189}};
    bool ok = true;
    std::string detail;
    for (const Row &r : rows) {
        const long formula = r.quantum ? param_count_quantum(r.size, 4, 3, 3)
                                       : param_count_classical(r.size, 2, 3, 3);
        ok = ok && formula == r.expected;
        if (r.quantum) {
            for (auto st : kStructures) {
                for (auto f : kFamilies) {
                    const auto net = models::make_network(
                        models::HybridSpec{r.size, 4, st, f, models::Activation::None}, 3, 3, 0);
                    ok = ok && net->n_parameters() == r.expected;
                }
            }
        } else {
            const auto net = models::make_network(
                models::ClassicalSpec{r.size, 2, models::Activation::ReLU}, 3, 3, 0);
            ok = ok && net->n_parameters() == r.expected;
        }
        detail += fmt("%s(%d)=%ld ", r.quantum ? "q" : "c", r.size, formula);
    }
    return {ok, detail};
}

Outcome bias_curves()
{
    std::ostringstream csv;
    const auto curves = bench::cmd_biascheck(100, {0.25, 0.5, 0.75}, 10000, 2024, csv);
    bool ok = true;
    std::string detail;
    for (const auto &curve : curves) {
        double sup = 0.0;
        double at = 0.0;
        for (const auto &p : curve.points) {
            if (p.p_t < 0.05 - 1e-12 || p.p_t > 0.95 + 1e-12) {
                continue;
            }
            const double d = std::abs(p.empirical - p.clt_reference);
            if (d > sup) {
                sup = d;
                at = p.p_t;
            }
        }
        ok = ok && sup < 0.05;
        detail += fmt("delta=%.2f sup=%.4f@P=%.2f ", curve.delta, sup, at);
    }
    return {ok, detail};
}

Outcome consistency()
{
    struct Process {
        std::vector<double> p;
        double delta;
    };
    // Every P_t sits at least 0.1 away from delta.
    const Process processes[] = {
        {{0.1, 0.3, 0.5, 0.65, 0.95, 0.97, 0.99}, 0.8},
        {{0.0, 0.2, 0.35, 0.38, 0.62, 0.8, 0.9, 1.0}, 0.5},
    };
    bool ok = true;
    std::string detail;
    int k = 0;
    for (const Process &proc : processes) {
        const auto rows = stats::consistency_check(proc.p, {10, 100, 1000, 10000}, 0.1, proc.delta,
                                                   100, static_cast<std::uint64_t>(31 + k++));
        const bool monotone = rows[0].mean_abs_error >= rows[1].mean_abs_error &&
                              rows[1].mean_abs_error >= rows[2].mean_abs_error;
        ok = ok && monotone && rows[3].fraction_within_one >= 0.99;
        detail += fmt("[S=%d err %.3f/%.3f/%.3f within1@1e4=%.2f] ", rows[0].true_s,
                      rows[0].mean_abs_error, rows[1].mean_abs_error, rows[2].mean_abs_error,
                      rows[3].fraction_within_one);
    }
    return {ok, detail};
}

Outcome physics_oracle()
{
    const double k = 2.0 * M_PI;
    const double array_length = 16.0 * M_PI / k;
    Rng rng = make_rng(derive_seed(4, Stream::Evaluation, 0));
    double worst = 0.0;
    std::vector<double> closed;
    std::vector<double> exact;
    for (int i = 0; i < 100; ++i) {
        const double orient = uniform(rng, 0.0, 2.0 * M_PI);
        const beam::Antenna a{beam::Point(uniform(rng, 0.0, 6.0), uniform(rng, 0.0, 6.0)),
                              beam::Point(std::cos(orient), std::sin(orient)), 17};
        const double phi = beam::codebook_phase(static_cast<int>(uniform_index(rng, 9)), 9);
        const double dir = uniform(rng, 0.0, 2.0 * M_PI);
        const double dist = uniform(rng, 1e6, 2e6) * array_length;
        const beam::Point p = a.position + dist * beam::Point(std::cos(dir), std::sin(dir));
        closed.push_back(beam::intensity_unnormalized(a, phi, p, 1e-3));
        exact.push_back(beam::intensity_oracle(a, phi, p, 10000, k));
        worst = std::max(worst, std::abs(closed.back() - exact.back()) / exact.back());
    }
    const Eigen::Map<Eigen::VectorXd> c(closed.data(), 100), e(exact.data(), 100);
    const Eigen::VectorXd dc = c.array() - c.mean(), de = e.array() - e.mean();
    const double pearson = dc.dot(de) / std::sqrt(dc.squaredNorm() * de.squaredNorm());
    return {worst < 1e-2 && pearson > 0.999,
            fmt("max rel err %.3g, pearson %.6f, R in [1e6, 2e6] array lengths", worst, pearson)};
}

Outcome constant_speed()
{
    double worst = 0.0;
    const double h = 1e-6;
    for (int degree = 2; degree <= 6; ++degree) {
        for (int r = 0; r < 20; ++r) {
            const auto tr = trajectory::sample_trajectory(
                degree, 6.0, derive_seed(5, Stream::Evaluation, 100 * degree + r), 1024);
            for (int i = 0; i < 500; ++i) {
                const double tau = i / 499.0;
                const double lo = std::max(0.0, tau - h), hi = std::min(1.0, tau + h);
                const double v = (tr.position(hi) - tr.position(lo)).norm() / (hi - lo);
                worst = std::max(worst, std::abs(v / tr.speed() - 1.0));
            }
        }
    }
    return {worst < 1e-2, fmt("max relative speed deviation %.3g over 100 trajectories", worst)};
}

Eigen::VectorXd random_vector(Eigen::Index n, double lo, double hi, Rng &rng)
{
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = uniform(rng, lo, hi);
    }
    return v;
}

Outcome quantum()
{
    Rng rng = make_rng(6);
    double drift = 0.0;
    for (int n = 2; n <= 14; ++n) {
        for (auto st : kStructures) {
            for (auto f : kFamilies) {
                const qsim::AnsatzSpec spec{st, f, n, 3};
                const qsim::VqcParams<double> p{random_vector(spec.n_angles(), 0, 2 * M_PI, rng),
                                                random_vector(spec.n_angles(), -2, 2, rng)};
                const auto state = qsim::run_ansatz(spec, random_vector(n, -1, 1, rng), p);
                drift = std::max(drift, std::abs(state.norm() - 1.0));
            }
        }
    }

    // Normwise relative error of the full gradient vector (theta, lambda, inputs).
    double worst = 0.0;
    const double h = 1e-5;
    int circuits = 0;
    for (auto st : kStructures) {
        for (auto f : kFamilies) {
            for (int n = 2; n <= 6; ++n) {
                for (int layers = 1; layers <= 3; ++layers) {
                    const qsim::AnsatzSpec spec{st, f, n, layers};
                    const qsim::VqcParams<double> p{random_vector(spec.n_angles(), 0, 2 * M_PI, rng),
                                                    random_vector(spec.n_angles(), -2, 2, rng)};
                    const Eigen::VectorXd s = random_vector(n, -1, 1, rng);
                    const Eigen::VectorXd up = random_vector(n, -1, 1, rng);
                    const auto g = qsim::ansatz_gradients(spec, s, p, up);
                    auto value = [&](const qsim::VqcParams<double> &pp, const Eigen::VectorXd &ss) {
                        return up.dot(qsim::z_expectations(qsim::run_ansatz(spec, ss, pp)));
                    };
                    const Eigen::Index m = spec.n_angles();
                    Eigen::VectorXd analytic(2 * m + n), numeric(2 * m + n);
                    analytic << g.theta, g.lambda, g.inputs;
                    for (Eigen::Index i = 0; i < m; ++i) {
                        auto a = p, b = p;
                        a.theta(i) += h;
                        b.theta(i) -= h;
                        numeric(i) = (value(a, s) - value(b, s)) / (2 * h);
                        a = p;
                        b = p;
                        a.lambda(i) += h;
                        b.lambda(i) -= h;
                        numeric(m + i) = (value(a, s) - value(b, s)) / (2 * h);
                    }
                    for (int q = 0; q < n; ++q) {
                        Eigen::VectorXd a = s, b = s;
                        a(q) += h;
                        b(q) -= h;
                        numeric(2 * m + q) = (value(p, a) - value(p, b)) / (2 * h);
                    }
                    worst = std::max(worst, (analytic - numeric).lpNorm<Eigen::Infinity>() /
                                                numeric.lpNorm<Eigen::Infinity>());
                    ++circuits;
                }
            }
        }
    }
    return {drift < 1e-10 && worst < 1e-5,
            fmt("norm drift %.2g (n<=14), gradient rel err %.2g over %d circuits", drift, worst,
                circuits)};
}

stats::RunMatrix rows_of(int n, const std::vector<double> &curve)
{
    stats::RunMatrix m;
    m.values.resize(n, static_cast<Eigen::Index>(curve.size()));
    for (int i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < curve.size(); ++t) {
            m.values(i, static_cast<Eigen::Index>(t)) = curve[t];
        }
    }
    return m;
}

Outcome estimator_algebra()
{
    stats::RunMatrix hand;
    hand.values.resize(2, 3);
    hand.values << 0.5, 0.9, 0.95, 0.4, 0.7, 0.9;
    const auto cell = stats::complexity_table(hand, {{0.15}, {0.5}}, 100, 0).front();
    const bool hand_ok = cell.s_hat == 1 && cell.s_hat_interactions == 2000;

    const auto grid = stats::EpsDeltaGrid::standard();
    Rng rng = make_rng(7);
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        stats::RunMatrix m;
        m.values.resize(12, 15);
        for (int i = 0; i < 12; ++i) {
            double level = 0.3 * uniform01(rng);
            for (int t = 0; t < 15; ++t) {
                level = std::clamp(level + uniform(rng, -0.03, 0.08), 0.0, 1.0);
                m.values(i, t) = level;
            }
        }
        for (std::size_t a = 0; a < grid.epsilons.size(); ++a) {
            for (std::size_t b = 0; b < grid.deltas.size(); ++b) {
                const int s = stats::sample_complexity(m, grid.epsilons[a], grid.deltas[b]);
                if (a + 1 < grid.epsilons.size() &&
                    stats::sample_complexity(m, grid.epsilons[a + 1], grid.deltas[b]) > s) {
                    ++violations;
                }
                if (b + 1 < grid.deltas.size() &&
                    stats::sample_complexity(m, grid.epsilons[a], grid.deltas[b + 1]) < s) {
                    ++violations;
                }
            }
        }
    }

    const auto flat = stats::cluster_bootstrap(rows_of(25, {0.2, 0.6, 0.9, 1.0}), 0.15, 0.8, 1000, 3);
    const double width = flat.p95 - flat.p5;
    return {hand_ok && violations == 0 && width == 0.0,
            fmt("hand S=%d (%ld interactions), monotonicity violations %d, degenerate width %g",
                cell.s_hat, cell.s_hat_interactions, violations, width)};
}

Outcome verdicts()
{
    const auto grid = stats::EpsDeltaGrid::standard();
    std::vector<double> fast(10, 1.0);
    fast[0] = 0.0;
    const auto a = rows_of(20, fast);
    const auto b = rows_of(20, std::vector<double>(10, 0.0));
    const auto dominance = stats::outperforms(a, b, grid, 1000, 1).verdict;

    // A plateaus at 0.8 immediately; B is slower but ends at 0.96. A wins for
    // the loose threshold and loses for the strict one.
    std::vector<double> plateau(10, 0.8);
    plateau[0] = 0.5;
    std::vector<double> late(10, 0.7);
    std::fill(late.begin() + 5, late.end(), 0.96);
    const auto crossover =
        stats::outperforms(rows_of(20, plateau), rows_of(20, late), grid, 1000, 2).verdict;
    const auto self = stats::outperforms(a, a, grid, 1000, 3).verdict;

    const bool ok = dominance == stats::Verdict::AOutperformsB &&
                    crossover == stats::Verdict::Neither && self == stats::Verdict::Neither;
    return {ok, "dominance " + stats::to_string(dominance) + ", crossover " +
                    stats::to_string(crossover) + ", self " + stats::to_string(self)};
}

rl::EnvFactory pinned_environment()
{
    return {std::make_shared<const beam::AntennaConfig>(beam::sample_configuration(2, 6.0, 1.5, 2024)),
            env::EnvSettings{3, 200, 1}};
}

Outcome desk_learning()
{
    const rl::EnvFactory factory = pinned_environment();
    rl::DdqnConfig config;
    config.epochs = 30;
    const int n_seeds = 10;

    std::vector<std::uint64_t> baseline_seeds;
    for (int i = 0; i < 1000; ++i) {
        baseline_seeds.push_back(derive_seed(9, Stream::Evaluation, static_cast<std::uint64_t>(i)));
    }
    const double random_value = rl::random_policy_value(factory, baseline_seeds, 9);

    std::map<int, stats::RunMatrix> matrices;
    std::map<int, double> final_mean;
    for (int width : {64, 16}) {
        stats::RunMatrix m;
        m.values.resize(n_seeds, config.epochs);
        m.steps_per_checkpoint = static_cast<long>(config.train_envs) * factory.settings.horizon;
        double sum = 0.0;
        for (int seed = 0; seed < n_seeds; ++seed) {
            const auto start = std::chrono::steady_clock::now();
            const rl::RunLog log = rl::ddqn_train(
                factory, models::ClassicalSpec{width, 2, models::Activation::ReLU}, config,
                static_cast<std::uint64_t>(seed));
            for (int t = 0; t < config.epochs; ++t) {
                m.values(seed, t) = log.epochs[static_cast<std::size_t>(t)].value;
            }
            sum += log.epochs.back().value;
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            progress(fmt("width %d seed %d final V %.3f (%.0f s)", width, seed,
                         log.epochs.back().value, secs));
        }
        matrices[width] = m;
        final_mean[width] = sum / n_seeds;
    }
    const int s64 = stats::sample_complexity(matrices[64], 0.25, 0.75);
    const int s16 = stats::sample_complexity(matrices[16], 0.25, 0.75);
    const bool ok = final_mean[64] >= random_value + 0.1 && s64 <= s16;
    return {ok, fmt("mean final V %.3f (width 64) vs random %.3f; S(0.25,0.75) width 64 = %d, "
                    "width 16 = %d (final V %.3f)",
                    final_mean[64], random_value, s64, s16, final_mean[16])};
}

Outcome hybrid_smoke()
{
    const rl::EnvFactory factory = pinned_environment();
    rl::DdqnConfig config;
    config.epochs = 5;
    const models::HybridSpec spec{6, 2, qsim::Structure::IQP, qsim::GateFamily::ROT,
                                  models::Activation::None};

    bool finite = true;
    bool bounded = true;
    double worst_fd = 0.0;
    Rng rng = make_rng(10);
    auto check = [&](const rl::EpochLog &entry, const models::Network &policy) {
        finite = finite && std::isfinite(entry.mean_loss);
        bounded = bounded && entry.value >= 0.0 && entry.value <= 1.0;

        const auto *hybrid = dynamic_cast<const models::HybridNetwork *>(&policy);
        if (hybrid == nullptr) {
            finite = false;
            return;
        }
        models::Hybrid net = hybrid->hybrid();
        Eigen::MatrixXd x(3, 8);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x(i) = uniform01(rng);
        }
        Eigen::MatrixXd up(net.output_dim(), 8);
        for (Eigen::Index i = 0; i < up.size(); ++i) {
            up(i) = uniform(rng, -1.0, 1.0);
        }
        models::HybridCache cache;
        models::hybrid_forward(net, x, &cache);
        const Eigen::VectorXd analytic = models::hybrid_backward(net, cache, up).parameters;
        Eigen::VectorXd numeric(analytic.size());
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < numeric.size(); ++i) {
            const double keep = net.parameters()(i);
            net.parameters()(i) = keep + h;
            const double plus = (up.array() * models::hybrid_forward(net, x).array()).sum();
            net.parameters()(i) = keep - h;
            const double minus = (up.array() * models::hybrid_forward(net, x).array()).sum();
            net.parameters()(i) = keep;
            numeric(i) = (plus - minus) / (2 * h);
        }
        const double err = (analytic - numeric).lpNorm<Eigen::Infinity>() /
                           numeric.lpNorm<Eigen::Infinity>();
        worst_fd = std::max(worst_fd, err);
        progress(fmt("epoch %d loss %.4g V %.3f fd %.2g", entry.epoch, entry.mean_loss, entry.value,
                     err));
    };
    const rl::RunLog log = rl::ddqn_train(factory, spec, config, 0, check);
    const bool ok = static_cast<int>(log.epochs.size()) == 5 && finite && bounded && worst_fd < 1e-4;
    return {ok, fmt("%zu epochs, finite losses %s, V in [0,1] %s, max fd rel err %.2g",
                    log.epochs.size(), finite ? "yes" : "no", bounded ? "yes" : "no", worst_fd)};
}

struct Criterion {
    int id;
    const char *name;
    std::function<Outcome()> run;
};

const std::vector<Criterion> &criteria()
{
    static const std::vector<Criterion> all{
        {1, "parameter counts", parameter_counts},
        {2, "bias curve vs normal approximation", bias_curves},
        {3, "estimator consistency", consistency},
        {4, "closed-form intensity vs time-average oracle", physics_oracle},
        {5, "constant-speed trajectories", constant_speed},
        {6, "statevector norm and adjoint gradients", quantum},
        {7, "estimator algebra", estimator_algebra},
        {8, "outperformance verdicts", verdicts},
        {9, "desk-scale DDQN learning", desk_learning},
        {10, "hybrid DDQN smoke", hybrid_smoke},
    };
    return all;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    app.add_option("criteria", selected, "criterion numbers to run (default: all)")
        ->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    int failures = 0;
    for (const Criterion &c : criteria()) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception &e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2d %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", c.id, c.name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        failures += out.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
