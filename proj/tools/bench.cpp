#include "qrlbench/bench.hpp"
#include "qrlbench/errors.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace qrlbench;

namespace {

/// Writes to `path`, or stdout when the path is empty or "-".
class Output {
public:
    explicit Output(const std::string &path)
    {
        if (!path.empty() && path != "-") {
            const auto parent = bench::fs::path(path).parent_path();
            if (!parent.empty()) {
                bench::fs::create_directories(parent);
            }
            file_.open(path);
            if (!file_) {
                throw std::runtime_error("cannot write " + path);
            }
        }
    }
    std::ostream &stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

bench::EstimatorConfig estimator_from(const std::string &epsilons, const std::string &deltas,
                                      int n_resamples, std::uint64_t seed)
{
    bench::EstimatorConfig e;
    if (!epsilons.empty()) {
        e.grid.epsilons = bench::parse_number_list(epsilons);
    }
    if (!deltas.empty()) {
        e.grid.deltas = bench::parse_number_list(deltas);
    }
    e.grid.validate();
    e.n_resamples = n_resamples;
    e.seed = seed;
    return e;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Sample-complexity benchmark for beam-management agents"};
    app.require_subcommand(1);

    std::string config_path;
    std::string seeds;
    int jobs = 1;
    auto *train = app.add_subcommand("train", "Train one run per seed and write JSONL logs");
    train->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("--seeds", seeds, "Seed range A..B (inclusive), overrides the sweep block");
    train->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    std::string log_dir;
    std::string epsilons;
    std::string deltas;
    int n_resamples = 1000;
    std::uint64_t bootstrap_seed = 0;
    std::string out_path;
    auto *complexity = app.add_subcommand("complexity", "Sample complexity table from a log directory");
    complexity->add_option("-d,--dir", log_dir, "Directory of run-*.jsonl files")->required();
    complexity->add_option("--epsilons", epsilons, "Comma-separated epsilon grid");
    complexity->add_option("--deltas", deltas, "Comma-separated delta grid");
    complexity->add_option("--resamples", n_resamples, "Bootstrap resamples");
    complexity->add_option("--seed", bootstrap_seed, "Bootstrap seed");
    complexity->add_option("-o,--out", out_path, "CSV output (default stdout)");

    std::string dir_a;
    std::string dir_b;
    auto *compare = app.add_subcommand("compare", "Outperformance verdict for two log directories");
    compare->add_option("-a", dir_a, "Log directory of algorithm A")->required();
    compare->add_option("-b", dir_b, "Log directory of algorithm B")->required();
    compare->add_option("--epsilons", epsilons, "Comma-separated epsilon grid");
    compare->add_option("--deltas", deltas, "Comma-separated delta grid");
    compare->add_option("--resamples", n_resamples, "Bootstrap resamples");
    compare->add_option("--seed", bootstrap_seed, "Bootstrap seed");
    compare->add_option("-o,--out", out_path, "Per-cell CSV output (default stdout)");

    int resolution = 50;
    auto *render = app.add_subcommand("render", "Ground-truth antenna map on a regular grid");
    render->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    render->add_option("-r,--resolution", resolution, "Grid points per axis")->check(CLI::PositiveNumber);
    render->add_option("-o,--out", out_path, "CSV output (default stdout)");

    int n_runs = 100;
    std::string bias_deltas = "0.25,0.5,0.75";
    int trials = 10000;
    std::uint64_t sim_seed = 0;
    auto *biascheck = app.add_subcommand("biascheck", "P(P_hat < delta) against the normal approximation");
    biascheck->add_option("-N", n_runs, "Runs per population");
    biascheck->add_option("--delta", bias_deltas, "Comma-separated delta values");
    biascheck->add_option("--trials", trials, "Trials per grid point");
    biascheck->add_option("--seed", sim_seed, "Simulation seed");
    biascheck->add_option("-o,--out", out_path, "CSV output (default stdout)");

    std::string checkpoint;
    int episodes = 1000;
    std::uint64_t eval_seed = 0;
    auto *evaluate = app.add_subcommand("evaluate", "Greedy evaluation against random and optimal baselines");
    evaluate->add_option("-m,--model", checkpoint, "Checkpoint file")->required();
    evaluate->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    evaluate->add_option("-n,--episodes", episodes, "Episodes")->check(CLI::PositiveNumber);
    evaluate->add_option("--seed", eval_seed, "Trajectory seed");
    evaluate->add_option("-o,--out", out_path, "Per-episode CSV output (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const bench::ExperimentConfig config = bench::load_config(config_path);
            bench::TrainOptions options;
            if (!seeds.empty()) {
                options.seeds = bench::parse_seed_range(seeds);
            }
            options.jobs = jobs;
            options.progress = &std::cerr;
            const auto summary = bench::cmd_train(config, options);
            std::cout << summary.directory.string() << '\n'
                      << "trained " << summary.trained.size() << ", skipped "
                      << summary.skipped.size() << '\n';
        } else if (*complexity) {
            Output out(out_path);
            bench::cmd_complexity(log_dir, estimator_from(epsilons, deltas, n_resamples, bootstrap_seed),
                                  out.stream());
        } else if (*compare) {
            Output out(out_path);
            const auto verdict = bench::cmd_compare(
                dir_a, dir_b, estimator_from(epsilons, deltas, n_resamples, bootstrap_seed), out.stream());
            std::cerr << "verdict: " << stats::to_string(verdict.verdict) << '\n';
            if (!out_path.empty() && out_path != "-") {
                std::cout << stats::to_string(verdict.verdict) << '\n';
            }
        } else if (*render) {
            Output out(out_path);
            bench::cmd_render(bench::load_config(config_path).environment, resolution, out.stream());
        } else if (*biascheck) {
            Output out(out_path);
            bench::cmd_biascheck(n_runs, bench::parse_number_list(bias_deltas), trials, sim_seed,
                                 out.stream());
        } else if (*evaluate) {
            Output out(out_path);
            const auto summary =
                bench::cmd_evaluate(bench::load_checkpoint(checkpoint),
                                    bench::load_config(config_path).environment, episodes,
                                    eval_seed, out.stream());
            std::cerr << "episodes " << summary.episodes << '\n'
                      << "mean relative return " << summary.mean_relative_return << '\n'
                      << "mean intensity sum: policy " << summary.mean_policy << ", random "
                      << summary.mean_random << ", optimal " << summary.mean_optimal << '\n';
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
