#include "qrlbench/stats.hpp"
#include "qrlbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qrlbench::stats {

void RunMatrix::validate() const
{
    if (values.rows() < 1 || values.cols() < 1) {
        throw std::invalid_argument("run matrix needs at least one run and one checkpoint");
    }
    if ((values.array() < 0.0).any() || (values.array() > 1.0).any() || !values.allFinite()) {
        throw std::invalid_argument("run matrix entries must lie in [0, 1]");
    }
    if (steps_per_checkpoint < 1) {
        throw std::invalid_argument("steps_per_checkpoint must be positive");
    }
}

EpsDeltaGrid EpsDeltaGrid::standard()
{
    return {{0.05, 0.10, 0.15, 0.20, 0.25}, {0.75, 0.80, 0.85, 0.90, 0.95}};
}

void EpsDeltaGrid::validate() const
{
    if (epsilons.empty() || deltas.empty()) {
        throw std::invalid_argument("epsilon/delta grid must not be empty");
    }
    for (double e : epsilons) {
        if (!(e >= 0.0 && e <= 1.0)) {
            throw std::invalid_argument("epsilon must lie in [0, 1]");
        }
    }
    for (double d : deltas) {
        if (!(d > 0.0 && d <= 1.0)) {
            throw std::invalid_argument("delta must lie in (0, 1]");
        }
    }
}

double empirical_probability_threshold(const Eigen::Ref<const Eigen::VectorXd> &column,
                                       double threshold)
{
    if (column.size() == 0) {
        throw std::invalid_argument("empirical probability of an empty column");
    }
    return static_cast<double>((column.array() >= threshold).count()) /
           static_cast<double>(column.size());
}

double empirical_probability(const Eigen::Ref<const Eigen::VectorXd> &column, double epsilon)
{
    return empirical_probability_threshold(column, 1.0 - epsilon);
}

namespace {

/// Per-checkpoint success counts of the rows listed in `rows` (all rows if empty).
Eigen::VectorXi success_counts(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> &success,
                               const std::vector<Eigen::Index> &rows)
{
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(success.cols());
    for (Eigen::Index r : rows) {
        counts += success.row(r).transpose().cast<int>();
    }
    return counts;
}

int count_below(const Eigen::VectorXi &counts, Eigen::Index n_runs, double delta)
{
    int s = 0;
    for (Eigen::Index t = 0; t < counts.size(); ++t) {
        if (static_cast<double>(counts(t)) / static_cast<double>(n_runs) < delta) {
            ++s;
        }
    }
    return s;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n)
{
    std::vector<Eigen::Index> rows(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        rows[i] = i;
    }
    return rows;
}

/// Bootstrap replicates of the estimator for every delta at a fixed threshold;
/// result[d][r] is replicate r for delta index d.
std::vector<std::vector<double>> bootstrap_replicates(const RunMatrix &matrix, double threshold,
                                                      const std::vector<double> &deltas,
                                                      int n_resamples, std::uint64_t seed)
{
    if (n_resamples < 100) {
        throw std::invalid_argument("cluster bootstrap needs at least 100 resamples");
    }
    const Eigen::Index n = matrix.n_runs();
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> success =
        (matrix.values.array() >= threshold).matrix();
    std::vector<std::vector<double>> out(deltas.size(), std::vector<double>(n_resamples));
    std::vector<Eigen::Index> rows(n);
    for (int r = 0; r < n_resamples; ++r) {
        Rng rng = make_rng(derive_seed(seed, Stream::Bootstrap, static_cast<std::uint64_t>(r)));
        for (Eigen::Index i = 0; i < n; ++i) {
            rows[i] = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
        }
        const Eigen::VectorXi counts = success_counts(success, rows);
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            out[d][r] = count_below(counts, n, deltas[d]);
        }
    }
    return out;
}

} // namespace

int sample_complexity_threshold(const RunMatrix &matrix, double threshold, double delta)
{
    matrix.validate();
    const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> success =
        (matrix.values.array() >= threshold).matrix();
    return count_below(success_counts(success, all_rows(matrix.n_runs())), matrix.n_runs(), delta);
}

int sample_complexity(const RunMatrix &matrix, double epsilon, double delta)
{
    return sample_complexity_threshold(matrix, 1.0 - epsilon, delta);
}

double percentile(std::vector<double> sample, double q)
{
    if (sample.empty()) {
        throw std::invalid_argument("percentile of an empty sample");
    }
    std::sort(sample.begin(), sample.end());
    const double pos = q * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sample.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sample[lo] + frac * (sample[hi] - sample[lo]);
}

Interval cluster_bootstrap(const RunMatrix &matrix, double epsilon, double delta, int n_resamples,
                           std::uint64_t seed)
{
    matrix.validate();
    const auto reps = bootstrap_replicates(matrix, 1.0 - epsilon, {delta}, n_resamples, seed);
    return {percentile(reps[0], 0.05), percentile(reps[0], 0.95)};
}

std::vector<ComplexityCell> complexity_table(const RunMatrix &matrix, const EpsDeltaGrid &grid,
                                             int n_resamples, std::uint64_t seed)
{
    matrix.validate();
    grid.validate();
    std::vector<ComplexityCell> cells;
    cells.reserve(grid.size());
    for (double eps : grid.epsilons) {
        const auto reps = bootstrap_replicates(matrix, 1.0 - eps, grid.deltas, n_resamples, seed);
        for (std::size_t d = 0; d < grid.deltas.size(); ++d) {
            ComplexityCell cell;
            cell.epsilon = eps;
            cell.delta = grid.deltas[d];
            cell.s_hat = sample_complexity(matrix, eps, cell.delta);
            cell.s_hat_interactions = cell.s_hat * matrix.steps_per_checkpoint;
            cell.interval = {percentile(reps[d], 0.05), percentile(reps[d], 0.95)};
            cell.saturated = cell.s_hat == matrix.n_checkpoints();
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::AOutperformsB: return "A_OUTPERFORMS_B";
    case Verdict::BOutperformsA: return "B_OUTPERFORMS_A";
    case Verdict::Neither: return "NEITHER";
    }
    return "?";
}

std::string to_string(Significance s)
{
    switch (s) {
    case Significance::ALower: return "A_LOWER";
    case Significance::BLower: return "B_LOWER";
    case Significance::None: return "NONE";
    }
    return "?";
}

OutperformanceVerdict outperforms(const RunMatrix &a, const RunMatrix &b, const EpsDeltaGrid &grid,
                                  int n_resamples, std::uint64_t seed)
{
    a.validate();
    b.validate();
    if (a.n_checkpoints() != b.n_checkpoints()) {
        throw std::invalid_argument("compared run matrices have different checkpoint counts (" +
                                    std::to_string(a.n_checkpoints()) + " vs " +
                                    std::to_string(b.n_checkpoints()) + ")");
    }
    if (a.steps_per_checkpoint != b.steps_per_checkpoint) {
        throw std::invalid_argument("compared run matrices use different checkpoint spacing");
    }
    const auto table_a = complexity_table(a, grid, n_resamples, seed);
    const auto table_b = complexity_table(b, grid, n_resamples, seed);

    OutperformanceVerdict result;
    bool a_lower = false;
    bool b_lower = false;
    for (std::size_t i = 0; i < table_a.size(); ++i) {
        ComparisonCell cell{table_a[i], table_b[i], Significance::None};
        if (cell.a.interval.p95 < cell.b.interval.p5) {
            cell.significance = Significance::ALower;
            a_lower = true;
        } else if (cell.b.interval.p95 < cell.a.interval.p5) {
            cell.significance = Significance::BLower;
            b_lower = true;
        }
        result.table.push_back(cell);
    }
    if (a_lower && !b_lower) {
        result.verdict = Verdict::AOutperformsB;
    } else if (b_lower && !a_lower) {
        result.verdict = Verdict::BOutperformsA;
    }
    return result;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double clt_reference(int n_runs, double delta, double p_t)
{
    const double gap = delta - p_t;
    const double sigma = std::sqrt(p_t * (1.0 - p_t));
    if (sigma == 0.0) {
        return gap > 0.0 ? 1.0 : (gap < 0.0 ? 0.0 : 0.5);
    }
    return normal_cdf(gap * std::sqrt(static_cast<double>(n_runs)) / sigma);
}

std::vector<BiasPoint> bias_curve(int n_runs, double delta, const std::vector<double> &p_grid,
                                  int n_trials, std::uint64_t seed)
{
    if (n_runs < 2) {
        throw std::invalid_argument("bias curve needs N >= 2");
    }
    if (n_trials < 1) {
        throw std::invalid_argument("bias curve needs at least one trial");
    }
    std::vector<BiasPoint> curve;
    curve.reserve(p_grid.size());
    for (std::size_t k = 0; k < p_grid.size(); ++k) {
        const double p_t = p_grid[k];
        if (!(p_t >= 0.0 && p_t <= 1.0)) {
            throw std::invalid_argument("P_t grid values must lie in [0, 1]");
        }
        // V ~ Uniform(0, 1) exceeds V* = 1 - P_t with probability P_t.
        const double threshold = 1.0 - p_t;
        Rng rng = make_rng(derive_seed(seed, 0xB1A5, k));
        long below = 0;
        for (int trial = 0; trial < n_trials; ++trial) {
            int hits = 0;
            for (int i = 0; i < n_runs; ++i) {
                hits += uniform01(rng) >= threshold ? 1 : 0;
            }
            if (static_cast<double>(hits) / n_runs < delta) {
                ++below;
            }
        }
        curve.push_back({p_t, static_cast<double>(below) / n_trials, clt_reference(n_runs, delta, p_t)});
    }
    return curve;
}

RunMatrix simulate_bernoulli_runs(const std::vector<double> &success_probability, int n_runs,
                                  double epsilon, std::uint64_t seed)
{
    const auto t_count = static_cast<Eigen::Index>(success_probability.size());
    RunMatrix m{Eigen::MatrixXd(n_runs, t_count), 2000};
    const double threshold = 1.0 - epsilon;
    Rng rng = make_rng(seed);
    for (Eigen::Index t = 0; t < t_count; ++t) {
        for (int i = 0; i < n_runs; ++i) {
            const bool success = uniform01(rng) < success_probability[t];
            // Successful runs land in [1 - eps, 1], failures strictly below.
            m.values(i, t) = success ? uniform(rng, threshold, 1.0) : uniform01(rng) * threshold;
        }
    }
    return m;
}

std::vector<ConsistencyRow> consistency_check(const std::vector<double> &success_probability,
                                              const std::vector<int> &n_ladder, double epsilon,
                                              double delta, int repetitions, std::uint64_t seed)
{
    if (success_probability.empty() || repetitions < 1) {
        throw std::invalid_argument("consistency check needs a process and repetitions");
    }
    int true_s = 0;
    for (double p : success_probability) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("success probabilities must lie in [0, 1]");
        }
        const bool degenerate = p == 0.0 || p == 1.0;
        if (!degenerate && std::abs(p - delta) < 0.1) {
            throw std::invalid_argument("success probabilities must stay at least 0.1 away from delta");
        }
        true_s += p < delta ? 1 : 0;
    }

    std::vector<ConsistencyRow> rows;
    for (std::size_t k = 0; k < n_ladder.size(); ++k) {
        const int n = n_ladder[k];
        ConsistencyRow row{n, true_s, 0.0, 0, 0.0};
        int within = 0;
        for (int rep = 0; rep < repetitions; ++rep) {
            const RunMatrix m = simulate_bernoulli_runs(
                success_probability, n, epsilon,
                derive_seed(seed, k + 1, static_cast<std::uint64_t>(rep)));
            const int err = std::abs(sample_complexity(m, epsilon, delta) - true_s);
            row.mean_abs_error += err;
            row.max_abs_error = std::max(row.max_abs_error, err);
            within += err <= 1 ? 1 : 0;
        }
        row.mean_abs_error /= repetitions;
        row.fraction_within_one = static_cast<double>(within) / repetitions;
        rows.push_back(row);
    }
    return rows;
}

} // namespace qrlbench::stats
