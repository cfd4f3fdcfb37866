#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

/// Empirical sample-complexity estimation over a population of training runs,
/// cluster-bootstrap percentile intervals and the pairwise outperformance test.
namespace qrlbench::stats {

/// values(i, t) is the validation value of run i at checkpoint t, in [0, 1].
struct RunMatrix {
    Eigen::MatrixXd values;
    long steps_per_checkpoint = 2000;

    Eigen::Index n_runs() const { return values.rows(); }
    Eigen::Index n_checkpoints() const { return values.cols(); }
    void validate() const;
};

struct EpsDeltaGrid {
    std::vector<double> epsilons;
    std::vector<double> deltas;

    /// eps in {0.05, ..., 0.25}, delta in {0.75, ..., 0.95}.
    static EpsDeltaGrid standard();
    std::size_t size() const { return epsilons.size() * deltas.size(); }
    void validate() const;
};

/// Fraction of entries >= 1 - epsilon.
double empirical_probability(const Eigen::Ref<const Eigen::VectorXd> &column, double epsilon);
/// Fraction of entries >= threshold (absolute V* form).
double empirical_probability_threshold(const Eigen::Ref<const Eigen::VectorXd> &column,
                                       double threshold);

/// Number of checkpoints whose empirical success probability is strictly below delta.
int sample_complexity(const RunMatrix &matrix, double epsilon, double delta);
int sample_complexity_threshold(const RunMatrix &matrix, double threshold, double delta);

struct Interval {
    double p5 = 0.0;
    double p95 = 0.0;
};

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> sample, double q);

/// Resamples whole runs with replacement `n_resamples` times and returns the
/// 5th / 95th percentiles of the recomputed estimator. Resample r draws from
/// a substream of `seed` indexed by r.
Interval cluster_bootstrap(const RunMatrix &matrix, double epsilon, double delta, int n_resamples,
                           std::uint64_t seed);

struct ComplexityCell {
    double epsilon = 0.0;
    double delta = 0.0;
    int s_hat = 0;
    long s_hat_interactions = 0;
    Interval interval;
    bool saturated = false;
};

/// Point estimate and bootstrap interval for every grid cell (epsilon-major).
std::vector<ComplexityCell> complexity_table(const RunMatrix &matrix, const EpsDeltaGrid &grid,
                                             int n_resamples, std::uint64_t seed);

enum class Verdict { AOutperformsB, BOutperformsA, Neither };
enum class Significance { ALower, BLower, None };

std::string to_string(Verdict v);
std::string to_string(Significance s);

struct ComparisonCell {
    ComplexityCell a;
    ComplexityCell b;
    Significance significance = Significance::None;
};

struct OutperformanceVerdict {
    Verdict verdict = Verdict::Neither;
    std::vector<ComparisonCell> table;
};

/// Two algorithms differ significantly on a cell when their [p5, p95]
/// intervals are disjoint. A outperforms B when it is significantly lower
/// somewhere and significantly higher nowhere. Both populations are
/// bootstrapped with the same seed, which keeps the relation antisymmetric.
OutperformanceVerdict outperforms(const RunMatrix &a, const RunMatrix &b, const EpsDeltaGrid &grid,
                                  int n_resamples, std::uint64_t seed);

double normal_cdf(double z);

struct BiasPoint {
    double p_t = 0.0;
    double empirical = 0.0;
    double clt_reference = 0.0;
};

/// P(P_hat < delta) against the true success probability P_t for N uniform
/// runs, next to the normal approximation Phi((delta - P_t) sqrt(N) / sigma).
std::vector<BiasPoint> bias_curve(int n_runs, double delta, const std::vector<double> &p_grid,
                                  int n_trials, std::uint64_t seed);

/// Normal-approximation reference for a single grid point.
double clt_reference(int n_runs, double delta, double p_t);

struct ConsistencyRow {
    int n_runs = 0;
    int true_s = 0;
    double mean_abs_error = 0.0;
    int max_abs_error = 0;
    double fraction_within_one = 0.0;
};

/// Simulates N runs of a process with known per-checkpoint success
/// probabilities P_t and compares the estimator to the true complexity,
/// `repetitions` times per population size.
std::vector<ConsistencyRow> consistency_check(const std::vector<double> &success_probability,
                                              const std::vector<int> &n_ladder, double epsilon,
                                              double delta, int repetitions, std::uint64_t seed);

/// Draws a run matrix whose column t succeeds independently with probability p[t].
RunMatrix simulate_bernoulli_runs(const std::vector<double> &success_probability, int n_runs,
                                  double epsilon, std::uint64_t seed);

} // namespace qrlbench::stats
