#include "qrlbench/trajectory.hpp"
#include "qrlbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qrlbench::trajectory {

CubicSpline::CubicSpline(std::vector<Point> support_points) : points_(std::move(support_points))
{
    const int n = static_cast<int>(points_.size());
    if (n < 2) {
        throw std::invalid_argument("spline needs at least two support points");
    }
    const int segments = n - 1;
    h_ = 1.0 / segments;

    // Second derivatives at the knots; natural end conditions pin both ends to
    // zero. Uniform spacing gives the tridiagonal system (1, 4, 1) M = rhs.
    Eigen::Matrix2Xd m = Eigen::Matrix2Xd::Zero(2, n);
    if (n > 2) {
        const int interior = n - 2;
        Eigen::VectorXd diag = Eigen::VectorXd::Constant(interior, 4.0);
        Eigen::Matrix2Xd rhs(2, interior);
        for (int i = 1; i <= interior; ++i) {
            rhs.col(i - 1) = 6.0 * (points_[i + 1] - 2.0 * points_[i] + points_[i - 1]) / (h_ * h_);
        }
        // Thomas algorithm; off-diagonals are all 1.
        for (int i = 1; i < interior; ++i) {
            const double w = 1.0 / diag(i - 1);
            diag(i) -= w;
            rhs.col(i) -= w * rhs.col(i - 1);
        }
        m.col(interior) = rhs.col(interior - 1) / diag(interior - 1);
        for (int i = interior - 2; i >= 0; --i) {
            m.col(i + 1) = (rhs.col(i) - m.col(i + 2)) / diag(i);
        }
    }

    a_.resize(2, segments);
    b_.resize(2, segments);
    c_.resize(2, segments);
    d_.resize(2, segments);
    for (int i = 0; i < segments; ++i) {
        a_.col(i) = points_[i];
        b_.col(i) = (points_[i + 1] - points_[i]) / h_ - h_ * (2.0 * m.col(i) + m.col(i + 1)) / 6.0;
        c_.col(i) = m.col(i) / 2.0;
        d_.col(i) = (m.col(i + 1) - m.col(i)) / (6.0 * h_);
    }
}

int CubicSpline::segment(double t, double &u) const
{
    const int segments = n_segments();
    int i = static_cast<int>(std::floor(t / h_));
    i = std::clamp(i, 0, segments - 1);
    u = t - i * h_;
    return i;
}

Point CubicSpline::operator()(double t) const
{
    double u = 0.0;
    const int i = segment(t, u);
    return a_.col(i) + u * (b_.col(i) + u * (c_.col(i) + u * d_.col(i)));
}

Point CubicSpline::derivative(double t) const
{
    double u = 0.0;
    const int i = segment(t, u);
    return b_.col(i) + u * (2.0 * c_.col(i) + 3.0 * u * d_.col(i));
}

namespace {

double simpson(const CubicSpline &spline, double lo, double hi)
{
    return (hi - lo) / 6.0 *
           (spline.speed(lo) + 4.0 * spline.speed(0.5 * (lo + hi)) + spline.speed(hi));
}

} // namespace

ArcTable arc_length_table(const CubicSpline &spline, int resolution)
{
    if (resolution < 256) {
        throw std::invalid_argument("arc-length table needs at least 256 subintervals");
    }
    ArcTable table;
    table.tau.resize(resolution + 1);
    table.tau(0) = 0.0;
    for (int k = 0; k < resolution; ++k) {
        const double lo = static_cast<double>(k) / resolution;
        const double hi = static_cast<double>(k + 1) / resolution;
        const double step = simpson(spline, lo, hi);
        if (!(step > 0.0)) {
            throw std::invalid_argument("spline has a stationary stretch; arc length not invertible");
        }
        table.tau(k + 1) = table.tau(k) + step;
    }
    table.total_length = table.tau(resolution);
    table.tau /= table.total_length;
    table.tau(resolution) = 1.0;
    return table;
}

Trajectory::Trajectory(std::vector<Point> support_points, double domain_size, int resolution)
    : spline_(std::move(support_points)), domain_size_(domain_size)
{
    table_ = arc_length_table(spline_, resolution);
}

double Trajectory::partial_length(int cell, double t) const
{
    const double lo = static_cast<double>(cell) / table_.resolution();
    return t > lo ? simpson(spline_, lo, t) : 0.0;
}

double Trajectory::progress_at(double t) const
{
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::domain_error("spline parameter outside [0, 1]");
    }
    const int m = table_.resolution();
    const int cell = std::min(static_cast<int>(t * m), m - 1);
    return std::min(table_.tau(cell) + partial_length(cell, t) / table_.total_length, 1.0);
}

double Trajectory::parameter_at(double tau) const
{
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::domain_error("progress tau outside [0, 1]");
    }
    const Eigen::VectorXd &table = table_.tau;
    const int m = table_.resolution();
    const auto *upper = std::upper_bound(table.data(), table.data() + m + 1, tau);
    const int cell = std::clamp(static_cast<int>(upper - table.data()) - 1, 0, m - 1);

    double lo = static_cast<double>(cell) / m;
    double hi = static_cast<double>(cell + 1) / m;
    const double tau_lo = table(cell);
    const double tau_hi = table(cell + 1);
    if (tau <= tau_lo) {
        return lo;
    }
    if (tau >= tau_hi) {
        return hi;
    }

    // Linear interpolation as the starting point, then Newton on the local
    // Simpson integral with bisection fallback inside the bracketing cell.
    double t = lo + (hi - lo) * (tau - tau_lo) / (tau_hi - tau_lo);
    for (int iter = 0; iter < 50; ++iter) {
        const double residual = tau_lo + partial_length(cell, t) / table_.total_length - tau;
        if (std::abs(residual) < 1e-15) {
            break;
        }
        if (residual > 0.0) {
            hi = t;
        } else {
            lo = t;
        }
        const double slope = spline_.speed(t) / table_.total_length;
        double next = slope > 0.0 ? t - residual / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - t) < 1e-16) {
            break;
        }
        t = next;
    }
    return t;
}

Point Trajectory::position(double tau) const { return spline_(parameter_at(tau)); }

bool Trajectory::in_bounds() const
{
    for (int k = 1; k <= kBoundsCheckPoints; ++k) {
        const Point p = spline_(static_cast<double>(k) / (kBoundsCheckPoints + 1));
        if (!(p.x() > 0.0 && p.x() < domain_size_ && p.y() > 0.0 && p.y() < domain_size_)) {
            return false;
        }
    }
    return true;
}

Trajectory sample_trajectory(int degree, double domain_size, std::uint64_t seed, int resolution)
{
    if (degree < 2) {
        throw std::invalid_argument("trajectory degree must be at least 2");
    }
    if (!(domain_size > 0.0)) {
        throw std::invalid_argument("domain_size must be positive");
    }
    Rng rng = make_rng(seed);
    std::vector<Point> points(degree);
    for (long draw = 0; draw < kTrajectoryDrawBudget; ++draw) {
        for (int i = 0; i < degree; ++i) {
            const double x = uniform(rng, 0.0, domain_size);
            const double y = uniform(rng, 0.0, domain_size);
            points[i] = Point(x, y);
        }
        points.front().x() = 0.0;
        points.back().x() = domain_size;

        const CubicSpline spline(points);
        bool inside = true;
        for (int k = 1; k <= kBoundsCheckPoints && inside; ++k) {
            const Point p = spline(static_cast<double>(k) / (kBoundsCheckPoints + 1));
            inside = p.x() > 0.0 && p.x() < domain_size && p.y() > 0.0 && p.y() < domain_size;
        }
        if (inside) {
            return Trajectory(points, domain_size, resolution);
        }
    }
    throw InfeasibleError("trajectory sampling exceeded the rejection budget of " +
                          std::to_string(kTrajectoryDrawBudget) + " draws");
}

} // namespace qrlbench::trajectory
