#pragma once

#include <Eigen/Core>

#include "qrlbench/errors.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qrlbench::trajectory {

using Point = Eigen::Vector2d;

/// Natural cubic spline through 2D support points at uniform knots
/// t_i = i / (n - 1), i = 0..n-1. Each column of the coefficient matrices holds
/// one segment: s(t) = a + b u + c u^2 + d u^3 with u = t - t_i.
class CubicSpline {
public:
    CubicSpline() = default;
    explicit CubicSpline(std::vector<Point> support_points);

    Point operator()(double t) const;
    Point derivative(double t) const;
    double speed(double t) const { return derivative(t).norm(); }

    const std::vector<Point> &support_points() const { return points_; }
    int n_segments() const { return static_cast<int>(points_.size()) - 1; }

private:
    int segment(double t, double &u) const;

    std::vector<Point> points_;
    Eigen::Matrix2Xd a_, b_, c_, d_;
    double h_ = 1.0;
};

/// tau(t_k) on the uniform grid t_k = k / M together with the total arc length v0.
struct ArcTable {
    Eigen::VectorXd tau;
    double total_length = 0.0;

    int resolution() const { return static_cast<int>(tau.size()) - 1; }
};

/// Composite Simpson per grid cell (midpoint included) of the spline speed.
/// The last entry is pinned to exactly 1.
ArcTable arc_length_table(const CubicSpline &spline, int resolution = 1024);

inline constexpr int kBoundsCheckPoints = 2000;
inline constexpr long kTrajectoryDrawBudget = 100'000;

/// Constant-speed user path through the domain.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::vector<Point> support_points, double domain_size, int resolution = 1024);

    /// Position after fraction `tau` of the total arc length.
    Point position(double tau) const;

    /// Spline parameter t at progress tau; inverse of the arc table.
    double parameter_at(double tau) const;
    /// Progress tau at spline parameter t.
    double progress_at(double t) const;

    double speed() const { return table_.total_length; }
    double domain_size() const { return domain_size_; }
    int degree() const { return static_cast<int>(spline_.support_points().size()); }
    const CubicSpline &spline() const { return spline_; }
    const ArcTable &table() const { return table_; }
    const std::vector<Point> &support_points() const { return spline_.support_points(); }

    /// Open-box check 0 < x, y < L on kBoundsCheckPoints interior parameters.
    bool in_bounds() const;

private:
    double partial_length(int cell, double t) const;

    CubicSpline spline_;
    ArcTable table_;
    double domain_size_ = 6.0;
};

using qrlbench::InfeasibleError;

/// Samples `degree` support points (x_1 = 0, x_n = L, everything else uniform
/// in [0, L]) and resamples until the spline stays inside the domain.
Trajectory sample_trajectory(int degree, double domain_size, std::uint64_t seed,
                             int resolution = 1024);

} // namespace qrlbench::trajectory
