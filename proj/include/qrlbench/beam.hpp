#pragma once

#include <Eigen/Core>

#include "qrlbench/errors.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace qrlbench::beam {

using Point = Eigen::Vector2d;

/// Linear phased array of an odd number of point senders centred on `position`,
/// with sender spacing along `orientation` tuned for maximal constructive
/// interference (|d| = pi / k).
struct Antenna {
    Point position = Point::Zero();
    Point orientation = Point::UnitX();
    int n_senders = 17;
};

/// Evenly spaced beam directions theta_i = 2 pi i / N_c with phase gradients
/// phi_i = pi cos(theta_i).
struct Codebook {
    int n_elements = 9;

    double angle(int index) const;
    double phase(int index) const;
};

struct AntennaConfig {
    std::vector<Antenna> antennas;
    double domain_size = 6.0;
    double min_distance = 1.5;
    double cutoff_radius = 0.001;
    Codebook codebook;

    int n_antennas() const { return static_cast<int>(antennas.size()); }

    /// Throws std::invalid_argument if any structural invariant is violated.
    void validate() const;
};

struct Selection {
    int antenna = 0;
    int element = 0;
    double intensity = 0.0;
};

/// Ratio sin^2(N xi / 2) / sin^2(xi / 2), continued to N^2 at the removable
/// singularities xi = 2 pi m.
template <typename Scalar>
Scalar array_factor(Scalar xi, int n_senders)
{
    using std::abs;
    using std::sin;
    const Scalar half = sin(xi / Scalar(2));
    if (abs(half) < Scalar(1e-9)) {
        return Scalar(n_senders) * Scalar(n_senders);
    }
    const Scalar num = sin(Scalar(n_senders) * xi / Scalar(2));
    return (num * num) / (half * half);
}

/// Phase mismatch xi = pi (R_hat . d_hat) - phi. A point on the antenna itself
/// has no direction; R_hat is taken as zero there.
double phase_mismatch(const Antenna &antenna, double phase, const Point &point);

double codebook_phase(int index, int n_elements);

/// Far-field time-averaged intensity A^2 / (2 R^2) * array_factor, with R
/// floored at `cutoff`. No normalisation or clamping.
double intensity_unnormalized(const Antenna &antenna, double phase, const Point &point,
                              double cutoff, double amplitude = 1.0);

/// Normalised intensity clamp(array_factor / (N_s^2 R^2), 0, 1), R floored at `cutoff`.
double intensity(const Antenna &antenna, double phase, const Point &point, double cutoff);

/// Numeric time average over one period of the squared sum of the exact
/// spherical waves from every sender. Reference path for tests, not used in
/// the environment. `wave_number` sets the sender spacing pi / k.
double intensity_oracle(const Antenna &antenna, double phase, const Point &point,
                        int n_time_samples, double wave_number, double amplitude = 1.0);

/// Element sweep for one antenna; ties resolved towards the lowest index.
Selection best_codebook(const Antenna &antenna, const Point &point, const Codebook &codebook,
                        double cutoff);

/// Exhaustive maximum over antennas x codebook elements, lowest pair on ties.
Selection ground_truth(const AntennaConfig &config, const Point &point);

using qrlbench::InfeasibleError;

inline constexpr long kConfigurationDrawBudget = 1'000'000;

/// Rejection-samples antenna positions uniformly in [0, L]^2 until all pairs
/// are farther apart than `min_distance`. Orientations are uniform on the circle.
AntennaConfig sample_configuration(int n_antennas, double domain_size, double min_distance,
                                   std::uint64_t seed, int n_senders = 17, int n_elements = 9,
                                   double cutoff_radius = 0.001);

} // namespace qrlbench::beam
