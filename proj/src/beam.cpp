#include "qrlbench/beam.hpp"
#include "qrlbench/rng.hpp"

#include <algorithm>
#include <string>

namespace qrlbench::beam {

double Codebook::angle(int index) const
{
    if (index < 0 || index >= n_elements) {
        throw std::domain_error("codebook index " + std::to_string(index) + " out of range [0, " +
                                std::to_string(n_elements) + ")");
    }
    return 2.0 * M_PI * index / n_elements;
}

double Codebook::phase(int index) const { return M_PI * std::cos(angle(index)); }

double codebook_phase(int index, int n_elements)
{
    if (n_elements < 1) {
        throw std::domain_error("codebook must have at least one element");
    }
    return Codebook{n_elements}.phase(index);
}

void AntennaConfig::validate() const
{
    if (!(domain_size > 0.0)) {
        throw std::invalid_argument("domain_size must be positive");
    }
    if (!(cutoff_radius > 0.0)) {
        throw std::invalid_argument("cutoff_radius must be positive");
    }
    if (codebook.n_elements < 1) {
        throw std::invalid_argument("codebook.n_elements must be positive");
    }
    if (antennas.empty()) {
        throw std::invalid_argument("configuration needs at least one antenna");
    }
    for (std::size_t i = 0; i < antennas.size(); ++i) {
        const Antenna &a = antennas[i];
        if (a.n_senders < 1 || a.n_senders % 2 == 0) {
            throw std::invalid_argument("antenna " + std::to_string(i) +
                                        ": n_senders must be a positive odd integer");
        }
        if (std::abs(a.orientation.norm() - 1.0) > 1e-12) {
            throw std::invalid_argument("antenna " + std::to_string(i) +
                                        ": orientation must be a unit vector");
        }
        if ((a.position.array() < 0.0).any() || (a.position.array() > domain_size).any()) {
            throw std::invalid_argument("antenna " + std::to_string(i) + ": position outside domain");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if ((a.position - antennas[j].position).norm() <= min_distance) {
                throw std::invalid_argument("antennas " + std::to_string(j) + " and " +
                                            std::to_string(i) + " closer than min_distance");
            }
        }
    }
}

double phase_mismatch(const Antenna &antenna, double phase, const Point &point)
{
    const Point offset = point - antenna.position;
    const double r = offset.norm();
    const double cos_angle = r > 0.0 ? offset.dot(antenna.orientation) / r : 0.0;
    return M_PI * cos_angle - phase;
}

double intensity_unnormalized(const Antenna &antenna, double phase, const Point &point,
                              double cutoff, double amplitude)
{
    const double r = std::max((point - antenna.position).norm(), cutoff);
    const double xi = phase_mismatch(antenna, phase, point);
    return amplitude * amplitude / (2.0 * r * r) * array_factor(xi, antenna.n_senders);
}

double intensity(const Antenna &antenna, double phase, const Point &point, double cutoff)
{
    const double r = std::max((point - antenna.position).norm(), cutoff);
    const double n = antenna.n_senders;
    const double value =
        array_factor(phase_mismatch(antenna, phase, point), antenna.n_senders) / (n * n * r * r);
    return std::clamp(value, 0.0, 1.0);
}

double intensity_oracle(const Antenna &antenna, double phase, const Point &point,
                        int n_time_samples, double wave_number, double amplitude)
{
    if (n_time_samples < 10'000) {
        throw std::invalid_argument("intensity_oracle needs at least 1e4 time samples");
    }
    const int half = (antenna.n_senders - 1) / 2;
    const Point spacing = antenna.orientation * (M_PI / wave_number);

    // Each sender contributes (A / r_j) sin(k r_j - w t + j phi); only its
    // amplitude and phase offset matter for the time average.
    std::vector<double> amp;
    std::vector<double> offset;
    for (int j = -half; j <= half; ++j) {
        const double rj = (point - (antenna.position + j * spacing)).norm();
        amp.push_back(amplitude / rj);
        offset.push_back(wave_number * rj + j * phase);
    }

    // Uniform samples over one period integrate every harmonic below
    // n_time_samples exactly.
    double acc = 0.0;
    for (int s = 0; s < n_time_samples; ++s) {
        const double wt = 2.0 * M_PI * s / n_time_samples;
        double field = 0.0;
        for (std::size_t j = 0; j < amp.size(); ++j) {
            field += amp[j] * std::sin(offset[j] - wt);
        }
        acc += field * field;
    }
    return acc / n_time_samples;
}

Selection best_codebook(const Antenna &antenna, const Point &point, const Codebook &codebook,
                        double cutoff)
{
    Selection best{0, 0, -1.0};
    for (int i = 0; i < codebook.n_elements; ++i) {
        const double value = intensity(antenna, codebook.phase(i), point, cutoff);
        if (value > best.intensity) {
            best.element = i;
            best.intensity = value;
        }
    }
    return best;
}

Selection ground_truth(const AntennaConfig &config, const Point &point)
{
    if (config.antennas.empty()) {
        throw std::invalid_argument("ground_truth needs at least one antenna");
    }
    Selection best{0, 0, -1.0};
    for (int a = 0; a < config.n_antennas(); ++a) {
        Selection candidate =
            best_codebook(config.antennas[a], point, config.codebook, config.cutoff_radius);
        if (candidate.intensity > best.intensity) {
            best = candidate;
            best.antenna = a;
        }
    }
    return best;
}

AntennaConfig sample_configuration(int n_antennas, double domain_size, double min_distance,
                                   std::uint64_t seed, int n_senders, int n_elements,
                                   double cutoff_radius)
{
    if (n_antennas < 1) {
        throw std::invalid_argument("n_antennas must be at least 1");
    }
    if (!(domain_size > 0.0) || min_distance < 0.0) {
        throw std::invalid_argument("domain_size must be positive and min_distance non-negative");
    }
    if (min_distance > 0.0) {
        const double per_side = std::floor(domain_size / min_distance + 1.0);
        if (n_antennas > per_side * per_side) {
            throw std::invalid_argument("n_antennas=" + std::to_string(n_antennas) +
                                        " cannot be placed with the requested min_distance");
        }
    }

    AntennaConfig config;
    config.domain_size = domain_size;
    config.min_distance = min_distance;
    config.cutoff_radius = cutoff_radius;
    config.codebook.n_elements = n_elements;
    config.antennas.resize(n_antennas);

    Rng rng = make_rng(seed);
    for (long draw = 0; draw < kConfigurationDrawBudget; ++draw) {
        for (Antenna &a : config.antennas) {
            a.position = Point(uniform(rng, 0.0, domain_size), uniform(rng, 0.0, domain_size));
        }
        bool accepted = true;
        for (int i = 0; i < n_antennas && accepted; ++i) {
            for (int j = 0; j < i; ++j) {
                if ((config.antennas[i].position - config.antennas[j].position).norm() <=
                    min_distance) {
                    accepted = false;
                    break;
                }
            }
        }
        if (!accepted) {
            continue;
        }
        for (Antenna &a : config.antennas) {
            const double angle = uniform(rng, 0.0, 2.0 * M_PI);
            a.orientation = Point(std::cos(angle), std::sin(angle));
            a.n_senders = n_senders;
        }
        return config;
    }
    throw InfeasibleError("antenna placement exceeded the rejection budget of " +
                          std::to_string(kConfigurationDrawBudget) + " draws");
}

} // namespace qrlbench::beam
