#include "hestar/beam.hpp"

#include <cmath>
#include <stdexcept>

#include "hestar/physics.hpp"
#include "hestar/rng.hpp"

namespace hestar::beam {

bool SourceSpec::validate() const {
    if (peak_velocity <= 0.0 || velocity_spread_fwhm < 0.0 || flux_per_sr <= 0.0 ||
        divergence_halfangle <= 0.0)
        throw std::invalid_argument("SourceSpec: all fields must be positive");
    return peak_velocity >= 300.0 && peak_velocity <= 1500.0;
}

void CollimatorSpec::validate() const {
    if (gain < 1.0) throw std::invalid_argument("CollimatorSpec: gain must be >= 1");
    if (capture_halfangle < 0.0)
        throw std::invalid_argument("CollimatorSpec: capture_halfangle must be >= 0");
}

Ensemble sample_source(const SourceSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n == 0) throw std::invalid_argument("sample_source: n must be >= 1");

    const double sigma = spec.velocity_spread_fwhm / 2.3548200450309493;  // FWHM -> sigma
    Ensemble e;
    e.positions.resize(n);
    e.velocities.resize(n);
    e.atom_count = double(n);

    Rng master(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r = master.fork(i);
        double speed = spec.peak_velocity;
        if (sigma > 0.0) {
            do {
                speed = r.normal(spec.peak_velocity, sigma);
            } while (speed <= 0.0);
        }
        // Uniform over the solid angle of the divergence cone about +x.
        const double cmin = std::cos(spec.divergence_halfangle);
        const double c = 1.0 - r.uniform() * (1.0 - cmin);
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const double phi = r.uniform(0.0, physics::two_pi);
        e.velocities[i] = {speed * c, speed * s * std::cos(phi), speed * s * std::sin(phi)};
        e.positions[i] = {0.0, 0.0, 0.0};
    }
    return e;
}

Ensemble apply_collimation(const Ensemble& e, const CollimatorSpec& c,
                           CollimationReport* report, double flux_per_sr_in) {
    c.validate();
    Ensemble out = e;
    const double compression = 1.0 / std::sqrt(c.gain);
    std::size_t captured = 0;
    for (auto& v : out.velocities) {
        const double vt = std::hypot(v[1], v[2]);
        const double angle = std::atan2(vt, v[0]);
        if (c.capture_halfangle > 0.0 && angle <= c.capture_halfangle && v[0] > 0.0) {
            v[1] *= compression;
            v[2] *= compression;
            ++captured;
        }
    }
    const double frac = out.size() ? double(captured) / double(out.size()) : 0.0;
    const double gain = 1.0 + (c.gain - 1.0) * frac;
    if (report) {
        report->gain = gain;
        report->captured_fraction = frac;
        report->flux_per_sr_out = flux_per_sr_in * gain;
    }
    return out;
}

}  // namespace hestar::beam
