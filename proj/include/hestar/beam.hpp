#pragma once

#include <cstdint>

#include "hestar/ensemble.hpp"

namespace hestar::beam {

// Source-exit beam parameters.  Peak velocities outside [300, 1500] m/s are
// accepted with a warning flag from validate().
struct SourceSpec {
    double peak_velocity = 800.0;          // m/s
    double velocity_spread_fwhm = 250.0;   // m/s
    double flux_per_sr = 4.0e14;           // atoms/(sr s)
    double divergence_halfangle = 15e-3;   // rad

    bool validate() const;  // throws on non-positive fields; returns false if warned
};

struct CollimatorSpec {
    double capture_halfangle = 20e-3;  // rad
    double gain = 30.0;                // flux multiplier at full capture
    double radius_of_curvature = 7.0;  // m
    int n_reflections = 12;

    void validate() const;
};

struct CollimationReport {
    double gain = 1.0;              // reported on-axis flux multiplier
    double captured_fraction = 0.0; // fraction of atoms inside the capture cone
    double flux_per_sr_out = 0.0;   // atoms/(sr s) after collimation
};

// Draw n atoms.  Speeds follow a Maxwell-Boltzmann-like peaked distribution
// (Gaussian about the peak, truncated at v > 0); transverse direction uniform
// in the divergence cone.  Beam axis is +x; deterministic per seed, and
// atom i depends only on (seed, i) so chunked generation equals serial.
Ensemble sample_source(const SourceSpec& spec, std::size_t n, std::uint64_t seed);

// Transverse-velocity compression for atoms inside the capture cone.  The
// gain knob is an empirical calibration target (compression factor
// 1/sqrt(gain)); longitudinal velocity is untouched and no speed increases.
Ensemble apply_collimation(const Ensemble& e, const CollimatorSpec& c,
                           CollimationReport* report = nullptr,
                           double flux_per_sr_in = 0.0);

}  // namespace hestar::beam
