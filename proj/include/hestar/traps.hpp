#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hestar/ensemble.hpp"
#include "hestar/physics.hpp"

namespace hestar::traps {

// Ioffe-Pritchard trap characterized directly by gradient/curvature/bias.
struct IoffeTrapParams {
    double radial_gradient = 0.95;   // T/m   (95 G/cm)
    double axial_curvature = 11.0;   // T/m^2 (11 G/cm^2)
    double bias_field = 2.0e-4;      // T     (2 G)

    void validate() const;
};

struct TrapFrequencies {
    double omega_rad = 0.0;  // rad/s
    double omega_ax = 0.0;   // rad/s

    double omega_bar() const;  // geometric mean (w_r^2 w_ax)^(1/3)
};

// Harmonic expansion about the bias minimum:
//   w_ax  = sqrt(mu B'' / m)
//   w_rad = sqrt((mu/m) (B'^2/B0 - B''/2))
TrapFrequencies trap_frequencies(const IoffeTrapParams& p, const physics::AtomState& atom);

struct BiasNoiseResult {
    double bias = 0.0;            // T
    double abs_noise = 0.0;       // T rms
    double rel_bias_noise = 0.0;  // abs_noise / bias
};

// Bias field from the subtraction of two large fields with relative rms
// current noise.  Independent sources by default; the correlated flag models
// common-mode noise (fluctuations subtract like the fields themselves).
BiasNoiseResult bias_noise(double b_large1, double b_large2, double rel_noise_rms,
                           bool correlated = false);

// Per-stage ledger entry.
struct StageReport {
    std::string stage_name;
    double atom_count = 0.0;
    double temperature = 0.0;  // K
    double duration = 0.0;     // s
    std::optional<double> lifetime;  // s
    std::string notes;
};

struct StageLedger {
    std::vector<StageReport> entries;
    void write_csv(const std::string& path) const;
};

// Cooling/transfer stage: temperature rescale (Gaussian velocity redraw) and
// atom-number multiplier.
struct StageSpec {
    std::string name;
    std::optional<double> target_temperature;  // K; unset = unchanged
    double n_multiplier = 1.0;
    double duration = 0.0;  // s
    std::optional<double> lifetime;
    bool enabled = true;
    std::string notes;
};

// Default stage sequence from MOT hand-off to the compressed magnetic trap:
// molasses -> spin polarization -> magnetic-trap transfer -> 1D Doppler.
std::vector<StageSpec> default_stage_sequence();

Ensemble apply_stage(const Ensemble& e, const StageSpec& stage,
                     const physics::AtomState& atom, StageLedger& ledger,
                     std::uint64_t seed);

// Adiabatic trap compression: T scales by the mean-frequency ratio; N and the
// phase-space density are invariant (velocities rescaled deterministically).
Ensemble adiabatic_compress(const Ensemble& e, const TrapFrequencies& from,
                            const TrapFrequencies& to, double* temperature_in_out = nullptr);

// MOT stage outputs used as ledger defaults.
struct MotDefaults {
    double atom_count = 6e8;
    double temperature = 1.5e-3;  // K
    double lifetime = 0.19;       // s
    double radius = 1.9e-3;       // m
};

}  // namespace hestar::traps
