#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hestar/ensemble.hpp"
#include "hestar/field_profile.hpp"
#include "hestar/physics.hpp"

namespace hestar::slower {

// ---------------------------------------------------------------------------
// Winding layout
// ---------------------------------------------------------------------------

struct Layer {
    int n_turns = 0;
    double radius = 0.0;      // m, loop radius
    double wire_pitch = 0.0;  // m, axial spacing between turns
    int current_sign = +1;
};

struct Section {
    double x_start = 0.0;  // m, axial position of the first turn
    std::vector<Layer> layers;
};

struct WindingLayout {
    std::vector<Section> sections;
    double current = 0.0;             // A
    double wire_cross_section = 0.0;  // m^2

    double total_wire_length() const;
    int total_turns() const;
};

// On-axis field of the layout at x: sum of circular-loop closed forms
// mu0 I R^2 / (2 (R^2 + d^2)^{3/2}), signed by current_sign.
double solenoid_field(const WindingLayout& layout, double x);
double solenoid_field_derivative(const WindingLayout& layout, double x);

// Analytic-backed profile of the layout sampled on [x0, x1].
FieldProfile layout_field_profile(const WindingLayout& layout, double x0, double x1,
                                  std::size_t n_samples);

// ---------------------------------------------------------------------------
// Design
// ---------------------------------------------------------------------------

struct InfeasibleDesign : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Maximum radiative deceleration hbar k Gamma / (2 m).
double max_deceleration(const physics::LaserConfig& laser, const physics::AtomState& atom);

// Minimum solenoid length for v0 -> vf at design efficiency eta.
double required_length(double v0, double vf, double eta_design,
                       const physics::LaserConfig& laser, const physics::AtomState& atom);

// Ideal target field: resonance condition mu_eff B(x)/hbar = delta0 + k v(x)
// with v(x) = sqrt(v0^2 - 2 eta a_max x) on the decelerating span, then an
// exponential fringe decay (scale tail_decay_length) over the spare length.
// Throws InfeasibleDesign (naming the minimum length) if length is too short.
FieldProfile target_field(double v0, double vf, double length, double eta_design,
                          const physics::LaserConfig& laser, const physics::AtomState& atom,
                          double tail_decay_length = 0.05, double sample_dx = 1e-3);

// ---------------------------------------------------------------------------
// Efficiency (local ratio of required to maximum deceleration)
// ---------------------------------------------------------------------------

struct EfficiencyProfile {
    std::vector<double> x_samples;  // m
    std::vector<double> eta;        // dimensionless

    double mean_over(double x0, double x1) const;
    double max_over(double x0, double x1) const;
};

// eta(x) = (2 m mu_eff)/(hbar^2 k^3 Gamma) * (-dB/dx) * (mu_eff B(x)/hbar - delta0).
// The x axis runs along the atom's travel direction, which puts the minus
// sign on the field slope relative to the trap-anchored convention.
EfficiencyProfile efficiency_profile(const FieldProfile& field,
                                     const physics::LaserConfig& laser,
                                     const physics::AtomState& atom,
                                     const std::vector<double>& query_grid = {});

double efficiency_at(double b, double dbdx, const physics::LaserConfig& laser,
                     const physics::AtomState& atom);

// ---------------------------------------------------------------------------
// Layout fitting
// ---------------------------------------------------------------------------

struct FitConstraints {
    double tube_radius = 17e-3;      // m, innermost layer sits just outside
    double wire_pitch = 2.5e-3;      // m, axial extent per turn
    double wire_thickness = 1.1e-3;  // m, radial extent per layer
    int max_layers = 34;             // per section
    double current = 2.0;            // A

    // When set, the fit additionally penalizes local efficiencies above
    // eta_limit on the decelerating span.
    std::optional<physics::LaserConfig> laser;
    std::optional<physics::AtomState> atom;
    double eta_limit = 0.98;
};

struct FitReport {
    double rms_residual = 0.0;  // T, over the decelerating span
    double max_residual = 0.0;  // T
    double eta_mean = 0.0;      // over the decelerating span (if context given)
    double eta_max = 0.0;
    double eta_min = 0.0;
    double wire_length = 0.0;   // m
    int iterations = 0;
};

// Integer turns-per-layer least-squares fit of the target on its decelerating
// span (coordinate descent to a local optimum: no single-layer +-1 change
// improves the objective).
WindingLayout fit_layout(const FieldProfile& target, const FitConstraints& constraints,
                         FitReport* report = nullptr);

// Objective minimized by fit_layout, evaluated from scratch (used by the
// local-optimality checks).
double fit_objective(const WindingLayout& layout, const FieldProfile& target,
                     const FitConstraints& constraints);

// ---------------------------------------------------------------------------
// Deceleration Monte Carlo
// ---------------------------------------------------------------------------

struct DecelOptions {
    bool recoil_noise = false;  // Poisson scattering + transverse recoil diffusion
    double t_max = 0.2;         // s, per-atom integration cap
};

struct Histogram {
    std::vector<double> bin_edges;
    std::vector<double> counts;
};

struct DecelResult {
    Ensemble ensemble;
    std::vector<double> exit_speeds;  // longitudinal exit velocity per atom
    Histogram exit_histogram;
};

// Integrate each atom through the field region with the mean radiative force
// (optionally Poisson recoil noise).  RK4 with adaptive sub-stepping so the
// per-step velocity change stays below Gamma/k.  Deterministic per seed.
DecelResult decelerate(const Ensemble& e, const FieldProfile& field,
                       const physics::LaserConfig& laser, const physics::AtomState& atom,
                       double dt, std::uint64_t seed, const DecelOptions& opts = {});

// ---------------------------------------------------------------------------
// Probe spectrum
// ---------------------------------------------------------------------------

struct Spectrum {
    std::vector<double> frequency_hz;  // bin centers
    std::vector<double> signal;
};

// Doppler spectrum of the longitudinal velocity distribution: each atom maps
// to f = k v cos(angle) / 2 pi; the area is proportional to the atom count.
Spectrum probe_spectrum(const Ensemble& e, const physics::LaserConfig& laser,
                        double probe_angle, double scan_range_hz, std::size_t n_bins = 200);

Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                         std::size_t n_bins);

}  // namespace hestar::slower
