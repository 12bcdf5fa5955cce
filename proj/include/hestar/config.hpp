#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "hestar/beam.hpp"
#include "hestar/cloud.hpp"
#include "hestar/detector.hpp"
#include "hestar/physics.hpp"
#include "hestar/traps.hpp"

namespace hestar::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat INI-style run configuration.  Grammar:
//   [section]
//   key = value        # trailing comments with '#' or ';'
// Every key has a default; unknown sections or keys are hard errors.
// Frequencies are plain Hz in the file and converted to angular units at
// this boundary.
struct RunConfig {
    struct Physics {
        double mass_amu = 4.002602;
        double mu_eff_bohr = 2.0;
        double scattering_length_m = 5.0e-9;
        double gamma_1083_hz = 43.0e6 / 26.5;
        double gamma_389_hz = 1.5e6;
    } physics;

    struct Source {
        double peak_velocity_m_s = 800.0;
        double velocity_spread_fwhm_m_s = 250.0;
        double flux_per_sr = 4.0e14;
        double divergence_halfangle_rad = 15e-3;
        std::uint64_t n_samples = 4000;
    } source;

    struct Collimator {
        double capture_halfangle_rad = 20e-3;
        double gain = 30.0;
    } collimator;

    struct Slower {
        double length_m = 1.36;
        double detuning_hz = -370e6;
        double eta_design = 0.7;
        double capture_velocity_m_s = 850.0;
        double exit_velocity_m_s = 80.0;
        double intensity_sat_units = 10.0;
        double dt_s = 1e-5;
        bool fit_windings = false;  // pipeline uses the designed field; the
                                    // design-slower subcommand always fits
    } slower;

    struct Trap {
        double radial_gradient_t_m = 0.95;
        double axial_curvature_t_m2 = 11.0;
        double bias_field_t = 2.0e-4;
    } trap;

    struct Stages {
        double mot_atom_count = 6e8;
        double mot_temperature_k = 1.5e-3;
        bool molasses = true;
        bool spin_polarization = true;
        bool transfer = true;
        bool doppler_1d = true;
    } stages;

    struct Evaporation {
        double f_start_hz = 75e6;
        double f_end_hz = 5.61e6;
        double duration_s = 8.0;
        std::string shape = "exponential";
        double eta_cut = 6.0;
        double trap_bottom_hz = 5.6e6;
        double lifetime_s = 61.0;
        // 0 = take the pipeline stage-ledger values; the standalone
        // `evaporate` subcommand falls back to 5e8 / 150 uK.
        double start_atom_count = 0.0;
        double start_temperature_k = 0.0;
    } evaporation;

    struct Detector {
        double drop_distance_m = 0.8;
        double efficiency = 0.07;
        double dead_time_s = 25e-9;
        double tdc_bin_s = 6.8e-12;
        double propagation_speed_m_s = 1.0e6;
        double spatial_jitter_m = 177e-6;
        double temporal_jitter_s = 220e-12;
        bool enable_jitter = true;
        bool enable_quantization = true;
        double rotation_rad = 0.0;
        double discard_margin_m = 5e-3;
        std::uint64_t n_drop_samples = 30000;
    } detector;

    struct Run {
        std::uint64_t master_seed = 20260826;
        std::string output_dir = "out";
        std::uint64_t threads = 1;
    } run;

    // Conversions to module inputs.
    hestar::physics::AtomState atom() const;
    hestar::physics::Transition t1083() const;
    hestar::physics::Transition t389() const;
    hestar::physics::LaserConfig slower_laser() const;
    beam::SourceSpec source_spec() const;
    beam::CollimatorSpec collimator_spec() const;
    traps::IoffeTrapParams trap_params() const;
    cloud::RfRamp rf_ramp() const;
    cloud::EvapOptions evap_options() const;
    hestar::detector::DetectorGeometry detector_geometry() const;
    hestar::detector::DetectorResponse detector_response() const;

    void validate() const;
};

// Parse/serialize.  serialize(parse(text)) materializes every default.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

// FNV-1a over the canonical serialized form; stable across runs.
std::uint64_t config_hash(const RunConfig& cfg);

std::uint64_t fnv1a(const std::string& data);

}  // namespace hestar::config
