#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hestar::physics {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Fundamental constants (SI, CODATA 2018).
struct Constants {
    double hbar = 1.054571817e-34;   // J s
    double kB = 1.380649e-23;        // J / K
    double muB = 9.27401008e-24;     // J / T
    double g = 9.80665;              // m / s^2, standard gravity
    double amu = 1.66053907e-27;     // kg
};

inline constexpr Constants consts{};

struct ConstantRow {
    std::string symbol;
    double value;
    std::string unit;
    std::string provenance;
};

// Human-readable constants table (symbol, value, unit, provenance).
std::vector<ConstantRow> constants_table();

// Atomic species in the state relevant for slowing/trapping.
struct AtomState {
    double mass;               // kg
    double mu_eff;             // J/T, effective moment of the low-field-seeking state
    double scattering_length;  // m, s-wave

    void validate() const {
        if (mass <= 0.0) throw std::invalid_argument("AtomState: mass must be > 0");
        if (mu_eff <= 0.0) throw std::invalid_argument("AtomState: mu_eff must be > 0");
        if (scattering_length <= 0.0)
            throw std::invalid_argument("AtomState: scattering_length must be > 0");
    }
};

// Optical transition.  Frequencies are angular (rad/s) throughout the
// library; config files take Hz and convert at the boundary.
struct Transition {
    double wavelength;            // m
    double linewidth_gamma;       // rad/s, angular Gamma
    double saturation_intensity;  // W/m^2
    double recoil_velocity;       // m/s, cached

    double wavenumber() const { return two_pi / wavelength; }
};

Transition make_transition(double wavelength, double linewidth_gamma,
                           double saturation_intensity, const AtomState& atom);

enum class Polarization { sigma_plus, sigma_minus, pi };

struct LaserConfig {
    Transition transition;
    double detuning_delta0 = 0.0;      // rad/s, relative to unshifted resonance
    double intensity_sat_units = 0.0;  // I / I_s
    Polarization polarization = Polarization::sigma_plus;
    std::array<double, 3> direction = {0.0, 0.0, 1.0};

    void validate() const;
};

// Defaults for the He* 2^3S_1 m_J=+1 toolkit.  Gamma for the 1083 nm line is
// fixed from the two quoted detuning/linewidth pairs (-43 MHz = -26.5 Gamma
// and -4 MHz = -2.5 Gamma, consistent to ~2%); the 389 nm linewidth and the
// s-wave scattering length are external defaults, overridable in config.
AtomState he_star();
Transition transition_1083(const AtomState& atom);
Transition transition_389(const AtomState& atom);

// Recover an angular linewidth from a detuning quoted both in Hz and in
// multiples of Gamma. Returns 2*pi*|detuning_hz / gamma_multiples|.
double gamma_from_paper_detuning(double detuning_hz, double gamma_multiples);

// Two-level scattering rate (Gamma/2) * s / (1 + s + (2*delta_eff/Gamma)^2),
// with delta_eff = laser detuning plus the supplied Doppler/Zeeman shift.
double saturation_scattering_rate(const LaserConfig& laser, double doppler_zeeman_shift);
double saturation_scattering_rate(const Transition& tr, double s, double delta_eff);

}  // namespace hestar::physics
