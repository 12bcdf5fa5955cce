#include "hestar/physics.hpp"

namespace hestar::physics {

namespace {
// Default atomic numbers for He* (4He, 2^3S_1, m_J = +1).
constexpr double he4_mass_amu = 4.002602;
constexpr double default_scattering_length = 5.0e-9;  // m, config-overridable
// Gamma_1083/2pi from -43 MHz = -26.5 Gamma; the -4 MHz = -2.5 Gamma quote
// gives 1.6 MHz, a ~2% spread that is documented rather than resolved.
constexpr double gamma_1083_hz = 43.0e6 / 26.5;
constexpr double gamma_389_hz = 1.5e6;  // external source, config-overridable
constexpr double isat_1083 = 0.167;     // W/m^2, external source
constexpr double isat_389 = 33.0;       // W/m^2, external source
}  // namespace

AtomState he_star() {
    AtomState a;
    a.mass = he4_mass_amu * consts.amu;
    a.mu_eff = 2.0 * consts.muB;  // g_J = 2, m_J = +1
    a.scattering_length = default_scattering_length;
    return a;
}

Transition make_transition(double wavelength, double linewidth_gamma,
                           double saturation_intensity, const AtomState& atom) {
    if (wavelength <= 0.0) throw std::invalid_argument("Transition: wavelength must be > 0");
    if (linewidth_gamma <= 0.0) throw std::invalid_argument("Transition: linewidth must be > 0");
    Transition t;
    t.wavelength = wavelength;
    t.linewidth_gamma = linewidth_gamma;
    t.saturation_intensity = saturation_intensity;
    t.recoil_velocity = (two_pi / wavelength) * consts.hbar / atom.mass;
    return t;
}

Transition transition_1083(const AtomState& atom) {
    return make_transition(1083e-9, two_pi * gamma_1083_hz, isat_1083, atom);
}

Transition transition_389(const AtomState& atom) {
    return make_transition(389e-9, two_pi * gamma_389_hz, isat_389, atom);
}

void LaserConfig::validate() const {
    if (intensity_sat_units < 0.0)
        throw std::invalid_argument("LaserConfig: intensity must be >= 0");
    const double n2 = direction[0] * direction[0] + direction[1] * direction[1] +
                      direction[2] * direction[2];
    if (std::abs(n2 - 1.0) > 2e-9)
        throw std::invalid_argument("LaserConfig: direction must be a unit vector");
}

double gamma_from_paper_detuning(double detuning_hz, double gamma_multiples) {
    if (gamma_multiples == 0.0)
        throw std::invalid_argument("gamma_from_paper_detuning: zero divisor");
    return two_pi * std::abs(detuning_hz / gamma_multiples);
}

double saturation_scattering_rate(const LaserConfig& laser, double doppler_zeeman_shift) {
    const double gamma = laser.transition.linewidth_gamma;
    const double s = laser.intensity_sat_units;
    const double delta = laser.detuning_delta0 + doppler_zeeman_shift;
    const double q = 2.0 * delta / gamma;
    return 0.5 * gamma * s / (1.0 + s + q * q);
}

double saturation_scattering_rate(const Transition& tr, double s, double delta_eff) {
    const double q = 2.0 * delta_eff / tr.linewidth_gamma;
    return 0.5 * tr.linewidth_gamma * s / (1.0 + s + q * q);
}

std::vector<ConstantRow> constants_table() {
    const AtomState he = he_star();
    return {
        {"hbar", consts.hbar, "J s", "CODATA 2018"},
        {"kB", consts.kB, "J/K", "CODATA 2018 (exact)"},
        {"muB", consts.muB, "J/T", "CODATA 2018"},
        {"g", consts.g, "m/s^2", "standard gravity (exact)"},
        {"amu", consts.amu, "kg", "CODATA 2018"},
        {"m_He4", he.mass, "kg", "4.002602 amu"},
        {"mu_eff", he.mu_eff, "J/T", "2 muB (2^3S_1, m_J=+1)"},
        {"a_s", he.scattering_length, "m",
         "default, calibrated to ~7 um Thomas-Fermi radii; overridable"},
        {"Gamma_1083", two_pi * gamma_1083_hz, "rad/s",
         "from -43 MHz = -26.5 Gamma; cross-check -4 MHz = -2.5 Gamma agrees to ~2%"},
        {"Gamma_389", two_pi * gamma_389_hz, "rad/s", "external source; overridable"},
        {"Isat_1083", isat_1083, "W/m^2", "external source"},
        {"Isat_389", isat_389, "W/m^2", "external source"},
    };
}

}  // namespace hestar::physics
