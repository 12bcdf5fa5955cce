#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "hestar/physics.hpp"

namespace hestar::cloud {

// Trap frequencies, angular, one per axis: {radial, radial, axial} by
// convention in the default pipeline.
struct Trap3 {
    std::array<double, 3> omega = {0.0, 0.0, 0.0};  // rad/s
    double omega_bar() const;
};

struct ThermalCloud {
    double atom_count = 0.0;
    double temperature = 0.0;  // K
    Trap3 trap;

    double peak_density(const physics::AtomState& atom) const;  // 1/m^3
};

struct Condensate {
    double atom_count = 0.0;
    Trap3 trap;
    double chemical_potential = 0.0;        // J
    std::array<double, 3> tf_radii = {0, 0, 0};  // m
};

// Thermal de Broglie wavelength h / sqrt(2 pi m kB T).
double thermal_de_broglie(double temperature, const physics::AtomState& atom);

// n0 * lambda_dB^3 for the harmonic trap, equal to N (hbar w_bar / kB T)^3.
double phase_space_density(const ThermalCloud& c, const physics::AtomState& atom);

// ---------------------------------------------------------------------------
// rf evaporation
// ---------------------------------------------------------------------------

enum class RampShape { exponential, linear };

struct RfRamp {
    double f_start = 75e6;   // Hz
    double f_end = 5.61e6;   // Hz
    double duration = 8.0;   // s
    RampShape shape = RampShape::exponential;

    void validate() const;
    double frequency(double t) const;
};

struct EvapOptions {
    double trap_bottom_hz = 5.6e6;  // rf resonance at the trap minimum (2 G bias)
    double lifetime = 61.0;         // s, one-body background loss; <=0 disables
    double kappa = 1.0;             // excess energy per evaporated atom, units of kT
    std::size_t n_steps = 6000;
    std::size_t n_samples = 160;    // trajectory points returned (>= 100)
};

struct EvapPoint {
    double t = 0.0;
    double atom_count = 0.0;
    double temperature = 0.0;
    double psd = 0.0;
};

struct EvapTrajectory {
    std::vector<EvapPoint> points;
    std::optional<double> bec_crossing_time;  // PSD crosses 2.612
    ThermalCloud final_cloud;
};

// Truncated-Boltzmann scaling-law trajectory.  The rf frequency sets the
// instantaneous trap depth; the cloud follows the constant-eta_cut forced
// trajectory at a speed capped by the elastic collision rate, losing atoms
// per dlogN = dlogT * 3/(eta_eff + kappa - 3) plus one-body background loss.
EvapTrajectory evaporate(const ThermalCloud& c, const RfRamp& ramp, double eta_cut,
                         const physics::AtomState& atom, const EvapOptions& opts = {});

// ---------------------------------------------------------------------------
// Thomas-Fermi condensate
// ---------------------------------------------------------------------------

// mu = (hbar w_bar / 2) (15 N a / abar)^{2/5}, abar = sqrt(hbar/(m w_bar)),
// R_i = sqrt(2 mu / (m w_i^2)).
Condensate thomas_fermi(double n_atoms, const Trap3& trap, const physics::AtomState& atom);

// Ideal-gas condensation temperature kB Tc = 0.94 hbar w_bar N^{1/3}.
double critical_temperature(double n_atoms, const Trap3& trap, const physics::AtomState& atom);

// ---------------------------------------------------------------------------
// Time-of-flight expansion
// ---------------------------------------------------------------------------

// Expanded cloud parameters in the imaging plane: horizontal = trap axial
// direction, vertical = one radial direction (along gravity).
struct ExpandedGaussian {
    double sigma_h = 0.0, sigma_v = 0.0;  // m
    double center_v = 0.0;                // m, -g t^2 / 2
    double atom_count = 0.0;
};

struct ExpandedParabola {
    double radius_h = 0.0, radius_v = 0.0;  // m, Thomas-Fermi column radii
    double center_v = 0.0;
    double atom_count = 0.0;
};

ExpandedGaussian thermal_expansion(const ThermalCloud& c, double t,
                                   const physics::AtomState& atom);

// Scaling-solution expansion for a cigar-shaped condensate (tight radial axis
// expands fastest; the aspect ratio inverts through 1).
ExpandedParabola condensate_expansion(const Condensate& c, double t);

struct DensityProfile {
    std::vector<double> h;       // horizontal coordinates, m
    std::vector<double> v;       // vertical coordinates, m
    std::vector<double> column;  // row-major [iv * nh + ih], atoms / m^2

    double total() const;                  // grid integral
    std::vector<double> center_cut() const;  // 1D horizontal cut through the peak row
    double rms_width_h() const;
    double rms_width_v() const;
    void write_csv(const std::string& path) const;
};

DensityProfile render_profile(const std::optional<ExpandedGaussian>& thermal,
                              const std::optional<ExpandedParabola>& condensate,
                              std::size_t n_h = 241, std::size_t n_v = 241);

DensityProfile tof_expand(const ThermalCloud& c, double t, const physics::AtomState& atom);
DensityProfile tof_expand(const Condensate& c, double t);

// ---------------------------------------------------------------------------
// Bimodal fit
// ---------------------------------------------------------------------------

struct BimodalFit {
    double thermal_amplitude = 0.0;
    double thermal_width = 0.0;      // Gaussian sigma, m
    double condensate_amplitude = 0.0;
    double tf_radius = 0.0;          // m
    double center = 0.0;             // m
    double condensate_fraction = 0.0;
    std::optional<double> temperature;  // K, when t_tof given
    bool converged = false;
    double residual_rms = 0.0;
};

// Nonlinear least squares (Levenberg-Marquardt) of
//   A_th exp(-(x-c)^2/(2 s^2)) + A_c max(0, 1-((x-c)/R)^2)^{3/2}.
// Temperature from the thermal width assuming sigma >> in-trap size.
BimodalFit bimodal_fit(const std::vector<double>& x, const std::vector<double>& profile,
                       const physics::AtomState& atom,
                       std::optional<double> t_tof = std::nullopt);

// ---------------------------------------------------------------------------
// Imaging scattering-rate decay
// ---------------------------------------------------------------------------

struct RateCurve {
    std::vector<double> t;     // s, one point per scattering event
    std::vector<double> rate;  // normalized to Gamma/2
};

// Event-by-event recoil walk-off: each scattered photon adds one recoil
// velocity, Doppler-shifting the atom out of resonance with the probe.
RateCurve recoil_detuning_curve(const physics::Transition& tr, double s, double duration);

double time_to_half_rate(const RateCurve& curve);

// Photons scattered before the Doppler shift reaches Gamma (simulated count
// and the closed-form estimate Gamma / (k v_recoil)).
int photons_to_detune_gamma(const physics::Transition& tr);
double photons_to_detune_gamma_closed_form(const physics::Transition& tr);

}  // namespace hestar::cloud
