#include "hestar/traps.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "hestar/io.hpp"
#include "hestar/rng.hpp"

namespace hestar::traps {

using physics::consts;

void IoffeTrapParams::validate() const {
    if (bias_field <= 0.0)
        throw std::invalid_argument("IoffeTrapParams: bias_field must be > 0");
    if (axial_curvature < 0.0)
        throw std::invalid_argument("IoffeTrapParams: curvature must be >= 0");
}

double TrapFrequencies::omega_bar() const {
    return std::cbrt(omega_rad * omega_rad * omega_ax);
}

TrapFrequencies trap_frequencies(const IoffeTrapParams& p, const physics::AtomState& atom) {
    p.validate();
    const double mu_over_m = atom.mu_eff / atom.mass;
    const double radial_term =
        p.radial_gradient * p.radial_gradient / p.bias_field - 0.5 * p.axial_curvature;
    if (radial_term <= 0.0 && p.radial_gradient > 0.0)
        throw std::runtime_error("trap_frequencies: radially unstable configuration "
                                 "(B'^2/B0 <= B''/2)");
    TrapFrequencies f;
    f.omega_ax = std::sqrt(mu_over_m * p.axial_curvature);
    f.omega_rad = radial_term > 0.0 ? std::sqrt(mu_over_m * radial_term) : 0.0;
    return f;
}

BiasNoiseResult bias_noise(double b_large1, double b_large2, double rel_noise_rms,
                           bool correlated) {
    if (!(b_large1 > b_large2 && b_large2 > 0.0))
        throw std::invalid_argument("bias_noise: need b_large1 > b_large2 > 0");
    BiasNoiseResult r;
    r.bias = b_large1 - b_large2;
    r.abs_noise = correlated
                      ? rel_noise_rms * (b_large1 - b_large2)
                      : rel_noise_rms * std::hypot(b_large1, b_large2);
    r.rel_bias_noise = r.abs_noise / r.bias;
    return r;
}

void StageLedger::write_csv(const std::string& path) const {
    CsvWriter csv(path, {"stage", "atom_count", "temperature_K", "duration_s", "lifetime_s",
                         "notes"});
    for (const auto& e : entries) {
        std::string line = e.stage_name + ",";
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.8g,%.8g,%.8g,", e.atom_count, e.temperature,
                      e.duration);
        line += buf;
        if (e.lifetime) {
            std::snprintf(buf, sizeof buf, "%.8g", *e.lifetime);
            line += buf;
        }
        line += "," + e.notes;
        csv.raw_row(line);
    }
    csv.close();
}

std::vector<StageSpec> default_stage_sequence() {
    return {
        {"molasses", 1.0e-3, 1.0, 0.3e-3, std::nullopt, true, "3D optical molasses pulse"},
        {"spin_polarization", std::nullopt, 3.0, 0.5e-3, std::nullopt, true,
         "optical pumping to the low-field-seeking state"},
        {"transfer", std::nullopt, 0.3, 2e-3, 61.0, true,
         "magnetic-trap transfer (0.3 unpumped; x3 pumping restores 90%)"},
        {"doppler_1d", 150e-6, 0.93, 1.2, 61.0, true, "1D Doppler cooling in the trap"},
    };
}

Ensemble apply_stage(const Ensemble& e, const StageSpec& stage,
                     const physics::AtomState& atom, StageLedger& ledger,
                     std::uint64_t seed) {
    static const std::set<std::string> known = {"mot", "molasses", "spin_polarization",
                                                "transfer", "doppler_1d"};
    if (!known.count(stage.name))
        throw std::invalid_argument("apply_stage: unknown stage name: " + stage.name);

    Ensemble out = e;
    double temperature = 0.0;
    if (stage.enabled) {
        out.atom_count = e.atom_count * stage.n_multiplier;
        if (stage.target_temperature) {
            temperature = *stage.target_temperature;
            const double sigma = std::sqrt(consts.kB * temperature / atom.mass);
            Rng rng(seed);
            for (auto& v : out.velocities)
                v = {rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
        }
    }
    if (temperature == 0.0 && !ledger.entries.empty())
        temperature = ledger.entries.back().temperature;
    StageReport rep;
    rep.stage_name = stage.name;
    rep.atom_count = out.atom_count;
    rep.temperature = temperature;
    rep.duration = stage.duration;
    rep.lifetime = stage.lifetime;
    rep.notes = stage.enabled ? stage.notes : stage.notes + " (disabled)";
    ledger.entries.push_back(rep);
    return out;
}

Ensemble adiabatic_compress(const Ensemble& e, const TrapFrequencies& from,
                            const TrapFrequencies& to, double* temperature_in_out) {
    if (from.omega_rad <= 0.0 || from.omega_ax <= 0.0 || to.omega_rad <= 0.0 ||
        to.omega_ax <= 0.0)
        throw std::invalid_argument("adiabatic_compress: frequencies must be positive");
    const double ratio = to.omega_bar() / from.omega_bar();
    Ensemble out = e;
    const double vscale = std::sqrt(ratio);
    for (auto& v : out.velocities) v = vscale * v;
    if (temperature_in_out) *temperature_in_out *= ratio;
    return out;
}

}  // namespace hestar::traps
