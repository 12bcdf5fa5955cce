#include <doctest.h>

#include <cmath>

#include "hestar/beam.hpp"
#include "hestar/physics.hpp"
#include "hestar/rng.hpp"
#include "hestar/traps.hpp"

using namespace hestar;

namespace {

Ensemble thermal_sample(double temperature, std::size_t n, std::uint64_t seed,
                        const physics::AtomState& atom) {
    Ensemble e;
    e.atom_count = double(n);
    Rng rng(seed);
    const double sigma = std::sqrt(physics::consts.kB * temperature / atom.mass);
    for (std::size_t i = 0; i < n; ++i) {
        e.positions.push_back({0.0, 0.0, 0.0});
        e.velocities.push_back({rng.normal(0.0, sigma), rng.normal(0.0, sigma),
                                rng.normal(0.0, sigma)});
    }
    return e;
}

}  // namespace

TEST_SUITE("traps") {

TEST_CASE("flat field gives zero trap frequencies") {
    traps::IoffeTrapParams p;
    p.radial_gradient = 0.0;
    p.axial_curvature = 0.0;
    p.bias_field = 2e-4;
    const auto f = traps::trap_frequencies(p, physics::he_star());
    CHECK(f.omega_rad == doctest::Approx(0.0));
    CHECK(f.omega_ax == doctest::Approx(0.0));
}

TEST_CASE("compressed-trap parameters give the Ioffe-Pritchard formula values") {
    const auto atom = physics::he_star();
    const auto f = traps::trap_frequencies(traps::IoffeTrapParams{}, atom);
    // Independent evaluation of w_ax = sqrt(mu B''/m) and
    // w_rad = sqrt((mu/m)(B'^2/B0 - B''/2)) at (0.95 T/m, 11 T/m^2, 2e-4 T).
    const double mu_over_m = atom.mu_eff / atom.mass;
    const double w_ax = std::sqrt(mu_over_m * 11.0);
    const double w_rad = std::sqrt(mu_over_m * (0.95 * 0.95 / 2e-4 - 11.0 / 2.0));
    CHECK(f.omega_ax == doctest::Approx(w_ax).epsilon(1e-12));
    CHECK(f.omega_rad == doctest::Approx(w_rad).epsilon(1e-12));
    CHECK(f.omega_rad / physics::two_pi == doctest::Approx(564.0).epsilon(0.01));
    CHECK(f.omega_ax / physics::two_pi == doctest::Approx(27.9).epsilon(0.01));
}

TEST_CASE("trap frequencies are homogeneous of degree one half") {
    const auto atom = physics::he_star();
    traps::IoffeTrapParams p;
    const auto f1 = traps::trap_frequencies(p, atom);
    traps::IoffeTrapParams scaled = p;
    const double lambda = 3.7;
    scaled.radial_gradient *= lambda;
    scaled.axial_curvature *= lambda;
    scaled.bias_field *= lambda;
    const auto f2 = traps::trap_frequencies(scaled, atom);
    CHECK(f2.omega_rad == doctest::Approx(std::sqrt(lambda) * f1.omega_rad).epsilon(1e-12));
    CHECK(f2.omega_ax == doctest::Approx(std::sqrt(lambda) * f1.omega_ax).epsilon(1e-12));
}

TEST_CASE("quadrupling the bias halves the radial frequency when curvature is negligible") {
    const auto atom = physics::he_star();
    traps::IoffeTrapParams p;
    p.axial_curvature = 1e-9;
    const auto f1 = traps::trap_frequencies(p, atom);
    p.bias_field *= 4.0;
    const auto f2 = traps::trap_frequencies(p, atom);
    CHECK(f2.omega_rad == doctest::Approx(f1.omega_rad / 2.0).epsilon(1e-6));
}

TEST_CASE("radially unstable configuration is rejected") {
    traps::IoffeTrapParams p;
    p.radial_gradient = 1e-4;  // B'^2/B0 far below B''/2
    p.axial_curvature = 11.0;
    p.bias_field = 0.1;
    CHECK_THROWS(traps::trap_frequencies(p, physics::he_star()));
}

TEST_CASE("independent-source bias noise reproduces the stability estimate") {
    const auto r = traps::bias_noise(160e-4, 158e-4, 1e-4);
    CHECK(r.bias == doctest::Approx(2e-4).epsilon(1e-12));
    // Oracle: 1e-4 * sqrt(160^2 + 158^2) G / 2 G = 1.1244e-2.
    CHECK(r.abs_noise ==
          doctest::Approx(1e-4 * std::hypot(160e-4, 158e-4)).epsilon(1e-12));
    CHECK(r.rel_bias_noise == doctest::Approx(0.011244).epsilon(1e-3));
    CHECK(std::abs(r.rel_bias_noise - 0.01) < 0.005);
}

TEST_CASE("zero relative noise propagates to zero") {
    const auto r = traps::bias_noise(160e-4, 158e-4, 0.0);
    CHECK(r.abs_noise == 0.0);
    CHECK(r.rel_bias_noise == 0.0);
}

TEST_CASE("correlated sources subtract like the fields themselves") {
    const auto r = traps::bias_noise(160e-4, 158e-4, 1e-4, true);
    CHECK(r.abs_noise == doctest::Approx(1e-4 * 2e-4).epsilon(1e-12));
    CHECK(r.rel_bias_noise == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("non-positive bias is rejected") {
    CHECK_THROWS(traps::bias_noise(158e-4, 160e-4, 1e-4));
}

TEST_CASE("molasses stage cools without atom loss") {
    const auto atom = physics::he_star();
    auto e = thermal_sample(1.5e-3, 2000, 1, atom);
    e.atom_count = 6e8;
    traps::StageLedger ledger;
    traps::StageSpec molasses;
    molasses.name = "molasses";
    molasses.target_temperature = 1.0e-3;
    const auto out = traps::apply_stage(e, molasses, atom, ledger, 2);
    REQUIRE(ledger.entries.size() == 1);
    CHECK(ledger.entries.back().atom_count == doctest::Approx(6e8));
    CHECK(ledger.entries.back().temperature == doctest::Approx(1.0e-3));
    // Velocity spread matches the new temperature.
    double sum2 = 0.0;
    for (const auto& v : out.velocities) sum2 += dot(v, v);
    const double t_emp = atom.mass * sum2 / (3.0 * double(out.size()) * physics::consts.kB);
    CHECK(t_emp == doctest::Approx(1.0e-3).epsilon(0.05));
}

TEST_CASE("disabled stage is the identity") {
    const auto atom = physics::he_star();
    const auto e = thermal_sample(1.0e-3, 100, 1, atom);
    traps::StageLedger ledger;
    traps::StageSpec pump;
    pump.name = "spin_polarization";
    pump.n_multiplier = 3.0;
    pump.enabled = false;
    const auto out = traps::apply_stage(e, pump, atom, ledger, 2);
    CHECK(out.atom_count == e.atom_count);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(out.velocities[i] == e.velocities[i]);
}

TEST_CASE("default stage sequence reproduces the published ledger") {
    const auto atom = physics::he_star();
    auto e = thermal_sample(1.5e-3, 2000, 1, atom);
    e.atom_count = 6e8;
    traps::StageLedger ledger;
    double multiplier_product = 1.0;
    for (const auto& stage : traps::default_stage_sequence()) {
        e = traps::apply_stage(e, stage, atom, ledger, 3);
        multiplier_product *= stage.enabled ? stage.n_multiplier : 1.0;
    }
    CHECK(e.atom_count == doctest::Approx(5e8).epsilon(0.05));
    CHECK(ledger.entries.back().temperature == doctest::Approx(150e-6).epsilon(1e-9));
    // Ledger conservation: final N = initial N times the product of multipliers.
    CHECK(e.atom_count == doctest::Approx(6e8 * multiplier_product).epsilon(1e-12));
}

TEST_CASE("adiabatic compression with identical traps is the identity") {
    const auto atom = physics::he_star();
    const auto e = thermal_sample(150e-6, 500, 4, atom);
    traps::TrapFrequencies f{physics::two_pi * 32, physics::two_pi * 62};
    double t = 150e-6;
    const auto out = traps::adiabatic_compress(e, f, f, &t);
    CHECK(t == doctest::Approx(150e-6).epsilon(1e-12));
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(out.velocities[i] == e.velocities[i]);
}

TEST_CASE("adiabatic compression scales temperature by the mean-frequency ratio") {
    const auto atom = physics::he_star();
    const auto e = thermal_sample(150e-6, 500, 4, atom);
    traps::TrapFrequencies from{physics::two_pi * 32, physics::two_pi * 62};
    traps::TrapFrequencies to{physics::two_pi * 800, physics::two_pi * 47};
    double t = 150e-6;
    traps::adiabatic_compress(e, from, to, &t);
    const double expect =
        150e-6 * std::cbrt((800.0 * 800.0 * 47.0) / (32.0 * 32.0 * 62.0));
    CHECK(t == doctest::Approx(expect).epsilon(1e-12));
    CHECK(t / 150e-6 == doctest::Approx(7.8).epsilon(0.01));

    // Phase-space density N (hbar w_bar / kB T)^3 is invariant.
    const double psd_from = std::pow(from.omega_bar() / 150e-6, 3.0);
    const double psd_to = std::pow(to.omega_bar() / t, 3.0);
    CHECK(psd_to == doctest::Approx(psd_from).epsilon(1e-9));
}

}  // TEST_SUITE
