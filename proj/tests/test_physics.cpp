#include <doctest.h>

#include <cmath>

#include "hestar/physics.hpp"

using namespace hestar;

TEST_SUITE("physics") {

TEST_CASE("gamma_from_paper_detuning recovers the quoted linewidth") {
    // -43 MHz quoted as -26.5 Gamma.
    const double g1 = physics::gamma_from_paper_detuning(-43e6, -26.5);
    CHECK(g1 / physics::two_pi == doctest::Approx(1.6226e6).epsilon(1e-3));

    // -4 MHz quoted as -2.5 Gamma.
    const double g2 = physics::gamma_from_paper_detuning(-4e6, -2.5);
    CHECK(g2 / physics::two_pi == doctest::Approx(1.6e6).epsilon(1e-12));

    // The two quotes agree to ~2%.
    CHECK(std::abs(g1 - g2) / g2 < 0.02);
}

TEST_CASE("gamma_from_paper_detuning identity multiple") {
    for (double x : {1.0, 43e6, 370e6}) {
        CHECK(physics::gamma_from_paper_detuning(x, 1.0) ==
              doctest::Approx(physics::two_pi * x).epsilon(1e-15));
    }
}

TEST_CASE("gamma_from_paper_detuning rejects zero divisor") {
    CHECK_THROWS_AS(physics::gamma_from_paper_detuning(-43e6, 0.0), std::invalid_argument);
}

TEST_CASE("scattering rate closed-form values") {
    const auto atom = physics::he_star();
    const auto tr = physics::transition_1083(atom);
    const double gamma = tr.linewidth_gamma;

    // s = 0.5 on resonance: (Gamma/2) * 0.5/1.5 = (Gamma/2)/3.
    CHECK(physics::saturation_scattering_rate(tr, 0.5, 0.0) ==
          doctest::Approx(gamma / 2.0 / 3.0).epsilon(1e-12));

    // No light.
    CHECK(physics::saturation_scattering_rate(tr, 0.0, 1e9) == 0.0);
    CHECK(physics::saturation_scattering_rate(tr, 0.0, 0.0) == 0.0);

    // s = 1, delta = Gamma/2: (Gamma/2) * 1/(1 + 1 + 1) = (Gamma/2)/3.
    CHECK(physics::saturation_scattering_rate(tr, 1.0, gamma / 2.0) ==
          doctest::Approx(gamma / 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("scattering rate is even in detuning, decreasing in |detuning|, below Gamma/2") {
    const auto atom = physics::he_star();
    const auto tr = physics::transition_1083(atom);
    const double gamma = tr.linewidth_gamma;
    double prev = physics::saturation_scattering_rate(tr, 5.0, 0.0);
    CHECK(prev < gamma / 2.0);
    for (int i = 1; i <= 20; ++i) {
        const double d = i * 0.3 * gamma;
        const double plus = physics::saturation_scattering_rate(tr, 5.0, d);
        const double minus = physics::saturation_scattering_rate(tr, 5.0, -d);
        CHECK(plus == doctest::Approx(minus).epsilon(1e-14));
        CHECK(plus < prev);
        prev = plus;
    }
    // Large s approaches but never reaches Gamma/2.
    CHECK(physics::saturation_scattering_rate(tr, 1e6, 0.0) < gamma / 2.0);
}

TEST_CASE("LaserConfig wrapper matches the transition-level rate") {
    const auto atom = physics::he_star();
    physics::LaserConfig laser;
    laser.transition = physics::transition_1083(atom);
    laser.detuning_delta0 = -physics::two_pi * 370e6;
    laser.intensity_sat_units = 2.0;
    const double shift = physics::two_pi * 100e6;
    CHECK(physics::saturation_scattering_rate(laser, shift) ==
          doctest::Approx(physics::saturation_scattering_rate(
              laser.transition, 2.0, laser.detuning_delta0 + shift)));
}

TEST_CASE("recoil velocity scales inversely with wavelength") {
    const auto atom = physics::he_star();
    const auto t1083 = physics::transition_1083(atom);
    const auto t389 = physics::transition_389(atom);
    CHECK(t389.recoil_velocity / t1083.recoil_velocity ==
          doctest::Approx(t1083.wavelength / t389.wavelength).epsilon(1e-9));

    // Oracle: v_rec = hbar k / m.
    CHECK(t1083.recoil_velocity ==
          doctest::Approx(physics::consts.hbar * t1083.wavenumber() / atom.mass)
              .epsilon(1e-12));
}

TEST_CASE("laser config validation") {
    const auto atom = physics::he_star();
    physics::LaserConfig laser;
    laser.transition = physics::transition_1083(atom);
    laser.intensity_sat_units = 1.0;
    CHECK_NOTHROW(laser.validate());

    laser.direction = {0.0, 0.0, 2.0};
    CHECK_THROWS_AS(laser.validate(), std::invalid_argument);

    laser.direction = {0.0, 0.0, 1.0};
    laser.intensity_sat_units = -1.0;
    CHECK_THROWS_AS(laser.validate(), std::invalid_argument);
}

TEST_CASE("atom state validation and defaults") {
    const auto atom = physics::he_star();
    CHECK_NOTHROW(atom.validate());
    CHECK(atom.mass == doctest::Approx(4.002602 * physics::consts.amu).epsilon(1e-12));
    CHECK(atom.mu_eff == doctest::Approx(2.0 * physics::consts.muB).epsilon(1e-12));

    physics::AtomState bad = atom;
    bad.mass = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("constants table is populated with units and provenance") {
    const auto table = physics::constants_table();
    CHECK(table.size() >= 5);
    for (const auto& row : table) {
        CHECK(!row.symbol.empty());
        CHECK(!row.unit.empty());
        CHECK(!row.provenance.empty());
        CHECK(std::isfinite(row.value));
    }
}

}  // TEST_SUITE
