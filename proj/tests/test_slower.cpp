#include <doctest.h>

#include <cmath>
#include <vector>

#include "hestar/beam.hpp"
#include "hestar/rng.hpp"
#include "hestar/slower.hpp"

using namespace hestar;

namespace {

physics::LaserConfig slowing_laser(const physics::AtomState& atom) {
    physics::LaserConfig laser;
    laser.transition = physics::transition_1083(atom);
    laser.detuning_delta0 = -physics::two_pi * 370e6;
    laser.intensity_sat_units = 10.0;
    return laser;
}

Ensemble monokinetic(double speed, std::size_t n) {
    Ensemble e;
    e.atom_count = double(n);
    for (std::size_t i = 0; i < n; ++i) {
        e.positions.push_back({0.0, 0.0, 0.0});
        e.velocities.push_back({speed, 0.0, 0.0});
    }
    return e;
}

// Pointwise Eq.-1 evaluation, written out independently of the library.
double eta_oracle(double b, double dbdx, const physics::LaserConfig& laser,
                  const physics::AtomState& atom) {
    const double hbar = 1.054571817e-34;
    const double k = 2.0 * physics::pi / laser.transition.wavelength;
    const double gamma = laser.transition.linewidth_gamma;
    return (2.0 * atom.mass * atom.mu_eff) / (hbar * hbar * k * k * k * gamma) * (-dbdx) *
           (atom.mu_eff * b / hbar - laser.detuning_delta0);
}

}  // namespace

TEST_SUITE("slower") {

TEST_CASE("target field design is feasible at the published parameters") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto field = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    CHECK(field.decel_span_end > field.decel_span_start);
    CHECK(field.decel_span_end <= 1.36);
    // Entrance field for 800 m/s resonance: mu_eff B = hbar (delta0 + k v0).
    const double hbar = 1.054571817e-34;
    const double k = laser.transition.wavenumber();
    const double b0_expected =
        hbar * (laser.detuning_delta0 + k * 800.0) / atom.mu_eff;
    CHECK(field.value(0.0) == doctest::Approx(b0_expected).epsilon(1e-9));
}

TEST_CASE("equal entry and exit speeds give a constant field") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto field = slower::target_field(300.0, 300.0, 0.5, 0.7, laser, atom);
    const double b0 = field.value(0.0);
    CHECK(field.value(0.2) == doctest::Approx(b0).epsilon(1e-12));
    CHECK(field.derivative(0.1) == doctest::Approx(0.0));
}

TEST_CASE("insufficient length raises an infeasible-design error") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const double lmin = slower::required_length(800.0, 80.0, 0.7, laser, atom);
    CHECK_THROWS_AS(slower::target_field(800.0, 80.0, 0.9 * lmin, 0.7, laser, atom),
                    slower::InfeasibleDesign);
}

TEST_CASE("designed field round-trips through the efficiency analysis") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto field = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    const auto eff = slower::efficiency_profile(field, laser, atom);
    for (std::size_t i = 0; i < eff.x_samples.size(); ++i) {
        const double x = eff.x_samples[i];
        if (x < field.decel_span_start + 1e-6 || x > field.decel_span_end - 1e-6) continue;
        CHECK(eff.eta[i] == doctest::Approx(0.7).epsilon(1e-6));
    }
    CHECK(eff.mean_over(field.decel_span_start, field.decel_span_end) ==
          doctest::Approx(0.7).epsilon(1e-4));
}

TEST_CASE("efficiency vanishes where the field is flat") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto flat = slower::FieldProfile::from_closures(
        [](double) { return 0.01; }, [](double) { return 0.0; }, {0.0, 0.5, 1.0});
    const auto eff = slower::efficiency_profile(flat, laser, atom);
    for (double eta : eff.eta) CHECK(eta == doctest::Approx(0.0));
}

TEST_CASE("efficiency matches an independent pointwise evaluation on synthetic fields") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const double b0 = rng.uniform(-0.05, 0.05);
        const double beta = rng.uniform(-0.2, 0.2);
        const auto field = slower::FieldProfile::from_closures(
            [=](double x) { return b0 + beta * x; }, [=](double) { return beta; },
            {0.0, 0.5, 1.0});
        const std::vector<double> grid = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        const auto eff = slower::efficiency_profile(field, laser, atom, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double expect = eta_oracle(b0 + beta * grid[i], beta, laser, atom);
            CHECK(eff.eta[i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("single loop field at its center is the textbook closed form") {
    slower::WindingLayout layout;
    layout.current = 2.0;
    layout.sections.push_back({0.0, {slower::Layer{1, 0.02, 2.5e-3, +1}}});
    const double mu0 = 4.0e-7 * physics::pi;
    // The single turn is centered half a pitch past x_start.
    CHECK(slower::solenoid_field(layout, 0.5 * 2.5e-3) ==
          doctest::Approx(mu0 * 2.0 / (2.0 * 0.02)).epsilon(1e-12));
}

TEST_CASE("Helmholtz pair midpoint matches the closed form") {
    const double radius = 0.05;
    slower::WindingLayout layout;
    layout.current = 1.5;
    layout.sections.push_back({0.0, {slower::Layer{1, radius, 2.5e-3, +1}}});
    layout.sections.push_back({radius, {slower::Layer{1, radius, 2.5e-3, +1}}});
    const double mu0 = 4.0e-7 * physics::pi;
    const double expect = std::pow(0.8, 1.5) * mu0 * 1.5 / radius;
    // Coil centers are half a pitch past each x_start; probe their midpoint.
    CHECK(slower::solenoid_field(layout, radius / 2.0 + 0.5 * 2.5e-3) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("solenoid field is linear in current") {
    slower::WindingLayout layout;
    layout.current = 2.0;
    layout.sections.push_back({0.0, {slower::Layer{10, 0.02, 2.5e-3, +1},
                                     slower::Layer{5, 0.025, 2.5e-3, -1}}});
    auto doubled = layout;
    doubled.current = 4.0;
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const double x = rng.uniform(-0.1, 0.15);
        CHECK(slower::solenoid_field(doubled, x) ==
              doctest::Approx(2.0 * slower::solenoid_field(layout, x)).epsilon(1e-12));
    }
}

TEST_CASE("fitted layout oscillates about the design efficiency and stays below 1") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto target = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    slower::FitConstraints constraints;
    constraints.laser = laser;
    constraints.atom = atom;
    slower::FitReport report;
    const auto layout = slower::fit_layout(target, constraints, &report);
    CHECK(report.eta_mean == doctest::Approx(0.7).epsilon(0.05 / 0.7));
    CHECK(report.eta_max <= 1.0);
    CHECK(report.eta_max > 0.7);   // discrete layers overshoot locally
    CHECK(report.eta_min < 0.7);   // ... and undershoot
    CHECK(layout.total_turns() > 0);
}

TEST_CASE("constant-zero target fits to an empty layout") {
    std::vector<double> x{0.0, 0.5, 1.0}, b{0.0, 0.0, 0.0};
    slower::FieldProfile target(x, b);
    target.decel_span_start = 0.0;
    target.decel_span_end = 1.0;
    slower::FitReport report;
    const auto layout = slower::fit_layout(target, slower::FitConstraints{}, &report);
    CHECK(layout.total_turns() == 0);
    CHECK(report.rms_residual == doctest::Approx(0.0));
}

TEST_CASE("fit is locally optimal against single-layer perturbations") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto target = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    slower::FitConstraints constraints;
    constraints.laser = laser;
    constraints.atom = atom;
    const auto layout = slower::fit_layout(target, constraints);
    const double base = slower::fit_objective(layout, target, constraints);

    Rng rng(3);
    int tried = 0;
    while (tried < 20) {
        auto perturbed = layout;
        auto& section = perturbed.sections[rng.next_u64() % perturbed.sections.size()];
        if (section.layers.empty()) continue;
        auto& layer = section.layers[rng.next_u64() % section.layers.size()];
        const int delta = (rng.next_u64() & 1) ? +1 : -1;
        if (layer.n_turns + delta < 0) continue;
        layer.n_turns += delta;
        // Reverse-wound sections are anchored at their downstream end, so a
        // turn-count change grows or shrinks them upstream.
        if (layer.current_sign < 0) section.x_start -= delta * layer.wire_pitch;
        ++tried;
        CHECK(slower::fit_objective(perturbed, target, constraints) >= base - 1e-15);
    }
}

TEST_CASE("zero laser intensity leaves the ensemble unchanged") {
    const auto atom = physics::he_star();
    auto laser = slowing_laser(atom);
    laser.intensity_sat_units = 0.0;
    const auto field = slower::target_field(800.0, 80.0, 1.36, 0.7, slowing_laser(atom), atom);
    const auto e = monokinetic(800.0, 10);
    const auto result = slower::decelerate(e, field, laser, atom, 1e-5, 1);
    for (std::size_t i = 0; i < e.size(); ++i)
        CHECK(result.ensemble.velocities[i][0] ==
              doctest::Approx(e.velocities[i][0]).epsilon(1e-12));
}

TEST_CASE("captured atoms exit near the design speed") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto field = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    const auto e = monokinetic(800.0, 20);
    const auto result = slower::decelerate(e, field, laser, atom, 1e-5, 1);
    for (double v : result.exit_speeds) {
        CHECK(v < 100.0);
        CHECK(v == doctest::Approx(80.0).epsilon(15.0 / 80.0));
    }
}

TEST_CASE("atoms far above the capture velocity pass through untouched") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto field = slower::target_field(800.0, 80.0, 1.36, 0.7, laser, atom);
    const auto e = monokinetic(1200.0, 5);
    const auto result = slower::decelerate(e, field, laser, atom, 1e-5, 1);
    for (double v : result.exit_speeds)
        CHECK(std::abs(v - 1200.0) / 1200.0 < 0.02);
}

TEST_CASE("probe spectrum maps a monokinetic beam to a single Doppler peak") {
    const auto atom = physics::he_star();
    const auto laser = slowing_laser(atom);
    const auto e = monokinetic(900.0, 1000);
    const double angle = 0.3;
    const auto spec = slower::probe_spectrum(e, laser, angle, 2e9);
    std::size_t best = 0;
    for (std::size_t i = 1; i < spec.signal.size(); ++i)
        if (spec.signal[i] > spec.signal[best]) best = i;
    const double expect =
        laser.transition.wavenumber() * 900.0 * std::cos(angle) / physics::two_pi;
    const double bin = spec.frequency_hz[1] - spec.frequency_hz[0];
    CHECK(std::abs(spec.frequency_hz[best] - expect) <= bin);

    // Area proportional to atom count.
    double area = 0.0;
    for (double s : spec.signal) area += s;
    CHECK(area == doctest::Approx(double(e.size())).epsilon(1e-9));
}

}  // TEST_SUITE
