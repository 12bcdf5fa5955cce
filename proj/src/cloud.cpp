#include "hestar/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hestar/io.hpp"

namespace hestar::cloud {

namespace {
constexpr double pi = std::numbers::pi;
constexpr double planck_h = 2.0 * pi * physics::consts.hbar;
}  // namespace

double Trap3::omega_bar() const {
    for (double w : omega)
        if (!(w > 0.0)) throw std::invalid_argument("Trap3: frequencies must be positive");
    return std::cbrt(omega[0] * omega[1] * omega[2]);
}

double thermal_de_broglie(double temperature, const physics::AtomState& atom) {
    if (!(temperature > 0.0)) throw std::invalid_argument("thermal_de_broglie: T must be > 0");
    return planck_h / std::sqrt(2.0 * pi * atom.mass * physics::consts.kB * temperature);
}

double ThermalCloud::peak_density(const physics::AtomState& atom) const {
    const double wb = trap.omega_bar();
    if (!(temperature > 0.0)) throw std::invalid_argument("peak_density: T must be > 0");
    const double kt = physics::consts.kB * temperature;
    return atom_count * std::pow(atom.mass * wb * wb / (2.0 * pi * kt), 1.5);
}

double phase_space_density(const ThermalCloud& c, const physics::AtomState& atom) {
    const double wb = c.trap.omega_bar();
    if (!(c.temperature > 0.0)) throw std::invalid_argument("phase_space_density: T must be > 0");
    const double r = physics::consts.hbar * wb / (physics::consts.kB * c.temperature);
    return c.atom_count * r * r * r;
}

// ---------------------------------------------------------------------------
// rf evaporation
// ---------------------------------------------------------------------------

void RfRamp::validate() const {
    if (!(f_start > 0.0) || !(f_end > 0.0))
        throw std::invalid_argument("RfRamp: frequencies must be positive");
    if (f_end >= f_start)
        throw std::invalid_argument("RfRamp: f_end must be below f_start");
    if (!(duration > 0.0))
        throw std::invalid_argument("RfRamp: duration must be positive");
}

double RfRamp::frequency(double t) const {
    const double u = std::clamp(t / duration, 0.0, 1.0);
    switch (shape) {
        case RampShape::linear:
            return f_start + (f_end - f_start) * u;
        case RampShape::exponential:
            return f_start * std::pow(f_end / f_start, u);
    }
    throw std::logic_error("RfRamp: bad shape");
}

EvapTrajectory evaporate(const ThermalCloud& c, const RfRamp& ramp, double eta_cut,
                         const physics::AtomState& atom, const EvapOptions& opts) {
    atom.validate();
    if (ramp.duration == 0.0) {
        // Degenerate ramp: nothing happens.
        EvapTrajectory out;
        out.points.push_back({0.0, c.atom_count, c.temperature, phase_space_density(c, atom)});
        out.final_cloud = c;
        return out;
    }
    ramp.validate();
    if (!(eta_cut > 3.0))
        throw std::invalid_argument("evaporate: eta_cut must exceed 3 (scaling law diverges)");
    if (!(c.atom_count > 0.0) || !(c.temperature > 0.0))
        throw std::invalid_argument("evaporate: cloud must have positive N and T");
    if (opts.n_steps < 10 || opts.n_samples < 2)
        throw std::invalid_argument("evaporate: too few steps/samples");

    const double kB = physics::consts.kB;
    const double sigma_el = 8.0 * pi * atom.scattering_length * atom.scattering_length;
    const double wb = c.trap.omega_bar();

    double n_atoms = c.atom_count;
    double temp = c.temperature;
    const double dt = ramp.duration / static_cast<double>(opts.n_steps);

    EvapTrajectory out;
    out.points.reserve(opts.n_samples + 1);
    const std::size_t sample_every =
        std::max<std::size_t>(1, opts.n_steps / (opts.n_samples - 1));

    auto psd_of = [&](double nn, double tt) {
        const double r = physics::consts.hbar * wb / (kB * tt);
        return nn * r * r * r;
    };
    auto record = [&](double t) {
        out.points.push_back({t, n_atoms, temp, psd_of(n_atoms, temp)});
    };
    record(0.0);

    double prev_psd = psd_of(n_atoms, temp);
    for (std::size_t i = 0; i < opts.n_steps; ++i) {
        const double t = (static_cast<double>(i) + 0.5) * dt;
        const double depth = planck_h * std::max(0.0, ramp.frequency(t) - opts.trap_bottom_hz);

        double dlog_n = 0.0;
        if (depth > 0.0 && depth < eta_cut * kB * temp) {
            // Cut is biting: relax T toward depth/(eta_cut kB), capped by the
            // evaporative collision rate.
            const double t_target = depth / (eta_cut * kB);
            const double eta_eff = std::clamp(depth / (kB * temp), 3.0 + 1e-6, eta_cut);

            const double n0 = n_atoms * std::pow(atom.mass * wb * wb / (2.0 * pi * kB * temp), 1.5);
            const double vbar = std::sqrt(8.0 * kB * temp / (pi * atom.mass));
            const double gamma_el = n0 * sigma_el * vbar * std::numbers::sqrt2;
            const double r_ev = gamma_el * std::exp(-eta_eff) * std::max(eta_eff - 4.0, 0.25);
            const double r_coll = r_ev * (eta_eff + opts.kappa - 3.0) / 3.0;

            const double r_req = std::log(temp / t_target) / dt;
            const double r = std::min(r_req, r_coll);
            if (r > 0.0) {
                temp *= std::exp(-r * dt);
                dlog_n = -r * dt * 3.0 / (eta_eff + opts.kappa - 3.0);
            }
        }
        if (opts.lifetime > 0.0) dlog_n -= dt / opts.lifetime;
        n_atoms *= std::exp(dlog_n);

        const double t_end = static_cast<double>(i + 1) * dt;
        const double psd = psd_of(n_atoms, temp);
        if (!out.bec_crossing_time && prev_psd < 2.612 && psd >= 2.612)
            out.bec_crossing_time = t_end;
        prev_psd = psd;

        if ((i + 1) % sample_every == 0 || i + 1 == opts.n_steps) record(t_end);
    }

    out.final_cloud = ThermalCloud{n_atoms, temp, c.trap};
    return out;
}

// ---------------------------------------------------------------------------
// Thomas-Fermi
// ---------------------------------------------------------------------------

Condensate thomas_fermi(double n_atoms, const Trap3& trap, const physics::AtomState& atom) {
    atom.validate();
    if (!(n_atoms > 0.0)) throw std::invalid_argument("thomas_fermi: N must be > 0");
    if (!(atom.scattering_length > 0.0))
        throw std::invalid_argument("thomas_fermi: needs a repulsive scattering length");
    const double wb = trap.omega_bar();
    const double abar = std::sqrt(physics::consts.hbar / (atom.mass * wb));
    const double mu = 0.5 * physics::consts.hbar * wb *
                      std::pow(15.0 * n_atoms * atom.scattering_length / abar, 0.4);
    Condensate c;
    c.atom_count = n_atoms;
    c.trap = trap;
    c.chemical_potential = mu;
    for (int i = 0; i < 3; ++i)
        c.tf_radii[static_cast<std::size_t>(i)] =
            std::sqrt(2.0 * mu / (atom.mass * trap.omega[static_cast<std::size_t>(i)] *
                                  trap.omega[static_cast<std::size_t>(i)]));
    return c;
}

double critical_temperature(double n_atoms, const Trap3& trap, const physics::AtomState& atom) {
    (void)atom;
    if (!(n_atoms > 0.0)) throw std::invalid_argument("critical_temperature: N must be > 0");
    return 0.94 * physics::consts.hbar * trap.omega_bar() * std::cbrt(n_atoms) /
           physics::consts.kB;
}

// ---------------------------------------------------------------------------
// Time-of-flight
// ---------------------------------------------------------------------------

ExpandedGaussian thermal_expansion(const ThermalCloud& c, double t,
                                   const physics::AtomState& atom) {
    if (t < 0.0) throw std::invalid_argument("thermal_expansion: t must be >= 0");
    const double kt_m = physics::consts.kB * c.temperature / atom.mass;
    auto sigma = [&](double w) { return std::sqrt(kt_m / (w * w) + kt_m * t * t); };
    ExpandedGaussian g;
    g.sigma_h = sigma(c.trap.omega[2]);  // axial
    g.sigma_v = sigma(c.trap.omega[0]);  // radial, along gravity
    g.center_v = -0.5 * physics::consts.g * t * t;
    g.atom_count = c.atom_count;
    return g;
}

ExpandedParabola condensate_expansion(const Condensate& c, double t) {
    if (t < 0.0) throw std::invalid_argument("condensate_expansion: t must be >= 0");
    const double w_rad = c.trap.omega[0];
    const double w_ax = c.trap.omega[2];
    const double tau = w_rad * t;
    const double eps = w_ax / w_rad;
    const double lam_rad = std::sqrt(1.0 + tau * tau);
    const double lam_ax =
        1.0 + eps * eps * (tau * std::atan(tau) - std::log(std::sqrt(1.0 + tau * tau)));
    ExpandedParabola p;
    p.radius_h = c.tf_radii[2] * lam_ax;
    p.radius_v = c.tf_radii[0] * lam_rad;
    p.center_v = -0.5 * physics::consts.g * t * t;
    p.atom_count = c.atom_count;
    return p;
}

double DensityProfile::total() const {
    if (h.size() < 2 || v.size() < 2) return 0.0;
    const double dh = h[1] - h[0];
    const double dv = v[1] - v[0];
    double s = 0.0;
    for (double x : column) s += x;
    return s * dh * dv;
}

std::vector<double> DensityProfile::center_cut() const {
    const std::size_t nh = h.size();
    std::size_t peak_row = 0;
    double best = -1.0;
    for (std::size_t iv = 0; iv < v.size(); ++iv) {
        double row_sum = 0.0;
        for (std::size_t ih = 0; ih < nh; ++ih) row_sum += column[iv * nh + ih];
        if (row_sum > best) {
            best = row_sum;
            peak_row = iv;
        }
    }
    return {column.begin() + static_cast<std::ptrdiff_t>(peak_row * nh),
            column.begin() + static_cast<std::ptrdiff_t>((peak_row + 1) * nh)};
}

namespace {
double rms_along(const DensityProfile& p, bool horizontal) {
    const std::size_t nh = p.h.size();
    double w = 0.0, m1 = 0.0;
    for (std::size_t iv = 0; iv < p.v.size(); ++iv)
        for (std::size_t ih = 0; ih < nh; ++ih) {
            const double c = p.column[iv * nh + ih];
            w += c;
            m1 += c * (horizontal ? p.h[ih] : p.v[iv]);
        }
    if (!(w > 0.0)) return 0.0;
    m1 /= w;
    double m2 = 0.0;
    for (std::size_t iv = 0; iv < p.v.size(); ++iv)
        for (std::size_t ih = 0; ih < nh; ++ih) {
            const double x = (horizontal ? p.h[ih] : p.v[iv]) - m1;
            m2 += p.column[iv * nh + ih] * x * x;
        }
    return std::sqrt(m2 / w);
}
}  // namespace

double DensityProfile::rms_width_h() const { return rms_along(*this, true); }
double DensityProfile::rms_width_v() const { return rms_along(*this, false); }

void DensityProfile::write_csv(const std::string& path) const {
    CsvWriter csv(path, {"h_m", "v_m", "column_density_m2"});
    const std::size_t nh = h.size();
    for (std::size_t iv = 0; iv < v.size(); ++iv)
        for (std::size_t ih = 0; ih < nh; ++ih)
            csv.row({h[ih], v[iv], column[iv * nh + ih]});
    csv.close();
}

DensityProfile render_profile(const std::optional<ExpandedGaussian>& thermal,
                              const std::optional<ExpandedParabola>& condensate,
                              std::size_t n_h, std::size_t n_v) {
    if (!thermal && !condensate)
        throw std::invalid_argument("render_profile: nothing to render");
    if (n_h < 3 || n_v < 3) throw std::invalid_argument("render_profile: grid too small");

    double half_h = 0.0, half_v = 0.0, center_v = 0.0;
    if (thermal) {
        half_h = std::max(half_h, 4.6 * thermal->sigma_h);
        half_v = std::max(half_v, 4.6 * thermal->sigma_v);
        center_v = thermal->center_v;
    }
    if (condensate) {
        half_h = std::max(half_h, 1.1 * condensate->radius_h);
        half_v = std::max(half_v, 1.1 * condensate->radius_v);
        center_v = condensate->center_v;
    }

    DensityProfile p;
    p.h.resize(n_h);
    p.v.resize(n_v);
    for (std::size_t i = 0; i < n_h; ++i)
        p.h[i] = -half_h + 2.0 * half_h * static_cast<double>(i) / static_cast<double>(n_h - 1);
    for (std::size_t i = 0; i < n_v; ++i)
        p.v[i] = center_v - half_v +
                 2.0 * half_v * static_cast<double>(i) / static_cast<double>(n_v - 1);
    p.column.assign(n_h * n_v, 0.0);

    if (thermal) {
        const double amp =
            thermal->atom_count / (2.0 * pi * thermal->sigma_h * thermal->sigma_v);
        for (std::size_t iv = 0; iv < n_v; ++iv) {
            const double dv = (p.v[iv] - thermal->center_v) / thermal->sigma_v;
            for (std::size_t ih = 0; ih < n_h; ++ih) {
                const double dh = p.h[ih] / thermal->sigma_h;
                p.column[iv * n_h + ih] += amp * std::exp(-0.5 * (dh * dh + dv * dv));
            }
        }
    }
    if (condensate) {
        // Column density of a TF paraboloid: (1 - u^2)^{3/2} with peak fixed
        // by normalization: integral over the ellipse is (3 pi / 8)... here
        // 2D integral of (1-u^2)^{3/2} over the unit disk is 2 pi / 5 * ... use
        // exact value: \int (1-r^2)^{3/2} dA = 2 pi \int_0^1 (1-r^2)^{3/2} r dr = 2 pi / 5.
        const double amp = condensate->atom_count * 5.0 /
                           (2.0 * pi * condensate->radius_h * condensate->radius_v);
        for (std::size_t iv = 0; iv < n_v; ++iv) {
            const double dv = (p.v[iv] - condensate->center_v) / condensate->radius_v;
            for (std::size_t ih = 0; ih < n_h; ++ih) {
                const double dh = p.h[ih] / condensate->radius_h;
                const double u2 = dh * dh + dv * dv;
                if (u2 < 1.0) p.column[iv * n_h + ih] += amp * std::pow(1.0 - u2, 1.5);
            }
        }
    }
    return p;
}

DensityProfile tof_expand(const ThermalCloud& c, double t, const physics::AtomState& atom) {
    return render_profile(thermal_expansion(c, t, atom), std::nullopt);
}

DensityProfile tof_expand(const Condensate& c, double t) {
    return render_profile(std::nullopt, condensate_expansion(c, t));
}

// ---------------------------------------------------------------------------
// Bimodal fit
// ---------------------------------------------------------------------------

namespace {

// p = {A_th, sigma, A_c, R, center}
double bimodal_model(const std::array<double, 5>& p, double x) {
    const double dg = (x - p[4]) / p[1];
    double y = p[0] * std::exp(-0.5 * dg * dg);
    const double dc = (x - p[4]) / p[3];
    const double u = 1.0 - dc * dc;
    if (u > 0.0) y += p[2] * u * std::sqrt(u);
    return y;
}

}  // namespace

BimodalFit bimodal_fit(const std::vector<double>& x, const std::vector<double>& profile,
                       const physics::AtomState& atom, std::optional<double> t_tof) {
    if (x.size() != profile.size())
        throw std::invalid_argument("bimodal_fit: x/profile size mismatch");
    if (x.size() < 12) throw std::invalid_argument("bimodal_fit: too few samples");

    const std::size_t n = x.size();

    // Moment-based initial guess.
    double w = 0.0, m1 = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = std::max(0.0, profile[i]);
        w += c;
        m1 += c * x[i];
        peak = std::max(peak, profile[i]);
    }
    if (!(w > 0.0) || !(peak > 0.0)) {
        BimodalFit empty;
        return empty;
    }
    m1 /= w;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - m1;
        m2 += std::max(0.0, profile[i]) * d * d;
    }
    const double sig0 = std::max(std::sqrt(m2 / w), 1e-2 * (x.back() - x.front()));

    std::array<double, 5> p = {0.5 * peak, 1.4 * sig0, 0.5 * peak, 0.5 * sig0, m1};

    auto chi2 = [&](const std::array<double, 5>& q) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = profile[i] - bimodal_model(q, x[i]);
            s += r * r;
        }
        return s;
    };

    double lambda = 1e-3;
    double cost = chi2(p);
    bool converged = false;
    for (int iter = 0; iter < 400; ++iter) {
        // Numeric Jacobian, normal equations with LM damping.
        std::array<std::array<double, 5>, 5> jtj{};
        std::array<double, 5> jtr{};
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 5> ji{};
            const double f0 = bimodal_model(p, x[i]);
            for (int k = 0; k < 5; ++k) {
                auto q = p;
                const double dk = std::max(1e-8, 1e-6 * std::abs(p[static_cast<std::size_t>(k)]));
                q[static_cast<std::size_t>(k)] += dk;
                ji[static_cast<std::size_t>(k)] = (bimodal_model(q, x[i]) - f0) / dk;
            }
            const double r = profile[i] - f0;
            for (int a = 0; a < 5; ++a) {
                jtr[static_cast<std::size_t>(a)] += ji[static_cast<std::size_t>(a)] * r;
                for (int b = 0; b < 5; ++b)
                    jtj[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                        ji[static_cast<std::size_t>(a)] * ji[static_cast<std::size_t>(b)];
            }
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
            auto a = jtj;
            for (int k = 0; k < 5; ++k)
                a[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)] *= 1.0 + lambda;
            // Gaussian elimination with partial pivoting (5x5).
            auto rhs = jtr;
            bool singular = false;
            for (int col = 0; col < 5 && !singular; ++col) {
                int piv = col;
                for (int row = col + 1; row < 5; ++row)
                    if (std::abs(a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]) >
                        std::abs(a[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)]))
                        piv = row;
                std::swap(a[static_cast<std::size_t>(col)], a[static_cast<std::size_t>(piv)]);
                std::swap(rhs[static_cast<std::size_t>(col)], rhs[static_cast<std::size_t>(piv)]);
                const double d = a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
                if (std::abs(d) < 1e-300) {
                    singular = true;
                    break;
                }
                for (int row = col + 1; row < 5; ++row) {
                    const double f =
                        a[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] / d;
                    for (int cc = col; cc < 5; ++cc)
                        a[static_cast<std::size_t>(row)][static_cast<std::size_t>(cc)] -=
                            f * a[static_cast<std::size_t>(col)][static_cast<std::size_t>(cc)];
                    rhs[static_cast<std::size_t>(row)] -= f * rhs[static_cast<std::size_t>(col)];
                }
            }
            std::array<double, 5> step{};
            if (!singular) {
                for (int col = 4; col >= 0; --col) {
                    double s = rhs[static_cast<std::size_t>(col)];
                    for (int cc = col + 1; cc < 5; ++cc)
                        s -= a[static_cast<std::size_t>(col)][static_cast<std::size_t>(cc)] *
                             step[static_cast<std::size_t>(cc)];
                    step[static_cast<std::size_t>(col)] =
                        s / a[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
                }
            }

            auto q = p;
            for (int k = 0; k < 5; ++k)
                q[static_cast<std::size_t>(k)] += step[static_cast<std::size_t>(k)];
            q[1] = std::abs(q[1]);
            q[3] = std::abs(q[3]);
            const double c2 = singular ? cost * 2.0 : chi2(q);
            if (c2 < cost) {
                const double rel = (cost - c2) / std::max(cost, 1e-300);
                p = q;
                cost = c2;
                lambda = std::max(lambda * 0.4, 1e-12);
                stepped = true;
                if (rel < 1e-12) converged = true;
            } else {
                lambda *= 8.0;
            }
        }
        if (!stepped || converged) {
            converged = true;
            break;
        }
    }

    BimodalFit fit;
    fit.thermal_amplitude = std::max(0.0, p[0]);
    fit.thermal_width = p[1];
    fit.condensate_amplitude = std::max(0.0, p[2]);
    fit.tf_radius = p[3];
    fit.center = p[4];
    fit.converged = converged;
    fit.residual_rms = std::sqrt(cost / static_cast<double>(n));
    const double n_th = fit.thermal_amplitude * p[1] * std::sqrt(2.0 * pi);
    const double n_c = fit.condensate_amplitude * p[3] * 3.0 * pi / 8.0;
    fit.condensate_fraction = (n_th + n_c > 0.0) ? n_c / (n_th + n_c) : 0.0;
    if (t_tof && *t_tof > 0.0)
        fit.temperature = atom.mass * p[1] * p[1] /
                          (physics::consts.kB * (*t_tof) * (*t_tof));
    return fit;
}

// ---------------------------------------------------------------------------
// Recoil walk-off
// ---------------------------------------------------------------------------

RateCurve recoil_detuning_curve(const physics::Transition& tr, double s, double duration) {
    if (!(s > 0.0)) throw std::invalid_argument("recoil_detuning_curve: s must be > 0");
    if (!(duration > 0.0)) throw std::invalid_argument("recoil_detuning_curve: duration must be > 0");
    const double k = tr.wavenumber();
    const double gamma = tr.linewidth_gamma;
    RateCurve curve;
    double t = 0.0, v = 0.0;
    // Hard cap to keep pathological parameters from spinning forever.
    for (int i = 0; i < 2000000 && t < duration; ++i) {
        const double delta = -k * v;
        const double rate = physics::saturation_scattering_rate(tr, s, delta);
        curve.t.push_back(t);
        curve.rate.push_back(rate / (0.5 * gamma));
        if (!(rate > 0.0)) break;
        t += 1.0 / rate;
        v += tr.recoil_velocity;
    }
    return curve;
}

double time_to_half_rate(const RateCurve& curve) {
    if (curve.t.empty()) throw std::invalid_argument("time_to_half_rate: empty curve");
    const double half = 0.5 * curve.rate.front();
    for (std::size_t i = 1; i < curve.t.size(); ++i) {
        if (curve.rate[i] <= half) {
            // Linear interpolation between the bracketing events.
            const double f = (curve.rate[i - 1] - half) /
                             std::max(curve.rate[i - 1] - curve.rate[i], 1e-300);
            return curve.t[i - 1] + f * (curve.t[i] - curve.t[i - 1]);
        }
    }
    std::ostringstream msg;
    msg << "time_to_half_rate: rate never fell to half of " << curve.rate.front();
    throw std::runtime_error(msg.str());
}

int photons_to_detune_gamma(const physics::Transition& tr) {
    const double k = tr.wavenumber();
    int count = 0;
    double v = 0.0;
    while (k * v < tr.linewidth_gamma && count < 1000000) {
        v += tr.recoil_velocity;
        ++count;
    }
    return count;
}

double photons_to_detune_gamma_closed_form(const physics::Transition& tr) {
    return tr.linewidth_gamma / (tr.wavenumber() * tr.recoil_velocity);
}

}  // namespace hestar::cloud
