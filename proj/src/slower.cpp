#include "hestar/slower.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hestar/rng.hpp"

namespace hestar::slower {

using physics::consts;

namespace {
constexpr double mu0 = 1.25663706212e-6;  // T m / A

double loop_field(double current, double radius, double d) {
    const double r2 = radius * radius;
    const double q = r2 + d * d;
    return 0.5 * mu0 * current * r2 / (q * std::sqrt(q));
}

double loop_field_derivative(double current, double radius, double d) {
    const double r2 = radius * radius;
    const double q = r2 + d * d;
    return -1.5 * mu0 * current * r2 * d / (q * q * std::sqrt(q));
}
}  // namespace

double WindingLayout::total_wire_length() const {
    double len = 0.0;
    for (const auto& s : sections)
        for (const auto& l : s.layers) len += physics::two_pi * l.radius * l.n_turns;
    return len;
}

int WindingLayout::total_turns() const {
    int n = 0;
    for (const auto& s : sections)
        for (const auto& l : s.layers) n += l.n_turns;
    return n;
}

double solenoid_field(const WindingLayout& layout, double x) {
    double b = 0.0;
    for (const auto& s : layout.sections)
        for (const auto& l : s.layers)
            for (int j = 0; j < l.n_turns; ++j) {
                const double xc = s.x_start + (j + 0.5) * l.wire_pitch;
                b += l.current_sign * loop_field(layout.current, l.radius, x - xc);
            }
    return b;
}

double solenoid_field_derivative(const WindingLayout& layout, double x) {
    double d = 0.0;
    for (const auto& s : layout.sections)
        for (const auto& l : s.layers)
            for (int j = 0; j < l.n_turns; ++j) {
                const double xc = s.x_start + (j + 0.5) * l.wire_pitch;
                d += l.current_sign * loop_field_derivative(layout.current, l.radius, x - xc);
            }
    return d;
}

FieldProfile layout_field_profile(const WindingLayout& layout, double x0, double x1,
                                  std::size_t n_samples) {
    std::vector<double> grid(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        grid[i] = x0 + (x1 - x0) * double(i) / double(n_samples - 1);
    return FieldProfile::from_closures(
        [layout](double x) { return solenoid_field(layout, x); },
        [layout](double x) { return solenoid_field_derivative(layout, x); }, std::move(grid));
}

// ---------------------------------------------------------------------------

double max_deceleration(const physics::LaserConfig& laser, const physics::AtomState& atom) {
    const double k = laser.transition.wavenumber();
    return consts.hbar * k * laser.transition.linewidth_gamma / (2.0 * atom.mass);
}

double required_length(double v0, double vf, double eta_design,
                       const physics::LaserConfig& laser, const physics::AtomState& atom) {
    return (v0 * v0 - vf * vf) / (2.0 * eta_design * max_deceleration(laser, atom));
}

FieldProfile target_field(double v0, double vf, double length, double eta_design,
                          const physics::LaserConfig& laser, const physics::AtomState& atom,
                          double tail_decay_length, double sample_dx) {
    if (eta_design <= 0.0 || eta_design > 1.0)
        throw std::invalid_argument("target_field: eta_design must be in (0, 1]");
    if (vf > v0) throw std::invalid_argument("target_field: vf must be <= v0");
    if (length <= 0.0) throw std::invalid_argument("target_field: length must be > 0");

    const double a = max_deceleration(laser, atom);
    const double k = laser.transition.wavenumber();
    const double mu = atom.mu_eff;
    const double hbar = consts.hbar;
    const double delta0 = laser.detuning_delta0;
    const double l_dec = (v0 * v0 - vf * vf) / (2.0 * eta_design * a);
    if (length < l_dec) {
        std::ostringstream msg;
        msg << "target_field: infeasible design, length " << length
            << " m below required minimum " << l_dec << " m";
        throw InfeasibleDesign(msg.str());
    }

    const double b_end = hbar * (delta0 + k * vf) / mu;
    auto speed = [=](double x) { return std::sqrt(v0 * v0 - 2.0 * eta_design * a * x); };
    auto value = [=](double x) {
        x = std::clamp(x, 0.0, length);
        if (l_dec <= 0.0) return hbar * (delta0 + k * v0) / mu;
        if (x <= l_dec) return hbar * (delta0 + k * speed(x)) / mu;
        return b_end * std::exp(-(x - l_dec) / tail_decay_length);
    };
    auto deriv = [=](double x) {
        if (x < 0.0 || x > length || l_dec <= 0.0) return 0.0;
        if (x <= l_dec) return -hbar * k * eta_design * a / (mu * speed(x));
        return -b_end / tail_decay_length * std::exp(-(x - l_dec) / tail_decay_length);
    };

    const auto n = std::size_t(std::ceil(length / sample_dx)) + 1;
    std::vector<double> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = length * double(i) / double(n - 1);
    FieldProfile p = FieldProfile::from_closures(value, deriv, std::move(grid));
    p.decel_span_start = 0.0;
    p.decel_span_end = l_dec;
    return p;
}

// ---------------------------------------------------------------------------

double efficiency_at(double b, double dbdx, const physics::LaserConfig& laser,
                     const physics::AtomState& atom) {
    const double k = laser.transition.wavenumber();
    const double gamma = laser.transition.linewidth_gamma;
    const double mu = atom.mu_eff;
    const double pref =
        2.0 * atom.mass * mu / (consts.hbar * consts.hbar * k * k * k * gamma);
    return pref * (-dbdx) * (mu * b / consts.hbar - laser.detuning_delta0);
}

EfficiencyProfile efficiency_profile(const FieldProfile& field,
                                     const physics::LaserConfig& laser,
                                     const physics::AtomState& atom,
                                     const std::vector<double>& query_grid) {
    const std::vector<double>& grid = query_grid.empty() ? field.x_samples() : query_grid;
    EfficiencyProfile out;
    out.x_samples = grid;
    out.eta.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.eta[i] = efficiency_at(field.value(grid[i]), field.derivative(grid[i]), laser, atom);
    return out;
}

double EfficiencyProfile::mean_over(double x0, double x1) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x_samples.size(); ++i)
        if (x_samples[i] >= x0 && x_samples[i] <= x1) {
            sum += eta[i];
            ++n;
        }
    return n ? sum / double(n) : 0.0;
}

double EfficiencyProfile::max_over(double x0, double x1) const {
    double m = -1e300;
    for (std::size_t i = 0; i < x_samples.size(); ++i)
        if (x_samples[i] >= x0 && x_samples[i] <= x1) m = std::max(m, eta[i]);
    return m;
}

// ---------------------------------------------------------------------------
// fit_layout: two stacks of layers, the positive one anchored ahead of the
// entrance and tapering downstream, the negative one anchored past the span
// end and tapering upstream.  Integer turn counts are refined by coordinate
// descent on a weighted objective (field residual, slope residual, and an
// optional penalty on local efficiency above eta_limit).
// ---------------------------------------------------------------------------

namespace {

struct FitContext {
    std::vector<double> grid;    // objective grid over the decelerating span
    std::vector<double> bt, dt;  // target field and slope on the grid
    double b_scale = 1.0, d_scale = 1.0;
    double current = 0.0;
    const FitConstraints* cons = nullptr;
    bool with_eta = false;
};

}  // namespace

// Turn j of a stack sits at anchor + dir*(j+0.5)*pitch.
struct StackGeom {
    double anchor;
    int dir;
    double pitch;
    double pos(int j) const { return anchor + dir * (j + 0.5) * pitch; }
};

static double fit_objective_arrays(const FitContext& ctx, const std::vector<double>& b,
                                   const std::vector<double>& d) {
    double j = 0.0;
    const double wd = 0.2, weta = 10.0;
    for (std::size_t i = 0; i < ctx.grid.size(); ++i) {
        const double rb = (b[i] - ctx.bt[i]) / ctx.b_scale;
        const double rd = (d[i] - ctx.dt[i]) / ctx.d_scale;
        j += rb * rb + wd * rd * rd;
        if (ctx.with_eta) {
            const double eta = efficiency_at(b[i], d[i], *ctx.cons->laser, *ctx.cons->atom);
            const double over = eta - ctx.cons->eta_limit;
            if (over > 0.0) j += weta * over * over;
        }
    }
    return j;
}

double fit_objective(const WindingLayout& layout, const FieldProfile& target,
                     const FitConstraints& constraints);

WindingLayout fit_layout(const FieldProfile& target, const FitConstraints& constraints,
                         FitReport* report) {
    if (constraints.max_layers < 1)
        throw std::invalid_argument("fit_layout: max_layers must be >= 1 (binding constraint)");
    if (constraints.wire_pitch <= 0.0 || constraints.wire_thickness <= 0.0)
        throw std::invalid_argument("fit_layout: wire dimensions must be > 0 (binding constraint)");

    const double span0 = target.decel_span_start;
    const double span1 =
        target.decel_span_end > span0 ? target.decel_span_end : target.x_max();

    FitContext ctx;
    ctx.cons = &constraints;
    ctx.current = constraints.current;
    ctx.with_eta = constraints.laser.has_value() && constraints.atom.has_value();
    const std::size_t ng = 350;
    ctx.grid.resize(ng);
    ctx.bt.resize(ng);
    ctx.dt.resize(ng);
    for (std::size_t i = 0; i < ng; ++i) {
        ctx.grid[i] = span0 + (span1 - span0) * double(i) / double(ng - 1);
        ctx.bt[i] = target.value(ctx.grid[i]);
        ctx.dt[i] = target.derivative(ctx.grid[i]);
    }
    ctx.b_scale = ctx.d_scale = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
        ctx.b_scale = std::max(ctx.b_scale, std::abs(ctx.bt[i]));
        ctx.d_scale = std::max(ctx.d_scale, std::abs(ctx.dt[i]));
    }
    if (ctx.b_scale <= 0.0) ctx.b_scale = 1.0;
    if (ctx.d_scale <= 0.0) ctx.d_scale = 1.0;

    const double pitch = constraints.wire_pitch;
    const double unit = mu0 * constraints.current / pitch;  // field per covering layer
    const double lead = 0.12;  // extend stacks past the fitted span (end effects)
    const int max_turns = int((span1 - span0 + 2.0 * lead) / pitch) + 1;

    StackGeom pos_geom{span0 - lead, +1, pitch};
    StackGeom neg_geom{span1 + 0.05, -1, pitch};

    auto radius_of = [&](int layer) {
        return constraints.tube_radius + (layer + 0.5) * constraints.wire_thickness;
    };

    // Initial guess from the covering-layer count round(B/unit) at each x.
    std::vector<int> pos_turns, neg_turns;
    std::vector<double> pos_radius, neg_radius;
    for (int l = 0; l < constraints.max_layers; ++l) {
        const double level = (l + 0.5) * unit;
        double x_cover = pos_geom.anchor;
        for (std::size_t i = 0; i < ng; ++i)
            if (ctx.bt[i] >= level) x_cover = ctx.grid[i];
        int n = int(std::lround((x_cover - pos_geom.anchor) / pitch));
        n = std::clamp(n, 0, max_turns);
        if (n == 0 && l > 0) break;
        pos_turns.push_back(n);
        pos_radius.push_back(radius_of(l));
    }
    for (int l = 0; l < constraints.max_layers; ++l) {
        const double level = -(l + 0.5) * unit;
        double x_cover = neg_geom.anchor;
        for (std::size_t i = ng; i-- > 0;)
            if (ctx.bt[i] <= level) x_cover = ctx.grid[i];
        int n = int(std::lround((neg_geom.anchor - x_cover) / pitch));
        n = std::clamp(n, 0, max_turns);
        if (n == 0 && l > 0) break;
        neg_turns.push_back(n);
        neg_radius.push_back(radius_of(l));
    }

    // Synthesized field/slope arrays on the grid, updated incrementally.
    std::vector<double> b(ng, 0.0), d(ng, 0.0);
    auto apply_turn = [&](const StackGeom& g, double radius, int sign, int j, double scale) {
        const double xc = g.pos(j);
        for (std::size_t i = 0; i < ng; ++i) {
            const double dist = ctx.grid[i] - xc;
            b[i] += scale * sign * loop_field(ctx.current, radius, dist);
            d[i] += scale * sign * loop_field_derivative(ctx.current, radius, dist);
        }
    };
    for (std::size_t l = 0; l < pos_turns.size(); ++l)
        for (int j = 0; j < pos_turns[l]; ++j) apply_turn(pos_geom, pos_radius[l], +1, j, 1.0);
    for (std::size_t l = 0; l < neg_turns.size(); ++l)
        for (int j = 0; j < neg_turns[l]; ++j) apply_turn(neg_geom, neg_radius[l], -1, j, 1.0);

    double j_cur = fit_objective_arrays(ctx, b, d);
    int iterations = 0;
    const int max_passes = 200;
    for (int pass = 0; pass < max_passes; ++pass) {
        bool improved = false;
        auto sweep = [&](const StackGeom& g, std::vector<int>& turns,
                         const std::vector<double>& radii, int sign) {
            for (std::size_t l = 0; l < turns.size(); ++l) {
                for (int delta : {+1, -1}) {
                    const int n_new = turns[l] + delta;
                    if (n_new < 0 || n_new > max_turns) continue;
                    const int j_turn = delta > 0 ? turns[l] : turns[l] - 1;
                    apply_turn(g, radii[l], sign, j_turn, double(delta));
                    const double j_try = fit_objective_arrays(ctx, b, d);
                    ++iterations;
                    if (j_try < j_cur - 1e-15) {
                        j_cur = j_try;
                        turns[l] = n_new;
                        improved = true;
                    } else {
                        apply_turn(g, radii[l], sign, j_turn, double(-delta));
                    }
                }
            }
        };
        sweep(pos_geom, pos_turns, pos_radius, +1);
        sweep(neg_geom, neg_turns, neg_radius, -1);
        if (!improved) break;
    }

    WindingLayout layout;
    layout.current = constraints.current;
    layout.wire_cross_section = constraints.wire_pitch * constraints.wire_thickness;
    Section pos_section;
    pos_section.x_start = pos_geom.anchor;
    for (std::size_t l = 0; l < pos_turns.size(); ++l)
        if (pos_turns[l] > 0)
            pos_section.layers.push_back({pos_turns[l], pos_radius[l], pitch, +1});
    if (!pos_section.layers.empty()) layout.sections.push_back(pos_section);
    for (std::size_t l = 0; l < neg_turns.size(); ++l)
        if (neg_turns[l] > 0) {
            Section s;
            s.x_start = neg_geom.anchor - neg_turns[l] * pitch;
            s.layers.push_back({neg_turns[l], neg_radius[l], pitch, -1});
            layout.sections.push_back(s);
        }

    if (report) {
        double ss = 0.0, mx = 0.0;
        for (std::size_t i = 0; i < ng; ++i) {
            const double r = b[i] - ctx.bt[i];
            ss += r * r;
            mx = std::max(mx, std::abs(r));
        }
        report->rms_residual = std::sqrt(ss / double(ng));
        report->max_residual = mx;
        report->wire_length = layout.total_wire_length();
        report->iterations = iterations;
        if (ctx.with_eta) {
            double sum = 0.0, emax = -1e300, emin = 1e300;
            for (std::size_t i = 0; i < ng; ++i) {
                const double eta =
                    efficiency_at(b[i], d[i], *constraints.laser, *constraints.atom);
                sum += eta;
                emax = std::max(emax, eta);
                emin = std::min(emin, eta);
            }
            report->eta_mean = sum / double(ng);
            report->eta_max = emax;
            report->eta_min = emin;
        }
    }
    return layout;
}

double fit_objective(const WindingLayout& layout, const FieldProfile& target,
                     const FitConstraints& constraints) {
    FitContext ctx;
    ctx.cons = &constraints;
    ctx.current = constraints.current;
    ctx.with_eta = constraints.laser.has_value() && constraints.atom.has_value();
    const double span0 = target.decel_span_start;
    const double span1 =
        target.decel_span_end > span0 ? target.decel_span_end : target.x_max();
    const std::size_t ng = 350;
    ctx.grid.resize(ng);
    ctx.bt.resize(ng);
    ctx.dt.resize(ng);
    ctx.b_scale = ctx.d_scale = 0.0;
    std::vector<double> b(ng), d(ng);
    for (std::size_t i = 0; i < ng; ++i) {
        ctx.grid[i] = span0 + (span1 - span0) * double(i) / double(ng - 1);
        ctx.bt[i] = target.value(ctx.grid[i]);
        ctx.dt[i] = target.derivative(ctx.grid[i]);
        ctx.b_scale = std::max(ctx.b_scale, std::abs(ctx.bt[i]));
        ctx.d_scale = std::max(ctx.d_scale, std::abs(ctx.dt[i]));
        b[i] = solenoid_field(layout, ctx.grid[i]);
        d[i] = solenoid_field_derivative(layout, ctx.grid[i]);
    }
    if (ctx.b_scale <= 0.0) ctx.b_scale = 1.0;
    if (ctx.d_scale <= 0.0) ctx.d_scale = 1.0;
    return fit_objective_arrays(ctx, b, d);
}

// ---------------------------------------------------------------------------

Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                         std::size_t n_bins) {
    Histogram h;
    h.bin_edges.resize(n_bins + 1);
    h.counts.assign(n_bins, 0.0);
    for (std::size_t i = 0; i <= n_bins; ++i)
        h.bin_edges[i] = lo + (hi - lo) * double(i) / double(n_bins);
    for (double v : values) {
        if (v < lo || v >= hi) continue;
        const auto bin = std::size_t((v - lo) / (hi - lo) * double(n_bins));
        h.counts[std::min(bin, n_bins - 1)] += 1.0;
    }
    return h;
}

DecelResult decelerate(const Ensemble& e, const FieldProfile& field,
                       const physics::LaserConfig& laser, const physics::AtomState& atom,
                       double dt, std::uint64_t seed, const DecelOptions& opts) {
    const double k = laser.transition.wavenumber();
    const double gamma = laser.transition.linewidth_gamma;
    const double mu = atom.mu_eff;
    const double hbar = consts.hbar;
    const double vr = hbar * k / atom.mass;  // recoil velocity
    const double x_end = field.x_max();
    const double dv_limit = 0.3 * gamma / k;  // resonance never skipped in one step
    const double dx_limit = 2e-3;

    auto accel = [&](double x, double v) {
        const double shift = k * v - mu * field.value(x) / hbar;
        return -vr * physics::saturation_scattering_rate(laser, shift);
    };

    DecelResult out;
    out.ensemble = e;
    out.exit_speeds.resize(e.size());

    Rng master(seed);
    double v_in_max = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        Rng r = master.fork(i);
        double x = std::min(e.positions[i][0], 0.0);
        double v = e.velocities[i][0];
        double vy = e.velocities[i][1], vz = e.velocities[i][2];
        v_in_max = std::max(v_in_max, v);
        double t = 0.0;
        while (x < x_end && v > 0.5 && t < opts.t_max) {
            const double a0 = accel(x, v);
            double h = dt;
            if (std::abs(a0) > 0.0) h = std::min(h, dv_limit / std::abs(a0));
            h = std::min(h, dx_limit / std::max(v, 1.0));
            if (opts.recoil_noise) {
                // Euler step with Poisson scattering statistics.
                const double mean_n = std::abs(a0) / vr * h;
                const double n = double(r.poisson(mean_n));
                x += v * h;
                v -= n * vr;
                const double sig = vr * std::sqrt(n / 3.0);
                v += r.normal(0.0, sig);  // longitudinal emission recoil
                vy += r.normal(0.0, sig);
                vz += r.normal(0.0, sig);
            } else {
                const double k1 = a0;
                const double k2 = accel(x + 0.5 * h * v, v + 0.5 * h * k1);
                const double k3 = accel(x + 0.5 * h * (v + 0.5 * h * k1), v + 0.5 * h * k2);
                const double k4 = accel(x + h * (v + 0.5 * h * k3), v + h * k3);
                x += h * (v + h / 6.0 * (k1 + k2 + k3));
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t += h;
        }
        out.ensemble.positions[i][0] = x;
        out.ensemble.velocities[i] = {v, vy, vz};
        out.exit_speeds[i] = v;
    }
    out.exit_histogram =
        make_histogram(out.exit_speeds, 0.0, std::max(1.0, v_in_max) * 1.1, 120);
    return out;
}

Spectrum probe_spectrum(const Ensemble& e, const physics::LaserConfig& laser,
                        double probe_angle, double scan_range_hz, std::size_t n_bins) {
    if (std::abs(std::cos(probe_angle)) < 1e-12)
        throw std::invalid_argument("probe_spectrum: probe angle must not be pi/2");
    const double k = laser.transition.wavenumber();
    const double c = std::cos(probe_angle);
    Spectrum s;
    s.frequency_hz.resize(n_bins);
    s.signal.assign(n_bins, 0.0);
    const double df = scan_range_hz / double(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) s.frequency_hz[i] = (double(i) + 0.5) * df;
    const double weight = e.size() ? e.atom_count / double(e.size()) : 0.0;
    for (const auto& v : e.velocities) {
        const double f = k * v[0] * c / physics::two_pi;
        if (f < 0.0 || f >= scan_range_hz) continue;
        s.signal[std::min(std::size_t(f / df), n_bins - 1)] += weight;
    }
    return s;
}

}  // namespace hestar::slower
