#include "hestar/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace hestar::config {

namespace {

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("trailing characters in number '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected an unsigned integer, got '" + s + "'");
    }
    if (pos != s.size()) throw ConfigError("trailing characters in integer '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

template <typename Sub>
Sub& sub_of(RunConfig& c);
template <>
RunConfig::Physics& sub_of(RunConfig& c) { return c.physics; }
template <>
RunConfig::Source& sub_of(RunConfig& c) { return c.source; }
template <>
RunConfig::Collimator& sub_of(RunConfig& c) { return c.collimator; }
template <>
RunConfig::Slower& sub_of(RunConfig& c) { return c.slower; }
template <>
RunConfig::Trap& sub_of(RunConfig& c) { return c.trap; }
template <>
RunConfig::Stages& sub_of(RunConfig& c) { return c.stages; }
template <>
RunConfig::Evaporation& sub_of(RunConfig& c) { return c.evaporation; }
template <>
RunConfig::Detector& sub_of(RunConfig& c) { return c.detector; }
template <>
RunConfig::Run& sub_of(RunConfig& c) { return c.run; }

template <typename Sub>
Field field_d(std::string sec, std::string key, double Sub::* m) {
    return Field{
        std::move(sec), std::move(key),
        [m](const RunConfig& c) { return fmt_double(sub_of<Sub>(const_cast<RunConfig&>(c)).*m); },
        [m](RunConfig& c, const std::string& v) { sub_of<Sub>(c).*m = parse_double(v); }};
}

template <typename Sub>
Field field_b(std::string sec, std::string key, bool Sub::* m) {
    return Field{
        std::move(sec), std::move(key),
        [m](const RunConfig& c) {
            return (sub_of<Sub>(const_cast<RunConfig&>(c)).*m) ? std::string("true")
                                                               : std::string("false");
        },
        [m](RunConfig& c, const std::string& v) { sub_of<Sub>(c).*m = parse_bool(v); }};
}

template <typename Sub>
Field field_u(std::string sec, std::string key, std::uint64_t Sub::* m) {
    return Field{std::move(sec), std::move(key),
                 [m](const RunConfig& c) {
                     return std::to_string(sub_of<Sub>(const_cast<RunConfig&>(c)).*m);
                 },
                 [m](RunConfig& c, const std::string& v) { sub_of<Sub>(c).*m = parse_u64(v); }};
}

template <typename Sub>
Field field_s(std::string sec, std::string key, std::string Sub::* m) {
    return Field{std::move(sec), std::move(key),
                 [m](const RunConfig& c) { return sub_of<Sub>(const_cast<RunConfig&>(c)).*m; },
                 [m](RunConfig& c, const std::string& v) { sub_of<Sub>(c).*m = v; }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        field_d("physics", "mass_amu", &RunConfig::Physics::mass_amu),
        field_d("physics", "mu_eff_bohr", &RunConfig::Physics::mu_eff_bohr),
        field_d("physics", "scattering_length_m", &RunConfig::Physics::scattering_length_m),
        field_d("physics", "gamma_1083_hz", &RunConfig::Physics::gamma_1083_hz),
        field_d("physics", "gamma_389_hz", &RunConfig::Physics::gamma_389_hz),

        field_d("source", "peak_velocity_m_s", &RunConfig::Source::peak_velocity_m_s),
        field_d("source", "velocity_spread_fwhm_m_s",
                &RunConfig::Source::velocity_spread_fwhm_m_s),
        field_d("source", "flux_per_sr", &RunConfig::Source::flux_per_sr),
        field_d("source", "divergence_halfangle_rad",
                &RunConfig::Source::divergence_halfangle_rad),
        field_u("source", "n_samples", &RunConfig::Source::n_samples),

        field_d("collimator", "capture_halfangle_rad",
                &RunConfig::Collimator::capture_halfangle_rad),
        field_d("collimator", "gain", &RunConfig::Collimator::gain),

        field_d("slower", "length_m", &RunConfig::Slower::length_m),
        field_d("slower", "detuning_hz", &RunConfig::Slower::detuning_hz),
        field_d("slower", "eta_design", &RunConfig::Slower::eta_design),
        field_d("slower", "capture_velocity_m_s", &RunConfig::Slower::capture_velocity_m_s),
        field_d("slower", "exit_velocity_m_s", &RunConfig::Slower::exit_velocity_m_s),
        field_d("slower", "intensity_sat_units", &RunConfig::Slower::intensity_sat_units),
        field_d("slower", "dt_s", &RunConfig::Slower::dt_s),
        field_b("slower", "fit_windings", &RunConfig::Slower::fit_windings),

        field_d("trap", "radial_gradient_t_m", &RunConfig::Trap::radial_gradient_t_m),
        field_d("trap", "axial_curvature_t_m2", &RunConfig::Trap::axial_curvature_t_m2),
        field_d("trap", "bias_field_t", &RunConfig::Trap::bias_field_t),

        field_d("stages", "mot_atom_count", &RunConfig::Stages::mot_atom_count),
        field_d("stages", "mot_temperature_k", &RunConfig::Stages::mot_temperature_k),
        field_b("stages", "molasses", &RunConfig::Stages::molasses),
        field_b("stages", "spin_polarization", &RunConfig::Stages::spin_polarization),
        field_b("stages", "transfer", &RunConfig::Stages::transfer),
        field_b("stages", "doppler_1d", &RunConfig::Stages::doppler_1d),

        field_d("evaporation", "f_start_hz", &RunConfig::Evaporation::f_start_hz),
        field_d("evaporation", "f_end_hz", &RunConfig::Evaporation::f_end_hz),
        field_d("evaporation", "duration_s", &RunConfig::Evaporation::duration_s),
        field_s("evaporation", "shape", &RunConfig::Evaporation::shape),
        field_d("evaporation", "eta_cut", &RunConfig::Evaporation::eta_cut),
        field_d("evaporation", "trap_bottom_hz", &RunConfig::Evaporation::trap_bottom_hz),
        field_d("evaporation", "lifetime_s", &RunConfig::Evaporation::lifetime_s),
        field_d("evaporation", "start_atom_count", &RunConfig::Evaporation::start_atom_count),
        field_d("evaporation", "start_temperature_k",
                &RunConfig::Evaporation::start_temperature_k),

        field_d("detector", "drop_distance_m", &RunConfig::Detector::drop_distance_m),
        field_d("detector", "efficiency", &RunConfig::Detector::efficiency),
        field_d("detector", "dead_time_s", &RunConfig::Detector::dead_time_s),
        field_d("detector", "tdc_bin_s", &RunConfig::Detector::tdc_bin_s),
        field_d("detector", "propagation_speed_m_s",
                &RunConfig::Detector::propagation_speed_m_s),
        field_d("detector", "spatial_jitter_m", &RunConfig::Detector::spatial_jitter_m),
        field_d("detector", "temporal_jitter_s", &RunConfig::Detector::temporal_jitter_s),
        field_b("detector", "enable_jitter", &RunConfig::Detector::enable_jitter),
        field_b("detector", "enable_quantization", &RunConfig::Detector::enable_quantization),
        field_d("detector", "rotation_rad", &RunConfig::Detector::rotation_rad),
        field_d("detector", "discard_margin_m", &RunConfig::Detector::discard_margin_m),
        field_u("detector", "n_drop_samples", &RunConfig::Detector::n_drop_samples),

        field_u("run", "master_seed", &RunConfig::Run::master_seed),
        field_s("run", "output_dir", &RunConfig::Run::output_dir),
        field_u("run", "threads", &RunConfig::Run::threads),
    };
    return table;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t cmt = line.find_first_of("#;");
        if (cmt != std::string::npos) line = line.substr(0, cmt);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            const auto& tbl = fields();
            const bool known = std::any_of(tbl.begin(), tbl.end(), [&](const Field& f) {
                return f.section == section;
            });
            if (!known)
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key before any [section]");

        const Field* match = nullptr;
        for (const Field& f : fields())
            if (f.section == section && f.key == key) {
                match = &f;
                break;
            }
        if (!match)
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + section +
                              "." + key + "'");
        try {
            match->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + key + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const Field& f : fields()) {
        if (f.section != section) {
            if (!section.empty()) out << "\n";
            section = f.section;
            out << "[" << section << "]\n";
        }
        out << f.key << " = " << f.get(cfg) << "\n";
    }
    return out.str();
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    // The destination directory does not affect the physics, so two runs that
    // differ only in where they write their outputs hash identically.
    RunConfig c = cfg;
    c.run.output_dir.clear();
    return fnv1a(serialize_config(c));
}

void RunConfig::validate() const {
    if (evaporation.shape != "exponential" && evaporation.shape != "linear")
        throw ConfigError("evaporation.shape must be 'exponential' or 'linear'");
    if (physics.mass_amu <= 0.0 || physics.mu_eff_bohr <= 0.0 ||
        physics.scattering_length_m <= 0.0)
        throw ConfigError("physics: mass, moment and scattering length must be positive");
    if (slower.eta_design <= 0.0 || slower.eta_design > 1.0)
        throw ConfigError("slower.eta_design must be in (0, 1]");
    if (run.threads == 0) throw ConfigError("run.threads must be >= 1");
    if (run.output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
}

physics::AtomState RunConfig::atom() const {
    hestar::physics::AtomState a;
    a.mass = physics.mass_amu * hestar::physics::consts.amu;
    a.mu_eff = physics.mu_eff_bohr * hestar::physics::consts.muB;
    a.scattering_length = physics.scattering_length_m;
    a.validate();
    return a;
}

physics::Transition RunConfig::t1083() const {
    return hestar::physics::make_transition(1083e-9, hestar::physics::two_pi * physics.gamma_1083_hz,
                                    0.167, atom());
}

physics::Transition RunConfig::t389() const {
    return hestar::physics::make_transition(389e-9, hestar::physics::two_pi * physics.gamma_389_hz,
                                    33.0, atom());
}

physics::LaserConfig RunConfig::slower_laser() const {
    hestar::physics::LaserConfig l;
    l.transition = t1083();
    l.detuning_delta0 = hestar::physics::two_pi * slower.detuning_hz;
    l.intensity_sat_units = slower.intensity_sat_units;
    l.direction = {-1.0, 0.0, 0.0};  // counter-propagating along the beam
    l.validate();
    return l;
}

beam::SourceSpec RunConfig::source_spec() const {
    beam::SourceSpec s;
    s.peak_velocity = source.peak_velocity_m_s;
    s.velocity_spread_fwhm = source.velocity_spread_fwhm_m_s;
    s.flux_per_sr = source.flux_per_sr;
    s.divergence_halfangle = source.divergence_halfangle_rad;
    return s;
}

beam::CollimatorSpec RunConfig::collimator_spec() const {
    beam::CollimatorSpec c;
    c.capture_halfangle = collimator.capture_halfangle_rad;
    c.gain = collimator.gain;
    return c;
}

traps::IoffeTrapParams RunConfig::trap_params() const {
    traps::IoffeTrapParams p;
    p.radial_gradient = trap.radial_gradient_t_m;
    p.axial_curvature = trap.axial_curvature_t_m2;
    p.bias_field = trap.bias_field_t;
    p.validate();
    return p;
}

cloud::RfRamp RunConfig::rf_ramp() const {
    cloud::RfRamp r;
    r.f_start = evaporation.f_start_hz;
    r.f_end = evaporation.f_end_hz;
    r.duration = evaporation.duration_s;
    r.shape = evaporation.shape == "linear" ? cloud::RampShape::linear
                                            : cloud::RampShape::exponential;
    r.validate();
    return r;
}

cloud::EvapOptions RunConfig::evap_options() const {
    cloud::EvapOptions o;
    o.trap_bottom_hz = evaporation.trap_bottom_hz;
    o.lifetime = evaporation.lifetime_s;
    return o;
}

detector::DetectorGeometry RunConfig::detector_geometry() const {
    hestar::detector::DetectorGeometry g;
    g.drop_distance = detector.drop_distance_m;
    g.rotation_about_z = detector.rotation_rad;
    g.discard_margin = detector.discard_margin_m;
    g.validate();
    return g;
}

detector::DetectorResponse RunConfig::detector_response() const {
    hestar::detector::DetectorResponse r;
    r.propagation_speed = detector.propagation_speed_m_s;
    r.tdc_bin = detector.tdc_bin_s;
    r.spatial_jitter_rms = detector.spatial_jitter_m;
    r.temporal_jitter_rms = detector.temporal_jitter_s;
    r.dead_time = detector.dead_time_s;
    r.efficiency = detector.efficiency;
    r.enable_jitter = detector.enable_jitter;
    r.validate();
    return r;
}

}  // namespace hestar::config
