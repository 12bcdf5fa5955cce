#include "hestar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hestar/beam.hpp"
#include "hestar/io.hpp"
#include "hestar/rng.hpp"
#include "hestar/slower.hpp"

namespace hestar::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

json ledger_json(const traps::StageLedger& ledger) {
    json arr = json::array();
    for (const auto& e : ledger.entries) {
        json row;
        row["stage"] = e.stage_name;
        row["atom_count"] = e.atom_count;
        row["temperature_k"] = e.temperature;
        row["duration_s"] = e.duration;
        if (e.lifetime) row["lifetime_s"] = *e.lifetime;
        if (!e.notes.empty()) row["notes"] = e.notes;
        arr.push_back(row);
    }
    return arr;
}

std::string out_path(const config::RunConfig& cfg, const std::string& name) {
    return (fs::path(cfg.run.output_dir) / name).string();
}

void prepare_output_dir(const config::RunConfig& cfg) {
    fs::create_directories(cfg.run.output_dir);
}

void write_manifest(const config::RunConfig& cfg, RunManifest& m) {
    m.finalize();
    write_file_atomic(out_path(cfg, "manifest.json"), m.to_json());
    write_file_atomic(out_path(cfg, "config_resolved.ini"), config::serialize_config(cfg));
}

// Thermal sample at temperature T, all positions at the trap center.
Ensemble thermal_sample(double atom_count, double temperature,
                        const physics::AtomState& atom, std::size_t n,
                        std::uint64_t seed) {
    Ensemble e;
    e.atom_count = atom_count;
    e.positions.assign(n, {0.0, 0.0, 0.0});
    e.velocities.resize(n);
    const double sigma = std::sqrt(physics::consts.kB * temperature / atom.mass);
    Rng root(seed);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r = root.fork(i);
        e.velocities[i] = {r.normal(0.0, sigma), r.normal(0.0, sigma), r.normal(0.0, sigma)};
    }
    return e;
}

void write_histogram_csv(const std::string& path, const slower::Histogram& h,
                         const std::string& value_name) {
    CsvWriter csv(path, {"bin_center_m_s", value_name});
    for (std::size_t i = 0; i + 1 < h.bin_edges.size(); ++i)
        csv.row({0.5 * (h.bin_edges[i] + h.bin_edges[i + 1]), h.counts[i]});
    csv.close();
}

void write_trajectory_csv(const std::string& path, const cloud::EvapTrajectory& traj) {
    CsvWriter csv(path, {"t_s", "atom_count", "temperature_k", "psd"});
    for (const auto& p : traj.points) csv.row({p.t, p.atom_count, p.temperature, p.psd});
    csv.close();
}

}  // namespace

std::string RunManifest::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["version"] = version;
    j["ledger"] = ledger_json(ledger);
    j["outputs"] = outputs;
    if (!manifest_hash.empty()) j["manifest_hash"] = manifest_hash;
    return j.dump(2) + "\n";
}

void RunManifest::finalize() {
    std::sort(outputs.begin(), outputs.end());
    manifest_hash.clear();
    manifest_hash = hex64(config::fnv1a(to_json()));
}

PipelineResult run_pipeline(const config::RunConfig& cfg) {
    cfg.validate();
    prepare_output_dir(cfg);

    const physics::AtomState atom = cfg.atom();
    const physics::LaserConfig laser = cfg.slower_laser();
    const std::uint64_t seed = cfg.run.master_seed;

    PipelineResult res;
    res.manifest.config_hash = hex64(config::config_hash(cfg));
    res.manifest.seed = seed;

    // --- beam + collimation -------------------------------------------------
    Ensemble beam_e = beam::sample_source(cfg.source_spec(), cfg.source.n_samples, seed ^ 0x01);
    beam::CollimationReport coll;
    beam_e = beam::apply_collimation(beam_e, cfg.collimator_spec(), &coll,
                                     cfg.source.flux_per_sr);

    // --- slower --------------------------------------------------------------
    const slower::FieldProfile field = slower::target_field(
        cfg.slower.capture_velocity_m_s, cfg.slower.exit_velocity_m_s, cfg.slower.length_m,
        cfg.slower.eta_design, laser, atom);
    slower::DecelResult dec =
        slower::decelerate(beam_e, field, laser, atom, cfg.slower.dt_s, seed ^ 0x02);
    std::size_t captured = 0;
    for (double v : dec.exit_speeds)
        if (v < 100.0) ++captured;
    res.slower_captured_fraction =
        dec.exit_speeds.empty() ? 0.0
                                : static_cast<double>(captured) /
                                      static_cast<double>(dec.exit_speeds.size());
    write_histogram_csv(out_path(cfg, "slower_exit_histogram.csv"), dec.exit_histogram,
                        "count");
    res.manifest.outputs.push_back("slower_exit_histogram.csv");

    // --- MOT hand-off + stages ----------------------------------------------
    traps::StageLedger& ledger = res.manifest.ledger;
    {
        traps::StageReport mot;
        mot.stage_name = "mot";
        mot.atom_count = cfg.stages.mot_atom_count;
        mot.temperature = cfg.stages.mot_temperature_k;
        mot.duration = traps::MotDefaults{}.lifetime;
        mot.lifetime = traps::MotDefaults{}.lifetime;
        std::ostringstream note;
        note << "slower capture fraction " << res.slower_captured_fraction
             << ", collimation gain " << coll.gain;
        mot.notes = note.str();
        ledger.entries.push_back(mot);
    }

    Ensemble trapped = thermal_sample(cfg.stages.mot_atom_count, cfg.stages.mot_temperature_k,
                                      atom, 2000, seed ^ 0x03);
    std::uint64_t stage_seed = seed ^ 0x04;
    for (const auto& stage : traps::default_stage_sequence()) {
        const bool enabled = (stage.name == "molasses" && cfg.stages.molasses) ||
                             (stage.name == "spin_polarization" && cfg.stages.spin_polarization) ||
                             (stage.name == "transfer" && cfg.stages.transfer) ||
                             (stage.name == "doppler_1d" && cfg.stages.doppler_1d);
        if (!enabled) continue;
        trapped = traps::apply_stage(trapped, stage, atom, ledger, stage_seed++);
    }
    ledger.write_csv(out_path(cfg, "stage_ledger.csv"));
    res.manifest.outputs.push_back("stage_ledger.csv");

    // --- magnetic trap + evaporation ------------------------------------------
    const traps::TrapFrequencies tf = traps::trap_frequencies(cfg.trap_params(), atom);
    const cloud::Trap3 trap3{{tf.omega_rad, tf.omega_rad, tf.omega_ax}};

    double n_start = cfg.evaporation.start_atom_count > 0.0 ? cfg.evaporation.start_atom_count
                                                            : ledger.entries.back().atom_count;
    double t_start = cfg.evaporation.start_temperature_k > 0.0
                         ? cfg.evaporation.start_temperature_k
                         : ledger.entries.back().temperature;
    cloud::ThermalCloud start{n_start, t_start, trap3};
    res.evaporation =
        cloud::evaporate(start, cfg.rf_ramp(), cfg.evaporation.eta_cut, atom,
                         cfg.evap_options());
    write_trajectory_csv(out_path(cfg, "evaporation.csv"), res.evaporation);
    res.manifest.outputs.push_back("evaporation.csv");
    {
        const auto& fc = res.evaporation.final_cloud;
        traps::StageReport ev;
        ev.stage_name = "evaporation";
        ev.atom_count = fc.atom_count;
        ev.temperature = fc.temperature;
        ev.duration = cfg.evaporation.duration_s;
        ev.lifetime = cfg.evaporation.lifetime_s;
        if (res.evaporation.bec_crossing_time) {
            std::ostringstream note;
            note << "psd crossed 2.612 at t = " << *res.evaporation.bec_crossing_time << " s";
            ev.notes = note.str();
        }
        ledger.entries.push_back(ev);
    }

    // --- condensate -----------------------------------------------------------
    res.condensate =
        cloud::thomas_fermi(res.evaporation.final_cloud.atom_count, trap3, atom);
    {
        traps::StageReport c;
        c.stage_name = "condensate";
        c.atom_count = res.condensate.atom_count;
        c.temperature = res.evaporation.final_cloud.temperature;
        std::ostringstream note;
        note << "tf radii " << res.condensate.tf_radii[0] << " / " << res.condensate.tf_radii[2]
             << " m";
        c.notes = note.str();
        ledger.entries.push_back(c);
    }

    // --- drop onto the detector -------------------------------------------------
    const detector::DetectorGeometry geom = cfg.detector_geometry();
    const detector::DetectorResponse resp = cfg.detector_response();
    const detector::Calibration cal = detector::default_calibration(geom, resp);

    res.dropped = thermal_sample(res.evaporation.final_cloud.atom_count,
                                 res.evaporation.final_cloud.temperature, atom,
                                 cfg.detector.n_drop_samples, seed ^ 0x05);
    const detector::ImpactList impacts = detector::simulate_impacts(res.dropped, geom);
    detector::EncodeReport enc_report;
    std::vector<detector::AnalogHit> analog =
        detector::encode_hits(impacts, geom, resp, seed ^ 0x06, &enc_report);

    auto add_event = [&](const std::optional<detector::EventRecord>& ev) {
        if (!ev) return;
        res.events.push_back(*ev);
        res.momenta.push_back(detector::reconstruct_momentum(*ev, geom, atom, 0.0));
    };

    if (cfg.detector.enable_quantization) {
        // Dead time acts on the analog stream; quantization afterwards can swap
        // hits only a few ps apart, so re-sort by quantized mean tick before
        // serializing to keep the stream monotone per quadrant.
        std::vector<detector::RawHit> raw =
            detector::quantize_hits(detector::apply_dead_time(analog, resp), resp);
        std::stable_sort(raw.begin(), raw.end(),
                         [](const detector::RawHit& a, const detector::RawHit& b) {
                             return a.mean_ticks() < b.mean_ticks();
                         });
        const auto bytes = detector::serialize_stream(raw, resp);
        write_file_atomic(out_path(cfg, "hits.dld4"),
                          std::vector<unsigned char>(bytes.begin(), bytes.end()));
        res.manifest.outputs.push_back("hits.dld4");
        for (const auto& h : raw) add_event(detector::reconstruct_event(h, geom, resp, cal));
    } else {
        analog = detector::apply_dead_time(analog, resp);
        for (const auto& h : analog) add_event(detector::reconstruct_event(h, geom, resp, cal));
    }

    detector::write_events_csv(out_path(cfg, "events.csv"), res.events);
    detector::write_momenta_csv(out_path(cfg, "momenta.csv"), res.momenta);
    res.manifest.outputs.push_back("events.csv");
    res.manifest.outputs.push_back("momenta.csv");
    {
        traps::StageReport d;
        d.stage_name = "detection";
        d.atom_count = static_cast<double>(res.events.size());
        d.temperature = res.evaporation.final_cloud.temperature;
        std::ostringstream note;
        note << "impacts " << impacts.impacts.size() << ", missed mcp "
             << impacts.missed_detector << ", peak burst rate " << enc_report.peak_burst_rate
             << " /s";
        d.notes = note.str();
        ledger.entries.push_back(d);
    }

    res.manifest.outputs.push_back("manifest.json");
    res.manifest.outputs.push_back("config_resolved.ini");
    write_manifest(cfg, res.manifest);
    return res;
}

// ---------------------------------------------------------------------------
// Figure reproductions
// ---------------------------------------------------------------------------

namespace {

RunManifest base_manifest(const config::RunConfig& cfg) {
    RunManifest m;
    m.config_hash = hex64(config::config_hash(cfg));
    m.seed = cfg.run.master_seed;
    return m;
}

void figure3(const config::RunConfig& cfg, RunManifest& m) {
    const auto atom = cfg.atom();
    const auto laser = cfg.slower_laser();
    const auto target = slower::target_field(cfg.source.peak_velocity_m_s,
                                             cfg.slower.exit_velocity_m_s, cfg.slower.length_m,
                                             cfg.slower.eta_design, laser, atom);
    slower::FitConstraints cons;
    cons.laser = laser;
    cons.atom = atom;
    slower::FitReport report;
    const auto layout = slower::fit_layout(target, cons, &report);

    {
        CsvWriter csv(out_path(cfg, "figure3_field.csv"),
                      {"x_m", "b_target_T", "b_layout_T"});
        for (double x = target.x_min(); x <= target.x_max() + 1e-9; x += 5e-3)
            csv.row({x, target.value(x), slower::solenoid_field(layout, x)});
        csv.close();
        m.outputs.push_back("figure3_field.csv");
    }
    {
        const auto eta_t = slower::efficiency_profile(target, laser, atom);
        const auto layout_profile =
            slower::layout_field_profile(layout, target.x_min(), target.x_max(), 600);
        const auto eta_l = slower::efficiency_profile(layout_profile, laser, atom,
                                                      eta_t.x_samples);
        CsvWriter csv(out_path(cfg, "figure3_efficiency.csv"),
                      {"x_m", "eta_target", "eta_layout"});
        for (std::size_t i = 0; i < eta_t.x_samples.size(); ++i)
            csv.row({eta_t.x_samples[i], eta_t.eta[i], eta_l.eta[i]});
        csv.close();
        m.outputs.push_back("figure3_efficiency.csv");
    }
}

void figure4(const config::RunConfig& cfg, RunManifest& m) {
    const auto atom = cfg.atom();
    const auto laser = cfg.slower_laser();
    const auto field = slower::target_field(cfg.slower.capture_velocity_m_s,
                                            cfg.slower.exit_velocity_m_s, cfg.slower.length_m,
                                            cfg.slower.eta_design, laser, atom);
    Ensemble e =
        beam::sample_source(cfg.source_spec(), cfg.source.n_samples, cfg.run.master_seed ^ 0x01);
    std::vector<double> initial;
    initial.reserve(e.size());
    for (const auto& v : e.velocities) initial.push_back(v[0]);
    const auto dec = slower::decelerate(e, field, laser, atom, cfg.slower.dt_s,
                                        cfg.run.master_seed ^ 0x02);
    const auto h_in = slower::make_histogram(initial, 0.0, 1500.0, 150);
    const auto h_out = slower::make_histogram(dec.exit_speeds, 0.0, 1500.0, 150);
    CsvWriter csv(out_path(cfg, "figure4_velocities.csv"),
                  {"bin_center_m_s", "count_initial", "count_exit"});
    for (std::size_t i = 0; i + 1 < h_in.bin_edges.size(); ++i)
        csv.row({0.5 * (h_in.bin_edges[i] + h_in.bin_edges[i + 1]), h_in.counts[i],
                 h_out.counts[i]});
    csv.close();
    m.outputs.push_back("figure4_velocities.csv");
}

cloud::Trap3 trap3_of(const config::RunConfig& cfg) {
    const auto tf = traps::trap_frequencies(cfg.trap_params(), cfg.atom());
    return cloud::Trap3{{tf.omega_rad, tf.omega_rad, tf.omega_ax}};
}

cloud::EvapTrajectory default_evaporation(const config::RunConfig& cfg) {
    const double n0 =
        cfg.evaporation.start_atom_count > 0.0 ? cfg.evaporation.start_atom_count : 5e8;
    const double t0 = cfg.evaporation.start_temperature_k > 0.0
                          ? cfg.evaporation.start_temperature_k
                          : 150e-6;
    cloud::ThermalCloud start{n0, t0, trap3_of(cfg)};
    return cloud::evaporate(start, cfg.rf_ramp(), cfg.evaporation.eta_cut, cfg.atom(),
                            cfg.evap_options());
}

void figure6(const config::RunConfig& cfg, RunManifest& m) {
    write_trajectory_csv(out_path(cfg, "figure6_evaporation.csv"), default_evaporation(cfg));
    m.outputs.push_back("figure6_evaporation.csv");
}

void figure7(const config::RunConfig& cfg, RunManifest& m) {
    const auto atom = cfg.atom();
    const auto trap = trap3_of(cfg);
    const auto traj = default_evaporation(cfg);
    const auto cond = cloud::thomas_fermi(traj.final_cloud.atom_count, trap, atom);
    const cloud::ThermalCloud thermal{traj.final_cloud.atom_count * 0.5,
                                      std::max(traj.final_cloud.temperature, 1e-6), trap};
    {
        CsvWriter csv(out_path(cfg, "figure7_aspect.csv"),
                      {"t_ms", "aspect_condensate", "aspect_thermal"});
        for (double t_ms = 0.0; t_ms <= 30.0 + 1e-9; t_ms += 0.5) {
            const double t = 1e-3 * t_ms;
            const auto pc = cloud::condensate_expansion(cond, t);
            const auto pg = cloud::thermal_expansion(thermal, t, atom);
            csv.row({t_ms, pc.radius_v / pc.radius_h, pg.sigma_v / pg.sigma_h});
        }
        csv.close();
        m.outputs.push_back("figure7_aspect.csv");
    }
    {
        const auto profile = cloud::render_profile(cloud::thermal_expansion(thermal, 15e-3, atom),
                                                   cloud::condensate_expansion(cond, 15e-3));
        const auto cut = profile.center_cut();
        CsvWriter csv(out_path(cfg, "figure7_bimodal_cut.csv"),
                      {"h_m", "column_density_m2"});
        for (std::size_t i = 0; i < cut.size(); ++i) csv.row({profile.h[i], cut[i]});
        csv.close();
        m.outputs.push_back("figure7_bimodal_cut.csv");
    }
}

void figure8(const config::RunConfig& cfg, RunManifest& m) {
    const auto atom = cfg.atom();
    const double s = 0.5;
    const double duration = 200e-6;
    for (const auto& [name, tr] :
         {std::pair<std::string, physics::Transition>("figure8_1083.csv", cfg.t1083()),
          std::pair<std::string, physics::Transition>("figure8_389.csv", cfg.t389())}) {
        const auto curve = cloud::recoil_detuning_curve(tr, s, duration);
        CsvWriter csv(out_path(cfg, name), {"t_s", "rate_over_half_gamma"});
        for (std::size_t i = 0; i < curve.t.size(); ++i) csv.row({curve.t[i], curve.rate[i]});
        csv.close();
        m.outputs.push_back(name);
    }
    (void)atom;
}

void figure10(const config::RunConfig& cfg, RunManifest& m) {
    auto res = run_pipeline(cfg);
    detector::write_momenta_csv(out_path(cfg, "figure10_momenta.csv"), res.momenta);
    m.outputs.push_back("figure10_momenta.csv");
    m.ledger = res.manifest.ledger;
}

}  // namespace

RunManifest reproduce_figure(const config::RunConfig& cfg, int figure_id) {
    cfg.validate();
    prepare_output_dir(cfg);
    RunManifest m = base_manifest(cfg);
    switch (figure_id) {
        case 3: figure3(cfg, m); break;
        case 4: figure4(cfg, m); break;
        case 6: figure6(cfg, m); break;
        case 7: figure7(cfg, m); break;
        case 8: figure8(cfg, m); break;
        case 10: figure10(cfg, m); break;
        default:
            throw std::invalid_argument("reproduce_figure: supported figure ids are 3, 4, 6, 7, 8, 10");
    }
    m.outputs.push_back("manifest.json");
    m.outputs.push_back("config_resolved.ini");
    write_manifest(cfg, m);
    return m;
}

// ---------------------------------------------------------------------------
// CSV plumbing for the file-based verbs
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  std::size_t n_cols) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {  // header
            first = false;
            continue;
        }
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != n_cols)
            throw std::runtime_error("'" + path + "': expected " + std::to_string(n_cols) +
                                     " columns, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<detector::Impact> read_impacts_csv(const std::string& path) {
    std::vector<detector::Impact> out;
    for (const auto& r : read_numeric_csv(path, 3)) out.push_back({r[0], r[1], r[2]});
    return out;
}

std::vector<detector::MomentumRecord> read_momenta_csv(const std::string& path) {
    std::vector<detector::MomentumRecord> out;
    for (const auto& r : read_numeric_csv(path, 3)) out.push_back({r[0], r[1], r[2]});
    return out;
}

void write_impacts_csv(const std::string& path, const detector::ImpactList& impacts) {
    CsvWriter csv(path, {"t_s", "x_m", "y_m"});
    for (const auto& i : impacts.impacts) csv.row({i.t, i.x, i.y});
    csv.close();
}

}  // namespace hestar::pipeline
