// hestar: He* beamline / BEC / delay-line-detector simulation toolkit.
//
// Exit codes:
//   0  success
//   2  usage error (bad flags, unknown subcommand or figure id)
//   3  configuration error
//   4  model error (infeasible design, invalid parameters)
//   5  I/O error
//   6  hit-stream codec error (bad magic, truncation, CRC, ordering)

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hestar/config.hpp"
#include "hestar/detector.hpp"
#include "hestar/io.hpp"
#include "hestar/pipeline.hpp"
#include "hestar/rng.hpp"
#include "hestar/slower.hpp"
#include "hestar/traps.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitModel = 4;
constexpr int kExitIo = 5;
constexpr int kExitCodec = 6;

struct CodecFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string out_file(const hestar::config::RunConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.run.output_dir) / name).string();
}

hestar::detector::ParseResult parse_stream_file(const std::string& path) {
    const auto raw = hestar::read_file_bytes(path);
    const std::vector<std::uint8_t> bytes(raw.begin(), raw.end());
    auto res = hestar::detector::parse_stream(bytes);
    if (res.error) {
        std::ostringstream msg;
        msg << path << ": " << hestar::detector::parse_error_name(res.error->kind)
            << " at byte offset " << res.error->offset << " (" << res.error->message << ")";
        throw CodecFailure(msg.str());
    }
    return res;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"He* beamline, evaporation and delay-line detector toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::string> out_flag;
    std::optional<std::uint64_t> threads_flag;
    app.add_option("--config", config_path, "configuration file (INI-style)");
    app.add_option("--seed", seed_flag, "master seed (overrides config)")
        ->envname("HESTAR_SEED");
    app.add_option("--out", out_flag, "output directory (overrides config)")
        ->envname("HESTAR_OUT");
    app.add_option("--threads", threads_flag, "worker thread budget");

    auto* cmd_design = app.add_subcommand("design-slower",
                                          "design the target field and fit a winding layout");
    auto* cmd_simslower =
        app.add_subcommand("simulate-slower", "Monte Carlo deceleration through the slower");
    auto* cmd_trap = app.add_subcommand("trap-analyze", "trap frequencies and bias-field noise");
    double trap_b1 = 160e-4, trap_b2 = 158e-4, trap_rel = 1e-4;
    bool trap_correlated = false;
    cmd_trap->add_option("--b1", trap_b1, "first large field, T");
    cmd_trap->add_option("--b2", trap_b2, "second large field, T");
    cmd_trap->add_option("--rel-noise", trap_rel, "relative rms current noise");
    cmd_trap->add_flag("--correlated", trap_correlated, "common-mode noise sources");

    auto* cmd_evap = app.add_subcommand("evaporate", "rf evaporation trajectory");

    auto* cmd_drop = app.add_subcommand("simulate-drop", "free fall onto the detector plane");
    double drop_temperature = 1e-6, drop_atoms = 2e6;
    cmd_drop->add_option("--temperature-k", drop_temperature, "cloud temperature, K");
    cmd_drop->add_option("--atom-count", drop_atoms, "macroscopic atom number");

    auto* cmd_encode = app.add_subcommand("encode", "impacts CSV -> raw hit stream");
    std::string encode_in;
    cmd_encode->add_option("--in", encode_in, "impacts CSV (t_s,x_m,y_m)")->required();

    auto* cmd_decode = app.add_subcommand("decode", "raw hit stream -> hits CSV");
    std::string decode_in;
    cmd_decode->add_option("--in", decode_in, "hit-stream file")->required();

    auto* cmd_recon = app.add_subcommand("reconstruct", "raw hit stream -> events + momenta");
    std::string recon_in;
    double release_time = 0.0;
    cmd_recon->add_option("--in", recon_in, "hit-stream file")->required();
    cmd_recon->add_option("--release-time", release_time, "trap release time, s");

    auto* cmd_corr = app.add_subcommand("correlate", "pair-correlation histogram from momenta");
    std::string corr_in, corr_axis = "magnitude";
    double corr_bin = 5e-29;
    cmd_corr->add_option("--in", corr_in, "momenta CSV")->required();
    cmd_corr->add_option("--bin-width", corr_bin, "bin width, kg m/s");
    cmd_corr->add_option("--axis", corr_axis, "x | y | z | magnitude");

    auto* cmd_fig = app.add_subcommand("reproduce-figure", "write figure data CSVs");
    int figure_id = 0;
    cmd_fig->add_option("figure", figure_id, "figure id: 3, 4, 6, 7, 8 or 10")->required();

    auto* cmd_run = app.add_subcommand("run", "full pipeline: beam -> ... -> reconstruction");

    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        hestar::config::RunConfig cfg;
        if (!config_path.empty()) cfg = hestar::config::load_config(config_path);
        if (seed_flag) cfg.run.master_seed = *seed_flag;
        if (out_flag) cfg.run.output_dir = *out_flag;
        if (threads_flag) cfg.run.threads = *threads_flag;
        cfg.validate();
        std::filesystem::create_directories(cfg.run.output_dir);

        const auto atom = cfg.atom();

        if (cmd_design->parsed()) {
            const auto m = hestar::pipeline::reproduce_figure(cfg, 3);
            std::cout << "wrote " << m.outputs.size() << " files to " << cfg.run.output_dir
                      << " (manifest " << m.manifest_hash << ")\n";
        } else if (cmd_simslower->parsed()) {
            const auto m = hestar::pipeline::reproduce_figure(cfg, 4);
            std::cout << "wrote " << m.outputs.size() << " files to " << cfg.run.output_dir
                      << " (manifest " << m.manifest_hash << ")\n";
        } else if (cmd_trap->parsed()) {
            const auto tf = hestar::traps::trap_frequencies(cfg.trap_params(), atom);
            const auto noise =
                hestar::traps::bias_noise(trap_b1, trap_b2, trap_rel, trap_correlated);
            std::printf("omega_rad/2pi = %.3f Hz\n", tf.omega_rad / (2 * hestar::physics::pi));
            std::printf("omega_ax/2pi  = %.3f Hz\n", tf.omega_ax / (2 * hestar::physics::pi));
            std::printf("bias = %.6g T, rms noise = %.6g T (%.3f %% of bias)\n", noise.bias,
                        noise.abs_noise, 100.0 * noise.rel_bias_noise);
            hestar::CsvWriter csv(out_file(cfg, "trap_analysis.csv"),
                                  {"omega_rad_rad_s", "omega_ax_rad_s", "bias_t",
                                   "bias_noise_t", "bias_noise_rel"});
            csv.row({tf.omega_rad, tf.omega_ax, noise.bias, noise.abs_noise,
                     noise.rel_bias_noise});
            csv.close();
        } else if (cmd_evap->parsed()) {
            const auto m = hestar::pipeline::reproduce_figure(cfg, 6);
            std::cout << "wrote " << m.outputs.size() << " files to " << cfg.run.output_dir
                      << " (manifest " << m.manifest_hash << ")\n";
        } else if (cmd_drop->parsed()) {
            hestar::Ensemble e;
            e.atom_count = drop_atoms;
            const std::size_t n = cfg.detector.n_drop_samples;
            e.positions.assign(n, {0, 0, 0});
            e.velocities.resize(n);
            hestar::Rng root(cfg.run.master_seed);
            const double sigma =
                std::sqrt(hestar::physics::consts.kB * drop_temperature / atom.mass);
            for (std::size_t i = 0; i < n; ++i) {
                auto r = root.fork(i);
                e.velocities[i] = {r.normal(0, sigma), r.normal(0, sigma), r.normal(0, sigma)};
            }
            const auto impacts =
                hestar::detector::simulate_impacts(e, cfg.detector_geometry());
            hestar::pipeline::write_impacts_csv(out_file(cfg, "impacts.csv"), impacts);
            std::cout << impacts.impacts.size() << " impacts (" << impacts.missed_detector
                      << " missed the MCP) -> impacts.csv\n";
        } else if (cmd_encode->parsed()) {
            hestar::detector::ImpactList impacts;
            impacts.impacts = hestar::pipeline::read_impacts_csv(encode_in);
            const auto geom = cfg.detector_geometry();
            const auto resp = cfg.detector_response();
            hestar::detector::EncodeReport rep;
            const auto analog = hestar::detector::encode_hits(impacts, geom, resp,
                                                              cfg.run.master_seed, &rep);
            const auto raw = hestar::detector::quantize_hits(analog, resp);
            const auto filtered = hestar::detector::apply_dead_time(raw, resp);
            const auto bytes = hestar::detector::serialize_stream(filtered, resp);
            hestar::write_file_atomic(out_file(cfg, "hits.dld4"),
                                      std::vector<unsigned char>(bytes.begin(), bytes.end()));
            std::cout << filtered.size() << " hits (" << rep.attempted << " impacts, "
                      << rep.surviving << " after efficiency) -> hits.dld4\n";
            if (rep.burst_limit_exceeded)
                std::cerr << "warning: peak burst rate " << rep.peak_burst_rate
                          << " /s exceeds the read-out limit\n";
        } else if (cmd_decode->parsed()) {
            const auto res = parse_stream_file(decode_in);
            hestar::CsvWriter csv(out_file(cfg, "hits.csv"),
                                  {"quadrant", "t_x1_ticks", "t_x2_ticks", "t_y1_ticks",
                                   "t_y2_ticks"});
            for (const auto& h : res.hits)
                csv.row({double(h.quadrant), double(h.t_x1), double(h.t_x2), double(h.t_y1),
                         double(h.t_y2)});
            csv.close();
            std::cout << res.hits.size() << " hits -> hits.csv\n";
        } else if (cmd_recon->parsed()) {
            const auto res = parse_stream_file(recon_in);
            const auto geom = cfg.detector_geometry();
            auto resp = cfg.detector_response();
            if (res.tdc_bin > 0.0) resp.tdc_bin = res.tdc_bin;
            const auto cal = hestar::detector::default_calibration(geom, resp);
            std::vector<hestar::detector::EventRecord> events;
            std::vector<hestar::detector::MomentumRecord> momenta;
            std::size_t discarded = 0, corrupt = 0;
            for (const auto& h : res.hits) {
                try {
                    const auto ev = hestar::detector::reconstruct_event(h, geom, resp, cal);
                    if (!ev) {
                        ++discarded;
                        continue;
                    }
                    events.push_back(*ev);
                    momenta.push_back(hestar::detector::reconstruct_momentum(
                        *ev, geom, atom, release_time));
                } catch (const hestar::detector::CorruptHit&) {
                    ++corrupt;
                }
            }
            hestar::detector::write_events_csv(out_file(cfg, "events.csv"), events);
            hestar::detector::write_momenta_csv(out_file(cfg, "momenta.csv"), momenta);
            std::cout << events.size() << " events (" << discarded << " in the margin band, "
                      << corrupt << " corrupt) -> events.csv, momenta.csv\n";
        } else if (cmd_corr->parsed()) {
            hestar::detector::CorrelationAxis axis;
            if (corr_axis == "x") axis = hestar::detector::CorrelationAxis::x;
            else if (corr_axis == "y") axis = hestar::detector::CorrelationAxis::y;
            else if (corr_axis == "z") axis = hestar::detector::CorrelationAxis::z;
            else if (corr_axis == "magnitude") axis = hestar::detector::CorrelationAxis::magnitude;
            else throw CLI::ValidationError("--axis must be x, y, z or magnitude");
            const auto momenta = hestar::pipeline::read_momenta_csv(corr_in);
            const auto g2 = hestar::detector::pair_correlation(momenta, corr_bin, axis,
                                                               cfg.run.master_seed);
            hestar::detector::write_g2_csv(out_file(cfg, "g2.csv"), g2);
            std::cout << g2.bin_centers.size() << " bins -> g2.csv\n";
        } else if (cmd_fig->parsed()) {
            if (figure_id != 3 && figure_id != 4 && figure_id != 6 && figure_id != 7 &&
                figure_id != 8 && figure_id != 10) {
                std::cerr << "error: supported figure ids are 3, 4, 6, 7, 8, 10\n";
                return kExitUsage;
            }
            const auto m = hestar::pipeline::reproduce_figure(cfg, figure_id);
            std::cout << "wrote " << m.outputs.size() << " files to " << cfg.run.output_dir
                      << " (manifest " << m.manifest_hash << ")\n";
        } else if (cmd_run->parsed()) {
            const auto res = hestar::pipeline::run_pipeline(cfg);
            std::cout << "pipeline complete: " << res.manifest.ledger.entries.size()
                      << " ledger stages, " << res.events.size() << " detector events\n"
                      << "manifest hash " << res.manifest.manifest_hash << "\n";
        }
        return 0;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CodecFailure& e) {
        std::cerr << "codec error: " << e.what() << "\n";
        return kExitCodec;
    } catch (const hestar::config::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const hestar::slower::InfeasibleDesign& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const std::invalid_argument& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return kExitModel;
    } catch (const std::ios_base::failure& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        if (what.find("cannot open") != std::string::npos ||
            what.find("rename") != std::string::npos) {
            std::cerr << "i/o error: " << what << "\n";
            return kExitIo;
        }
        std::cerr << "error: " << what << "\n";
        return kExitModel;
    }
}
