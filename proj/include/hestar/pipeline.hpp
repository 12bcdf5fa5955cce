#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hestar/cloud.hpp"
#include "hestar/config.hpp"
#include "hestar/detector.hpp"
#include "hestar/ensemble.hpp"
#include "hestar/traps.hpp"

namespace hestar::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
    std::string config_hash;  // hex
    std::uint64_t seed = 0;
    std::string version = kVersion;
    traps::StageLedger ledger;
    std::vector<std::string> outputs;  // file names inside output_dir

    // Hash of the canonical JSON (excluding the hash field itself).
    std::string manifest_hash;

    std::string to_json() const;
    void finalize();  // computes manifest_hash
};

struct PipelineResult {
    RunManifest manifest;

    double slower_captured_fraction = 0.0;
    cloud::EvapTrajectory evaporation;
    cloud::Condensate condensate;

    Ensemble dropped;  // representative sample released onto the detector
    std::vector<detector::EventRecord> events;
    std::vector<detector::MomentumRecord> momenta;
};

// beam -> slower -> stages -> evaporation -> drop -> detector -> reconstruction.
// Writes CSVs + manifest into cfg.run.output_dir; deterministic per seed.
PipelineResult run_pipeline(const config::RunConfig& cfg);

// Figure-reproduction data files (CSV); id in {3, 4, 6, 7, 8, 10}.
RunManifest reproduce_figure(const config::RunConfig& cfg, int figure_id);

// CSV readers used by the file-based CLI verbs.
std::vector<detector::Impact> read_impacts_csv(const std::string& path);
std::vector<detector::MomentumRecord> read_momenta_csv(const std::string& path);
void write_impacts_csv(const std::string& path, const detector::ImpactList& impacts);

}  // namespace hestar::pipeline
