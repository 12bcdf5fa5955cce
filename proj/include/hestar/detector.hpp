#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hestar/ensemble.hpp"
#include "hestar/physics.hpp"

namespace hestar::detector {

// ---------------------------------------------------------------------------
// Geometry and response
// ---------------------------------------------------------------------------

struct DetectorGeometry {
    double drop_distance = 0.8;           // m, trap center to detector plane
    double mcp_active_diameter = 80e-3;   // m
    double quadrant_width = 45e-3;        // m, delay-line x extent per quadrant
    double quadrant_height = 48e-3;       // m, y extent
    double quadrant_gap = 1e-3;           // m, dead strip between quadrants
    double discard_margin = 5e-3;         // m, edge band removed in reconstruction
    double rotation_about_z = 0.0;        // rad, detector frame vs trap frame

    // Quadrant centers in the detector frame; index = (x>0 ? 1 : 0) + (y>0 ? 2 : 0).
    std::array<std::array<double, 2>, 4> quadrant_centers() const;
    void validate() const;
};

struct DetectorResponse {
    double propagation_speed = 1.0e6;   // m/s, effective delay-line signal speed
    double tdc_bin = 6.8e-12;           // s
    double spatial_jitter_rms = 177e-6; // m, target reconstruction precision
    double temporal_jitter_rms = 220e-12;  // s
    double dead_time = 25e-9;           // s, per quadrant read-out
    double efficiency = 0.07;
    double max_burst_rate = 3e6;        // 1/s, diagnostic only
    bool enable_jitter = true;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Hits and events
// ---------------------------------------------------------------------------

struct Impact {
    double t = 0.0;  // s after release
    double x = 0.0;  // m, detector frame
    double y = 0.0;  // m
};

struct ImpactList {
    std::vector<Impact> impacts;       // time-ordered
    std::size_t missed_detector = 0;   // landed outside the MCP active area
};

// Continuous-time hit, before TDC quantization.
struct AnalogHit {
    std::uint8_t quadrant = 0;
    double t_x1 = 0, t_x2 = 0, t_y1 = 0, t_y2 = 0;  // s
    double mean_time() const { return 0.25 * (t_x1 + t_x2 + t_y1 + t_y2); }
};

struct RawHit {
    std::uint8_t quadrant = 0;
    std::uint64_t t_x1 = 0, t_x2 = 0, t_y1 = 0, t_y2 = 0;  // TDC ticks
    double mean_ticks() const {
        return 0.25 * (static_cast<double>(t_x1) + static_cast<double>(t_x2) +
                       static_cast<double>(t_y1) + static_cast<double>(t_y2));
    }
};

struct EventRecord {
    double x = 0.0, y = 0.0;  // m, detector frame
    double t = 0.0;           // s
    std::uint8_t quadrant = 0;
};

struct MomentumRecord {
    double px = 0.0, py = 0.0, pz = 0.0;  // kg m/s, trap frame, z downward positive
};

// ---------------------------------------------------------------------------
// Forward simulation
// ---------------------------------------------------------------------------

// Free fall from the trap center region to the detector plane.  Ensemble
// coordinates: x, y horizontal, z downward positive.  Closed-form per atom.
ImpactList simulate_impacts(const Ensemble& e, const DetectorGeometry& geom);

// Encode impacts into per-quadrant delay-line arrival times.  Thinning by
// resp.efficiency, then correlated Gaussian jitter: a differential component
// on each wire pair (moves the position, cancels in the pair sum) plus a
// common-mode component on all four times (moves the timestamp, cancels in
// the differences), calibrated so the reconstruction precision equals
// spatial_jitter_rms and temporal_jitter_rms directly.  Deterministic per seed.
struct EncodeReport {
    std::size_t attempted = 0;
    std::size_t surviving = 0;
    double peak_burst_rate = 0.0;     // events/s over a sliding 1 ms window
    bool burst_limit_exceeded = false;
};

std::vector<AnalogHit> encode_hits(const ImpactList& impacts, const DetectorGeometry& geom,
                                   const DetectorResponse& resp, std::uint64_t seed,
                                   EncodeReport* report = nullptr);

std::vector<RawHit> quantize_hits(const std::vector<AnalogHit>& hits,
                                  const DetectorResponse& resp);

// ---------------------------------------------------------------------------
// Dead time
// ---------------------------------------------------------------------------

struct DeadTimeReport {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

// Within each quadrant, drop any hit whose mean timestamp is less than
// resp.dead_time after the previous accepted hit's mean timestamp; quadrants
// are independent.  Throws on a per-quadrant time-ordering violation.
std::vector<RawHit> apply_dead_time(const std::vector<RawHit>& stream,
                                    const DetectorResponse& resp,
                                    DeadTimeReport* report = nullptr);
std::vector<AnalogHit> apply_dead_time(const std::vector<AnalogHit>& stream,
                                       const DetectorResponse& resp,
                                       DeadTimeReport* report = nullptr);

// ---------------------------------------------------------------------------
// Wire codec
//
// Little-endian layout:
//   header (16 bytes): magic "DLD4", u32 version (=1), u64 tdc_bin in fs
//   records (26 bytes each): u8 quadrant, u8 flags (=0), 4 x u48 ticks
//     in order t_x1, t_x2, t_y1, t_y2
//   trailer (4 bytes): CRC32 (zlib polynomial) of header + records
// ---------------------------------------------------------------------------

inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kRecordSize = 26;
inline constexpr std::uint32_t kFormatVersion = 1;

enum class ParseErrorKind {
    bad_magic,
    bad_version,
    truncated_header,   // fewer than 16 bytes
    truncated_trailer,  // header present but no room for the CRC trailer
    truncated_record,   // record area not a multiple of 26 bytes
    crc_mismatch,
    non_monotone,       // per-quadrant mean ticks decreased
    bad_record,         // record fields out of range (quadrant id > 3)
};

struct ParseError {
    ParseErrorKind kind;
    std::size_t offset = 0;  // byte offset the error was detected at
    std::string message;
};

struct ParseResult {
    std::vector<RawHit> hits;  // complete prefix parsed before any error
    double tdc_bin = 0.0;      // s, from the header (0 if header unreadable)
    std::optional<ParseError> error;
    bool ok() const { return !error.has_value(); }
};

std::vector<std::uint8_t> serialize_stream(const std::vector<RawHit>& stream,
                                           const DetectorResponse& resp);
ParseResult parse_stream(const std::vector<std::uint8_t>& bytes);

const char* parse_error_name(ParseErrorKind kind);

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

struct Calibration {
    // Per-quadrant offset subtracted from the mean of the four times; the
    // default is the fixed wire-propagation delay (w + h) / (4 v).
    std::array<double, 4> time_offset = {0, 0, 0, 0};
    // |(t_x1 + t_x2) - (t_y1 + t_y2) - (w - h)/v| above this is a corrupt hit.
    double sum_residual_tolerance = 2e-9;  // s
};

Calibration default_calibration(const DetectorGeometry& geom, const DetectorResponse& resp);

struct CorruptHit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Returns nullopt for hits inside the discard margin band of their quadrant.
// Throws CorruptHit when the pair sums are inconsistent with the wire length.
std::optional<EventRecord> reconstruct_event(const AnalogHit& hit, const DetectorGeometry& geom,
                                             const DetectorResponse& resp,
                                             const Calibration& cal);
std::optional<EventRecord> reconstruct_event(const RawHit& hit, const DetectorGeometry& geom,
                                             const DetectorResponse& resp,
                                             const Calibration& cal);

MomentumRecord reconstruct_momentum(const EventRecord& ev, const DetectorGeometry& geom,
                                    const physics::AtomState& atom, double release_time);

// ---------------------------------------------------------------------------
// Pair correlation
// ---------------------------------------------------------------------------

enum class CorrelationAxis { x, y, z, magnitude };

struct G2Histogram {
    std::vector<double> bin_centers;  // kg m/s
    std::vector<double> g2;
    std::vector<double> g2_err;       // Poisson
    std::vector<std::uint64_t> pair_counts;
};

// Pair-separation histogram divided by a component-shuffled baseline that
// keeps the single-particle marginals but destroys correlations.
G2Histogram pair_correlation(const std::vector<MomentumRecord>& events, double bin_width,
                             CorrelationAxis axis, std::uint64_t seed,
                             std::size_t n_bins = 60);

void write_events_csv(const std::string& path, const std::vector<EventRecord>& events);
void write_momenta_csv(const std::string& path, const std::vector<MomentumRecord>& momenta);
void write_g2_csv(const std::string& path, const G2Histogram& h);

}  // namespace hestar::detector
