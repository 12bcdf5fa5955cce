#include "hestar/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <zlib.h>

#include "hestar/io.hpp"
#include "hestar/rng.hpp"

namespace hestar::detector {

namespace {
constexpr std::uint64_t kMaxTicks = (1ull << 48) - 1;
constexpr char kMagic[4] = {'D', 'L', 'D', '4'};
}  // namespace

// ---------------------------------------------------------------------------
// Geometry and response
// ---------------------------------------------------------------------------

std::array<std::array<double, 2>, 4> DetectorGeometry::quadrant_centers() const {
    const double cx = 0.5 * (quadrant_width + quadrant_gap);
    const double cy = 0.5 * (quadrant_height + quadrant_gap);
    return {{{-cx, -cy}, {cx, -cy}, {-cx, cy}, {cx, cy}}};
}

void DetectorGeometry::validate() const {
    if (!(drop_distance > 0.0))
        throw std::invalid_argument("DetectorGeometry: drop_distance must be > 0");
    if (!(quadrant_width > 0.0) || !(quadrant_height > 0.0))
        throw std::invalid_argument("DetectorGeometry: quadrant size must be positive");
    if (quadrant_gap < 0.0 || discard_margin < quadrant_gap)
        throw std::invalid_argument(
            "DetectorGeometry: need 0 <= quadrant_gap <= discard_margin");
    if (!(mcp_active_diameter > 0.0))
        throw std::invalid_argument("DetectorGeometry: mcp_active_diameter must be > 0");
}

void DetectorResponse::validate() const {
    if (!(propagation_speed > 0.0))
        throw std::invalid_argument("DetectorResponse: propagation_speed must be > 0");
    if (!(tdc_bin > 0.0)) throw std::invalid_argument("DetectorResponse: tdc_bin must be > 0");
    if (efficiency < 0.0 || efficiency > 1.0)
        throw std::invalid_argument("DetectorResponse: efficiency must be in [0,1]");
    if (dead_time < 0.0) throw std::invalid_argument("DetectorResponse: dead_time must be >= 0");
    if (spatial_jitter_rms < 0.0 || temporal_jitter_rms < 0.0)
        throw std::invalid_argument("DetectorResponse: jitter must be >= 0");
}

// ---------------------------------------------------------------------------
// Forward simulation
// ---------------------------------------------------------------------------

ImpactList simulate_impacts(const Ensemble& e, const DetectorGeometry& geom) {
    geom.validate();
    const double g = physics::consts.g;
    const double d = geom.drop_distance;
    const double r_mcp = 0.5 * geom.mcp_active_diameter;
    const double c = std::cos(geom.rotation_about_z);
    const double s = std::sin(geom.rotation_about_z);

    ImpactList out;
    out.impacts.reserve(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        const auto& r0 = e.positions[i];
        const auto& v0 = e.velocities[i];
        // z downward positive: d - z0 = vz t + g t^2 / 2
        const double fall = d - r0[2];
        if (fall < 0.0)
            throw std::invalid_argument("simulate_impacts: atom below the detector plane");
        double t;
        if (fall == 0.0) {
            t = 0.0;
        } else {
            const double vz = v0[2];
            t = (-vz + std::sqrt(vz * vz + 2.0 * g * fall)) / g;
        }
        const double x = r0[0] + v0[0] * t;
        const double y = r0[1] + v0[1] * t;
        if (x * x + y * y > r_mcp * r_mcp) {
            ++out.missed_detector;
            continue;
        }
        // trap frame -> detector frame (detector rotated by +theta about z)
        out.impacts.push_back({t, c * x - s * y, s * x + c * y});
    }
    std::sort(out.impacts.begin(), out.impacts.end(),
              [](const Impact& a, const Impact& b) { return a.t < b.t; });
    return out;
}

namespace {

std::uint8_t quadrant_of(double x, double y) {
    return static_cast<std::uint8_t>((x > 0.0 ? 1 : 0) + (y > 0.0 ? 2 : 0));
}

double peak_window_rate(const std::vector<double>& times, double window) {
    if (times.empty()) return 0.0;
    std::size_t lo = 0, best = 1;
    for (std::size_t hi = 0; hi < times.size(); ++hi) {
        while (times[hi] - times[lo] > window) ++lo;
        best = std::max(best, hi - lo + 1);
    }
    return static_cast<double>(best) / window;
}

}  // namespace

std::vector<AnalogHit> encode_hits(const ImpactList& impacts, const DetectorGeometry& geom,
                                   const DetectorResponse& resp, std::uint64_t seed,
                                   EncodeReport* report) {
    geom.validate();
    resp.validate();
    for (std::size_t i = 1; i < impacts.impacts.size(); ++i)
        if (impacts.impacts[i].t < impacts.impacts[i - 1].t)
            throw std::invalid_argument("encode_hits: impacts must be time-ordered");

    const auto centers = geom.quadrant_centers();
    const double v = resp.propagation_speed;
    // Differential jitter moves the reconstructed position by v * sigma_u;
    // common-mode jitter moves the mean timestamp one-for-one.
    const double sigma_u = resp.enable_jitter ? resp.spatial_jitter_rms / v : 0.0;
    const double sigma_c = resp.enable_jitter ? resp.temporal_jitter_rms : 0.0;

    Rng root(seed);
    std::vector<AnalogHit> hits;
    hits.reserve(impacts.impacts.size());
    for (std::size_t i = 0; i < impacts.impacts.size(); ++i) {
        Rng rng = root.fork(i);
        if (resp.efficiency < 1.0 && rng.uniform() >= resp.efficiency) continue;

        const Impact& imp = impacts.impacts[i];
        const std::uint8_t q = quadrant_of(imp.x, imp.y);
        const double xl = imp.x - centers[q][0];
        const double yl = imp.y - centers[q][1];

        const double ux = sigma_u > 0.0 ? rng.normal(0.0, sigma_u) : 0.0;
        const double uy = sigma_u > 0.0 ? rng.normal(0.0, sigma_u) : 0.0;
        const double cm = sigma_c > 0.0 ? rng.normal(0.0, sigma_c) : 0.0;

        AnalogHit h;
        h.quadrant = q;
        h.t_x1 = imp.t + (0.5 * geom.quadrant_width + xl) / v + ux + cm;
        h.t_x2 = imp.t + (0.5 * geom.quadrant_width - xl) / v - ux + cm;
        h.t_y1 = imp.t + (0.5 * geom.quadrant_height + yl) / v + uy + cm;
        h.t_y2 = imp.t + (0.5 * geom.quadrant_height - yl) / v - uy + cm;
        hits.push_back(h);
    }
    std::sort(hits.begin(), hits.end(),
              [](const AnalogHit& a, const AnalogHit& b) { return a.mean_time() < b.mean_time(); });

    if (report) {
        report->attempted = impacts.impacts.size();
        report->surviving = hits.size();
        std::vector<double> times;
        times.reserve(hits.size());
        for (const auto& h : hits) times.push_back(h.mean_time());
        report->peak_burst_rate = peak_window_rate(times, 1e-3);
        report->burst_limit_exceeded = report->peak_burst_rate > resp.max_burst_rate;
    }
    return hits;
}

std::vector<RawHit> quantize_hits(const std::vector<AnalogHit>& hits,
                                  const DetectorResponse& resp) {
    resp.validate();
    auto tick = [&](double t) {
        const double raw = std::llround(std::max(0.0, t) / resp.tdc_bin);
        if (raw > static_cast<double>(kMaxTicks))
            throw std::overflow_error("quantize_hits: timestamp exceeds 48-bit tick range");
        return static_cast<std::uint64_t>(raw);
    };
    std::vector<RawHit> out;
    out.reserve(hits.size());
    for (const auto& h : hits)
        out.push_back({h.quadrant, tick(h.t_x1), tick(h.t_x2), tick(h.t_y1), tick(h.t_y2)});
    return out;
}

// ---------------------------------------------------------------------------
// Dead time
// ---------------------------------------------------------------------------

namespace {

template <typename Hit, typename MeanSeconds>
std::vector<Hit> dead_time_filter(const std::vector<Hit>& stream, double dead_time,
                                  MeanSeconds mean_seconds, DeadTimeReport* report) {
    std::array<double, 4> last_in;
    std::array<double, 4> last_kept;
    std::array<bool, 4> seen{}, kept_any{};
    last_in.fill(0.0);
    last_kept.fill(0.0);

    std::vector<Hit> out;
    out.reserve(stream.size());
    std::size_t dropped = 0;
    for (const auto& h : stream) {
        if (h.quadrant > 3)
            throw std::invalid_argument("apply_dead_time: quadrant id out of range");
        const double t = mean_seconds(h);
        if (seen[h.quadrant] && t < last_in[h.quadrant])
            throw std::invalid_argument("apply_dead_time: stream not time-ordered per quadrant");
        last_in[h.quadrant] = t;
        seen[h.quadrant] = true;

        if (kept_any[h.quadrant] && t - last_kept[h.quadrant] < dead_time) {
            ++dropped;
            continue;
        }
        last_kept[h.quadrant] = t;
        kept_any[h.quadrant] = true;
        out.push_back(h);
    }
    if (report) {
        report->kept = out.size();
        report->dropped = dropped;
    }
    return out;
}

}  // namespace

std::vector<RawHit> apply_dead_time(const std::vector<RawHit>& stream,
                                    const DetectorResponse& resp, DeadTimeReport* report) {
    resp.validate();
    return dead_time_filter(stream, resp.dead_time,
                            [&](const RawHit& h) { return h.mean_ticks() * resp.tdc_bin; },
                            report);
}

std::vector<AnalogHit> apply_dead_time(const std::vector<AnalogHit>& stream,
                                       const DetectorResponse& resp, DeadTimeReport* report) {
    resp.validate();
    return dead_time_filter(stream, resp.dead_time,
                            [](const AnalogHit& h) { return h.mean_time(); }, report);
}

// ---------------------------------------------------------------------------
// Wire codec
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u48(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
std::uint64_t get_le(const std::uint8_t* p, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t len) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

}  // namespace

const char* parse_error_name(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::bad_magic: return "bad_magic";
        case ParseErrorKind::bad_version: return "bad_version";
        case ParseErrorKind::truncated_header: return "truncated_header";
        case ParseErrorKind::truncated_trailer: return "truncated_trailer";
        case ParseErrorKind::truncated_record: return "truncated_record";
        case ParseErrorKind::crc_mismatch: return "crc_mismatch";
        case ParseErrorKind::non_monotone: return "non_monotone";
        case ParseErrorKind::bad_record: return "bad_record";
    }
    return "unknown";
}

std::vector<std::uint8_t> serialize_stream(const std::vector<RawHit>& stream,
                                           const DetectorResponse& resp) {
    resp.validate();
    std::vector<std::uint8_t> bytes;
    bytes.reserve(kHeaderSize + kRecordSize * stream.size() + 4);
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32(bytes, kFormatVersion);
    put_u64(bytes, static_cast<std::uint64_t>(std::llround(resp.tdc_bin * 1e15)));  // fs

    for (const auto& h : stream) {
        if (h.quadrant > 3)
            throw std::invalid_argument("serialize_stream: quadrant id out of range");
        for (std::uint64_t t : {h.t_x1, h.t_x2, h.t_y1, h.t_y2})
            if (t > kMaxTicks)
                throw std::overflow_error("serialize_stream: tick value exceeds 48 bits");
        bytes.push_back(h.quadrant);
        bytes.push_back(0);  // flags
        put_u48(bytes, h.t_x1);
        put_u48(bytes, h.t_x2);
        put_u48(bytes, h.t_y1);
        put_u48(bytes, h.t_y2);
    }
    put_u32(bytes, crc_of(bytes.data(), bytes.size()));
    return bytes;
}

ParseResult parse_stream(const std::vector<std::uint8_t>& bytes) {
    ParseResult res;
    auto fail = [&](ParseErrorKind kind, std::size_t offset, std::string msg) {
        res.error = ParseError{kind, offset, std::move(msg)};
        return res;
    };

    if (bytes.size() < kHeaderSize)
        return fail(ParseErrorKind::truncated_header, bytes.size(),
                    "file shorter than the 16-byte header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        return fail(ParseErrorKind::bad_magic, 0, "magic bytes are not 'DLD4'");
    const auto version = static_cast<std::uint32_t>(get_le(bytes.data() + 4, 4));
    if (version != kFormatVersion) {
        std::ostringstream msg;
        msg << "unsupported format version " << version;
        return fail(ParseErrorKind::bad_version, 4, msg.str());
    }
    res.tdc_bin = static_cast<double>(get_le(bytes.data() + 8, 8)) * 1e-15;

    if (bytes.size() < kHeaderSize + 4)
        return fail(ParseErrorKind::truncated_trailer, bytes.size(),
                    "no room for the CRC32 trailer");

    const std::size_t body = bytes.size() - kHeaderSize - 4;
    const std::size_t n_records = body / kRecordSize;
    const std::size_t leftover = body % kRecordSize;

    std::array<double, 4> last_mean;
    std::array<bool, 4> seen{};
    last_mean.fill(0.0);

    res.hits.reserve(n_records);
    for (std::size_t i = 0; i < n_records; ++i) {
        const std::size_t off = kHeaderSize + i * kRecordSize;
        const std::uint8_t* p = bytes.data() + off;
        RawHit h;
        h.quadrant = p[0];
        if (h.quadrant > 3) {
            std::ostringstream msg;
            msg << "record " << i << ": quadrant id " << int(h.quadrant) << " out of range";
            return fail(ParseErrorKind::bad_record, off, msg.str());
        }
        h.t_x1 = get_le(p + 2, 6);
        h.t_x2 = get_le(p + 8, 6);
        h.t_y1 = get_le(p + 14, 6);
        h.t_y2 = get_le(p + 20, 6);
        const double mean = h.mean_ticks();
        if (seen[h.quadrant] && mean < last_mean[h.quadrant]) {
            std::ostringstream msg;
            msg << "record " << i << ": quadrant " << int(h.quadrant)
                << " timestamps went backwards";
            return fail(ParseErrorKind::non_monotone, off, msg.str());
        }
        last_mean[h.quadrant] = mean;
        seen[h.quadrant] = true;
        res.hits.push_back(h);
    }

    if (leftover != 0)
        return fail(ParseErrorKind::truncated_record, kHeaderSize + n_records * kRecordSize,
                    "record area is not a whole number of 26-byte records");

    const std::size_t crc_off = bytes.size() - 4;
    const auto stored = static_cast<std::uint32_t>(get_le(bytes.data() + crc_off, 4));
    const std::uint32_t computed = crc_of(bytes.data(), crc_off);
    if (stored != computed) {
        std::ostringstream msg;
        msg << "CRC32 mismatch: stored " << stored << ", computed " << computed;
        return fail(ParseErrorKind::crc_mismatch, crc_off, msg.str());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

Calibration default_calibration(const DetectorGeometry& geom, const DetectorResponse& resp) {
    Calibration cal;
    const double offset =
        0.25 * (geom.quadrant_width + geom.quadrant_height) / resp.propagation_speed;
    cal.time_offset.fill(offset);
    return cal;
}

std::optional<EventRecord> reconstruct_event(const AnalogHit& hit, const DetectorGeometry& geom,
                                             const DetectorResponse& resp,
                                             const Calibration& cal) {
    if (hit.quadrant > 3)
        throw std::invalid_argument("reconstruct_event: quadrant id out of range");
    const double v = resp.propagation_speed;

    const double expected = (geom.quadrant_width - geom.quadrant_height) / v;
    const double residual = (hit.t_x1 + hit.t_x2) - (hit.t_y1 + hit.t_y2) - expected;
    if (std::abs(residual) > cal.sum_residual_tolerance) {
        std::ostringstream msg;
        msg << "pair-sum residual " << residual << " s exceeds tolerance "
            << cal.sum_residual_tolerance << " s";
        throw CorruptHit(msg.str());
    }

    const double xl = 0.5 * v * (hit.t_x1 - hit.t_x2);
    const double yl = 0.5 * v * (hit.t_y1 - hit.t_y2);
    if (std::abs(xl) > 0.5 * geom.quadrant_width - geom.discard_margin ||
        std::abs(yl) > 0.5 * geom.quadrant_height - geom.discard_margin)
        return std::nullopt;

    const auto centers = geom.quadrant_centers();
    EventRecord ev;
    ev.quadrant = hit.quadrant;
    ev.x = centers[hit.quadrant][0] + xl;
    ev.y = centers[hit.quadrant][1] + yl;
    ev.t = hit.mean_time() - cal.time_offset[hit.quadrant];
    return ev;
}

std::optional<EventRecord> reconstruct_event(const RawHit& hit, const DetectorGeometry& geom,
                                             const DetectorResponse& resp,
                                             const Calibration& cal) {
    AnalogHit a;
    a.quadrant = hit.quadrant;
    a.t_x1 = static_cast<double>(hit.t_x1) * resp.tdc_bin;
    a.t_x2 = static_cast<double>(hit.t_x2) * resp.tdc_bin;
    a.t_y1 = static_cast<double>(hit.t_y1) * resp.tdc_bin;
    a.t_y2 = static_cast<double>(hit.t_y2) * resp.tdc_bin;
    return reconstruct_event(a, geom, resp, cal);
}

MomentumRecord reconstruct_momentum(const EventRecord& ev, const DetectorGeometry& geom,
                                    const physics::AtomState& atom, double release_time) {
    const double tau = ev.t - release_time;
    if (!(tau > 0.0))
        throw std::invalid_argument("reconstruct_momentum: event not after the release time");
    const double g = physics::consts.g;
    const double vz = (geom.drop_distance - 0.5 * g * tau * tau) / tau;
    const double vxd = ev.x / tau;
    const double vyd = ev.y / tau;
    // detector frame -> trap frame (undo the +theta rotation)
    const double c = std::cos(geom.rotation_about_z);
    const double s = std::sin(geom.rotation_about_z);
    MomentumRecord p;
    p.px = atom.mass * (c * vxd + s * vyd);
    p.py = atom.mass * (-s * vxd + c * vyd);
    p.pz = atom.mass * vz;
    return p;
}

// ---------------------------------------------------------------------------
// Pair correlation
// ---------------------------------------------------------------------------

G2Histogram pair_correlation(const std::vector<MomentumRecord>& events, double bin_width,
                             CorrelationAxis axis, std::uint64_t seed, std::size_t n_bins) {
    if (events.size() < 2)
        throw std::invalid_argument("pair_correlation: need at least 2 events");
    if (!(bin_width > 0.0) || n_bins == 0)
        throw std::invalid_argument("pair_correlation: bad binning");

    Rng rng(seed);

    // Cap the pair count by subsampling events deterministically.
    std::vector<MomentumRecord> ev = events;
    constexpr std::size_t kMaxEvents = 3000;
    if (ev.size() > kMaxEvents) {
        for (std::size_t i = 0; i < kMaxEvents; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(
                                          rng.next_u64() % (ev.size() - i));
            std::swap(ev[i], ev[j]);
        }
        ev.resize(kMaxEvents);
    }
    const std::size_t n = ev.size();

    auto separation = [&](const MomentumRecord& a, const MomentumRecord& b) {
        switch (axis) {
            case CorrelationAxis::x: return std::abs(a.px - b.px);
            case CorrelationAxis::y: return std::abs(a.py - b.py);
            case CorrelationAxis::z: return std::abs(a.pz - b.pz);
            case CorrelationAxis::magnitude: {
                const double dx = a.px - b.px, dy = a.py - b.py, dz = a.pz - b.pz;
                return std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        }
        throw std::logic_error("pair_correlation: bad axis");
    };

    // Baseline: independently permute each component across events.
    std::vector<MomentumRecord> base = ev;
    auto shuffle_component = [&](auto member) {
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(base[i - 1].*member, base[j].*member);
        }
    };
    shuffle_component(&MomentumRecord::px);
    shuffle_component(&MomentumRecord::py);
    shuffle_component(&MomentumRecord::pz);

    std::vector<std::uint64_t> h_actual(n_bins, 0), h_base(n_bins, 0);
    std::uint64_t n_actual = 0, n_baseline = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto ka = static_cast<std::size_t>(separation(ev[i], ev[j]) / bin_width);
            if (ka < n_bins) ++h_actual[ka];
            ++n_actual;
            const auto kb = static_cast<std::size_t>(separation(base[i], base[j]) / bin_width);
            if (kb < n_bins) ++h_base[kb];
            ++n_baseline;
        }

    G2Histogram out;
    out.bin_centers.resize(n_bins);
    out.g2.resize(n_bins);
    out.g2_err.resize(n_bins);
    out.pair_counts.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.bin_centers[k] = (static_cast<double>(k) + 0.5) * bin_width;
        out.pair_counts[k] = h_actual[k];
        if (h_base[k] == 0 || h_actual[k] == 0) {
            out.g2[k] = 0.0;
            out.g2_err[k] = 0.0;
            continue;
        }
        const double a = static_cast<double>(h_actual[k]) / static_cast<double>(n_actual);
        const double b = static_cast<double>(h_base[k]) / static_cast<double>(n_baseline);
        out.g2[k] = a / b;
        out.g2_err[k] = out.g2[k] * std::sqrt(1.0 / static_cast<double>(h_actual[k]) +
                                              1.0 / static_cast<double>(h_base[k]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV exports
// ---------------------------------------------------------------------------

void write_events_csv(const std::string& path, const std::vector<EventRecord>& events) {
    CsvWriter csv(path, {"t_s", "x_m", "y_m", "quadrant"});
    for (const auto& ev : events) csv.row({ev.t, ev.x, ev.y, static_cast<double>(ev.quadrant)});
    csv.close();
}

void write_momenta_csv(const std::string& path, const std::vector<MomentumRecord>& momenta) {
    CsvWriter csv(path, {"px_kg_m_s", "py_kg_m_s", "pz_kg_m_s"});
    for (const auto& p : momenta) csv.row({p.px, p.py, p.pz});
    csv.close();
}

void write_g2_csv(const std::string& path, const G2Histogram& h) {
    CsvWriter csv(path, {"dp_kg_m_s", "g2", "g2_err", "pair_count"});
    for (std::size_t k = 0; k < h.bin_centers.size(); ++k)
        csv.row({h.bin_centers[k], h.g2[k], h.g2_err[k], static_cast<double>(h.pair_counts[k])});
    csv.close();
}

}  // namespace hestar::detector
