#pragma once

// Static PON topology and timing model: propagation delays, downlink
// broadcast timing, and mapping of a slice's reserved capacity into
// per-polling-cycle grant windows.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedslice {

struct UnknownOnu : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct PonConfig {
    int num_onus = 128;
    double uplink_bps = 1e10;    // upstream line rate C
    double downlink_bps = 1e10;  // downstream line rate
    std::vector<double> distance_km;  // per ONU; empty means uniform_distance_km
    double uniform_distance_km = 20.0;
    double prop_delay_s_per_km = 5e-6;  // light in fiber, n ~ 1.5
    double polling_cycle_s = 1e-3;
    double guard_time_s = 0.0;
    // Fraction of the downlink line rate reserved for the global-model
    // broadcast. 1.0 reserves the full rate.
    double downlink_broadcast_fraction = 1.0;

    double distance_of(int onu) const {
        return distance_km.empty() ? uniform_distance_km
                                   : distance_km.at(static_cast<std::size_t>(onu));
    }

    void validate() const {
        if (num_onus < 1)
            throw std::invalid_argument("PonConfig: num_onus must be >= 1");
        if (uplink_bps <= 0 || downlink_bps <= 0)
            throw std::invalid_argument("PonConfig: line rates must be > 0");
        if (polling_cycle_s <= 0)
            throw std::invalid_argument("PonConfig: polling_cycle_s must be > 0");
        if (guard_time_s < 0 || polling_cycle_s <= guard_time_s * num_onus)
            throw std::invalid_argument(
                "PonConfig: require polling_cycle > guard_time * num_onus >= 0");
        if (!distance_km.empty() && static_cast<int>(distance_km.size()) != num_onus)
            throw std::invalid_argument("PonConfig: distance_km size != num_onus");
        if (downlink_broadcast_fraction <= 0 || downlink_broadcast_fraction > 1)
            throw std::invalid_argument("PonConfig: broadcast fraction in (0,1]");
    }
};

/// One-way propagation delay between ONU `onu` and the OLT, in seconds.
inline double prop_delay(const PonConfig& cfg, int onu) {
    if (onu < 0 || onu >= cfg.num_onus)
        throw UnknownOnu("prop_delay: onu index " + std::to_string(onu) +
                         " out of range");
    return cfg.distance_of(onu) * cfg.prop_delay_s_per_km;
}

/// Download completion time for one ONU: serialization of the broadcast at
/// the reserved downlink rate plus one-way propagation. The downstream is a
/// broadcast medium, so a single transmission reaches every ONU.
inline double downlink_time(const PonConfig& cfg, double model_bits, int onu) {
    if (model_bits < 0)
        throw std::invalid_argument("downlink_time: model_bits must be >= 0");
    const double rate = cfg.downlink_bps * cfg.downlink_broadcast_fraction;
    return model_bits / rate + prop_delay(cfg, onu);
}

struct SubSlot {
    int onu = 0;
    double start = 0.0;  // absolute seconds
    double length = 0.0;
};

struct CycleGrant {
    std::int64_t cycle_index = 0;
    double window_start = 0.0;   // absolute seconds
    double window_length = 0.0;  // <= polling_cycle_s
    std::vector<SubSlot> sub_slots;
};

/// Per-cycle realization of a slice: for every polling cycle overlapping
/// [t_s, t_e], a window of length (B/C) x overlap with the ONU sub-slots
/// inside it following the slice's upload order.
struct CycleGrantMap {
    std::int64_t first_cycle = 0;
    std::int64_t last_cycle = 0;  // inclusive
    std::vector<CycleGrant> grants;
};

struct InvalidSlice : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Maps a planned slice onto polling cycles. Cycle k covers [k*Tc, (k+1)*Tc);
/// the slice window sits at the start of the cycle's overlap with [t_s, t_e],
/// pro-rated linearly on partial first/last cycles. Sub-slots walk the
/// per-ONU bursts (clients on the same ONU concatenated) in upload order at
/// line rate within the windows; ONUs without pending bits are skipped.
///
/// Generic over the slice type to keep this header free of the planner's
/// types; any type with t_start/t_end/bandwidth_bps and an upload_order of
/// {onu, update_bits} entries works.
template <typename Slice>
CycleGrantMap map_slice_to_cycles(const PonConfig& cfg, const Slice& slice) {
    const double C = cfg.uplink_bps;
    const double Tc = cfg.polling_cycle_s;
    if (slice.bandwidth_bps <= 0 || slice.bandwidth_bps > C)
        throw InvalidSlice("map_slice_to_cycles: need 0 < B <= C");
    if (!(slice.t_start.seconds < slice.t_end.seconds))
        throw InvalidSlice("map_slice_to_cycles: need t_s < t_e");

    const double ts = slice.t_start.seconds;
    const double te = slice.t_end.seconds;
    const double duty = slice.bandwidth_bps / C;

    CycleGrantMap map;
    map.first_cycle = static_cast<std::int64_t>(std::floor(ts / Tc));
    map.last_cycle = static_cast<std::int64_t>(std::ceil(te / Tc)) - 1;

    struct Burst {
        int onu;
        double bits;
    };
    std::vector<Burst> bursts;
    for (const auto& cl : slice.upload_order) {
        if (cl.update_bits <= 0)
            continue;
        bool merged = false;
        for (auto& b : bursts) {
            if (b.onu == cl.onu) {
                b.bits += cl.update_bits;
                merged = true;
                break;
            }
        }
        if (!merged)
            bursts.push_back({cl.onu, cl.update_bits});
    }

    std::size_t cur = 0;
    double sent_of_cur = 0.0;
    for (std::int64_t k = map.first_cycle; k <= map.last_cycle; ++k) {
        const double cyc_start = static_cast<double>(k) * Tc;
        const double lo = std::max(cyc_start, ts);
        const double hi = std::min(cyc_start + Tc, te);
        if (hi <= lo)
            continue;
        CycleGrant g;
        g.cycle_index = k;
        g.window_start = lo;
        g.window_length = duty * (hi - lo);

        double pos = g.window_start;
        double room = g.window_length;
        while (room > 1e-15 && cur < bursts.size()) {
            const double need_s = (bursts[cur].bits - sent_of_cur) / C;
            const double take = std::min(need_s, room);
            g.sub_slots.push_back({bursts[cur].onu, pos, take});
            pos += take;
            room -= take;
            sent_of_cur += take * C;
            if (sent_of_cur >= bursts[cur].bits - 1e-9) {
                ++cur;
                sent_of_cur = 0.0;
            }
        }
        map.grants.push_back(std::move(g));
    }
    return map;
}

}  // namespace fedslice
