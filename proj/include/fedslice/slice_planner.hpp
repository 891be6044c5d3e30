#pragma once

// Bandwidth-slice planner. From the cohort's compute times and update sizes
// it derives the per-client ready times (delta), the transmit headroom for
// the last arrival (nabla), the upload window [t_s, t_e] of width tau, the
// reserved capacity B = min(sum(M)/tau, C), and a per-client upload schedule.
// Pure functions over immutable inputs; callable from any thread.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedslice/pon_model.hpp"
#include "fedslice/sim_core.hpp"

namespace fedslice {

struct EmptyCohort : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateWindow : std::domain_error {
    using std::domain_error::domain_error;
};

/// One FL client: its local training time and model-update size, attached to
/// an ONU.
struct ClientProfile {
    int client_id = 0;
    int onu = 0;
    double compute_time_s = 0.0;  // T_UD
    double update_bits = 0.0;     // M_UD

    void validate() const {
        if (compute_time_s <= 0)
            throw std::invalid_argument("ClientProfile: compute_time_s must be > 0");
        if (update_bits <= 0)
            throw std::invalid_argument("ClientProfile: update_bits must be > 0");
    }
};

/// Planner input: the involved clients plus the planning instant, the round
/// threshold, and the activation offset h (slice active from round h of H).
struct CohortInfo {
    std::vector<ClientProfile> clients;
    SimTime t_current{0.0};
    double t_round_s = 6.0;
    double model_bits = 26.416e6;  // global model broadcast size
    int h = 1;
    int total_rounds = 2;  // H

    void validate() const {
        if (clients.empty())
            throw EmptyCohort("CohortInfo: no clients");
        if (t_round_s <= 0)
            throw std::invalid_argument("CohortInfo: t_round_s must be > 0");
        if (h < 1 || h >= total_rounds)
            throw std::invalid_argument("CohortInfo: need 1 <= h < H");
        for (const auto& c : clients)
            c.validate();
    }
};

struct DeltaEntry {
    ClientProfile client;
    double delta = 0.0;  // T_DL + T_UD
};

/// Per-client delta with the window statistics. `entries` is sorted by
/// descending compute time (ties by client id); nabla/t_max/tau are filled in
/// by estimate_nabla / plan_slice.
struct DeltaTable {
    std::vector<DeltaEntry> entries;
    double nabla = 0.0;
    double t_min = 0.0;  // min(delta)
    double t_max = 0.0;  // max(delta) + nabla
    double tau = 0.0;    // t_max - t_min
};

/// Planner output: the slice S{t_s, t_e, B} plus the per-client upload order
/// and slot lengths. round-relative window offsets are carried along for the
/// engine, which re-applies the window in every post-activation round.
struct SliceSpec {
    SimTime t_start{0.0};
    SimTime t_end{0.0};
    double bandwidth_bps = 0.0;  // B
    bool capped = false;         // true iff sum(M)/tau exceeded C
    std::vector<ClientProfile> upload_order;  // ascending delta, ties by id
    std::vector<double> slot_seconds;         // M_i / B per upload_order entry
    double t_min_offset = 0.0;  // window start relative to round start
    double t_max_offset = 0.0;  // window end relative to round start
    double tau = 0.0;
    double nabla = 0.0;

    double total_update_bits() const {
        double s = 0.0;
        for (const auto& c : upload_order)
            s += c.update_bits;
        return s;
    }
};

/// Fills the per-client deltas (download + compute) and t_min; the table is
/// sorted by descending compute time.
inline DeltaTable compute_delta(const CohortInfo& cohort, const PonConfig& pon) {
    if (cohort.clients.empty())
        throw EmptyCohort("compute_delta: empty cohort");
    DeltaTable table;
    table.entries.reserve(cohort.clients.size());
    for (const auto& c : cohort.clients) {
        c.validate();
        table.entries.push_back({c, downlink_time(pon, cohort.model_bits, c.onu) +
                                        c.compute_time_s});
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const DeltaEntry& a, const DeltaEntry& b) {
                  if (a.client.compute_time_s != b.client.compute_time_s)
                      return a.client.compute_time_s > b.client.compute_time_s;
                  return a.client.client_id < b.client.client_id;
              });
    table.t_min = std::min_element(table.entries.begin(), table.entries.end(),
                                   [](const DeltaEntry& a, const DeltaEntry& b) {
                                       return a.delta < b.delta;
                                   })
                      ->delta;
    return table;
}

/// Headroom for the last arrival: the max-delta client's update serialized at
/// full line rate plus its upstream propagation. Ties on delta break toward
/// the lower client id.
inline double estimate_nabla(const DeltaTable& table, const PonConfig& pon) {
    if (table.entries.empty())
        throw EmptyCohort("estimate_nabla: empty table");
    const DeltaEntry* worst = &table.entries.front();
    for (const auto& e : table.entries) {
        if (e.delta > worst->delta ||
            (e.delta == worst->delta && e.client.client_id < worst->client.client_id))
            worst = &e;
    }
    return worst->client.update_bits / pon.uplink_bps + prop_delay(pon, worst->client.onu);
}

/// Plans the slice for activation round h:
///   t_max = max(delta) + nabla, t_min = min(delta), tau = t_max - t_min,
///   B = min(sum(M)/tau, C), t_s/t_e = t_current + t_min/t_max + h*T_round.
/// Upload order is ascending delta (earliest ready first), ties by client id.
inline SliceSpec plan_slice(const CohortInfo& cohort, const PonConfig& pon) {
    cohort.validate();
    DeltaTable table = compute_delta(cohort, pon);
    table.nabla = estimate_nabla(table, pon);

    double delta_max = table.entries.front().delta;
    double sum_bits = 0.0;
    for (const auto& e : table.entries) {
        delta_max = std::max(delta_max, e.delta);
        sum_bits += e.client.update_bits;
    }
    table.t_max = delta_max + table.nabla;
    table.tau = table.t_max - table.t_min;
    if (table.tau <= 0)
        throw DegenerateWindow("plan_slice: tau <= 0 (identical deltas, zero nabla)");

    SliceSpec spec;
    spec.nabla = table.nabla;
    spec.tau = table.tau;
    spec.t_min_offset = table.t_min;
    spec.t_max_offset = table.t_max;
    spec.t_start = cohort.t_current + (table.t_min + cohort.h * cohort.t_round_s);
    spec.t_end = cohort.t_current + (table.t_max + cohort.h * cohort.t_round_s);

    const double demand = sum_bits / table.tau;
    spec.capped = demand > pon.uplink_bps;
    spec.bandwidth_bps = spec.capped ? pon.uplink_bps : demand;

    spec.upload_order.reserve(table.entries.size());
    std::vector<DeltaEntry> by_delta = table.entries;
    std::sort(by_delta.begin(), by_delta.end(),
              [](const DeltaEntry& a, const DeltaEntry& b) {
                  if (a.delta != b.delta)
                      return a.delta < b.delta;
                  return a.client.client_id < b.client.client_id;
              });
    for (const auto& e : by_delta) {
        spec.upload_order.push_back(e.client);
        spec.slot_seconds.push_back(e.client.update_bits / spec.bandwidth_bps);
    }
    return spec;
}

/// Feasibility of the round threshold: T_round must cover the slowest client's
/// download + compute + upload-at-B + aggregation.
struct FeasibilityVerdict {
    bool feasible = false;
    double slack_s = 0.0;  // T_round - worst sum; negative when infeasible
    int worst_client_id = -1;
    std::string note;
};

inline FeasibilityVerdict validate_round_threshold(const CohortInfo& cohort,
                                                   const SliceSpec& slice,
                                                   const PonConfig& pon,
                                                   double t_aggregation_s = 0.0) {
    cohort.validate();
    FeasibilityVerdict v;
    double worst = 0.0;
    for (const auto& c : cohort.clients) {
        const double sum = downlink_time(pon, cohort.model_bits, c.onu) +
                           c.compute_time_s + c.update_bits / slice.bandwidth_bps +
                           t_aggregation_s;
        if (sum > worst) {
            worst = sum;
            v.worst_client_id = c.client_id;
        }
    }
    v.slack_s = cohort.t_round_s - worst;
    v.feasible = v.slack_s >= 0;
    if (!v.feasible)
        v.note = "round threshold infeasible: reduce per-client compute time or "
                 "raise T_round";
    return v;
}

/// One planned transmission slot, relative to the round start.
struct UploadSlot {
    int client_id = 0;
    int onu = 0;
    double start = 0.0;
    double end = 0.0;
};

/// Greedy slot plan in upload order: each slot starts at the latest of the
/// previous slot's end, the client's readiness (delta), and the window start;
/// it lasts M_i/B. Completion may run past the window end; the overrun is
/// reported alongside.
struct UploadSchedule {
    std::vector<UploadSlot> slots;
    double makespan = 0.0;   // end of the last slot, round-relative
    double overrun_s = 0.0;  // max(0, makespan - t_max_offset)
};

inline UploadSchedule build_upload_schedule(const SliceSpec& slice,
                                            const CohortInfo& cohort,
                                            const PonConfig& pon) {
    if (slice.bandwidth_bps <= 0 || slice.upload_order.empty())
        throw InvalidSlice("build_upload_schedule: slice not planned");
    const DeltaTable table = compute_delta(cohort, pon);

    UploadSchedule sched;
    sched.slots.reserve(slice.upload_order.size());
    double prev_end = 0.0;
    for (std::size_t i = 0; i < slice.upload_order.size(); ++i) {
        const ClientProfile& c = slice.upload_order[i];
        double delta = 0.0;
        bool found = false;
        for (const auto& e : table.entries) {
            if (e.client.client_id == c.client_id) {
                delta = e.delta;
                found = true;
                break;
            }
        }
        if (!found)
            throw InvalidSlice("build_upload_schedule: slice client not in cohort");
        UploadSlot slot;
        slot.client_id = c.client_id;
        slot.onu = c.onu;
        slot.start = std::max({prev_end, delta, slice.t_min_offset});
        slot.end = slot.start + slice.slot_seconds[i];
        prev_end = slot.end;
        sched.slots.push_back(slot);
    }
    sched.makespan = prev_end;
    sched.overrun_s = std::max(0.0, sched.makespan - slice.t_max_offset);
    return sched;
}

}  // namespace fedslice
