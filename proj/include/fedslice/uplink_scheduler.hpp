#pragma once

// Uplink arbitration over the shared PON upstream.
//
// Three service models live here:
//   * serve_fcfs        - one logical FIFO at line rate, no class
//                         distinction; the classic load-sensitive queue a
//                         M/D/1 formula can check.
//   * serve_sliced      - the slice-aware scheduler: training traffic owns a
//                         per-cycle window carved from the reservation
//                         [t_s, t_e]; background gets the remainder of each
//                         cycle and everything outside the window.
//   * serve_baseline_polling - the no-reservation round-scale baseline: each
//                         subscribed ONU holds an equal per-cycle grant share,
//                         subscriber (background) traffic is served ahead of
//                         bulk transfers inside that share. With no
//                         background only ONUs with pending data are polled,
//                         so a lone transfer runs at full line rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "fedslice/pon_model.hpp"
#include "fedslice/slice_planner.hpp"
#include "fedslice/traffic_gen.hpp"

namespace fedslice {

enum class ItemClass { Background, Training };

inline const char* to_string(ItemClass c) {
    return c == ItemClass::Background ? "background" : "training";
}

struct QueueItem {
    double arrival = 0.0;  // at the OLT scheduler: generation + upstream prop
    int onu = 0;
    double bits = 0.0;
    ItemClass cls = ItemClass::Background;
    std::uint64_t seq = 0;
};

struct GrantEntry {
    ItemClass cls = ItemClass::Background;
    int onu = 0;
    double arrival = 0.0;
    double start = 0.0;
    double end = 0.0;
    double bits = 0.0;
};

struct GrantLog {
    std::vector<GrantEntry> entries;

    std::string to_csv() const {
        std::string out = "class,onu,arrival,start,end,bits\n";
        char line[160];
        for (const auto& e : entries) {
            std::snprintf(line, sizeof(line), "%s,%d,%.9f,%.9f,%.9f,%.0f\n",
                          to_string(e.cls), e.onu, e.arrival, e.start, e.end, e.bits);
            out += line;
        }
        return out;
    }
};

struct ServiceOutcome {
    double start = 0.0;  // first bit on the wire
    double done = 0.0;   // last bit served
};

struct FcfsResult {
    GrantLog log;
    std::vector<ServiceOutcome> outcomes;  // aligned with the input items
    double mean_wait_s = 0.0;              // mean(start - arrival)
};

/// Single shared server at rate `capacity_bps`; items must be ordered by
/// (arrival, seq). Service start is max(arrival, previous end).
inline FcfsResult serve_fcfs(const std::vector<QueueItem>& items, double capacity_bps) {
    if (capacity_bps <= 0)
        throw std::invalid_argument("serve_fcfs: capacity must be > 0");
    FcfsResult res;
    res.outcomes.reserve(items.size());
    res.log.entries.reserve(items.size());
    double prev_end = 0.0;
    double wait_sum = 0.0;
    const QueueItem* prev = nullptr;
    for (const auto& it : items) {
        if (prev && (it.arrival < prev->arrival ||
                     (it.arrival == prev->arrival && it.seq < prev->seq)))
            throw std::invalid_argument("serve_fcfs: items not (arrival, seq) ordered");
        prev = &it;
        const double start = std::max(it.arrival, prev_end);
        const double end = start + it.bits / capacity_bps;
        prev_end = end;
        wait_sum += start - it.arrival;
        res.outcomes.push_back({start, end});
        res.log.entries.push_back({it.cls, it.onu, it.arrival, start, end, it.bits});
    }
    if (!items.empty())
        res.mean_wait_s = wait_sum / static_cast<double>(items.size());
    return res;
}

struct SlicedResult {
    GrantLog log;
    std::vector<ServiceOutcome> training;    // aligned with training input
    std::vector<ServiceOutcome> background;  // aligned with background input
};

/// Slice-aware service. Training items are served strictly in their given
/// (upload) order at line rate inside the slice's per-cycle windows; reserved
/// window time never serves background, even when idle. Background is served
/// FCFS in the remaining cycle time, divisible at bit granularity across
/// window boundaries. If training is still pending past t_e the window keeps
/// recurring at the same per-cycle length (the overrun the schedule records).
///
/// A slice with bandwidth 0 means "no reservation": background-only FCFS.
inline SlicedResult serve_sliced(const std::vector<QueueItem>& training,
                                 const std::vector<QueueItem>& background,
                                 const SliceSpec& slice, const PonConfig& pon) {
    const double C = pon.uplink_bps;
    const double Tc = pon.polling_cycle_s;

    if (slice.bandwidth_bps == 0.0) {
        if (!training.empty())
            throw InvalidSlice("serve_sliced: zero-bandwidth slice with training items");
        FcfsResult f = serve_fcfs(background, C);
        return {std::move(f.log), {}, std::move(f.outcomes)};
    }
    if (slice.bandwidth_bps < 0 || slice.bandwidth_bps > C)
        throw InvalidSlice("serve_sliced: need 0 <= B <= C");
    if (!(slice.t_start < slice.t_end))
        throw InvalidSlice("serve_sliced: need t_s < t_e");

    const double ts = slice.t_start.seconds;
    const double te = slice.t_end.seconds;
    const double duty = slice.bandwidth_bps / C;

    SlicedResult res;
    res.training.assign(training.size(), {});
    res.background.assign(background.size(), {});

    std::size_t ti = 0;  // next training item (strict order)
    double t_served = 0.0;
    std::size_t bi = 0;  // next background item to enter the FIFO
    std::size_t b_head = 0;
    double b_served = 0.0;

    auto all_done = [&] { return ti >= training.size() && b_head >= background.size(); };

    double first_t = std::numeric_limits<double>::max();
    for (const auto& it : training)
        first_t = std::min(first_t, it.arrival);
    for (const auto& it : background)
        first_t = std::min(first_t, it.arrival);
    if (training.empty() && background.empty())
        return res;
    double sweep_from = std::min(first_t, ts);

    auto serve_training = [&](double lo, double hi) {
        double pos = lo;
        while (ti < training.size() && pos < hi) {
            const QueueItem& it = training[ti];
            if (it.arrival > pos) {
                // Strict upload order: idle until the head item arrives.
                pos = std::min(it.arrival, hi);
                if (it.arrival > pos)
                    return;
            }
            const double avail = hi - pos;
            const double need_s = (it.bits - t_served) / C;
            if (t_served == 0.0)
                res.training[ti].start = pos;
            const double take = std::min(avail, need_s);
            res.log.entries.push_back(
                {ItemClass::Training, it.onu, it.arrival, pos, pos + take, take * C});
            pos += take;
            t_served += take * C;
            if (need_s <= avail + 1e-15) {
                res.training[ti].done = res.log.entries.back().end;
                ++ti;
                t_served = 0.0;
            }
        }
    };

    auto serve_background = [&](double lo, double hi) {
        double pos = lo;
        while (pos < hi) {
            while (bi < background.size() && background[bi].arrival <= pos)
                ++bi;
            if (b_head >= bi) {
                if (b_head >= background.size() || background[b_head].arrival >= hi)
                    return;
                pos = background[b_head].arrival;
                bi = b_head + 1;
            }
            const QueueItem& it = background[b_head];
            const double avail = hi - pos;
            const double need_s = (it.bits - b_served) / C;
            if (b_served == 0.0)
                res.background[b_head].start = pos;
            const double take = std::min(avail, need_s);
            res.log.entries.push_back(
                {ItemClass::Background, it.onu, it.arrival, pos, pos + take, take * C});
            pos += take;
            b_served += take * C;
            if (need_s <= avail + 1e-15) {
                res.background[b_head].done = res.log.entries.back().end;
                ++b_head;
                b_served = 0.0;
            }
        }
    };

    std::int64_t k = static_cast<std::int64_t>(std::floor(sweep_from / Tc));
    const std::int64_t hard_stop = k + 200'000'000;
    for (; !all_done(); ++k) {
        if (k > hard_stop)
            throw std::runtime_error("serve_sliced: sweep failed to converge");
        const double cyc_lo = static_cast<double>(k) * Tc;
        const double cyc_hi = cyc_lo + Tc;

        // Window inside this cycle: the reservation overlap, or a full-duty
        // window while training overruns past t_e.
        double w_lo = 0.0, w_hi = 0.0;
        const double lo = std::max(cyc_lo, ts);
        const double hi = std::min(cyc_hi, te);
        if (hi > lo) {
            w_lo = lo;
            w_hi = lo + duty * (hi - lo);
        } else if (cyc_lo >= te && ti < training.size()) {
            w_lo = cyc_lo;
            w_hi = cyc_lo + duty * Tc;
        }

        if (w_hi > w_lo) {
            serve_background(cyc_lo, w_lo);
            serve_training(w_lo, w_hi);
            serve_background(w_hi, cyc_hi);
        } else {
            serve_background(cyc_lo, cyc_hi);
        }
    }
    return res;
}

/// A bulk transfer for the baseline: `bits` become available at the ONU at
/// `ready` and leave when the ONU's grant shares have carried them.
struct BulkFlow {
    int id = 0;
    int onu = 0;
    double bits = 0.0;
    double ready = 0.0;
};

struct BulkOutcome {
    double start = 0.0;
    double done = 0.0;
};

struct NoBackgroundFeed {
    template <typename Sink>
    void drain_until(double, Sink&&) {}
};

/// No-reservation polling baseline. Every cycle, capacity splits evenly
/// across the polled ONUs: all of them while background service is
/// provisioned (bg_provisioned), otherwise just the ONUs with pending
/// transfers, so an uncontended transfer runs at full line rate. Inside an
/// ONU's share its background is served first; the transfer drains fluidly
/// at the leftover rate. `bg` must yield arrivals in time order via
/// drain_until(t, sink); arrivals for ONUs without transfers are ignored
/// (their service cannot affect anyone else's share).
template <typename BgFeed>
std::vector<BulkOutcome> serve_baseline_polling(const PonConfig& cfg,
                                                double capacity_bps,
                                                std::vector<BulkFlow> flows,
                                                bool bg_provisioned, BgFeed& bg,
                                                double start_time = 0.0) {
    std::vector<BulkOutcome> out(flows.size());
    if (flows.empty())
        return out;

    const double Tc = cfg.polling_cycle_s;

    // Group flows per ONU, FIFO by (ready, id).
    std::map<int, std::vector<std::size_t>> by_onu;
    for (std::size_t i = 0; i < flows.size(); ++i)
        by_onu[flows[i].onu].push_back(i);
    for (auto& [onu, idx] : by_onu) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            if (flows[a].ready != flows[b].ready)
                return flows[a].ready < flows[b].ready;
            return flows[a].id < flows[b].id;
        });
    }

    struct OnuState {
        std::vector<std::size_t> queue;  // flow indices, FIFO
        std::size_t head = 0;
        double served_of_head = 0.0;
        bool started_head = false;
        double bg_backlog = 0.0;
    };
    std::map<int, OnuState> state;
    double first_ready = std::numeric_limits<double>::max();
    for (auto& [onu, idx] : by_onu) {
        state[onu].queue = idx;
        first_ready = std::min(first_ready, flows[idx.front()].ready);
    }

    std::size_t remaining = flows.size();
    std::int64_t k =
        static_cast<std::int64_t>(std::floor(std::max(start_time, first_ready) / Tc));
    const std::int64_t hard_stop = k + 200'000'000;

    // Background that arrived before this sweep was served while nothing was
    // being watched (the per-ONU background queue is stable); start clean.
    bg.drain_until(static_cast<double>(k) * Tc, [](const BackgroundArrival&) {});

    while (remaining > 0) {
        if (k > hard_stop)
            throw std::runtime_error("serve_baseline_polling: failed to converge");
        const double cyc_lo = static_cast<double>(k) * Tc;
        const double cyc_hi = cyc_lo + Tc;

        // Background that lands within this cycle competes within it.
        bg.drain_until(cyc_hi, [&](const BackgroundArrival& a) {
            auto it = state.find(a.onu);
            if (it != state.end())
                it->second.bg_backlog += a.bits;
        });

        int polled = cfg.num_onus;
        if (!bg_provisioned) {
            polled = 0;
            for (auto& [onu, st] : state)
                if (st.head < st.queue.size() && flows[st.queue[st.head]].ready < cyc_hi)
                    ++polled;
            if (polled == 0) {
                ++k;
                continue;
            }
        }
        const double usable = Tc - cfg.guard_time_s * polled;
        const double share_bits = capacity_bps * usable / polled;

        for (auto& [onu, st] : state) {
            if (st.head >= st.queue.size())
                continue;
            const double bg_take = std::min(st.bg_backlog, share_bits);
            st.bg_backlog -= bg_take;
            const double rate = (share_bits - bg_take) / Tc;
            if (rate <= 0)
                continue;
            double pos = cyc_lo;
            while (st.head < st.queue.size() && pos < cyc_hi) {
                const BulkFlow& f = flows[st.queue[st.head]];
                const double t0 = std::max(pos, f.ready);
                if (t0 >= cyc_hi)
                    break;
                const double avail = cyc_hi - t0;
                const double need_s = (f.bits - st.served_of_head) / rate;
                if (!st.started_head) {
                    out[st.queue[st.head]].start = t0;
                    st.started_head = true;
                }
                if (need_s <= avail) {
                    out[st.queue[st.head]].done = t0 + need_s;
                    pos = t0 + need_s;
                    ++st.head;
                    st.served_of_head = 0.0;
                    st.started_head = false;
                    --remaining;
                } else {
                    st.served_of_head += rate * avail;
                    pos = cyc_hi;
                }
            }
        }
        ++k;
    }
    return out;
}

}  // namespace fedslice
