#pragma once

// Synchronous federated-learning round orchestration: cohort selection,
// broadcast, local compute, upload through the chosen uplink policy,
// aggregation timing, membership-triggered replanning, and the accuracy
// trace lookup.
//
// Rounds run back to back: round r+1 starts the instant round r's
// aggregation completes. T_round is planner input and feasibility threshold
// only. The planner's absolute window [t_s, t_e] describes activation round
// h; every later round reuses the window's round-relative offsets
// [T_min, T_max], which line up with readiness because compute times are
// fixed per client.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedslice/pon_model.hpp"
#include "fedslice/sim_core.hpp"
#include "fedslice/slice_planner.hpp"
#include "fedslice/traffic_gen.hpp"
#include "fedslice/uplink_scheduler.hpp"

namespace fedslice {

enum class Policy { Fcfs, Bs };

inline const char* to_string(Policy p) { return p == Policy::Fcfs ? "fcfs" : "bs"; }

struct NoClients : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InfeasibleConfig : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnknownInvolvement : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FlTaskConfig {
    int total_rounds = 11;  // H, including the h pre-activation rounds
    int h = 1;              // rounds before the slice applies
    double t_round_s = 6.0;
    double model_bits = 26.416e6;
    double t_aggregation_s = 0.0;
    double involvement_percent = 100.0;
    double compute_lo_s = 1.0;
    double compute_hi_s = 5.0;
    double compute_jitter_frac = 0.0;  // per-round readiness jitter, 0 = off
    int clients_per_onu = 1;
    Policy policy = Policy::Bs;
    bool strict_feasibility = false;

    void validate() const {
        if (total_rounds < 2)
            throw std::invalid_argument("FlTaskConfig: need H >= 2");
        if (h < 1 || h >= total_rounds)
            throw std::invalid_argument("FlTaskConfig: need 1 <= h < H");
        if (t_round_s <= 0)
            throw std::invalid_argument("FlTaskConfig: t_round_s must be > 0");
        if (model_bits <= 0)
            throw std::invalid_argument("FlTaskConfig: model_bits must be > 0");
        if (compute_lo_s <= 0 || compute_lo_s > compute_hi_s)
            throw std::invalid_argument("FlTaskConfig: need 0 < lo <= hi");
        if (involvement_percent <= 0 || involvement_percent > 100)
            throw std::invalid_argument("FlTaskConfig: involvement in (0,100]");
        if (clients_per_onu < 1)
            throw std::invalid_argument("FlTaskConfig: clients_per_onu >= 1");
        if (compute_jitter_frac < 0 || compute_jitter_frac >= 1)
            throw std::invalid_argument("FlTaskConfig: jitter in [0,1)");
        if (t_aggregation_s < 0)
            throw std::invalid_argument("FlTaskConfig: t_aggregation_s >= 0");
    }
};

/// Full client population: compute times linearly spaced over
/// [compute_lo, compute_hi] (endpoints inclusive), one ONU per
/// `clients_per_onu` consecutive ids.
inline std::vector<ClientProfile> make_population(const PonConfig& pon,
                                                  const FlTaskConfig& task) {
    const int n = pon.num_onus * task.clients_per_onu;
    std::vector<ClientProfile> clients;
    clients.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ClientProfile c;
        c.client_id = i;
        c.onu = i % pon.num_onus;
        c.compute_time_s =
            n == 1 ? task.compute_lo_s
                   : task.compute_lo_s + (task.compute_hi_s - task.compute_lo_s) *
                                             static_cast<double>(i) /
                                             static_cast<double>(n - 1);
        c.update_bits = task.model_bits;
        clients.push_back(c);
    }
    return clients;
}

/// The floor(p/100 * N) fastest clients (at least one). p% involvement bounds
/// the cohort's compute time by lo + (hi-lo)*p/100.
inline std::vector<ClientProfile> select_cohort(const std::vector<ClientProfile>& all,
                                                double involvement_percent) {
    if (all.empty())
        throw NoClients("select_cohort: no clients");
    if (involvement_percent <= 0 || involvement_percent > 100)
        throw std::invalid_argument("select_cohort: involvement in (0,100]");
    std::vector<ClientProfile> sorted = all;
    std::sort(sorted.begin(), sorted.end(), [](const ClientProfile& a, const ClientProfile& b) {
        if (a.compute_time_s != b.compute_time_s)
            return a.compute_time_s < b.compute_time_s;
        return a.client_id < b.client_id;
    });
    auto m = static_cast<std::size_t>(
        std::floor(involvement_percent / 100.0 * static_cast<double>(sorted.size())));
    m = std::max<std::size_t>(m, 1);
    sorted.resize(std::min(m, sorted.size()));
    return sorted;
}

struct ClientRoundStats {
    int client_id = 0;
    int onu = 0;
    double t_dl = 0.0;         // broadcast/copy fully at the ONU, round-relative
    double t_ud = 0.0;         // compute time used this round
    double upload_wait = 0.0;  // first bit on the wire minus readiness
    double t_ul = 0.0;         // first bit to last bit at the OLT
    double olt_arrival = 0.0;  // update fully received, round-relative
};

struct RoundRecord {
    int round_index = 0;
    double round_start_s = 0.0;  // absolute
    double sync_time_s = 0.0;    // last update received + T_a, round-relative
    double overrun_s = 0.0;      // past the slice window end (BS rounds)
    int straggler_id = -1;
    Policy policy_used = Policy::Fcfs;
    std::vector<ClientRoundStats> clients;
};

struct TrainingReport {
    Policy policy = Policy::Fcfs;
    std::uint64_t seed = 0;
    double total_load = 0.0;
    double background_load = 0.0;
    double involvement_percent = 100.0;
    int pre_activation_rounds = 0;  // excluded by default in summaries
    bool feasible = true;
    double feasibility_slack_s = 0.0;
    std::vector<RoundRecord> rounds;
    double total_time_s = 0.0;
    std::string trace;  // event log, one `time,seq,kind` line per milestone
};

/// Accuracy-versus-round samples per involvement level, loaded from the
/// bundled illustrative trace (CSV `involvement_percent,round,accuracy`).
struct AccuracyTrace {
    struct Sample {
        double round = 0.0;
        double accuracy = 0.0;
    };
    std::map<double, std::vector<Sample>> levels;
};

inline AccuracyTrace load_accuracy_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_accuracy_trace: cannot open " + path);
    AccuracyTrace trace;
    std::string line;
    if (!std::getline(in, line) || line != "involvement_percent,round,accuracy")
        throw std::runtime_error("load_accuracy_trace: bad header in " + path);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string f1, f2, f3;
        if (!std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') ||
            !std::getline(ss, f3))
            throw std::runtime_error("load_accuracy_trace: bad row: " + line);
        const double level = std::stod(f1);
        AccuracyTrace::Sample s{std::stod(f2), std::stod(f3)};
        if (s.accuracy < 0 || s.accuracy > 1)
            throw std::runtime_error("load_accuracy_trace: accuracy outside [0,1]");
        auto& vec = trace.levels[level];
        if (!vec.empty() && s.round <= vec.back().round)
            throw std::runtime_error(
                "load_accuracy_trace: rounds not strictly increasing");
        vec.push_back(s);
    }
    if (trace.levels.empty())
        throw std::runtime_error("load_accuracy_trace: empty trace");
    return trace;
}

/// Piecewise-linear interpolation in round within the nearest involvement
/// level; beyond the last sample the saturated value is returned. With
/// allow_nearest=false the involvement level must exist exactly.
inline double accuracy_lookup(const AccuracyTrace& trace, double involvement_percent,
                              double round, bool allow_nearest = true) {
    if (trace.levels.empty())
        throw std::invalid_argument("accuracy_lookup: empty trace");
    const std::vector<AccuracyTrace::Sample>* samples = nullptr;
    double best = std::numeric_limits<double>::max();
    for (const auto& [level, vec] : trace.levels) {
        const double d = std::abs(level - involvement_percent);
        if (d < best) {
            best = d;
            samples = &vec;
        }
    }
    if (!allow_nearest && best != 0.0)
        throw UnknownInvolvement("accuracy_lookup: no trace for involvement " +
                                 std::to_string(involvement_percent));
    const auto& v = *samples;
    if (round <= v.front().round)
        return v.front().accuracy;
    if (round >= v.back().round)
        return v.back().accuracy;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (round <= v[i].round) {
            const double w = (round - v[i - 1].round) / (v[i].round - v[i - 1].round);
            return v[i - 1].accuracy + w * (v[i].accuracy - v[i - 1].accuracy);
        }
    }
    return v.back().accuracy;
}

struct MembershipChange {
    bool join = true;
    ClientProfile client;  // joined client, or the one leaving (by id)
};

/// Replans the slice on a join/leave with t_current = now and h = 1; the
/// cohort is mutated in place. Any other round boundary leaves the slice
/// untouched (the policy is membership-triggered only).
inline SliceSpec handle_membership_change(const MembershipChange& ev,
                                          std::vector<ClientProfile>& cohort,
                                          SimTime now, const FlTaskConfig& task,
                                          const PonConfig& pon) {
    if (ev.join) {
        cohort.push_back(ev.client);
    } else {
        std::erase_if(cohort, [&](const ClientProfile& c) {
            return c.client_id == ev.client.client_id;
        });
        if (cohort.empty())
            throw EmptyCohort("handle_membership_change: last client left");
    }
    CohortInfo info;
    info.clients = cohort;
    info.t_current = now;
    info.t_round_s = task.t_round_s;
    info.model_bits = task.model_bits;
    info.h = 1;
    info.total_rounds = std::max(task.total_rounds, 2);
    return plan_slice(info, pon);
}

/// One training run: a single-threaded simulation instance owning its clock,
/// event queue and background sources. Instances share nothing mutable, so
/// seed sweeps may run them concurrently.
class FlEngine {
public:
    FlEngine(PonConfig pon, FlTaskConfig task, BackgroundConfig bg,
             double total_load = -1.0)
        : pon_(std::move(pon)), task_(task), bg_(bg), total_load_(total_load) {
        pon_.validate();
        task_.validate();
        bg_.validate();
        cohort_ = select_cohort(make_population(pon_, task_), task_.involvement_percent);
        up_bg_.emplace(bg_, pon_, pon_.uplink_bps, 0x55u);
        down_bg_.emplace(bg_, pon_, pon_.downlink_bps, 0xAAu);
        if (task_.compute_jitter_frac > 0)
            jitter_seed_base_ = bg_.seed ^ 0x9e3779b97f4a7c15ull;
    }

    const std::vector<ClientProfile>& cohort() const { return cohort_; }
    const std::optional<SliceSpec>& slice() const { return slice_; }

    TrainingReport run_training(bool keep_trace = false) {
        TrainingReport report;
        report.policy = task_.policy;
        report.seed = bg_.seed;
        report.total_load = total_load_ >= 0 ? total_load_ : bg_.load;
        report.background_load = bg_.load;
        report.involvement_percent = task_.involvement_percent;
        report.pre_activation_rounds = task_.h;

        if (task_.policy == Policy::Bs) {
            CohortInfo info = cohort_info(SimTime{0.0});
            slice_ = plan_slice(info, pon_);
            const FeasibilityVerdict verdict =
                validate_round_threshold(info, *slice_, pon_, task_.t_aggregation_s);
            report.feasible = verdict.feasible;
            report.feasibility_slack_s = verdict.slack_s;
            if (!verdict.feasible && task_.strict_feasibility)
                throw InfeasibleConfig("run_training: " + verdict.note);
        }

        std::string trace;
        for (int r = 0; r < task_.total_rounds; ++r) {
            const double round_start = queue_.clock().seconds;
            const bool sliced = task_.policy == Policy::Bs && r >= task_.h;
            RoundRecord rec = sliced ? run_round_bs(r, round_start)
                                     : run_round_fcfs(r, round_start);
            replay_milestones(rec, keep_trace ? &trace : nullptr);
            report.total_time_s += rec.sync_time_s;
            report.rounds.push_back(std::move(rec));
        }
        report.trace = std::move(trace);
        return report;
    }

    /// One baseline round: model copies go downstream per ONU and updates
    /// come back per client, both through the no-reservation polling shares.
    RoundRecord run_round_fcfs(int round_index, double round_start) {
        RoundRecord rec;
        rec.round_index = round_index;
        rec.round_start_s = round_start;
        rec.policy_used = Policy::Fcfs;

        std::vector<int> onus = cohort_onus();
        std::vector<BulkFlow> copies;
        copies.reserve(onus.size());
        for (int onu : onus)
            copies.push_back({onu, onu, task_.model_bits, round_start});
        const bool provisioned = bg_.load > 0;
        const auto dl = serve_baseline_polling(pon_, pon_.downlink_bps, copies,
                                               provisioned, *down_bg_, round_start);
        std::map<int, double> dl_done;  // copy at the ONU, absolute
        for (std::size_t i = 0; i < copies.size(); ++i)
            dl_done[copies[i].onu] = dl[i].done + prop_delay(pon_, copies[i].onu);

        std::vector<BulkFlow> uploads;
        std::vector<double> ready(cohort_.size());
        uploads.reserve(cohort_.size());
        for (std::size_t i = 0; i < cohort_.size(); ++i) {
            const auto& c = cohort_[i];
            ready[i] = dl_done[c.onu] + compute_time(c, round_index);
            uploads.push_back({c.client_id, c.onu, c.update_bits, ready[i]});
        }
        const auto ul = serve_baseline_polling(pon_, pon_.uplink_bps, uploads,
                                               provisioned, *up_bg_, round_start);

        finalize_round(rec, round_start, dl_done, ready,
                       [&](std::size_t i) { return ul[i]; });
        return rec;
    }

    /// One post-activation round: reserved broadcast downstream, uploads in
    /// the slice's per-cycle windows (rebased to this round's start).
    RoundRecord run_round_bs(int round_index, double round_start) {
        if (!slice_)
            throw InvalidSlice("run_round_bs: no slice planned");
        RoundRecord rec;
        rec.round_index = round_index;
        rec.round_start_s = round_start;
        rec.policy_used = Policy::Bs;

        std::map<int, double> dl_done;
        for (int onu : cohort_onus())
            dl_done[onu] = round_start + downlink_time(pon_, task_.model_bits, onu);

        // Training items in upload order; arrival = data ready at the ONU.
        std::vector<QueueItem> training;
        std::vector<double> ready_by_slot(slice_->upload_order.size());
        training.reserve(slice_->upload_order.size());
        for (std::size_t i = 0; i < slice_->upload_order.size(); ++i) {
            const auto& c = slice_->upload_order[i];
            const double ready = dl_done.at(c.onu) + compute_time(c, round_index);
            ready_by_slot[i] = ready;
            training.push_back({ready, c.onu, c.update_bits, ItemClass::Training,
                                static_cast<std::uint64_t>(i)});
        }

        SliceSpec window = *slice_;
        window.t_start = SimTime{round_start + slice_->t_min_offset};
        window.t_end = SimTime{round_start + slice_->t_max_offset};

        std::vector<QueueItem> background;
        std::uint64_t seq = 0;
        up_bg_->drain_until(window.t_end.seconds + 0.5, [&](const BackgroundArrival& a) {
            if (a.time < round_start)
                return;
            background.push_back({a.time + prop_delay(pon_, a.onu), a.onu, a.bits,
                                  ItemClass::Background, seq++});
        });
        std::sort(background.begin(), background.end(),
                  [](const QueueItem& a, const QueueItem& b) {
                      if (a.arrival != b.arrival)
                          return a.arrival < b.arrival;
                      return a.seq < b.seq;
                  });

        const SlicedResult served = serve_sliced(training, background, window, pon_);

        // Map slot outcomes back to cohort order.
        std::map<int, std::size_t> slot_of_client;
        for (std::size_t i = 0; i < slice_->upload_order.size(); ++i)
            slot_of_client[slice_->upload_order[i].client_id] = i;
        std::vector<double> ready(cohort_.size());
        for (std::size_t i = 0; i < cohort_.size(); ++i)
            ready[i] = ready_by_slot[slot_of_client.at(cohort_[i].client_id)];
        finalize_round(rec, round_start, dl_done, ready, [&](std::size_t i) {
            const std::size_t s = slot_of_client.at(cohort_[i].client_id);
            return BulkOutcome{served.training[s].start, served.training[s].done};
        });
        rec.overrun_s =
            std::max(0.0, (rec.round_start_s + rec.sync_time_s - task_.t_aggregation_s) -
                              (round_start + slice_->t_max_offset));
        return rec;
    }

private:
    CohortInfo cohort_info(SimTime t_current) const {
        CohortInfo info;
        info.clients = cohort_;
        info.t_current = t_current;
        info.t_round_s = task_.t_round_s;
        info.model_bits = task_.model_bits;
        info.h = task_.h;
        info.total_rounds = task_.total_rounds;
        return info;
    }

    std::vector<int> cohort_onus() const {
        std::vector<int> onus;
        for (const auto& c : cohort_)
            if (std::find(onus.begin(), onus.end(), c.onu) == onus.end())
                onus.push_back(c.onu);
        std::sort(onus.begin(), onus.end());
        return onus;
    }

    double compute_time(const ClientProfile& c, int round_index) const {
        if (!jitter_seed_base_)
            return c.compute_time_s;
        // Per-(client, round) multiplicative jitter, reproducible per seed.
        std::mt19937_64 rng(*jitter_seed_base_ ^
                            (static_cast<std::uint64_t>(c.client_id) << 20) ^
                            static_cast<std::uint64_t>(round_index));
        const double u = 2.0 * detail::uniform01(rng) - 1.0;
        return c.compute_time_s * (1.0 + task_.compute_jitter_frac * u);
    }

    template <typename OutcomeAt>
    void finalize_round(RoundRecord& rec, double round_start,
                        const std::map<int, double>& dl_done,
                        const std::vector<double>& ready, OutcomeAt&& outcome_at) {
        rec.clients.reserve(cohort_.size());
        double last_arrival = 0.0;
        for (std::size_t i = 0; i < cohort_.size(); ++i) {
            const auto& c = cohort_[i];
            const BulkOutcome out = outcome_at(i);
            ClientRoundStats st;
            st.client_id = c.client_id;
            st.onu = c.onu;
            st.t_dl = dl_done.at(c.onu) - round_start;
            st.t_ud = ready[i] - dl_done.at(c.onu);
            st.upload_wait = out.start - ready[i];
            const double arrival = out.done + prop_delay(pon_, c.onu);
            st.t_ul = arrival - out.start;
            st.olt_arrival = arrival - round_start;
            if (st.olt_arrival > last_arrival) {
                last_arrival = st.olt_arrival;
                rec.straggler_id = c.client_id;
            }
            rec.clients.push_back(st);
        }
        rec.sync_time_s = last_arrival + task_.t_aggregation_s;
    }

    /// Replays the round's milestones through the event core in time order;
    /// the popped sequence is the determinism trace.
    void replay_milestones(const RoundRecord& rec, std::string* trace) {
        const double r0 = rec.round_start_s;
        std::map<int, double> seen_onu;
        for (const auto& st : rec.clients)
            if (!seen_onu.count(st.onu))
                seen_onu[st.onu] = r0 + st.t_dl;
        for (const auto& [onu, t] : seen_onu)
            queue_.schedule(SimTime{t}, EventKind::BroadcastDone, onu);
        for (const auto& st : rec.clients)
            queue_.schedule(SimTime{r0 + st.t_dl + st.t_ud}, EventKind::ComputeDone,
                            st.client_id);
        for (const auto& st : rec.clients)
            queue_.schedule(SimTime{r0 + st.olt_arrival}, EventKind::GrantEnd,
                            st.client_id);
        queue_.schedule(SimTime{r0 + rec.sync_time_s}, EventKind::RoundEnd,
                        rec.round_index);
        queue_.run_until(SimTime{r0 + rec.sync_time_s}, [&](const Event& ev) {
            if (trace) {
                *trace += trace_line(ev);
                *trace += '\n';
            }
        });
    }

    PonConfig pon_;
    FlTaskConfig task_;
    BackgroundConfig bg_;
    double total_load_;
    std::vector<ClientProfile> cohort_;
    std::optional<SliceSpec> slice_;
    EventQueue queue_;
    std::optional<BackgroundSource> up_bg_;
    std::optional<BackgroundSource> down_bg_;
    std::optional<std::uint64_t> jitter_seed_base_;
};

}  // namespace fedslice
