#pragma once

// Aggregation of round records into summaries: sync-time statistics,
// training-time totals, FCFS-vs-BS savings, and plot-ready tables.
// Pure functions over immutable reports. All emitted seconds use fixed
// 9-decimal formatting so reports are byte-identical across platforms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedslice/fl_engine.hpp"

namespace fedslice {

struct EmptyReport : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SummaryStats {
    int rounds = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double p95 = 0.0;  // nearest-rank
    double total = 0.0;
};

/// Sync-time statistics over the report's rounds, excluding the
/// pre-activation h rounds unless asked otherwise.
inline SummaryStats summarize(const TrainingReport& report,
                              bool include_pre_activation = false) {
    if (report.rounds.empty())
        throw EmptyReport("summarize: no rounds");
    std::vector<double> sync;
    for (const auto& r : report.rounds) {
        if (!include_pre_activation && r.round_index < report.pre_activation_rounds)
            continue;
        sync.push_back(r.sync_time_s);
    }
    if (sync.empty())
        throw EmptyReport("summarize: all rounds excluded as pre-activation");
    SummaryStats s;
    s.rounds = static_cast<int>(sync.size());
    for (double v : sync) {
        s.total += v;
        s.max = std::max(s.max, v);
    }
    s.min = *std::min_element(sync.begin(), sync.end());
    s.mean = s.total / static_cast<double>(sync.size());
    std::vector<double> sorted = sync;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(sorted.size())));
    s.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
    return s;
}

/// (T_FCFS - T_BS) / T_FCFS on totals; negative when BS is slower, never
/// clamped. nullopt marks a zero FCFS total.
inline std::optional<double> compute_savings(const SummaryStats& fcfs,
                                             const SummaryStats& bs) {
    if (fcfs.total == 0.0)
        return std::nullopt;
    return (fcfs.total - bs.total) / fcfs.total;
}

/// One sweep cell: a (load, involvement) pair aggregated over seeds.
struct ComparisonCell {
    double total_load = 0.0;
    double involvement_percent = 100.0;
    int seeds = 0;
    double mean_sync_fcfs = 0.0;
    double mean_sync_bs = 0.0;
    double savings = 0.0;  // mean of per-seed paired savings
};

struct ComparisonSummary {
    std::vector<ComparisonCell> cells;
};

namespace detail {

inline std::string fixed9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

inline double round9(double v) { return std::round(v * 1e9) / 1e9; }

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

/// Per-round CSV rows, one block per report in caller order:
/// `round,policy,load,involvement,sync_time_s,overrun_s,straggler_id`.
inline std::string rounds_csv(const std::vector<TrainingReport>& reports) {
    std::string out = "round,policy,load,involvement,sync_time_s,overrun_s,straggler_id\n";
    char line[192];
    for (const auto& rep : reports) {
        for (const auto& r : rep.rounds) {
            std::snprintf(line, sizeof(line), "%d,%s,%.6f,%.2f,%s,%s,%d\n",
                          r.round_index, to_string(rep.policy), rep.total_load,
                          rep.involvement_percent, detail::fixed9(r.sync_time_s).c_str(),
                          detail::fixed9(r.overrun_s).c_str(), r.straggler_id);
            out += line;
        }
    }
    return out;
}

/// Summary JSON with stable key order; seconds rounded to 9 decimals before
/// serialization so the byte stream is reproducible.
inline nlohmann::ordered_json summary_json(const std::string& scenario_echo,
                                           const std::vector<std::uint64_t>& seeds,
                                           const ComparisonSummary& cmp,
                                           const std::vector<TrainingReport>& reports) {
    nlohmann::ordered_json j;
    // Fingerprint the scenario substance, not where its outputs land.
    std::string fp_input;
    std::istringstream echo_lines(scenario_echo);
    std::string line;
    while (std::getline(echo_lines, line))
        if (line.rfind("out.dir", 0) != 0)
            fp_input += line + "\n";
    for (auto s : seeds)
        fp_input += "#" + std::to_string(s);
    char fp[24];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a(fp_input)));
    j["fingerprint"] = fp;
    j["seeds"] = seeds;

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : cmp.cells) {
        nlohmann::ordered_json jc;
        jc["load"] = detail::round9(c.total_load);
        jc["involvement_percent"] = detail::round9(c.involvement_percent);
        jc["seeds"] = c.seeds;
        jc["mean_sync_fcfs_s"] = detail::round9(c.mean_sync_fcfs);
        jc["mean_sync_bs_s"] = detail::round9(c.mean_sync_bs);
        jc["savings"] = detail::round9(c.savings);
        cells.push_back(jc);
    }
    j["comparison"] = cells;

    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& rep : reports) {
        const SummaryStats st = summarize(rep);
        nlohmann::ordered_json jr;
        jr["policy"] = to_string(rep.policy);
        jr["seed"] = rep.seed;
        jr["load"] = detail::round9(rep.total_load);
        jr["background_load"] = detail::round9(rep.background_load);
        jr["involvement_percent"] = detail::round9(rep.involvement_percent);
        jr["rounds"] = st.rounds;
        jr["mean_sync_s"] = detail::round9(st.mean);
        jr["min_sync_s"] = detail::round9(st.min);
        jr["max_sync_s"] = detail::round9(st.max);
        jr["p95_sync_s"] = detail::round9(st.p95);
        jr["total_time_s"] = detail::round9(st.total);
        jr["feasible"] = rep.feasible;
        jr["feasibility_slack_s"] = detail::round9(rep.feasibility_slack_s);
        runs.push_back(jr);
    }
    j["runs"] = runs;
    return j;
}

}  // namespace fedslice
