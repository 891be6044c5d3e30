#pragma once

// Experiment runner behind the CLI: single runs, paired FCFS-vs-BS
// comparisons, and load/involvement sweeps, each cell an isolated simulation
// instance. Output files are deterministic for a given (config, seeds).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedslice/fl_engine.hpp"
#include "fedslice/metrics_report.hpp"
#include "fedslice/scenario.hpp"

namespace fedslice {

/// Runs one (scenario, load, involvement, seed, policy) cell.
inline TrainingReport run_cell(Scenario sc, double total_load,
                               double involvement_percent, std::uint64_t seed,
                               Policy policy, bool keep_trace = false) {
    sc.total_load = total_load;
    sc.background_load.reset();
    sc.task.involvement_percent = involvement_percent;
    sc.task.policy = policy;
    sc.seed = seed;
    sc.validate();
    FlEngine engine(sc.pon, sc.task, sc.background_config(), total_load);
    return engine.run_training(keep_trace);
}

struct CompareOutcome {
    ComparisonSummary summary;
    std::vector<TrainingReport> reports;  // cell-key order: load, inv, seed, policy
};

/// Paired FCFS/BS runs over the (loads x involvements x seeds) grid. Both
/// policies in a cell share the seed, hence the background streams, so the
/// savings fraction is free of sampling noise between the two sides.
inline CompareOutcome run_compare(const Scenario& base, const std::vector<double>& loads,
                                  const std::vector<double>& involvements,
                                  const std::vector<std::uint64_t>& seeds) {
    if (loads.empty() || involvements.empty() || seeds.empty())
        throw std::invalid_argument("run_compare: loads/involvements/seeds must be nonempty");
    CompareOutcome out;
    for (double load : loads) {
        for (double inv : involvements) {
            ComparisonCell cell;
            cell.total_load = load;
            cell.involvement_percent = inv;
            double mean_f = 0, mean_b = 0, mean_sav = 0;
            for (std::uint64_t seed : seeds) {
                TrainingReport f = run_cell(base, load, inv, seed, Policy::Fcfs);
                TrainingReport b = run_cell(base, load, inv, seed, Policy::Bs);
                const SummaryStats sf = summarize(f);
                const SummaryStats sb = summarize(b);
                mean_f += sf.mean;
                mean_b += sb.mean;
                if (auto sav = compute_savings(sf, sb))
                    mean_sav += *sav;
                out.reports.push_back(std::move(f));
                out.reports.push_back(std::move(b));
            }
            const double n = static_cast<double>(seeds.size());
            cell.seeds = static_cast<int>(seeds.size());
            cell.mean_sync_fcfs = mean_f / n;
            cell.mean_sync_bs = mean_b / n;
            cell.savings = mean_sav / n;
            out.summary.cells.push_back(cell);
        }
    }
    return out;
}

/// Single-policy sweep over the same grid.
inline std::vector<TrainingReport> run_sweep(const Scenario& base,
                                             const std::vector<double>& loads,
                                             const std::vector<double>& involvements,
                                             const std::vector<std::uint64_t>& seeds,
                                             Policy policy) {
    if (loads.empty() || involvements.empty() || seeds.empty())
        throw std::invalid_argument("run_sweep: loads/involvements/seeds must be nonempty");
    std::vector<TrainingReport> reports;
    for (double load : loads)
        for (double inv : involvements)
            for (std::uint64_t seed : seeds)
                reports.push_back(run_cell(base, load, inv, seed, policy));
    return reports;
}

/// Writes rounds.csv, summary.json and scenario.echo under `dir`.
inline void write_outputs(const std::string& dir, const Scenario& scenario,
                          const std::vector<std::uint64_t>& seeds,
                          const ComparisonSummary& cmp,
                          const std::vector<TrainingReport>& reports) {
    std::filesystem::create_directories(dir);
    const std::string echo = echo_config(scenario);
    {
        std::ofstream f(dir + "/scenario.echo", std::ios::binary);
        f << echo;
    }
    {
        std::ofstream f(dir + "/rounds.csv", std::ios::binary);
        f << rounds_csv(reports);
    }
    {
        std::ofstream f(dir + "/summary.json", std::ios::binary);
        f << summary_json(echo, seeds, cmp, reports).dump(2) << "\n";
    }
}

}  // namespace fedslice
