// fedslice: discrete-event experiments for federated-learning rounds over a
// TDM PON, comparing the bandwidth-slicing planner against the FCFS baseline.
//
//   fedslice run      one training run (policy from config or --policy)
//   fedslice compare  paired FCFS/BS runs over loads x involvements x seeds
//   fedslice sweep    single-policy grid
//   fedslice plan     print the planned slice for the configured cohort
//
// Outputs land under --out: rounds.csv, summary.json, scenario.echo.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedslice/experiment.hpp"
#include "fedslice/fl_engine.hpp"
#include "fedslice/metrics_report.hpp"
#include "fedslice/scenario.hpp"

namespace {

using namespace fedslice;

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty())
                out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

// "1,2,5" or "1..10"
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const auto lo = std::stoull(text.substr(0, dots));
        const auto hi = std::stoull(text.substr(dots + 2));
        for (auto s = lo; s <= hi; ++s)
            out.push_back(s);
        return out;
    }
    std::string cur;
    for (char c : text + ",") {
        if (c == ',') {
            if (!cur.empty())
                out.push_back(std::stoull(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds;
    std::optional<double> load;
    std::optional<double> involvement;
    std::optional<std::string> policy;
    bool coarse = false;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "scenario config file (key=value or JSON)");
    cmd->add_option("--seed", f.seed, "background-traffic seed");
    cmd->add_option("--rounds", f.rounds, "post-activation rounds to simulate");
    cmd->add_option("--load", f.load, "total traffic load in [0,1)");
    cmd->add_option("--involvement", f.involvement, "client involvement percent (0,100]");
    cmd->add_option("--policy", f.policy, "fcfs or bs")
        ->check(CLI::IsMember({"fcfs", "bs"}));
    cmd->add_flag("--coarse", f.coarse, "coarse background units for fast sweeps");
    cmd->add_option("--out", f.out_dir, "output directory");
}

Scenario load_scenario(const CommonFlags& f) {
    Scenario sc = f.config_path.empty() ? Scenario{} : parse_config(f.config_path);
    if (f.seed)
        sc.seed = *f.seed;
    if (f.rounds)
        sc.task.total_rounds = sc.task.h + *f.rounds;
    if (f.load) {
        sc.total_load = *f.load;
        sc.background_load.reset();
    }
    if (f.involvement)
        sc.task.involvement_percent = *f.involvement;
    if (f.policy)
        sc.task.policy = *f.policy == "bs" ? Policy::Bs : Policy::Fcfs;
    if (f.coarse)
        sc.use_coarse = true;
    if (f.out_dir)
        sc.out_dir = *f.out_dir;
    sc.validate();
    return sc;
}

nlohmann::ordered_json slice_json(const SliceSpec& spec) {
    nlohmann::ordered_json j;
    j["t_start_s"] = spec.t_start.seconds;
    j["t_end_s"] = spec.t_end.seconds;
    j["bandwidth_bps"] = spec.bandwidth_bps;
    j["capped"] = spec.capped;
    j["tau_s"] = spec.tau;
    j["nabla_s"] = spec.nabla;
    j["t_min_offset_s"] = spec.t_min_offset;
    j["t_max_offset_s"] = spec.t_max_offset;
    nlohmann::ordered_json order = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < spec.upload_order.size(); ++i) {
        nlohmann::ordered_json c;
        c["client_id"] = spec.upload_order[i].client_id;
        c["onu"] = spec.upload_order[i].onu;
        c["slot_s"] = spec.slot_seconds[i];
        order.push_back(c);
    }
    j["upload_order"] = order;
    return j;
}

int cmd_plan(const CommonFlags& flags) {
    Scenario sc = load_scenario(flags);
    const auto cohort =
        select_cohort(make_population(sc.pon, sc.task), sc.task.involvement_percent);
    CohortInfo info;
    info.clients = cohort;
    info.t_round_s = sc.task.t_round_s;
    info.model_bits = sc.task.model_bits;
    info.h = sc.task.h;
    info.total_rounds = sc.task.total_rounds;
    const SliceSpec spec = plan_slice(info, sc.pon);
    const FeasibilityVerdict verdict =
        validate_round_threshold(info, spec, sc.pon, sc.task.t_aggregation_s);
    nlohmann::ordered_json j = slice_json(spec);
    j["feasible"] = verdict.feasible;
    j["feasibility_slack_s"] = verdict.slack_s;
    if (!verdict.note.empty())
        j["note"] = verdict.note;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_run(const CommonFlags& flags) {
    Scenario sc = load_scenario(flags);
    TrainingReport rep = run_cell(sc, sc.effective_total_load(),
                                  sc.task.involvement_percent, sc.seed,
                                  sc.task.policy);
    ComparisonSummary cmp;
    write_outputs(sc.out_dir, sc, {sc.seed}, cmp, {rep});
    const SummaryStats st = summarize(rep);
    std::printf("%s load=%.3f involvement=%.1f rounds=%d mean_sync=%.6f total=%.6f\n",
                to_string(rep.policy), rep.total_load, rep.involvement_percent,
                st.rounds, st.mean, st.total);
    if (!sc.accuracy_trace_path.empty()) {
        const AccuracyTrace trace = load_accuracy_trace(sc.accuracy_trace_path);
        const double rounds_done = static_cast<double>(rep.rounds.size());
        std::printf("accuracy after %d rounds: %.4f (saturates at %.4f)\n",
                    static_cast<int>(rounds_done),
                    accuracy_lookup(trace, rep.involvement_percent, rounds_done),
                    accuracy_lookup(trace, rep.involvement_percent, 1e12));
    }
    std::printf("outputs: %s\n", sc.out_dir.c_str());
    return 0;
}

int cmd_compare_or_sweep(const CommonFlags& flags, bool loads_given,
                         const std::string& loads_text, bool involvements_given,
                         const std::string& involvements_text, bool seeds_given,
                         const std::string& seeds_text, bool paired) {
    Scenario sc = load_scenario(flags);
    std::vector<double> loads = loads_given
                                    ? parse_double_list(loads_text)
                                    : std::vector<double>{sc.effective_total_load()};
    std::vector<double> involvements =
        involvements_given ? parse_double_list(involvements_text)
                           : std::vector<double>{sc.task.involvement_percent};
    std::vector<std::uint64_t> seeds = seeds_given
                                           ? parse_seed_list(seeds_text)
                                           : std::vector<std::uint64_t>{sc.seed};
    if (loads.empty() || involvements.empty() || seeds.empty()) {
        std::cerr << "error: loads, involvements and seeds must be nonempty\n";
        return 2;
    }

    if (paired) {
        CompareOutcome out = run_compare(sc, loads, involvements, seeds);
        write_outputs(sc.out_dir, sc, seeds, out.summary, out.reports);
        for (const auto& c : out.summary.cells)
            std::printf("load=%.3f involvement=%.1f fcfs=%.6f bs=%.6f savings=%.4f\n",
                        c.total_load, c.involvement_percent, c.mean_sync_fcfs,
                        c.mean_sync_bs, c.savings);
        std::printf("outputs: %s\n", sc.out_dir.c_str());
        return 0;
    }
    auto reports = run_sweep(sc, loads, involvements, seeds, sc.task.policy);
    ComparisonSummary empty;
    write_outputs(sc.out_dir, sc, seeds, empty, reports);
    for (const auto& rep : reports) {
        const SummaryStats st = summarize(rep);
        std::printf("%s load=%.3f involvement=%.1f seed=%llu mean_sync=%.6f\n",
                    to_string(rep.policy), rep.total_load, rep.involvement_percent,
                    static_cast<unsigned long long>(rep.seed), st.mean);
    }
    std::printf("outputs: %s\n", sc.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedslice: bandwidth slicing vs FCFS for federated learning over a TDM PON"};
    app.require_subcommand(1);

    CommonFlags run_flags, cmp_flags, sweep_flags, plan_flags;
    std::string loads_text, involvements_text, seeds_text;
    std::string sweep_loads, sweep_involvements, sweep_seeds;

    CLI::App* run = app.add_subcommand("run", "one training run");
    add_common(run, run_flags);

    CLI::App* cmp = app.add_subcommand("compare", "paired FCFS/BS comparison");
    add_common(cmp, cmp_flags);
    auto* cmp_loads = cmp->add_option("--loads", loads_text, "comma-separated total loads");
    auto* cmp_invs =
        cmp->add_option("--involvements", involvements_text, "comma-separated percents");
    auto* cmp_seeds = cmp->add_option("--seeds", seeds_text, "comma list or lo..hi range");

    CLI::App* sweep = app.add_subcommand("sweep", "single-policy grid");
    add_common(sweep, sweep_flags);
    auto* sw_loads = sweep->add_option("--loads", sweep_loads, "comma-separated total loads");
    auto* sw_invs =
        sweep->add_option("--involvements", sweep_involvements, "comma-separated percents");
    auto* sw_seeds = sweep->add_option("--seeds", sweep_seeds, "comma list or lo..hi range");

    CLI::App* plan = app.add_subcommand("plan", "print the slice for the cohort");
    add_common(plan, plan_flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(run_flags);
        if (cmp->parsed())
            return cmd_compare_or_sweep(cmp_flags, cmp_loads->count() > 0, loads_text,
                                        cmp_invs->count() > 0, involvements_text,
                                        cmp_seeds->count() > 0, seeds_text, true);
        if (sweep->parsed())
            return cmd_compare_or_sweep(sweep_flags, sw_loads->count() > 0, sweep_loads,
                                        sw_invs->count() > 0, sweep_involvements,
                                        sw_seeds->count() > 0, sweep_seeds, false);
        if (plan->parsed())
            return cmd_plan(plan_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
