#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedslice/pon_model.hpp"
#include "fedslice/slice_planner.hpp"
#include "oracles.hpp"

using namespace fedslice;
using Catch::Approx;

namespace {

PonConfig default_pon() {
    PonConfig cfg;
    cfg.validate();
    return cfg;
}

CohortInfo two_client_cohort() {
    CohortInfo info;
    info.clients = {{0, 0, 1.0, 26.416e6}, {1, 1, 5.0, 26.416e6}};
    info.t_current = SimTime{0.0};
    info.t_round_s = 8.0;
    info.model_bits = 26.416e6;
    info.h = 1;
    info.total_rounds = 10;
    return info;
}

}  // namespace

TEST_CASE("delta is download plus compute, sorted by descending compute time") {
    PonConfig pon = default_pon();
    CohortInfo info;
    info.clients = {{0, 0, 1.0, 1e6}, {1, 1, 5.0, 1e6}, {2, 2, 3.0, 1e6}};
    info.model_bits = 26.416e6;
    info.total_rounds = 3;

    auto table = compute_delta(info, pon);
    REQUIRE(table.entries.size() == 3);
    CHECK(table.entries[0].client.compute_time_s == 5.0);
    CHECK(table.entries[1].client.compute_time_s == 3.0);
    CHECK(table.entries[2].client.compute_time_s == 1.0);
    CHECK(table.entries[0].delta == Approx(5.0027416));
    CHECK(table.t_min == Approx(1.0027416));

    SECTION("no download cost at zero model and zero distance") {
        pon.uniform_distance_km = 0.0;
        info.model_bits = 0.0;
        auto t2 = compute_delta(info, pon);
        CHECK(t2.entries.back().delta == Approx(1.0));
    }
    SECTION("empty cohort is rejected") {
        info.clients.clear();
        CHECK_THROWS_AS(compute_delta(info, pon), EmptyCohort);
    }
}

TEST_CASE("nabla is the max-delta client's serialization plus propagation") {
    PonConfig pon = default_pon();
    CohortInfo info = two_client_cohort();
    auto table = compute_delta(info, pon);
    CHECK(estimate_nabla(table, pon) == Approx(2.7416e-3));

    SECTION("zero distance drops the propagation term") {
        pon.uniform_distance_km = 0.0;
        auto t2 = compute_delta(info, pon);
        CHECK(estimate_nabla(t2, pon) == Approx(2.6416e-3));
    }
    SECTION("delta ties break toward the lower client id") {
        CohortInfo tie;
        tie.clients = {{7, 0, 2.0, 1e7}, {3, 1, 2.0, 2e7}};
        tie.total_rounds = 3;
        auto t3 = compute_delta(tie, pon);
        // client 3 wins the tie, so nabla uses its 2e7 bits
        CHECK(estimate_nabla(t3, pon) == Approx(2e7 / 1e10 + 1e-4));
    }
}

TEST_CASE("two-client worked example") {
    PonConfig pon = default_pon();
    CohortInfo info = two_client_cohort();
    SliceSpec spec = plan_slice(info, pon);

    CHECK(spec.tau == Approx(4.0027416).epsilon(1e-9));
    CHECK(spec.bandwidth_bps == Approx(13.199e6).epsilon(5e-6));
    CHECK_FALSE(spec.capped);
    CHECK(spec.t_start.seconds == Approx(9.0027416).epsilon(1e-9));
    CHECK(spec.t_end.seconds == Approx(13.0054832).epsilon(1e-9));
    CHECK(spec.t_end.seconds - spec.t_start.seconds == Approx(spec.tau));
    REQUIRE(spec.upload_order.size() == 2);
    CHECK(spec.upload_order[0].client_id == 0);  // ascending delta
    CHECK(spec.upload_order[1].client_id == 1);

    SECTION("feasibility at T_round = 8 with ~1s slack") {
        auto v = validate_round_threshold(info, spec, pon);
        CHECK(v.feasible);
        CHECK(v.slack_s == Approx(0.9958876).epsilon(1e-6));
        CHECK(v.worst_client_id == 1);
    }
    SECTION("infeasible at T_round = 6 with the remedy note") {
        info.t_round_s = 6.0;
        auto v = validate_round_threshold(info, spec, pon);
        CHECK_FALSE(v.feasible);
        CHECK(v.slack_s == Approx(-1.0041124).epsilon(1e-6));
        CHECK(v.note.find("compute time") != std::string::npos);
    }
    SECTION("zero aggregation time leaves the verdict unchanged") {
        auto v0 = validate_round_threshold(info, spec, pon, 0.0);
        auto v1 = validate_round_threshold(info, spec, pon);
        CHECK(v0.feasible == v1.feasible);
        CHECK(v0.slack_s == v1.slack_s);
    }
}

TEST_CASE("single client at zero distance forces B = C exactly") {
    PonConfig pon = default_pon();
    pon.uniform_distance_km = 0.0;
    CohortInfo info;
    info.clients = {{0, 0, 2.0, 26.416e6}};
    info.model_bits = 0.0;
    info.total_rounds = 3;
    SliceSpec spec = plan_slice(info, pon);
    CHECK(spec.tau == Approx(26.416e6 / 1e10));
    CHECK(spec.bandwidth_bps == Approx(1e10));
    CHECK_FALSE(spec.capped);  // demand equals C, the cap does not bind
}

TEST_CASE("oversubscribed cohort is capped at C") {
    PonConfig pon = default_pon();
    CohortInfo info;
    info.clients.reserve(3072);
    for (int i = 0; i < 3072; ++i) {
        const double t_ud = 1.0 + 4.0 * static_cast<double>(i) / 3071.0;
        info.clients.push_back({i, i % 128, t_ud, 26.416e6});
    }
    info.total_rounds = 3;
    SliceSpec spec = plan_slice(info, pon);
    CHECK(spec.capped);
    CHECK(spec.bandwidth_bps == 1e10);
    CHECK(spec.total_update_bits() / spec.tau == Approx(2.0276e10).epsilon(1e-3));
}

TEST_CASE("identical deltas still open a window thanks to nabla") {
    // tau == 0 needs nabla == 0, which positive update sizes rule out; the
    // DegenerateWindow guard is unreachable through legal profiles.
    PonConfig pon = default_pon();
    pon.uniform_distance_km = 0.0;
    CohortInfo info;
    info.clients = {{0, 0, 1.0, 1e6}, {1, 1, 1.0, 1e6}};
    info.model_bits = 0.0;
    info.total_rounds = 3;
    SliceSpec spec = plan_slice(info, pon);
    CHECK(spec.tau == Approx(1e6 / 1e10));
    CHECK(spec.t_end.seconds > spec.t_start.seconds);
}

TEST_CASE("greedy schedule matches the worked example including overrun") {
    PonConfig pon = default_pon();
    CohortInfo info = two_client_cohort();
    SliceSpec spec = plan_slice(info, pon);
    UploadSchedule sched = build_upload_schedule(spec, info, pon);

    REQUIRE(sched.slots.size() == 2);
    CHECK(sched.slots[0].start == Approx(1.0027416).epsilon(1e-9));
    CHECK(sched.slots[0].end == Approx(3.0041124).epsilon(1e-9));
    CHECK(sched.slots[1].start == Approx(5.0027416).epsilon(1e-9));
    CHECK(sched.slots[1].end == Approx(7.0041124).epsilon(1e-9));
    CHECK(sched.overrun_s == Approx(1.9986292).epsilon(1e-6));
    // Here the overrun stays below one slot length, as the window arithmetic
    // promises for spread-out readiness.
    CHECK(sched.overrun_s <= 26.416e6 / spec.bandwidth_bps);
}

TEST_CASE("single-client schedule is ready-time plus service") {
    PonConfig pon = default_pon();
    CohortInfo info;
    info.clients = {{0, 0, 2.0, 26.416e6}};
    info.total_rounds = 3;
    SliceSpec spec = plan_slice(info, pon);
    UploadSchedule sched = build_upload_schedule(spec, info, pon);
    REQUIRE(sched.slots.size() == 1);
    CHECK(sched.slots[0].start == Approx(2.0027416));
    CHECK(sched.slots[0].end == Approx(2.0027416 + 26.416e6 / spec.bandwidth_bps));
}

TEST_CASE("128 spread clients: slots chain against a scripted greedy oracle") {
    PonConfig pon = default_pon();
    CohortInfo info;
    oracle::Net net;
    net.distance_km.assign(128, 20.0L);
    std::vector<oracle::Client> ocl;
    for (int i = 0; i < 128; ++i) {
        const double t_ud = 1.0 + 4.0 * static_cast<double>(i) / 127.0;
        info.clients.push_back({i, i, t_ud, 26.416e6});
        ocl.push_back({i, i, t_ud, 26.416e6});
    }
    info.total_rounds = 12;
    SliceSpec spec = plan_slice(info, pon);
    UploadSchedule sched = build_upload_schedule(spec, info, pon);

    auto oplan = oracle::plan(net, ocl, 26.416e6L, 0.0L, 1, 8.0L);
    auto oslots = oracle::greedy_slots(oplan.order, ocl, net, 26.416e6L,
                                       oplan.bandwidth, oplan.t_min);
    REQUIRE(sched.slots.size() == oslots.size());
    for (std::size_t i = 0; i < oslots.size(); ++i) {
        CHECK(sched.slots[i].client_id == oslots[i].id);
        CHECK(sched.slots[i].start ==
              Approx(static_cast<double>(oslots[i].start)).margin(1e-9));
        CHECK(sched.slots[i].end ==
              Approx(static_cast<double>(oslots[i].end)).margin(1e-9));
    }
    // Last slot ends within one service time of the window end.
    CHECK(sched.makespan <= spec.t_max_offset + 26.416e6 / spec.bandwidth_bps);
}

TEST_CASE("planner properties over randomized cohorts") {
    PonConfig pon = default_pon();
    oracle::CohortGen gen(2024);

    for (int iter = 0; iter < 2000; ++iter) {
        const int n = gen.uniform_int(2, 64);
        CohortInfo info;
        for (int i = 0; i < n; ++i)
            info.clients.push_back({i, gen.uniform_int(0, 127),
                                    gen.uniform(0.1, 10.0), gen.uniform(1e6, 1e8)});
        info.t_current = SimTime{gen.uniform(0.0, 100.0)};
        info.t_round_s = gen.uniform(1.0, 20.0);
        info.h = gen.uniform_int(1, 5);
        info.total_rounds = info.h + gen.uniform_int(1, 5);
        SliceSpec spec = plan_slice(info, pon);

        // B <= C, capped iff demand exceeded C.
        CHECK(spec.bandwidth_bps <= pon.uplink_bps);
        const double demand = spec.total_update_bits() / spec.tau;
        CHECK(spec.capped == (demand > pon.uplink_bps));

        // Window width is exactly tau.
        CHECK(spec.t_end.seconds - spec.t_start.seconds == Approx(spec.tau).margin(1e-9));

        // Uncapped: reserved volume equals training volume.
        if (!spec.capped)
            CHECK(spec.bandwidth_bps * spec.tau ==
                  Approx(spec.total_update_bits()).epsilon(1e-12));

        // h -> h+1 shifts both window edges by exactly T_round.
        CohortInfo shifted = info;
        shifted.h = info.h + 1;
        shifted.total_rounds = info.total_rounds + 1;
        SliceSpec spec2 = plan_slice(shifted, pon);
        CHECK(spec2.t_start.seconds - spec.t_start.seconds ==
              Approx(info.t_round_s).margin(1e-9));
        CHECK(spec2.t_end.seconds - spec.t_end.seconds ==
              Approx(info.t_round_s).margin(1e-9));

        // Permuting the client list changes nothing (ties ordered by id).
        CohortInfo permuted = info;
        std::shuffle(permuted.clients.begin(), permuted.clients.end(), gen.rng);
        SliceSpec spec3 = plan_slice(permuted, pon);
        CHECK(spec3.bandwidth_bps == spec.bandwidth_bps);
        CHECK(spec3.t_start.seconds == spec.t_start.seconds);
        CHECK(spec3.t_end.seconds == spec.t_end.seconds);
        REQUIRE(spec3.upload_order.size() == spec.upload_order.size());
        for (std::size_t i = 0; i < spec.upload_order.size(); ++i)
            CHECK(spec3.upload_order[i].client_id == spec.upload_order[i].client_id);

        // Scaling every M by k leaves t_s alone and moves tau/t_e/B per the
        // formulas; the oracle recomputes them from first principles.
        if (!spec.capped) {
            const double k = gen.uniform(0.5, 1.5);
            CohortInfo scaled = info;
            std::vector<oracle::Client> ocl;
            oracle::Net net;
            net.distance_km.assign(128, 20.0L);
            for (auto& c : scaled.clients) {
                c.update_bits *= k;
                ocl.push_back({c.client_id, c.onu, c.compute_time_s, c.update_bits});
            }
            SliceSpec spec4 = plan_slice(scaled, pon);
            auto oplan = oracle::plan(net, ocl, info.model_bits,
                                      info.t_current.seconds, info.h, info.t_round_s);
            CHECK(spec4.t_start.seconds == Approx(spec.t_start.seconds).margin(1e-9));
            CHECK(spec4.tau == Approx(static_cast<double>(oplan.tau)).margin(1e-9));
            CHECK(spec4.t_end.seconds ==
                  Approx(static_cast<double>(oplan.t_end)).margin(1e-9));
            if (!oplan.capped)
                CHECK(spec4.bandwidth_bps ==
                      Approx(k * spec.total_update_bits() /
                             static_cast<double>(oplan.tau)).epsilon(1e-9));
        }

        // Greedy schedule invariants.
        UploadSchedule sched = build_upload_schedule(spec, info, pon);
        double prev_end = 0.0;
        double service_sum = 0.0;
        DeltaTable table = compute_delta(info, pon);
        for (std::size_t i = 0; i < sched.slots.size(); ++i) {
            const auto& slot = sched.slots[i];
            CHECK(slot.start >= prev_end - 1e-12);  // non-overlapping, ordered
            double delta_i = 0.0;
            for (const auto& e : table.entries)
                if (e.client.client_id == slot.client_id)
                    delta_i = e.delta;
            CHECK(slot.start >= delta_i - 1e-12);  // never before readiness
            service_sum += slot.end - slot.start;
            prev_end = slot.end;
        }
        CHECK(service_sum ==
              Approx(spec.total_update_bits() / spec.bandwidth_bps).epsilon(1e-9));
    }
}
