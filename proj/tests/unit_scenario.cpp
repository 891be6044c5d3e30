#include <catch2/catch_amalgamated.hpp>

#include "fedslice/scenario.hpp"

using namespace fedslice;
using Catch::Approx;

TEST_CASE("a minimal config yields the full default scenario") {
    Scenario sc = parse_config_text("fl.policy = bs\n");
    CHECK(sc.pon.num_onus == 128);
    CHECK(sc.pon.uplink_bps == 1e10);
    CHECK(sc.pon.downlink_bps == 1e10);
    CHECK(sc.pon.uniform_distance_km == 20.0);
    CHECK(sc.task.model_bits == Approx(26.416e6));
    CHECK(sc.task.compute_lo_s == 1.0);
    CHECK(sc.task.compute_hi_s == 5.0);
    CHECK(sc.task.policy == Policy::Bs);
    CHECK(sc.resolved_background_load() == 0.0);
}

TEST_CASE("unknown keys are rejected by name") {
    try {
        parse_config_text("foo = 1\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("foo") != std::string::npos);
    }
}

TEST_CASE("bad values carry the line number") {
    try {
        parse_config_text("fl.policy = bs\nfl.t_round_s = abc\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("total load below the training load is inconsistent") {
    // 128 clients x 26.416e6 bits over 6 s at 10 Gbps is a ~0.056 load.
    CHECK_THROWS_AS(parse_config_text("traffic.total_load = 0.03\n"),
                    ConsistencyError);
    // Total load 0 means no background at all.
    Scenario zero = parse_config_text("traffic.total_load = 0\n");
    CHECK(zero.resolved_background_load() == 0.0);
    // A comfortable total load resolves to total minus training.
    Scenario sc = parse_config_text("traffic.total_load = 0.8\n");
    CHECK(sc.resolved_background_load() == Approx(0.8 - sc.training_load()));
    CHECK(sc.training_load() == Approx(0.0563541).epsilon(1e-4));
}

TEST_CASE("total and background load are mutually exclusive") {
    CHECK_THROWS_AS(
        parse_config_text("traffic.total_load = 0.5\ntraffic.background_load = 0.1\n"),
        ConsistencyError);
}

TEST_CASE("the scenario echo round-trips") {
    Scenario sc = parse_config_text(
        "fl.policy = fcfs\n"
        "fl.rounds = 7\n"
        "fl.h = 2\n"
        "fl.involvement_percent = 40\n"
        "traffic.total_load = 0.55\n"
        "traffic.coarse = true\n"
        "traffic.seed = 99\n"
        "pon.polling_cycle_s = 2e-3\n"
        "out.dir = out/x\n");
    const std::string echo = echo_config(sc);
    Scenario back = parse_config_text(echo);
    CHECK(echo_config(back) == echo);
    CHECK(back.task.total_rounds == sc.task.total_rounds);
    CHECK(back.task.h == 2);
    CHECK(back.seed == 99);
    CHECK(back.use_coarse);
    CHECK(back.pon.polling_cycle_s == 2e-3);
    CHECK(back.task.involvement_percent == 40.0);
}

TEST_CASE("json configs encode the same keys") {
    Scenario sc = parse_config_text(R"({
        "fl": {"policy": "bs", "rounds": 4, "t_round_s": 8.0},
        "traffic": {"total_load": 0.3, "seed": 7},
        "pon": {"num_onus": 64}
    })");
    CHECK(sc.task.policy == Policy::Bs);
    CHECK(sc.task.total_rounds == 5);  // h=1 + 4 post-activation rounds
    CHECK(sc.task.t_round_s == 8.0);
    CHECK(sc.pon.num_onus == 64);
    CHECK(sc.seed == 7);
    CHECK(*sc.total_load == 0.3);

    CHECK_THROWS_AS(parse_config_text(R"({"nope": 1})"), ParseError);
}

TEST_CASE("comments and blank lines are ignored") {
    Scenario sc = parse_config_text(
        "# a comment\n"
        "\n"
        "fl.rounds = 3   # trailing comment\n");
    CHECK(sc.task.total_rounds == 4);
}
