#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lfpc/actuate.hpp"
#include "lfpc/architecture.hpp"
#include "lfpc/route.hpp"

#include <algorithm>
#include <sstream>

using namespace lfpc;

namespace {

const ChipArchitecture& chip() {
    static ChipArchitecture a = build_lfpc(ArchParams{});
    return a;
}

RoutePlan plan_single_dispense() {
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "MA1", 0).ok);
    return r.plan();
}

} // namespace

TEST_CASE("table text round-trips byte for byte") {
    RoutePlan plan = plan_single_dispense();
    ActuationTable t = compile_table(plan, chip());
    CHECK(t.pin_total == 53);
    CHECK(t.frames.size() == static_cast<size_t>(plan.cycles));
    std::string text = to_text(t);
    ActuationTable back = table_from_text(text);
    CHECK(back.pin_total == t.pin_total);
    CHECK(back.frames == t.frames);
    CHECK(to_text(back) == text);
}

TEST_CASE("malformed table text is rejected with the offending line") {
    CHECK_THROWS_WITH(table_from_text(""), doctest::Contains("line 1"));
    CHECK_THROWS_WITH(table_from_text("cycles x pins y\n"), doctest::Contains("line 1"));
    CHECK_THROWS_WITH(table_from_text("cycles 2 pins 53\n1 2\n"),
                      doctest::Contains("line 3"));
    CHECK_THROWS_WITH(table_from_text("cycles 1 pins 53\n99\n"),
                      doctest::Contains("out of range"));
    CHECK_THROWS_WITH(table_from_text("cycles 1 pins 53\n1 frog\n"),
                      doctest::Contains("malformed"));
}

TEST_CASE("a path traversal drives the three phase pins in cyclic order") {
    RoutePlan plan = plan_single_dispense();
    ActuationTable t = compile_table(plan, chip());
    // dispense fires the reservoir electrode on the first cycle
    CHECK(t.frames[0].count(chip().reservoir("RLI")->pin) == 1);
    // every riding cycle drives the phase pin of the destination cell
    const auto& hist = plan.pos.at("d1");
    for (int cyc = 1; cyc <= 9; ++cyc) {
        PinId dst_pin = chip().pin_at(hist.at(cyc));
        INFO("cycle " << cyc);
        CHECK(t.frames[cyc].count(dst_pin) == 1);
    }
    // phase pins advance cyclically within each path: 2,3,1,2 down the
    // left column, then 4,5,6,4,5 along the highway
    std::vector<PinId> expect = {2, 3, 1, 2, 4, 5, 6, 4, 5};
    for (int cyc = 1; cyc <= 9; ++cyc) CHECK(chip().pin_at(hist.at(cyc)) == expect[cyc - 1]);
}

TEST_CASE("a compiled plan verifies as an exact match") {
    RoutePlan plan = plan_single_dispense();
    ActuationTable t = compile_table(plan, chip());
    VerifyReport rep = verify_table(t, plan, chip());
    CHECK(rep.ok);
    CHECK(rep.message == "exact match");
    CHECK(rep.violations.empty());
    CHECK(rep.divergence_cycle == -1);
}

TEST_CASE("a busy multi-droplet plan still verifies as an exact match") {
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "MA1", 0).ok);
    REQUIRE(route_input(r, "d2", "RLI", "SA2L", 0).ok);
    auto hm = r.merge_at_mixer("d2", "MA1", "d1", "m1", 0);
    auto hx = r.mix("m1", 24, 0);
    auto ho = r.send_to_output("m1", "RRO", 0);
    REQUIRE(r.run_until_done(4000));
    REQUIRE(r.info(hm).status == Router::TaskStatus::Done);
    REQUIRE(r.info(hx).status == Router::TaskStatus::Done);
    REQUIRE(r.info(ho).status == Router::TaskStatus::Done);
    ActuationTable t = compile_table(r.plan(), chip());
    VerifyReport rep = verify_table(t, r.plan(), chip());
    CHECK(rep.ok);
    CHECK(rep.message == "exact match");
}

TEST_CASE("omitting one phase pin makes the replay diverge at that cycle") {
    RoutePlan plan = plan_single_dispense();
    ActuationTable t = compile_table(plan, chip());
    PinId pin5 = chip().pin_at(plan.pos.at("d1").at(5));
    t.frames[5].erase(pin5); // droplet stalls instead of advancing
    VerifyReport rep = verify_table(t, plan, chip());
    CHECK(!rep.ok);
    CHECK(rep.divergence_cycle == 5);
    CHECK(rep.message.find("divergence at cycle 5") != std::string::npos);
}

TEST_CASE("an extra shared pin that tugs a parked droplet is flagged") {
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "SA1L", 0).ok);
    auto h = r.dispense_to_output("w", "RLI", "RLO", 0);
    REQUIRE(r.run_until_done(1000));
    REQUIRE(r.info(h).status == Router::TaskStatus::Done);
    RoutePlan plan = r.plan();
    ActuationTable good = compile_table(plan, chip());
    REQUIRE(verify_table(good, plan, chip()).ok);

    const ModuleSite* s = chip().site("SA1L");
    PinId io_group = chip().pin_at(s->io_cell);   // shared across pockets
    PinId far_group = chip().pin_at(s->far_cell); // shared across pockets
    int last = plan.cycles - 1;
    REQUIRE(plan.pos.at("d1").at(last) == s->hold_cell);
    REQUIRE(good.frames[last].count(io_group) == 0);

    SUBCASE("single tug drags the droplet off its pocket") {
        ActuationTable bad = good;
        bad.frames[last].insert(io_group);
        VerifyReport rep = verify_table(bad, plan, chip());
        CHECK(!rep.ok);
        CHECK(rep.divergence_cycle == last);
    }
    SUBCASE("opposed tug holds the droplet but logs an ambiguous pull") {
        ActuationTable bad = good;
        bad.frames[last].insert(io_group);
        bad.frames[last].insert(far_group);
        VerifyReport rep = verify_table(bad, plan, chip());
        CHECK(!rep.ok);
        bool flagged = false;
        for (const auto& v : rep.violations)
            if (v.kind == "ambiguous-pull" && v.droplet == "d1") flagged = true;
        CHECK(flagged);
    }
}

TEST_CASE("a stored droplet is anchored whenever its pocket group fires") {
    // d1 rests in one pocket while d2 is steered into another pocket that
    // shares the io-group pin; the io pulses must not move d1.
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "SA1L", 0).ok);
    REQUIRE(route_input(r, "d2", "RLI", "SA2L", 0).ok);
    RoutePlan plan = r.plan();
    const ModuleSite* s = chip().site("SA1L");
    PinId io_group = chip().pin_at(s->io_cell);
    PinId d1_hold = chip().pin_at(s->hold_cell);
    ActuationTable t = compile_table(plan, chip());
    bool io_fired_while_parked = false;
    for (int cyc = 0; cyc < plan.cycles; ++cyc) {
        auto it = plan.pos.at("d1").find(cyc);
        if (it == plan.pos.at("d1").end() || !(it->second == s->hold_cell)) continue;
        if (t.frames[cyc].count(io_group)) {
            io_fired_while_parked = true;
            INFO("cycle " << cyc);
            CHECK(t.frames[cyc].count(d1_hold) == 1); // anchored
        }
    }
    CHECK(io_fired_while_parked); // the hazard actually occurred
    // and the stored droplet never budged
    VerifyReport rep = verify_table(t, plan, chip());
    CHECK(rep.ok);
}

TEST_CASE("trace text and side-band events round-trip through reconstruction") {
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "SA1L", 0).ok);
    auto hs = r.split_at_pocket("d1", "c1", "c2", 0);
    auto h1 = r.move_to_site("c1", "MA1", 0);
    REQUIRE(r.run_until_done(4000));
    REQUIRE(r.info(hs).status == Router::TaskStatus::Done);
    REQUIRE(r.info(h1).status == Router::TaskStatus::Done);
    RoutePlan plan = r.plan();
    std::ostringstream os;
    for (const auto& line : trace_lines(plan)) os << line << '\n';
    auto hist = parse_trace(os.str());
    CHECK(hist.size() == plan.pos.size());
    for (const auto& [id, m] : plan.pos) {
        REQUIRE(hist.count(id) == 1);
        CHECK(hist.at(id) == m);
    }
    SimScript back = script_from_history(hist, chip(), plan.cycles);
    CHECK(back.appears.size() == plan.script.appears.size());
    CHECK(back.vanishes.size() == plan.script.vanishes.size());
    CHECK(back.merges.size() == plan.script.merges.size());
    CHECK(back.splits.size() == plan.script.splits.size());
    for (size_t i = 0; i < back.appears.size(); ++i) {
        CHECK(back.appears[i].cycle == plan.script.appears[i].cycle);
        CHECK(back.appears[i].id == plan.script.appears[i].id);
        CHECK(back.appears[i].at == plan.script.appears[i].at);
        CHECK(back.appears[i].reservoir_pin == plan.script.appears[i].reservoir_pin);
    }
    for (size_t i = 0; i < back.splits.size(); ++i) {
        CHECK(back.splits[i].parent == plan.script.splits[i].parent);
        CHECK(back.splits[i].child_io == plan.script.splits[i].child_io);
        CHECK(back.splits[i].child_far == plan.script.splits[i].child_far);
    }
    // a replay driven purely by reconstructed events matches the plan
    ActuationTable t = compile_table(plan, chip());
    SimTrace sim = simulate_table(t, chip(), back);
    CHECK(sim.violations.empty());
    CHECK(sim.pos == plan.pos);
}

TEST_CASE("an end-to-end collection replays to the exact recorded history") {
    Router r(chip());
    REQUIRE(route_input(r, "d1", "RLI", "MA1", 0).ok);
    REQUIRE(route_output(r, "d1", "RRO", 0).ok);
    RoutePlan plan = r.plan();
    ActuationTable t = compile_table(plan, chip());
    SimTrace sim = simulate_table(t, chip(), plan.script);
    CHECK(sim.violations.empty());
    CHECK(sim.pos == plan.pos);
    // reconstruction sees the collection as a vanish at the outlet
    SimScript back = script_from_history(plan.pos, chip(), plan.cycles);
    REQUIRE(back.vanishes.size() == 1);
    CHECK(back.vanishes[0].id == "d1");
    CHECK(back.vanishes[0].at == chip().reservoir("RRO")->mouth_cell);
    CHECK(back.vanishes[0].reservoir_pin == chip().reservoir("RRO")->pin);
}
