#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lfpc/architecture.hpp"
#include "lfpc/motion.hpp"

#include <algorithm>

using namespace lfpc;

namespace {

const ChipArchitecture& chip() {
    static ChipArchitecture a = build_lfpc(ArchParams{});
    return a;
}

std::set<PinId> pins_for(std::initializer_list<Cell> cells) {
    std::set<PinId> f;
    for (const Cell& c : cells) f.insert(chip().pin_at(c));
    return f;
}

bool has_kind(const StepResult& r, const std::string& kind) {
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const Violation& v) { return v.kind == kind; });
}

} // namespace

TEST_CASE("droplet on a driven electrode stays put even next to another driven cell") {
    std::map<std::string, Cell> d{{"a", {5, 4}}};
    auto r = step_movement(chip(), pins_for({{5, 4}, {5, 5}}), d, 0, {});
    CHECK(r.violations.empty());
    CHECK(r.next.at("a") == Cell{5, 4});
}

TEST_CASE("droplet with exactly one driven neighbour moves onto it") {
    std::map<std::string, Cell> d{{"a", {5, 4}}};
    auto r = step_movement(chip(), pins_for({{5, 5}}), d, 0, {});
    CHECK(r.violations.empty());
    CHECK(r.next.at("a") == Cell{5, 5});
}

TEST_CASE("droplet with no driven neighbours stays put") {
    std::map<std::string, Cell> d{{"a", {5, 4}}};
    auto r = step_movement(chip(), {}, d, 0, {});
    CHECK(r.violations.empty());
    CHECK(r.next.at("a") == Cell{5, 4});
}

TEST_CASE("two driven neighbours of an undriven droplet are flagged as an ambiguous pull") {
    std::map<std::string, Cell> d{{"a", {5, 4}}};
    auto r = step_movement(chip(), pins_for({{5, 3}, {5, 5}}), d, 0, {});
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "ambiguous-pull");
    CHECK(r.next.at("a") == Cell{5, 4}); // held for diagnosis
}

TEST_CASE("marked split with the exact opposing pattern yields two children") {
    const ModuleSite* s = chip().site("SA1L");
    REQUIRE(s);
    std::map<std::string, Cell> d{{"p", s->hold_cell}};
    SimScript script;
    script.splits.push_back({0, "p", "c1", "c2", s->hold_cell, s->io_cell, s->far_cell});
    auto r = step_movement(chip(), pins_for({s->io_cell, s->far_cell}), d, 0, script);
    CHECK(r.violations.empty());
    CHECK(r.next.count("p") == 0);
    CHECK(r.next.at("c1") == s->io_cell);
    CHECK(r.next.at("c2") == s->far_cell);
}

TEST_CASE("split misfires when the parent electrode is still driven") {
    const ModuleSite* s = chip().site("SA1L");
    REQUIRE(s);
    std::map<std::string, Cell> d{{"p", s->hold_cell}};
    SimScript script;
    script.splits.push_back({0, "p", "c1", "c2", s->hold_cell, s->io_cell, s->far_cell});
    auto r = step_movement(chip(), pins_for({s->io_cell, s->far_cell, s->hold_cell}), d, 0,
                           script);
    CHECK(has_kind(r, "split-misfire"));
    CHECK(r.next.count("p") == 1); // parent survives a misfire
}

TEST_CASE("a scripted merge joins the pair into the result droplet") {
    std::map<std::string, Cell> d{{"a", {5, 4}}, {"b", {5, 5}}};
    SimScript script;
    script.merges.push_back({0, "a", "b", "m", {5, 4}});
    // drive a's cell (it stays) and pull b onto it
    auto r = step_movement(chip(), pins_for({{5, 4}}), d, 0, script);
    CHECK(r.violations.empty());
    CHECK(r.next.count("a") == 0);
    CHECK(r.next.count("b") == 0);
    CHECK(r.next.at("m") == Cell{5, 4});
}

TEST_CASE("an unscripted co-location is a collision") {
    std::map<std::string, Cell> d{{"a", {5, 4}}, {"b", {5, 5}}};
    auto r = step_movement(chip(), pins_for({{5, 4}}), d, 0, {});
    CHECK(has_kind(r, "collision"));
    CHECK(r.next.at("a") == Cell{5, 4});
    CHECK(r.next.at("b") == Cell{5, 5}); // parked back
}

TEST_CASE("resting droplets closer than the safety gap are flagged") {
    std::map<std::string, Cell> d{{"a", {5, 4}}, {"b", {4, 4}}};
    auto r = step_movement(chip(), {}, d, 0, {});
    CHECK(has_kind(r, "spacing"));
}

TEST_CASE("the final approach of a scripted merge is excused from the safety gap") {
    std::map<std::string, Cell> d{{"a", {5, 4}}, {"b", {4, 4}}};
    SimScript script;
    script.merges.push_back({1, "a", "b", "m", {4, 4}}); // merging next cycle
    auto r = step_movement(chip(), {}, d, 0, script);
    CHECK(r.violations.empty());
}

TEST_CASE("a move that closes on a resting droplet is flagged as an approach") {
    // A droplet rides down the left vertical path toward the junction while
    // another waits just past the corner: the mover's destination touches the
    // waiter, which the dynamic check reports.
    std::map<std::string, Cell> d{{"a", {3, 0}}, {"b", {5, 1}}};
    auto r = step_movement(chip(), pins_for({{4, 0}}), d, 0, {});
    CHECK(r.next.at("a") == Cell{4, 0});
    CHECK(r.next.at("b") == Cell{5, 1});
    CHECK(has_kind(r, "approach"));
}

TEST_CASE("a dispense without its reservoir pin driven is flagged") {
    const Reservoir* res = chip().reservoir("RLI");
    REQUIRE(res);
    SimScript script;
    script.appears.push_back({0, "d", res->mouth_cell, res->pin});
    auto r = step_movement(chip(), {}, {}, 0, script);
    CHECK(has_kind(r, "dispense-unpowered"));
    CHECK(r.next.count("d") == 1); // the event still happens; it is just flagged
}

TEST_CASE("a powered dispense on a free mouth is clean") {
    const Reservoir* res = chip().reservoir("RLI");
    REQUIRE(res);
    SimScript script;
    script.appears.push_back({0, "d", res->mouth_cell, res->pin});
    auto r = step_movement(chip(), {res->pin}, {}, 0, script);
    CHECK(r.violations.empty());
    CHECK(r.next.at("d") == res->mouth_cell);
}

TEST_CASE("a collection away from the droplet's actual cell is flagged") {
    const Reservoir* res = chip().reservoir("RLO");
    REQUIRE(res);
    std::map<std::string, Cell> d{{"x", {1, 0}}};
    SimScript script;
    script.vanishes.push_back({0, "x", res->mouth_cell, res->pin});
    auto r = step_movement(chip(), {res->pin}, d, 0, script);
    CHECK(has_kind(r, "collect-misplaced"));
}

TEST_CASE("a clean collection removes the droplet") {
    const Reservoir* res = chip().reservoir("RLO");
    REQUIRE(res);
    std::map<std::string, Cell> d{{"x", res->mouth_cell}};
    SimScript script;
    script.vanishes.push_back({0, "x", res->mouth_cell, res->pin});
    auto r = step_movement(chip(), {res->pin}, d, 0, script);
    CHECK(r.violations.empty());
    CHECK(r.next.empty());
}

TEST_CASE("a stored droplet is dragged by a shared-pin pulse unless its own electrode holds it") {
    const ModuleSite* s = chip().site("SA1L");
    REQUIRE(s);
    std::map<std::string, Cell> d{{"stored", s->hold_cell}};
    // Pulse the shared io electrode alone: the parked droplet sees exactly one
    // driven neighbour and walks off its pocket.
    auto pulled = step_movement(chip(), pins_for({s->io_cell}), d, 0, {});
    CHECK(pulled.next.at("stored") == s->io_cell);
    // Drive the pocket's own electrode too and the droplet stays anchored.
    auto held = step_movement(chip(), pins_for({s->io_cell, s->hold_cell}), d, 0, {});
    CHECK(held.violations.empty());
    CHECK(held.next.at("stored") == s->hold_cell);
}
