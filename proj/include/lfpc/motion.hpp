#pragma once
// Droplet electro-motion physics shared by the router's per-cycle frame
// validator and the actuation-table simulator.
//
// One step evaluates a single actuation frame (the set of pins driven high
// for one cycle) against the current droplet configuration and produces the
// next configuration plus any rule violations.  The movement rule:
//
//   1. A droplet sitting on an active electrode stays put (it is pinned).
//   2. On an inactive electrode with exactly one active 4-neighbour, the
//      droplet moves onto that neighbour.
//   3. With zero active neighbours it stays put.
//   4. With two or more active neighbours the pull is ambiguous and gets
//      logged as a violation -- except the sanctioned split pattern: exactly
//      two active neighbours on opposite sides of a cell that the script
//      marks as splitting this cycle, which yields two child droplets.
//
// Two droplets driven onto the same cell merge only when the script marks
// that pair as merging; otherwise it is a collision.  Fluidic constraints
// (Chebyshev-distance spacing, both static and during transitions) are
// checked with exemptions for marked merge partners and fresh split
// families.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lfpc/architecture.hpp"
#include "lfpc/geometry.hpp"

namespace lfpc {

// A rule breach observed while evaluating one frame.
struct Violation {
    int cycle = 0;
    std::string kind;     // "ambiguous-pull", "collision", "spacing",
                          // "approach", "split-misfire", "dispense-unpowered",
                          // "collect-unpowered", "collect-misplaced",
                          // "dispense-blocked"
    std::string droplet;  // primary droplet involved
    std::string other;    // second droplet when the breach is pairwise
    Cell cell{};          // where it happened
};

std::string to_string(const Violation& v);

// Side-band events that accompany an actuation table: where droplets enter
// and leave the grid and which cycle-stamped merge/split manoeuvres the plan
// sanctioned.  The simulator treats these as the plan's declared intent and
// still checks that the electrode pattern actually realises each one.
struct SimScript {
    struct Appear {   // droplet emerges from a reservoir mouth
        int cycle = 0;
        std::string id;
        Cell at{};
        PinId reservoir_pin = 0;
    };
    struct Vanish {   // droplet collected back into a reservoir
        int cycle = 0;
        std::string id;
        Cell at{};
        PinId reservoir_pin = 0;
    };
    struct Merge {    // two droplets driven onto one cell become one
        int cycle = 0;
        std::string a;
        std::string b;
        std::string result;
        Cell at{};
    };
    struct Split {    // one droplet pulled apart into two children
        int cycle = 0;
        std::string parent;
        std::string child_io;   // child landing toward the path side
        std::string child_far;  // child landing on the far side
        Cell from{};
        Cell to_io{};
        Cell to_far{};
    };

    std::vector<Appear> appears;
    std::vector<Vanish> vanishes;
    std::vector<Merge> merges;
    std::vector<Split> splits;

    void sort_all();  // order every list by cycle (stable)
};

// Result of evaluating one frame.
struct StepResult {
    std::map<std::string, Cell> next;  // configuration after the cycle
    std::vector<Violation> violations;
};

// Evaluate the frame driven during `cycle`.  `droplets` is the configuration
// at the end of the previous cycle; the result is the configuration at the
// end of this one.  Script events stamped with `cycle` are applied here:
// vanishes first, then splits and ordinary movement, then appearances.
StepResult step_movement(const ChipArchitecture& arch,
                         const std::set<PinId>& frame,
                         const std::map<std::string, Cell>& droplets,
                         int cycle,
                         const SimScript& script);

}  // namespace lfpc
