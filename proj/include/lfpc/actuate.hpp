#pragma once
// Actuation tables: the chip-level compiled program.
//
// A table is the per-cycle list of driven control pins.  It is what a
// waveform driver would consume, and it is deliberately dumb: no droplet
// identities, no routes, just electrodes.  Whether a table is *safe* is
// decided by replaying it through the shared movement-rule evaluator and
// comparing the resulting droplet history against the routed plan the
// table claims to implement.
//
// Text format (stable, diffable):
//   cycles <N> pins <P>
//   <active pin ids for cycle 0, space separated, sorted>
//   ...
//   <active pin ids for cycle N-1>
// An idle cycle is an empty line.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lfpc/architecture.hpp"
#include "lfpc/motion.hpp"
#include "lfpc/route.hpp"

namespace lfpc {

struct ActuationTable {
    int pin_total = 0;                   // size of the pin id space (header P)
    std::vector<std::set<PinId>> frames; // frames[t] = pins driven in cycle t
};

// Lift a routed plan into a standalone table.  Throws std::runtime_error if
// a frame references a pin outside the architecture's pin space or the
// frame count disagrees with the plan's cycle count.
ActuationTable compile_table(const RoutePlan& plan, const ChipArchitecture& arch);

std::string to_text(const ActuationTable& t);
// Throws std::runtime_error naming the offending line on malformed input.
ActuationTable table_from_text(const std::string& text);

// Replay of a table under the movement rule.  `script` carries the plan's
// declared dispense / collect / merge / split events; `initial` seeds
// droplets already on the grid at cycle 0 (normally empty).
struct SimTrace {
    std::map<std::string, std::map<int, Cell>> pos; // droplet -> cycle -> cell
    std::vector<Violation> violations;
};

SimTrace simulate_table(const ActuationTable& table, const ChipArchitecture& arch,
                        const SimScript& script,
                        const std::map<std::string, Cell>& initial = {});

// Cycle-by-cycle comparison of a table's replay against the plan it claims
// to implement.  ok means: zero rule violations and the simulated droplet
// history equals the plan's history exactly.
struct VerifyReport {
    bool ok = false;
    std::string message; // "exact match" or the first discrepancy
    int divergence_cycle = -1;
    std::vector<Violation> violations;
};

VerifyReport verify_table(const ActuationTable& table, const RoutePlan& plan,
                          const ChipArchitecture& arch);

// Droplet-history round trip for standalone replay.  parse_trace reads
// "at <cycle> <droplet> <row> <col>" lines; script_from_history
// reconstructs the side-band events (dispense, collection, merge, split)
// that a history implies on the given architecture, using `cycles` (the
// table horizon) to tell a collected droplet from one parked at the end.
// Both throw std::runtime_error on input they cannot explain.
std::map<std::string, std::map<int, Cell>>
parse_trace(const std::string& text);

SimScript script_from_history(const std::map<std::string, std::map<int, Cell>>& pos,
                              const ChipArchitecture& arch, int cycles);

} // namespace lfpc
