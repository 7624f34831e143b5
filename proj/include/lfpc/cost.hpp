#pragma once
// Manufacturing-cost analysis: control-pin counts, printed-wiring routability
// of the pin fan-out, wire length, metal-layer count, and a parametric cost
// score.
//
// Wire routing happens on a track grid with kWireTracksPerPitch^2 track
// nodes per electrode pitch; each electrode drops a via to its pin's wire at
// the pitch-center track node.  Every driven pin with on-grid electrodes
// forms one net: all its electrode terminals plus one perimeter pad,
// connected by a single wire tree (shared trunks are what make pin sharing
// cheap).  Nets are placed by negotiated rerouting: every round each net is
// ripped up and rerouted by a congestion-priced shortest-path tree, and the
// price of overbooked track nodes rises between rounds until some round
// comes out overlap-free.  Contested corridors thus go to whoever has no
// alternative, not to whoever routed first.  A net that does not fit keeps
// trying higher layers up to the budget; a whole net lives on one layer, so
// a one-layer result is planar by construction.  Perimeter track cells are
// ordinary corridors that double as pad slots; a claimed pad is exclusive.
// Reservoir electrodes sit off-grid at the board edge and need no fan-out
// routing; they count toward pin totals only.

#include <string>
#include <vector>

#include "lfpc/architecture.hpp"

namespace lfpc {

// Routing-track resolution: wiring tracks per electrode pitch.  A standard
// trace/space pitch is several times finer than the electrode pitch, which
// is what makes single-layer fan-outs of shared-pin designs practical.
constexpr int kWireTracksPerPitch = 5;

struct CostReport {
    int pin_count = 0;
    int layers_used = 0;
    double total_wire_length = 0; // electrode-pitch units
    std::vector<PinId> failed_nets;
    int routed_nets = 0;
    int rows = 0, cols = 0;
    double pitch = 1.0;

    bool all_routed() const { return failed_nets.empty(); }
};

// One pin's wire tree on the track grid (Cell reused as a track node).
struct WireNet {
    PinId pin = 0;
    std::vector<Cell> terminals; // electrode centre nodes, row-major order
    Cell pad{};                  // perimeter pad node
    int layer = 0;               // 1-based; 0 = failed to route
    std::vector<std::pair<Cell, Cell>> edges; // unit track segments (a < b)
};

struct WireRouting {
    int track_rows = 0, track_cols = 0;
    std::vector<WireNet> nets; // routed ones first isn't guaranteed; see layer
    CostReport report;
};

WireRouting route_wire_nets(const ChipArchitecture& arch, int layer_budget);

// The report alone (routability, layers, length, failures).
CostReport route_wires(const ChipArchitecture& arch, int layer_budget);

// Wire-level sanity audit: distinct nets never share a node or segment on
// one layer, every terminal connects to its net's pad through the net's own
// edges, and pads are unique perimeter nodes.  Empty result means sound.
std::vector<std::string> validate_wires(const WireRouting& w);

struct UnitCosts {
    double area_unit = 0;   // per pitch^2 of board area
    double layer_unit = 0;  // per metal layer
    double driver_unit = 0; // per control pin
};

// area*area_unit + layers*layer_unit + pins*driver_unit; linear and monotone.
double cost_score(const CostReport& report, const UnitCosts& costs);

// Flat `key value` text block, stable across runs.
std::string report_text(const CostReport& report);

// Layered SVG of electrodes, wire trees, and pads for visual inspection.
std::string wires_svg(const ChipArchitecture& arch, const WireRouting& w);

// Synthetic direct-addressed array: every cell its own pin, no shared
// wiring, no modules.  The comparison baseline for routability studies.
ChipArchitecture build_direct_grid(int rows, int cols);

} // namespace lfpc
