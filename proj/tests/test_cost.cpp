#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lfpc/architecture.hpp"
#include "lfpc/cost.hpp"

#include <algorithm>
#include <set>

using namespace lfpc;

namespace {

const ChipArchitecture& chip() {
    static ChipArchitecture a = build_lfpc(ArchParams{});
    return a;
}

// Spanning lower bound for one net: half the Manhattan minimum spanning
// tree over {pad} + terminals (a tree through extra junction points can
// halve the point-to-point MST but never beat it by more), and at least the
// distance from the pad to its farthest terminal.
double net_lower_bound(const WireNet& n) {
    std::vector<Cell> pts = n.terminals;
    pts.push_back(n.pad);
    std::vector<bool> in_tree(pts.size(), false);
    std::vector<int> dist(pts.size(), 1 << 30);
    auto md = [](const Cell& a, const Cell& b) {
        return std::abs(a.row - b.row) + std::abs(a.col - b.col);
    };
    in_tree[0] = true;
    long mst = 0;
    for (size_t i = 1; i < pts.size(); ++i) dist[i] = md(pts[0], pts[i]);
    for (size_t added = 1; added < pts.size(); ++added) {
        size_t best = 0;
        for (size_t i = 1; i < pts.size(); ++i)
            if (!in_tree[i] && (best == 0 || dist[i] < dist[best])) best = i;
        in_tree[best] = true;
        mst += dist[best];
        for (size_t i = 1; i < pts.size(); ++i)
            if (!in_tree[i]) dist[i] = std::min(dist[i], md(pts[best], pts[i]));
    }
    int far_term = 0;
    for (const Cell& t : n.terminals) far_term = std::max(far_term, md(n.pad, t));
    return std::max(static_cast<double>(mst) / 2.0, static_cast<double>(far_term));
}

} // namespace

TEST_CASE("the default chip's pin fan-out routes on a single metal layer") {
    WireRouting w = route_wire_nets(chip(), 1);
    CHECK(w.report.failed_nets.empty());
    CHECK(w.report.layers_used == 1);
    CHECK(w.report.pin_count == 53);
    // 49 on-grid pins form nets; the 4 reservoir electrodes are off-grid
    CHECK(w.report.routed_nets == 49);
    CHECK(validate_wires(w).empty());
}

TEST_CASE("a direct-addressed 15x15 array does not fit a single layer") {
    ChipArchitecture direct = build_direct_grid(15, 15);
    CostReport rep = route_wires(direct, 1);
    CHECK(rep.pin_count == 225);
    CHECK(!rep.failed_nets.empty());
    // the routed subset is still electrically sound
    WireRouting w = route_wire_nets(direct, 1);
    CHECK(validate_wires(w).empty());
}

TEST_CASE("a single-electrode chip routes trivially") {
    ChipArchitecture one = build_direct_grid(1, 1);
    WireRouting w = route_wire_nets(one, 1);
    REQUIRE(w.nets.size() == 1);
    CHECK(w.report.failed_nets.empty());
    CHECK(w.report.layers_used == 1);
    // wire length equals the pad-to-terminal distance
    const WireNet& n = w.nets[0];
    int d = std::abs(n.pad.row - n.terminals[0].row) +
            std::abs(n.pad.col - n.terminals[0].col);
    CHECK(w.report.total_wire_length == doctest::Approx(static_cast<double>(d) / kWireTracksPerPitch));
}

TEST_CASE("more layers recover the direct array") {
    ChipArchitecture direct = build_direct_grid(8, 8);
    CostReport one = route_wires(direct, 1);
    CostReport four = route_wires(direct, 4);
    CHECK(four.failed_nets.size() <= one.failed_nets.size());
}

TEST_CASE("wire length respects the spanning lower bound") {
    for (const WireRouting& w :
         {route_wire_nets(chip(), 1), route_wire_nets(build_direct_grid(6, 6), 2)}) {
        double bound = 0;
        long segments = 0;
        for (const WireNet& n : w.nets) {
            if (n.layer == 0) continue;
            bound += net_lower_bound(n);
            segments += static_cast<long>(n.edges.size());
        }
        CHECK(static_cast<double>(segments) >= bound);
        CHECK(w.report.total_wire_length == doctest::Approx(static_cast<double>(segments) / kWireTracksPerPitch));
    }
}

TEST_CASE("routing is deterministic") {
    WireRouting a = route_wire_nets(chip(), 1);
    WireRouting b = route_wire_nets(chip(), 1);
    REQUIRE(a.nets.size() == b.nets.size());
    for (size_t i = 0; i < a.nets.size(); ++i) {
        CHECK(a.nets[i].pin == b.nets[i].pin);
        CHECK(a.nets[i].pad == b.nets[i].pad);
        CHECK(a.nets[i].layer == b.nets[i].layer);
        CHECK(a.nets[i].edges == b.nets[i].edges);
    }
    CHECK(report_text(a.report) == report_text(b.report));
}

TEST_CASE("cost score is linear and monotone in its unit prices") {
    CostReport rep = route_wires(chip(), 1);
    CHECK(cost_score(rep, UnitCosts{}) == 0.0);
    UnitCosts c1{0.0, 5.0, 0.0};
    UnitCosts c2{0.0, 10.0, 0.0};
    CHECK(cost_score(rep, c2) - cost_score(rep, c1) ==
          doctest::Approx(5.0 * rep.layers_used));
    UnitCosts all{1.0, 2.0, 3.0};
    double area = rep.rows * rep.cols * rep.pitch * rep.pitch;
    CHECK(cost_score(rep, all) ==
          doctest::Approx(area + 2.0 * rep.layers_used + 3.0 * rep.pin_count));
}

TEST_CASE("the shared-pin chip costs less than a direct array of equal reach") {
    // equal unit prices; the direct baseline uses the common 15x15 size
    CostReport lfpc = route_wires(chip(), 4);
    CostReport direct = route_wires(build_direct_grid(15, 15), 4);
    UnitCosts costs{1.0, 40.0, 2.0};
    CHECK(cost_score(lfpc, costs) < cost_score(direct, costs));
}

TEST_CASE("report text is a stable key-value block") {
    CostReport rep = route_wires(chip(), 1);
    std::string text = report_text(rep);
    CHECK(text.find("pin_count 53") != std::string::npos);
    CHECK(text.find("layers_used 1") != std::string::npos);
    CHECK(text.find("failed_nets 0") != std::string::npos);
}

TEST_CASE("the svg contains every routed net's wires") {
    WireRouting w = route_wire_nets(chip(), 1);
    std::string svg = wires_svg(chip(), w);
    CHECK(svg.find("<svg") == 0);
    size_t lines = 0, pos = 0;
    while ((pos = svg.find("<line", pos)) != std::string::npos) {
        ++lines;
        ++pos;
    }
    size_t segments = 0;
    for (const WireNet& n : w.nets) segments += n.edges.size();
    CHECK(lines == segments);
}
