#include "lfpc/cost.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace lfpc {

namespace {

constexpr int kTracksPerPitch = kWireTracksPerPitch;
constexpr int kViaOffset = kTracksPerPitch / 2;

// Price of entering one committed wire cell during a repair probe.  Dwarfs
// any geometric cost, so a probe crosses as few committed cells as possible.
constexpr double kRepairToll = 1.0e5;

struct Edge {
    Cell a, b; // normalized: a < b
    Edge(Cell x, Cell y) {
        if (y < x) std::swap(x, y);
        a = x;
        b = y;
    }
    bool operator<(const Edge& o) const {
        if (!(a == o.a)) return a < o.a;
        return b < o.b;
    }
};

struct Grid {
    int rows, cols;
    bool in(const Cell& c) const {
        return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
    }
    bool on_perimeter(const Cell& c) const {
        return c.row == 0 || c.row == rows - 1 || c.col == 0 || c.col == cols - 1;
    }
};

// Shared routing scene: geometry, hard walls, and the congestion ledger that
// negotiated rerouting updates between rounds.  Node ids are row-major track
// coordinates, so id order equals Cell order.
struct RouteScene {
    int rows = 0, cols = 0;
    std::vector<int> via_pin;              // node -> owning pin (0 = none)
    std::vector<char> perim;               // node -> pad-ring flag
    std::vector<std::vector<int>> occ;     // per layer: node -> nets present
    std::vector<std::vector<double>> hist; // per layer: node -> history price
    std::vector<int> pad_occ;              // pad slot -> nets present
    std::vector<double> pad_hist;          // pad slot -> history price
    double pressure = 0.5;                 // surcharge per sharing net
    unsigned salt = 0;                     // jitter epoch, bumped per restart
    // Repair mode: 0 = negotiation pricing; 1 = committed wires are hard
    // walls (clean attempt); 2 = committed wires are tolled crossings, used
    // to discover which nets block a failed one (probing attempt).  Cells
    // owned by a net in the active repair chain stay hard walls even for
    // probes: the chain holds those routes and cannot rip them.
    int repair = 0;
    const std::vector<std::vector<PinId>>* rep_owner = nullptr;
    const std::vector<PinId>* rep_pad_owner = nullptr;
    const std::set<PinId>* rep_stack = nullptr;
    const std::vector<double>* rep_extra = nullptr; // probe retry surcharges

    int size() const { return rows * cols; }
    int id(const Cell& c) const { return c.row * cols + c.col; }
    Cell cell(int i) const { return Cell{i / cols, i % cols}; }
};

// Route one net as a tree on one layer.  Wire nodes held by other nets are
// not forbidden outright — entering one costs extra, and the surcharge grows
// between rounds — so contested corridors are settled by price rather than by
// arrival order.  Electrode via nodes of other pins stay hard walls: a wire
// through one would short to that electrode.  The tree's last leg runs to the
// cheapest perimeter pad slot, priced like any contested resource, with a
// loyalty discount for the pad it held last round so pads do not flap from
// round to round.  Returns false only when a terminal or every pad is walled
// off outright.
bool route_net_tree(const RouteScene& sc, PinId pin, const std::vector<int>& terminals,
                    int prev_pad, int layer, std::vector<int>& nodes,
                    std::set<std::pair<int, int>>& edges, int& pad, double& cost) {
    const int n = sc.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<char> in_tree(n, 0);
    std::vector<int> tree;
    int seed = terminals.front();
    in_tree[seed] = 1;
    tree.push_back(seed);
    std::size_t next_term = 1; // attach in the caller's fixed order

    // Tiny deterministic per-net jitter so that symmetric corridor choices
    // differ between contending nets; otherwise two nets can swap a pair of
    // equally-priced corridors forever without ever settling.
    auto jitter = [&](int node) -> double {
        unsigned h = static_cast<unsigned>(node) * 2654435761u ^
                     static_cast<unsigned>(pin) * 0x9e3779b9u ^
                     sc.salt * 0x27d4eb2fu;
        h ^= h >> 16;
        h *= 0x45d9f3bu;
        h ^= h >> 16;
        return static_cast<double>(h & 0xffff) / 65536.0 * 0.01;
    };
    // Hugging bonus: cells touching committed wire, a via, or the board edge
    // are slightly cheaper, so each route clings to existing structure the
    // way a river router hugs its contour.  Paths through open field would
    // fragment the free space that later nets need.
    auto hugging = [&](int node) -> double {
        const int r = node / sc.cols, c = node % sc.cols;
        if (r == 0 || r == sc.rows - 1 || c == 0 || c == sc.cols - 1) return 0.2;
        for (int d : {node - sc.cols, node + sc.cols, node - 1, node + 1})
            if (sc.via_pin[d] != 0 || sc.occ[layer][d] > 0) return 0.2;
        return 0.0;
    };
    auto enter = [&](int node) -> double {
        if (sc.via_pin[node] != 0 && sc.via_pin[node] != pin) return -1.0;
        if (sc.repair != 0) {
            double c = 1.0 + jitter(node) - hugging(node);
            if (sc.occ[layer][node] > 0) {
                if (sc.repair == 1) return -1.0;
                if (sc.rep_stack->count((*sc.rep_owner)[layer][node])) return -1.0;
                c += kRepairToll;
                if (sc.rep_extra) c += (*sc.rep_extra)[node];
            }
            return c;
        }
        // Multiplicative congestion pricing: history scales with the present
        // sharing term, so chronically fought-over ground stays expensive
        // even when prices are high, instead of all occupied cells flattening
        // to the same price and the router cycling between them.
        double c = (1.0 + sc.hist[layer][node]) *
                   (1.0 + sc.pressure * sc.occ[layer][node]) +
                   jitter(node) - hugging(node);
        return c;
    };

    cost = 0.0;
    std::vector<double> dist(n);
    std::vector<int> parent(n);
    using Entry = std::pair<double, int>;
    while (true) {
        const bool to_pad = next_term >= terminals.size();
        const int target = to_pad ? -1 : terminals[next_term];
        if (!to_pad && in_tree[target]) { // swallowed by an earlier leg
            ++next_term;
            continue;
        }
        std::fill(dist.begin(), dist.end(), inf);
        std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
        for (int s : tree) {
            dist[s] = 0.0;
            parent[s] = s;
            pq.push({0.0, s});
        }
        int hit = -1;
        double best_pad_price = inf;
        int best_pad_node = -1;
        auto pad_price = [&](int nd, double d) {
            if (sc.repair != 0) {
                double p = d + 1.0 + jitter(nd ^ 0x5bd1);
                if (sc.pad_occ[nd] > 0) {
                    if (sc.repair == 1 ||
                        sc.rep_stack->count((*sc.rep_pad_owner)[nd]))
                        return inf;
                    p += kRepairToll;
                }
                return p;
            }
            return d +
                   (1.0 + sc.pad_hist[nd]) * (1.0 + sc.pressure * sc.pad_occ[nd]) +
                   jitter(nd ^ 0x5bd1) + (nd == prev_pad ? 0.0 : 4.0);
        };
        while (!pq.empty()) {
            auto [d, cur] = pq.top();
            pq.pop();
            if (to_pad && d >= best_pad_price) break; // nothing cheaper left
            if (d > dist[cur]) continue;
            if (!to_pad && cur == target) {
                hit = cur;
                break;
            }
            if (to_pad && sc.perim[cur]) {
                const double p = pad_price(cur, d);
                if (p < best_pad_price) {
                    best_pad_price = p;
                    best_pad_node = cur;
                }
            }
            const int r = cur / sc.cols, c = cur % sc.cols;
            const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nr >= sc.rows || nc < 0 || nc >= sc.cols) continue;
                const int nx = nr * sc.cols + nc;
                const double step = enter(nx);
                if (step < 0) continue;
                const double nd = d + step;
                if (nd < dist[nx]) {
                    dist[nx] = nd;
                    parent[nx] = cur;
                    pq.push({nd, nx});
                }
            }
        }
        if (to_pad) {
            hit = best_pad_node;
            if (hit < 0) return false;
            cost += best_pad_price;
            for (int walk = hit; !in_tree[walk]; walk = parent[walk]) {
                in_tree[walk] = 1;
                tree.push_back(walk);
                edges.insert(
                    {std::min(walk, parent[walk]), std::max(walk, parent[walk])});
            }
            pad = hit;
            break;
        }
        if (hit < 0) return false;
        cost += dist[hit];
        for (int walk = hit; !in_tree[walk]; walk = parent[walk]) {
            in_tree[walk] = 1;
            tree.push_back(walk);
            edges.insert({std::min(walk, parent[walk]), std::max(walk, parent[walk])});
        }
        ++next_term;
    }
    nodes = tree;
    std::sort(nodes.begin(), nodes.end());
    return true;
}

} // namespace

ChipArchitecture build_direct_grid(int rows, int cols) {
    ChipArchitecture a;
    a.rows = rows;
    a.cols = cols;
    a.pins.assign(rows * cols, 0);
    PinId p = 1;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) a.set_pin(Cell{r, c}, p++);
    return a;
}

WireRouting route_wire_nets(const ChipArchitecture& arch, int layer_budget) {
    WireRouting w;
    Grid g{arch.rows * kTracksPerPitch, arch.cols * kTracksPerPitch};
    w.track_rows = g.rows;
    w.track_cols = g.cols;

    // Collect nets: one per pin with on-grid electrodes.
    std::map<PinId, std::vector<Cell>> terminals;
    for (int r = 0; r < arch.rows; ++r)
        for (int c = 0; c < arch.cols; ++c) {
            PinId p = arch.pin_at(Cell{r, c});
            if (p > 0)
                terminals[p].push_back(Cell{r * kTracksPerPitch + kViaOffset,
                                            c * kTracksPerPitch + kViaOffset});
        }
    for (auto& [pin, terms] : terminals) {
        WireNet n;
        n.pin = pin;
        n.terminals = terms;
        w.nets.push_back(std::move(n));
    }
    // Hardest-to-escape nets first: rank each net by the obstacle-aware
    // distance from its vias to the board edge (other pins' vias as walls)
    // plus its span.  Deeply enclosed vias must claim the scarce inner
    // corridors before outer nets wall them in; ties by pin id.
    {
        std::vector<char> wall(g.rows * g.cols, 0);
        for (const WireNet& n : w.nets)
            for (const Cell& t : n.terminals) wall[t.row * g.cols + t.col] = 1;
        std::map<PinId, long> difficulty;
        for (const WireNet& n : w.nets) {
            std::deque<int> q;
            std::vector<int> bfs(g.rows * g.cols, -1);
            for (const Cell& t : n.terminals) {
                bfs[t.row * g.cols + t.col] = 0;
                q.push_back(t.row * g.cols + t.col);
            }
            long escape = 0;
            while (!q.empty()) {
                int cur = q.front();
                q.pop_front();
                const int r = cur / g.cols, c = cur % g.cols;
                if (r == 0 || r == g.rows - 1 || c == 0 || c == g.cols - 1) {
                    escape = bfs[cur];
                    break;
                }
                for (int d : {cur - g.cols, cur + g.cols, cur - 1, cur + 1}) {
                    if (bfs[d] != -1) continue;
                    const Cell dc{d / g.cols, d % g.cols};
                    if (wall[d] && n.pin != arch.pin_at(Cell{dc.row / kTracksPerPitch,
                                                             dc.col / kTracksPerPitch}))
                        continue;
                    bfs[d] = bfs[cur] + 1;
                    q.push_back(d);
                }
            }
            long span = 0;
            for (const Cell& t : n.terminals)
                span = std::max<long>(span, manhattan(t, n.terminals.front()));
            difficulty[n.pin] = escape * 100 + span;
        }
        std::stable_sort(w.nets.begin(), w.nets.end(),
                         [&](const WireNet& a, const WireNet& b) {
                             if (difficulty[a.pin] != difficulty[b.pin])
                                 return difficulty[a.pin] > difficulty[b.pin];
                             return a.pin < b.pin;
                         });
    }

    // Routing scene.  Perimeter cells are ordinary corridors that double as
    // pad slots; a claimed pad is exclusive.  Electrode via nodes are
    // obstacles on every layer.
    RouteScene sc;
    sc.rows = g.rows;
    sc.cols = g.cols;
    sc.via_pin.assign(sc.size(), 0);
    for (const WireNet& n : w.nets)
        for (const Cell& t : n.terminals) sc.via_pin[sc.id(t)] = n.pin;
    sc.perim.assign(sc.size(), 0);
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c)
            if (g.on_perimeter(Cell{r, c})) sc.perim[r * g.cols + c] = 1;
    sc.occ.assign(layer_budget + 1, std::vector<int>(sc.size(), 0));
    sc.hist.assign(layer_budget + 1, std::vector<double>(sc.size(), 0.0));
    sc.pad_occ.assign(sc.size(), 0);
    sc.pad_hist.assign(sc.size(), 0.0);

    std::vector<WireNet*> order;
    for (WireNet& n : w.nets) order.push_back(&n);

    struct Placed {
        int layer = 0;
        int pad = -1;
        std::vector<int> nodes;
    };
    std::map<PinId, Placed> placed;
    // Fixed per-net attach order: nearest-first by plain geometry from the
    // lowest-id terminal.  A stable order keeps the tree's shape from
    // flipping between rounds, which negotiation needs to settle.
    std::map<PinId, std::vector<int>> term_ids;
    for (const WireNet& n : w.nets) {
        std::vector<Cell> pool = n.terminals;
        std::sort(pool.begin(), pool.end());
        std::vector<Cell> seq{pool.front()};
        pool.erase(pool.begin());
        while (!pool.empty()) {
            std::size_t best = 0;
            int bd = std::numeric_limits<int>::max();
            for (std::size_t i = 0; i < pool.size(); ++i) {
                int d = std::numeric_limits<int>::max();
                for (const Cell& q : seq) d = std::min(d, manhattan(pool[i], q));
                if (d < bd) {
                    bd = d;
                    best = i;
                }
            }
            seq.push_back(pool[best]);
            pool.erase(pool.begin() + static_cast<long>(best));
        }
        auto& t = term_ids[n.pin];
        for (const Cell& c : seq) t.push_back(sc.id(c));
    }

    auto rip = [&](WireNet& net) {
        Placed& p = placed[net.pin];
        if (p.layer == 0) return;
        for (int nd : p.nodes) --sc.occ[p.layer][nd];
        --sc.pad_occ[p.pad];
        p = Placed{};
        net.layer = 0;
        net.edges.clear();
    };
    auto commit = [&](WireNet& net, int layer, int pad, std::vector<int>& nodes,
                      const std::set<std::pair<int, int>>& edges) {
        Placed& p = placed[net.pin];
        p.layer = layer;
        p.pad = pad;
        p.nodes = std::move(nodes);
        for (int nd : p.nodes) ++sc.occ[layer][nd];
        ++sc.pad_occ[pad];
        net.layer = layer;
        net.pad = sc.cell(pad);
        net.edges.clear();
        for (const auto& [a, b] : edges) net.edges.push_back({sc.cell(a), sc.cell(b)});
        std::sort(net.edges.begin(), net.edges.end());
    };

    // Negotiated rerouting: each round rips up and reroutes every net at the
    // current prices, then raises the price of every overbooked node, so
    // persistent contention is paid off over rounds instead of being decided
    // by routing order.  Stops at the first overlap-free round, when pricing
    // stops helping, or at the round cap.
    // How many nets a consistent-subset extraction would drop right now:
    // earlier (larger) nets keep their claims, later colliding nets count as
    // failed.  This is the actual objective the negotiation is chasing.
    auto keep_failures = [&]() {
        std::vector<std::vector<char>> taken(layer_budget + 1,
                                             std::vector<char>(sc.size(), 0));
        std::vector<char> pad_taken(sc.size(), 0);
        int failed = 0;
        for (const WireNet* net : order) {
            const Placed& p = placed.at(net->pin);
            if (p.layer == 0) {
                ++failed;
                continue;
            }
            bool ok = !pad_taken[p.pad];
            if (ok)
                for (int nd : p.nodes)
                    if (taken[p.layer][nd]) {
                        ok = false;
                        break;
                    }
            if (!ok) {
                ++failed;
                continue;
            }
            for (int nd : p.nodes) taken[p.layer][nd] = 1;
            pad_taken[p.pad] = 1;
        }
        return failed;
    };

    // Negotiation alone can deadlock in a musical-chairs cycle: a knot of
    // nets displacing each other round after round with the overlap count
    // conserved.  Three measures break it.  Restarts: every kCycle rounds the
    // sharing surcharge drops back to its starting value, history fades, and
    // the tie-break jitter reseeds, so the next squeeze approaches the knot
    // from different ground.  Loser priority: nets that ended the previous
    // round on contested cells reroute first the next round, so the chronic
    // losers get first pick instead of always inheriting leftovers.  Best
    // snapshot: the cheapest overlap state ever seen is restored at the end,
    // so exploration after a near-miss cannot lose it.
    const int kCycle = 60;
    const int kMaxRounds = std::max(
        2 * kCycle,
        static_cast<int>(600L * 49 / std::max<std::size_t>(1, order.size())));
    const int kStallCycles = 9; // restarts without improvement before giving up
    auto mix = [](unsigned long long v) {
        v ^= v >> 33;
        v *= 0xff51afd7ed558ccdULL;
        v ^= v >> 33;
        return v;
    };
    // Candidate states for the repair stage: the best state of each restart
    // cycle.  Different restarts settle the contested knot differently, and
    // the configuration that repairs to completion is often not the one
    // with the fewest raw failures, so several are kept and tried.
    struct Snap {
        std::pair<int, long> score{std::numeric_limits<int>::max(),
                                   std::numeric_limits<long>::max()};
        std::map<PinId, Placed> placed;
        std::map<PinId, std::pair<Cell, std::vector<std::pair<Cell, Cell>>>> nets;
    };
    std::vector<Snap> candidates;
    Snap cycle_best;
    std::pair<int, long> best_score{std::numeric_limits<int>::max(),
                                    std::numeric_limits<long>::max()};
    std::set<PinId> losers;
    std::vector<WireNet*> cycle_order = order;
    int cycles_since_best = 0;
    for (int round = 0; round < kMaxRounds; ++round) {
        if (round > 0 && round % kCycle == 0) {
            if (!cycle_best.placed.empty()) {
                candidates.push_back(std::move(cycle_best));
                cycle_best = Snap{};
            }
            if (++cycles_since_best >= kStallCycles) break;
            sc.pressure = 0.5;
            sc.salt = static_cast<unsigned>(round / kCycle);
            for (auto& layer_hist : sc.hist)
                for (double& h : layer_hist) h *= 0.35;
            for (double& h : sc.pad_hist) h *= 0.35;
            // Each restart explores from a different net order; the best
            // state seen across all restarts is what finally counts.
            std::stable_sort(cycle_order.begin(), cycle_order.end(),
                             [&](const WireNet* a, const WireNet* b) {
                                 return mix(a->pin * 0x9e3779b97f4a7c15ULL + sc.salt) <
                                        mix(b->pin * 0x9e3779b97f4a7c15ULL + sc.salt);
                             });
        }
        std::vector<WireNet*> order_round;
        for (WireNet* net : cycle_order)
            if (losers.count(net->pin)) order_round.push_back(net);
        for (WireNet* net : cycle_order)
            if (!losers.count(net->pin)) order_round.push_back(net);
        int moved = 0;
        for (WireNet* net : order_round) {
            std::vector<int> prev_nodes = placed[net->pin].nodes;
            const int prev_pad = placed[net->pin].layer != 0 ? placed[net->pin].pad : -1;
            rip(*net);
            int best_layer = 0, best_pad = -1;
            double best_cost = 0.0;
            std::vector<int> best_nodes;
            std::set<std::pair<int, int>> best_edges;
            for (int layer = 1; layer <= layer_budget; ++layer) {
                std::vector<int> nodes;
                std::set<std::pair<int, int>> edges;
                int pad = -1;
                double cost = 0.0;
                if (!route_net_tree(sc, net->pin, term_ids[net->pin], prev_pad,
                                    layer, nodes, edges, pad, cost))
                    continue;
                if (best_layer == 0 || cost < best_cost - 1e-9) {
                    best_layer = layer;
                    best_pad = pad;
                    best_cost = cost;
                    best_nodes = std::move(nodes);
                    best_edges = std::move(edges);
                }
            }
            if (best_layer != 0)
                commit(*net, best_layer, best_pad, best_nodes, best_edges);
            if (placed[net->pin].nodes != prev_nodes) ++moved;
        }
        long over = 0;
        for (int l = 1; l <= layer_budget; ++l)
            for (int nd = 0; nd < sc.size(); ++nd)
                if (sc.occ[l][nd] > 1) {
                    ++over;
                    sc.hist[l][nd] += 1.0;
                }
        for (int nd = 0; nd < sc.size(); ++nd)
            if (sc.pad_occ[nd] > 1) {
                ++over;
                sc.pad_hist[nd] += 1.0;
            }
        losers.clear();
        for (const WireNet* net : order) {
            const Placed& p = placed[net->pin];
            bool bad = p.layer == 0 || sc.pad_occ[p.pad] > 1;
            if (!bad)
                for (int nd : p.nodes)
                    if (sc.occ[p.layer][nd] > 1) {
                        bad = true;
                        break;
                    }
            if (bad) losers.insert(net->pin);
        }
        const std::pair<int, long> score{keep_failures(), over};
        if (score < cycle_best.score) {
            cycle_best.score = score;
            cycle_best.placed = placed;
            cycle_best.nets.clear();
            for (const WireNet& n : w.nets) cycle_best.nets[n.pin] = {n.pad, n.edges};
        }
        if (score < best_score) {
            best_score = score;
            cycles_since_best = 0;
        }
        if (std::getenv("LFPC_COST_DEBUG")) {
            long unrouted = std::count_if(order.begin(), order.end(),
                                          [](const WireNet* n) { return n->layer == 0; });
            std::map<int, int> by_row;
            for (int l = 1; l <= layer_budget; ++l)
                for (int nd = 0; nd < sc.size(); ++nd)
                    if (sc.occ[l][nd] > 1) ++by_row[nd / sc.cols];
            std::fprintf(stderr, "[dbg] round %d moved %d over %ld pressure %.2f unrouted %ld rows:",
                         round, moved, over, sc.pressure, unrouted);
            for (auto& [r, k] : by_row) std::fprintf(stderr, " %d:%d", r, k);
            std::fprintf(stderr, "\n");
        }
        if (over == 0) break;
        sc.pressure = std::min(sc.pressure * 1.22, 1.0e6);
    }
    if (!cycle_best.placed.empty()) candidates.push_back(std::move(cycle_best));

    auto apply_keep = [&]() {
    // If contention never fully cleared, keep a consistent subset: earlier
    // nets (largest first) keep their claims, later colliding nets fail.
    {
        std::vector<std::vector<char>> taken(layer_budget + 1,
                                             std::vector<char>(sc.size(), 0));
        std::vector<char> pad_taken(sc.size(), 0);
        for (WireNet* net : order) {
            Placed& p = placed[net->pin];
            if (p.layer == 0) continue;
            bool ok = !pad_taken[p.pad];
            if (ok)
                for (int nd : p.nodes)
                    if (taken[p.layer][nd]) {
                        ok = false;
                        break;
                    }
            if (!ok) {
                rip(*net);
                continue;
            }
            for (int nd : p.nodes) taken[p.layer][nd] = 1;
            pad_taken[p.pad] = 1;
        }
    }

    };

    auto run_repair = [&]() {
    // Last-mile repair.  Negotiation sometimes strands a handful of nets
    // that are unroutable in any order even though the board has room for
    // them one displacement away.  Each stranded net first tries a clean
    // route with committed wires as hard walls; failing that, it probes a
    // route that may cross committed wires at a steep toll, rips up the few
    // nets the probe crosses, takes the corridor, and re-places the ripped
    // nets the same way, recursively.  A frame that cannot re-place
    // everything it disturbed undoes all of its changes, so a failed repair
    // leaves the board exactly as it found it.  Every ordering is fixed and
    // the budget is a frame count, not wall time, so results stay
    // reproducible.
    {
        std::vector<std::vector<PinId>> owner(
            static_cast<std::size_t>(layer_budget) + 1,
            std::vector<PinId>(sc.size(), 0));
        std::vector<PinId> pad_owner(sc.size(), 0);
        std::map<PinId, WireNet*> by_pin;
        for (WireNet* net : order) by_pin[net->pin] = net;
        for (WireNet* net : order) {
            const Placed& p = placed[net->pin];
            if (p.layer == 0) continue;
            for (int nd : p.nodes) owner[p.layer][nd] = net->pin;
            pad_owner[p.pad] = net->pin;
        }
        struct Saved {
            int layer = 0;
            int pad = -1;
            std::vector<int> nodes;
            Cell pad_cell{};
            std::vector<std::pair<Cell, Cell>> edges;
        };
        auto save = [&](const WireNet& net) {
            const Placed& p = placed[net.pin];
            return Saved{p.layer, p.pad, p.nodes, net.pad, net.edges};
        };
        auto rrip = [&](WireNet& net) {
            Placed& p = placed[net.pin];
            if (p.layer == 0) return;
            for (int nd : p.nodes) owner[p.layer][nd] = 0;
            pad_owner[p.pad] = 0;
            rip(net);
        };
        auto rplace = [&](WireNet& net, int layer, int pad,
                          const std::vector<int>& nodes,
                          const std::set<std::pair<int, int>>& edge_ids) {
            std::vector<int> copy = nodes;
            commit(net, layer, pad, copy, edge_ids);
            for (int nd : placed[net.pin].nodes) owner[layer][nd] = net.pin;
            pad_owner[pad] = net.pin;
        };
        auto restore = [&](WireNet& net, const Saved& s) {
            rrip(net);
            if (s.layer == 0) return;
            Placed& p = placed[net.pin];
            p.layer = s.layer;
            p.pad = s.pad;
            p.nodes = s.nodes;
            for (int nd : p.nodes) {
                ++sc.occ[s.layer][nd];
                owner[s.layer][nd] = net.pin;
            }
            ++sc.pad_occ[s.pad];
            pad_owner[s.pad] = net.pin;
            net.layer = s.layer;
            net.pad = s.pad_cell;
            net.edges = s.edges;
        };
        std::vector<std::pair<PinId, Saved>> undo;
        std::set<PinId> stack;
        sc.rep_owner = &owner;
        sc.rep_pad_owner = &pad_owner;
        sc.rep_stack = &stack;
        long frames_left = 20000;
        std::function<bool(WireNet&, int)> try_place = [&](WireNet& net,
                                                           int depth) -> bool {
            if (--frames_left < 0) return false;
            auto attempt = [&](int mode, int& out_layer, int& out_pad,
                               std::vector<int>& out_nodes,
                               std::set<std::pair<int, int>>& out_edges) {
                sc.repair = mode;
                out_layer = 0;
                double best_cost = 0.0;
                for (int layer = 1; layer <= layer_budget; ++layer) {
                    std::vector<int> nodes;
                    std::set<std::pair<int, int>> edge_ids;
                    int pad = -1;
                    double cost = 0.0;
                    if (!route_net_tree(sc, net.pin, term_ids[net.pin], -1, layer,
                                        nodes, edge_ids, pad, cost))
                        continue;
                    if (out_layer == 0 || cost < best_cost - 1e-9) {
                        out_layer = layer;
                        out_pad = pad;
                        best_cost = cost;
                        out_nodes = std::move(nodes);
                        out_edges = std::move(edge_ids);
                    }
                }
                sc.repair = 0;
            };
            int layer = 0, pad = -1;
            std::vector<int> nodes;
            std::set<std::pair<int, int>> edge_ids;
            attempt(1, layer, pad, nodes, edge_ids);
            if (layer != 0) {
                undo.push_back({net.pin, save(net)});
                rrip(net);
                rplace(net, layer, pad, nodes, edge_ids);
                return true;
            }
            if (depth == 0) return false;
            const bool dbg = std::getenv("LFPC_COST_DEBUG") != nullptr;
            // Each retry surcharges the ground that just proved unworkable,
            // steering the next probe toward a different displacement.  The
            // surcharge map is per frame: a parent's dead end should not
            // distort its children's searches.
            struct ExtraGuard {
                RouteScene& scene;
                const std::vector<double>* saved;
                ~ExtraGuard() { scene.rep_extra = saved; }
            } guard{sc, sc.rep_extra};
            std::vector<double> extra(sc.size(), 0.0);
            sc.rep_extra = &extra;
            for (int retry = 0; retry < 4; ++retry) {
                attempt(2, layer, pad, nodes, edge_ids);
                if (layer == 0) {
                    if (dbg)
                        std::fprintf(stderr, "[dbg] probe %d d%d: no path\n", net.pin,
                                     depth);
                    return false;
                }
                std::set<PinId> blockers;
                for (int nd : nodes)
                    if (owner[layer][nd] != 0) blockers.insert(owner[layer][nd]);
                if (pad_owner[pad] != 0) blockers.insert(pad_owner[pad]);
                blockers.erase(net.pin);
                if (dbg) {
                    std::fprintf(stderr, "[dbg] probe %d d%d r%d: %zu blockers:",
                                 net.pin, depth, retry, blockers.size());
                    for (PinId b : blockers) std::fprintf(stderr, " %d", b);
                    std::fprintf(stderr, "\n");
                }
                if (blockers.empty()) return false;
                if (blockers.size() > 6) {
                    // Too sweeping.  Penalize everything it wanted to cross
                    // and look for a narrower displacement.
                    for (int nd : nodes)
                        if (owner[layer][nd] != 0) extra[nd] += kRepairToll;
                    continue;
                }
                // Undo entries must unwind to a rip of this net's probe route
                // BEFORE the blockers' old routes come back, or the transient
                // overlap would wipe their freshly restored ownership records.
                const std::size_t mark = undo.size();
                for (PinId b : blockers) {
                    undo.push_back({b, save(*by_pin[b])});
                    rrip(*by_pin[b]);
                }
                undo.push_back({net.pin, save(net)});
                rrip(net);
                rplace(net, layer, pad, nodes, edge_ids);
                stack.insert(net.pin);
                PinId failed_blocker = 0;
                for (PinId b : blockers)
                    if (!try_place(*by_pin[b], depth - 1)) {
                        failed_blocker = b;
                        break;
                    }
                stack.erase(net.pin);
                if (failed_blocker == 0) return true;
                while (undo.size() > mark) {
                    restore(*by_pin[undo.back().first], undo.back().second);
                    undo.pop_back();
                }
                // That displacement could not be re-homed; make its ground
                // expensive and probe again.
                for (int nd : placed[failed_blocker].nodes)
                    extra[nd] += kRepairToll;
            }
            return false;
        };
        long stranded = std::count_if(order.begin(), order.end(), [&](WireNet* n) {
            return placed[n->pin].layer == 0;
        });
        // A board that is over capacity outright (not a last-mile knot) is
        // left alone: chain repair on dozens of nets would burn the whole
        // frame budget without converging.
        auto audit = [&](PinId who) {
            if (!std::getenv("LFPC_COST_DEBUG")) return;
            std::vector<std::vector<int>> occ2(
                static_cast<std::size_t>(layer_budget) + 1,
                std::vector<int>(sc.size(), 0));
            for (WireNet* net : order) {
                const Placed& p = placed[net->pin];
                if (p.layer == 0) continue;
                for (int nd : p.nodes) ++occ2[p.layer][nd];
            }
            std::vector<std::vector<PinId>> own2(
                static_cast<std::size_t>(layer_budget) + 1,
                std::vector<PinId>(sc.size(), 0));
            for (WireNet* net : order) {
                const Placed& p = placed[net->pin];
                if (p.layer == 0) continue;
                for (int nd : p.nodes) own2[p.layer][nd] = net->pin;
            }
            for (int l = 1; l <= layer_budget; ++l)
                for (int nd = 0; nd < sc.size(); ++nd) {
                    if (occ2[l][nd] != sc.occ[l][nd])
                        std::fprintf(stderr,
                                     "[dbg] audit after %d: occ drift at (%d,%d) real %d ledger %d\n",
                                     who, nd / sc.cols, nd % sc.cols, occ2[l][nd],
                                     sc.occ[l][nd]);
                    if (occ2[l][nd] > 1)
                        std::fprintf(stderr,
                                     "[dbg] audit after %d: overlap at (%d,%d) x%d\n",
                                     who, nd / sc.cols, nd % sc.cols, occ2[l][nd]);
                    if (own2[l][nd] != owner[l][nd])
                        std::fprintf(stderr,
                                     "[dbg] audit after %d: owner drift at (%d,%d) real %d ledger %d\n",
                                     who, nd / sc.cols, nd % sc.cols, own2[l][nd],
                                     owner[l][nd]);
                }
        };
        if (stranded > 0 && stranded <= 24) {
            for (int pass = 0; pass < 6; ++pass) {
                // A fresh jitter epoch per pass so repeated passes explore
                // different corridors instead of replaying the last one.
                sc.salt = 7777u * static_cast<unsigned>(pass + 1);
                bool progress = false;
                for (WireNet* net : order)
                    if (placed[net->pin].layer == 0) {
                        undo.clear();
                        if (try_place(*net, 5)) progress = true;
                        audit(net->pin);
                    }
                if (!progress) break;
            }
        }
        if (std::getenv("LFPC_COST_DEBUG")) {
            long left = std::count_if(order.begin(), order.end(), [&](WireNet* n) {
                return placed[n->pin].layer == 0;
            });
            std::fprintf(stderr, "[dbg] repair: %ld stranded -> %ld, frames used %ld\n",
                         stranded, left, 20000 - frames_left);
        }
        sc.rep_owner = nullptr;
        sc.rep_pad_owner = nullptr;
        sc.rep_stack = nullptr;
    }

    };

    // Load one candidate state and make the ledgers match it.  The snapshot
    // may contain overlaps (it is the best state of its cycle, not
    // necessarily clean), so colliding claims are ripped before repair.
    auto load_state = [&](const Snap& snap) {
        placed = snap.placed;
        for (WireNet& n : w.nets) {
            const auto& [pad, edges] = snap.nets.at(n.pin);
            n.layer = placed[n.pin].layer;
            n.pad = pad;
            n.edges = edges;
        }
        for (auto& layer_occ : sc.occ)
            std::fill(layer_occ.begin(), layer_occ.end(), 0);
        std::fill(sc.pad_occ.begin(), sc.pad_occ.end(), 0);
        for (WireNet* net : order) {
            const Placed& p = placed[net->pin];
            if (p.layer == 0) continue;
            for (int nd : p.nodes) ++sc.occ[p.layer][nd];
            ++sc.pad_occ[p.pad];
        }
        apply_keep();
    };
    auto failures_now = [&]() {
        return std::count_if(order.begin(), order.end(), [&](WireNet* n) {
            return placed[n->pin].layer == 0;
        });
    };

    // Repair each candidate, best raw score first, until one closes.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Snap& a, const Snap& b) { return a.score < b.score; });
    Snap final_state;
    long final_failures = std::numeric_limits<long>::max();
    for (std::size_t ci = 0; ci < candidates.size() && ci < 12; ++ci) {
        load_state(candidates[ci]);
        run_repair();
        const long f = failures_now();
        if (std::getenv("LFPC_COST_DEBUG"))
            std::fprintf(stderr, "[dbg] candidate %zu: %ld failures after repair\n",
                         ci, f);
        if (f < final_failures) {
            final_failures = f;
            final_state.placed = placed;
            final_state.nets.clear();
            for (const WireNet& n : w.nets)
                final_state.nets[n.pin] = {n.pad, n.edges};
        }
        if (f == 0) break;
    }
    if (!final_state.placed.empty()) {
        placed = final_state.placed;
        for (WireNet& n : w.nets) {
            const auto& [pad, edges] = final_state.nets.at(n.pin);
            n.layer = placed[n.pin].layer;
            n.pad = pad;
            n.edges = edges;
        }
    }

    CostReport& rep = w.report;
    rep.rows = arch.rows;
    rep.cols = arch.cols;
    rep.pitch = arch.electrode_pitch;
    rep.pin_count = static_cast<int>(
        pin_count(AddressingScheme::PinConstrained, arch.rows, arch.cols, &arch));
    long segments = 0;
    for (const WireNet& n : w.nets) {
        if (n.layer == 0) {
            rep.failed_nets.push_back(n.pin);
            continue;
        }
        ++rep.routed_nets;
        rep.layers_used = std::max(rep.layers_used, n.layer);
        segments += static_cast<long>(n.edges.size());
    }
    std::sort(rep.failed_nets.begin(), rep.failed_nets.end());
    rep.total_wire_length = static_cast<double>(segments) / kTracksPerPitch;
    return w;
}

CostReport route_wires(const ChipArchitecture& arch, int layer_budget) {
    return route_wire_nets(arch, layer_budget).report;
}

std::vector<std::string> validate_wires(const WireRouting& w) {
    std::vector<std::string> errs;
    Grid g{w.track_rows, w.track_cols};
    std::map<Cell, PinId> pad_owner;
    std::map<int, std::map<Cell, PinId>> node_owner;  // per layer
    std::map<int, std::map<Edge, PinId>> edge_owner;  // per layer
    std::map<Cell, PinId> via_owner;                  // electrode via nodes
    for (const WireNet& n : w.nets)
        for (const Cell& t : n.terminals) via_owner[t] = n.pin;
    auto say = [&](const std::string& s) { errs.push_back(s); };
    for (const WireNet& n : w.nets) {
        if (n.layer == 0) continue;
        std::ostringstream tag;
        tag << "net " << n.pin;
        if (!g.on_perimeter(n.pad)) say(tag.str() + ": pad not on the perimeter");
        auto [it, fresh] = pad_owner.insert({n.pad, n.pin});
        if (!fresh) {
            std::ostringstream os;
            os << tag.str() << ": pad shared with net " << it->second;
            say(os.str());
        }
        // collect this net's nodes and check exclusivity per layer
        std::set<Cell> nodes;
        nodes.insert(n.pad);
        for (const auto& [a, b] : n.edges) {
            nodes.insert(a);
            nodes.insert(b);
            if (manhattan(a, b) != 1) say(tag.str() + ": non-unit wire segment");
            auto [eit, efresh] = edge_owner[n.layer].insert({Edge(a, b), n.pin});
            if (!efresh && eit->second != n.pin) {
                std::ostringstream os;
                os << tag.str() << ": segment shared with net " << eit->second;
                say(os.str());
            }
        }
        for (const Cell& node : nodes) {
            auto [nit, nfresh] = node_owner[n.layer].insert({node, n.pin});
            if (!nfresh && nit->second != n.pin) {
                std::ostringstream os;
                os << tag.str() << ": node (" << node.row << "," << node.col
                   << ") shared with net " << nit->second;
                say(os.str());
            }
            auto vo = via_owner.find(node);
            if (vo != via_owner.end() && vo->second != n.pin) {
                std::ostringstream os;
                os << tag.str() << ": wire crosses the electrode via of pin "
                   << vo->second;
                say(os.str());
            }
        }
        // connectivity: every terminal reaches the pad over the net's edges
        std::map<Cell, std::vector<Cell>> adj;
        for (const auto& [a, b] : n.edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::set<Cell> seen;
        std::deque<Cell> queue{n.pad};
        seen.insert(n.pad);
        while (!queue.empty()) {
            Cell cur = queue.front();
            queue.pop_front();
            for (const Cell& nx : adj[cur])
                if (seen.insert(nx).second) queue.push_back(nx);
        }
        for (const Cell& t : n.terminals)
            if (!seen.count(t)) {
                std::ostringstream os;
                os << tag.str() << ": terminal (" << t.row << "," << t.col
                   << ") not connected to its pad";
                say(os.str());
            }
    }
    return errs;
}

double cost_score(const CostReport& report, const UnitCosts& costs) {
    double area = static_cast<double>(report.rows) * report.cols * report.pitch *
                  report.pitch;
    return costs.area_unit * area + costs.layer_unit * report.layers_used +
           costs.driver_unit * report.pin_count;
}

std::string report_text(const CostReport& report) {
    std::ostringstream os;
    os << "rows " << report.rows << "\n";
    os << "cols " << report.cols << "\n";
    os << "pitch " << report.pitch << "\n";
    os << "pin_count " << report.pin_count << "\n";
    os << "routed_nets " << report.routed_nets << "\n";
    os << "failed_nets " << report.failed_nets.size() << "\n";
    for (PinId p : report.failed_nets) os << "failed_net " << p << "\n";
    os << "layers_used " << report.layers_used << "\n";
    os << "total_wire_length " << report.total_wire_length << "\n";
    return os.str();
}

std::string wires_svg(const ChipArchitecture& arch, const WireRouting& w) {
    const int unit = 8; // px per track step
    int width = w.track_cols * unit + 2 * unit;
    int height = w.track_rows * unit + 2 * unit;
    auto x = [&](int track_col) { return unit + track_col * unit; };
    auto y = [&](int track_row) { return unit + track_row * unit; };
    static const char* layer_color[] = {"#888888", "#1f77b4", "#d62728",
                                        "#2ca02c", "#9467bd"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
       << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height
       << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height
       << "\" fill=\"#ffffff\"/>\n";
    // electrodes
    for (int r = 0; r < arch.rows; ++r)
        for (int c = 0; c < arch.cols; ++c) {
            PinId p = arch.pin_at(Cell{r, c});
            os << "<rect x=\"" << x(c * kTracksPerPitch) << "\" y=\""
               << y(r * kTracksPerPitch) << "\" width=\"" << (kTracksPerPitch - 1) * unit
               << "\" height=\"" << (kTracksPerPitch - 1) * unit << "\" fill=\""
               << (p > 0 ? "#f2e8cf" : "#f7f7f7") << "\" stroke=\"#cccccc\"/>\n";
            if (p > 0)
                os << "<text x=\"" << x(c * kTracksPerPitch + kViaOffset) << "\" y=\""
                   << y(r * kTracksPerPitch + kViaOffset) + 3
                   << "\" font-size=\"7\" text-anchor=\"middle\" fill=\"#555555\">"
                   << p << "</text>\n";
        }
    // wires, grouped per layer so layers stack visibly
    int max_layer = 0;
    for (const WireNet& n : w.nets) max_layer = std::max(max_layer, n.layer);
    for (int layer = 1; layer <= max_layer; ++layer) {
        const char* color = layer_color[std::min(layer, 4)];
        os << "<g stroke=\"" << color << "\" stroke-width=\"1.5\" fill=\"none\">\n";
        for (const WireNet& n : w.nets) {
            if (n.layer != layer) continue;
            for (const auto& [a, b] : n.edges)
                os << "<line x1=\"" << x(a.col) << "\" y1=\"" << y(a.row)
                   << "\" x2=\"" << x(b.col) << "\" y2=\"" << y(b.row) << "\"/>\n";
        }
        os << "</g>\n";
    }
    // pads
    for (const WireNet& n : w.nets) {
        if (n.layer == 0) continue;
        os << "<circle cx=\"" << x(n.pad.col) << "\" cy=\"" << y(n.pad.row)
           << "\" r=\"3\" fill=\"#333333\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace lfpc
