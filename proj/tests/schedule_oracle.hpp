#pragma once

// Reference makespan for small assays, found by exhaustive search: every
// dependency-respecting insertion order is tried and each op is placed at
// its earliest feasible cycle under the same duration/latency/capacity
// rules the production scheduler follows.  The minimum over all orders is
// the reference value.  Written independently of the scheduler on purpose:
// it shares only the rule definitions, not the code.

#include "lfpc/architecture.hpp"
#include "lfpc/assay.hpp"
#include "lfpc/schedule.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace oracle {

struct Problem {
    struct Op {
        std::string id;
        lfpc::OpKind kind;
        std::string key;            // resource bucket ("mixer", "ssd", "in:x", "out", "out:p")
        int dur = 0;                // store: minimum 1, grows when consumed
        std::vector<int> preds;     // indices
        std::vector<int> pred_lat;  // latency on each pred edge
    };
    std::vector<Op> ops;
    std::map<std::string, int> cap;
};

inline Problem make_problem(const lfpc::BioassayDag& dag, const lfpc::ChipArchitecture& arch,
                            const lfpc::OpDurations& dur) {
    using namespace lfpc;
    LatencyModel lat = LatencyModel::for_chip(arch);
    Problem p;
    std::map<std::string, int> index;
    for (const auto& op : dag.ops) {
        Problem::Op o;
        o.id = op.id;
        o.kind = op.kind;
        switch (op.kind) {
        case OpKind::Dispense:
            o.key = "in:" + op.arg;
            o.dur = lat.dispense;
            break;
        case OpKind::Mix:
            o.key = "mixer";
            o.dur = dur.mix;
            break;
        case OpKind::Merge:
            o.key = "mixer";
            o.dur = dur.merge;
            break;
        case OpKind::Split:
            o.key = "ssd";
            o.dur = dur.split;
            break;
        case OpKind::Detect:
            o.key = "ssd";
            o.dur = dur.detect;
            break;
        case OpKind::Store:
            o.key = "ssd";
            o.dur = 1;
            break;
        case OpKind::Output:
            o.key = op.arg.empty() ? "out" : "out:" + op.arg;
            o.dur = lat.collect;
            break;
        }
        index[op.id] = (int)p.ops.size();
        p.ops.push_back(o);
    }
    for (const auto& e : dag.edges) {
        int s = index[e.src], d = index[e.dst];
        p.ops[d].preds.push_back(s);
        p.ops[d].pred_lat.push_back(lat.edge_latency(dag.find(e.src)->kind, dag.find(e.dst)->kind));
    }
    p.cap["mixer"] = (int)arch.sites_of(SiteKind::Mixer).size();
    p.cap["ssd"] = (int)arch.sites_of(SiteKind::Ssd).size();
    for (const auto& r : arch.reservoirs) {
        if (r.mode == ReservoirMode::Input)
            p.cap["in:" + r.fluid] += 1;
        else {
            p.cap["out"] += 1;
            p.cap["out:" + r.fluid] = 1;
        }
    }
    return p;
}

struct Search {
    const Problem& p;
    std::vector<int> start, end; // -1 = unplaced
    std::map<std::string, std::vector<std::pair<int, int>>> busy;
    int best;

    explicit Search(const Problem& prob)
        : p(prob), start(prob.ops.size(), -1), end(prob.ops.size(), -1), best(1 << 30) {}

    // max simultaneous load on `key` if `extra` intervals were added
    bool fits(const std::string& key, const std::vector<std::pair<int, int>>& extra) {
        auto itc = p.cap.find(key);
        int cap = itc == p.cap.end() ? 0 : itc->second;
        std::vector<std::pair<int, int>> events; // (time, +1/-1)
        auto push = [&](const std::pair<int, int>& iv) {
            if (iv.first < iv.second) {
                events.push_back({iv.first, 1});
                events.push_back({iv.second, -1});
            }
        };
        for (const auto& iv : busy[key]) push(iv);
        for (const auto& iv : extra) push(iv);
        std::sort(events.begin(), events.end(),
                  [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first < b.first : a.second < b.second;
                  });
        int load = 0;
        for (const auto& [t, d] : events) {
            load += d;
            if (load > cap) return false;
        }
        return true;
    }

    // intervals the placement of op i at cycle t would add, grouped by key;
    // returns false if t violates a readiness constraint
    bool placement(int i, int t, std::map<std::string, std::vector<std::pair<int, int>>>& add) {
        const auto& o = p.ops[i];
        add.clear();
        for (size_t k = 0; k < o.preds.size(); k++) {
            int pi = o.preds[k];
            int lat = o.pred_lat[k];
            if (p.ops[pi].kind == lfpc::OpKind::Store) {
                if (t < end[pi] + lat) return false;
                add["ssd"].push_back({end[pi], t - lat}); // extension of the store
            } else {
                int arrival = end[pi] + lat;
                if (t < arrival) return false;
                if (t > arrival) add["ssd"].push_back({arrival, t});
            }
        }
        add[o.key].push_back({t, t + o.dur});
        if (o.key.rfind("out:", 0) == 0) add["out"].push_back({t, t + o.dur});
        return true;
    }

    void place(int i, int t, const std::map<std::string, std::vector<std::pair<int, int>>>& add,
               std::vector<int>& grown) {
        start[i] = t;
        end[i] = t + p.ops[i].dur;
        for (const auto& [key, ivs] : add)
            for (const auto& iv : ivs) busy[key].push_back(iv);
        // a consumed store now runs until its droplet departs
        for (size_t k = 0; k < p.ops[i].preds.size(); k++) {
            int pi = p.ops[i].preds[k];
            if (p.ops[pi].kind == lfpc::OpKind::Store) {
                grown.push_back(pi);
                grown.push_back(end[pi]);
                end[pi] = std::max(end[pi], t - p.ops[i].pred_lat[k]);
            }
        }
    }

    void unplace(int i, const std::map<std::string, std::vector<std::pair<int, int>>>& add,
                 const std::vector<int>& grown) {
        start[i] = end[i] = -1;
        for (const auto& [key, ivs] : add)
            for (size_t k = 0; k < ivs.size(); k++) busy[key].pop_back();
        for (size_t k = grown.size(); k >= 2; k -= 2) end[grown[k - 2]] = grown[k - 1];
    }

    void run(int placed, int horizon) {
        if (placed == (int)p.ops.size()) {
            int mk = 0;
            for (int e : end) mk = std::max(mk, e);
            best = std::min(best, mk);
            return;
        }
        for (int i = 0; i < (int)p.ops.size(); i++) {
            if (start[i] >= 0) continue;
            bool ready = true;
            int earliest = 0;
            for (size_t k = 0; k < p.ops[i].preds.size(); k++) {
                int pi = p.ops[i].preds[k];
                if (start[pi] < 0) {
                    ready = false;
                    break;
                }
                earliest = std::max(earliest, end[pi] + p.ops[i].pred_lat[k]);
            }
            if (!ready) continue;
            std::map<std::string, std::vector<std::pair<int, int>>> add;
            for (int t = earliest; t < horizon; t++) {
                if (!placement(i, t, add)) continue;
                bool ok = true;
                for (const auto& [key, ivs] : add)
                    if (!fits(key, ivs)) {
                        ok = false;
                        break;
                    }
                if (!ok) continue;
                if (t + p.ops[i].dur < best) { // placements at/after best cannot win
                    std::vector<int> grown;
                    place(i, t, add, grown);
                    run(placed + 1, horizon);
                    unplace(i, add, grown);
                }
                break; // earliest feasible only: later starts explored via other orders
            }
        }
    }
};

// Minimum makespan over every dependency-respecting insertion order, or a
// huge sentinel if nothing fits inside the horizon.
inline int oracle_makespan(const lfpc::BioassayDag& dag, const lfpc::ChipArchitecture& arch,
                           const lfpc::OpDurations& dur, int horizon = 4000) {
    Problem p = make_problem(dag, arch, dur);
    Search s(p);
    s.run(0, horizon);
    return s.best;
}

} // namespace oracle
