#include "lfpc/schedule.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace lfpc {

const char* to_string(ResourceClass r) {
    switch (r) {
    case ResourceClass::Mixer: return "mixer";
    case ResourceClass::Ssd: return "ssd";
    case ResourceClass::ReservoirIn: return "in";
    case ResourceClass::ReservoirOut: return "out";
    }
    return "?";
}

LatencyModel LatencyModel::for_chip(const ChipArchitecture& arch) {
    LatencyModel m;
    int hrow = arch.path(PathId::Horizontal).cells.front().row;
    // typical trip: along a vertical path, then half the horizontal path,
    // plus boarding/landing handoff cycles
    m.transfer = arch.cols / 2 + 8;
    m.dispense = hrow + arch.cols / 2 + 4;
    m.collect = hrow + arch.cols / 2 + 4;
    return m;
}

int LatencyModel::edge_latency(OpKind src, OpKind dst) const {
    if (src == OpKind::Dispense) return 0; // dispense window ends at the site
    if (dst == OpKind::Output) return 0;   // collection window starts at the site
    return transfer;
}

const ScheduledOp* Schedule::find(const std::string& id) const {
    for (const auto& op : ops)
        if (op.id == id) return &op;
    return nullptr;
}

namespace {

struct Caps {
    std::map<std::string, int> by_key;

    static Caps of(const ChipArchitecture& arch) {
        Caps c;
        c.by_key["mixer"] = (int)arch.sites_of(SiteKind::Mixer).size();
        c.by_key["ssd"] = (int)arch.sites_of(SiteKind::Ssd).size();
        for (const auto& r : arch.reservoirs) {
            if (r.mode == ReservoirMode::Input)
                c.by_key["in:" + r.fluid] += 1;
            else {
                c.by_key["out"] += 1;
                c.by_key["out:" + r.fluid] = 1;
            }
        }
        return c;
    }

    int of_key(const std::string& k) const {
        auto it = by_key.find(k);
        return it == by_key.end() ? 0 : it->second;
    }
};

// per-key interval load with max-over-window queries
struct Load {
    std::map<std::string, std::map<int, int>> delta;

    void add(const std::string& key, int l, int r) {
        if (l >= r) return;
        delta[key][l] += 1;
        delta[key][r] -= 1;
    }

    // true when adding `extra` units over [l, r) keeps the key within cap
    bool fits(const std::string& key, int l, int r, int extra, int cap) const {
        return fits_all(key, {{l, r}}, cap, extra);
    }

    // exact sweep: existing load plus every interval in `extra` stays <= cap
    bool fits_all(const std::string& key, const std::vector<std::pair<int, int>>& extra,
                  int cap, int copies = 1) const {
        std::map<int, int> events;
        auto it = delta.find(key);
        if (it != delta.end()) events = it->second;
        for (const auto& [l, r] : extra)
            if (l < r) {
                events[l] += copies;
                events[r] -= copies;
            }
        int load = 0;
        for (const auto& [t, d] : events) {
            load += d;
            if (load > cap) return false;
        }
        return true;
    }
};

struct OpInfo {
    const AssayOp* op = nullptr;
    std::string key; // histogram bucket
    ResourceClass res = ResourceClass::Mixer;
    std::string res_key;
    int dur = 0;
    std::vector<std::pair<std::string, int>> preds; // (producer id, edge latency)
    long long priority = 0;
    int start = -1, end = -1;
};

} // namespace

ScheduleResult build_schedule(const BioassayDag& dag, const ChipArchitecture& arch,
                              const OpDurations& dur) {
    ScheduleResult res;
    LatencyModel lat = LatencyModel::for_chip(arch);
    Caps caps = Caps::of(arch);

    std::map<std::string, OpInfo> info;
    for (const auto& op : dag.ops) {
        OpInfo oi;
        oi.op = &op;
        switch (op.kind) {
        case OpKind::Dispense:
            oi.key = "in:" + op.arg;
            oi.res = ResourceClass::ReservoirIn;
            oi.res_key = op.arg;
            oi.dur = lat.dispense;
            if (caps.of_key(oi.key) == 0) {
                res.error = "no input reservoir stocks '" + op.arg + "'";
                return res;
            }
            break;
        case OpKind::Mix:
            oi.key = "mixer";
            oi.res = ResourceClass::Mixer;
            oi.dur = dur.mix;
            break;
        case OpKind::Merge:
            oi.key = "mixer";
            oi.res = ResourceClass::Mixer;
            oi.dur = dur.merge;
            break;
        case OpKind::Split:
            oi.key = "ssd";
            oi.res = ResourceClass::Ssd;
            oi.dur = dur.split;
            break;
        case OpKind::Detect:
            oi.key = "ssd";
            oi.res = ResourceClass::Ssd;
            oi.dur = dur.detect;
            break;
        case OpKind::Store:
            oi.key = "ssd";
            oi.res = ResourceClass::Ssd;
            oi.dur = 1; // grows until the consumer takes the droplet
            break;
        case OpKind::Output:
            oi.key = op.arg.empty() ? "out" : "out:" + op.arg;
            oi.res = ResourceClass::ReservoirOut;
            oi.res_key = op.arg;
            oi.dur = lat.collect;
            if (caps.of_key(op.arg.empty() ? "out" : oi.key) == 0) {
                res.error = "no output port named '" + op.arg + "'";
                return res;
            }
            break;
        }
        info[op.id] = oi;
    }
    for (const auto& e : dag.edges)
        info[e.dst].preds.push_back(
            {e.src, lat.edge_latency(dag.find(e.src)->kind, dag.find(e.dst)->kind)});

    // priority: longest duration+latency chain to any sink, ties by id
    auto order = topo_order(dag);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        OpInfo& oi = info[*it];
        oi.priority = oi.dur;
        long long best_tail = 0;
        for (const auto* e : dag.out_edges(*it)) {
            const OpInfo& c = info[e->dst];
            long long tail = lat.edge_latency(oi.op->kind, c.op->kind) + c.priority;
            best_tail = std::max(best_tail, tail);
        }
        oi.priority += best_tail;
    }

    Load load;
    Schedule sched;
    std::set<std::string> placed;
    // a fully serialized run is an upper bound on any feasible start
    int horizon = 64;
    for (const auto& [id, oi] : info) horizon += oi.dur + lat.transfer;
    horizon *= 2;

    while (placed.size() < dag.ops.size()) {
        // ready op with the longest tail (ties: smaller id)
        std::string pick;
        for (const auto& [id, oi] : info) {
            if (placed.count(id)) continue;
            bool ready = true;
            for (const auto& [p, l] : oi.preds)
                if (!placed.count(p)) ready = false;
            if (!ready) continue;
            if (pick.empty() || oi.priority > info[pick].priority ||
                (oi.priority == info[pick].priority && id < pick))
                pick = id;
        }
        OpInfo& oi = info[pick];

        int earliest = 0;
        for (const auto& [pid, plat] : oi.preds)
            earliest = std::max(earliest, info[pid].end + plat);

        int t = earliest;
        for (; t < horizon; t++) {
            bool ok = true;
            // parking space for early-arriving inputs (shared ssd bucket,
            // together with any store extensions and this op's own window)
            std::map<std::string, std::vector<std::pair<int, int>>> need;
            for (const auto& [pid, plat] : oi.preds) {
                const OpInfo& p = info[pid];
                if (p.op->kind == OpKind::Store)
                    need["ssd"].push_back({p.end, t - plat});
                else if (t > p.end + plat)
                    need["ssd"].push_back({p.end + plat, t});
            }
            need[oi.key].push_back({t, t + oi.dur});
            if (oi.key.rfind("out:", 0) == 0) need["out"].push_back({t, t + oi.dur});
            for (const auto& [key, ivs] : need)
                if (!load.fits_all(key, ivs, caps.of_key(key))) {
                    ok = false;
                    break;
                }
            if (ok) {
                for (const auto& [key, ivs] : need)
                    for (const auto& iv : ivs) load.add(key, iv.first, iv.second);
                for (const auto& [pid, plat] : oi.preds) {
                    OpInfo& p = info[pid];
                    if (p.op->kind == OpKind::Store)
                        p.end = std::max(p.end, t - plat);
                    else if (t > p.end + plat)
                        sched.parked.push_back({pid, pick, p.end + plat, t});
                }
                break;
            }
        }
        if (t >= horizon) {
            res.error = "unschedulable: no feasible start for '" + pick + "'";
            return res;
        }
        oi.start = t;
        oi.end = t + oi.dur;
        placed.insert(pick);
    }

    for (const auto& [id, oi] : info) {
        ScheduledOp so;
        so.id = id;
        so.start = oi.start;
        so.end = oi.end;
        so.res = oi.res;
        so.res_key = oi.res_key;
        sched.ops.push_back(so);
        sched.makespan = std::max(sched.makespan, oi.end);
    }
    std::sort(sched.ops.begin(), sched.ops.end(), [](const auto& a, const auto& b) {
        return a.start != b.start ? a.start < b.start : a.id < b.id;
    });
    std::sort(sched.parked.begin(), sched.parked.end(), [](const auto& a, const auto& b) {
        return a.start != b.start ? a.start < b.start : a.producer < b.producer;
    });
    res.schedule = std::move(sched);
    return res;
}

std::vector<std::string> validate_schedule(const Schedule& s, const BioassayDag& dag,
                                           const ChipArchitecture& arch,
                                           const OpDurations& dur) {
    std::vector<std::string> out;
    LatencyModel lat = LatencyModel::for_chip(arch);
    Caps caps = Caps::of(arch);

    std::map<std::string, const ScheduledOp*> by_id;
    for (const auto& op : s.ops) by_id[op.id] = &op;
    for (const auto& op : dag.ops)
        if (!by_id.count(op.id)) out.push_back("op '" + op.id + "' missing from schedule");
    if (!out.empty()) return out;

    for (const auto& op : s.ops) {
        if (op.start < 0 || op.end <= op.start)
            out.push_back("op '" + op.id + "' has an empty or negative window");
        const AssayOp* ao = dag.find(op.id);
        if (!ao) {
            out.push_back("op '" + op.id + "' is not in the protocol");
            continue;
        }
        int want = 0;
        switch (ao->kind) {
        case OpKind::Dispense: want = lat.dispense; break;
        case OpKind::Mix: want = dur.mix; break;
        case OpKind::Merge: want = dur.merge; break;
        case OpKind::Split: want = dur.split; break;
        case OpKind::Detect: want = dur.detect; break;
        case OpKind::Store: want = -1; break; // duration set by its consumer
        case OpKind::Output: want = lat.collect; break;
        }
        if (want >= 0 && op.end - op.start != want)
            out.push_back("op '" + op.id + "' runs " + std::to_string(op.end - op.start) +
                          " cycles, expected " + std::to_string(want));
    }

    // dependency safety, including travel time
    for (const auto& e : dag.edges) {
        const ScheduledOp* p = by_id[e.src];
        const ScheduledOp* c = by_id[e.dst];
        int l = lat.edge_latency(dag.find(e.src)->kind, dag.find(e.dst)->kind);
        if (dag.find(e.src)->kind == OpKind::Store) {
            if (c->start != p->end + l)
                out.push_back("store '" + p->id + "' ends at " + std::to_string(p->end) +
                              " but its consumer starts at " + std::to_string(c->start));
        } else if (c->start < p->end + l) {
            out.push_back("'" + e.dst + "' starts before its input from '" + e.src +
                          "' can arrive");
        }
    }

    // capacity sweep
    Load load;
    for (const auto& op : s.ops) {
        const AssayOp* ao = dag.find(op.id);
        std::string key;
        switch (ao->kind) {
        case OpKind::Dispense: key = "in:" + ao->arg; break;
        case OpKind::Mix:
        case OpKind::Merge: key = "mixer"; break;
        case OpKind::Split:
        case OpKind::Detect:
        case OpKind::Store: key = "ssd"; break;
        case OpKind::Output: key = ao->arg.empty() ? "out" : "out:" + ao->arg; break;
        }
        if (!load.fits(key, op.start, op.end, 1, caps.of_key(key)))
            out.push_back("resource '" + key + "' over capacity during '" + op.id + "'");
        load.add(key, op.start, op.end);
        if (key.rfind("out:", 0) == 0) {
            if (!load.fits("out", op.start, op.end, 1, caps.of_key("out")))
                out.push_back("output ports over capacity during '" + op.id + "'");
            load.add("out", op.start, op.end);
        }
    }
    for (const auto& pk : s.parked) {
        if (!load.fits("ssd", pk.start, pk.end, 1, caps.of_key("ssd")))
            out.push_back("storage over capacity while '" + pk.producer +
                          "' output waits for '" + pk.consumer + "'");
        load.add("ssd", pk.start, pk.end);
    }

    // every non-store gap between producer end and consumer start is parked
    for (const auto& e : dag.edges) {
        const AssayOp* src = dag.find(e.src);
        if (src->kind == OpKind::Store) continue;
        int l = lat.edge_latency(src->kind, dag.find(e.dst)->kind);
        int arrival = by_id[e.src]->end + l;
        int startc = by_id[e.dst]->start;
        if (startc > arrival) {
            bool found = false;
            for (const auto& pk : s.parked)
                if (pk.producer == e.src && pk.consumer == e.dst && pk.start == arrival &&
                    pk.end == startc)
                    found = true;
            if (!found)
                out.push_back("droplet from '" + e.src + "' to '" + e.dst +
                              "' waits with no storage booked");
        }
    }
    return out;
}

} // namespace lfpc
