#include "lfpc/place.hpp"

#include <algorithm>

namespace lfpc {

namespace {

struct Window {
    int start, end;
};

bool overlaps(const Window& a, int start, int end) {
    return a.start < end && start < a.end;
}

struct Occupancy {
    std::map<std::string, std::vector<Window>> busy;

    bool free_over(const std::string& site, int start, int end) const {
        auto it = busy.find(site);
        if (it == busy.end()) return true;
        for (const auto& w : it->second)
            if (overlaps(w, start, end)) return false;
        return true;
    }

    void take(const std::string& site, int start, int end) {
        busy[site].push_back({start, end});
    }
};

} // namespace

BindResult bind_sites(const Schedule& sched, const BioassayDag& dag,
                      const ChipArchitecture& arch) {
    BindResult res;
    Binding b;
    Occupancy occ;

    std::vector<std::string> mixers, ssds, out_ports;
    for (const auto& s : arch.sites)
        (s.kind == SiteKind::Mixer ? mixers : ssds).push_back(s.id);
    std::map<std::string, std::vector<std::string>> in_pools; // fluid -> reservoirs
    for (const auto& r : arch.reservoirs) {
        if (r.mode == ReservoirMode::Input)
            in_pools[r.fluid].push_back(r.id);
        else
            out_ports.push_back(r.id);
    }
    std::map<std::string, size_t> in_cursor;
    size_t out_cursor = 0;

    auto first_free = [&](const std::vector<std::string>& pool, size_t from, int start,
                          int end) -> const std::string* {
        for (size_t k = 0; k < pool.size(); k++) {
            const std::string& cand = pool[(from + k) % pool.size()];
            if (occ.free_over(cand, start, end)) return &pool[(from + k) % pool.size()];
        }
        return nullptr;
    };

    // port-hinted outputs first: they have no freedom
    for (const auto& op : sched.ops) {
        const AssayOp* ao = dag.find(op.id);
        if (ao->kind != OpKind::Output || ao->arg.empty()) continue;
        const Reservoir* r = nullptr;
        for (const auto& cand : arch.reservoirs)
            if (cand.mode == ReservoirMode::Output && cand.fluid == ao->arg) r = &cand;
        if (!r) {
            res.error = "no output port named '" + ao->arg + "'";
            return res;
        }
        if (!occ.free_over(r->id, op.start, op.end)) {
            res.error = "port '" + r->id + "' double-booked for '" + op.id + "'";
            return res;
        }
        occ.take(r->id, op.start, op.end);
        b.site_of[op.id] = r->id;
    }

    // one chronological stream: ops first at equal starts, then parked
    struct Item {
        int start, end;
        int tag; // 0 = op, 1 = parked
        size_t idx;
        std::string key;
    };
    std::vector<Item> items;
    for (size_t i = 0; i < sched.ops.size(); i++)
        items.push_back({sched.ops[i].start, sched.ops[i].end, 0, i, sched.ops[i].id});
    for (size_t i = 0; i < sched.parked.size(); i++)
        items.push_back(
            {sched.parked[i].start, sched.parked[i].end, 1, i, sched.parked[i].producer});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b2) {
        if (a.start != b2.start) return a.start < b2.start;
        if (a.tag != b2.tag) return a.tag < b2.tag;
        return a.key < b2.key;
    });
    b.parked_site.resize(sched.parked.size());

    for (const auto& item : items) {
        if (item.tag == 1) {
            const std::string* site = first_free(ssds, 0, item.start, item.end);
            if (!site) {
                res.error = "no storage cell free while '" + item.key + "' output waits";
                return res;
            }
            occ.take(*site, item.start, item.end);
            b.parked_site[item.idx] = *site;
            continue;
        }
        const ScheduledOp& op = sched.ops[item.idx];
        const AssayOp* ao = dag.find(op.id);
        switch (ao->kind) {
        case OpKind::Mix:
        case OpKind::Merge: {
            const std::string* site = first_free(mixers, 0, op.start, op.end);
            if (!site) {
                res.error = "no mixer free for '" + op.id + "'";
                return res;
            }
            occ.take(*site, op.start, op.end);
            b.site_of[op.id] = *site;
            break;
        }
        case OpKind::Split:
        case OpKind::Detect:
        case OpKind::Store: {
            const std::string* site = first_free(ssds, 0, op.start, op.end);
            if (!site) {
                res.error = "no storage cell free for '" + op.id + "'";
                return res;
            }
            occ.take(*site, op.start, op.end);
            b.site_of[op.id] = *site;
            break;
        }
        case OpKind::Dispense: {
            auto pool = in_pools.find(ao->arg);
            if (pool == in_pools.end()) {
                res.error = "no input reservoir stocks '" + ao->arg + "'";
                return res;
            }
            size_t& cur = in_cursor[ao->arg];
            const std::string* r = first_free(pool->second, cur, op.start, op.end);
            if (!r) {
                res.error = "no reservoir free to dispense '" + op.id + "'";
                return res;
            }
            cur = (cur + 1) % pool->second.size();
            occ.take(*r, op.start, op.end);
            b.site_of[op.id] = *r;
            break;
        }
        case OpKind::Output: {
            if (!ao->arg.empty()) break; // already bound in the hinted pass
            if (out_ports.empty()) {
                res.error = "chip has no output ports";
                return res;
            }
            const std::string* r = first_free(out_ports, out_cursor, op.start, op.end);
            if (!r) {
                res.error = "no output port free for '" + op.id + "'";
                return res;
            }
            out_cursor = (out_cursor + 1) % out_ports.size();
            occ.take(*r, op.start, op.end);
            b.site_of[op.id] = *r;
            break;
        }
        }
    }
    res.binding = std::move(b);
    return res;
}

std::vector<std::string> validate_binding(const Binding& b, const Schedule& sched,
                                          const BioassayDag& dag,
                                          const ChipArchitecture& arch) {
    std::vector<std::string> out;

    struct Use {
        std::string who;
        int start, end;
    };
    std::map<std::string, std::vector<Use>> uses;

    for (const auto& op : sched.ops) {
        const std::string* site = b.find(op.id);
        if (!site) {
            out.push_back("'" + op.id + "' is not bound");
            continue;
        }
        const AssayOp* ao = dag.find(op.id);
        const ModuleSite* ms = arch.site(*site);
        const Reservoir* rv = arch.reservoir(*site);
        switch (ao->kind) {
        case OpKind::Mix:
        case OpKind::Merge:
            if (!ms || ms->kind != SiteKind::Mixer)
                out.push_back("'" + op.id + "' must bind to a mixer, got '" + *site + "'");
            break;
        case OpKind::Split:
        case OpKind::Detect:
        case OpKind::Store:
            if (!ms || ms->kind != SiteKind::Ssd)
                out.push_back("'" + op.id + "' must bind to a storage cell, got '" + *site +
                              "'");
            break;
        case OpKind::Dispense:
            if (!rv || rv->mode != ReservoirMode::Input)
                out.push_back("'" + op.id + "' must bind to an input reservoir");
            else if (rv->fluid != ao->arg)
                out.push_back("'" + op.id + "' dispenses '" + ao->arg + "' from a reservoir of '" +
                              rv->fluid + "'");
            break;
        case OpKind::Output:
            if (!rv || rv->mode != ReservoirMode::Output)
                out.push_back("'" + op.id + "' must bind to an output port");
            else if (!ao->arg.empty() && rv->fluid != ao->arg)
                out.push_back("'" + op.id + "' asked for port '" + ao->arg + "' but got '" +
                              rv->fluid + "'");
            break;
        }
        uses[*site].push_back({op.id, op.start, op.end});
    }

    if (b.parked_site.size() != sched.parked.size())
        out.push_back("parked droplet bindings out of step with the schedule");
    else
        for (size_t i = 0; i < sched.parked.size(); i++) {
            const ModuleSite* ms = arch.site(b.parked_site[i]);
            if (!ms || ms->kind != SiteKind::Ssd) {
                out.push_back("parked droplet from '" + sched.parked[i].producer +
                              "' not on a storage cell");
                continue;
            }
            uses[b.parked_site[i]].push_back({"parked droplet from '" +
                                                  sched.parked[i].producer + "'",
                                              sched.parked[i].start, sched.parked[i].end});
        }

    for (auto& [site, v] : uses) {
        std::sort(v.begin(), v.end(),
                  [](const Use& a, const Use& b2) { return a.start < b2.start; });
        for (size_t i = 1; i < v.size(); i++)
            if (v[i].start < v[i - 1].end)
                out.push_back("'" + site + "' double-booked: " + v[i - 1].who + " and " +
                              v[i].who);
    }
    return out;
}

} // namespace lfpc
