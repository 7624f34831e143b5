#include "lfpc/dag_gen.hpp"
#include "lfpc/rng.hpp"

#include <string>
#include <vector>

namespace lfpc {

namespace {

struct Counters {
    int dispense = 0, mix = 0, merge = 0, split = 0, store = 0, detect = 0, output = 0;
};

std::string fresh_id(OpKind k, Counters& c) {
    switch (k) {
    case OpKind::Dispense: return "d" + std::to_string(++c.dispense);
    case OpKind::Mix: return "m" + std::to_string(++c.mix);
    case OpKind::Merge: return "g" + std::to_string(++c.merge);
    case OpKind::Split: return "s" + std::to_string(++c.split);
    case OpKind::Store: return "st" + std::to_string(++c.store);
    case OpKind::Detect: return "t" + std::to_string(++c.detect);
    case OpKind::Output: return "o" + std::to_string(++c.output);
    }
    return "x";
}

} // namespace

BioassayDag generate_random_dag(uint64_t seed, int max_nodes) {
    SplitMix64 rng(seed);
    BioassayDag dag;
    Counters counters;
    std::vector<std::string> open; // producer ids with an unconsumed droplet

    auto add_op = [&](OpKind k, std::string arg = "") {
        AssayOp op;
        op.id = fresh_id(k, counters);
        op.kind = k;
        op.arg = std::move(arg);
        dag.ops.push_back(op);
        return dag.ops.back().id;
    };
    auto connect = [&](const std::string& src, const std::string& dst, int slot) {
        dag.edges.push_back({src, dst, slot});
    };
    auto take = [&](size_t i) {
        std::string id = open[i];
        open.erase(open.begin() + i);
        return id;
    };
    // index pair with distinct producers, or (0,0) if none exists
    auto distinct_pair = [&]() -> std::pair<size_t, size_t> {
        for (int tries = 0; tries < 8; tries++) {
            size_t i = rng.below(open.size());
            size_t j = rng.below(open.size());
            if (i != j && open[i] != open[j]) return {i, j};
        }
        for (size_t i = 0; i < open.size(); i++)
            for (size_t j = 0; j < open.size(); j++)
                if (i != j && open[i] != open[j]) return {i, j};
        return {0, 0};
    };

    if (max_nodes < 2) max_nodes = 2;
    int nd = 1;
    if (max_nodes >= 6) nd = 2 + (int)rng.below(2);
    else if (max_nodes >= 4) nd = 1 + (int)rng.below(2);
    for (int i = 0; i < nd; i++)
        open.push_back(add_op(OpKind::Dispense, i % 2 == 0 ? "sample" : "reagent"));

    auto nodes = [&] { return (int)dag.ops.size(); };
    auto has_distinct_pair = [&]() {
        for (size_t i = 1; i < open.size(); i++)
            if (open[i] != open[0]) return true;
        return false;
    };

    for (;;) {
        enum Move { MMix, MMerge, MSplit, MDetect, MStore, MDispense };
        std::vector<std::pair<Move, int>> feasible;
        if (open.size() >= 2 && has_distinct_pair() && nodes() + (int)open.size() <= max_nodes) {
            feasible.push_back({MMix, 30});
            feasible.push_back({MMerge, 10});
        }
        if (!open.empty() && nodes() + (int)open.size() + 2 <= max_nodes)
            feasible.push_back({MSplit, 20});
        if (!open.empty() && nodes() + (int)open.size() + 1 <= max_nodes) {
            feasible.push_back({MDetect, 15});
            feasible.push_back({MStore, 10});
        }
        if (nodes() + (int)open.size() + 2 <= max_nodes) feasible.push_back({MDispense, 15});
        if (feasible.empty()) break;

        int total = 0;
        for (auto& [mv, wt] : feasible) total += wt;
        int pick = (int)rng.below((uint64_t)total);
        Move mv = feasible.back().first;
        for (auto& [m, wt] : feasible) {
            if (pick < wt) {
                mv = m;
                break;
            }
            pick -= wt;
        }

        switch (mv) {
        case MMix:
        case MMerge: {
            auto [i, j] = distinct_pair();
            std::string a = open[i], b = open[j];
            open.erase(open.begin() + std::max(i, j));
            open.erase(open.begin() + std::min(i, j));
            std::string id = add_op(mv == MMix ? OpKind::Mix : OpKind::Merge);
            connect(a, id, 1);
            connect(b, id, 2);
            open.push_back(id);
            break;
        }
        case MSplit: {
            std::string src = take(rng.below(open.size()));
            std::string id = add_op(OpKind::Split);
            connect(src, id, 1);
            open.push_back(id);
            open.push_back(id);
            break;
        }
        case MDetect:
        case MStore: {
            std::string src = take(rng.below(open.size()));
            std::string id = add_op(mv == MDetect ? OpKind::Detect : OpKind::Store);
            connect(src, id, 1);
            open.push_back(id);
            break;
        }
        case MDispense:
            open.push_back(add_op(OpKind::Dispense, rng.chance(50) ? "sample" : "reagent"));
            break;
        }
    }

    while (!open.empty()) {
        std::string src = take(0);
        if (nodes() + (int)open.size() + 2 <= max_nodes && rng.chance(25)) {
            std::string t = add_op(OpKind::Detect);
            connect(src, t, 1);
            src = t;
        }
        std::string o = add_op(OpKind::Output);
        connect(src, o, 1);
    }
    return dag;
}

} // namespace lfpc
