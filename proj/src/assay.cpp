#include "lfpc/assay.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace lfpc {

const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::Dispense: return "DISPENSE";
    case OpKind::Mix: return "MIX";
    case OpKind::Merge: return "MERGE";
    case OpKind::Split: return "SPLIT";
    case OpKind::Store: return "STORE";
    case OpKind::Detect: return "DETECT";
    case OpKind::Output: return "OUTPUT";
    }
    return "?";
}

std::optional<OpKind> op_kind_from(const std::string& token) {
    static const std::map<std::string, OpKind> table = {
        {"DISPENSE", OpKind::Dispense}, {"MIX", OpKind::Mix},
        {"MERGE", OpKind::Merge},       {"SPLIT", OpKind::Split},
        {"STORE", OpKind::Store},       {"DETECT", OpKind::Detect},
        {"OUTPUT", OpKind::Output},
    };
    auto it = table.find(token);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

int in_arity(OpKind k) {
    switch (k) {
    case OpKind::Dispense: return 0;
    case OpKind::Mix:
    case OpKind::Merge: return 2;
    default: return 1;
    }
}

int out_arity(OpKind k) {
    switch (k) {
    case OpKind::Output: return 0;
    case OpKind::Split: return 2;
    default: return 1;
    }
}

const AssayOp* BioassayDag::find(const std::string& id) const {
    for (const auto& op : ops)
        if (op.id == id) return &op;
    return nullptr;
}

std::vector<const DagEdge*> BioassayDag::in_edges(const std::string& id) const {
    std::vector<const DagEdge*> out;
    for (const auto& e : edges)
        if (e.dst == id) out.push_back(&e);
    return out;
}

std::vector<const DagEdge*> BioassayDag::out_edges(const std::string& id) const {
    std::vector<const DagEdge*> out;
    for (const auto& e : edges)
        if (e.src == id) out.push_back(&e);
    return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream is(line);
    std::string t;
    while (is >> t) toks.push_back(t);
    return toks;
}

// Kahn traversal; returns empty when a cycle prevents completion.
std::vector<std::string> kahn_order(const BioassayDag& dag, bool* complete) {
    std::map<std::string, int> indeg;
    for (const auto& op : dag.ops) indeg[op.id] = 0;
    for (const auto& e : dag.edges) indeg[e.dst]++;

    std::vector<std::string> ready;
    for (const auto& op : dag.ops)
        if (indeg[op.id] == 0) ready.push_back(op.id);
    std::sort(ready.begin(), ready.end());

    std::vector<std::string> order;
    while (!ready.empty()) {
        std::string id = ready.front();
        ready.erase(ready.begin());
        order.push_back(id);
        std::vector<std::string> next;
        for (const auto& e : dag.edges)
            if (e.src == id && --indeg[e.dst] == 0) next.push_back(e.dst);
        std::sort(next.begin(), next.end());
        // keep the ready list sorted for deterministic order
        for (const auto& n : next)
            ready.insert(std::upper_bound(ready.begin(), ready.end(), n), n);
    }
    if (complete) *complete = order.size() == dag.ops.size();
    return order;
}

} // namespace

ParseResult parse_dag(const std::string& text) {
    BioassayDag dag;
    std::set<std::string> ids;

    auto fail = [](int line, std::string msg) {
        ParseResult r;
        r.error = ParseError{line, std::move(msg)};
        return r;
    };

    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        lineno++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto toks = split_ws(line);
        if (toks.empty()) continue;

        if (toks[0] == "node") {
            if (toks.size() < 3 || toks.size() > 4)
                return fail(lineno, "node line needs: node <id> <KIND> [arg]");
            auto kind = op_kind_from(toks[2]);
            if (!kind) return fail(lineno, "unknown kind '" + toks[2] + "'");
            if (!ids.insert(toks[1]).second)
                return fail(lineno, "duplicate id '" + toks[1] + "'");
            AssayOp op;
            op.id = toks[1];
            op.kind = *kind;
            if (toks.size() == 4) op.arg = toks[3];
            if (op.kind == OpKind::Dispense && op.arg.empty())
                return fail(lineno, "dispense '" + op.id + "' needs a fluid name");
            dag.ops.push_back(op);
        } else if (toks[0] == "edge") {
            if (toks.size() != 4)
                return fail(lineno, "edge line needs: edge <src> <dst> <slot>");
            DagEdge e;
            e.src = toks[1];
            e.dst = toks[2];
            try {
                e.slot = std::stoi(toks[3]);
            } catch (...) {
                return fail(lineno, "slot '" + toks[3] + "' is not a number");
            }
            if (!ids.count(e.src)) return fail(lineno, "unknown node '" + e.src + "'");
            if (!ids.count(e.dst)) return fail(lineno, "unknown node '" + e.dst + "'");
            const AssayOp* src = dag.find(e.src);
            const AssayOp* dst = dag.find(e.dst);
            if (out_arity(src->kind) == 0)
                return fail(lineno, "'" + e.src + "' produces no droplet");
            if (e.slot < 1 || e.slot > in_arity(dst->kind))
                return fail(lineno, "arity mismatch: '" + e.dst + "' has no input slot " +
                                        toks[3]);
            dag.edges.push_back(e);
        } else {
            return fail(lineno, "unknown directive '" + toks[0] + "'");
        }
    }

    bool complete = false;
    auto order = kahn_order(dag, &complete);
    if (!complete) {
        // name one op on a cycle for the message
        std::set<std::string> done(order.begin(), order.end());
        std::string culprit;
        for (const auto& op : dag.ops)
            if (!done.count(op.id)) { culprit = op.id; break; }
        return fail(0, "cycle detected involving '" + culprit + "'");
    }

    ParseResult r;
    r.dag = std::move(dag);
    return r;
}

std::vector<std::string> validate_dag(const BioassayDag& dag) {
    std::vector<std::string> out;

    std::set<std::string> ids;
    for (const auto& op : dag.ops) {
        if (!ids.insert(op.id).second) out.push_back("duplicate id '" + op.id + "'");
    }
    for (const auto& e : dag.edges) {
        if (!ids.count(e.src)) out.push_back("edge references unknown node '" + e.src + "'");
        if (!ids.count(e.dst)) out.push_back("edge references unknown node '" + e.dst + "'");
    }
    if (!out.empty()) return out;

    for (const auto& op : dag.ops) {
        // input slots: exactly one incoming edge per slot
        int ar = in_arity(op.kind);
        std::map<int, int> filled;
        for (const auto& e : dag.edges)
            if (e.dst == op.id) filled[e.slot]++;
        for (int s = 1; s <= ar; s++) {
            int n = filled.count(s) ? filled[s] : 0;
            if (n == 0)
                out.push_back(op.id + " input slot " + std::to_string(s) + " unfilled");
            else if (n > 1)
                out.push_back(op.id + " input slot " + std::to_string(s) + " filled " +
                              std::to_string(n) + " times");
        }
        for (const auto& [slot, n] : filled) {
            (void)n;
            if (slot > ar)
                out.push_back(op.id + " has no input slot " + std::to_string(slot));
        }

        // outputs: consumed exactly out_arity times; split fans to distinct consumers
        int produced = out_arity(op.kind);
        auto consumers = dag.out_edges(op.id);
        if ((int)consumers.size() < produced)
            out.push_back(op.id + " output unconsumed");
        else if ((int)consumers.size() > produced)
            out.push_back(op.id + " output consumed " + std::to_string(consumers.size()) +
                          " times, produces " + std::to_string(produced));
        if (op.kind == OpKind::Split && consumers.size() == 2 &&
            consumers[0]->dst == consumers[1]->dst)
            out.push_back(op.id + " split outputs must feed distinct consumers, both reach '" +
                          consumers[0]->dst + "'");
    }

    bool complete = false;
    auto order = kahn_order(dag, &complete);
    if (!complete) {
        std::set<std::string> done(order.begin(), order.end());
        for (const auto& op : dag.ops)
            if (!done.count(op.id)) {
                out.push_back("cycle detected involving '" + op.id + "'");
                break;
            }
    }
    return out;
}

std::string print_dag(const BioassayDag& dag) {
    auto ops = dag.ops;
    std::sort(ops.begin(), ops.end(),
              [](const AssayOp& a, const AssayOp& b) { return a.id < b.id; });
    auto edges = dag.edges;
    std::sort(edges.begin(), edges.end(), [](const DagEdge& a, const DagEdge& b) {
        if (a.src != b.src) return a.src < b.src;
        if (a.dst != b.dst) return a.dst < b.dst;
        return a.slot < b.slot;
    });

    std::ostringstream os;
    for (const auto& op : ops) {
        os << "node " << op.id << ' ' << to_string(op.kind);
        if (!op.arg.empty()) os << ' ' << op.arg;
        os << '\n';
    }
    for (const auto& e : edges)
        os << "edge " << e.src << ' ' << e.dst << ' ' << e.slot << '\n';
    return os.str();
}

std::vector<std::string> topo_order(const BioassayDag& dag) {
    bool complete = false;
    auto order = kahn_order(dag, &complete);
    return complete ? order : std::vector<std::string>{};
}

} // namespace lfpc
