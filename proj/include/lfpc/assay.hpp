#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lfpc {

// Operation vocabulary of a bioassay protocol graph.
//
// Dispense produces a droplet of a named fluid from an input reservoir.
// Mix and Merge combine two droplets (Merge is a 1-cycle Mix).
// Split produces two droplets from one; Store parks a droplet until its
// consumer is ready; Detect holds a droplet at a sensing site for a fixed
// window; Output collects a droplet at an output reservoir.
enum class OpKind { Dispense, Mix, Merge, Split, Store, Detect, Output };

const char* to_string(OpKind k);
std::optional<OpKind> op_kind_from(const std::string& token);

// Number of droplets consumed / produced by an operation.
int in_arity(OpKind k);
int out_arity(OpKind k);

struct AssayOp {
    std::string id;
    OpKind kind = OpKind::Dispense;
    // Dispense: fluid name.  Output: optional port hint.  Others: unused.
    std::string arg;
};

// Directed edge: droplet flows from `src` into input slot `slot` of `dst`.
// Slots are 1-based and bounded by in_arity(dst.kind).
struct DagEdge {
    std::string src;
    std::string dst;
    int slot = 1;
};

struct BioassayDag {
    std::vector<AssayOp> ops;
    std::vector<DagEdge> edges;

    const AssayOp* find(const std::string& id) const;
    std::vector<const DagEdge*> in_edges(const std::string& id) const;
    std::vector<const DagEdge*> out_edges(const std::string& id) const;
};

struct ParseError {
    int line = 0; // 0 when not tied to a specific line
    std::string message;
};

struct ParseResult {
    std::optional<BioassayDag> dag;
    std::optional<ParseError> error;

    bool ok() const { return dag.has_value(); }
};

// Line-oriented protocol text:
//   node <id> <KIND> [fluid-or-port]
//   edge <src> <dst> <slot>
//   # comment
// Returns a structurally sound graph (ids resolve, slots in range, acyclic)
// or an error naming the offending line.  Completeness checks (every slot
// filled, every output consumed) belong to validate_dag.
ParseResult parse_dag(const std::string& text);

// Returns human-readable invariant violations; empty means valid.
std::vector<std::string> validate_dag(const BioassayDag& dag);

// Canonical text form; parse_dag(print_dag(d)) reproduces d exactly.
std::string print_dag(const BioassayDag& dag);

// Ids in dependency order (every producer before its consumers).
// Requires an acyclic graph (as produced by parse_dag).
std::vector<std::string> topo_order(const BioassayDag& dag);

} // namespace lfpc
