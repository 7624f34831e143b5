#pragma once

#include "lfpc/architecture.hpp"
#include "lfpc/assay.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lfpc {

// Resource pool an operation occupies while it runs.
enum class ResourceClass { Mixer, Ssd, ReservoirIn, ReservoirOut };
const char* to_string(ResourceClass r);

// Cycle-count estimates used before droplet routes exist.  Dispense and
// collection windows absorb the mouth<->site leg; site-to-site transfers
// ride on the consumer's start via edge latency.  The router later replaces
// these with measured values and the schedule is re-timed.
struct LatencyModel {
    int transfer = 0; // site -> site, roughly half a grid crossing plus handoff
    int dispense = 0; // reservoir mouth -> site, plus droplet emergence
    int collect = 0;  // site -> reservoir mouth, plus droplet removal

    static LatencyModel for_chip(const ChipArchitecture& arch);

    // Latency charged on an edge src -> dst.  Zero when the adjacent op's
    // own window already covers the trip (dispense out, collection in).
    int edge_latency(OpKind src, OpKind dst) const;
};

struct OpDurations {
    int mix = 20;
    int merge = 1;
    int split = 2;
    int detect = 10;
    // Store has no fixed duration: it runs from its droplet's arrival until
    // the consumer is ready (one cycle minimum).
};

struct ScheduledOp {
    std::string id;
    int start = 0, end = 0; // [start, end) in cycles
    ResourceClass res = ResourceClass::Mixer;
    std::string res_key; // ReservoirIn: fluid.  ReservoirOut: port or "".
};

// A droplet parked on a storage cell between its producer's end and its
// consumer's start (no explicit Store op in the protocol).
struct ParkedDroplet {
    std::string producer, consumer;
    int start = 0, end = 0;
};

struct Schedule {
    std::vector<ScheduledOp> ops; // sorted by (start, id)
    std::vector<ParkedDroplet> parked;
    int makespan = 0;

    const ScheduledOp* find(const std::string& id) const;
};

struct ScheduleResult {
    std::optional<Schedule> schedule;
    std::string error;

    bool ok() const { return schedule.has_value(); }
};

// List scheduling: ops become ready when all producers are placed, are
// picked by priority (longest duration+latency path to any sink, ties by
// smaller id), and start at the earliest cycle where their resource class,
// their inputs' parking needs, and per-fluid/per-port reservoir limits all
// fit.  Deterministic for identical inputs.
ScheduleResult build_schedule(const BioassayDag& dag, const ChipArchitecture& arch,
                              const OpDurations& dur = {});

// Replays the schedule against the dependency and capacity rules; empty
// result means the schedule is sound.
std::vector<std::string> validate_schedule(const Schedule& s, const BioassayDag& dag,
                                           const ChipArchitecture& arch,
                                           const OpDurations& dur = {});

} // namespace lfpc
