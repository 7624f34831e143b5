#pragma once
// Cycle-accurate droplet router.
//
// The router owns a world model of the chip (droplet homes, path convoys,
// mixer-group cursors, junction locks, site reservations) and advances it
// one actuation cycle at a time.  Callers enqueue tasks -- dispense, move,
// merge, split, mix, dwell, collect -- and run the world until they finish.
// Every cycle the router assembles a candidate pin frame from the granted
// manoeuvres, then replays that frame through the shared movement-rule
// evaluator; a frame is committed only when the simulated outcome matches
// the intended one exactly, with zero rule violations.  Anything that fails
// validation is degraded (lowest-priority grant dropped first) until the
// frame is provably safe, so the emitted actuation plan carries a per-cycle
// machine-checked safety argument.
//
// Traffic discipline that keeps shared pins safe:
//  * per-path 3-phase convoys: all droplets on one path sit on cells of the
//    same phase class, spaced in multiples of 3, and advance in lockstep;
//  * one direction of travel per path at a time;
//  * junction corners are serialized by a transit lock; a dispense does not
//    emerge until it holds the lock for its junction;
//  * module cells touch the paths only through dedicated access electrodes,
//    and every site manoeuvre books its path/group exclusively per cycle;
//  * mixer groups rotate as one (shared loop pins), so rotations start only
//    when every resident is mid-mix with a full revolution remaining and no
//    stored droplet sits next to any ring corner.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lfpc/architecture.hpp"
#include "lfpc/motion.hpp"

namespace lfpc {

// Complete routed artefact: per-cycle pin frames, per-cycle droplet
// positions, and the side-band script (emerge/collect/merge/split marks)
// that lets the simulator replay the run independently.
struct RoutePlan {
    int cycles = 0;
    std::vector<std::set<PinId>> frames;            // frames[t] = pins driven in cycle t
    std::map<std::string, std::map<int, Cell>> pos; // droplet -> cycle -> cell
    SimScript script;
    std::vector<std::string> droplet_order;         // ids in first-appearance order
    std::vector<std::string> log;                   // arbitration / degrade notes
};

class Router {
public:
    explicit Router(const ChipArchitecture& arch);
    ~Router();
    Router(Router&&) noexcept;
    Router& operator=(Router&&) noexcept;

    struct Handle {
        int idx = -1;
    };
    enum class TaskStatus { Blocked, Ready, Running, Done, Failed };

    struct TaskInfo {
        TaskStatus status = TaskStatus::Blocked;
        int started = -1;      // cycle the first grant fired
        int finished = -1;     // completion cycle
        int ideal_length = 0;  // manoeuvre count along the nominal waypoints
        std::vector<Cell> waypoints;
        std::string error;
    };

    // --- task submission (all deferred; run with step()/run_until_done) ---

    // Dispense `droplet` from an input reservoir and park it at `dst_site`
    // (mixer ring entry or storage pocket).
    Handle dispense_to_site(const std::string& droplet, const std::string& reservoir,
                            const std::string& dst_site, int not_before);
    // Dispense and immediately collect at an output reservoir.
    Handle dispense_to_output(const std::string& droplet, const std::string& reservoir,
                              const std::string& out_reservoir, int not_before);
    // Move a parked/settled droplet to another site.
    Handle move_to_site(const std::string& droplet, const std::string& dst_site,
                        int not_before);
    // Bring `partner` to `mixer` where `resident` waits and pull them into
    // one droplet named `result`.
    Handle merge_at_mixer(const std::string& partner, const std::string& mixer,
                          const std::string& resident, const std::string& result,
                          int not_before);
    // Pull the stored droplet apart at its pocket; `child_io` lands on the
    // path-facing cell (and departs first), `child_far` stays home.
    Handle split_at_pocket(const std::string& parent, const std::string& child_io,
                           const std::string& child_far, int not_before);
    // Keep a mixer resident circulating for `cycles` (ring turns happen
    // opportunistically; completion is time-based).
    Handle mix(const std::string& droplet, int cycles, int not_before);
    // Hold a pocket droplet in place for `cycles` (detection etc.).
    Handle dwell(const std::string& droplet, int cycles, int not_before);
    // Send a droplet to an output reservoir and collect it.
    Handle send_to_output(const std::string& droplet, const std::string& out_reservoir,
                          int not_before);

    // --- execution ------------------------------------------------------

    bool step();                        // advance one cycle; false when idle
    bool run_until_done(int max_cycles); // true when every task finished
    int now() const;

    const TaskInfo& info(Handle h) const;
    bool all_done() const;
    bool any_failed() const;
    std::vector<std::string> failures() const;

    const RoutePlan& plan() const;

    // Introspection for tests and the pipeline.
    std::optional<Cell> droplet_cell(const std::string& id) const;
    std::string droplet_site(const std::string& id) const; // "" when not at a site

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Single-transport conveniences matching the pipeline's stall-until-done
// semantics: enqueue one task on the router and run it to completion.
struct RouteOutcome {
    bool ok = false;
    int departure = -1;
    int arrival = -1;
    std::string error;
};

RouteOutcome route_input(Router& r, const std::string& droplet,
                         const std::string& reservoir, const std::string& dst_site,
                         int not_before);
RouteOutcome route_transfer(Router& r, const std::string& droplet,
                            const std::string& dst_site, int not_before);
RouteOutcome route_output(Router& r, const std::string& droplet,
                          const std::string& out_reservoir, int not_before);

// Render plan positions as sorted trace lines: "at <cycle> <droplet> <row> <col>".
std::vector<std::string> trace_lines(const RoutePlan& plan);

}  // namespace lfpc
