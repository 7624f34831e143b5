#include "lfpc/route.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace lfpc {

namespace {

constexpr int kDivertPatience = 24;  // cycles to wait before rerouting to a free pocket

std::string cat(std::initializer_list<std::string> parts) {
    std::string s;
    for (const auto& p : parts) s += p;
    return s;
}

} // namespace

// ---------------------------------------------------------------------------
// World model
// ---------------------------------------------------------------------------

struct Router::Impl {
    // --- static chip facts --------------------------------------------------
    const ChipArchitecture& arch;
    int vrows;        // cells per vertical path == horizontal path row
    int hcols;        // cells on the horizontal path
    int ring_len;     // mixer loop length
    std::array<const RoutingPath*, 3> paths{}; // 0 = left, 1 = horizontal, 2 = right
    std::array<std::vector<Cell>, 2> zone;     // junction mutual-exclusion cells (0 = left)

    // --- droplets -----------------------------------------------------------
    struct Drop {
        enum class Kind { OnPath, AtAccess, AtIo, AtHold, AtFar, Ring, Gone };
        Kind kind = Kind::Gone;
        Cell cell{};
        int path = -1;      // OnPath
        std::string site;   // site-relative kinds
        int task = -1;      // transport / site op currently owning the droplet
    };
    std::map<std::string, Drop> drops;

    // --- tasks --------------------------------------------------------------
    enum class Kind { Input, InputOut, Move, MergeMove, Output, Split, Mix, Dwell };
    struct Leg {
        enum class Kind { Emerge, Ride, Cross, Enter, Exit, Corner, Vanish };
        Kind kind{};
        int path = -1;       // Ride: path ridden; Cross: target path
        int dir = 0;         // Ride direction along the path index
        int target = -1;     // Ride: index to reach; Cross/Exit: landing index
        int from_path = -1;  // Cross: path left behind
    };
    struct Task {
        int id = -1;
        Kind kind{};
        std::string droplet;        // mover / parent / resident droplet
        std::string reservoir;      // Input*: source
        std::string out_reservoir;  // Output / InputOut: sink
        std::string aim;            // current destination site
        std::string final_aim;      // original destination (divert bookkeeping)
        std::string resident, result;     // MergeMove
        std::string child_io, child_far;  // Split
        int cycles = 0;             // Mix / Dwell
        int not_before = 0;
        int runnable = -1;
        int deadline = -1;
        int start_cycle = -1;       // Mix / Dwell
        int wait_since = -1;        // reservation wait for divert timer
        bool has_reservation = false;
        std::array<bool, 2> lock{{false, false}};
        std::vector<Leg> legs;
        size_t leg = 0;
        TaskStatus status = TaskStatus::Blocked;
        TaskInfo info;
    };
    std::vector<Task> tasks;

    // --- choreography sequences --------------------------------------------
    struct HomeSet {
        std::string droplet;
        Drop::Kind kind{};
        Cell cell{};
        int path = -1;
        std::string site;
    };
    struct PClaim {
        int path = -1;
        bool pinned = false; // false = quiesce (no pin), true = fire phase `cls`
        int cls = 0;
    };
    struct SeqStep {
        std::set<PinId> pins;
        std::vector<std::pair<std::string, Cell>> movers;
        std::vector<SimScript::Appear> appears;
        std::vector<SimScript::Vanish> vanishes;
        std::vector<SimScript::Merge> merges;
        std::vector<SimScript::Split> splits;
        std::vector<PClaim> claims;
        std::vector<HomeSet> homes;
        bool ring_advance = false; // rotate owning group cursor after this step
    };
    struct Seq {
        int task = -1;   // -1 for pure rotations
        int group = -1;  // booked mixer group, when any
        int begin = 0;
        std::string tag;
        std::vector<SeqStep> steps;
    };
    std::vector<Seq> active;

    // --- exclusivity ledgers ------------------------------------------------
    // One claim per path per cycle; seqs book theirs ahead at grant time.
    std::array<std::map<int, PClaim>, 3> path_book;
    std::array<std::map<int, int>, 2> group_book; // cycle -> owning task
    std::array<int, 2> cursor{{0, 0}};
    std::array<int, 2> lock_holder{{-1, -1}};     // junction transit locks
    std::map<std::string, std::string> site_owner; // site -> droplet (resident or inbound)

    RoutePlan plan;
    std::vector<std::string> degrade_notes;

    explicit Impl(const ChipArchitecture& a) : arch(a) {
        paths[0] = &arch.path(PathId::VerticalLeft);
        paths[1] = &arch.path(PathId::Horizontal);
        paths[2] = &arch.path(PathId::VerticalRight);
        vrows = static_cast<int>(paths[0]->cells.size());
        hcols = static_cast<int>(paths[1]->cells.size());
        ring_len = static_cast<int>(arch.sites_of(SiteKind::Mixer).front()->loop_cells.size());
        zone[0] = {Cell{vrows - 2, 0}, Cell{vrows - 1, 0}, Cell{vrows, 0}, Cell{vrows, 1}};
        int rc = arch.cols - 1;
        zone[1] = {Cell{vrows - 2, rc}, Cell{vrows - 1, rc}, Cell{vrows, rc}, Cell{vrows, rc - 1}};
    }

    int now() const { return static_cast<int>(plan.frames.size()); }

    // --- small helpers ------------------------------------------------------
    static int cls_of(int index) { return ((index % 3) + 3) % 3; }
    PinId phase_pin(int p, int index) const { return paths[p]->phase_pins[cls_of(index)]; }
    int side_of_res(const Reservoir& r) const { return r.side == Side::Left ? 0 : 1; }
    int junction_col(int side) const { return side == 0 ? 0 : arch.cols - 1; }
    int vpath_of_side(int side) const { return side == 0 ? 0 : 2; }
    int group_index(SiteGroup g) const { return g == SiteGroup::Above ? 0 : 1; }

    int access_col(const ModuleSite& s) const { return s.access_cell.col; }

    bool in_zone(int side, const Cell& c) const {
        for (const Cell& z : zone[side])
            if (z == c) return true;
        return false;
    }
    int zone_of(const Cell& c) const {
        for (int s = 0; s < 2; ++s)
            if (in_zone(s, c)) return s;
        return -1;
    }
    bool clear_of_zone(int side, const Cell& c) const {
        for (const Cell& z : zone[side])
            if (chebyshev(z, c) < 2) return false;
        return true;
    }

    const ModuleSite& site(const std::string& id) const {
        const ModuleSite* s = arch.site(id);
        assert(s);
        return *s;
    }
    const Reservoir& res(const std::string& id) const {
        const Reservoir* r = arch.reservoir(id);
        assert(r);
        return *r;
    }

    // Shared pins read straight off the grid so parameter changes follow.
    PinId io_pin(const ModuleSite& s) const { return arch.pin_at(s.io_cell); }
    PinId far_pin(const ModuleSite& s) const { return arch.pin_at(s.far_cell); }
    PinId hold_pin(const ModuleSite& s) const { return arch.pin_at(s.hold_cell); }
    PinId access_pin(const ModuleSite& s) const { return arch.pin_at(s.access_cell); }
    PinId loop_pin(int group, int pos) const {
        for (const auto& s : arch.sites)
            if (s.kind == SiteKind::Mixer && group_index(s.group) == group)
                return arch.pin_at(s.loop_cells[pos]);
        assert(false);
        return 0;
    }

    std::vector<const ModuleSite*> group_mixers(int g) const {
        std::vector<const ModuleSite*> v;
        for (const auto& s : arch.sites)
            if (s.kind == SiteKind::Mixer && group_index(s.group) == g) v.push_back(&s);
        return v;
    }
    std::vector<const ModuleSite*> corner_pockets(const ModuleSite& mixer) const {
        std::vector<const ModuleSite*> v;
        for (const auto& s : arch.sites)
            if (s.kind == SiteKind::Ssd && s.host_mixer == mixer.id) v.push_back(&s);
        return v;
    }
    int corner_ring_pos(const ModuleSite& mixer, const ModuleSite& pocket) const {
        for (size_t k = 0; k < mixer.loop_cells.size(); ++k)
            if (adjacent4(mixer.loop_cells[k], pocket.hold_cell)) return static_cast<int>(k);
        return -1;
    }

    bool site_cells_occupied(const ModuleSite& s) const {
        for (const auto& [id, d] : drops) {
            if (d.kind == Drop::Kind::Gone) continue;
            if (s.covers(d.cell)) return true;
        }
        return false;
    }
    std::vector<std::string> residents_of_group(int g) const {
        std::vector<std::string> v;
        for (const auto& [id, d] : drops)
            if (d.kind == Drop::Kind::Ring && group_index(site(d.site).group) == g)
                v.push_back(id);
        return v;
    }

    // Path membership.
    std::vector<std::string> members_of(int p) const {
        std::vector<std::string> v;
        for (const auto& [id, d] : drops)
            if (d.kind == Drop::Kind::OnPath && d.path == p) v.push_back(id);
        return v;
    }
    int index_on(int p, const Cell& c) const { return paths[p]->index_of(c); }

    // All members sit on one phase class; empty -> -1.
    int member_class(int p) const {
        int cls = -1;
        for (const auto& id : members_of(p)) {
            int i = index_on(p, drops.at(id).cell);
            int c = cls_of(i);
            if (cls == -1) cls = c;
            assert(cls == c && "path convoy lost phase alignment");
        }
        return cls;
    }
    int member_dir(int p) const {
        for (const auto& id : members_of(p)) {
            const Task& t = tasks[drops.at(id).task];
            if (t.leg < t.legs.size()) {
                const Leg& l = t.legs[t.leg];
                if (l.kind == Leg::Kind::Ride && l.path == p) return l.dir;
            }
        }
        return 0;
    }

    bool landing_ok(int p, int landing, int dir_wanted) const {
        auto mem = members_of(p);
        if (mem.empty()) return true;
        int dir = member_dir(p);
        if (dir != 0 && dir_wanted != 0 && dir != dir_wanted) return false;
        if (member_class(p) != cls_of(landing)) return false;
        for (const auto& id : mem) {
            int i = index_on(p, drops.at(id).cell);
            if (std::abs(i - landing) < 3) return false;
        }
        return true;
    }

    bool book_free(int p, int from, int count) const {
        for (int t = from; t < from + count; ++t)
            if (path_book[p].count(t)) return false;
        return true;
    }
    bool group_free(int g, int from, int count) const {
        for (int t = from; t < from + count; ++t)
            if (group_book[g].count(t)) return false;
        return true;
    }

    // ------------------------------------------------------------------
    // Task submission
    // ------------------------------------------------------------------
    int add_task(Task t) {
        t.id = static_cast<int>(tasks.size());
        tasks.push_back(std::move(t));
        return tasks.back().id;
    }

    // Nominal waypoints (ignores stalls); doubles as the ideal-length basis.
    std::vector<Cell> nominal_route(const Task& t) const {
        std::vector<Cell> w;
        auto ride_v = [&](int side, int from_row, int to_row) {
            int p = vpath_of_side(side);
            int step = to_row >= from_row ? 1 : -1;
            for (int r = from_row; r != to_row + step; r += step)
                w.push_back(paths[p]->cells[r]);
        };
        auto ride_h = [&](int from_col, int to_col) {
            int step = to_col >= from_col ? 1 : -1;
            for (int c = from_col; c != to_col + step; c += step)
                w.push_back(paths[1]->cells[c]);
        };
        auto enter_site = [&](const ModuleSite& s) {
            w.push_back(s.access_cell);
            w.push_back(s.io_cell);
            if (s.kind == SiteKind::Ssd) w.push_back(s.hold_cell);
        };
        auto exit_site = [&](const ModuleSite& s, const Drop* d) {
            if (s.kind == SiteKind::Ssd && d && d->kind == Drop::Kind::AtFar)
                w.push_back(s.far_cell);
            if (s.kind == SiteKind::Ssd && d &&
                (d->kind == Drop::Kind::AtHold || d->kind == Drop::Kind::AtFar))
                w.push_back(s.hold_cell);
            w.push_back(s.io_cell);
            w.push_back(s.access_cell);
        };
        switch (t.kind) {
        case Kind::Input: {
            const Reservoir& r = res(t.reservoir);
            int side = side_of_res(r);
            const ModuleSite& s = site(t.aim);
            w.push_back(r.mouth_cell);
            ride_v(side, 1, vrows - 1);
            ride_h(junction_col(side), access_col(s));
            enter_site(s);
            break;
        }
        case Kind::InputOut: {
            const Reservoir& in = res(t.reservoir);
            const Reservoir& out = res(t.out_reservoir);
            int si = side_of_res(in), so = side_of_res(out);
            w.push_back(in.mouth_cell);
            if (si == so) {
                ride_v(si, 1, out.mouth_cell.row);
            } else {
                ride_v(si, 1, vrows - 1);
                ride_h(junction_col(si), junction_col(so));
                ride_v(so, vrows - 1, out.mouth_cell.row);
            }
            break;
        }
        case Kind::Move:
        case Kind::MergeMove: {
            auto it = drops.find(t.droplet);
            const Drop* d = it == drops.end() ? nullptr : &it->second;
            if (!d || d->site.empty()) return w;
            const ModuleSite& a = site(d->site);
            const ModuleSite& b = site(t.aim);
            exit_site(a, d);
            ride_h(access_col(a), access_col(b));
            enter_site(b);
            break;
        }
        case Kind::Output: {
            auto it = drops.find(t.droplet);
            const Drop* d = it == drops.end() ? nullptr : &it->second;
            if (!d || d->site.empty()) return w;
            const ModuleSite& a = site(d->site);
            const Reservoir& out = res(t.out_reservoir);
            int so = side_of_res(out);
            exit_site(a, d);
            ride_h(access_col(a), junction_col(so));
            ride_v(so, vrows - 1, out.mouth_cell.row);
            break;
        }
        default:
            break;
        }
        return w;
    }

    void build_legs(Task& t) {
        t.legs.clear();
        t.leg = 0;
        auto ride = [&](int p, int dir, int target) {
            t.legs.push_back(Leg{Leg::Kind::Ride, p, dir, target, -1});
        };
        switch (t.kind) {
        case Kind::Input: {
            const Reservoir& r = res(t.reservoir);
            int side = side_of_res(r);
            int p = vpath_of_side(side);
            const ModuleSite& s = site(t.aim);
            t.legs.push_back(Leg{Leg::Kind::Emerge, p, 0, 0, -1});
            ride(p, +1, vrows - 1);
            t.legs.push_back(Leg{Leg::Kind::Cross, 1, 0, junction_col(side), p});
            int c = access_col(s);
            ride(1, c >= junction_col(side) ? +1 : -1, c);
            t.legs.push_back(Leg{Leg::Kind::Enter, -1, 0, -1, -1});
            break;
        }
        case Kind::InputOut: {
            const Reservoir& in = res(t.reservoir);
            const Reservoir& out = res(t.out_reservoir);
            int si = side_of_res(in), so = side_of_res(out);
            int pi = vpath_of_side(si), po = vpath_of_side(so);
            t.legs.push_back(Leg{Leg::Kind::Emerge, pi, 0, 0, -1});
            if (si == so) {
                ride(pi, +1, out.mouth_cell.row);
            } else {
                ride(pi, +1, vrows - 1);
                t.legs.push_back(Leg{Leg::Kind::Cross, 1, 0, junction_col(si), pi});
                ride(1, so == 1 ? +1 : -1, junction_col(so));
                t.legs.push_back(Leg{Leg::Kind::Cross, po, 0, vrows - 1, 1});
                ride(po, -1, out.mouth_cell.row);
            }
            t.legs.push_back(Leg{Leg::Kind::Vanish, po, 0, out.mouth_cell.row, -1});
            break;
        }
        case Kind::Move:
        case Kind::MergeMove: {
            const Drop& d = drops.at(t.droplet);
            const ModuleSite& a = site(d.site);
            const ModuleSite& b = site(t.aim);
            // Corner choreography is picked at grant time when legal; the
            // leg list here is the general io-route fallback.
            bool corner = t.kind == Kind::Move && a.kind == SiteKind::Mixer &&
                          b.kind == SiteKind::Ssd && b.host_mixer == a.id;
            if (corner) {
                t.legs.push_back(Leg{Leg::Kind::Corner, -1, 0, -1, -1});
                break;
            }
            int ca = access_col(a), cb = access_col(b);
            t.legs.push_back(Leg{Leg::Kind::Exit, 1, cb >= ca ? +1 : -1, ca, -1});
            ride(1, cb >= ca ? +1 : -1, cb);
            t.legs.push_back(Leg{Leg::Kind::Enter, -1, 0, -1, -1});
            break;
        }
        case Kind::Output: {
            const Drop& d = drops.at(t.droplet);
            const ModuleSite& a = site(d.site);
            const Reservoir& out = res(t.out_reservoir);
            int so = side_of_res(out);
            int po = vpath_of_side(so);
            int ca = access_col(a), jc = junction_col(so);
            t.legs.push_back(Leg{Leg::Kind::Exit, 1, jc >= ca ? +1 : -1, ca, -1});
            ride(1, jc >= ca ? +1 : -1, jc);
            t.legs.push_back(Leg{Leg::Kind::Cross, po, 0, vrows - 1, 1});
            ride(po, -1, out.mouth_cell.row);
            t.legs.push_back(Leg{Leg::Kind::Vanish, po, 0, out.mouth_cell.row, -1});
            break;
        }
        default:
            break; // Split / Mix / Dwell have no travel legs
        }
        t.info.waypoints = nominal_route(t);
        t.info.ideal_length =
            t.info.waypoints.empty() ? 1 : static_cast<int>(t.info.waypoints.size()) - 1;
    }

    // ------------------------------------------------------------------
    // Per-cycle engine
    // ------------------------------------------------------------------

    struct Built {
        std::set<PinId> pins;
        std::map<std::string, Cell> expected;
        SimScript marks;
        std::vector<const SeqStep*> steps; // steps applied this cycle
    };

    // Grants accepted this cycle (each already created a Seq in `active` and
    // recorded bookings); degrade pops from the back.
    struct GrantRec {
        size_t seq_index;
        int task;
        std::vector<std::pair<int, int>> path_bookings;  // (path, cycle)
        std::vector<std::pair<int, int>> group_bookings; // (group, cycle)
        int lock_side = -1;
    };

    void fail_task(Task& t, int when, const std::string& why) {
        t.status = TaskStatus::Failed;
        t.info.status = TaskStatus::Failed;
        t.info.error = why;
        t.info.finished = when;
        for (int s = 0; s < 2; ++s)
            if (lock_holder[s] == t.id) lock_holder[s] = -1;
        auto it = drops.find(t.droplet);
        if (it != drops.end() && it->second.task == t.id) it->second.task = -1;
        if (t.has_reservation) {
            auto o = site_owner.find(t.aim);
            if (o != site_owner.end() && o->second == t.droplet &&
                (it == drops.end() || it->second.site != t.aim))
                site_owner.erase(o);
        }
    }

    bool droplet_settled(const std::string& id) const {
        auto it = drops.find(id);
        if (it == drops.end()) return false;
        auto k = it->second.kind;
        return (k == Drop::Kind::AtHold || k == Drop::Kind::Ring ||
                k == Drop::Kind::AtIo || k == Drop::Kind::AtFar) &&
               it->second.task == -1;
    }

    void refresh(int t) {
        for (Task& task : tasks) {
            if (task.status == TaskStatus::Done || task.status == TaskStatus::Failed)
                continue;
            if (task.status == TaskStatus::Blocked) {
                bool ready = t >= task.not_before;
                switch (task.kind) {
                case Kind::Input:
                case Kind::InputOut:
                    break;
                case Kind::MergeMove:
                    ready = ready && droplet_settled(task.droplet) &&
                            droplet_settled(task.resident) &&
                            drops.at(task.resident).kind == Drop::Kind::Ring &&
                            drops.at(task.resident).site == task.aim;
                    break;
                case Kind::Split:
                    ready = ready && droplet_settled(task.droplet) &&
                            drops.at(task.droplet).kind == Drop::Kind::AtHold;
                    break;
                case Kind::Mix:
                    ready = ready && droplet_settled(task.droplet) &&
                            drops.at(task.droplet).kind == Drop::Kind::Ring;
                    break;
                case Kind::Dwell:
                    ready = ready && droplet_settled(task.droplet);
                    break;
                default:
                    ready = ready && droplet_settled(task.droplet);
                    break;
                }
                if (!ready) continue;
                task.status = TaskStatus::Ready;
                task.runnable = t;
                task.wait_since = t;
                if (task.kind == Kind::Mix || task.kind == Kind::Dwell) {
                    task.start_cycle = t;
                    task.info.started = t;
                    drops.at(task.droplet).task = task.id;
                    task.status = TaskStatus::Running;
                    continue;
                }
                if (!task.droplet.empty() && drops.count(task.droplet) &&
                    task.kind != Kind::Input && task.kind != Kind::InputOut)
                    drops.at(task.droplet).task = task.id;
            }
            if (task.status == TaskStatus::Ready || task.status == TaskStatus::Running) {
                // Mix / Dwell completion is purely time-based.
                if (task.kind == Kind::Mix || task.kind == Kind::Dwell) {
                    if (t >= task.start_cycle + task.cycles) {
                        task.status = TaskStatus::Done;
                        task.info.status = TaskStatus::Done;
                        task.info.finished = task.start_cycle + task.cycles;
                        drops.at(task.droplet).task = -1;
                    }
                    continue;
                }
                // Destination reservation for site-bound transports.
                bool needs_site = task.kind == Kind::Input || task.kind == Kind::Move;
                if (needs_site && !task.has_reservation) {
                    auto o = site_owner.find(task.aim);
                    std::string self = task.kind == Kind::Input ? task.droplet : task.droplet;
                    if (o == site_owner.end()) {
                        site_owner[task.aim] = self;
                        task.has_reservation = true;
                        if (task.legs.empty()) build_legs(task);
                    } else if (o->second == self) {
                        task.has_reservation = true;
                        if (task.legs.empty()) build_legs(task);
                    } else if (t - task.wait_since > kDivertPatience) {
                        // Deadlock breaker: fall back to the first free pocket.
                        for (const auto& s : arch.sites) {
                            if (s.kind != SiteKind::Ssd) continue;
                            if (s.id == task.aim) continue;
                            if (site_owner.count(s.id)) continue;
                            task.aim = s.id;
                            site_owner[s.id] = self;
                            task.has_reservation = true;
                            build_legs(task);
                            plan.log.push_back(cat({"divert ", task.droplet, " to ", s.id}));
                            break;
                        }
                        task.wait_since = t; // retry later if none free
                    }
                } else if (task.legs.empty() &&
                           (task.kind == Kind::MergeMove || task.kind == Kind::Output ||
                            task.kind == Kind::InputOut)) {
                    build_legs(task);
                }
                // Deadline bookkeeping once the task could in principle move.
                if (task.deadline < 0 && (task.has_reservation || !needs_site) &&
                    !task.legs.empty()) {
                    task.deadline = std::max(task.runnable, task.not_before) +
                                    10 * (std::max(task.info.ideal_length, 1) + 8);
                }
                if (task.kind == Kind::Split && task.deadline < 0)
                    task.deadline = std::max(task.runnable, task.not_before) + 120;
                if (task.deadline >= 0 && t > task.deadline) {
                    fail_task(task, t, cat({"deadline exceeded routing ", task.droplet,
                                            " toward ",
                                            task.aim.empty() ? task.out_reservoir : task.aim}));
                }
            }
        }
        // Junction ride-gate lock acquisition, FIFO order.
        for (int id : fifo_order()) {
            Task& task = tasks[id];
            if (task.status != TaskStatus::Ready && task.status != TaskStatus::Running)
                continue;
            if (task.leg >= task.legs.size()) continue;
            const Leg& l = task.legs[task.leg];
            if (l.kind != Leg::Kind::Ride) continue;
            auto it = drops.find(task.droplet);
            if (it == drops.end() || it->second.kind != Drop::Kind::OnPath) continue;
            int p = it->second.path;
            int i = index_on(p, it->second.cell);
            if (i == l.target) continue;
            Cell nxt = paths[p]->cells[i + l.dir];
            int side = zone_of(nxt);
            if (side < 0) continue;
            if (lock_holder[side] == task.id) continue;
            if (lock_holder[side] != -1) continue;
            // Upbound collection transits additionally need an empty target
            // vertical path; riding within one path just needs the zone.
            bool ok = true;
            for (size_t k = task.leg; k < task.legs.size() && ok; ++k) {
                if (task.legs[k].kind == Leg::Kind::Cross) {
                    int tp = task.legs[k].path;
                    if (tp != 1 && !members_of(tp).empty()) ok = false;
                }
            }
            if (ok) {
                lock_holder[side] = task.id;
                task.lock[side] = true;
            }
        }
        for (Task& task : tasks) task.info.status = task.status;
    }

    // A dispense must not claim the junction while settled traffic still has
    // to leave through it; the outbound transit gets the lock first.
    bool outbound_traffic_pending(int side) const {
        int vp = vpath_of_side(side);
        for (const Task& task : tasks) {
            if (task.status != TaskStatus::Ready && task.status != TaskStatus::Running)
                continue;
            auto it = drops.find(task.droplet);
            if (it == drops.end() || it->second.kind == Drop::Kind::Gone) continue;
            for (size_t k = task.leg; k < task.legs.size(); ++k) {
                const Leg& l = task.legs[k];
                if (l.kind == Leg::Kind::Cross && l.path == vp) return true;
                if (l.kind == Leg::Kind::Vanish && l.path == vp) return true;
            }
        }
        return false;
    }

    std::vector<int> fifo_order() const {
        std::vector<int> ids;
        for (const Task& t : tasks)
            if (t.status == TaskStatus::Ready || t.status == TaskStatus::Running)
                ids.push_back(t.id);
        std::sort(ids.begin(), ids.end(), [&](int a, int b) {
            const Task& x = tasks[a];
            const Task& y = tasks[b];
            if (x.runnable != y.runnable) return x.runnable < y.runnable;
            return x.id < y.id;
        });
        return ids;
    }

    // --- grant builders -----------------------------------------------------

    void book_path(GrantRec& g, int p, int cycle, PClaim claim) {
        path_book[p][cycle] = claim;
        g.path_bookings.push_back({p, cycle});
    }
    void book_group(GrantRec& g, int grp, int from, int count, int task) {
        for (int c = from; c < from + count; ++c) {
            group_book[grp][c] = task;
            g.group_bookings.push_back({grp, c});
        }
    }
    void unbook(const GrantRec& g) {
        for (auto [p, c] : g.path_bookings) path_book[p].erase(c);
        for (auto [grp, c] : g.group_bookings) group_book[grp].erase(c);
        if (g.lock_side >= 0) {
            lock_holder[g.lock_side] = -1;
            tasks[g.task].lock[g.lock_side] = false;
        }
        active.erase(active.begin() + g.seq_index);
    }

    // Try to grant the task's pending boundary manoeuvre at cycle t.
    bool try_grant(Task& task, int t, std::vector<GrantRec>& accepted) {
        if (task.kind == Kind::Split) return grant_split(task, t, accepted);
        if (task.legs.empty() || task.leg >= task.legs.size()) return false;
        const Leg& l = task.legs[task.leg];
        switch (l.kind) {
        case Leg::Kind::Emerge: return grant_emerge(task, t, accepted);
        case Leg::Kind::Cross: return grant_cross(task, t, accepted);
        case Leg::Kind::Enter: return grant_enter(task, t, accepted);
        case Leg::Kind::Exit: return grant_exit(task, t, accepted);
        case Leg::Kind::Corner: return grant_corner(task, t, accepted);
        case Leg::Kind::Vanish: return grant_vanish(task, t, accepted);
        default: return false;
        }
    }

    bool grant_emerge(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Reservoir& r = res(task.reservoir);
        int side = side_of_res(r);
        int p = vpath_of_side(side);
        bool needs_site = task.kind == Kind::Input;
        if (needs_site && !task.has_reservation) return false;
        if (!members_of(p).empty()) return false;
        if (lock_holder[side] != -1 && lock_holder[side] != task.id) return false;
        if (outbound_traffic_pending(side)) return false;
        // Horizontal direction must admit the post-cross ride.
        for (const Leg& leg : task.legs) {
            if (leg.kind == Leg::Kind::Ride && leg.path == 1) {
                int dir = member_dir(1);
                if (!members_of(1).empty() && dir != 0 && dir != leg.dir) return false;
            }
        }
        GrantRec g;
        g.task = task.id;
        if (lock_holder[side] != task.id) {
            lock_holder[side] = task.id;
            task.lock[side] = true;
            g.lock_side = side;
        }
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "emerge";
        SeqStep s;
        s.pins.insert(r.pin);
        s.appears.push_back(SimScript::Appear{t, task.droplet, r.mouth_cell, r.pin});
        s.homes.push_back(HomeSet{task.droplet, Drop::Kind::OnPath, r.mouth_cell, p, ""});
        q.steps.push_back(std::move(s));
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_cross(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.kind != Drop::Kind::OnPath) return false;
        const Leg& l = task.legs[task.leg];
        int from = d.path;
        int idx = index_on(from, d.cell);
        // must be at the boundary cell of the source path
        const Leg* prev = task.leg > 0 ? &task.legs[task.leg - 1] : nullptr;
        if (prev && prev->kind == Leg::Kind::Ride && idx != prev->target) return false;
        int tp = l.path;
        int landing = l.target;
        Cell dst = paths[tp]->cells[landing];
        if (!adjacent4(d.cell, dst)) return false;
        int side = zone_of(dst);
        if (side < 0) side = zone_of(d.cell);
        if (side >= 0 && lock_holder[side] != task.id) return false;
        int dir_next = 0;
        if (task.leg + 1 < task.legs.size() &&
            task.legs[task.leg + 1].kind == Leg::Kind::Ride)
            dir_next = task.legs[task.leg + 1].dir;
        if (!landing_ok(tp, landing, dir_next)) return false;
        if (!book_free(tp, t, 1) || !book_free(from, t, 1)) return false;
        for (const auto& [oid, od] : drops) {
            if (oid == task.droplet || od.kind == Drop::Kind::Gone) continue;
            if (od.kind == Drop::Kind::OnPath && od.path == tp) continue; // spacing done
            if (chebyshev(dst, od.cell) <= 1) return false;
        }
        GrantRec g;
        g.task = task.id;
        book_path(g, from, t, PClaim{from, false, 0});
        book_path(g, tp, t, PClaim{tp, true, cls_of(landing)});
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "cross";
        SeqStep s;
        s.pins.insert(phase_pin(tp, landing));
        s.movers.push_back({task.droplet, dst});
        s.claims.push_back(PClaim{from, false, 0});
        s.claims.push_back(PClaim{tp, true, cls_of(landing)});
        s.homes.push_back(HomeSet{task.droplet, Drop::Kind::OnPath, dst, tp, ""});
        q.steps.push_back(std::move(s));
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_enter(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.kind != Drop::Kind::OnPath || d.path != 1) return false;
        const ModuleSite& s = site(task.aim);
        if (index_on(1, d.cell) != access_col(s)) return false;
        bool merge = task.kind == Kind::MergeMove;
        int grp = group_index(s.group);
        int len = s.kind == SiteKind::Ssd ? 3 : 2;
        if (!group_free(grp, t, len)) return false;
        if (!book_free(1, t, 2)) return false;
        // target cells
        for (const auto& [oid, od] : drops) {
            if (od.kind == Drop::Kind::Gone || oid == task.droplet) continue;
            if (od.cell == s.access_cell) return false;
            if (od.cell == s.io_cell && !merge) return false;
            if (s.kind == SiteKind::Ssd &&
                (od.cell == s.hold_cell || od.cell == s.far_cell))
                return false;
        }
        if (merge) {
            auto rit = drops.find(task.resident);
            if (rit == drops.end() || rit->second.kind != Drop::Kind::Ring ||
                rit->second.site != s.id)
                return false;
            if (cursor[grp] != 0) return false;
        }
        GrantRec g;
        g.task = task.id;
        book_path(g, 1, t, PClaim{1, false, 0});
        book_path(g, 1, t + 1, PClaim{1, false, 0});
        book_group(g, grp, t, len, task.id);
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = merge ? "enter-merge" : "enter";
        {
            SeqStep s0;
            s0.pins.insert(access_pin(s));
            s0.movers.push_back({task.droplet, s.access_cell});
            s0.claims.push_back(PClaim{1, false, 0});
            s0.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtAccess, s.access_cell, -1, s.id});
            q.steps.push_back(std::move(s0));
        }
        {
            SeqStep s1;
            s1.pins.insert(io_pin(s));
            s1.movers.push_back({task.droplet, s.io_cell});
            s1.claims.push_back(PClaim{1, false, 0});
            if (merge) {
                s1.merges.push_back(SimScript::Merge{t + 1, task.droplet, task.resident,
                                                     task.result, s.io_cell});
                s1.homes.push_back(HomeSet{task.result, Drop::Kind::Ring, s.io_cell, -1, s.id});
            } else if (s.kind == SiteKind::Mixer) {
                s1.homes.push_back(HomeSet{task.droplet, Drop::Kind::Ring, s.io_cell, -1, s.id});
            } else {
                s1.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtIo, s.io_cell, -1, s.id});
            }
            q.steps.push_back(std::move(s1));
        }
        if (s.kind == SiteKind::Ssd) {
            SeqStep s2;
            s2.pins.insert(hold_pin(s));
            s2.movers.push_back({task.droplet, s.hold_cell});
            s2.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtHold, s.hold_cell, -1, s.id});
            q.steps.push_back(std::move(s2));
        }
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_exit(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.site.empty()) return false;
        const ModuleSite& s = site(d.site);
        const Leg& l = task.legs[task.leg];
        int landing = l.target;
        int grp = group_index(s.group);
        bool from_far = d.kind == Drop::Kind::AtFar;
        bool from_hold = d.kind == Drop::Kind::AtHold;
        int len = from_far ? 4 : from_hold ? 3 : 2;
        if (d.kind == Drop::Kind::Ring && cursor[grp] != 0) return false;
        if (!group_free(grp, t, len)) return false;
        if (!book_free(1, t, len)) return false;
        if (!landing_ok(1, landing, l.dir)) return false;
        // every cell along the way out must be clear
        for (const auto& [oid, od] : drops) {
            if (od.kind == Drop::Kind::Gone || oid == task.droplet) continue;
            if (from_far && od.cell == s.hold_cell) return false;
            if ((from_far || from_hold) && od.cell == s.io_cell) return false;
            if (od.cell == s.access_cell) return false;
            if (od.cell == paths[1]->cells[landing]) return false;
        }
        GrantRec g;
        g.task = task.id;
        for (int k = 0; k < len - 1; ++k)
            book_path(g, 1, t + k, PClaim{1, false, 0});
        book_path(g, 1, t + len - 1, PClaim{1, true, cls_of(landing)});
        book_group(g, grp, t, len, task.id);
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "exit";
        if (from_far) {
            SeqStep sf;
            sf.pins.insert(hold_pin(s));
            sf.movers.push_back({task.droplet, s.hold_cell});
            sf.claims.push_back(PClaim{1, false, 0});
            sf.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtHold, s.hold_cell, -1, s.id});
            q.steps.push_back(std::move(sf));
        }
        if (from_far || from_hold) {
            SeqStep s0;
            s0.pins.insert(io_pin(s));
            s0.movers.push_back({task.droplet, s.io_cell});
            s0.claims.push_back(PClaim{1, false, 0});
            s0.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtIo, s.io_cell, -1, s.id});
            q.steps.push_back(std::move(s0));
        }
        {
            SeqStep s1;
            s1.pins.insert(access_pin(s));
            s1.movers.push_back({task.droplet, s.access_cell});
            s1.claims.push_back(PClaim{1, false, 0});
            s1.homes.push_back(HomeSet{task.droplet, Drop::Kind::AtAccess, s.access_cell, -1, s.id});
            q.steps.push_back(std::move(s1));
        }
        {
            Cell dst = paths[1]->cells[landing];
            SeqStep s2;
            s2.pins.insert(phase_pin(1, landing));
            s2.movers.push_back({task.droplet, dst});
            s2.claims.push_back(PClaim{1, true, cls_of(landing)});
            s2.homes.push_back(HomeSet{task.droplet, Drop::Kind::OnPath, dst, 1, ""});
            q.steps.push_back(std::move(s2));
        }
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_corner(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.kind != Drop::Kind::Ring) return false;
        const ModuleSite& mixer = site(d.site);
        const ModuleSite& pocket = site(task.aim);
        int grp = group_index(mixer.group);
        if (cursor[grp] != 0) return false;
        // The short hop over the ring corner is only safe when this droplet
        // is the group's sole resident and every flanking pocket is empty;
        // otherwise commit to the ordinary io route instead.
        bool clear = residents_of_group(grp).size() == 1;
        for (const ModuleSite* c : corner_pockets(mixer))
            if (site_cells_occupied(*c)) clear = false;
        if (!clear) {
            task.legs.clear();
            const ModuleSite& a = mixer;
            const ModuleSite& b = pocket;
            int ca = access_col(a), cb = access_col(b);
            task.legs.push_back(Leg{Leg::Kind::Exit, 1, cb >= ca ? +1 : -1, ca, -1});
            task.legs.push_back(Leg{Leg::Kind::Ride, 1, cb >= ca ? +1 : -1, cb, -1});
            task.legs.push_back(Leg{Leg::Kind::Enter, -1, 0, -1, -1});
            task.leg = 0;
            return grant_exit(task, t, accepted);
        }
        int cpos = corner_ring_pos(mixer, pocket);
        if (cpos < 0) return false;
        int len = cpos + 1;
        if (!group_free(grp, t, len)) return false;
        GrantRec g;
        g.task = task.id;
        book_group(g, grp, t, len, task.id);
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "corner";
        for (int j = 1; j <= cpos; ++j) {
            SeqStep s;
            s.pins.insert(loop_pin(grp, j));
            s.movers.push_back({task.droplet, mixer.loop_cells[j]});
            s.ring_advance = true;
            s.homes.push_back(HomeSet{task.droplet, Drop::Kind::Ring, mixer.loop_cells[j], -1,
                                      mixer.id});
            q.steps.push_back(std::move(s));
        }
        {
            SeqStep s;
            s.pins.insert(hold_pin(pocket));
            s.movers.push_back({task.droplet, pocket.hold_cell});
            s.homes.push_back(
                HomeSet{task.droplet, Drop::Kind::AtHold, pocket.hold_cell, -1, pocket.id});
            q.steps.push_back(std::move(s));
        }
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_vanish(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.kind != Drop::Kind::OnPath) return false;
        const Reservoir& out = res(task.out_reservoir);
        if (d.cell != out.mouth_cell) return false;
        if (!book_free(d.path, t, 1)) return false;
        GrantRec g;
        g.task = task.id;
        book_path(g, d.path, t, PClaim{d.path, false, 0});
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "vanish";
        SeqStep s;
        s.pins.insert(out.pin);
        s.vanishes.push_back(SimScript::Vanish{t, task.droplet, out.mouth_cell, out.pin});
        s.claims.push_back(PClaim{d.path, false, 0});
        s.homes.push_back(HomeSet{task.droplet, Drop::Kind::Gone, out.mouth_cell, -1, ""});
        q.steps.push_back(std::move(s));
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    bool grant_split(Task& task, int t, std::vector<GrantRec>& accepted) {
        const Drop& d = drops.at(task.droplet);
        if (d.kind != Drop::Kind::AtHold) return false;
        const ModuleSite& s = site(d.site);
        int grp = group_index(s.group);
        if (!group_free(grp, t, 1)) return false;
        for (const auto& [oid, od] : drops) {
            if (od.kind == Drop::Kind::Gone || oid == task.droplet) continue;
            if (od.cell == s.io_cell || od.cell == s.far_cell) return false;
        }
        // The host ring must be parked: children land adjacent to mid-ring cells.
        const ModuleSite* host = arch.site(s.host_mixer);
        if (host) {
            for (const auto& [oid, od] : drops)
                if (od.kind == Drop::Kind::Ring && od.site == host->id && cursor[grp] != 0)
                    return false;
        }
        GrantRec g;
        g.task = task.id;
        book_group(g, grp, t, 1, task.id);
        Seq q;
        q.task = task.id;
        q.begin = t;
        q.tag = "split";
        // One pulse: both flanking electrodes fire while the held electrode is
        // released.  The children land two cells apart, so the pocket keeps a
        // legal gap between them; the far-side child stays put as the pocket
        // resident and the near-side child leaves through the ordinary exit.
        SeqStep s0;
        s0.pins.insert(io_pin(s));
        s0.pins.insert(far_pin(s));
        s0.splits.push_back(SimScript::Split{t, task.droplet, task.child_io, task.child_far,
                                             d.cell, s.io_cell, s.far_cell});
        s0.homes.push_back(HomeSet{task.child_io, Drop::Kind::AtIo, s.io_cell, -1, s.id});
        s0.homes.push_back(HomeSet{task.child_far, Drop::Kind::AtFar, s.far_cell, -1, s.id});
        q.steps.push_back(std::move(s0));
        g.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(g));
        return true;
    }

    // --- rotations ----------------------------------------------------------

    bool propose_rotation(int g, int t, std::vector<GrantRec>& accepted) {
        if (!group_free(g, t, ring_len)) return false;
        auto residents = residents_of_group(g);
        if (residents.empty()) return false;
        assert(cursor[g] == 0 && "group cursor off-park outside a choreography");
        for (const auto& id : residents) {
            const Drop& d = drops.at(id);
            if (d.task < 0) return false;
            const Task& mt = tasks[d.task];
            if (mt.kind != Kind::Mix || mt.status != TaskStatus::Running) return false;
            if (mt.start_cycle + mt.cycles - t < ring_len) return false;
        }
        for (const ModuleSite* m : group_mixers(g))
            for (const ModuleSite* c : corner_pockets(*m))
                if (site_cells_occupied(*c)) return false;
        GrantRec gr;
        gr.task = -1;
        book_group(gr, g, t, ring_len, -1);
        Seq q;
        q.task = -1;
        q.group = g;
        q.begin = t;
        q.tag = "rotate";
        for (int j = 1; j <= ring_len; ++j) {
            SeqStep s;
            int pos = j % ring_len;
            s.pins.insert(loop_pin(g, pos));
            s.ring_advance = true;
            for (const auto& id : residents) {
                const ModuleSite& m = site(drops.at(id).site);
                s.movers.push_back({id, m.loop_cells[pos]});
                s.homes.push_back(HomeSet{id, Drop::Kind::Ring, m.loop_cells[pos], -1, m.id});
            }
            q.steps.push_back(std::move(s));
        }
        gr.seq_index = active.size();
        active.push_back(std::move(q));
        accepted.push_back(std::move(gr));
        return true;
    }

    // --- path advances ------------------------------------------------------

    struct AdvPlan {
        int path;
        int dir;
        std::vector<std::pair<std::string, Cell>> movers;
    };

    std::optional<AdvPlan> propose_adv(int p, int t) const {
        if (path_book[p].count(t)) return std::nullopt;
        auto mem = members_of(p);
        if (mem.empty()) return std::nullopt;
        AdvPlan plan_out;
        plan_out.path = p;
        plan_out.dir = 0;
        for (const auto& id : mem) {
            const Drop& d = drops.at(id);
            if (d.task < 0) return std::nullopt;
            const Task& task = tasks[d.task];
            if (task.status != TaskStatus::Ready && task.status != TaskStatus::Running)
                return std::nullopt;
            if (task.leg >= task.legs.size()) return std::nullopt;
            const Leg& l = task.legs[task.leg];
            if (l.kind != Leg::Kind::Ride || l.path != p) return std::nullopt;
            int i = index_on(p, d.cell);
            if (i == l.target) return std::nullopt; // waiting on next manoeuvre
            if (plan_out.dir == 0) plan_out.dir = l.dir;
            if (plan_out.dir != l.dir) return std::nullopt;
            Cell nxt = paths[p]->cells[i + l.dir];
            // junction gate: entering the mutual-exclusion zone needs the lock
            int side = zone_of(nxt);
            if (side >= 0 && lock_holder[side] != task.id) return std::nullopt;
            // never advance into the interference radius of off-path droplets
            for (const auto& [oid, od] : drops) {
                if (od.kind == Drop::Kind::Gone || oid == id) continue;
                if (od.kind == Drop::Kind::OnPath && od.path == p) continue;
                if (chebyshev(nxt, od.cell) <= 1) return std::nullopt;
            }
            plan_out.movers.push_back({id, nxt});
        }
        return plan_out;
    }

    // --- frame assembly -----------------------------------------------------

    Built build_frame(int t, const std::vector<const SeqStep*>& steps,
                      const std::vector<AdvPlan>& advs) {
        Built b;
        b.steps = steps;
        std::set<int> claimed; // paths with an explicit claim this cycle
        for (const SeqStep* s : steps) {
            b.pins.insert(s->pins.begin(), s->pins.end());
            for (const auto& c : s->claims) {
                claimed.insert(c.path);
                if (c.pinned) b.pins.insert(paths[c.path]->phase_pins[c.cls]);
            }
            for (const auto& a : s->appears) {
                auto m = a;
                m.cycle = t;
                b.marks.appears.push_back(m);
            }
            for (const auto& v : s->vanishes) {
                auto m = v;
                m.cycle = t;
                b.marks.vanishes.push_back(m);
            }
            for (const auto& mg : s->merges) {
                auto m = mg;
                m.cycle = t;
                b.marks.merges.push_back(m);
            }
            for (const auto& sp : s->splits) {
                auto m = sp;
                m.cycle = t;
                b.marks.splits.push_back(m);
            }
        }
        // Path bookings made by sequences granted on earlier cycles also
        // claim their path this cycle.
        for (int p = 0; p < 3; ++p) {
            auto it = path_book[p].find(t);
            if (it != path_book[p].end()) {
                claimed.insert(p);
                if (it->second.pinned) b.pins.insert(paths[p]->phase_pins[it->second.cls]);
            }
        }
        std::map<std::string, Cell> movers;
        for (const SeqStep* s : steps)
            for (const auto& [id, dst] : s->movers) movers[id] = dst;
        for (const AdvPlan& a : advs) {
            claimed.insert(a.path);
            int cls = member_class(a.path);
            b.pins.insert(paths[a.path]->phase_pins[cls_of(cls + a.dir)]);
            for (const auto& [id, dst] : a.movers) movers[id] = dst;
        }
        // Default: a path with a convoy and no claim pins the convoy in place.
        for (int p = 0; p < 3; ++p) {
            if (claimed.count(p)) continue;
            int cls = member_class(p);
            if (cls >= 0) b.pins.insert(paths[p]->phase_pins[cls]);
        }
        // Anchor closure: every stationary droplet sitting next to an active
        // electrode gets its own electrode driven too, to a fixed point.
        auto active_cell = [&](const Cell& c) {
            if (!arch.in_bounds(c)) return false;
            PinId pid = arch.pin_at(c);
            return pid != 0 && b.pins.count(pid) > 0;
        };
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& [id, d] : drops) {
                if (d.kind == Drop::Kind::Gone) continue;
                if (movers.count(id)) continue;
                bool gone = false;
                for (const auto& v : b.marks.vanishes)
                    if (v.id == id) gone = true;
                for (const auto& sp : b.marks.splits)
                    if (sp.parent == id) gone = true;
                if (gone) continue;
                if (active_cell(d.cell)) continue;
                bool near = false;
                for (const Cell& n : neighbors4(d.cell))
                    if (active_cell(n)) near = true;
                if (near) {
                    PinId own = arch.pin_at(d.cell);
                    if (own != 0 && !b.pins.count(own)) {
                        b.pins.insert(own);
                        grew = true;
                    }
                }
            }
        }
        // Expected configuration after this cycle.
        std::map<std::string, Cell> exp;
        for (const auto& [id, d] : drops)
            if (d.kind != Drop::Kind::Gone) exp[id] = d.cell;
        for (const auto& v : b.marks.vanishes) exp.erase(v.id);
        for (const auto& sp : b.marks.splits) {
            exp.erase(sp.parent);
            exp[sp.child_io] = sp.to_io;
            exp[sp.child_far] = sp.to_far;
        }
        for (const auto& [id, dst] : movers) exp[id] = dst;
        for (const auto& mg : b.marks.merges) {
            exp.erase(mg.a);
            exp.erase(mg.b);
            exp[mg.result] = mg.at;
        }
        for (const auto& a : b.marks.appears) exp[a.id] = a.at;
        b.expected = std::move(exp);
        // Merges scripted for the next cycle inform this cycle's proximity
        // exemptions: the incoming partner is allowed to close to adjacency
        // one cycle before it lands on its counterpart.
        for (const Seq& q : active) {
            int idx = t + 1 - q.begin;
            if (idx < 0 || idx >= static_cast<int>(q.steps.size())) continue;
            for (const auto& mg : q.steps[idx].merges) {
                auto m = mg;
                m.cycle = t + 1;
                b.marks.merges.push_back(m);
            }
        }
        return b;
    }

    bool validate(const Built& b, int t, std::string* diag) const {
        std::map<std::string, Cell> cur;
        for (const auto& [id, d] : drops)
            if (d.kind != Drop::Kind::Gone) cur[id] = d.cell;
        StepResult r = step_movement(arch, b.pins, cur, t, b.marks);
        if (!r.violations.empty()) {
            if (diag) *diag = to_string(r.violations.front());
            return false;
        }
        if (r.next != b.expected) {
            if (diag) {
                for (const auto& [id, c] : b.expected) {
                    auto it = r.next.find(id);
                    if (it == r.next.end()) {
                        *diag = cat({id, " missing (expected ", to_string(c), ")"});
                        return false;
                    }
                    if (!(it->second == c)) {
                        *diag = cat({id, " at ", to_string(it->second), " expected ",
                                     to_string(c)});
                        return false;
                    }
                }
                for (const auto& [id, c] : r.next)
                    if (!b.expected.count(id)) *diag = cat({id, " unexpectedly present"});
            }
            return false;
        }
        return true;
    }

    // --- commit -------------------------------------------------------------

    void commit(const Built& b, int t) {
        plan.frames.push_back(b.pins);
        for (auto a : b.marks.appears) plan.script.appears.push_back(a);
        for (auto v : b.marks.vanishes) plan.script.vanishes.push_back(v);
        for (auto m : b.marks.merges)
            if (m.cycle == t) plan.script.merges.push_back(m); // skip look-ahead entries
        for (auto s : b.marks.splits) plan.script.splits.push_back(s);

        // Registration order: first-appearance order of every droplet id.
        auto reg = [&](const std::string& id) {
            if (std::find(plan.droplet_order.begin(), plan.droplet_order.end(), id) ==
                plan.droplet_order.end())
                plan.droplet_order.push_back(id);
        };
        for (const auto& a : b.marks.appears) reg(a.id);
        for (const auto& s : b.marks.splits) {
            reg(s.child_io);
            reg(s.child_far);
        }
        for (const auto& m : b.marks.merges)
            if (m.cycle == t) reg(m.result);

        // Apply movement: positions follow the validated expectation.
        for (const auto& v : b.marks.vanishes) {
            drops[v.id].kind = Drop::Kind::Gone;
            drops[v.id].task = -1;
        }
        for (const auto& s : b.marks.splits) drops[s.parent].kind = Drop::Kind::Gone;
        for (const auto& m : b.marks.merges) {
            if (m.cycle != t) continue;
            drops[m.a].kind = Drop::Kind::Gone;
            drops[m.b].kind = Drop::Kind::Gone;
        }
        for (const auto& [id, c] : b.expected) {
            Drop& d = drops[id];
            d.cell = c;
            // brand-new droplets get their real home from today's HomeSets
            if (d.kind == Drop::Kind::Gone) d.kind = Drop::Kind::OnPath;
        }
        // Home refinements + ring bookkeeping declared by today's steps.
        for (const SeqStep* s : b.steps) {
            for (const auto& h : s->homes) {
                Drop& d = drops[h.droplet];
                d.kind = h.kind;
                d.cell = h.cell;
                d.path = h.path;
                d.site = h.site;
            }
            if (s->ring_advance) {
                // exactly one group rotates per step; find it via the seq
            }
        }
        // Ring cursor advances for steps that declared one.
        for (Seq& q : active) {
            int step_idx = t - q.begin;
            if (step_idx < 0 || step_idx >= static_cast<int>(q.steps.size())) continue;
            if (q.steps[step_idx].ring_advance) {
                int g = q.group;
                if (g < 0 && q.task >= 0) {
                    const Drop& d = drops.at(tasks[q.task].droplet);
                    if (!d.site.empty()) g = group_index(site(d.site).group);
                }
                if (g >= 0) cursor[g] = (cursor[g] + 1) % ring_len;
            }
        }
        // OnPath refinement for plain advances (movers without HomeSet).
        for (auto& [id, d] : drops) {
            if (d.kind == Drop::Kind::OnPath && d.path >= 0) {
                assert(index_on(d.path, d.cell) >= 0);
            }
        }
        // Record positions.
        for (const auto& [id, d] : drops)
            if (d.kind != Drop::Kind::Gone) plan.pos[id][t] = d.cell;

        // Sequence completion / task progression.
        for (size_t i = 0; i < active.size();) {
            Seq& q = active[i];
            int step_idx = t - q.begin;
            if (step_idx + 1 >= static_cast<int>(q.steps.size())) {
                if (q.task >= 0) on_seq_done(tasks[q.task], q, t);
                else if (q.group >= 0) cursor[q.group] = 0;
                active.erase(active.begin() + i);
            } else {
                ++i;
            }
        }
        // Ride-leg completion & junction lock release.
        for (Task& task : tasks) {
            if (task.status != TaskStatus::Ready && task.status != TaskStatus::Running)
                continue;
            if (task.leg < task.legs.size() &&
                task.legs[task.leg].kind == Leg::Kind::Ride) {
                auto it = drops.find(task.droplet);
                if (it != drops.end() && it->second.kind == Drop::Kind::OnPath) {
                    const Leg& l = task.legs[task.leg];
                    if (index_on(l.path, it->second.cell) == l.target) ++task.leg;
                }
            }
            for (int sdx = 0; sdx < 2; ++sdx) {
                if (lock_holder[sdx] != task.id) continue;
                auto it = drops.find(task.droplet);
                bool release = false;
                if (it == drops.end() || it->second.kind == Drop::Kind::Gone) release = true;
                else if (it->second.kind != Drop::Kind::OnPath &&
                         it->second.kind != Drop::Kind::AtAccess)
                    release = true;
                else if (clear_of_zone(sdx, it->second.cell)) release = true;
                if (release) {
                    lock_holder[sdx] = -1;
                    task.lock[sdx] = false;
                }
            }
        }
        // Prune stale bookings.
        for (int p = 0; p < 3; ++p) path_book[p].erase(path_book[p].begin(),
                                                       path_book[p].upper_bound(t));
        for (int g = 0; g < 2; ++g) group_book[g].erase(group_book[g].begin(),
                                                        group_book[g].upper_bound(t));
    }

    void on_seq_done(Task& task, const Seq& q, int t) {
        if (task.info.started < 0) task.info.started = q.begin;
        if (q.tag == "vanish") {
            finish_task(task, t);
            return;
        }
        if (q.tag == "split") {
            // children become the pocket's concern; io child departs first
            site_owner[drops.at(task.child_far).site] = task.child_far;
            finish_task(task, t);
            return;
        }
        if (q.tag == "enter" || q.tag == "enter-merge" || q.tag == "corner") {
            std::string dweller = q.tag == "enter-merge" ? task.result : task.droplet;
            Drop& d = drops.at(dweller);
            site_owner[d.site] = dweller;
            if (q.tag == "corner") {
                // the vacated mixer frees up
                auto o = site_owner.begin();
                for (; o != site_owner.end(); ++o)
                    if (o->second == task.droplet && o->first != d.site) break;
                if (o != site_owner.end()) site_owner.erase(o);
                cursor[group_index(site(d.site).group)] = 0;
            }
            if (q.tag == "enter-merge") {
                drops.at(task.result).task = -1;
            }
            finish_task(task, t, dweller);
            return;
        }
        if (q.tag == "exit") {
            // source site freed once the droplet lands on the path
            for (auto it = site_owner.begin(); it != site_owner.end(); ++it) {
                if (it->second == task.droplet && it->first != task.aim) {
                    site_owner.erase(it);
                    break;
                }
            }
            ++task.leg;
            return;
        }
        if (q.tag == "cross" || q.tag == "emerge") {
            if (q.tag == "emerge") drops.at(task.droplet).task = task.id;
            ++task.leg;
            task.status = TaskStatus::Running;
            return;
        }
    }

    void finish_task(Task& task, int when, const std::string& dweller = "") {
        // A diverted transport resumes toward its original goal.
        if ((task.kind == Kind::Input || task.kind == Kind::Move) &&
            task.aim != task.final_aim) {
            std::string mover = dweller.empty() ? task.droplet : dweller;
            task.droplet = mover;
            task.kind = Kind::Move;
            task.aim = task.final_aim;
            task.has_reservation = false;
            task.legs.clear();
            task.leg = 0;
            task.deadline = -1;
            task.wait_since = now();
            task.status = TaskStatus::Ready;
            drops.at(mover).task = task.id;
            plan.log.push_back(cat({"resume ", mover, " toward ", task.final_aim}));
            return;
        }
        task.status = TaskStatus::Done;
        task.info.status = TaskStatus::Done;
        task.info.finished = when;
        std::string mover = dweller.empty() ? task.droplet : dweller;
        auto it = drops.find(mover);
        if (it != drops.end() && it->second.task == task.id) it->second.task = -1;
        if (!task.child_io.empty()) {
            auto c = drops.find(task.child_io);
            if (c != drops.end()) c->second.task = -1;
            c = drops.find(task.child_far);
            if (c != drops.end()) c->second.task = -1;
        }
    }

    // --- the cycle ----------------------------------------------------------

    bool everything_terminal() const {
        for (const Task& t : tasks)
            if (t.status != TaskStatus::Done && t.status != TaskStatus::Failed) return false;
        return true;
    }

    void advance() {
        const int t = now();
        refresh(t);
        if (everything_terminal()) return;

        // new grants, FIFO
        std::vector<GrantRec> accepted;
        for (int id : fifo_order()) {
            Task& task = tasks[id];
            bool busy = false;
            for (const Seq& q : active)
                if (q.task == id && t - q.begin < static_cast<int>(q.steps.size())) busy = true;
            if (busy) continue;
            if (task.kind == Kind::Mix || task.kind == Kind::Dwell) continue;
            try_grant(task, t, accepted);
        }
        // path advances
        std::vector<AdvPlan> advs;
        for (int p = 0; p < 3; ++p) {
            auto a = propose_adv(p, t);
            if (a) advs.push_back(*a);
        }
        // rotations
        std::vector<GrantRec> rot_grants;
        for (int g = 0; g < 2; ++g) propose_rotation(g, t, rot_grants);

        auto collect_steps = [&]() {
            std::vector<const SeqStep*> steps;
            for (const Seq& q : active) {
                int idx = t - q.begin;
                if (idx >= 0 && idx < static_cast<int>(q.steps.size()))
                    steps.push_back(&q.steps[idx]);
            }
            return steps;
        };

        std::string diag;
        while (true) {
            Built b = build_frame(t, collect_steps(), advs);
            if (validate(b, t, &diag)) {
                commit(b, t);
                return;
            }
            if (!rot_grants.empty()) {
                unbook(rot_grants.back());
                rot_grants.pop_back();
                continue;
            }
            if (!advs.empty()) {
                advs.pop_back();
                continue;
            }
            if (!accepted.empty()) {
                plan.log.push_back(cat({"degrade: ", diag}));
                unbook(accepted.back());
                accepted.pop_back();
                continue;
            }
            // Only forced steps remain; by construction they are exclusive,
            // so this indicates an internal inconsistency.  Freeze the world
            // for this cycle and surface the diagnostic.
            plan.log.push_back(cat({"contention: ", diag}));
            Built frozen = build_frame(t, {}, {});
            if (validate(frozen, t, &diag)) {
                commit(frozen, t);
            } else {
                // even the frozen frame failed -- record and stop hard
                plan.log.push_back(cat({"frozen frame invalid: ", diag}));
                for (Task& task : tasks)
                    if (task.status != TaskStatus::Done)
                        fail_task(task, t, "internal contention");
            }
            return;
        }
    }
};

// ---------------------------------------------------------------------------
// Public surface
// ---------------------------------------------------------------------------

Router::Router(const ChipArchitecture& arch) : impl_(std::make_unique<Impl>(arch)) {}
Router::~Router() = default;
Router::Router(Router&&) noexcept = default;
Router& Router::operator=(Router&&) noexcept = default;

int Router::now() const { return impl_->now(); }
const RoutePlan& Router::plan() const { return impl_->plan; }

Router::Handle Router::dispense_to_site(const std::string& droplet,
                                        const std::string& reservoir,
                                        const std::string& dst_site, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Input;
    t.droplet = droplet;
    t.reservoir = reservoir;
    t.aim = dst_site;
    t.final_aim = dst_site;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::dispense_to_output(const std::string& droplet,
                                          const std::string& reservoir,
                                          const std::string& out_reservoir, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::InputOut;
    t.droplet = droplet;
    t.reservoir = reservoir;
    t.out_reservoir = out_reservoir;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::move_to_site(const std::string& droplet, const std::string& dst_site,
                                    int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Move;
    t.droplet = droplet;
    t.aim = dst_site;
    t.final_aim = dst_site;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::merge_at_mixer(const std::string& partner, const std::string& mixer,
                                      const std::string& resident, const std::string& result,
                                      int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::MergeMove;
    t.droplet = partner;
    t.aim = mixer;
    t.final_aim = mixer;
    t.resident = resident;
    t.result = result;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::split_at_pocket(const std::string& parent, const std::string& child_io,
                                       const std::string& child_far, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Split;
    t.droplet = parent;
    t.child_io = child_io;
    t.child_far = child_far;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::mix(const std::string& droplet, int cycles, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Mix;
    t.droplet = droplet;
    t.cycles = cycles;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::dwell(const std::string& droplet, int cycles, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Dwell;
    t.droplet = droplet;
    t.cycles = cycles;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

Router::Handle Router::send_to_output(const std::string& droplet,
                                      const std::string& out_reservoir, int not_before) {
    Impl::Task t;
    t.kind = Impl::Kind::Output;
    t.droplet = droplet;
    t.out_reservoir = out_reservoir;
    t.not_before = not_before;
    return Handle{impl_->add_task(std::move(t))};
}

bool Router::step() {
    if (impl_->everything_terminal()) return false;
    impl_->advance();
    return true;
}

bool Router::run_until_done(int max_cycles) {
    while (!impl_->everything_terminal() && impl_->now() < max_cycles) {
        impl_->advance();
    }
    impl_->plan.cycles = impl_->now();
    if (!impl_->everything_terminal()) return false;
    for (const auto& t : impl_->tasks)
        if (t.status == TaskStatus::Failed) return false;
    return true;
}

const Router::TaskInfo& Router::info(Handle h) const { return impl_->tasks.at(h.idx).info; }

bool Router::all_done() const { return impl_->everything_terminal(); }

bool Router::any_failed() const {
    for (const auto& t : impl_->tasks)
        if (t.status == TaskStatus::Failed) return true;
    return false;
}

std::vector<std::string> Router::failures() const {
    std::vector<std::string> v;
    for (const auto& t : impl_->tasks)
        if (t.status == TaskStatus::Failed) v.push_back(t.info.error);
    return v;
}

std::optional<Cell> Router::droplet_cell(const std::string& id) const {
    auto it = impl_->drops.find(id);
    if (it == impl_->drops.end() || it->second.kind == Impl::Drop::Kind::Gone)
        return std::nullopt;
    return it->second.cell;
}

std::string Router::droplet_site(const std::string& id) const {
    auto it = impl_->drops.find(id);
    if (it == impl_->drops.end()) return "";
    return it->second.site;
}

// ---------------------------------------------------------------------------

namespace {

RouteOutcome run_one(Router& r, Router::Handle h, int budget) {
    RouteOutcome out;
    r.run_until_done(budget);
    const auto& info = r.info(h);
    out.departure = info.started;
    out.arrival = info.finished;
    if (info.status == Router::TaskStatus::Done) {
        out.ok = true;
    } else {
        out.ok = false;
        out.error = info.error.empty() ? "transport incomplete" : info.error;
    }
    return out;
}

} // namespace

RouteOutcome route_input(Router& r, const std::string& droplet, const std::string& reservoir,
                         const std::string& dst_site, int not_before) {
    auto h = r.dispense_to_site(droplet, reservoir, dst_site, not_before);
    return run_one(r, h, not_before + 4000);
}

RouteOutcome route_transfer(Router& r, const std::string& droplet,
                            const std::string& dst_site, int not_before) {
    auto h = r.move_to_site(droplet, dst_site, not_before);
    return run_one(r, h, not_before + 4000);
}

RouteOutcome route_output(Router& r, const std::string& droplet,
                          const std::string& out_reservoir, int not_before) {
    auto h = r.send_to_output(droplet, out_reservoir, not_before);
    return run_one(r, h, not_before + 4000);
}

std::vector<std::string> trace_lines(const RoutePlan& plan) {
    std::map<int, std::vector<std::pair<std::string, Cell>>> rows;
    for (const auto& [id, m] : plan.pos)
        for (const auto& [t, c] : m) rows[t].push_back({id, c});
    std::vector<std::string> lines;
    for (auto& [t, v] : rows) {
        std::sort(v.begin(), v.end());
        for (const auto& [id, c] : v) {
            std::ostringstream os;
            os << "at " << t << " " << id << " " << c.row << " " << c.col;
            lines.push_back(os.str());
        }
    }
    return lines;
}

} // namespace lfpc
