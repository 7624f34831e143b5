#include "lfpc/motion.hpp"

#include <algorithm>
#include <sstream>

namespace lfpc {

std::string to_string(const Violation& v) {
    std::ostringstream os;
    os << "cycle " << v.cycle << " " << v.kind << " " << v.droplet;
    if (!v.other.empty()) os << " vs " << v.other;
    os << " at " << to_string(v.cell);
    return os.str();
}

void SimScript::sort_all() {
    std::stable_sort(appears.begin(), appears.end(),
                     [](const Appear& a, const Appear& b) { return a.cycle < b.cycle; });
    std::stable_sort(vanishes.begin(), vanishes.end(),
                     [](const Vanish& a, const Vanish& b) { return a.cycle < b.cycle; });
    std::stable_sort(merges.begin(), merges.end(),
                     [](const Merge& a, const Merge& b) { return a.cycle < b.cycle; });
    std::stable_sort(splits.begin(), splits.end(),
                     [](const Split& a, const Split& b) { return a.cycle < b.cycle; });
}

namespace {

// Unordered droplet-id pair usable as a map/set key.
using IdPair = std::pair<std::string, std::string>;
IdPair pair_key(const std::string& a, const std::string& b) {
    return a < b ? IdPair{a, b} : IdPair{b, a};
}

} // namespace

StepResult step_movement(const ChipArchitecture& arch,
                         const std::set<PinId>& frame,
                         const std::map<std::string, Cell>& droplets,
                         int cycle,
                         const SimScript& script) {
    StepResult out;

    auto active = [&](const Cell& c) {
        if (!arch.in_bounds(c)) return false;
        PinId p = arch.pin_at(c);
        return p != 0 && frame.count(p) > 0;
    };
    auto flag = [&](const std::string& kind, const std::string& d,
                    const std::string& o, const Cell& c) {
        out.violations.push_back(Violation{cycle, kind, d, o, c});
    };

    // Pairs excused from the spacing rules this cycle: partners about to
    // merge (this cycle or the next, covering the final approach) and the
    // members of a split family on the cycle the split fires.
    std::set<IdPair> exempt;
    for (const auto& m : script.merges) {
        if (m.cycle == cycle || m.cycle == cycle + 1) exempt.insert(pair_key(m.a, m.b));
        if (m.cycle == cycle) {
            exempt.insert(pair_key(m.result, m.a));
            exempt.insert(pair_key(m.result, m.b));
        }
    }
    for (const auto& s : script.splits) {
        if (s.cycle != cycle) continue;
        exempt.insert(pair_key(s.child_io, s.child_far));
        exempt.insert(pair_key(s.parent, s.child_io));
        exempt.insert(pair_key(s.parent, s.child_far));
    }
    auto excused = [&](const std::string& a, const std::string& b) {
        return exempt.count(pair_key(a, b)) > 0;
    };

    // --- 1. Collections leave the grid before anything moves. ------------
    std::map<std::string, Cell> moving = droplets;
    std::set<std::string> collected;
    for (const auto& v : script.vanishes) {
        if (v.cycle != cycle) continue;
        auto it = moving.find(v.id);
        if (it == moving.end()) {
            flag("collect-misplaced", v.id, "", v.at);
            continue;
        }
        if (it->second != v.at) {
            flag("collect-misplaced", v.id, "", it->second);
            continue; // droplet is elsewhere; leave it in play
        }
        if (frame.count(v.reservoir_pin) == 0) flag("collect-unpowered", v.id, "", v.at);
        collected.insert(v.id);
        moving.erase(it);
    }

    // --- 2. Sanctioned splits. -------------------------------------------
    // A split replaces the parent with two children pulled to opposite
    // neighbours; it only fires when the electrode pattern is exactly the
    // two opposing active cells with the parent's own cell released.
    std::set<std::string> split_parents;
    for (const auto& s : script.splits) {
        if (s.cycle != cycle) continue;
        auto it = moving.find(s.parent);
        if (it == moving.end() || it->second != s.from) {
            flag("split-misfire", s.parent, "",
                 it == moving.end() ? s.from : it->second);
            continue;
        }
        bool opposing = s.to_io.row + s.to_far.row == 2 * s.from.row &&
                        s.to_io.col + s.to_far.col == 2 * s.from.col;
        std::vector<Cell> lit;
        for (const Cell& n : neighbors4(s.from))
            if (active(n)) lit.push_back(n);
        bool pattern_ok = !active(s.from) && opposing && lit.size() == 2 &&
                          ((lit[0] == s.to_io && lit[1] == s.to_far) ||
                           (lit[0] == s.to_far && lit[1] == s.to_io));
        if (!pattern_ok) {
            flag("split-misfire", s.parent, "", s.from);
            continue;
        }
        split_parents.insert(s.parent);
        out.next[s.child_io] = s.to_io;
        out.next[s.child_far] = s.to_far;
    }

    // --- 3. Ordinary movement rule. --------------------------------------
    for (const auto& [id, cell] : moving) {
        if (split_parents.count(id)) continue;
        if (active(cell)) {
            out.next[id] = cell; // pinned in place
            continue;
        }
        std::vector<Cell> lit;
        for (const Cell& n : neighbors4(cell))
            if (active(n)) lit.push_back(n);
        if (lit.size() == 1) {
            out.next[id] = lit[0];
        } else {
            if (lit.size() >= 2) flag("ambiguous-pull", id, "", cell);
            out.next[id] = cell; // zero neighbours, or held for diagnosis
        }
    }

    // --- 4. Merge resolution / collisions. -------------------------------
    // Two droplets driven onto one cell merge only when the script marks
    // that exact pair for this cycle; any other co-location is a collision.
    std::map<Cell, std::vector<std::string>> by_target;
    for (const auto& [id, cell] : out.next) by_target[cell].push_back(id);

    for (auto& [cell, ids] : by_target) {
        if (ids.size() < 2) continue;
        std::sort(ids.begin(), ids.end());
        bool merged = false;
        if (ids.size() == 2) {
            for (const auto& m : script.merges) {
                if (m.cycle != cycle) continue;
                if (pair_key(m.a, m.b) == pair_key(ids[0], ids[1]) && m.at == cell) {
                    out.next.erase(ids[0]);
                    out.next.erase(ids[1]);
                    out.next[m.result] = cell;
                    merged = true;
                    break;
                }
            }
        }
        if (!merged) {
            flag("collision", ids[0], ids[1], cell);
            // Park every involved droplet back where it came from so the
            // trace stays readable; the violation already records the event.
            for (const auto& id : ids) {
                auto prev = moving.find(id);
                if (prev != moving.end()) out.next[id] = prev->second;
            }
        }
    }

    // --- 5. Dispenses join the grid last. --------------------------------
    for (const auto& a : script.appears) {
        if (a.cycle != cycle) continue;
        if (frame.count(a.reservoir_pin) == 0) flag("dispense-unpowered", a.id, "", a.at);
        for (const auto& [id, cell] : out.next) {
            if (cell == a.at) flag("dispense-blocked", a.id, id, a.at);
        }
        out.next[a.id] = a.at;
    }

    // --- 6. Fluidic constraints. -----------------------------------------
    // Static: no two droplets within Chebyshev distance 1 of each other.
    for (auto i = out.next.begin(); i != out.next.end(); ++i) {
        for (auto j = std::next(i); j != out.next.end(); ++j) {
            if (chebyshev(i->second, j->second) <= 1 && !excused(i->first, j->first))
                flag("spacing", i->first, j->first, i->second);
        }
    }
    // Dynamic: a droplet's destination must clear every other droplet's
    // previous cell, so a mover never brushes past a neighbour mid-cycle.
    for (const auto& [id, dst] : out.next) {
        auto prev = droplets.find(id);
        bool moved = prev == droplets.end() || prev->second != dst;
        if (!moved) continue;
        for (const auto& [oid, ocell] : droplets) {
            if (oid == id) continue;
            if (collected.count(oid)) continue; // gone before anything moves
            if (chebyshev(dst, ocell) <= 1 && !excused(id, oid))
                flag("approach", id, oid, dst);
        }
    }

    return out;
}

} // namespace lfpc
