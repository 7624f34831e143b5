#include "lfpc/architecture.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lfpc {

const char* to_string(PathId p) {
    switch (p) {
    case PathId::VerticalLeft: return "VL";
    case PathId::Horizontal: return "H";
    case PathId::VerticalRight: return "VR";
    }
    return "?";
}

const char* to_string(SiteKind k) { return k == SiteKind::Mixer ? "mixer" : "ssd"; }
const char* to_string(SiteGroup g) { return g == SiteGroup::Above ? "above" : "below"; }

int RoutingPath::index_of(const Cell& c) const {
    for (size_t i = 0; i < cells.size(); i++)
        if (cells[i] == c) return (int)i;
    return -1;
}

bool ModuleSite::covers(const Cell& c) const {
    return std::find(cells.begin(), cells.end(), c) != cells.end();
}

const RoutingPath& ChipArchitecture::path(PathId id) const {
    for (const auto& p : paths)
        if (p.id == id) return p;
    throw std::logic_error("path missing");
}

const ModuleSite* ChipArchitecture::site(const std::string& id) const {
    for (const auto& s : sites)
        if (s.id == id) return &s;
    return nullptr;
}

const Reservoir* ChipArchitecture::reservoir(const std::string& id) const {
    for (const auto& r : reservoirs)
        if (r.id == id) return &r;
    return nullptr;
}

std::vector<const ModuleSite*> ChipArchitecture::sites_of(SiteKind kind) const {
    std::vector<const ModuleSite*> out;
    for (const auto& s : sites)
        if (s.kind == kind) out.push_back(&s);
    return out;
}

std::vector<Cell> ChipArchitecture::cells_of_pin(PinId p) const {
    std::vector<Cell> out;
    for (int r = 0; r < rows; r++)
        for (int c = 0; c < cols; c++)
            if (pins[r * cols + c] == p) out.push_back({r, c});
    return out;
}

Cell ChipArchitecture::path_cell_below_access(const ModuleSite& s) const {
    int hrow = path(PathId::Horizontal).cells.front().row;
    return Cell{hrow, s.access_cell.col};
}

ChipArchitecture build_lfpc(const ArchParams& params) {
    const int g = params.mixers_per_group;
    const int w = params.mixer_loop_cols;
    const int nr = params.reservoirs_per_side;
    const int sp = params.site_spacing;
    if (g < 1) throw std::invalid_argument("mixers_per_group must be >= 1");
    if (w < 2) throw std::invalid_argument("mixer_loop_cols must be >= 2");
    if (nr < 1) throw std::invalid_argument("reservoirs_per_side must be >= 1");
    if (sp < 1) throw std::invalid_argument("site_spacing must be >= 1 (footprints would collide)");
    if (params.electrode_pitch <= 0) throw std::invalid_argument("electrode_pitch must be > 0");

    // Horizontal path row; the mouth farthest from it sits at row 3*(2nr-1).
    const int hrow = std::max(5, 3 * (2 * nr - 1) + 2);
    ChipArchitecture a;
    a.params = params;
    a.electrode_pitch = params.electrode_pitch;
    a.rows = hrow + 5;
    a.cols = 2 + (g + 1) * sp + g * (w + 2);
    a.pins.assign(a.rows * a.cols, 0);

    // --- routing paths -------------------------------------------------
    auto add_path = [&](PathId id, PinId base, std::vector<Cell> cells) {
        RoutingPath p;
        p.id = id;
        p.phase_pins = {base, base + 1, base + 2};
        p.cells = std::move(cells);
        for (size_t k = 0; k < p.cells.size(); k++)
            a.set_pin(p.cells[k], p.phase_pins[k % 3]);
        a.paths.push_back(std::move(p));
    };

    std::vector<Cell> vl, h, vr;
    for (int r = 0; r < hrow; r++) vl.push_back({r, 0});
    for (int c = 0; c < a.cols; c++) h.push_back({hrow, c});
    for (int r = 0; r < hrow; r++) vr.push_back({r, a.cols - 1});
    add_path(PathId::VerticalLeft, 1, vl);
    add_path(PathId::Horizontal, 4, h);
    add_path(PathId::VerticalRight, 7, vr);

    // --- pin plan offsets ---------------------------------------------
    const PinId loop_above = 10;
    const PinId loop_below = loop_above + 2 * w;
    const PinId io_above = loop_below + 2 * w;
    const PinId io_below = io_above + 1;
    const PinId hold_base = io_below + 1;        // 2g above, then 2g below
    const PinId far_above = hold_base + 4 * g;
    const PinId far_below = far_above + 1;
    const PinId maccess_base = far_below + 1;    // g above, then g below
    const PinId saccess_base = maccess_base + 2 * g; // 2g above, then 2g below
    const PinId reservoir_base = saccess_base + 4 * g;

    // --- mixer + SSD complexes ----------------------------------------
    struct GroupSpec {
        SiteGroup grp;
        char tag;
        int io_row, hold_row, far_row, access_row;
        PinId loop_base, io_pin, far_pin;
    };
    // ring position 0 (the io cell) always sits on the row nearest the
    // horizontal path; the hold row doubles as the ring's away row
    std::vector<GroupSpec> groups = {
        {SiteGroup::Above, 'A', hrow - 2, hrow - 3, hrow - 4, hrow - 1,
         loop_above, io_above, far_above},
        {SiteGroup::Below, 'B', hrow + 2, hrow + 3, hrow + 4, hrow + 1,
         loop_below, io_below, far_below},
    };

    int hold_pin = hold_base;
    for (size_t gi = 0; gi < groups.size(); gi++) {
        const auto& gs = groups[gi];
        for (int i = 0; i < g; i++) {
            const int start = 1 + sp + i * (w + 2 + sp); // SSD-left column
            const int c0 = start + 1;                    // first loop column
            std::string mid = std::string("M") + gs.tag + std::to_string(i + 1);

            ModuleSite m;
            m.id = mid;
            m.kind = SiteKind::Mixer;
            m.group = gs.grp;
            // ring order: io, back along the path-facing row, around the away
            // row, then home along the path-facing row
            const int facing = gs.io_row;
            const int away = gs.hold_row;
            m.loop_cells.push_back({facing, c0 + 1});
            m.loop_cells.push_back({facing, c0});
            for (int k = 0; k < w; k++) m.loop_cells.push_back({away, c0 + k});
            for (int k = w - 1; k >= 2; k--) m.loop_cells.push_back({facing, c0 + k});
            m.io_cell = m.loop_cells[0];
            m.access_cell = {gs.access_row, c0 + 1};
            m.cells = m.loop_cells;
            m.cells.push_back(m.access_cell);
            for (size_t k = 0; k < m.loop_cells.size(); k++)
                a.set_pin(m.loop_cells[k], gs.loop_base + (PinId)k);
            a.set_pin(m.access_cell, maccess_base + (PinId)(gi * g + i));
            a.sites.push_back(m);

            for (int side = 0; side < 2; side++) {
                const int sc = side == 0 ? start : start + w + 1;
                ModuleSite s;
                s.id = std::string("S") + gs.tag + std::to_string(i + 1) + (side == 0 ? "L" : "R");
                s.kind = SiteKind::Ssd;
                s.group = gs.grp;
                s.host_mixer = mid;
                s.io_cell = {gs.io_row, sc};
                s.hold_cell = {gs.hold_row, sc};
                s.far_cell = {gs.far_row, sc};
                s.access_cell = {gs.access_row, sc};
                s.cells = {s.access_cell, s.io_cell, s.hold_cell, s.far_cell};
                a.set_pin(s.io_cell, gs.io_pin);
                a.set_pin(s.hold_cell, hold_pin++);
                a.set_pin(s.far_cell, gs.far_pin);
                a.set_pin(s.access_cell, saccess_base + (PinId)(gi * 2 * g + i * 2 + side));
                a.sites.push_back(s);
            }
        }
    }

    // --- reservoirs ----------------------------------------------------
    PinId rpin = reservoir_base;
    for (int side = 0; side < 2; side++) {
        const int col = side == 0 ? 0 : a.cols - 1;
        for (int k = 0; k < nr; k++) {
            for (int mode = 0; mode < 2; mode++) {
                Reservoir r;
                r.side = side == 0 ? Side::Left : Side::Right;
                r.mode = mode == 0 ? ReservoirMode::Input : ReservoirMode::Output;
                std::string idx = nr > 1 ? std::to_string(k + 1) : "";
                r.id = std::string("R") + (side == 0 ? "L" : "R") + (mode == 0 ? "I" : "O") + idx;
                if (r.mode == ReservoirMode::Input)
                    r.fluid = (side == 0 ? std::string("sample") : std::string("reagent")) +
                              (nr > 1 ? std::to_string(k + 1) : "");
                else
                    r.fluid = (side == 0 ? std::string("out-left") : std::string("out-right")) +
                              (nr > 1 ? std::to_string(k + 1) : "");
                r.mouth_cell = {3 * (2 * k + mode), col};
                r.pin = rpin++;
                a.reservoirs.push_back(r);
            }
        }
    }
    return a;
}

namespace {

bool straight_contig(const std::vector<Cell>& cells) {
    if (cells.size() < 2) return !cells.empty();
    int dr = cells[1].row - cells[0].row;
    int dc = cells[1].col - cells[0].col;
    if (std::abs(dr) + std::abs(dc) != 1) return false;
    for (size_t i = 1; i < cells.size(); i++) {
        if (cells[i].row - cells[i - 1].row != dr) return false;
        if (cells[i].col - cells[i - 1].col != dc) return false;
    }
    return true;
}

} // namespace

std::vector<std::string> validate_architecture(const ChipArchitecture& a) {
    std::vector<std::string> out;
    auto err = [&](std::string m) { out.push_back(std::move(m)); };

    if (a.rows <= 0 || a.cols <= 0) {
        err("non-positive grid dimensions");
        return out;
    }
    if ((int)a.pins.size() != a.rows * a.cols) {
        err("pin map size does not match dimensions");
        return out;
    }

    // paths: 3-phase wiring, contiguity, disjointness
    if (a.paths.size() != 3) err("expected exactly 3 routing paths");
    std::set<PinId> phase_pins;
    std::map<Cell, std::string> owner;
    for (const auto& p : a.paths) {
        if (!straight_contig(p.cells))
            err(std::string(to_string(p.id)) + " path cells are not a contiguous straight run");
        for (PinId q : p.phase_pins) {
            if (q == 0) err(std::string(to_string(p.id)) + " uses the grounded pin");
            if (!phase_pins.insert(q).second)
                err("phase pin " + std::to_string(q) + " used by two paths");
        }
        for (size_t k = 0; k < p.cells.size(); k++) {
            const Cell& c = p.cells[k];
            if (!a.in_bounds(c)) {
                err(std::string(to_string(p.id)) + " cell out of bounds");
                continue;
            }
            if (a.pin_at(c) != p.phase_pins[k % 3])
                err(std::string(to_string(p.id)) + " cell " + to_string(c) +
                    " not wired to phase pin " + std::to_string(p.phase_pins[k % 3]));
            auto [it, fresh] = owner.insert({c, std::string("path ") + to_string(p.id)});
            if (!fresh) err("cell " + to_string(c) + " claimed twice");
        }
    }

    // sites: footprint exclusivity + internal shape
    const RoutingPath* hp = nullptr;
    for (const auto& p : a.paths)
        if (p.id == PathId::Horizontal) hp = &p;

    for (const auto& s : a.sites) {
        for (const auto& c : s.cells) {
            if (!a.in_bounds(c)) {
                err(s.id + " footprint cell out of bounds");
                continue;
            }
            auto [it, fresh] = owner.insert({c, "site " + s.id});
            if (!fresh) err("cell " + to_string(c) + " claimed by " + s.id + " and " + it->second);
        }
        if (!adjacent4(s.access_cell, s.io_cell))
            err(s.id + " access cell not adjacent to io cell");
        if (hp) {
            Cell below = a.path_cell_below_access(s);
            if (!adjacent4(s.access_cell, below) || hp->index_of(below) < 0)
                err(s.id + " access cell not adjacent to the horizontal path");
        }
        if (s.kind == SiteKind::Mixer) {
            if (s.loop_cells.size() < 4 || s.loop_cells.size() % 2 != 0)
                err(s.id + " loop must be an even ring of >= 4 cells");
            else {
                for (size_t k = 0; k < s.loop_cells.size(); k++) {
                    const Cell& c1 = s.loop_cells[k];
                    const Cell& c2 = s.loop_cells[(k + 1) % s.loop_cells.size()];
                    if (!adjacent4(c1, c2))
                        err(s.id + " loop break between " + to_string(c1) + " and " + to_string(c2));
                }
                if (!(s.loop_cells[0] == s.io_cell))
                    err(s.id + " loop position 0 must be the io cell");
            }
        } else {
            if (!adjacent4(s.io_cell, s.hold_cell)) err(s.id + " io/hold not adjacent");
            if (!adjacent4(s.hold_cell, s.far_cell)) err(s.id + " hold/far not adjacent");
            if (a.site(s.host_mixer) == nullptr)
                err(s.id + " names unknown host mixer '" + s.host_mixer + "'");
        }
    }

    // every mixer hosts exactly two SSDs, one at each top corner
    for (const auto& m : a.sites) {
        if (m.kind != SiteKind::Mixer) continue;
        int top = m.loop_cells[0].row;
        for (const auto& c : m.loop_cells) top = std::min(top, c.row);
        Cell tl{top, m.loop_cells[0].col}, tr{top, m.loop_cells[0].col};
        for (const auto& c : m.loop_cells)
            if (c.row == top) {
                if (c.col < tl.col) tl = c;
                if (c.col > tr.col) tr = c;
            }
        int corner_hits = 0, hosted = 0;
        for (const auto& s : a.sites) {
            if (s.kind != SiteKind::Ssd || s.host_mixer != m.id) continue;
            hosted++;
            bool touches = false;
            for (const auto& c : s.cells)
                if (adjacent4(c, tl) || adjacent4(c, tr)) touches = true;
            if (touches) corner_hits++;
        }
        if (hosted != 2) err(m.id + " hosts " + std::to_string(hosted) + " SSDs, expected 2");
        if (corner_hits != 2) err(m.id + " corner SSDs not adjacent to its top corners");
    }

    // shared-pin discipline
    for (int grp = 0; grp < 2; grp++) {
        SiteGroup gg = grp == 0 ? SiteGroup::Above : SiteGroup::Below;
        std::vector<const ModuleSite*> mixers, ssds;
        for (const auto& s : a.sites) {
            if (s.group != gg) continue;
            (s.kind == SiteKind::Mixer ? mixers : ssds).push_back(&s);
        }
        for (size_t i = 1; i < mixers.size(); i++) {
            if (mixers[i]->loop_cells.size() != mixers[0]->loop_cells.size()) {
                err("mixer loop sizes differ within a group");
                continue;
            }
            for (size_t k = 0; k < mixers[0]->loop_cells.size(); k++)
                if (a.pin_at(mixers[i]->loop_cells[k]) != a.pin_at(mixers[0]->loop_cells[k]))
                    err(mixers[i]->id + " loop position " + std::to_string(k) +
                        " not sharing the group pin");
        }
        std::set<PinId> holds;
        for (size_t i = 0; i < ssds.size(); i++) {
            if (a.pin_at(ssds[i]->io_cell) != a.pin_at(ssds[0]->io_cell))
                err(ssds[i]->id + " io pin not shared with its group");
            if (a.pin_at(ssds[i]->far_cell) != a.pin_at(ssds[0]->far_cell))
                err(ssds[i]->id + " far pin not shared with its group");
            if (!holds.insert(a.pin_at(ssds[i]->hold_cell)).second)
                err(ssds[i]->id + " hold pin is not dedicated");
        }
    }
    std::set<PinId> access_pins;
    for (const auto& s : a.sites)
        if (!access_pins.insert(a.pin_at(s.access_cell)).second)
            err(s.id + " access pin is not dedicated");

    // reservoirs: mouth on own side's vertical path, dedicated off-grid pins
    std::set<PinId> grid_pins(a.pins.begin(), a.pins.end());
    std::set<PinId> rpins;
    for (const auto& r : a.reservoirs) {
        const auto& vp = a.path(r.side == Side::Left ? PathId::VerticalLeft
                                                     : PathId::VerticalRight);
        if (vp.index_of(r.mouth_cell) < 0)
            err(r.id + " mouth is not on its side's vertical path");
        if (r.pin == 0 || grid_pins.count(r.pin))
            err(r.id + " pin must be nonzero and distinct from grid pins");
        if (!rpins.insert(r.pin).second) err(r.id + " pin reused");
    }

    // reachability: from every mouth along path cells to every access cell
    if (hp) {
        std::set<Cell> path_cells;
        for (const auto& p : a.paths)
            for (const auto& c : p.cells) path_cells.insert(c);
        for (const auto& r : a.reservoirs) {
            std::set<Cell> seen;
            std::queue<Cell> q;
            q.push(r.mouth_cell);
            seen.insert(r.mouth_cell);
            while (!q.empty()) {
                Cell c = q.front();
                q.pop();
                for (const auto& n : neighbors4(c))
                    if (path_cells.count(n) && !seen.count(n)) {
                        seen.insert(n);
                        q.push(n);
                    }
            }
            for (const auto& s : a.sites) {
                Cell below = a.path_cell_below_access(s);
                if (!seen.count(below))
                    err("no path route from " + r.id + " to " + s.id + " access column");
            }
        }
    }
    return out;
}

long pin_count(AddressingScheme scheme, int m, int n, const ChipArchitecture* arch) {
    switch (scheme) {
    case AddressingScheme::Direct: return (long)m * (long)n;
    case AddressingScheme::CrossReference: return (long)m + (long)n;
    case AddressingScheme::ActiveMatrix: return (long)m + (long)n;
    case AddressingScheme::PinConstrained: {
        if (!arch) return 0;
        std::set<PinId> distinct;
        for (PinId p : arch->pins)
            if (p != 0) distinct.insert(p);
        for (const auto& r : arch->reservoirs) distinct.insert(r.pin);
        return (long)distinct.size();
    }
    }
    return 0;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

const char* path_tag(PathId p) { return to_string(p); }

std::optional<PathId> path_from_tag(const std::string& t) {
    if (t == "VL") return PathId::VerticalLeft;
    if (t == "H") return PathId::Horizontal;
    if (t == "VR") return PathId::VerticalRight;
    return std::nullopt;
}

} // namespace

std::string save_architecture(const ChipArchitecture& a) {
    std::ostringstream os;
    os << "lfpc-arch 1\n";
    os << "dims " << a.rows << ' ' << a.cols << '\n';
    os << "pitch " << fmt_double(a.electrode_pitch) << '\n';
    os << "params " << a.params.mixers_per_group << ' ' << a.params.mixer_loop_cols << ' '
       << a.params.reservoirs_per_side << ' ' << a.params.site_spacing << '\n';
    for (int r = 0; r < a.rows; r++)
        for (int c = 0; c < a.cols; c++)
            if (a.pins[r * a.cols + c] != 0)
                os << "pin " << r << ' ' << c << ' ' << a.pins[r * a.cols + c] << '\n';
    for (const auto& p : a.paths) {
        os << "path " << path_tag(p.id) << ' ' << p.phase_pins[0] << ' ' << p.phase_pins[1]
           << ' ' << p.phase_pins[2] << '\n';
        for (const auto& c : p.cells)
            os << "pathcell " << path_tag(p.id) << ' ' << c.row << ' ' << c.col << '\n';
    }
    for (const auto& s : a.sites) {
        os << "site " << s.id << ' ' << to_string(s.kind) << ' ' << to_string(s.group) << '\n';
        os << "siteio " << s.id << ' ' << s.io_cell.row << ' ' << s.io_cell.col << '\n';
        os << "siteaccess " << s.id << ' ' << s.access_cell.row << ' ' << s.access_cell.col
           << '\n';
        if (s.kind == SiteKind::Ssd) {
            os << "sitehold " << s.id << ' ' << s.hold_cell.row << ' ' << s.hold_cell.col << '\n';
            os << "sitefar " << s.id << ' ' << s.far_cell.row << ' ' << s.far_cell.col << '\n';
            os << "sitehost " << s.id << ' ' << s.host_mixer << '\n';
        }
        for (const auto& c : s.loop_cells)
            os << "siteloop " << s.id << ' ' << c.row << ' ' << c.col << '\n';
        for (const auto& c : s.cells)
            os << "sitecell " << s.id << ' ' << c.row << ' ' << c.col << '\n';
    }
    for (const auto& r : a.reservoirs)
        os << "reservoir " << r.id << ' '
           << (r.mode == ReservoirMode::Input ? "input" : "output") << ' '
           << (r.side == Side::Left ? "left" : "right") << ' ' << r.fluid << ' '
           << r.mouth_cell.row << ' ' << r.mouth_cell.col << ' ' << r.pin << '\n';
    return os.str();
}

ArchLoadResult load_architecture(const std::string& text) {
    ArchLoadResult res;
    ChipArchitecture a;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool have_header = false, have_dims = false;

    auto fail = [&](const std::string& m) {
        res.arch.reset();
        res.error = "line " + std::to_string(lineno) + ": " + m;
        return res;
    };

    ModuleSite* cur_site = nullptr;
    auto site_mut = [&](const std::string& id) -> ModuleSite* {
        if (cur_site && cur_site->id == id) return cur_site;
        for (auto& s : a.sites)
            if (s.id == id) return cur_site = &s;
        return nullptr;
    };

    while (std::getline(is, line)) {
        lineno++;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        if (tok == "lfpc-arch") {
            int ver = 0;
            if (!(ls >> ver) || ver != 1) return fail("unsupported format version");
            have_header = true;
        } else if (tok == "dims") {
            if (!(ls >> a.rows >> a.cols) || a.rows <= 0 || a.cols <= 0)
                return fail("bad dims");
            a.pins.assign(a.rows * a.cols, 0);
            have_dims = true;
        } else if (tok == "pitch") {
            if (!(ls >> a.electrode_pitch)) return fail("bad pitch");
            a.params.electrode_pitch = a.electrode_pitch;
        } else if (tok == "params") {
            if (!(ls >> a.params.mixers_per_group >> a.params.mixer_loop_cols >>
                  a.params.reservoirs_per_side >> a.params.site_spacing))
                return fail("bad params");
        } else if (tok == "pin") {
            if (!have_dims) return fail("pin before dims");
            int r, c, p;
            if (!(ls >> r >> c >> p)) return fail("bad pin line");
            if (r < 0 || r >= a.rows || c < 0 || c >= a.cols) return fail("pin out of bounds");
            a.pins[r * a.cols + c] = p;
        } else if (tok == "path") {
            std::string tag;
            RoutingPath p;
            if (!(ls >> tag >> p.phase_pins[0] >> p.phase_pins[1] >> p.phase_pins[2]))
                return fail("bad path line");
            auto id = path_from_tag(tag);
            if (!id) return fail("unknown path tag '" + tag + "'");
            p.id = *id;
            a.paths.push_back(p);
        } else if (tok == "pathcell") {
            std::string tag;
            int r, c;
            if (!(ls >> tag >> r >> c)) return fail("bad pathcell line");
            auto id = path_from_tag(tag);
            if (!id) return fail("unknown path tag '" + tag + "'");
            bool found = false;
            for (auto& p : a.paths)
                if (p.id == *id) {
                    p.cells.push_back({r, c});
                    found = true;
                }
            if (!found) return fail("pathcell before path");
        } else if (tok == "site") {
            std::string id, kind, grp;
            if (!(ls >> id >> kind >> grp)) return fail("bad site line");
            ModuleSite s;
            s.id = id;
            if (kind == "mixer") s.kind = SiteKind::Mixer;
            else if (kind == "ssd") s.kind = SiteKind::Ssd;
            else return fail("unknown site kind '" + kind + "'");
            if (grp == "above") s.group = SiteGroup::Above;
            else if (grp == "below") s.group = SiteGroup::Below;
            else return fail("unknown site group '" + grp + "'");
            a.sites.push_back(s);
            cur_site = nullptr;
        } else if (tok == "siteio" || tok == "siteaccess" || tok == "sitehold" ||
                   tok == "sitefar" || tok == "siteloop" || tok == "sitecell") {
            std::string id;
            int r, c;
            if (!(ls >> id >> r >> c)) return fail("bad " + tok + " line");
            ModuleSite* s = site_mut(id);
            if (!s) return fail(tok + " names unknown site '" + id + "'");
            Cell cc{r, c};
            if (tok == "siteio") s->io_cell = cc;
            else if (tok == "siteaccess") s->access_cell = cc;
            else if (tok == "sitehold") s->hold_cell = cc;
            else if (tok == "sitefar") s->far_cell = cc;
            else if (tok == "siteloop") s->loop_cells.push_back(cc);
            else s->cells.push_back(cc);
        } else if (tok == "sitehost") {
            std::string id, host;
            if (!(ls >> id >> host)) return fail("bad sitehost line");
            ModuleSite* s = site_mut(id);
            if (!s) return fail("sitehost names unknown site '" + id + "'");
            s->host_mixer = host;
        } else if (tok == "reservoir") {
            Reservoir r;
            std::string mode, side;
            int mr, mc;
            if (!(ls >> r.id >> mode >> side >> r.fluid >> mr >> mc >> r.pin))
                return fail("bad reservoir line");
            if (mode == "input") r.mode = ReservoirMode::Input;
            else if (mode == "output") r.mode = ReservoirMode::Output;
            else return fail("unknown reservoir mode");
            if (side == "left") r.side = Side::Left;
            else if (side == "right") r.side = Side::Right;
            else return fail("unknown reservoir side");
            r.mouth_cell = {mr, mc};
            a.reservoirs.push_back(r);
        } else {
            return fail("unknown directive '" + tok + "'");
        }
    }
    if (!have_header) {
        lineno = 0;
        return fail("missing lfpc-arch header");
    }
    if (!have_dims) {
        lineno = 0;
        return fail("missing dims");
    }
    res.arch = std::move(a);
    return res;
}

} // namespace lfpc
