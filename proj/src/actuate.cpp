#include "lfpc/actuate.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace lfpc {

namespace {

std::string cell_str(const Cell& c) {
    std::ostringstream os;
    os << "(" << c.row << "," << c.col << ")";
    return os.str();
}

} // namespace

ActuationTable compile_table(const RoutePlan& plan, const ChipArchitecture& arch) {
    ActuationTable t;
    t.pin_total = static_cast<int>(
        pin_count(AddressingScheme::PinConstrained, arch.rows, arch.cols, &arch));
    if (static_cast<int>(plan.frames.size()) != plan.cycles)
        throw std::runtime_error("plan frame count disagrees with its cycle count");
    t.frames = plan.frames;
    for (size_t i = 0; i < t.frames.size(); ++i)
        for (PinId p : t.frames[i])
            if (p <= 0 || p > t.pin_total) {
                std::ostringstream os;
                os << "cycle " << i << " drives pin " << p
                   << " outside the architecture's pin space";
                throw std::runtime_error(os.str());
            }
    return t;
}

std::string to_text(const ActuationTable& t) {
    std::ostringstream os;
    os << "cycles " << t.frames.size() << " pins " << t.pin_total << "\n";
    for (const auto& frame : t.frames) {
        bool first = true;
        for (PinId p : frame) {
            if (!first) os << ' ';
            os << p;
            first = false;
        }
        os << '\n';
    }
    return os.str();
}

ActuationTable table_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    if (!std::getline(in, header))
        throw std::runtime_error("line 1: empty actuation table");
    std::istringstream hs(header);
    std::string kw1, kw2;
    int cycles = -1, pins = -1;
    if (!(hs >> kw1 >> cycles >> kw2 >> pins) || kw1 != "cycles" || kw2 != "pins" ||
        cycles < 0 || pins <= 0)
        throw std::runtime_error("line 1: expected header `cycles <N> pins <P>`");
    ActuationTable t;
    t.pin_total = pins;
    t.frames.resize(cycles);
    std::string line;
    for (int i = 0; i < cycles; ++i) {
        if (!std::getline(in, line)) {
            std::ostringstream os;
            os << "line " << i + 2 << ": table ends before cycle " << i;
            throw std::runtime_error(os.str());
        }
        std::istringstream ls(line);
        int p;
        while (ls >> p) {
            if (p <= 0 || p > pins) {
                std::ostringstream os;
                os << "line " << i + 2 << ": pin " << p << " out of range";
                throw std::runtime_error(os.str());
            }
            t.frames[i].insert(p);
        }
        if (!ls.eof()) {
            std::ostringstream os;
            os << "line " << i + 2 << ": malformed pin list";
            throw std::runtime_error(os.str());
        }
    }
    return t;
}

SimTrace simulate_table(const ActuationTable& table, const ChipArchitecture& arch,
                        const SimScript& script,
                        const std::map<std::string, Cell>& initial) {
    SimTrace trace;
    std::map<std::string, Cell> cur = initial;
    for (int t = 0; t < static_cast<int>(table.frames.size()); ++t) {
        StepResult res = step_movement(arch, table.frames[t], cur, t, script);
        for (auto& v : res.violations) trace.violations.push_back(std::move(v));
        cur = std::move(res.next);
        for (const auto& [id, c] : cur) trace.pos[id][t] = c;
    }
    return trace;
}

VerifyReport verify_table(const ActuationTable& table, const RoutePlan& plan,
                          const ChipArchitecture& arch) {
    VerifyReport rep;
    SimTrace sim = simulate_table(table, arch, plan.script);
    rep.violations = sim.violations;

    auto at_cycle = [](const std::map<std::string, std::map<int, Cell>>& pos, int t) {
        std::map<std::string, Cell> m;
        for (const auto& [id, hist] : pos) {
            auto it = hist.find(t);
            if (it != hist.end()) m[id] = it->second;
        }
        return m;
    };

    int horizon = std::max(plan.cycles, static_cast<int>(table.frames.size()));
    for (int t = 0; t < horizon; ++t) {
        auto want = at_cycle(plan.pos, t);
        auto got = at_cycle(sim.pos, t);
        if (want == got) continue;
        rep.divergence_cycle = t;
        std::ostringstream os;
        os << "divergence at cycle " << t << ": ";
        bool detailed = false;
        for (const auto& [id, c] : want) {
            auto it = got.find(id);
            if (it == got.end()) {
                os << "droplet " << id << " expected at " << cell_str(c)
                   << " but absent in replay";
                detailed = true;
                break;
            }
            if (!(it->second == c)) {
                os << "droplet " << id << " expected at " << cell_str(c)
                   << " but replayed at " << cell_str(it->second);
                detailed = true;
                break;
            }
        }
        if (!detailed)
            for (const auto& [id, c] : got)
                if (!want.count(id)) {
                    os << "droplet " << id << " replayed at " << cell_str(c)
                       << " but expected absent";
                    break;
                }
        rep.message = os.str();
        return rep;
    }
    if (!rep.violations.empty()) {
        std::ostringstream os;
        os << "positions match but " << rep.violations.size()
           << " movement-rule violation(s): " << to_string(rep.violations.front());
        rep.message = os.str();
        return rep;
    }
    rep.ok = true;
    rep.message = "exact match";
    return rep;
}

std::map<std::string, std::map<int, Cell>> parse_trace(const std::string& text) {
    std::map<std::string, std::map<int, Cell>> pos;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string kw, id;
        int t, r, c;
        if (!(ls >> kw >> t >> id >> r >> c) || kw != "at") {
            std::ostringstream os;
            os << "trace line " << lineno << ": expected `at <cycle> <droplet> <row> <col>`";
            throw std::runtime_error(os.str());
        }
        pos[id][t] = Cell{r, c};
    }
    return pos;
}

SimScript script_from_history(const std::map<std::string, std::map<int, Cell>>& pos,
                              const ChipArchitecture& arch, int cycles) {
    SimScript script;
    std::map<std::string, int> first, last;
    for (const auto& [id, hist] : pos) {
        if (hist.empty()) continue;
        first[id] = hist.begin()->first;
        last[id] = hist.rbegin()->first;
        for (int t = first[id]; t <= last[id]; ++t)
            if (!hist.count(t)) {
                std::ostringstream os;
                os << "droplet " << id << " has a gap in its history at cycle " << t;
                throw std::runtime_error(os.str());
            }
    }
    auto cell_of = [&](const std::string& id, int t) { return pos.at(id).at(t); };

    // Per transition t-1 -> t, classify every appearance and disappearance.
    for (int t = 0; t < cycles; ++t) {
        std::vector<std::string> news, gones;
        for (const auto& [id, f] : first)
            if (f == t) news.push_back(id);
        for (const auto& [id, l] : last)
            if (l == t - 1) gones.push_back(id);
        auto take = [](std::vector<std::string>& v, const std::string& id) {
            auto it = std::find(v.begin(), v.end(), id);
            if (it != v.end()) v.erase(it);
        };
        // splits: a droplet leaves a pocket hold cell; two children land on
        // the pocket's io and far cells
        for (auto it = gones.begin(); it != gones.end();) {
            const std::string parent = *it;
            Cell from = cell_of(parent, t - 1);
            const ModuleSite* site = nullptr;
            for (const auto& s : arch.sites)
                if (s.kind == SiteKind::Ssd && s.hold_cell == from) site = &s;
            std::string cio, cfar;
            if (site)
                for (const auto& id : news) {
                    if (cell_of(id, t) == site->io_cell) cio = id;
                    if (cell_of(id, t) == site->far_cell) cfar = id;
                }
            if (!site || cio.empty() || cfar.empty()) {
                ++it;
                continue;
            }
            script.splits.push_back({t, parent, cio, cfar, from, site->io_cell,
                                     site->far_cell});
            it = gones.erase(it);
            take(news, cio);
            take(news, cfar);
        }
        // merges: two droplets disappear, a new one takes over one of their
        // cells with the other 4-adjacent
        for (auto it = news.begin(); it != news.end();) {
            const std::string result = *it;
            Cell at = cell_of(result, t);
            std::string stay, come;
            for (const auto& id : gones) {
                Cell c = cell_of(id, t - 1);
                if (c == at) stay = id;
                else if (std::abs(c.row - at.row) + std::abs(c.col - at.col) == 1)
                    come = id;
            }
            if (stay.empty() || come.empty()) {
                ++it;
                continue;
            }
            script.merges.push_back({t, stay, come, result, at});
            it = news.erase(it);
            take(gones, stay);
            take(gones, come);
        }
        // dispenses: remaining appearances must sit on an input mouth
        for (const auto& id : news) {
            Cell at = cell_of(id, t);
            const Reservoir* res = nullptr;
            for (const auto& r : arch.reservoirs)
                if (r.mode == ReservoirMode::Input && r.mouth_cell == at) res = &r;
            if (!res) {
                std::ostringstream os;
                os << "droplet " << id << " materializes at " << cell_str(at)
                   << " (cycle " << t << "), which is not an input mouth";
                throw std::runtime_error(os.str());
            }
            script.appears.push_back({t, id, at, res->pin});
        }
        // collections: remaining disappearances must leave from an output mouth
        for (const auto& id : gones) {
            Cell at = cell_of(id, t - 1);
            const Reservoir* res = nullptr;
            for (const auto& r : arch.reservoirs)
                if (r.mode == ReservoirMode::Output && r.mouth_cell == at) res = &r;
            if (!res) {
                std::ostringstream os;
                os << "droplet " << id << " disappears from " << cell_str(at)
                   << " (cycle " << t << "), which is not an output mouth";
                throw std::runtime_error(os.str());
            }
            script.vanishes.push_back({t, id, at, res->pin});
        }
    }
    script.sort_all();
    return script;
}

} // namespace lfpc
