#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lfpc/architecture.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace lfpc;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("default chip layout: three paths, four mixers, eight storage units") {
    ChipArchitecture a = build_lfpc({});
    CHECK(a.rows == 10);
    CHECK(a.cols == 17);

    REQUIRE(a.paths.size() == 3);
    const auto& vl = a.path(PathId::VerticalLeft);
    const auto& h = a.path(PathId::Horizontal);
    const auto& vr = a.path(PathId::VerticalRight);
    CHECK(vl.cells.size() == 5);
    CHECK(h.cells.size() == 17);
    CHECK(vr.cells.size() == 5);
    CHECK(vl.phase_pins == std::array<PinId, 3>{1, 2, 3});
    CHECK(h.phase_pins == std::array<PinId, 3>{4, 5, 6});
    CHECK(vr.phase_pins == std::array<PinId, 3>{7, 8, 9});

    CHECK(a.sites_of(SiteKind::Mixer).size() == 4);
    CHECK(a.sites_of(SiteKind::Ssd).size() == 8);
    int above = 0, below = 0;
    for (const auto* m : a.sites_of(SiteKind::Mixer))
        (m->group == SiteGroup::Above ? above : below)++;
    CHECK(above == 2);
    CHECK(below == 2);

    // each mixer hosts exactly two single-droplet stores
    for (const auto* m : a.sites_of(SiteKind::Mixer)) {
        int hosted = 0;
        for (const auto* s : a.sites_of(SiteKind::Ssd))
            if (s->host_mixer == m->id) hosted++;
        CHECK(hosted == 2);
    }

    REQUIRE(a.reservoirs.size() == 4);
    CHECK(a.reservoir("RLI")->mode == ReservoirMode::Input);
    CHECK(a.reservoir("RLI")->fluid == "sample");
    CHECK(a.reservoir("RRI")->fluid == "reagent");
    CHECK(a.reservoir("RLO")->mode == ReservoirMode::Output);
    CHECK(a.reservoir("RLO")->fluid == "out-left");
    CHECK(a.reservoir("RRO")->fluid == "out-right");

    CHECK(validate_architecture(a).empty());
}

TEST_CASE("path cells cycle through their three phase pins") {
    ChipArchitecture a = build_lfpc({});
    for (const auto& p : a.paths)
        for (size_t k = 0; k < p.cells.size(); k++)
            CHECK(a.pin_at(p.cells[k]) == p.phase_pins[k % 3]);

    // a droplet parked three cells apart shares its phase: that is what makes
    // convoys on a shared path safe
    const auto& h = a.path(PathId::Horizontal);
    for (size_t k = 0; k + 3 < h.cells.size(); k++)
        CHECK(a.pin_at(h.cells[k]) == a.pin_at(h.cells[k + 3]));
}

TEST_CASE("per-site pins: dedicated where movement demands it, shared where not") {
    ChipArchitecture a = build_lfpc({});

    // access and hold pins are dedicated (one cell each)
    std::set<PinId> dedicated;
    for (const auto& s : a.sites) {
        PinId ap = a.pin_at(s.access_cell);
        CHECK(a.cells_of_pin(ap).size() == 1);
        CHECK(dedicated.insert(ap).second);
        if (s.kind == SiteKind::Ssd) {
            PinId hp = a.pin_at(s.hold_cell);
            CHECK(a.cells_of_pin(hp).size() == 1);
            CHECK(dedicated.insert(hp).second);
        }
    }

    // loop pins are shared between the two mixers of a group, position-wise
    const ModuleSite* ma1 = a.site("MA1");
    const ModuleSite* ma2 = a.site("MA2");
    REQUIRE(ma1 != nullptr);
    REQUIRE(ma2 != nullptr);
    REQUIRE(ma1->loop_cells.size() == ma2->loop_cells.size());
    for (size_t k = 0; k < ma1->loop_cells.size(); k++)
        CHECK(a.pin_at(ma1->loop_cells[k]) == a.pin_at(ma2->loop_cells[k]));

    // ...but not between groups
    const ModuleSite* mb1 = a.site("MB1");
    REQUIRE(mb1 != nullptr);
    for (size_t k = 0; k < ma1->loop_cells.size(); k++)
        CHECK(a.pin_at(ma1->loop_cells[k]) != a.pin_at(mb1->loop_cells[k]));

    // storage io pins are shared per group, far pins too
    CHECK(a.pin_at(a.site("SA1L")->io_cell) == a.pin_at(a.site("SA2R")->io_cell));
    CHECK(a.pin_at(a.site("SB1L")->io_cell) == a.pin_at(a.site("SB2R")->io_cell));
    CHECK(a.pin_at(a.site("SA1L")->io_cell) != a.pin_at(a.site("SB1L")->io_cell));
    CHECK(a.pin_at(a.site("SA1L")->far_cell) == a.pin_at(a.site("SA2R")->far_cell));
}

TEST_CASE("site footprints are exclusive and reach the shared paths") {
    ChipArchitecture a = build_lfpc({});
    std::set<Cell> taken;
    for (const auto& p : a.paths)
        for (const auto& c : p.cells) CHECK(taken.insert(c).second);
    for (const auto& s : a.sites)
        for (const auto& c : s.cells) CHECK(taken.insert(c).second);

    const auto& h = a.path(PathId::Horizontal);
    for (const auto& s : a.sites) {
        CHECK(adjacent4(s.access_cell, s.io_cell));
        Cell onpath = a.path_cell_below_access(s);
        CHECK(adjacent4(s.access_cell, onpath));
        CHECK(h.index_of(onpath) >= 0);
    }
}

TEST_CASE("mixer loops are closed rings with the io cell at position zero") {
    ChipArchitecture a = build_lfpc({});
    for (const auto* m : a.sites_of(SiteKind::Mixer)) {
        REQUIRE(m->loop_cells.size() == 8);
        CHECK(m->loop_cells[0] == m->io_cell);
        for (size_t k = 0; k < m->loop_cells.size(); k++)
            CHECK(adjacent4(m->loop_cells[k], m->loop_cells[(k + 1) % m->loop_cells.size()]));
        std::set<Cell> uniq(m->loop_cells.begin(), m->loop_cells.end());
        CHECK(uniq.size() == m->loop_cells.size());
    }
}

TEST_CASE("pin budget: 53 drivers at defaults, 43 with one mixer per group") {
    ChipArchitecture a = build_lfpc({});
    CHECK(pin_count(AddressingScheme::PinConstrained, a.rows, a.cols, &a) == 53);

    ArchParams small;
    small.mixers_per_group = 1;
    ChipArchitecture b = build_lfpc(small);
    CHECK(validate_architecture(b).empty());
    CHECK(pin_count(AddressingScheme::PinConstrained, b.rows, b.cols, &b) == 43);

    // closed form: 13 shared-path/io/far pins, 4 per loop column,
    // 10 per mixer pair, 4 per reservoir pair
    auto formula = [](const ArchParams& p) {
        return 13L + 4L * p.mixer_loop_cols + 10L * p.mixers_per_group +
               4L * p.reservoirs_per_side;
    };
    CHECK(formula(ArchParams{}) == 53);
    CHECK(formula(small) == 43);
    for (int g = 1; g <= 4; g++)
        for (int w = 2; w <= 6; w++) {
            ArchParams p;
            p.mixers_per_group = g;
            p.mixer_loop_cols = w;
            ChipArchitecture c = build_lfpc(p);
            CAPTURE(g);
            CAPTURE(w);
            CHECK(pin_count(AddressingScheme::PinConstrained, c.rows, c.cols, &c) == formula(p));
            CHECK(validate_architecture(c).empty());
        }
}

TEST_CASE("addressing scheme pin counts over the grid family") {
    CHECK(pin_count(AddressingScheme::Direct, 15, 15) == 225);
    CHECK(pin_count(AddressingScheme::CrossReference, 15, 15) == 30);
    CHECK(pin_count(AddressingScheme::ActiveMatrix, 15, 15) == 30);

    ChipArchitecture a = build_lfpc({});
    long lfpc_pins = pin_count(AddressingScheme::PinConstrained, a.rows, a.cols, &a);
    CHECK(pin_count(AddressingScheme::Direct, a.rows, a.cols) == 170);
    CHECK(lfpc_pins < pin_count(AddressingScheme::Direct, a.rows, a.cols));

    for (int m = 1; m <= 50; m++)
        for (int n = 1; n <= 50; n++) {
            CHECK(pin_count(AddressingScheme::Direct, m, n) == (long)m * n);
            CHECK(pin_count(AddressingScheme::CrossReference, m, n) == (long)m + n);
        }

    // driver count grows monotonically with every size parameter
    auto drivers = [](ArchParams p) {
        ChipArchitecture c = build_lfpc(p);
        return pin_count(AddressingScheme::PinConstrained, c.rows, c.cols, &c);
    };
    ArchParams p;
    long base = drivers(p);
    ArchParams bigger = p;
    bigger.mixers_per_group++;
    CHECK(drivers(bigger) > base);
    bigger = p;
    bigger.mixer_loop_cols++;
    CHECK(drivers(bigger) > base);
    bigger = p;
    bigger.reservoirs_per_side++;
    CHECK(drivers(bigger) > base);
}

TEST_CASE("infeasible parameters are rejected") {
    ArchParams p;
    p.mixers_per_group = 0;
    CHECK_THROWS_AS(build_lfpc(p), std::invalid_argument);
    p = {};
    p.mixer_loop_cols = 1;
    CHECK_THROWS_AS(build_lfpc(p), std::invalid_argument);
    p = {};
    p.reservoirs_per_side = 0;
    CHECK_THROWS_AS(build_lfpc(p), std::invalid_argument);
    p = {};
    p.site_spacing = 0;
    CHECK_THROWS_AS(build_lfpc(p), std::invalid_argument);
    p = {};
    p.electrode_pitch = 0;
    CHECK_THROWS_AS(build_lfpc(p), std::invalid_argument);
}

TEST_CASE("the validator notices broken chips") {
    SUBCASE("a path cell rewired off its phase") {
        ChipArchitecture a = build_lfpc({});
        a.set_pin(a.path(PathId::Horizontal).cells[4], 9);
        CHECK(!validate_architecture(a).empty());
    }
    SUBCASE("a dedicated hold pin made shared") {
        ChipArchitecture a = build_lfpc({});
        a.set_pin(a.site("SA1L")->hold_cell, a.pin_at(a.site("SA1R")->hold_cell));
        CHECK(!validate_architecture(a).empty());
    }
    SUBCASE("a mixer loop cell dropped from its group pin") {
        ChipArchitecture a = build_lfpc({});
        a.set_pin(a.site("MA2")->loop_cells[3], 99);
        CHECK(!validate_architecture(a).empty());
    }
    SUBCASE("a reservoir pin colliding with a grid pin") {
        ChipArchitecture a = build_lfpc({});
        a.reservoirs[0].pin = 5;
        CHECK(!validate_architecture(a).empty());
    }
}

TEST_CASE("architecture text round-trips exactly") {
    ChipArchitecture a = build_lfpc({});
    std::string text = save_architecture(a);
    auto loaded = load_architecture(text);
    REQUIRE(loaded.arch.has_value());
    CHECK(save_architecture(*loaded.arch) == text);
    CHECK(validate_architecture(*loaded.arch).empty());

    ArchParams p;
    p.mixers_per_group = 3;
    p.mixer_loop_cols = 2;
    p.reservoirs_per_side = 2;
    ChipArchitecture b = build_lfpc(p);
    std::string tb = save_architecture(b);
    auto lb = load_architecture(tb);
    REQUIRE(lb.arch.has_value());
    CHECK(save_architecture(*lb.arch) == tb);

    CHECK(!load_architecture("garbage\n").arch.has_value());
    CHECK(!load_architecture("lfpc-arch 2\n").arch.has_value());
    CHECK(!load_architecture("lfpc-arch 1\npin 0 0 1\n").arch.has_value());
}

TEST_CASE("default chip matches its committed snapshot") {
    std::string want = slurp(std::string(LFPC_TEST_DATA_DIR) + "/default_chip.arch");
    CHECK(save_architecture(build_lfpc({})) == want);
}
