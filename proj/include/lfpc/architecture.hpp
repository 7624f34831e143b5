#pragma once

#include "lfpc/geometry.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lfpc {

// Electrode control line id.  Pin 0 is reserved for permanently grounded
// filler electrodes; it is never driven.
using PinId = int;

enum class PathId { VerticalLeft, Horizontal, VerticalRight };
enum class SiteKind { Mixer, Ssd };
enum class SiteGroup { Above, Below }; // relative to the horizontal routing path
enum class ReservoirMode { Input, Output };
enum class Side { Left, Right };

const char* to_string(PathId p);
const char* to_string(SiteKind k);
const char* to_string(SiteGroup g);

// One droplet routing path: a contiguous straight run of cells driven by a
// 3-phase pin triple.  Cell k is wired to phase_pins[k mod 3]; firing one
// phase pin therefore moves every droplet on the path by one cell at once.
struct RoutingPath {
    PathId id = PathId::Horizontal;
    std::array<PinId, 3> phase_pins{};
    std::vector<Cell> cells; // in index order

    int index_of(const Cell& c) const; // -1 when not a member
};

// A work site (mixer loop or storage/split/detect pocket).
//
// Mixer: loop_cells is the 2-row circulation ring, position 0 is the io
// cell on the row adjacent to the access cell.  A droplet enters through
// access_cell -> io (loop position 0) and circulates with the group cursor.
//
// Ssd: io_cell faces the access cell; hold_cell sits behind io; far_cell
// sits behind hold and receives the second half of a split (io + far fire
// while hold is released).
struct ModuleSite {
    std::string id;
    SiteKind kind = SiteKind::Mixer;
    SiteGroup group = SiteGroup::Above;
    std::vector<Cell> cells; // exclusive footprint incl. access/far cells
    Cell io_cell;
    Cell access_cell; // between io_cell and the horizontal path
    Cell hold_cell;   // Ssd only
    Cell far_cell;    // Ssd only
    std::vector<Cell> loop_cells; // Mixer only, ring order, [0] == io_cell
    std::string host_mixer;       // Ssd only: the mixer whose corner it sits at

    bool covers(const Cell& c) const;
};

// Dispense or collection port on one of the vertical paths.  The mouth cell
// is an ordinary path cell; `pin` drives the off-grid reservoir electrode.
struct Reservoir {
    std::string id;
    ReservoirMode mode = ReservoirMode::Input;
    Side side = Side::Left;
    std::string fluid; // Input: fluid name; Output: port name
    Cell mouth_cell;
    PinId pin = 0;
};

struct ArchParams {
    int mixers_per_group = 2;
    int mixer_loop_cols = 4;   // ring spans 2 rows x this many columns
    int reservoirs_per_side = 1; // input+output pairs per side
    int site_spacing = 1;      // buffer columns between site complexes
    double electrode_pitch = 1.0;
};

// Full chip description.
//
// Pin plan at defaults (2 mixers/group, 4-col loops, 1 reservoir pair/side):
//
//   0        grounded filler
//   1-3      vertical-left path phases        4-6  horizontal path phases
//   7-9      vertical-right path phases
//   10-17    Above mixer loop positions 0-7   (shared across Above mixers)
//   18-25    Below mixer loop positions 0-7   (shared across Below mixers)
//   26       Above SSD io (shared)            27   Below SSD io (shared)
//   28-31    Above SSD hold (one per SSD)     32-35 Below SSD hold
//   36       Above SSD far/split (shared)     37   Below SSD far/split
//   38-41    mixer access cells (one per mixer: MA1, MA2, MB1, MB2)
//   42-45    Above SSD access cells (one per SSD)
//   46-49    Below SSD access cells
//   50-53    reservoir electrodes (off-grid): RLI, RLO, RRI, RRO
//
// Total distinct driven pins = 13 + 4*loop_cols + 10*mixers_per_group
//                              + 4*reservoirs_per_side  (53 at defaults).
//
// Hold/access pins are dedicated so that a parked droplet can always be
// anchored (its own electrode held active) while a shared pin fires next to
// it; group-shared io/far/loop pins rely on that anchoring for safety.
struct ChipArchitecture {
    int rows = 0;
    int cols = 0;
    double electrode_pitch = 1.0;
    std::vector<PinId> pins; // row-major [rows*cols], 0 = filler
    std::vector<RoutingPath> paths;
    std::vector<ModuleSite> sites;
    std::vector<Reservoir> reservoirs;
    ArchParams params;

    PinId pin_at(const Cell& c) const { return pins[c.row * cols + c.col]; }
    void set_pin(const Cell& c, PinId p) { pins[c.row * cols + c.col] = p; }
    bool in_bounds(const Cell& c) const {
        return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
    }

    const RoutingPath& path(PathId id) const;
    const ModuleSite* site(const std::string& id) const;
    const Reservoir* reservoir(const std::string& id) const;
    std::vector<const ModuleSite*> sites_of(SiteKind kind) const;

    // Cells a given pin drives (grid cells only).
    std::vector<Cell> cells_of_pin(PinId p) const;

    // Horizontal-path cell in the access column of a site.
    Cell path_cell_below_access(const ModuleSite& s) const;
};

// Builds the fixed-layout chip: three 3-phase routing paths, two mixer
// groups flanking the horizontal path, two corner SSDs per mixer, and
// reservoir pairs on the left/right vertical paths.
// Throws std::invalid_argument on infeasible parameters.
ChipArchitecture build_lfpc(const ArchParams& params = {});

// Structural checks: pin/phase wiring, footprint disjointness, corner
// adjacency, reachability from every mouth to every access cell.
// Empty result means the description is sound.
std::vector<std::string> validate_architecture(const ChipArchitecture& arch);

enum class AddressingScheme { Direct, CrossReference, ActiveMatrix, PinConstrained };

// Control line count for an m x n array under each addressing scheme.
// PinConstrained counts the distinct driven pins of a concrete chip
// (grid pins plus reservoir pins) and ignores m/n.
long pin_count(AddressingScheme scheme, int m, int n,
               const ChipArchitecture* arch = nullptr);

// Versioned text serialization; load(save(a)) == a byte-for-byte.
std::string save_architecture(const ChipArchitecture& arch);
struct ArchLoadResult {
    std::optional<ChipArchitecture> arch;
    std::string error;
};
ArchLoadResult load_architecture(const std::string& text);

} // namespace lfpc
