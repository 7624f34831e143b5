#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>

namespace lfpc {

// Grid coordinate. Row 0 is the top edge of the electrode array.
struct Cell {
    int row = 0;
    int col = 0;

    friend bool operator==(const Cell& a, const Cell& b) { return a.row == b.row && a.col == b.col; }
    friend bool operator!=(const Cell& a, const Cell& b) { return !(a == b); }
    friend bool operator<(const Cell& a, const Cell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    }
};

inline int manhattan(const Cell& a, const Cell& b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

// Chebyshev distance: droplet interference radius uses the 8-neighborhood.
inline int chebyshev(const Cell& a, const Cell& b) {
    int dr = std::abs(a.row - b.row);
    int dc = std::abs(a.col - b.col);
    return dr > dc ? dr : dc;
}

// Droplet motion uses the 4-neighborhood only.
inline bool adjacent4(const Cell& a, const Cell& b) { return manhattan(a, b) == 1; }

inline std::array<Cell, 4> neighbors4(const Cell& c) {
    return {Cell{c.row - 1, c.col}, Cell{c.row + 1, c.col},
            Cell{c.row, c.col - 1}, Cell{c.row, c.col + 1}};
}

inline std::string to_string(const Cell& c) {
    return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

} // namespace lfpc
