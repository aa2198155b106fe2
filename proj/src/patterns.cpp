#include "samp/patterns.hpp"
#include "samp/common.hpp"

#include <cstdlib>

namespace samp {

namespace {

// All predicates use the doubled coordinates a = 2i-1 (vs 2H) and b = 2j-1
// (vs 2W), which keeps every comparison integral.
int assign_cell(int p, int i, int j, int H, int W) {
    const long a = 2L * i - 1; // proportional to u = a / (2H)
    const long b = 2L * j - 1; // proportional to v = b / (2W)
    switch (p) {
        case 1: return b < W ? 0 : 1;
        case 2: return a < H ? 0 : 1;
        case 3: return a * W < b * H ? 0 : 1; // u < v
        case 4: return a * W + b * H < 2L * H * W ? 0 : 1;
        case 5: {
            bool inner_u = 3 * a >= 2L * H && 3 * a < 4L * H;
            bool inner_v = 3 * b >= 2L * W && 3 * b < 4L * W;
            return inner_u && inner_v ? 0 : 1;
        }
        case 6: return 2 * (a >= H ? 1 : 0) + (b >= W ? 1 : 0);
        case 7: {
            const long du = a * W - static_cast<long>(H) * W; // sign of u - 0.5, scaled by 2HW
            const long dv = b * H - static_cast<long>(H) * W;
            if (std::labs(du) >= std::labs(dv)) return du < 0 ? 0 : 1; // top / bottom
            return dv < 0 ? 2 : 3;                                    // left / right
        }
        case 8: {
            int row = static_cast<int>(3 * a / (2L * H));
            int col = static_cast<int>(3 * b / (2L * W));
            if (row > 2) row = 2;
            if (col > 2) col = 2;
            return 3 * row + col;
        }
        default: throw ValidationError("pattern_mask: pattern id " + std::to_string(p) + " outside 1..8");
    }
}

} // namespace

PartitionMap pattern_mask(int pattern_id, int height, int width) {
    if (pattern_id < 1 || pattern_id > 8)
        throw ValidationError("pattern_mask: pattern id " + std::to_string(pattern_id) + " outside 1..8");
    if (height < 3 || width < 3)
        throw ValidationError("pattern_mask: grid must be at least 3x3");

    PartitionMap map;
    map.pattern_id = pattern_id;
    map.height = height;
    map.width = width;
    map.partition_count = kPartitionCounts[pattern_id - 1];
    map.assignment.resize(static_cast<std::size_t>(height) * width);
    map.cells.resize(map.partition_count);

    for (int i = 1; i <= height; ++i) {
        for (int j = 1; j <= width; ++j) {
            int k = assign_cell(pattern_id, i, j, height, width);
            std::size_t cell = static_cast<std::size_t>(i - 1) * width + (j - 1);
            map.assignment[cell] = static_cast<std::uint16_t>(k);
            map.cells[k].push_back(static_cast<int>(cell));
        }
    }
    for (int k = 0; k < map.partition_count; ++k) {
        if (map.cells[k].empty())
            throw NumericError("pattern_mask: empty partition " + std::to_string(k) + " for pattern " +
                               std::to_string(pattern_id));
    }
    return map;
}

const std::vector<int>& partition_cells(const PartitionMap& map, int k) {
    if (k < 0 || k >= map.partition_count)
        throw ValidationError("partition_cells: partition index " + std::to_string(k) + " outside [0," +
                              std::to_string(map.partition_count) + ")");
    return map.cells[k];
}

PatternSet make_pattern_set(int height, int width) {
    PatternSet set;
    for (int p = 1; p <= 8; ++p) set.maps[p - 1] = pattern_mask(p, height, width);
    return set;
}

} // namespace samp
