#ifndef SAMP_PATTERNS_HPP
#define SAMP_PATTERNS_HPP

#include <array>
#include <cstdint>
#include <vector>

namespace samp {

// Fixed composition-pattern partitions of an H x W grid. Cell (i,j) is
// 1-indexed with normalized center u=(i-0.5)/H, v=(j-0.5)/W:
//   1 vertical halves        (2)  v < 0.5
//   2 horizontal halves      (2)  u < 0.5
//   3 main diagonal          (2)  u < v
//   4 anti-diagonal          (2)  u + v < 1
//   5 center / surround      (2)  central third in both axes is partition 0
//   6 quadrants              (4)  2*[u >= 0.5] + [v >= 0.5]
//   7 radial X sectors       (4)  top / bottom / left / right of the center
//   8 rule-of-thirds cells   (9)  3*min(floor(3u),2) + min(floor(3v),2)
// Comparisons are evaluated in exact integer arithmetic so tie cells land
// deterministically on the same side at every resolution.
struct PartitionMap {
    int pattern_id = 0; // 1..8
    int height = 0;
    int width = 0;
    int partition_count = 0;                 // K_p
    std::vector<std::uint16_t> assignment;   // row-major cell -> partition
    std::vector<std::vector<int>> cells;     // partition -> row-major cell indices

    int cell_partition(int i, int j) const { // 0-indexed row, col
        return assignment[static_cast<std::size_t>(i) * width + j];
    }
};

inline constexpr std::array<int, 8> kPartitionCounts = {2, 2, 2, 2, 2, 4, 4, 9};

PartitionMap pattern_mask(int pattern_id, int height, int width);

// Cells of one partition in row-major order of the full grid. This order
// defines the saliency-vector layout and is part of the checkpoint
// compatibility contract.
const std::vector<int>& partition_cells(const PartitionMap& map, int k);

// All eight maps for one grid size, computed once and shared read-only.
struct PatternSet {
    std::array<PartitionMap, 8> maps;

    const PartitionMap& map(int pattern_id) const { return maps[pattern_id - 1]; }
};

PatternSet make_pattern_set(int height, int width);

} // namespace samp

#endif
