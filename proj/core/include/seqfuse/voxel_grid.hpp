#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "seqfuse/types.hpp"

namespace seqfuse {

/// Returned by VoxelGrid::lookup for empty voxels.
inline constexpr std::int32_t kEmptySlot = -1;

struct VoxelCoord {
    std::int32_t i{0};
    std::int32_t j{0};

    [[nodiscard]] bool operator==(const VoxelCoord&) const = default;
};

[[nodiscard]] inline std::int32_t voxel_index(double x, double voxel_size) {
    // Out-of-range coordinates saturate to the grid edge; the cylinder test
    // still decides membership.
    const double idx = std::floor(x / voxel_size);
    if (idx <= -2147483648.0) return std::numeric_limits<std::int32_t>::min();
    if (idx >= 2147483647.0) return std::numeric_limits<std::int32_t>::max();
    return static_cast<std::int32_t>(idx);
}

[[nodiscard]] inline VoxelCoord voxel_of(const Point3& p, double voxel_size) {
    return {voxel_index(p.x, voxel_size), voxel_index(p.y, voxel_size)};
}

/// Sparse 2D voxelization of one frame. The z axis is not partitioned: pooling
/// regions are unlimited-height cylinders, so only the plan position matters.
///
/// Non-empty voxels live in a contiguous slot store holding up to k point
/// indices each, in frame order (the first k points of a voxel are kept, the
/// rest are dropped). Each slot owns a run inside one flat index buffer; runs
/// start small and relocate to the tail with doubled capacity as they fill,
/// so build writes stay sequential and memory tracks the retained points
/// rather than k times the voxel count. An open-addressing hash table with
/// linear probing maps voxel coordinates to slot indices; the table is a
/// power of two kept at load factor <= 0.5, and rehashing never reorders
/// slots.
class VoxelGrid {
public:
    VoxelGrid(double voxel_size, std::int32_t max_points_per_voxel,
              std::size_t expected_points = 0);

    /// Slot index for the coordinate, or kEmptySlot.
    [[nodiscard]] std::int32_t lookup(VoxelCoord coord) const;

    [[nodiscard]] std::span<const std::uint32_t> slot_points(std::int32_t slot) const;
    [[nodiscard]] VoxelCoord slot_coord(std::int32_t slot) const;

    [[nodiscard]] std::int32_t slot_count() const {
        return static_cast<std::int32_t>(slots_.size());
    }
    [[nodiscard]] double voxel_size() const { return voxel_size_; }
    [[nodiscard]] std::int32_t max_points_per_voxel() const { return max_points_; }
    /// Number of points dropped by the first-k rule; zero means the grid
    /// retained every point of the frame.
    [[nodiscard]] std::uint64_t overflow_count() const { return overflow_; }

    /// All retained point indices, ascending.
    [[nodiscard]] std::vector<std::uint32_t> retained_indices() const;

private:
    friend VoxelGrid build_grid(const PointCloudFrame&, double, std::int32_t);

    struct TableEntry {
        std::uint64_t key{0};
        std::int32_t slot{kEmptySlot};
    };
    struct SlotHeader {
        VoxelCoord coord;
        std::uint32_t size{0};
        std::uint32_t capacity{0};
        std::uint32_t offset{0};  // run start inside point_store_
    };

    void insert(VoxelCoord coord, std::uint32_t point_index);
    void insert_packed(std::uint64_t key, std::uint32_t point_index);
    void grow();

    double voxel_size_;
    std::int32_t max_points_;
    std::uint64_t overflow_{0};

    std::vector<SlotHeader> slots_;
    std::vector<std::uint32_t> point_store_;
    std::vector<TableEntry> table_;
};

/// Single pass over the frame's points in order; O(N). Throws DomainError on
/// voxel_size <= 0 or max_points_per_voxel < 1.
[[nodiscard]] VoxelGrid build_grid(const PointCloudFrame& frame, double voxel_size,
                                   std::int32_t max_points_per_voxel);

}  // namespace seqfuse
