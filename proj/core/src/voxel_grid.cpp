#include "seqfuse/voxel_grid.hpp"

#include <algorithm>

#include "seqfuse/errors.hpp"

namespace seqfuse {

namespace {

std::uint64_t pack_coord(VoxelCoord c) {
    const auto ui = static_cast<std::uint32_t>(static_cast<std::int64_t>(c.i) + 0x80000000LL);
    const auto uj = static_cast<std::uint32_t>(static_cast<std::int64_t>(c.j) + 0x80000000LL);
    return (std::uint64_t(ui) << 32) | std::uint64_t(uj);
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

VoxelGrid::VoxelGrid(double voxel_size, std::int32_t max_points_per_voxel,
                     std::size_t expected_points)
    : voxel_size_(voxel_size), max_points_(max_points_per_voxel) {
    if (!(voxel_size > 0.0)) throw DomainError("voxel_size must be > 0");
    if (max_points_ < 1) throw DomainError("max_points_per_voxel must be >= 1");
    // Presize to 2x the point count, an upper bound on non-empty voxels, so
    // typical builds never rehash. The cap keeps the table cache-resident on
    // dense frames where points far outnumber voxels; a genuinely voxel-rich
    // frame grows past it with a few amortized rehashes.
    std::size_t size = 64;
    const std::size_t target = std::min<std::size_t>(2 * expected_points, std::size_t{1} << 19);
    while (size < target) size *= 2;
    table_.assign(size, TableEntry{});
    point_store_.reserve(expected_points + expected_points / 2);
    slots_.reserve(std::min<std::size_t>(expected_points, std::size_t{1} << 18));
}

std::int32_t VoxelGrid::lookup(VoxelCoord coord) const {
    const std::uint64_t key = pack_coord(coord);
    const std::size_t mask = table_.size() - 1;
    std::size_t pos = mix64(key) & mask;
    while (table_[pos].slot != kEmptySlot) {
        if (table_[pos].key == key) return table_[pos].slot;
        pos = (pos + 1) & mask;
    }
    return kEmptySlot;
}

std::span<const std::uint32_t> VoxelGrid::slot_points(std::int32_t slot) const {
    const auto& header = slots_[static_cast<std::size_t>(slot)];
    return {point_store_.data() + header.offset, header.size};
}

VoxelCoord VoxelGrid::slot_coord(std::int32_t slot) const {
    return slots_[static_cast<std::size_t>(slot)].coord;
}

std::vector<std::uint32_t> VoxelGrid::retained_indices() const {
    std::vector<std::uint32_t> out;
    out.reserve(point_store_.size());
    for (std::int32_t s = 0; s < slot_count(); ++s) {
        const auto pts = slot_points(s);
        out.insert(out.end(), pts.begin(), pts.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void VoxelGrid::grow() {
    std::vector<TableEntry> table(table_.size() * 2, TableEntry{});
    const std::size_t mask = table.size() - 1;
    for (const auto& entry : table_) {
        if (entry.slot == kEmptySlot) continue;
        std::size_t pos = mix64(entry.key) & mask;
        while (table[pos].slot != kEmptySlot) pos = (pos + 1) & mask;
        table[pos] = entry;
    }
    table_ = std::move(table);
}

void VoxelGrid::insert(VoxelCoord coord, std::uint32_t point_index) {
    insert_packed(pack_coord(coord), point_index);
}

void VoxelGrid::insert_packed(std::uint64_t key, std::uint32_t point_index) {
    const std::size_t mask = table_.size() - 1;
    std::size_t pos = mix64(key) & mask;
    while (table_[pos].slot != kEmptySlot) {
        if (table_[pos].key == key) {
            auto& header = slots_[static_cast<std::size_t>(table_[pos].slot)];
            if (header.size >= static_cast<std::uint32_t>(max_points_)) {
                ++overflow_;
                return;
            }
            if (header.size == header.capacity) {
                // Relocate the run to the tail with doubled capacity; the old
                // run becomes dead space, bounded by the geometric growth.
                const std::uint32_t cap =
                    std::min(header.capacity * 2, static_cast<std::uint32_t>(max_points_));
                const auto off = static_cast<std::uint32_t>(point_store_.size());
                point_store_.resize(point_store_.size() + cap);
                std::copy_n(point_store_.begin() + header.offset, header.size,
                            point_store_.begin() + off);
                header.offset = off;
                header.capacity = cap;
            }
            point_store_[header.offset + header.size] = point_index;
            ++header.size;
            return;
        }
        pos = (pos + 1) & mask;
    }

    const auto slot = static_cast<std::int32_t>(slots_.size());
    const auto cap = static_cast<std::uint32_t>(std::min(4, max_points_));
    const auto off = static_cast<std::uint32_t>(point_store_.size());
    const VoxelCoord coord{
        static_cast<std::int32_t>(static_cast<std::int64_t>(key >> 32) - 0x80000000LL),
        static_cast<std::int32_t>(static_cast<std::int64_t>(key & 0xffffffffULL) -
                                  0x80000000LL)};
    slots_.push_back({coord, 1, cap, off});
    point_store_.resize(point_store_.size() + cap);
    point_store_[off] = point_index;
    table_[pos] = {key, slot};

    if (slots_.size() * 2 > table_.size()) grow();
}

VoxelGrid build_grid(const PointCloudFrame& frame, double voxel_size,
                     std::int32_t max_points_per_voxel) {
    VoxelGrid grid(voxel_size, max_points_per_voxel, frame.points.size());
    const std::size_t n = frame.points.size();

    // Packing keys first leaves a tight arithmetic loop, then a memory-bound
    // insert loop whose random table probes are prefetched ahead.
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i)
        keys[i] = pack_coord(voxel_of(frame.points[i], voxel_size));

    constexpr std::size_t kPrefetchAhead = 8;
    for (std::size_t i = 0; i < n; ++i) {
        if (i + kPrefetchAhead < n) {
            const std::size_t pos =
                mix64(keys[i + kPrefetchAhead]) & (grid.table_.size() - 1);
            __builtin_prefetch(&grid.table_[pos]);
        }
        grid.insert_packed(keys[i], static_cast<std::uint32_t>(i));
    }
    return grid;
}

}  // namespace seqfuse
