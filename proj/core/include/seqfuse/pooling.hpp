#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqfuse/propagation.hpp"
#include "seqfuse/types.hpp"
#include "seqfuse/voxel_grid.hpp"

namespace seqfuse {

/// K sampled points-of-interest for one (proposal, frame) pair. Entries are
/// always exactly K: when a region yields fewer candidates the list is padded
/// by cyclic repetition (valid = 0 on the repeats), and an empty region is
/// padded with the region center at the source proposal's z.
struct FramePool {
    CylindricalRegion region;
    std::vector<Point3> points;
    std::vector<std::int64_t> source;  // index into the frame, -1 for synthesized pads
    std::vector<std::uint8_t> valid;

    [[nodiscard]] bool operator==(const FramePool&) const;
};

struct PooledProposal {
    std::int32_t proposal_id{0};
    std::vector<FramePool> frames;  // ordered by frame index ascending

    [[nodiscard]] bool operator==(const PooledProposal&) const = default;
};

/// Candidate indices (ascending) from the covering voxel field of the region,
/// filtered by the cylinder test. Candidates are restricted to grid-retained
/// points; the field spans every voxel the cylinder can touch, so the result
/// equals filtering all retained points of the frame.
[[nodiscard]] std::vector<std::uint32_t> gather_candidates_optimized(
    const PointCloudFrame& frame, const VoxelGrid& grid, const CylindricalRegion& region);

/// Candidate indices (ascending) from a linear scan over all frame points.
[[nodiscard]] std::vector<std::uint32_t> gather_candidates_naive(
    const PointCloudFrame& frame, const CylindricalRegion& region);

/// Two-stage pooling: voxel-field gather over prebuilt grids, then a seeded
/// uniform draw of K points without replacement per (proposal, frame). grids
/// must align one-to-one with window.frames. Deterministic for fixed
/// (inputs, seed) at any worker count.
[[nodiscard]] std::vector<PooledProposal> pool_optimized(
    const SequenceWindow& window, std::span<const VoxelGrid> grids,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    std::span<const Proposal> proposals, std::int32_t k_samples, std::uint64_t seed,
    int num_workers = 1);

/// Continuous-space oracle: same draw protocol over all frame points, no voxel
/// subsampling. O(N*M) in points and regions.
[[nodiscard]] std::vector<PooledProposal> pool_naive(
    const SequenceWindow& window,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    std::span<const Proposal> proposals, std::int32_t k_samples, std::uint64_t seed,
    int num_workers = 1);

struct VerifyReport {
    bool candidate_sets_ok{true};
    bool element_equality_applicable{false};
    bool element_equality_ok{true};
    bool membership_ok{true};
    std::uint64_t regions_checked{0};
    std::uint64_t candidate_mismatches{0};
    std::uint64_t retention_divergences{0};  // naive candidates dropped by the first-k rule
    std::uint64_t membership_failures{0};

    [[nodiscard]] bool passed() const {
        return candidate_sets_ok && membership_ok &&
               (!element_equality_applicable || element_equality_ok);
    }
};

/// Runs both pooling paths on identical regions and cross-checks them:
/// optimized candidates must equal naive candidates restricted to
/// grid-retained points; full element-wise output equality must hold when no
/// grid dropped a point; every valid pooled point must satisfy the cylinder
/// inequality recomputed from the raw proposal fields.
[[nodiscard]] VerifyReport verify_pooling(const SequenceWindow& window,
                                          std::span<const Proposal> proposals, double gamma,
                                          std::int32_t k_samples, double voxel_size,
                                          std::int32_t max_points_per_voxel, std::uint64_t seed);

[[nodiscard]] std::string verify_report_to_json(const VerifyReport& report);

struct BenchRow {
    std::size_t n_points{0};
    int m_proposals{0};
    std::int32_t k_samples{0};
    double naive_ms{0.0};
    double optimized_ms{0.0};
    double speedup{0.0};
};

struct BenchReport {
    std::vector<BenchRow> rows;
    double slope_fit{0.0};  // log-log slope of optimized time vs N
    int repetitions{0};
};

/// Wall-clock medians of both pooling paths over synthetic uniform scenes.
/// Optimized timings include grid construction. repetitions must be >= 3.
[[nodiscard]] BenchReport bench_pooling(std::span<const std::size_t> point_counts,
                                        int m_proposals, std::int32_t k_samples, int repetitions,
                                        double voxel_size, std::int32_t max_points_per_voxel,
                                        std::uint64_t seed);

/// CSV columns: N, M, K, naive_ms_median, optimized_ms_median, speedup, slope_fit.
[[nodiscard]] std::string bench_report_to_csv(const BenchReport& report);

/// Debug dump: per (proposal, frame) the sampled points and validity mask as
/// JSON [{"proposal_id", "t", "points": [[x,y,z,intensity],...], "mask"}].
[[nodiscard]] std::string pooled_proposals_to_json(std::span<const PooledProposal> pooled);

}  // namespace seqfuse
