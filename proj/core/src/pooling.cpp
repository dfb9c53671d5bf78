#include "seqfuse/pooling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"
#include "seqfuse/parallel.hpp"
#include "seqfuse/rng.hpp"

namespace seqfuse {

namespace {

/// Draws k_samples entries from the (ascending) candidate list into a FramePool.
/// With c > K candidates: partial Fisher-Yates keyed by (seed, proposal, frame),
/// so the draw is independent of which worker runs it. With 0 < c <= K: all
/// candidates in order, padded cyclically. With c = 0: region-center pads.
FramePool sample_pool(std::vector<std::uint32_t> candidates, const PointCloudFrame& frame,
                      const CylindricalRegion& region, double pad_z, std::int32_t k_samples,
                      std::uint64_t seed) {
    FramePool pool;
    pool.region = region;
    const auto k = static_cast<std::size_t>(k_samples);
    pool.points.resize(k);
    pool.source.resize(k);
    pool.valid.resize(k);

    const std::size_t c = candidates.size();
    if (c == 0) {
        const Point3 pad{region.cx, region.cy, pad_z, 0.0};
        for (std::size_t i = 0; i < k; ++i) {
            pool.points[i] = pad;
            pool.source[i] = -1;
            pool.valid[i] = 0;
        }
        return pool;
    }

    if (c > k) {
        Rng rng(mix_key(seed, static_cast<std::uint64_t>(region.source_proposal_id),
                        static_cast<std::uint64_t>(region.frame_index)));
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.bounded(c - i));
            std::swap(candidates[i], candidates[j]);
        }
        for (std::size_t i = 0; i < k; ++i) {
            pool.points[i] = frame.points[candidates[i]];
            pool.source[i] = candidates[i];
            pool.valid[i] = 1;
        }
        return pool;
    }

    for (std::size_t i = 0; i < k; ++i) {
        const std::uint32_t idx = candidates[i % c];
        pool.points[i] = frame.points[idx];
        pool.source[i] = idx;
        pool.valid[i] = i < c ? 1 : 0;
    }
    return pool;
}

std::unordered_map<std::int32_t, std::size_t> frame_positions(const SequenceWindow& window) {
    std::unordered_map<std::int32_t, std::size_t> pos;
    for (std::size_t f = 0; f < window.frames.size(); ++f)
        pos.emplace(window.frames[f].frame_index, f);
    return pos;
}

template <typename GatherFn>
std::vector<PooledProposal> pool_common(
    const SequenceWindow& window,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    std::span<const Proposal> proposals, std::int32_t k_samples, std::uint64_t seed,
    int num_workers, const GatherFn& gather) {
    if (k_samples < 1) throw DomainError("k_samples must be >= 1");
    const auto positions = frame_positions(window);

    std::vector<PooledProposal> out(regions_by_proposal.size());
    for_each_index(regions_by_proposal.size(), num_workers, [&](std::size_t p) {
        const auto& regions = regions_by_proposal[p];
        PooledProposal pooled;
        pooled.proposal_id = regions.empty() ? static_cast<std::int32_t>(p)
                                             : regions.front().source_proposal_id;
        pooled.frames.reserve(regions.size());
        for (const auto& region : regions) {
            const auto it = positions.find(region.frame_index);
            if (it == positions.end())
                throw MissingGrid("no frame " + std::to_string(region.frame_index) +
                                  " in window");
            const auto& frame = window.frames[it->second];
            const double pad_z =
                region.source_proposal_id >= 0 &&
                        static_cast<std::size_t>(region.source_proposal_id) < proposals.size()
                    ? proposals[region.source_proposal_id].cz
                    : 0.0;
            pooled.frames.push_back(sample_pool(gather(it->second, frame, region), frame, region,
                                                pad_z, k_samples, seed));
        }
        out[p] = std::move(pooled);
    });
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

bool FramePool::operator==(const FramePool& other) const {
    return region.frame_index == other.region.frame_index &&
           region.source_proposal_id == other.region.source_proposal_id &&
           region.cx == other.region.cx && region.cy == other.region.cy &&
           region.diameter == other.region.diameter && points == other.points &&
           source == other.source && valid == other.valid;
}

std::vector<std::uint32_t> gather_candidates_optimized(const PointCloudFrame& frame,
                                                       const VoxelGrid& grid,
                                                       const CylindricalRegion& region) {
    const double v = grid.voxel_size();
    const double r = 0.5 * region.diameter;
    // Every voxel intersecting the cylinder lies in this index window; its
    // width is at most ceil(d/v) + 1 per axis.
    const std::int32_t i_lo = voxel_index(region.cx - r, v);
    const std::int32_t i_hi = voxel_index(region.cx + r, v);
    const std::int32_t j_lo = voxel_index(region.cy - r, v);
    const std::int32_t j_hi = voxel_index(region.cy + r, v);

    std::vector<std::uint32_t> candidates;
    for (std::int32_t i = i_lo; i <= i_hi; ++i) {
        for (std::int32_t j = j_lo; j <= j_hi; ++j) {
            const std::int32_t slot = grid.lookup({i, j});
            if (slot == kEmptySlot) continue;
            for (std::uint32_t idx : grid.slot_points(slot)) {
                if (point_in_region(frame.points[idx], region)) candidates.push_back(idx);
            }
        }
    }
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

std::vector<std::uint32_t> gather_candidates_naive(const PointCloudFrame& frame,
                                                   const CylindricalRegion& region) {
    std::vector<std::uint32_t> candidates;
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
        if (point_in_region(frame.points[i], region))
            candidates.push_back(static_cast<std::uint32_t>(i));
    }
    return candidates;
}

std::vector<PooledProposal> pool_optimized(
    const SequenceWindow& window, std::span<const VoxelGrid> grids,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    std::span<const Proposal> proposals, std::int32_t k_samples, std::uint64_t seed,
    int num_workers) {
    if (grids.size() != window.frames.size())
        throw MissingGrid("expected one grid per window frame, got " +
                          std::to_string(grids.size()) + " for " +
                          std::to_string(window.frames.size()) + " frames");
    return pool_common(window, regions_by_proposal, proposals, k_samples, seed, num_workers,
                       [&](std::size_t frame_pos, const PointCloudFrame& frame,
                           const CylindricalRegion& region) {
                           return gather_candidates_optimized(frame, grids[frame_pos], region);
                       });
}

std::vector<PooledProposal> pool_naive(
    const SequenceWindow& window,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    std::span<const Proposal> proposals, std::int32_t k_samples, std::uint64_t seed,
    int num_workers) {
    return pool_common(window, regions_by_proposal, proposals, k_samples, seed, num_workers,
                       [&](std::size_t, const PointCloudFrame& frame,
                           const CylindricalRegion& region) {
                           return gather_candidates_naive(frame, region);
                       });
}

VerifyReport verify_pooling(const SequenceWindow& window, std::span<const Proposal> proposals,
                            double gamma, std::int32_t k_samples, double voxel_size,
                            std::int32_t max_points_per_voxel, std::uint64_t seed) {
    const auto validation = validate_window(window);
    if (!validation.ok()) throw DomainError("invalid window: " + validation.message);
    const auto T = static_cast<std::int32_t>(window.frames.size());
    PropagationConfig config{gamma, T};

    std::vector<std::vector<CylindricalRegion>> regions;
    regions.reserve(proposals.size());
    for (std::size_t p = 0; p < proposals.size(); ++p)
        regions.push_back(propagate(proposals[p], config, static_cast<std::int32_t>(p)));

    std::vector<VoxelGrid> grids;
    grids.reserve(window.frames.size());
    bool any_overflow = false;
    for (const auto& frame : window.frames) {
        grids.push_back(build_grid(frame, voxel_size, max_points_per_voxel));
        any_overflow = any_overflow || grids.back().overflow_count() > 0;
    }

    VerifyReport report;
    report.element_equality_applicable = !any_overflow;

    // Candidate-set comparison per region: optimized must equal the naive set
    // restricted to grid-retained points.
    std::vector<std::vector<std::uint8_t>> retained(window.frames.size());
    for (std::size_t f = 0; f < window.frames.size(); ++f) {
        retained[f].assign(window.frames[f].points.size(), 0);
        for (std::uint32_t idx : grids[f].retained_indices()) retained[f][idx] = 1;
    }

    const auto positions = frame_positions(window);
    for (const auto& group : regions) {
        for (const auto& region : group) {
            const std::size_t f = positions.at(region.frame_index);
            const auto& frame = window.frames[f];
            const auto opt = gather_candidates_optimized(frame, grids[f], region);
            const auto naive = gather_candidates_naive(frame, region);
            std::vector<std::uint32_t> naive_retained;
            naive_retained.reserve(naive.size());
            for (std::uint32_t idx : naive) {
                if (retained[f][idx]) naive_retained.push_back(idx);
            }
            ++report.regions_checked;
            if (opt != naive_retained) {
                ++report.candidate_mismatches;
                report.candidate_sets_ok = false;
            }
            if (naive.size() != naive_retained.size()) ++report.retention_divergences;
        }
    }

    const auto pooled_opt = pool_optimized(window, grids, regions, proposals, k_samples, seed);
    const auto pooled_naive = pool_naive(window, regions, proposals, k_samples, seed);
    if (report.element_equality_applicable) {
        report.element_equality_ok = pooled_opt == pooled_naive;
    }

    // Independent membership audit: recompute the cylinder inequality from the
    // raw proposal fields for every valid pooled point.
    for (const auto& pooled : {&pooled_opt, &pooled_naive}) {
        for (const auto& pp : *pooled) {
            const auto& prop = proposals[static_cast<std::size_t>(pp.proposal_id)];
            for (const auto& fp : pp.frames) {
                const std::int32_t dt = T - fp.region.frame_index;
                const double cx = prop.cx - prop.vx * dt;
                const double cy = prop.cy - prop.vy * dt;
                const double d =
                    std::sqrt(prop.w * prop.w + prop.l * prop.l) * std::pow(gamma, dt + 1);
                for (std::size_t i = 0; i < fp.points.size(); ++i) {
                    if (!fp.valid[i]) continue;
                    const double dx = fp.points[i].x - cx;
                    const double dy = fp.points[i].y - cy;
                    if (!(dx * dx + dy * dy < 0.25 * d * d)) {
                        ++report.membership_failures;
                        report.membership_ok = false;
                    }
                }
            }
        }
    }
    return report;
}

std::string verify_report_to_json(const VerifyReport& report) {
    nlohmann::json j{{"passed", report.passed()},
                     {"candidate_sets_ok", report.candidate_sets_ok},
                     {"element_equality_applicable", report.element_equality_applicable},
                     {"element_equality_ok", report.element_equality_ok},
                     {"membership_ok", report.membership_ok},
                     {"regions_checked", report.regions_checked},
                     {"candidate_mismatches", report.candidate_mismatches},
                     {"retention_divergences", report.retention_divergences},
                     {"membership_failures", report.membership_failures}};
    return j.dump(2);
}

BenchReport bench_pooling(std::span<const std::size_t> point_counts, int m_proposals,
                          std::int32_t k_samples, int repetitions, double voxel_size,
                          std::int32_t max_points_per_voxel, std::uint64_t seed) {
    if (repetitions < 3) throw DomainError("bench_pooling: repetitions must be >= 3");
    using clock = std::chrono::steady_clock;

    BenchReport report;
    report.repetitions = repetitions;
    const double extent = 75.0;

    for (const std::size_t n : point_counts) {
        Rng rng(mix_key(seed, n));
        SequenceWindow window;
        PointCloudFrame frame;
        frame.frame_index = 1;
        frame.points.resize(n);
        for (auto& p : frame.points) {
            p.x = rng.uniform(-extent, extent);
            p.y = rng.uniform(-extent, extent);
            p.z = rng.uniform(0.0, 3.0);
            p.intensity = rng.next_double();
        }
        window.frames.push_back(std::move(frame));

        std::vector<Proposal> proposals;
        std::vector<std::vector<CylindricalRegion>> regions;
        for (int m = 0; m < m_proposals; ++m) {
            Proposal p;
            p.cx = rng.uniform(-extent, extent);
            p.cy = rng.uniform(-extent, extent);
            p.cz = 1.0;
            p.w = rng.uniform(1.5, 3.0);
            p.l = rng.uniform(3.0, 6.0);
            p.h = rng.uniform(1.2, 2.5);
            p.yaw = rng.uniform(-M_PI, M_PI);
            proposals.push_back(make_proposal(p));
            regions.push_back(propagate(proposals.back(), {1.1, 1}, m));
        }

        std::vector<double> naive_times, opt_times;
        for (int rep = 0; rep < repetitions; ++rep) {
            const auto t0 = clock::now();
            auto pooled_naive = pool_naive(window, regions, proposals, k_samples, seed);
            const auto t1 = clock::now();
            std::vector<VoxelGrid> grids;
            grids.push_back(build_grid(window.frames[0], voxel_size, max_points_per_voxel));
            auto pooled_opt =
                pool_optimized(window, grids, regions, proposals, k_samples, seed);
            const auto t2 = clock::now();
            naive_times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            opt_times.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
            if (pooled_naive.size() != pooled_opt.size())
                throw Error("bench_pooling: pooling paths disagree on output size");
        }

        BenchRow row;
        row.n_points = n;
        row.m_proposals = m_proposals;
        row.k_samples = k_samples;
        row.naive_ms = median(naive_times);
        row.optimized_ms = median(opt_times);
        row.speedup = row.optimized_ms > 0.0 ? row.naive_ms / row.optimized_ms : 0.0;
        report.rows.push_back(row);
    }

    // Least-squares slope of log(optimized) vs log(N).
    if (report.rows.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const auto cnt = static_cast<double>(report.rows.size());
        for (const auto& row : report.rows) {
            const double x = std::log(static_cast<double>(row.n_points));
            const double y = std::log(std::max(row.optimized_ms, 1e-9));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        report.slope_fit = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    }
    return report;
}

std::string pooled_proposals_to_json(std::span<const PooledProposal> pooled) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pp : pooled) {
        for (const auto& fp : pp.frames) {
            nlohmann::json points = nlohmann::json::array();
            for (const auto& p : fp.points)
                points.push_back({p.x, p.y, p.z, p.intensity});
            arr.push_back({{"proposal_id", pp.proposal_id},
                           {"t", fp.region.frame_index},
                           {"points", points},
                           {"mask", fp.valid}});
        }
    }
    return arr.dump();
}

std::string bench_report_to_csv(const BenchReport& report) {
    std::string csv = "N,M,K,naive_ms_median,optimized_ms_median,speedup,slope_fit\n";
    for (const auto& row : report.rows) {
        csv += std::to_string(row.n_points) + "," + std::to_string(row.m_proposals) + "," +
               std::to_string(row.k_samples) + "," + std::to_string(row.naive_ms) + "," +
               std::to_string(row.optimized_ms) + "," + std::to_string(row.speedup) + "," +
               std::to_string(report.slope_fit) + "\n";
    }
    return csv;
}

}  // namespace seqfuse
