#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqfuse/types.hpp"

namespace seqfuse {

/// Per-frame pooling footprint of a backtracked proposal: an unlimited-height
/// cylinder of diameter d centered at the proposal center shifted by
/// -velocity * (T - t). Points are pooled from it regardless of z.
struct CylindricalRegion {
    std::int32_t frame_index{1};
    double cx{0.0};
    double cy{0.0};
    double diameter{1.0};
    std::int32_t source_proposal_id{0};
};

struct PropagationConfig {
    double gamma{1.0};
    std::int32_t window_length{1};
};

/// d = sqrt(w^2 + l^2) * gamma^(dt + 1). Throws DomainError on non-positive
/// dims, gamma < 1, or dt < 0.
[[nodiscard]] double region_diameter(double w, double l, double gamma, std::int32_t dt);

/// One region per frame t = 1..T, ordered by t ascending. Region t has center
/// (cx - vx*(T-t), cy - vy*(T-t)).
[[nodiscard]] std::vector<CylindricalRegion> propagate(const Proposal& p,
                                                       const PropagationConfig& config,
                                                       std::int32_t proposal_id = 0);

/// The proposal box expressed at frame T - dt: center backtracked along the
/// stored velocity, dims and yaw unchanged.
[[nodiscard]] Proposal propagated_box(const Proposal& p, std::int32_t dt);

/// Strict inequality: (x - cx)^2 + (y - cy)^2 < (d/2)^2. z is ignored.
[[nodiscard]] bool point_in_region(const Point3& pt, const CylindricalRegion& region);

struct RecallReport {
    double gamma{1.0};
    double overall{1.0};
    std::vector<double> per_frame;
    /// True when a denominator was empty; recall is then defined as 1.0.
    bool vacuous{false};
};

/// Fraction of foreground points captured by at least one region of their
/// frame. Every frame must carry a foreground mask (MissingMask otherwise).
[[nodiscard]] RecallReport evaluate_recall(
    const SequenceWindow& window,
    std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
    double gamma);

[[nodiscard]] std::string recall_report_to_json(const RecallReport& report);

}  // namespace seqfuse
