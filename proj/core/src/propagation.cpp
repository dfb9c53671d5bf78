#include "seqfuse/propagation.hpp"

#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"

namespace seqfuse {

double region_diameter(double w, double l, double gamma, std::int32_t dt) {
    if (!(w > 0.0) || !(l > 0.0)) throw DomainError("region_diameter: dims must be positive");
    if (!(gamma >= 1.0) || !std::isfinite(gamma))
        throw DomainError("region_diameter: gamma must be finite and >= 1");
    if (dt < 0) throw DomainError("region_diameter: dt must be >= 0");
    return std::sqrt(w * w + l * l) * std::pow(gamma, static_cast<double>(dt) + 1.0);
}

std::vector<CylindricalRegion> propagate(const Proposal& p, const PropagationConfig& config,
                                         std::int32_t proposal_id) {
    if (config.window_length < 1) throw DomainError("propagate: window_length must be >= 1");
    const std::int32_t T = config.window_length;
    std::vector<CylindricalRegion> regions;
    regions.reserve(static_cast<std::size_t>(T));
    for (std::int32_t t = 1; t <= T; ++t) {
        const std::int32_t dt = T - t;
        regions.push_back(CylindricalRegion{
            t,
            p.cx - p.vx * dt,
            p.cy - p.vy * dt,
            region_diameter(p.w, p.l, config.gamma, dt),
            proposal_id,
        });
    }
    return regions;
}

Proposal propagated_box(const Proposal& p, std::int32_t dt) {
    Proposal b = p;
    b.cx = p.cx - p.vx * dt;
    b.cy = p.cy - p.vy * dt;
    return b;
}

bool point_in_region(const Point3& pt, const CylindricalRegion& region) {
    const double dx = pt.x - region.cx;
    const double dy = pt.y - region.cy;
    const double r = 0.5 * region.diameter;
    return dx * dx + dy * dy < r * r;
}

RecallReport evaluate_recall(const SequenceWindow& window,
                             std::span<const std::vector<CylindricalRegion>> regions_by_proposal,
                             double gamma) {
    for (const auto& frame : window.frames) {
        if (!frame.foreground_mask)
            throw MissingMask("frame " + std::to_string(frame.frame_index) +
                              " has no foreground mask");
    }

    std::unordered_map<std::int32_t, std::vector<const CylindricalRegion*>> by_frame;
    for (const auto& group : regions_by_proposal) {
        for (const auto& region : group) by_frame[region.frame_index].push_back(&region);
    }

    RecallReport report;
    report.gamma = gamma;
    std::size_t total_fg = 0;
    std::size_t total_hit = 0;
    for (const auto& frame : window.frames) {
        const auto it = by_frame.find(frame.frame_index);
        std::size_t fg = 0;
        std::size_t hit = 0;
        const auto& mask = *frame.foreground_mask;
        for (std::size_t i = 0; i < frame.points.size(); ++i) {
            if (!mask[i]) continue;
            ++fg;
            if (it == by_frame.end()) continue;
            for (const CylindricalRegion* region : it->second) {
                if (point_in_region(frame.points[i], *region)) {
                    ++hit;
                    break;
                }
            }
        }
        total_fg += fg;
        total_hit += hit;
        if (fg == 0) {
            report.per_frame.push_back(1.0);
            report.vacuous = true;
        } else {
            report.per_frame.push_back(static_cast<double>(hit) / static_cast<double>(fg));
        }
    }
    if (total_fg == 0) {
        report.overall = 1.0;
        report.vacuous = true;
    } else {
        report.overall = static_cast<double>(total_hit) / static_cast<double>(total_fg);
    }
    return report;
}

std::string recall_report_to_json(const RecallReport& report) {
    nlohmann::json j{{"gamma", report.gamma},
                     {"overall", report.overall},
                     {"per_frame", report.per_frame},
                     {"vacuous", report.vacuous}};
    return j.dump(2);
}

}  // namespace seqfuse
