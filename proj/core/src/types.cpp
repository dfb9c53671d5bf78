#include "seqfuse/types.hpp"

#include <cmath>

#include "seqfuse/errors.hpp"

namespace seqfuse {

bool is_finite(const Point3& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
           std::isfinite(p.intensity);
}

double normalize_yaw(double yaw) {
    const double two_pi = 2.0 * M_PI;
    double a = std::fmod(yaw, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

Proposal make_proposal(Proposal p) {
    const bool finite = std::isfinite(p.cx) && std::isfinite(p.cy) && std::isfinite(p.cz) &&
                        std::isfinite(p.w) && std::isfinite(p.l) && std::isfinite(p.h) &&
                        std::isfinite(p.yaw) && std::isfinite(p.vx) && std::isfinite(p.vy) &&
                        std::isfinite(p.score);
    if (!finite) throw DomainError("proposal has a non-finite field");
    if (p.w <= 0.0 || p.l <= 0.0 || p.h <= 0.0)
        throw DomainError("proposal dims must be strictly positive");
    p.yaw = normalize_yaw(p.yaw);
    return p;
}

KeyPoints key_points(const Proposal& p) {
    KeyPoints kp;
    kp[0] = Point3{p.cx, p.cy, p.cz, 0.0};

    const double c = std::cos(p.yaw);
    const double s = std::sin(p.yaw);
    const double hw = 0.5 * p.w;
    const double hl = 0.5 * p.l;
    const double hh = 0.5 * p.h;

    // Sign-pattern order over (w, l, h): ---, --+, -+-, -++, +--, +-+, ++-, +++.
    int idx = 1;
    for (int sx = -1; sx <= 1; sx += 2) {
        for (int sy = -1; sy <= 1; sy += 2) {
            for (int sz = -1; sz <= 1; sz += 2) {
                const double lx = sx * hw;
                const double ly = sy * hl;
                kp[idx++] = Point3{
                    p.cx + c * lx - s * ly,
                    p.cy + s * lx + c * ly,
                    p.cz + sz * hh,
                    0.0,
                };
            }
        }
    }
    return kp;
}

ValidationResult validate_window(const SequenceWindow& window) {
    if (window.frames.empty()) {
        return {ValidationCode::EmptyWindow, "window contains no frames"};
    }
    for (std::size_t f = 0; f < window.frames.size(); ++f) {
        const auto& frame = window.frames[f];
        // Indices must be exactly 1..T: frame offsets (dt = T - t) and the
        // per-frame grid association both assume a gapless window.
        const auto expected = static_cast<std::int32_t>(f) + 1;
        if (frame.frame_index != expected) {
            return {ValidationCode::UnsortedFrames,
                    "frame at position " + std::to_string(f) + " has index " +
                        std::to_string(frame.frame_index) + ", expected " +
                        std::to_string(expected)};
        }
        if (frame.foreground_mask &&
            frame.foreground_mask->size() != frame.points.size()) {
            return {ValidationCode::MaskLengthMismatch,
                    "frame " + std::to_string(frame.frame_index) + " mask has " +
                        std::to_string(frame.foreground_mask->size()) + " entries for " +
                        std::to_string(frame.points.size()) + " points"};
        }
        for (std::size_t i = 0; i < frame.points.size(); ++i) {
            if (!is_finite(frame.points[i])) {
                return {ValidationCode::NonFiniteValue,
                        "frame " + std::to_string(frame.frame_index) + " point " +
                            std::to_string(i) + " has a non-finite value"};
            }
        }
    }
    return {};
}

}  // namespace seqfuse
