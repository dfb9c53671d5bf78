#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace seqfuse {

/// One LiDAR-like return: position in meters plus a unitless intensity in [0, 1].
struct Point3 {
    double x{0.0};
    double y{0.0};
    double z{0.0};
    double intensity{0.0};

    [[nodiscard]] bool operator==(const Point3&) const = default;
};

[[nodiscard]] bool is_finite(const Point3& p);

/// One sweep of the sensor. Point order is stable and meaningful: deterministic
/// intra-voxel sampling keeps the first points in this order.
struct PointCloudFrame {
    std::int32_t frame_index{1};
    std::vector<Point3> points;
    /// Simulator ground truth; 1 marks an object (foreground) point. When
    /// present it has exactly one entry per point.
    std::optional<std::vector<std::uint8_t>> foreground_mask;
};

/// Frames t = 1..T in ascending order; the last frame (t = T) is the current
/// frame, the only one proposals are generated on.
struct SequenceWindow {
    std::vector<PointCloudFrame> frames;

    [[nodiscard]] std::int32_t current_index() const {
        return frames.empty() ? 0 : frames.back().frame_index;
    }
    [[nodiscard]] std::size_t length() const { return frames.size(); }
};

/// Oriented 3D box hypothesis on the current frame: center, extents, yaw about
/// z, planar velocity in meters per frame-unit, and a confidence score.
struct Proposal {
    double cx{0.0}, cy{0.0}, cz{0.0};
    double w{1.0}, l{1.0}, h{1.0};
    double yaw{0.0};
    double vx{0.0}, vy{0.0};
    double score{1.0};
};

/// Wraps an angle to (-pi, pi].
[[nodiscard]] double normalize_yaw(double yaw);

/// Validates a proposal's invariants (positive dims, finite fields) and
/// normalizes yaw. Throws DomainError on violation.
[[nodiscard]] Proposal make_proposal(Proposal p);

/// Center plus the eight box corners. Element 0 is always the center; corners
/// follow in the fixed sign-pattern order (---, --+, -+-, -++, +--, +-+, ++-,
/// +++) over the (w, l, h) half-extents before yaw rotation.
using KeyPoints = std::array<Point3, 9>;

[[nodiscard]] KeyPoints key_points(const Proposal& p);

enum class ValidationCode {
    Ok,
    EmptyWindow,
    UnsortedFrames,
    MaskLengthMismatch,
    NonFiniteValue,
};

/// Outcome of validate_window; message names the first offending frame/point.
struct ValidationResult {
    ValidationCode code{ValidationCode::Ok};
    std::string message;

    [[nodiscard]] bool ok() const { return code == ValidationCode::Ok; }
};

[[nodiscard]] ValidationResult validate_window(const SequenceWindow& window);

}  // namespace seqfuse
