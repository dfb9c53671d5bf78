#pragma once

#include <Eigen/Core>

#include <span>

#include "seqfuse/mlp.hpp"
#include "seqfuse/types.hpp"

namespace seqfuse {

enum class Provenance { Geometric, Motion, Fused, Hidden };

/// K x D block of per-point features attached to one proposal at one frame.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    Provenance provenance{Provenance::Hidden};
};

struct Spherical {
    double r{0.0};
    double theta{0.0};  // elevation, asin(z/r), in [-pi/2, pi/2]
    double phi{0.0};    // azimuth, atan2(y, x), in (-pi, pi]
};

/// (x, y, z) -> (r, theta, phi); the origin maps to (0, 0, 0).
[[nodiscard]] Spherical spherical_transform(double x, double y, double z);

/// Row i = MLP over the spherical offsets of point i to the nine box
/// key-points, concatenated in key-point order. mlp input width must be 27.
[[nodiscard]] FeatureMatrix geometric_embedding(std::span<const Point3> points,
                                                const Proposal& box, const MlpWeights& mlp);

/// Row i = MLP over the raw Cartesian offsets of point i to the current-frame
/// box key-points plus the frame offset dt as a final channel. mlp input width
/// must be 28. No spherical transform is applied here.
[[nodiscard]] FeatureMatrix motion_embedding(std::span<const Point3> points,
                                             const Proposal& current_box, std::int32_t dt,
                                             const MlpWeights& mlp);

/// Element-wise sum; provenance becomes Fused. Shapes must match.
[[nodiscard]] FeatureMatrix fuse_embeddings(const FeatureMatrix& geometric,
                                            const FeatureMatrix& motion);

}  // namespace seqfuse
