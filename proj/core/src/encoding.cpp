#include "seqfuse/encoding.hpp"

#include <cmath>

#include "seqfuse/errors.hpp"

namespace seqfuse {

Spherical spherical_transform(double x, double y, double z) {
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    return {r, std::asin(z / r), std::atan2(y, x)};
}

FeatureMatrix geometric_embedding(std::span<const Point3> points, const Proposal& box,
                                  const MlpWeights& mlp) {
    if (mlp.input_width() != 27)
        throw WidthMismatch("geometric_embedding expects an mlp with input width 27, got " +
                            std::to_string(mlp.input_width()));
    const KeyPoints kp = key_points(box);
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(points.size()), 27);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int j = 0; j < 9; ++j) {
            const Spherical s = spherical_transform(points[i].x - kp[j].x, points[i].y - kp[j].y,
                                                    points[i].z - kp[j].z);
            inputs(static_cast<Eigen::Index>(i), 3 * j + 0) = s.r;
            inputs(static_cast<Eigen::Index>(i), 3 * j + 1) = s.theta;
            inputs(static_cast<Eigen::Index>(i), 3 * j + 2) = s.phi;
        }
    }
    return {mlp_apply_rows(mlp, inputs), Provenance::Geometric};
}

FeatureMatrix motion_embedding(std::span<const Point3> points, const Proposal& current_box,
                               std::int32_t dt, const MlpWeights& mlp) {
    if (mlp.input_width() != 28)
        throw WidthMismatch("motion_embedding expects an mlp with input width 28, got " +
                            std::to_string(mlp.input_width()));
    const KeyPoints kp = key_points(current_box);
    Eigen::MatrixXd inputs(static_cast<Eigen::Index>(points.size()), 28);
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (int j = 0; j < 9; ++j) {
            inputs(static_cast<Eigen::Index>(i), 3 * j + 0) = points[i].x - kp[j].x;
            inputs(static_cast<Eigen::Index>(i), 3 * j + 1) = points[i].y - kp[j].y;
            inputs(static_cast<Eigen::Index>(i), 3 * j + 2) = points[i].z - kp[j].z;
        }
        inputs(static_cast<Eigen::Index>(i), 27) = static_cast<double>(dt);
    }
    return {mlp_apply_rows(mlp, inputs), Provenance::Motion};
}

FeatureMatrix fuse_embeddings(const FeatureMatrix& geometric, const FeatureMatrix& motion) {
    if (geometric.values.rows() != motion.values.rows() ||
        geometric.values.cols() != motion.values.cols())
        throw ShapeMismatch("fuse_embeddings: shapes differ");
    return {geometric.values + motion.values, Provenance::Fused};
}

}  // namespace seqfuse
