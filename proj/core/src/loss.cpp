#include "seqfuse/loss.hpp"

#include <cmath>
#include <string>

#include "seqfuse/errors.hpp"

namespace seqfuse {

namespace {

double bce_with_logits(double logit, double target) {
    // max(z, 0) - z*y + log(1 + exp(-|z|)), stable for large |z|.
    return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double smooth_l1(double x) {
    const double a = std::abs(x);
    return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

}  // namespace

BoxResiduals encode_box_residuals(const Proposal& anchor, const Proposal& target) {
    const double diag =
        std::sqrt(anchor.w * anchor.w + anchor.l * anchor.l + anchor.h * anchor.h);
    return {
        (target.cx - anchor.cx) / diag,
        (target.cy - anchor.cy) / diag,
        (target.cz - anchor.cz) / diag,
        std::log(target.w / anchor.w),
        std::log(target.l / anchor.l),
        std::log(target.h / anchor.h),
        normalize_yaw(target.yaw - anchor.yaw),
    };
}

double total_loss(std::span<const double> confidence_logits,
                  std::span<const BoxResiduals> predicted_residuals, const LossTargets& targets,
                  double alpha) {
    if (!(alpha >= 0.0)) throw DomainError("total_loss: alpha must be >= 0");
    const std::size_t n = confidence_logits.size();
    if (predicted_residuals.size() != n || targets.confidence.size() != n ||
        targets.residuals.size() != n || targets.positive.size() != n)
        throw AlignmentMismatch("total_loss: predictions and targets must have equal length, got " +
                                std::to_string(n) + " logits");
    if (n == 0) throw AlignmentMismatch("total_loss: empty batch");

    double conf = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        conf += bce_with_logits(confidence_logits[i], targets.confidence[i]);
    conf /= static_cast<double>(n);

    double reg = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!targets.positive[i]) continue;
        ++positives;
        double per_box = 0.0;
        for (std::size_t c = 0; c < 7; ++c)
            per_box += smooth_l1(predicted_residuals[i][c] - targets.residuals[i][c]);
        reg += per_box / 7.0;
    }
    if (positives > 0) reg /= static_cast<double>(positives);

    return conf + alpha * reg;
}

}  // namespace seqfuse
