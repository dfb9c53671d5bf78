#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "seqfuse/types.hpp"

namespace seqfuse {

/// 7-component box regression target relative to an anchor proposal: center
/// offsets normalized by the anchor's 3D diagonal, log size ratios, and the
/// wrapped yaw difference.
using BoxResiduals = std::array<double, 7>;

[[nodiscard]] BoxResiduals encode_box_residuals(const Proposal& anchor, const Proposal& target);

struct LossTargets {
    std::vector<double> confidence;        // in [0, 1], one per proposal
    std::vector<BoxResiduals> residuals;   // one per proposal
    std::vector<std::uint8_t> positive;    // regression is averaged over these
};

/// L_total = L_conf + alpha * L_reg. L_conf is the mean binary cross-entropy
/// of the confidence logits against targets; L_reg is mean smooth-L1 over the
/// 7 residual components, averaged over positive proposals (0 when there are
/// none). Throws AlignmentMismatch when lengths disagree, DomainError on
/// alpha < 0.
[[nodiscard]] double total_loss(std::span<const double> confidence_logits,
                                std::span<const BoxResiduals> predicted_residuals,
                                const LossTargets& targets, double alpha);

}  // namespace seqfuse
