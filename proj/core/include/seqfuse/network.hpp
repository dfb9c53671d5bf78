#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "seqfuse/encoding.hpp"
#include "seqfuse/mlp.hpp"

namespace seqfuse {

/// Packed multi-head attention parameters: q/k/v/out are D x D linear maps;
/// head h reads columns [h*D/H, (h+1)*D/H) of the projected features.
struct AttentionWeights {
    MlpWeights query;
    MlpWeights key;
    MlpWeights value;
    MlpWeights output;
    int heads{1};
};

/// Parameters of one learning block. The two pointwise 2D -> D convolutions
/// are shared across all frames of their path.
struct BlockWeights {
    AttentionWeights attn;
    MlpWeights ffn;            // D -> 4D -> D with ReLU
    MlpWeights bifa_forward;   // 2D -> D, no activation
    MlpWeights bifa_backward;  // 2D -> D, no activation
};

/// How the boundary frames obtain context: concatenated with their own pooled
/// context (default, mirroring the forward-path rule at t=1), or with zeros.
enum class BifaBoundary { SelfContext, ZeroContext };

/// One FeatureMatrix per frame t = 1..T, uniform K x D shapes.
using SequenceFeatures = std::vector<FeatureMatrix>;

/// Scaled dot-product self-attention over the K points with residual, then
/// FFN with residual. No positional encoding, so the op is permutation
/// equivariant in the rows.
[[nodiscard]] FeatureMatrix mhsa_ffn(const FeatureMatrix& features, const BlockWeights& w);

/// Column-wise max over the K rows, broadcast back to K x D.
[[nodiscard]] Eigen::MatrixXd maxpool_repeat(const Eigen::MatrixXd& features);

/// Bidirectional feature aggregation. Forward: each frame is concatenated with
/// the pooled context of its predecessor (the first frame with its own) and
/// mapped 2D -> D. Backward: same against the successor's forward output.
/// Both paths only reference adjacent frames, so a single application cannot
/// move information further than one frame in each direction.
[[nodiscard]] SequenceFeatures bifa(const SequenceFeatures& seq, const BlockWeights& w,
                                    BifaBoundary boundary = BifaBoundary::SelfContext);

/// Per-frame mhsa_ffn followed by bifa across frames. The full network stacks
/// three of these.
[[nodiscard]] SequenceFeatures learning_block(const SequenceFeatures& seq, const BlockWeights& w,
                                              BifaBoundary boundary = BifaBoundary::SelfContext);

struct DecoderWeights {
    AttentionWeights attn;
    MlpWeights ffn;          // D -> 4D -> D with ReLU
    Eigen::VectorXd query;   // learnable D-vector
};

/// Single-query cross-attention over the K feature rows, residual against the
/// query, then FFN with residual. Returns one D-vector; invariant to row order.
[[nodiscard]] Eigen::VectorXd decode(const Eigen::VectorXd& query, const FeatureMatrix& features,
                                     const DecoderWeights& w);

/// Seeded constructors; all entries uniform in [-0.1, 0.1).
[[nodiscard]] BlockWeights seeded_block_weights(int d_model, int heads, std::uint64_t seed);
[[nodiscard]] DecoderWeights seeded_decoder_weights(int d_model, int heads, std::uint64_t seed);

}  // namespace seqfuse
