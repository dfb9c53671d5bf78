#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace seqfuse {

enum class Activation { None, Relu };

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation act{Activation::None};
};

/// A stack of dense layers with chained widths. This is the only learnable
/// primitive in the library; weights are loaded from JSON or generated from a
/// seed, never trained here.
struct MlpWeights {
    std::vector<DenseLayer> layers;

    [[nodiscard]] int input_width() const;
    [[nodiscard]] int output_width() const;
};

/// Throws WidthMismatch if adjacent layer widths do not chain or a weight is
/// non-finite.
void validate_mlp(const MlpWeights& mlp);

/// Applies the stack to each row of a K x input_width matrix; returns
/// K x output_width.
[[nodiscard]] Eigen::MatrixXd mlp_apply_rows(const MlpWeights& mlp, const Eigen::MatrixXd& rows);

/// Two-layer stack in->hidden (ReLU) ->out with entries drawn uniformly from
/// [-0.1, 0.1) using the given seed. All defaults in the pipeline come from
/// this so every run is reproducible without weight files.
[[nodiscard]] MlpWeights seeded_mlp(int in, int hidden, int out, std::uint64_t seed);

/// Single linear map out x in with bias, same seeded initialization.
[[nodiscard]] MlpWeights seeded_linear(int in, int out, std::uint64_t seed);

/// JSON schema: {"layers": [{"rows": r, "cols": c,
///   "weight": [... row-major ...], "bias": [...], "act": "relu"|"none"}]}.
[[nodiscard]] std::string mlp_to_json(const MlpWeights& mlp);
[[nodiscard]] MlpWeights mlp_from_json(const std::string& text);

}  // namespace seqfuse
