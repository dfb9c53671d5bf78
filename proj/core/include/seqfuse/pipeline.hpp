#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "seqfuse/loss.hpp"
#include "seqfuse/network.hpp"
#include "seqfuse/scene.hpp"

namespace seqfuse {

struct PipelineConfig {
    std::int32_t k_samples{128};       // points drawn per (proposal, frame)
    int d_model{256};
    int heads{8};
    int blocks{3};
    double gamma{1.1};
    double voxel_size{0.4};
    std::int32_t max_points_per_voxel{32};
    double loss_alpha{1.0};
    BifaBoundary boundary{BifaBoundary::SelfContext};
};

[[nodiscard]] std::string pipeline_config_to_json(const PipelineConfig& config);
[[nodiscard]] PipelineConfig pipeline_config_from_json(const std::string& text);

/// Every parameter of the forward network. The detection heads consume the
/// concatenated per-frame decoder outputs, so their input width is T * D and
/// weights are specific to one window length.
struct PipelineWeights {
    MlpWeights geometric_mlp;   // 27 -> D -> D
    MlpWeights motion_mlp;      // 28 -> D -> D
    std::vector<BlockWeights> blocks;
    DecoderWeights decoder;
    MlpWeights confidence_head;  // T*D -> 1
    MlpWeights box_head;         // T*D -> 7
    int d_model{0};
    int heads{0};
    std::int32_t frames{0};
};

[[nodiscard]] PipelineWeights seeded_pipeline_weights(const PipelineConfig& config,
                                                      std::int32_t frames, std::uint64_t seed);

[[nodiscard]] std::string pipeline_weights_to_json(const PipelineWeights& weights);
[[nodiscard]] PipelineWeights pipeline_weights_from_json(const std::string& text);
void write_pipeline_weights(const std::filesystem::path& path, const PipelineWeights& weights);
[[nodiscard]] PipelineWeights read_pipeline_weights(const std::filesystem::path& path);

struct ProposalOutput {
    std::int32_t proposal_id{0};
    double confidence_logit{0.0};
    double confidence{0.0};
    BoxResiduals box_residuals{};
    std::vector<double> frame_embedding_norms;  // |e^t| per frame
};

struct PipelineResult {
    std::vector<ProposalOutput> outputs;
    std::optional<double> loss;  // present when the scene carries truth boxes
};

/// Full forward pass: propagate -> pool_optimized -> embeddings -> stacked
/// learning blocks -> per-frame decode -> detection heads. When the scene
/// carries truth the total loss against it is evaluated as well.
/// permute_points reshuffles each pooled point set before encoding; outputs
/// are expected to be invariant to it (debug aid).
[[nodiscard]] PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config,
                                          const PipelineWeights& weights, std::uint64_t seed,
                                          int num_workers = 1, bool permute_points = false);

[[nodiscard]] std::string pipeline_result_to_json(const PipelineResult& result,
                                                  const PipelineConfig& config,
                                                  std::int32_t frames);

}  // namespace seqfuse
