#include "seqfuse/pipeline.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "seqfuse/errors.hpp"
#include "seqfuse/parallel.hpp"
#include "seqfuse/pooling.hpp"
#include "seqfuse/rng.hpp"

namespace seqfuse {

namespace {

nlohmann::json mlp_json(const MlpWeights& mlp) {
    return nlohmann::json::parse(mlp_to_json(mlp));
}

MlpWeights mlp_of(const nlohmann::json& j) { return mlp_from_json(j.dump()); }

nlohmann::json attn_json(const AttentionWeights& w) {
    return {{"query", mlp_json(w.query)},
            {"key", mlp_json(w.key)},
            {"value", mlp_json(w.value)},
            {"output", mlp_json(w.output)},
            {"heads", w.heads}};
}

AttentionWeights attn_of(const nlohmann::json& j) {
    AttentionWeights w;
    w.query = mlp_of(j.at("query"));
    w.key = mlp_of(j.at("key"));
    w.value = mlp_of(j.at("value"));
    w.output = mlp_of(j.at("output"));
    w.heads = j.at("heads").get<int>();
    return w;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& config) {
    nlohmann::json j{{"k_samples", config.k_samples},
                     {"d_model", config.d_model},
                     {"heads", config.heads},
                     {"blocks", config.blocks},
                     {"gamma", config.gamma},
                     {"voxel_size", config.voxel_size},
                     {"max_points_per_voxel", config.max_points_per_voxel},
                     {"loss_alpha", config.loss_alpha},
                     {"bifa_boundary", config.boundary == BifaBoundary::SelfContext
                                           ? "self_context"
                                           : "zero_context"}};
    return j.dump(2);
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("pipeline config parse error: ") + e.what());
    }
    PipelineConfig config;
    config.k_samples = j.value("k_samples", config.k_samples);
    config.d_model = j.value("d_model", config.d_model);
    config.heads = j.value("heads", config.heads);
    config.blocks = j.value("blocks", config.blocks);
    config.gamma = j.value("gamma", config.gamma);
    config.voxel_size = j.value("voxel_size", config.voxel_size);
    config.max_points_per_voxel = j.value("max_points_per_voxel", config.max_points_per_voxel);
    config.loss_alpha = j.value("loss_alpha", config.loss_alpha);
    const std::string boundary = j.value("bifa_boundary", "self_context");
    if (boundary == "self_context") {
        config.boundary = BifaBoundary::SelfContext;
    } else if (boundary == "zero_context") {
        config.boundary = BifaBoundary::ZeroContext;
    } else {
        throw ConfigError("unknown bifa_boundary '" + boundary + "'");
    }
    return config;
}

PipelineWeights seeded_pipeline_weights(const PipelineConfig& config, std::int32_t frames,
                                        std::uint64_t seed) {
    const int d = config.d_model;
    PipelineWeights w;
    w.d_model = d;
    w.heads = config.heads;
    w.frames = frames;
    w.geometric_mlp = seeded_mlp(27, d, d, mix_key(seed, 100));
    w.motion_mlp = seeded_mlp(28, d, d, mix_key(seed, 101));
    for (int b = 0; b < config.blocks; ++b)
        w.blocks.push_back(seeded_block_weights(d, config.heads, mix_key(seed, 200, b)));
    w.decoder = seeded_decoder_weights(d, config.heads, mix_key(seed, 300));
    w.confidence_head = seeded_linear(frames * d, 1, mix_key(seed, 400));
    w.box_head = seeded_linear(frames * d, 7, mix_key(seed, 401));
    return w;
}

std::string pipeline_weights_to_json(const PipelineWeights& w) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : w.blocks) {
        blocks.push_back({{"attn", attn_json(b.attn)},
                          {"ffn", mlp_json(b.ffn)},
                          {"bifa_forward", mlp_json(b.bifa_forward)},
                          {"bifa_backward", mlp_json(b.bifa_backward)}});
    }
    std::vector<double> query(w.decoder.query.data(),
                              w.decoder.query.data() + w.decoder.query.size());
    nlohmann::json j{{"d_model", w.d_model},
                     {"heads", w.heads},
                     {"frames", w.frames},
                     {"geometric_mlp", mlp_json(w.geometric_mlp)},
                     {"motion_mlp", mlp_json(w.motion_mlp)},
                     {"blocks", blocks},
                     {"decoder",
                      {{"attn", attn_json(w.decoder.attn)},
                       {"ffn", mlp_json(w.decoder.ffn)},
                       {"query", query}}},
                     {"confidence_head", mlp_json(w.confidence_head)},
                     {"box_head", mlp_json(w.box_head)}};
    return j.dump();
}

PipelineWeights pipeline_weights_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("weights parse error: ") + e.what());
    }
    PipelineWeights w;
    try {
        w.d_model = j.at("d_model").get<int>();
        w.heads = j.at("heads").get<int>();
        w.frames = j.at("frames").get<std::int32_t>();
        w.geometric_mlp = mlp_of(j.at("geometric_mlp"));
        w.motion_mlp = mlp_of(j.at("motion_mlp"));
        for (const auto& jb : j.at("blocks")) {
            BlockWeights b;
            b.attn = attn_of(jb.at("attn"));
            b.ffn = mlp_of(jb.at("ffn"));
            b.bifa_forward = mlp_of(jb.at("bifa_forward"));
            b.bifa_backward = mlp_of(jb.at("bifa_backward"));
            w.blocks.push_back(std::move(b));
        }
        const auto& jd = j.at("decoder");
        w.decoder.attn = attn_of(jd.at("attn"));
        w.decoder.ffn = mlp_of(jd.at("ffn"));
        const auto query = jd.at("query").get<std::vector<double>>();
        w.decoder.query =
            Eigen::Map<const Eigen::VectorXd>(query.data(), static_cast<Eigen::Index>(query.size()));
        w.confidence_head = mlp_of(j.at("confidence_head"));
        w.box_head = mlp_of(j.at("box_head"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("weights field error: ") + e.what());
    }
    return w;
}

void write_pipeline_weights(const std::filesystem::path& path, const PipelineWeights& weights) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << pipeline_weights_to_json(weights) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

PipelineWeights read_pipeline_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pipeline_weights_from_json(text);
}

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& config,
                            const PipelineWeights& weights, std::uint64_t seed, int num_workers,
                            bool permute_points) {
    const auto T = static_cast<std::int32_t>(scene.window.frames.size());
    if (T < 1) throw EmptySequence("run_pipeline: scene has no frames");
    if (weights.frames != T)
        throw ShapeMismatch("weights were built for T=" + std::to_string(weights.frames) +
                            ", scene has T=" + std::to_string(T));

    const auto validation = validate_window(scene.window);
    if (!validation.ok()) throw DomainError("invalid window: " + validation.message);

    std::vector<std::vector<CylindricalRegion>> regions;
    regions.reserve(scene.proposals.size());
    for (std::size_t p = 0; p < scene.proposals.size(); ++p)
        regions.push_back(
            propagate(scene.proposals[p], {config.gamma, T}, static_cast<std::int32_t>(p)));

    std::vector<VoxelGrid> grids;
    grids.reserve(scene.window.frames.size());
    for (const auto& frame : scene.window.frames)
        grids.push_back(build_grid(frame, config.voxel_size, config.max_points_per_voxel));

    const auto pooled = pool_optimized(scene.window, grids, regions, scene.proposals,
                                       config.k_samples, seed, num_workers);

    PipelineResult result;
    result.outputs.resize(pooled.size());
    for_each_index(pooled.size(), num_workers, [&](std::size_t p) {
        const auto& proposal = scene.proposals[p];
        SequenceFeatures seq;
        seq.reserve(pooled[p].frames.size());
        for (const auto& fp : pooled[p].frames) {
            std::vector<Point3> points = fp.points;
            if (permute_points) {
                Rng rng(mix_key(seed ^ 0x70657254ULL, p,
                                static_cast<std::uint64_t>(fp.region.frame_index)));
                for (std::size_t i = points.size(); i > 1; --i)
                    std::swap(points[i - 1], points[rng.bounded(i)]);
            }
            const std::int32_t dt = T - fp.region.frame_index;
            const auto g = geometric_embedding(points, propagated_box(proposal, dt),
                                               weights.geometric_mlp);
            const auto m = motion_embedding(points, proposal, dt, weights.motion_mlp);
            seq.push_back(fuse_embeddings(g, m));
        }

        for (const auto& block : weights.blocks)
            seq = learning_block(seq, block, config.boundary);

        Eigen::VectorXd concat(T * weights.d_model);
        ProposalOutput out;
        out.proposal_id = pooled[p].proposal_id;
        out.frame_embedding_norms.reserve(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) {
            const Eigen::VectorXd e = decode(weights.decoder.query, seq[t], weights.decoder);
            concat.segment(static_cast<Eigen::Index>(t) * weights.d_model, weights.d_model) = e;
            out.frame_embedding_norms.push_back(e.norm());
        }

        out.confidence_logit = mlp_apply_rows(weights.confidence_head, concat.transpose())(0, 0);
        out.confidence = 1.0 / (1.0 + std::exp(-out.confidence_logit));
        const Eigen::MatrixXd res = mlp_apply_rows(weights.box_head, concat.transpose());
        for (int c = 0; c < 7; ++c) out.box_residuals[static_cast<std::size_t>(c)] = res(0, c);
        result.outputs[p] = std::move(out);
    });

    // Loss against simulator truth: each proposal is matched to the nearest
    // current-frame true box; positives are within half that box's plan
    // diagonal. This assignment is harness policy, not a model component.
    if (!scene.truth.empty() && !scene.truth.back().empty() && !result.outputs.empty()) {
        LossTargets targets;
        std::vector<double> logits;
        std::vector<BoxResiduals> predicted;
        for (std::size_t p = 0; p < scene.proposals.size(); ++p) {
            const auto& proposal = scene.proposals[p];
            const TrueBox* best = nullptr;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (const auto& tb : scene.truth.back()) {
                const double dx = proposal.cx - tb.box.cx;
                const double dy = proposal.cy - tb.box.cy;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = &tb;
                }
            }
            const double radius =
                0.5 * std::sqrt(best->box.w * best->box.w + best->box.l * best->box.l);
            const bool positive = best_d2 < radius * radius;
            targets.confidence.push_back(positive ? 1.0 : 0.0);
            targets.positive.push_back(positive ? 1 : 0);
            targets.residuals.push_back(encode_box_residuals(proposal, best->box));
            logits.push_back(result.outputs[p].confidence_logit);
            predicted.push_back(result.outputs[p].box_residuals);
        }
        result.loss = total_loss(logits, predicted, targets, config.loss_alpha);
    }
    return result;
}

std::string pipeline_result_to_json(const PipelineResult& result, const PipelineConfig& config,
                                    std::int32_t frames) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const auto& out : result.outputs) {
        outputs.push_back({{"proposal_id", out.proposal_id},
                           {"confidence_logit", out.confidence_logit},
                           {"confidence", out.confidence},
                           {"box_residuals", out.box_residuals},
                           {"frame_embedding_norms", out.frame_embedding_norms}});
    }
    nlohmann::json j{{"proposals", outputs},
                     {"k_samples", config.k_samples},
                     {"d_model", config.d_model},
                     {"heads", config.heads},
                     {"frames", frames},
                     {"gamma", config.gamma}};
    if (result.loss) {
        j["loss"] = *result.loss;
    } else {
        j["loss"] = nullptr;
    }
    return j.dump(2);
}

}  // namespace seqfuse
