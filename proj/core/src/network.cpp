#include "seqfuse/network.hpp"

#include <cmath>

#include "seqfuse/errors.hpp"
#include "seqfuse/rng.hpp"

namespace seqfuse {

namespace {

void check_attention(const AttentionWeights& w, Eigen::Index d) {
    if (w.heads < 1 || d % w.heads != 0)
        throw ShapeMismatch("head count " + std::to_string(w.heads) +
                            " must divide feature width " + std::to_string(d));
    for (const MlpWeights* proj : {&w.query, &w.key, &w.value, &w.output}) {
        if (proj->input_width() != d || proj->output_width() != d)
            throw ShapeMismatch("attention projections must be " + std::to_string(d) + " x " +
                                std::to_string(d));
    }
}

/// Row-wise softmax with max subtraction; accumulation stays in double.
Eigen::MatrixXd softmax_rows(Eigen::MatrixXd scores) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const double m = scores.row(r).maxCoeff();
        scores.row(r) = (scores.row(r).array() - m).exp();
        scores.row(r) /= scores.row(r).sum();
    }
    return scores;
}

/// queries: Kq x D rows attending over context: K x D rows. Returns Kq x D.
Eigen::MatrixXd attention(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& context,
                          const AttentionWeights& w) {
    const Eigen::Index d = context.cols();
    check_attention(w, d);
    const Eigen::Index dh = d / w.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Eigen::MatrixXd q = mlp_apply_rows(w.query, queries);
    const Eigen::MatrixXd k = mlp_apply_rows(w.key, context);
    const Eigen::MatrixXd v = mlp_apply_rows(w.value, context);

    Eigen::MatrixXd heads(queries.rows(), d);
    for (int h = 0; h < w.heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        const Eigen::MatrixXd weights = softmax_rows(qh * kh.transpose() * scale);
        heads.middleCols(h * dh, dh) = weights * vh;
    }
    return mlp_apply_rows(w.output, heads);
}

Eigen::MatrixXd concat_cols(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

Eigen::MatrixXd context_of(const Eigen::MatrixXd& frame, const Eigen::MatrixXd& self,
                           BifaBoundary boundary, bool at_boundary) {
    if (!at_boundary) return maxpool_repeat(frame);
    if (boundary == BifaBoundary::SelfContext) return maxpool_repeat(self);
    return Eigen::MatrixXd::Zero(self.rows(), self.cols());
}

}  // namespace

FeatureMatrix mhsa_ffn(const FeatureMatrix& features, const BlockWeights& w) {
    const Eigen::MatrixXd& x = features.values;
    if (x.rows() < 1) throw ShapeMismatch("mhsa_ffn: empty feature matrix");
    const Eigen::MatrixXd attended = x + attention(x, x, w.attn);
    if (w.ffn.input_width() != x.cols() || w.ffn.output_width() != x.cols())
        throw ShapeMismatch("ffn must map D -> D");
    return {attended + mlp_apply_rows(w.ffn, attended), Provenance::Hidden};
}

Eigen::MatrixXd maxpool_repeat(const Eigen::MatrixXd& features) {
    if (features.rows() < 1) throw ShapeMismatch("maxpool_repeat: empty feature matrix");
    return features.colwise().maxCoeff().replicate(features.rows(), 1);
}

SequenceFeatures bifa(const SequenceFeatures& seq, const BlockWeights& w, BifaBoundary boundary) {
    if (seq.empty()) throw EmptySequence("bifa: empty sequence");
    const Eigen::Index k = seq.front().values.rows();
    const Eigen::Index d = seq.front().values.cols();
    for (const auto& f : seq) {
        if (f.values.rows() != k || f.values.cols() != d)
            throw ShapeMismatch("bifa: frames must share one K x D shape");
    }
    if (w.bifa_forward.input_width() != 2 * d || w.bifa_forward.output_width() != d ||
        w.bifa_backward.input_width() != 2 * d || w.bifa_backward.output_width() != d)
        throw ShapeMismatch("bifa convolutions must map 2D -> D");

    const std::size_t T = seq.size();
    std::vector<Eigen::MatrixXd> forward(T);
    for (std::size_t t = 0; t < T; ++t) {
        const Eigen::MatrixXd ctx = context_of(t > 0 ? seq[t - 1].values : seq[t].values,
                                               seq[t].values, boundary, t == 0);
        forward[t] = mlp_apply_rows(w.bifa_forward, concat_cols(seq[t].values, ctx));
    }

    SequenceFeatures out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const Eigen::MatrixXd ctx = context_of(t + 1 < T ? forward[t + 1] : forward[t],
                                               forward[t], boundary, t + 1 == T);
        out[t] = {mlp_apply_rows(w.bifa_backward, concat_cols(forward[t], ctx)),
                  Provenance::Hidden};
    }
    return out;
}

SequenceFeatures learning_block(const SequenceFeatures& seq, const BlockWeights& w,
                                BifaBoundary boundary) {
    SequenceFeatures refined;
    refined.reserve(seq.size());
    for (const auto& frame : seq) refined.push_back(mhsa_ffn(frame, w));
    return bifa(refined, w, boundary);
}

Eigen::VectorXd decode(const Eigen::VectorXd& query, const FeatureMatrix& features,
                       const DecoderWeights& w) {
    if (features.values.rows() < 1) throw ShapeMismatch("decode: empty feature matrix");
    const Eigen::Index d = features.values.cols();
    if (query.size() != d)
        throw ShapeMismatch("decode: query width " + std::to_string(query.size()) +
                            " != feature width " + std::to_string(d));
    const Eigen::MatrixXd attended = attention(query.transpose(), features.values, w.attn);
    // The residual is taken against the query, the only shape-consistent
    // single-vector choice for a 1 x D attention output.
    const Eigen::VectorXd combined = attended.transpose() + query;
    if (w.ffn.input_width() != d || w.ffn.output_width() != d)
        throw ShapeMismatch("decode: ffn must map D -> D");
    return combined + mlp_apply_rows(w.ffn, combined.transpose()).transpose();
}

BlockWeights seeded_block_weights(int d_model, int heads, std::uint64_t seed) {
    BlockWeights w;
    w.attn.query = seeded_linear(d_model, d_model, mix_key(seed, 1));
    w.attn.key = seeded_linear(d_model, d_model, mix_key(seed, 2));
    w.attn.value = seeded_linear(d_model, d_model, mix_key(seed, 3));
    w.attn.output = seeded_linear(d_model, d_model, mix_key(seed, 4));
    w.attn.heads = heads;
    w.ffn = seeded_mlp(d_model, 4 * d_model, d_model, mix_key(seed, 5));
    w.bifa_forward = seeded_linear(2 * d_model, d_model, mix_key(seed, 6));
    w.bifa_backward = seeded_linear(2 * d_model, d_model, mix_key(seed, 7));
    return w;
}

DecoderWeights seeded_decoder_weights(int d_model, int heads, std::uint64_t seed) {
    DecoderWeights w;
    w.attn.query = seeded_linear(d_model, d_model, mix_key(seed, 11));
    w.attn.key = seeded_linear(d_model, d_model, mix_key(seed, 12));
    w.attn.value = seeded_linear(d_model, d_model, mix_key(seed, 13));
    w.attn.output = seeded_linear(d_model, d_model, mix_key(seed, 14));
    w.attn.heads = heads;
    w.ffn = seeded_mlp(d_model, 4 * d_model, d_model, mix_key(seed, 15));
    Rng rng(mix_key(seed, 16));
    w.query.resize(d_model);
    for (int i = 0; i < d_model; ++i) w.query(i) = rng.uniform(-0.1, 0.1);
    return w;
}

}  // namespace seqfuse
