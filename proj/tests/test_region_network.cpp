#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqfuse/errors.hpp"
#include "seqfuse/loss.hpp"
#include "seqfuse/network.hpp"
#include "seqfuse/rng.hpp"

using namespace seqfuse;

namespace {

MlpWeights linear_from(const Eigen::MatrixXd& w) {
    MlpWeights mlp;
    DenseLayer layer;
    layer.weight = w;
    layer.bias = Eigen::VectorXd::Zero(w.rows());
    layer.act = Activation::None;
    mlp.layers.push_back(std::move(layer));
    return mlp;
}

MlpWeights zero_mlp(int in, int hidden, int out) {
    MlpWeights mlp;
    DenseLayer a;
    a.weight = Eigen::MatrixXd::Zero(hidden, in);
    a.bias = Eigen::VectorXd::Zero(hidden);
    a.act = Activation::Relu;
    DenseLayer b;
    b.weight = Eigen::MatrixXd::Zero(out, hidden);
    b.bias = Eigen::VectorXd::Zero(out);
    b.act = Activation::None;
    mlp.layers = {a, b};
    return mlp;
}

/// Wq = Wk = I, Wv = 2I, Wo = I, FFN contributes nothing.
BlockWeights hand_block(int d) {
    BlockWeights w;
    w.attn.query = linear_from(Eigen::MatrixXd::Identity(d, d));
    w.attn.key = linear_from(Eigen::MatrixXd::Identity(d, d));
    w.attn.value = linear_from(2.0 * Eigen::MatrixXd::Identity(d, d));
    w.attn.output = linear_from(Eigen::MatrixXd::Identity(d, d));
    w.attn.heads = 1;
    w.ffn = zero_mlp(d, 4 * d, d);
    w.bifa_forward = linear_from(Eigen::MatrixXd::Ones(d, 2 * d));
    w.bifa_backward = linear_from(Eigen::MatrixXd::Ones(d, 2 * d));
    return w;
}

FeatureMatrix random_features(Rng& rng, int k, int d) {
    Eigen::MatrixXd m(k, d);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < d; ++c) m(r, c) = rng.uniform(-2, 2);
    return {m, Provenance::Fused};
}

std::vector<int> random_permutation(Rng& rng, int n) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (std::size_t i = perm.size(); i > 1; --i)
        std::swap(perm[i - 1], perm[rng.bounded(i)]);
    return perm;
}

}  // namespace

TEST_CASE("mhsa_ffn matches the frozen 2x2 hand computation") {
    const BlockWeights w = hand_block(2);
    FeatureMatrix x{Eigen::MatrixXd::Identity(2, 2), Provenance::Fused};
    const auto out = mhsa_ffn(x, w);
    CHECK(out.values(0, 0) == doctest::Approx(2.3395230986533138).epsilon(1e-6));
    CHECK(out.values(0, 1) == doctest::Approx(0.66047690134668624).epsilon(1e-6));
    CHECK(out.values(1, 0) == doctest::Approx(0.66047690134668624).epsilon(1e-6));
    CHECK(out.values(1, 1) == doctest::Approx(2.3395230986533138).epsilon(1e-6));
}

TEST_CASE("mhsa_ffn with K=1 reduces to projected residual paths") {
    Rng rng(5);
    const int d = 8;
    const BlockWeights w = seeded_block_weights(d, 2, 42);
    FeatureMatrix x = random_features(rng, 1, d);

    // With one point the softmax weight is 1 regardless of Q/K.
    const Eigen::MatrixXd v = mlp_apply_rows(w.attn.value, x.values);
    const Eigen::MatrixXd attended = mlp_apply_rows(w.attn.output, v);
    const Eigen::MatrixXd res = x.values + attended;
    const Eigen::MatrixXd expected = res + mlp_apply_rows(w.ffn, res);
    CHECK((mhsa_ffn(x, w).values - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mhsa_ffn agrees with the straight-line oracle") {
    Rng rng(99);
    for (int it = 0; it < 25; ++it) {
        const int heads_choices[3] = {1, 2, 4};
        const int h = heads_choices[rng.bounded(3)];
        const int d = h * static_cast<int>(2 + rng.bounded(6));
        const int k = static_cast<int>(1 + rng.bounded(9));
        const BlockWeights w = seeded_block_weights(d, h, rng.next_u64());
        const FeatureMatrix x = random_features(rng, k, d);
        const auto got = mhsa_ffn(x, w);
        CHECK(oracle::max_abs_diff(oracle::mhsa_ffn(oracle::to_mat(x.values), w), got.values) <
              1e-6);
    }
}

TEST_CASE("mhsa_ffn is permutation equivariant") {
    Rng rng(123);
    for (int it = 0; it < 20; ++it) {
        const int d = 8;
        const int k = static_cast<int>(2 + rng.bounded(10));
        const BlockWeights w = seeded_block_weights(d, 2, rng.next_u64());
        const FeatureMatrix x = random_features(rng, k, d);
        const auto perm = random_permutation(rng, k);

        FeatureMatrix shuffled{Eigen::MatrixXd(k, d), Provenance::Fused};
        for (int r = 0; r < k; ++r)
            shuffled.values.row(r) = x.values.row(perm[static_cast<std::size_t>(r)]);

        const auto base = mhsa_ffn(x, w);
        const auto permuted = mhsa_ffn(shuffled, w);
        for (int r = 0; r < k; ++r) {
            const auto diff =
                (permuted.values.row(r) - base.values.row(perm[static_cast<std::size_t>(r)]))
                    .cwiseAbs()
                    .maxCoeff();
            CHECK(diff < 1e-9);
        }
    }
}

TEST_CASE("maxpool_repeat broadcasts column maxima") {
    Eigen::MatrixXd m(2, 2);
    m << 1, 4, 3, 2;
    const Eigen::MatrixXd pooled = maxpool_repeat(m);
    CHECK(pooled(0, 0) == 3);
    CHECK(pooled(0, 1) == 4);
    CHECK(pooled(1, 0) == 3);
    CHECK(pooled(1, 1) == 4);

    Eigen::MatrixXd constant(3, 2);
    constant << 5, -1, 5, -1, 5, -1;
    CHECK(maxpool_repeat(constant) == constant);

    Eigen::MatrixXd swapped(2, 2);
    swapped << 3, 2, 1, 4;
    CHECK(maxpool_repeat(swapped) == pooled);
}

TEST_CASE("bifa reproduces the frozen two-frame linear example") {
    // D=1, K=1, both conv weights [1, 1], bias 0, f1=[1], f2=[2]:
    // hF1 = 2, hF2 = 3, hB1 = 2 + 3 = 5, hB2 = 3 + 3 = 6.
    BlockWeights w = hand_block(1);
    SequenceFeatures seq;
    seq.push_back({Eigen::MatrixXd::Constant(1, 1, 1.0), Provenance::Fused});
    seq.push_back({Eigen::MatrixXd::Constant(1, 1, 2.0), Provenance::Fused});

    // Confirmed by the independent straight-line evaluation before freezing.
    const auto ref = oracle::bifa({oracle::to_mat(seq[0].values), oracle::to_mat(seq[1].values)}, w);
    CHECK(ref[0][0][0] == 5.0);
    CHECK(ref[1][0][0] == 6.0);

    const auto out = bifa(seq, w);
    CHECK(out[0].values(0, 0) == 5.0);
    CHECK(out[1].values(0, 0) == 6.0);
}

TEST_CASE("bifa with a single frame is double self-context convolution") {
    Rng rng(8);
    const int d = 4, k = 3;
    const BlockWeights w = seeded_block_weights(d, 1, 17);
    SequenceFeatures seq{random_features(rng, k, d)};

    const auto out = bifa(seq, w);
    REQUIRE(out.size() == 1);

    Eigen::MatrixXd cat1(k, 2 * d);
    cat1 << seq[0].values, maxpool_repeat(seq[0].values);
    const Eigen::MatrixXd hf = mlp_apply_rows(w.bifa_forward, cat1);
    Eigen::MatrixXd cat2(k, 2 * d);
    cat2 << hf, maxpool_repeat(hf);
    const Eigen::MatrixXd expected = mlp_apply_rows(w.bifa_backward, cat2);
    CHECK((out[0].values - expected).cwiseAbs().maxCoeff() < 1e-12);

    // Zero-context boundary variant concatenates zeros instead.
    const auto zero = bifa(seq, w, BifaBoundary::ZeroContext);
    Eigen::MatrixXd zcat1(k, 2 * d);
    zcat1 << seq[0].values, Eigen::MatrixXd::Zero(k, d);
    const Eigen::MatrixXd zhf = mlp_apply_rows(w.bifa_forward, zcat1);
    Eigen::MatrixXd zcat2(k, 2 * d);
    zcat2 << zhf, Eigen::MatrixXd::Zero(k, d);
    CHECK((zero[0].values - mlp_apply_rows(w.bifa_backward, zcat2)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("bifa agrees with the straight-line oracle across lengths and boundaries") {
    Rng rng(314);
    for (int it = 0; it < 20; ++it) {
        const int d = static_cast<int>(2 + rng.bounded(6));
        const int k = static_cast<int>(1 + rng.bounded(5));
        const auto T = static_cast<std::size_t>(1 + rng.bounded(6));
        const bool self_context = (it % 2) == 0;
        const BlockWeights w = seeded_block_weights(d, 1, rng.next_u64());
        SequenceFeatures seq;
        std::vector<oracle::Mat> plain;
        for (std::size_t t = 0; t < T; ++t) {
            seq.push_back(random_features(rng, k, d));
            plain.push_back(oracle::to_mat(seq.back().values));
        }
        const auto got = bifa(
            seq, w, self_context ? BifaBoundary::SelfContext : BifaBoundary::ZeroContext);
        const auto ref = oracle::bifa(plain, w, self_context);
        for (std::size_t t = 0; t < T; ++t)
            CHECK(oracle::max_abs_diff(ref[t], got[t].values) < 1e-9);
    }
}

TEST_CASE("one bifa application changes nothing two or more frames away") {
    Rng rng(217);
    const int d = 6, k = 4;
    const std::size_t T = 9;
    const BlockWeights w = seeded_block_weights(d, 1, 33);
    SequenceFeatures seq;
    for (std::size_t t = 0; t < T; ++t) seq.push_back(random_features(rng, k, d));

    const std::size_t t0 = 4;
    SequenceFeatures bumped = seq;
    bumped[t0].values(1, 2) += 0.5;

    const auto base = bifa(seq, w);
    const auto moved = bifa(bumped, w);
    for (std::size_t t = 0; t < T; ++t) {
        const double diff = (moved[t].values - base[t].values).cwiseAbs().maxCoeff();
        const std::size_t dist = t > t0 ? t - t0 : t0 - t;
        if (dist >= 2) {
            CHECK(diff == 0.0);  // exact, not approximate
        } else if (t == t0) {
            CHECK(diff > 0.0);
        }
    }
}

TEST_CASE("learning_block with muted attention and ffn equals bifa alone") {
    Rng rng(21);
    const int d = 4, k = 3;
    BlockWeights w = seeded_block_weights(d, 2, 55);
    w.attn.output = linear_from(Eigen::MatrixXd::Zero(d, d));  // attention adds nothing
    w.ffn = zero_mlp(d, 4 * d, d);                             // ffn adds nothing

    SequenceFeatures seq;
    for (int t = 0; t < 4; ++t) seq.push_back(random_features(rng, k, d));
    const auto block = learning_block(seq, w);
    const auto direct = bifa(seq, w);
    for (std::size_t t = 0; t < seq.size(); ++t)
        CHECK((block[t].values - direct[t].values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("three stacked blocks never reach past the documented radius") {
    Rng rng(888);
    const int d = 4, k = 2;
    const std::size_t T = 16;
    std::vector<BlockWeights> blocks;
    for (int b = 0; b < 3; ++b) blocks.push_back(seeded_block_weights(d, 1, 1000 + b));

    SequenceFeatures seq;
    for (std::size_t t = 0; t < T; ++t) seq.push_back(random_features(rng, k, d));
    const std::size_t t0 = 8;
    SequenceFeatures bumped = seq;
    bumped[t0].values(0, 0) += 1.0;

    SequenceFeatures a = seq, b = bumped;
    for (const auto& w : blocks) {
        a = learning_block(a, w);
        b = learning_block(b, w);
    }
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t dist = t > t0 ? t - t0 : t0 - t;
        const double diff = (b[t].values - a[t].values).cwiseAbs().maxCoeff();
        if (dist > 6) CHECK(diff == 0.0);
        if (t == t0) CHECK(diff > 0.0);
    }
}

TEST_CASE("learning_block preserves K x D shapes for T in {1, 4, 8}") {
    Rng rng(77);
    const int k = 16, d = 32;
    const BlockWeights w = seeded_block_weights(d, 4, 7);
    for (const std::size_t T : {1u, 4u, 8u}) {
        SequenceFeatures seq;
        for (std::size_t t = 0; t < T; ++t) seq.push_back(random_features(rng, k, d));
        const auto out = learning_block(seq, w);
        REQUIRE(out.size() == T);
        for (const auto& f : out) {
            CHECK(f.values.rows() == k);
            CHECK(f.values.cols() == d);
            CHECK(f.values.allFinite());
        }
    }
}

TEST_CASE("bifa rejects malformed sequences") {
    const BlockWeights w = seeded_block_weights(4, 1, 3);
    CHECK_THROWS_AS((void)bifa({}, w), EmptySequence);
    Rng rng(1);
    SequenceFeatures ragged{random_features(rng, 2, 4), random_features(rng, 3, 4)};
    CHECK_THROWS_AS((void)bifa(ragged, w), ShapeMismatch);
}

TEST_CASE("decode matches the frozen 2x2 hand computation") {
    const BlockWeights hb = hand_block(2);
    DecoderWeights w;
    w.attn = hb.attn;
    w.ffn = zero_mlp(2, 8, 2);
    w.query = Eigen::VectorXd::Zero(2);

    Eigen::VectorXd q(2);
    q << 1, 0;
    FeatureMatrix features{Eigen::MatrixXd::Identity(2, 2), Provenance::Hidden};
    const Eigen::VectorXd e = decode(q, features, w);
    CHECK(e(0) == doctest::Approx(2.3395230986533138).epsilon(1e-6));
    CHECK(e(1) == doctest::Approx(0.66047690134668624).epsilon(1e-6));
}

TEST_CASE("decode with K=1 is a residual stack over the value projection") {
    Rng rng(66);
    const int d = 8;
    const DecoderWeights w = seeded_decoder_weights(d, 2, 11);
    const FeatureMatrix features = random_features(rng, 1, d);

    const Eigen::MatrixXd v = mlp_apply_rows(w.attn.value, features.values);
    const Eigen::MatrixXd attended = mlp_apply_rows(w.attn.output, v);
    const Eigen::VectorXd combined = attended.transpose().col(0) + w.query;
    const Eigen::VectorXd expected =
        combined + mlp_apply_rows(w.ffn, combined.transpose()).transpose().col(0);
    CHECK((decode(w.query, features, w) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("decode is invariant to feature row order and matches the oracle") {
    Rng rng(4242);
    for (int it = 0; it < 25; ++it) {
        const int d = 8;
        const int k = static_cast<int>(1 + rng.bounded(10));
        const DecoderWeights w = seeded_decoder_weights(d, 2, rng.next_u64());
        const FeatureMatrix features = random_features(rng, k, d);

        const Eigen::VectorXd base = decode(w.query, features, w);

        oracle::Vec q(static_cast<std::size_t>(d));
        for (int c = 0; c < d; ++c) q[static_cast<std::size_t>(c)] = w.query(c);
        const auto ref = oracle::decode(q, oracle::to_mat(features.values), w);
        for (int c = 0; c < d; ++c)
            CHECK(std::abs(base(c) - ref[static_cast<std::size_t>(c)]) < 1e-6);

        const auto perm = random_permutation(rng, k);
        FeatureMatrix shuffled{Eigen::MatrixXd(k, d), Provenance::Hidden};
        for (int r = 0; r < k; ++r)
            shuffled.values.row(r) = features.values.row(perm[static_cast<std::size_t>(r)]);
        CHECK((decode(w.query, shuffled, w) - base).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("attention ops reject empty and mismatched inputs") {
    const DecoderWeights w = seeded_decoder_weights(4, 2, 1);
    const FeatureMatrix empty{Eigen::MatrixXd(0, 4), Provenance::Hidden};
    CHECK_THROWS_AS((void)decode(w.query, empty, w), ShapeMismatch);
    const FeatureMatrix ok{Eigen::MatrixXd::Zero(2, 4), Provenance::Hidden};
    CHECK_THROWS_AS((void)decode(Eigen::VectorXd::Zero(5), ok, w), ShapeMismatch);
    const BlockWeights bw = seeded_block_weights(4, 2, 1);
    const FeatureMatrix none{Eigen::MatrixXd(0, 4), Provenance::Fused};
    CHECK_THROWS_AS((void)mhsa_ffn(none, bw), ShapeMismatch);
}

TEST_CASE("total_loss handles the documented edge cases") {
    LossTargets targets;
    targets.confidence = {1.0, 0.0};
    targets.residuals = {{0.1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}};
    targets.positive = {1, 0};
    const std::vector<double> logits{2.0, -1.5};
    const std::vector<BoxResiduals> perfect{{0.1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}};

    // Residuals match exactly: regression vanishes and alpha has no effect.
    const double expected_conf =
        (-std::log(1.0 / (1.0 + std::exp(-2.0))) - std::log(1.0 - 1.0 / (1.0 + std::exp(1.5)))) /
        2.0;
    CHECK(total_loss(logits, perfect, targets, 5.0) ==
          doctest::Approx(expected_conf).epsilon(1e-12));
    CHECK(total_loss(logits, perfect, targets, 0.0) ==
          doctest::Approx(expected_conf).epsilon(1e-12));

    // alpha = 0 drops the regression term entirely.
    const std::vector<BoxResiduals> off{{1.1, 0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0}};
    CHECK(total_loss(logits, off, targets, 0.0) ==
          doctest::Approx(expected_conf).epsilon(1e-12));
    CHECK(total_loss(logits, off, targets, 1.0) > expected_conf);
}

TEST_CASE("total_loss is monotone in alpha and non-negative") {
    Rng rng(31);
    LossTargets targets;
    std::vector<double> logits;
    std::vector<BoxResiduals> predicted;
    for (int i = 0; i < 12; ++i) {
        logits.push_back(rng.uniform(-4, 4));
        targets.confidence.push_back(rng.next_double());
        BoxResiduals pred{}, target{};
        for (int c = 0; c < 7; ++c) {
            pred[static_cast<std::size_t>(c)] = rng.uniform(-2, 2);
            target[static_cast<std::size_t>(c)] = rng.uniform(-2, 2);
        }
        predicted.push_back(pred);
        targets.residuals.push_back(target);
        targets.positive.push_back(i % 2 == 0 ? 1 : 0);
    }
    double prev = -1.0;
    for (const double alpha : {0.0, 0.5, 1.0, 2.0}) {
        const double loss = total_loss(logits, predicted, targets, alpha);
        CHECK(loss >= 0.0);
        CHECK(loss >= prev);
        prev = loss;
    }
}

TEST_CASE("total_loss matches the straight-line oracle") {
    Rng rng(606);
    for (int it = 0; it < 50; ++it) {
        const std::size_t n = 1 + rng.bounded(16);
        LossTargets targets;
        std::vector<double> logits;
        std::vector<BoxResiduals> predicted;
        for (std::size_t i = 0; i < n; ++i) {
            logits.push_back(rng.uniform(-5, 5));
            targets.confidence.push_back(rng.next_double());
            BoxResiduals pred{}, target{};
            for (int c = 0; c < 7; ++c) {
                pred[static_cast<std::size_t>(c)] = rng.uniform(-3, 3);
                target[static_cast<std::size_t>(c)] = rng.uniform(-3, 3);
            }
            predicted.push_back(pred);
            targets.residuals.push_back(target);
            targets.positive.push_back(rng.next_u64() & 1 ? 1 : 0);
        }
        const double alpha = rng.uniform(0, 3);
        const double got = total_loss(logits, predicted, targets, alpha);
        const double ref = oracle::total_loss(logits, predicted, targets, alpha);
        CHECK(std::abs(got - ref) < 1e-7);
    }
}

TEST_CASE("total_loss validates alignment and alpha") {
    LossTargets targets;
    targets.confidence = {1.0};
    targets.residuals = {{0, 0, 0, 0, 0, 0, 0}};
    targets.positive = {1};
    const std::vector<double> logits{0.5, 0.5};
    const std::vector<BoxResiduals> predicted{{0, 0, 0, 0, 0, 0, 0},
                                              {0, 0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS((void)total_loss(logits, predicted, targets, 1.0), AlignmentMismatch);
    targets.confidence = {1.0, 0.0};
    targets.residuals.push_back({0, 0, 0, 0, 0, 0, 0});
    targets.positive.push_back(0);
    CHECK_THROWS_AS((void)total_loss(logits, predicted, targets, -0.5), DomainError);
}

TEST_CASE("encode_box_residuals is zero for a perfect anchor and wraps yaw") {
    Proposal anchor;
    anchor.cx = 3;
    anchor.cy = -1;
    anchor.cz = 0.5;
    anchor.w = 2;
    anchor.l = 4;
    anchor.h = 1.5;
    anchor.yaw = 0.3;
    const auto self = encode_box_residuals(anchor, anchor);
    for (const double v : self) CHECK(v == 0.0);

    Proposal target = anchor;
    target.yaw = normalize_yaw(anchor.yaw + M_PI + 0.1 + 2 * M_PI);
    const auto wrapped = encode_box_residuals(anchor, target);
    CHECK(std::abs(wrapped[6]) <= M_PI);
}
