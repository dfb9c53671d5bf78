#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seqfuse/encoding.hpp"
#include "seqfuse/errors.hpp"
#include "seqfuse/rng.hpp"

using namespace seqfuse;

namespace {

MlpWeights identity_mlp(int width) {
    MlpWeights mlp;
    DenseLayer layer;
    layer.weight = Eigen::MatrixXd::Identity(width, width);
    layer.bias = Eigen::VectorXd::Zero(width);
    layer.act = Activation::None;
    mlp.layers.push_back(std::move(layer));
    return mlp;
}

Proposal random_box(Rng& rng) {
    Proposal p;
    p.cx = rng.uniform(-20, 20);
    p.cy = rng.uniform(-20, 20);
    p.cz = rng.uniform(-2, 2);
    p.w = rng.uniform(0.5, 3.0);
    p.l = rng.uniform(0.5, 5.0);
    p.h = rng.uniform(0.5, 2.5);
    p.yaw = rng.uniform(-M_PI, M_PI);
    p.vx = rng.uniform(-5, 5);
    p.vy = rng.uniform(-5, 5);
    return make_proposal(p);
}

std::vector<Point3> random_points(Rng& rng, std::size_t n, const Proposal& near) {
    std::vector<Point3> points;
    for (std::size_t i = 0; i < n; ++i)
        points.push_back({near.cx + rng.uniform(-4, 4), near.cy + rng.uniform(-4, 4),
                          near.cz + rng.uniform(-2, 2), rng.next_double()});
    return points;
}

}  // namespace

TEST_CASE("spherical_transform handles the documented cases") {
    const auto a = spherical_transform(1, 0, 0);
    CHECK(a.r == doctest::Approx(1.0));
    CHECK(a.theta == doctest::Approx(0.0));
    CHECK(a.phi == doctest::Approx(0.0));

    const auto b = spherical_transform(0, 0, 1);
    CHECK(b.r == doctest::Approx(1.0));
    CHECK(b.theta == doctest::Approx(M_PI / 2));
    CHECK(b.phi == doctest::Approx(0.0));

    const auto c = spherical_transform(1, 1, std::sqrt(2.0));
    CHECK(c.r == doctest::Approx(2.0));
    CHECK(c.theta == doctest::Approx(M_PI / 4));
    CHECK(c.phi == doctest::Approx(M_PI / 4));

    const auto origin = spherical_transform(0, 0, 0);
    CHECK(origin.r == 0.0);
    CHECK(origin.theta == 0.0);
    CHECK(origin.phi == 0.0);
}

TEST_CASE("spherical_transform ranges and round trip") {
    Rng rng(42);
    for (int it = 0; it < 500; ++it) {
        const double x = rng.uniform(-10, 10);
        const double y = rng.uniform(-10, 10);
        const double z = rng.uniform(-10, 10);
        const auto s = spherical_transform(x, y, z);
        CHECK(s.r >= 0.0);
        CHECK(s.theta >= -M_PI / 2);
        CHECK(s.theta <= M_PI / 2);
        CHECK(s.phi > -M_PI - 1e-15);
        CHECK(s.phi <= M_PI + 1e-15);
        if (s.r > 0.0) {
            CHECK(std::abs(s.r * std::cos(s.theta) * std::cos(s.phi) - x) < 1e-9);
            CHECK(std::abs(s.r * std::cos(s.theta) * std::sin(s.phi) - y) < 1e-9);
            CHECK(std::abs(s.r * std::sin(s.theta) - z) < 1e-9);
        }
    }
}

TEST_CASE("geometric embedding passes raw spherical values through an identity layer") {
    // Box centered at the origin: keypoint 0 is the center itself.
    Proposal box;
    box.w = box.l = box.h = 1.0;
    MlpWeights mlp = identity_mlp(27);

    const std::vector<Point3> pts{{1.0, 1.0, 1.0, 0.0}};
    const auto g = geometric_embedding(pts, box, mlp);
    CHECK(g.provenance == Provenance::Geometric);
    CHECK(g.values(0, 0) == doctest::Approx(std::sqrt(3.0)));
    CHECK(g.values(0, 1) == doctest::Approx(std::asin(1.0 / std::sqrt(3.0))));
    CHECK(g.values(0, 2) == doctest::Approx(M_PI / 4));

    // A point exactly at the center feeds (0,0,0) into the first triple.
    const std::vector<Point3> at_center{{0, 0, 0, 0}};
    const auto center = geometric_embedding(at_center, box, mlp);
    CHECK(center.values(0, 0) == 0.0);
    CHECK(center.values(0, 1) == 0.0);
    CHECK(center.values(0, 2) == 0.0);
}

TEST_CASE("motion embedding feeds raw offsets plus the time channel") {
    Proposal box;
    box.w = box.l = box.h = 1.0;
    MlpWeights mlp = identity_mlp(28);

    const std::vector<Point3> at_center{{0, 0, 0, 0}};
    const auto m = motion_embedding(at_center, box, 3, mlp);
    CHECK(m.provenance == Provenance::Motion);
    // Offsets to the center keypoint are exact zeros; the final channel is dt.
    CHECK(m.values(0, 0) == 0.0);
    CHECK(m.values(0, 1) == 0.0);
    CHECK(m.values(0, 2) == 0.0);
    CHECK(m.values(0, 27) == 3.0);

    // Shrinking the box collapses all nine keypoints onto the center: the
    // input becomes 27 zeros followed by dt.
    Proposal tiny;
    tiny.w = tiny.l = tiny.h = 1e-12;
    const auto degenerate = motion_embedding(at_center, tiny, 3, mlp);
    for (int c = 0; c < 27; ++c) CHECK(std::abs(degenerate.values(0, c)) < 1e-9);
    CHECK(degenerate.values(0, 27) == 3.0);
}

TEST_CASE("at dt=0 motion inputs are the pre-spherical offsets of the geometric path") {
    Rng rng(9);
    const Proposal box = random_box(rng);
    const auto points = random_points(rng, 8, box);

    const auto raw = motion_embedding(points, box, 0, identity_mlp(28));
    const auto sph = geometric_embedding(points, box, identity_mlp(27));
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(raw.values(static_cast<Eigen::Index>(i), 27) == 0.0);
        for (int j = 0; j < 9; ++j) {
            const auto s = spherical_transform(raw.values(static_cast<Eigen::Index>(i), 3 * j),
                                               raw.values(static_cast<Eigen::Index>(i), 3 * j + 1),
                                               raw.values(static_cast<Eigen::Index>(i), 3 * j + 2));
            CHECK(sph.values(static_cast<Eigen::Index>(i), 3 * j) ==
                  doctest::Approx(s.r).epsilon(1e-12));
            CHECK(sph.values(static_cast<Eigen::Index>(i), 3 * j + 1) ==
                  doctest::Approx(s.theta).epsilon(1e-12));
            CHECK(sph.values(static_cast<Eigen::Index>(i), 3 * j + 2) ==
                  doctest::Approx(s.phi).epsilon(1e-12));
        }
    }
}

TEST_CASE("embeddings match the straight-line reimplementation") {
    Rng rng(2718);
    for (int it = 0; it < 50; ++it) {
        const Proposal box = random_box(rng);
        const auto points = random_points(rng, 1 + rng.bounded(12), box);
        const int d = static_cast<int>(4 + rng.bounded(24));
        const MlpWeights gm = seeded_mlp(27, d, d, rng.next_u64());
        const MlpWeights mm = seeded_mlp(28, d, d, rng.next_u64());
        const auto dt = static_cast<std::int32_t>(rng.bounded(16));

        const auto g = geometric_embedding(points, box, gm);
        const auto m = motion_embedding(points, box, dt, mm);
        CHECK(oracle::max_abs_diff(oracle::geometric_embedding(points, box, gm), g.values) <
              1e-6);
        CHECK(oracle::max_abs_diff(oracle::motion_embedding(points, box, dt, mm), m.values) <
              1e-6);
    }
}

TEST_CASE("geometric embedding is translation invariant") {
    Rng rng(31415);
    for (int it = 0; it < 50; ++it) {
        const Proposal box = random_box(rng);
        const auto points = random_points(rng, 6, box);
        const int d = 8;
        const MlpWeights mlp = seeded_mlp(27, d, d, rng.next_u64());

        const double tx = rng.uniform(-100, 100);
        const double ty = rng.uniform(-100, 100);
        const double tz = rng.uniform(-10, 10);
        Proposal moved = box;
        moved.cx += tx;
        moved.cy += ty;
        moved.cz += tz;
        std::vector<Point3> shifted;
        for (const auto& p : points) shifted.push_back({p.x + tx, p.y + ty, p.z + tz, p.intensity});

        const auto base = geometric_embedding(points, box, mlp);
        const auto translated = geometric_embedding(shifted, moved, mlp);
        CHECK((base.values - translated.values).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("fuse_embeddings adds element-wise and tags provenance") {
    Rng rng(7);
    FeatureMatrix g{Eigen::MatrixXd::Random(5, 4), Provenance::Geometric};
    FeatureMatrix zero{Eigen::MatrixXd::Zero(5, 4), Provenance::Motion};
    const auto same = fuse_embeddings(g, zero);
    CHECK(same.values == g.values);
    CHECK(same.provenance == Provenance::Fused);

    FeatureMatrix neg{-g.values, Provenance::Motion};
    CHECK(fuse_embeddings(g, neg).values.cwiseAbs().maxCoeff() == 0.0);

    FeatureMatrix m{Eigen::MatrixXd::Random(5, 4), Provenance::Motion};
    const auto fused = fuse_embeddings(g, m);
    for (int it = 0; it < 10; ++it) {
        const auto r = static_cast<Eigen::Index>(rng.bounded(5));
        const auto c = static_cast<Eigen::Index>(rng.bounded(4));
        CHECK(fused.values(r, c) == g.values(r, c) + m.values(r, c));
    }

    FeatureMatrix bad{Eigen::MatrixXd::Zero(4, 4), Provenance::Motion};
    CHECK_THROWS_AS((void)fuse_embeddings(g, bad), ShapeMismatch);
}

TEST_CASE("embedding ops reject wrong mlp widths") {
    Proposal box;
    const std::vector<Point3> pts{{0, 0, 0, 0}};
    CHECK_THROWS_AS((void)geometric_embedding(pts, box, identity_mlp(28)), WidthMismatch);
    CHECK_THROWS_AS((void)motion_embedding(pts, box, 0, identity_mlp(27)), WidthMismatch);
}

TEST_CASE("mlp JSON round trip preserves weights exactly") {
    const MlpWeights mlp = seeded_mlp(27, 16, 16, 99);
    const MlpWeights round = mlp_from_json(mlp_to_json(mlp));
    REQUIRE(round.layers.size() == mlp.layers.size());
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
        CHECK(round.layers[i].weight == mlp.layers[i].weight);
        CHECK(round.layers[i].bias == mlp.layers[i].bias);
        CHECK(round.layers[i].act == mlp.layers[i].act);
    }
}

TEST_CASE("mlp JSON and application reject malformed input") {
    CHECK_THROWS_AS((void)mlp_from_json("{"), ConfigError);
    CHECK_THROWS_AS((void)mlp_from_json(R"({"layers": [{"rows": 2, "cols": 2,
        "weight": [1], "bias": [0, 0], "act": "none"}]})"),
                    ConfigError);

    MlpWeights broken;
    DenseLayer a;
    a.weight = Eigen::MatrixXd::Zero(3, 2);
    a.bias = Eigen::VectorXd::Zero(3);
    DenseLayer b;
    b.weight = Eigen::MatrixXd::Zero(2, 4);  // does not chain with 3
    b.bias = Eigen::VectorXd::Zero(2);
    broken.layers = {a, b};
    CHECK_THROWS_AS(validate_mlp(broken), WidthMismatch);

    const MlpWeights ok = seeded_mlp(4, 8, 8, 1);
    CHECK_THROWS_AS((void)mlp_apply_rows(ok, Eigen::MatrixXd::Zero(2, 5)), WidthMismatch);
}

TEST_CASE("mlp application is bit-repeatable") {
    const MlpWeights mlp = seeded_mlp(6, 12, 4, 333);
    Rng rng(12);
    Eigen::MatrixXd input(3, 6);
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 6; ++c) input(r, c) = rng.uniform(-2, 2);
    const auto a = mlp_apply_rows(mlp, input);
    const auto b = mlp_apply_rows(mlp, input);
    CHECK(a == b);
}
