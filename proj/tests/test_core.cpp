#include <doctest.h>

#include "helpers.hpp"
#include "herdpose/core.hpp"
#include "herdpose/rng.hpp"
#include "oracles.hpp"

using namespace herdpose;

TEST_CASE("iou identity, disjoint and half-shifted boxes") {
    const BBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, BBox{20, 20, 5, 5}) == 0.0);
    CHECK(iou(a, BBox{10, 0, 10, 10}) == 0.0);  // touching edge
    CHECK(iou(a, BBox{5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
    CHECK(oracle::raster_iou(a, BBox{5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
}

TEST_CASE("iou agrees with the pixel-count oracle on integer boxes and is symmetric") {
    Rng rng(7);
    for (int trial = 0; trial < 2000; ++trial) {
        const BBox a = testing::random_box(rng, 30.0, 1.0, 25.0);
        const BBox b = testing::random_box(rng, 30.0, 1.0, 25.0);
        const double v = iou(a, b);
        CHECK(std::abs(v - oracle::raster_iou(a, b)) < 1e-9);
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("affine map application and inversion") {
    const Point p{7, 9};
    CHECK(apply_map(AffineMap::identity(), p) == p);
    CHECK(apply_map(AffineMap{2.0, 0.0, 0.0}, Point{3, 4}) == Point{6, 8});
    CHECK(invert_map(AffineMap::identity()) == AffineMap::identity());

    const AffineMap inv = invert_map(AffineMap{2.0, 10.0, 0.0});
    CHECK(inv.scale == 0.5);
    CHECK(inv.dx == -5.0);
    CHECK(inv.dy == 0.0);

    CHECK_THROWS_AS(invert_map(AffineMap{0.0, 1.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(invert_map(AffineMap{-1.0, 0.0, 0.0}), ValidationError);
}

TEST_CASE("affine maps round-trip random points") {
    Rng rng(11);
    for (int m = 0; m < 50; ++m) {
        const AffineMap map{rng.uniform(0.01, 20.0), rng.uniform(-5000, 5000), rng.uniform(-5000, 5000)};
        const AffineMap back = invert_map(map);
        for (int i = 0; i < 1000; ++i) {
            const Point p{rng.uniform(-4000, 4000), rng.uniform(-4000, 4000)};
            const Point q = apply_map(back, apply_map(map, p));
            REQUIRE(std::abs(q.x - p.x) < 1e-9);
            REQUIRE(std::abs(q.y - p.y) < 1e-9);
        }
    }
}

TEST_CASE("keypoint visibility survives mapping") {
    const Keypoint k{1, 2, Visibility::Occluded};
    CHECK(apply_map(AffineMap{3.0, 1.0, 1.0}, k).vis == Visibility::Occluded);
    CHECK(visibility_from_code(0) == Visibility::NotLabeled);
    CHECK(visibility_from_code(1) == Visibility::Occluded);
    CHECK(visibility_from_code(2) == Visibility::Visible);
    CHECK_THROWS_AS(visibility_from_code(3), ValidationError);
}

TEST_CASE("skeleton invariants") {
    const Skeleton s = Skeleton::elephant();
    CHECK(s.size() == 8);
    CHECK(s.names.front() == "forehead");
    CHECK(s.names.back() == "ear_tip_r");
    CHECK_NOTHROW(s.validate());

    Skeleton bad = s;
    bad.names.pop_back();
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("skeleton size mismatch"), ValidationError);
    bad = s;
    bad.falloff[2] = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = s;
    std::swap(bad.names[0], bad.names[1]);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("instance and frame validation") {
    Instance g = testing::gt(1, {0, 0, 10, 10});
    CHECK_NOTHROW(g.validate());
    g.score = 0.5;
    CHECK_THROWS_AS(g.validate(), ValidationError);

    Instance p = testing::pred(1, {0, 0, 10, 10}, 1.5);
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.score.reset();
    CHECK_THROWS_AS(p.validate(), ValidationError);

    CHECK_THROWS_AS(testing::gt(2, {0, 0, 0, 10}).validate(), ValidationError);

    FrameRecord f;
    f.width = 100;
    f.height = 100;
    f.instances = {testing::gt(1, {90, 90, 20, 20})};
    CHECK_NOTHROW(f.validate());
    f.instances.push_back(testing::gt(2, {150, 150, 10, 10}));
    CHECK_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("portable generator is reproducible and well spread") {
    Rng a(123), b(123), c(124);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs = differs || x != c.next_u64();
    }
    CHECK(differs);

    Rng r(5);
    double sum = 0.0, sum2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);

    double bsum = 0.0;
    for (int i = 0; i < 50000; ++i) bsum += r.beta(8.0, 2.0);
    CHECK(std::abs(bsum / 50000 - 0.8) < 0.005);
}
