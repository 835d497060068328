#include <doctest.h>

#include "helpers.hpp"
#include "herdpose/framing.hpp"
#include "herdpose/rng.hpp"
#include "oracles.hpp"

using namespace herdpose;

namespace {

// Per-pixel count of covering tiles along one axis, then the minimum.
int min_axis_coverage(int extent, const std::vector<int>& origins, int side, bool interior_only) {
    std::vector<int> cover(std::size_t(extent), 0);
    for (int o : origins) {
        for (int p = o; p < std::min(extent, o + side); ++p) ++cover[std::size_t(p)];
    }
    int lo = interior_only ? side : 0, hi = interior_only ? extent - side : extent;
    int m = 1 << 20;
    for (int p = lo; p < hi; ++p) m = std::min(m, cover[std::size_t(p)]);
    return m;
}

}  // namespace

TEST_CASE("default grid on a 4K frame") {
    const TileGrid g = build_grid(3840, 2160, 800, 0.33);
    CHECK(g.stride == 536);
    CHECK(g.cols == 7);
    CHECK(g.rows == 4);
    REQUIRE(g.tiles.size() == 28);
    CHECK(g.tiles.back().x0 == 3040);
    CHECK(g.tiles.back().y0 == 1360);

    const auto xs = oracle::walk_origins(3840, 800, 536);
    const auto ys = oracle::walk_origins(2160, 800, 536);
    CHECK(xs == tile_origins(3840, 800, 536));
    CHECK(ys == tile_origins(2160, 800, 536));

    // Row-major order and translation maps.
    for (std::size_t i = 0; i < g.tiles.size(); ++i) {
        const TileSpec& t = g.tiles[i];
        CHECK(t.row == int(i) / 7);
        CHECK(t.col == int(i) % 7);
        CHECK(t.x0 == xs[std::size_t(t.col)]);
        CHECK(t.y0 == ys[std::size_t(t.row)]);
        CHECK(t.map == AffineMap::translation(-t.x0, -t.y0));
        CHECK(t.x0 + t.width <= 3840);
        CHECK(t.y0 + t.height <= 2160);
    }

    // Every pixel covered; neighbours share side - stride pixels.
    std::vector<unsigned char> hit(std::size_t(3840) * 2160, 0);
    for (const TileSpec& t : g.tiles) {
        for (int y = t.y0; y < t.y0 + t.height; ++y) {
            for (int x = t.x0; x < t.x0 + t.width; ++x) hit[std::size_t(y) * 3840 + std::size_t(x)] = 1;
        }
    }
    std::size_t covered = 0;
    for (auto h : hit) covered += h;
    CHECK(covered == hit.size());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) CHECK(xs[i] + 800 - xs[i + 1] >= 264);
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) CHECK(ys[i] + 800 - ys[i + 1] >= 264);
    CHECK(min_axis_coverage(3840, xs, 800, false) >= 1);
    // Double coverage of every interior pixel needs overlap >= 0.5.
    const auto half = tile_origins(3840, 800, tile_stride(800, 0.5));
    CHECK(min_axis_coverage(3840, half, 800, true) >= 2);
}

TEST_CASE("degenerate grids") {
    const TileGrid one = build_grid(800, 800);
    REQUIRE(one.tiles.size() == 1);
    CHECK(one.tiles[0].x0 == 0);
    CHECK(one.tiles[0].y0 == 0);

    const TileGrid two = build_grid(1600, 800, 800, 0.0);
    REQUIRE(two.tiles.size() == 2);
    CHECK(two.tiles[1].x0 == 800);
    CHECK(intersection_area(two.tiles[0].rect(), two.tiles[1].rect()) == 0.0);

    const TileGrid small = build_grid(500, 300);
    REQUIRE(small.tiles.size() == 1);
    CHECK(small.tiles[0].width == 500);
    CHECK(small.tiles[0].height == 300);

    CHECK_THROWS_AS(build_grid(0, 100), ValidationError);
    CHECK_THROWS_AS(build_grid(100, 100, 0), ValidationError);
}

TEST_CASE("tile origins match the walking oracle over many geometries") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int side = 50 + int(rng.below(300));
        const int extent = 1 + int(rng.below(3000));
        const double overlap = rng.uniform(0.0, 0.9);
        const int stride = tile_stride(side, overlap);
        CHECK(tile_origins(extent, side, stride) == oracle::walk_origins(extent, side, stride));
        if (extent >= side) CHECK(min_axis_coverage(extent, tile_origins(extent, side, stride), side, false) >= 1);
    }
}

TEST_CASE("project_to_tile keeps, clips or drops by visible fraction") {
    const TileGrid g = build_grid(1600, 800, 800, 0.0);
    const TileSpec& left = g.tiles[0];

    FrameRecord fr;
    fr.width = 1600;
    fr.height = 800;
    Instance inside = testing::gt(1, {100, 100, 50, 40});
    inside.pose = testing::full_pose(110, 110);
    Instance straddle = testing::gt(2, {770, 300, 50, 20});  // 30 of 50 px inside, 60%
    straddle.pose = testing::full_pose(780, 305, 4.5);
    Instance outside = testing::gt(3, {1000, 100, 50, 50});
    fr.instances = {inside, straddle, outside};

    const FrameRecord half = project_to_tile(left, fr, 0.5);
    REQUIRE(half.instances.size() == 2);
    CHECK(half.width == 800);
    CHECK(half.instances[0].bbox == inside.bbox);
    CHECK(*half.instances[0].pose == *inside.pose);
    CHECK(half.instances[1].bbox == BBox{770, 300, 30, 20});
    const Pose& p = *half.instances[1].pose;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const bool in = straddle.pose->keypoints[i].x < 800;
        CHECK(p.keypoints[i].labeled() == in);
    }
    CHECK(project_to_tile(left, fr, 0.7).instances.size() == 1);

    const FrameRecord right = project_to_tile(g.tiles[1], fr, 0.3);
    REQUIRE(right.instances.size() == 2);
    CHECK(right.instances[0].bbox == BBox{0, 300, 20, 20});
    CHECK(right.instances[1].bbox == BBox{200, 100, 50, 50});
}

TEST_CASE("merge_tiles back-projects and fuses duplicates") {
    const TileGrid g = build_grid(1600, 800, 800, 0.33);
    REQUIRE(g.tiles.size() == 3);
    const TileSpec& a = g.tiles[0];
    const TileSpec& b = g.tiles[1];
    CHECK(b.x0 == 536);

    // Frame box (600, 200, 100, 100) seen from both tiles; second copy slightly shifted.
    const BBox f1{600, 200, 100, 100}, f2{605, 200, 100, 100};
    CHECK(iou(f1, f2) > 0.9);
    TilePredictions ta{a, {testing::pred(1, apply_map(a.map, f1), 0.8)}};
    TilePredictions tb{b, {testing::pred(1, apply_map(b.map, f2), 0.9)}};
    const auto merged = merge_tiles({ta, tb});
    REQUIRE(merged.size() == 1);
    CHECK(*merged[0].score == 0.9);
    CHECK(merged[0].bbox == f2);

    TilePredictions single{a, {testing::pred(1, {10, 10, 20, 20}, 0.5), testing::pred(2, {100, 10, 20, 20}, 0.6)}};
    const auto one = merge_tiles({single});
    CHECK(one.size() == 2);

    TilePredictions far{b, {testing::pred(1, {700, 10, 30, 30}, 0.4)}};
    const auto both = merge_tiles({single, far});
    REQUIRE(both.size() == 3);
    bool found = false;
    for (const auto& i : both) found = found || i.bbox == BBox{1236, 10, 30, 30};
    CHECK(found);
}

TEST_CASE("tiling then merging is the identity on geometry") {
    Rng rng(17);
    const TileGrid g = build_grid(3840, 2160);
    std::vector<BBox> truth;
    for (int i = 0; i < 30; ++i) {
        truth.push_back({std::round(rng.uniform(0, 3700)), std::round(rng.uniform(0, 2050)), 40, 40});
    }
    std::vector<TilePredictions> per;
    for (const TileSpec& t : g.tiles) {
        TilePredictions tp{t, {}};
        std::int64_t id = 1;
        for (std::size_t k = 0; k < truth.size(); ++k) {
            if (intersection_area(truth[k], t.rect()) == truth[k].area()) {
                tp.predictions.push_back(testing::pred(id++, apply_map(t.map, truth[k]), 0.5 + 0.01 * double(k)));
            }
        }
        per.push_back(tp);
    }
    const auto merged = merge_tiles(per);
    std::vector<BBox> kept;
    for (const auto& m : merged) kept.push_back(m.bbox);
    // Ground-truth boxes that overlap each other would be suppressed; count only isolated ones.
    for (std::size_t k = 0; k < truth.size(); ++k) {
        bool isolated = true;
        for (std::size_t j = 0; j < truth.size(); ++j) isolated = isolated && (j == k || iou(truth[k], truth[j]) < 0.5);
        if (isolated) CHECK(std::find(kept.begin(), kept.end(), truth[k]) != kept.end());
    }
}

TEST_CASE("patch geometry examples") {
    const PatchSpec ps = build_patch({10, 20, 40, 60});
    CHECK(ps.side == doctest::Approx(72.0).epsilon(1e-12));
    CHECK(ps.center == Point{30, 50});
    CHECK(ps.origin().x == doctest::Approx(-6.0));
    CHECK(ps.origin().y == doctest::Approx(14.0));
    CHECK(ps.map.scale == doctest::Approx(100.0 / 72.0).epsilon(1e-12));
    const Point c = apply_map(ps.map, Point{30, 50});
    CHECK(std::abs(c.x - 50.0) < 1e-12);
    CHECK(std::abs(c.y - 50.0) < 1e-12);
    const Point back = apply_map(invert_map(ps.map), Point{50, 50});
    CHECK(std::abs(back.x - 30.0) < 1e-12);
    CHECK(std::abs(back.y - 50.0) < 1e-12);

    const PatchSpec sq = build_patch({0, 0, 100, 100});
    CHECK(sq.side == doctest::Approx(120.0));
    CHECK(sq.map.scale == doctest::Approx(100.0 / 120.0));

    const PatchSpec unit = build_patch({5, 5, 100, 100}, 0.0, 100);
    CHECK(unit.map.scale == 1.0);

    CHECK_THROWS_AS(build_patch({0, 0, 10, 10}, -1.0), ValidationError);
    CHECK_THROWS_AS(build_patch({0, 0, 10, 10}, 0.2, 0), ValidationError);
}

TEST_CASE("patch maps round-trip random poses") {
    Rng rng(99);
    double worst = 0.0;
    for (int n = 0; n < 10000; ++n) {
        const BBox b{rng.uniform(-50, 3800), rng.uniform(-50, 2100), rng.uniform(1, 200), rng.uniform(1, 200)};
        const PatchSpec ps = build_patch(b, rng.uniform(0.0, 1.0), 32 + int(rng.below(200)));
        Pose p;
        for (auto& k : p.keypoints) {
            k = {rng.uniform(b.x, b.right()), rng.uniform(b.y, b.bottom()), visibility_from_code(int(rng.below(3)))};
        }
        const Pose q = pose_to_frame(ps, pose_to_patch(ps, p));
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
            REQUIRE(q.keypoints[i].vis == p.keypoints[i].vis);
            if (!p.keypoints[i].labeled()) continue;
            worst = std::max({worst, std::abs(q.keypoints[i].x - p.keypoints[i].x),
                              std::abs(q.keypoints[i].y - p.keypoints[i].y)});
        }
    }
    CHECK(worst < 1e-6);
}
