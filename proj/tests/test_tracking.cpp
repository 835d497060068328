#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <set>

#include "helpers.hpp"
#include "herdpose/rng.hpp"
#include "herdpose/tracking.hpp"
#include "oracles.hpp"

using namespace herdpose;
using testing::pred;

namespace {

std::vector<Instance> one_det(std::int64_t id, BBox b) { return {pred(id, b, 0.9)}; }

double assignment_cost(const std::vector<std::vector<double>>& cost, const std::vector<int>& cols) {
    double total = 0.0;
    for (std::size_t r = 0; r < cols.size(); ++r) {
        if (cols[r] >= 0) total += cost[r][std::size_t(cols[r])];
    }
    return total;
}

}  // namespace

TEST_CASE("kalman prediction examples") {
    TrackerConfig cfg;
    BoxKalman still({100, 100, 60, 40}, cfg);
    still.predict();
    const BBox b = still.box();
    CHECK(std::abs(b.x - 100) < 1e-9);
    CHECK(std::abs(b.y - 100) < 1e-9);
    CHECK(std::abs(b.w - 60) < 1e-9);
    CHECK(std::abs(b.h - 40) < 1e-9);

    // Drive the filter to a steady 5 px/frame drift, then check one prediction step.
    BoxKalman moving({0, 0, 60, 40}, cfg);
    for (int k = 1; k <= 60; ++k) {
        moving.predict();
        moving.update({5.0 * k, 0, 60, 40});
    }
    const double cx = moving.state()(0);
    CHECK(moving.state()(4) == doctest::Approx(5.0).epsilon(1e-3));
    moving.predict();
    CHECK(moving.state()(0) - cx == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("predicted boxes converge on constant-velocity motion") {
    TrackerConfig cfg;
    const BBox start{200, 300, 64, 48};
    const double vx = 3.0, vy = -1.5;
    BoxKalman kf(start, cfg);
    double last = 0.0;
    for (int k = 1; k <= 10; ++k) {
        kf.predict();
        const BBox truth{start.x + vx * k, start.y + vy * k, start.w, start.h};
        last = iou(kf.box(), truth);
        kf.update(truth);
    }
    CHECK(last > 0.95);
}

TEST_CASE("covariance stays symmetric positive semidefinite") {
    TrackerConfig cfg;
    Rng rng(4);
    BoxKalman kf({500, 500, 80, 50}, cfg);
    for (int k = 0; k < 1000; ++k) {
        kf.predict();
        if (rng.uniform() < 0.8) {
            kf.update({500 + 2.0 * k + rng.normal() * 3, 500 + rng.normal() * 3, 80 + rng.normal() * 4,
                       50 + rng.normal() * 4});
        }
        const auto& p = kf.covariance();
        REQUIRE((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + p.cwiseAbs().maxCoeff()));
        Eigen::SelfAdjointEigenSolver<BoxKalman::Cov> es(p);
        REQUIRE(es.eigenvalues().minCoeff() >= -1e-9 * es.eigenvalues().maxCoeff());
    }
}

TEST_CASE("assignment matches brute force on random matrices") {
    Rng rng(31);
    for (int trial = 0; trial < 3000; ++trial) {
        const std::size_t rows = 1 + rng.below(6), cols = 1 + rng.below(6);
        std::vector<std::vector<double>> cost(rows, std::vector<double>(cols));
        for (auto& r : cost) {
            for (auto& c : r) c = trial % 3 == 0 ? double(rng.below(4)) : rng.uniform(0, 2);
        }
        const auto sol = solve_assignment(cost);
        REQUIRE(sol.size() == rows);
        std::set<int> used;
        std::size_t assigned = 0;
        for (int c : sol) {
            if (c < 0) continue;
            ++assigned;
            CHECK(used.insert(c).second);
        }
        CHECK(assigned == std::min(rows, cols));
        CHECK(std::abs(assignment_cost(cost, sol) - oracle::min_assignment_cost(cost)) < 1e-9);
    }
}

TEST_CASE("association prefers the global optimum and gates low overlap") {
    // Greedy takes the best single pair (t0, d0) and leaves t1 with d1 at IoU 0.6.
    const std::vector<BBox> tracks{{0, 0, 10, 10}, {1.5, 0, 10, 10}};
    const std::vector<Instance> dets{pred(1, {0.5, 0, 10, 10}, 0.9), pred(2, {-1, 0, 10, 10}, 0.9)};
    const Association a = associate(tracks, dets, 0.0);
    std::vector<std::vector<double>> cost(2, std::vector<double>(2));
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) cost[i][j] = 1.0 - iou(tracks[i], dets[j].bbox);
    }
    CHECK(std::abs(a.total_cost - oracle::min_assignment_cost(cost)) < 1e-12);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(a.pairs[1] == std::pair<std::size_t, std::size_t>{1, 0});

    const Association one = associate({{0, 0, 10, 10}}, {pred(1, {0, 0, 10, 9}, 0.5)});
    CHECK(one.pairs.size() == 1);

    const Association gated = associate({{0, 0, 10, 10}}, {pred(1, {8, 0, 10, 10}, 0.5)});
    CHECK(gated.pairs.empty());
    CHECK(gated.unmatched_tracks == std::vector<std::size_t>{0});
    CHECK(gated.unmatched_detections == std::vector<std::size_t>{0});
}

TEST_CASE("association total cost equals brute force over random scenes") {
    Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<BBox> tracks;
        std::vector<Instance> dets;
        const std::size_t nt = rng.below(7), nd = rng.below(7);
        for (std::size_t i = 0; i < nt; ++i) tracks.push_back(testing::random_box(rng));
        for (std::size_t i = 0; i < nd; ++i) dets.push_back(pred(std::int64_t(i + 1), testing::random_box(rng), 0.5));
        const Association a = associate(tracks, dets, 0.3);
        std::vector<std::vector<double>> cost(nt, std::vector<double>(nd));
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < nd; ++j) cost[i][j] = 1.0 - iou(tracks[i], dets[j].bbox);
        }
        if (nt > 0 && nd > 0) CHECK(std::abs(a.total_cost - oracle::min_assignment_cost(cost)) < 1e-9);
        for (auto [t, d] : a.pairs) CHECK(iou(tracks[t], dets[d].bbox) >= 0.3);
        CHECK(a.pairs.size() + a.unmatched_tracks.size() == nt);
        CHECK(a.pairs.size() + a.unmatched_detections.size() == nd);
    }
}

TEST_CASE("appearance term breaks geometric ties") {
    const std::vector<BBox> tracks{{0, 0, 10, 10}, {0, 0, 10, 10}};
    const std::vector<Instance> dets{pred(1, {0, 0, 10, 10}, 0.9), pred(2, {0, 0, 10, 10}, 0.9)};
    const std::vector<std::vector<double>> tf{{0, 1}, {1, 0}}, df{{1, 0}, {0, 1}};
    const Association a = associate(tracks, dets, 0.3, 1.0, &tf, &df);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0].second == 1);
    CHECK(a.pairs[1].second == 0);
    CHECK(cosine_similarity({1, 0}, {0, 1}) == 0.0);
    CHECK(cosine_similarity({2, 0}, {3, 0}) == doctest::Approx(1.0));
}

TEST_CASE("single object over 100 frames yields one confirmed track") {
    Tracker tr;
    for (int f = 0; f < 100; ++f) tr.step(f, one_det(f + 1, {100.0 + 2 * f, 200, 80, 60}));
    REQUIRE(tr.tracks().size() == 1);
    CHECK(tr.tracks()[0].status == TrackStatus::Confirmed);
    CHECK(tr.tracks()[0].history.size() == 100);
    const SegmentManifest m = export_manifest(tr, "v");
    REQUIRE(m.segments.size() == 1);
    CHECK(m.segments[0].first_frame == 0);
    CHECK(m.segments[0].last_frame == 99);
    CHECK(m.segments[0].frames.size() == 100);
}

TEST_CASE("dropouts within max_age keep the id, longer ones split it") {
    auto run = [](int gap) {
        Tracker tr;
        std::int64_t id = 1;
        for (int f = 0; f < 40; ++f) {
            if (f >= 10 && f < 10 + gap) {
                tr.step(f, {});
                continue;
            }
            tr.step(f, one_det(id++, {300.0 + f, 300, 80, 60}));
        }
        return tr;
    };
    const Tracker three = run(3);
    CHECK(three.tracks().size() == 1);
    CHECK(three.tracks()[0].status == TrackStatus::Confirmed);

    const Tracker six = run(6);
    REQUIRE(six.tracks().size() == 2);
    CHECK(six.tracks()[0].status == TrackStatus::Deleted);
    CHECK(six.tracks()[1].status == TrackStatus::Confirmed);
    CHECK(export_manifest(six, "v").segments.size() == 2);

    // Skipped frame indices count as misses too.
    Tracker skip;
    for (int f = 0; f < 5; ++f) skip.step(f, one_det(f + 1, {300, 300, 80, 60}));
    skip.step(11, one_det(99, {300, 300, 80, 60}));
    CHECK(skip.tracks().size() == 2);

    Tracker back;
    back.step(3, {});
    CHECK_THROWS_AS(back.step(3, {}), ValidationError);
}

TEST_CASE("size gate on spawn and export") {
    Tracker small;
    for (int f = 0; f < 10; ++f) small.step(f, one_det(f + 1, {100, 100, 40, 45}));
    CHECK(small.tracks().empty());
    CHECK(export_manifest(small, "v").segments.empty());

    Tracker shrinking;
    for (int f = 0; f < 10; ++f) {
        const double s = f < 3 ? 55.0 : 45.0;
        shrinking.step(f, one_det(f + 1, {100, 100, s - 5, s}));
    }
    REQUIRE(shrinking.tracks().size() == 1);
    CHECK(shrinking.tracks()[0].ever_confirmed);
    CHECK(export_manifest(shrinking, "v").segments.empty());

    Tracker wide;
    for (int f = 0; f < 10; ++f) wide.step(f, one_det(f + 1, {100, 100, 60, 30}));
    const SegmentManifest m = export_manifest(wide, "v");
    REQUIRE(m.segments.size() == 1);
    CHECK(m.segments[0].frames[0].patch.side == doctest::Approx(72.0));

    Tracker tentative;
    tentative.step(0, one_det(1, {100, 100, 60, 60}));
    tentative.step(1, one_det(2, {100, 100, 60, 60}));
    CHECK(export_manifest(tentative, "v").segments.empty());
}

TEST_CASE("tracking is deterministic and ids are never reused") {
    auto run = [] {
        Rng rng(77);
        Tracker tr;
        std::int64_t id = 1;
        for (int f = 0; f < 60; ++f) {
            std::vector<Instance> dets;
            for (int k = 0; k < 4; ++k) {
                if (rng.uniform() < 0.15) continue;
                dets.push_back(pred(id++, {200.0 * k + f + rng.normal(), 100 + rng.normal(), 60, 55}, 0.8));
            }
            tr.step(f, dets);
        }
        return manifest_to_jsonl(export_manifest(tr, "v"));
    };
    const std::string a = run();
    CHECK(a == run());
    CHECK(a.find("\"track_id\"") != std::string::npos);
}
