#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "herdpose/core.hpp"
#include "herdpose/rng.hpp"

namespace herdpose::testing {

inline Instance gt(std::int64_t id, BBox b) {
    Instance i;
    i.id = id;
    i.bbox = b;
    i.source = Source::GroundTruth;
    return i;
}

inline Instance pred(std::int64_t id, BBox b, double score) {
    Instance i;
    i.id = id;
    i.bbox = b;
    i.score = score;
    i.source = Source::Prediction;
    return i;
}

inline Pose full_pose(double x0, double y0, double step = 3.0) {
    Pose p;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        p.keypoints[i] = {x0 + step * double(i), y0 + 0.5 * step * double(i), Visibility::Visible};
    }
    return p;
}

/// Boxes clustered in a small area so that overlaps are common.
inline BBox random_box(Rng& rng, double extent = 60.0, double min_side = 5.0, double max_side = 40.0) {
    return {std::round(rng.uniform(0.0, extent)), std::round(rng.uniform(0.0, extent)),
            std::round(rng.uniform(min_side, max_side)), std::round(rng.uniform(min_side, max_side))};
}

/// Scores drawn from a coarse grid so ties occur.
inline double random_score(Rng& rng) { return double(1 + rng.below(10)) / 10.0; }

}  // namespace herdpose::testing
