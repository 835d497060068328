#pragma once

#include <cmath>
#include <vector>

#include "herdpose/core.hpp"

namespace herdpose {

/// One window of a tile grid. `width`/`height` equal `side` unless the frame
/// itself is narrower than a tile along that axis.
struct TileSpec {
    int row = 0;
    int col = 0;
    int x0 = 0;
    int y0 = 0;
    int side = 0;
    int width = 0;
    int height = 0;
    AffineMap map;  // frame -> tile, always a pure translation

    BBox rect() const { return {double(x0), double(y0), double(width), double(height)}; }

    friend bool operator==(const TileSpec&, const TileSpec&) = default;
};

enum class StrideRounding { Nearest, Down, Up };

struct TileGrid {
    int frame_w = 0;
    int frame_h = 0;
    int side = 0;
    double overlap = 0.0;
    int stride = 0;
    int rows = 0;
    int cols = 0;
    std::vector<TileSpec> tiles;  // row-major
};

int tile_stride(int side, double overlap, StrideRounding rounding = StrideRounding::Nearest);

/// Window origins along one axis: walk by `stride`, clamp the last window to
/// end exactly at the frame edge.
std::vector<int> tile_origins(int extent, int side, int stride);

TileGrid build_grid(int frame_w, int frame_h, int side = 800, double overlap = 0.33,
                    StrideRounding rounding = StrideRounding::Nearest);

/// Annotations of `fr` re-expressed in tile coordinates. Instances keeping at
/// least `min_visible_fraction` of their box area inside the tile survive with
/// the box clipped; keypoints falling outside become NotLabeled.
FrameRecord project_to_tile(const TileSpec& tile, const FrameRecord& fr, double min_visible_fraction = 0.5);

struct TilePredictions {
    TileSpec tile;
    std::vector<Instance> predictions;  // tile coordinates
};

/// Back-projects per-tile detections to frame space and removes the
/// duplicates that overlapping windows create.
std::vector<Instance> merge_tiles(const std::vector<TilePredictions>& per_tile, double nms_iou = 0.5);

struct PatchSpec {
    BBox source;
    Point center;
    double side = 0.0;
    int out_size = 100;
    AffineMap map;  // frame -> patch

    Point origin() const { return {center.x - 0.5 * side, center.y - 0.5 * side}; }
};

/// Square crop around `b` whose edge is (1 + margin) * max(w, h), resampled
/// to out_size x out_size. The square may extend past the frame edge.
PatchSpec build_patch(const BBox& b, double margin = 0.2, int out_size = 100);

Pose pose_to_patch(const PatchSpec& ps, const Pose& pose_in_frame);
Pose pose_to_frame(const PatchSpec& ps, const Pose& pose_in_patch);

}  // namespace herdpose
