#include "herdpose/framing.hpp"

#include <algorithm>

#include "herdpose/eval.hpp"

namespace herdpose {

int tile_stride(int side, double overlap, StrideRounding rounding) {
    const double exact = double(side) * (1.0 - overlap);
    double s = 0.0;
    switch (rounding) {
        case StrideRounding::Nearest: s = std::round(exact); break;
        case StrideRounding::Down: s = std::floor(exact); break;
        case StrideRounding::Up: s = std::ceil(exact); break;
    }
    return std::max(1, int(s));
}

std::vector<int> tile_origins(int extent, int side, int stride) {
    if (extent <= side) return {0};
    std::vector<int> out{0};
    while (out.back() + side < extent) {
        const int next = std::min(out.back() + stride, extent - side);
        out.push_back(next);
    }
    return out;
}

TileGrid build_grid(int frame_w, int frame_h, int side, double overlap, StrideRounding rounding) {
    if (frame_w <= 0 || frame_h <= 0) throw ValidationError("frame dimensions must be positive");
    if (side <= 0) throw ValidationError("tile side must be positive");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ValidationError("tile overlap must lie in [0, 1)");

    TileGrid g;
    g.frame_w = frame_w;
    g.frame_h = frame_h;
    g.side = side;
    g.overlap = overlap;
    g.stride = tile_stride(side, overlap, rounding);
    const auto xs = tile_origins(frame_w, side, g.stride);
    const auto ys = tile_origins(frame_h, side, g.stride);
    g.cols = int(xs.size());
    g.rows = int(ys.size());
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            TileSpec t;
            t.row = r;
            t.col = c;
            t.x0 = xs[std::size_t(c)];
            t.y0 = ys[std::size_t(r)];
            t.side = side;
            t.width = std::min(side, frame_w);
            t.height = std::min(side, frame_h);
            t.map = AffineMap::translation(-t.x0, -t.y0);
            g.tiles.push_back(t);
        }
    }
    return g;
}

FrameRecord project_to_tile(const TileSpec& tile, const FrameRecord& fr, double min_visible_fraction) {
    FrameRecord out;
    out.image_id = fr.image_id;
    out.file_name = fr.file_name;
    out.video_id = fr.video_id;
    out.frame_index = fr.frame_index;
    out.width = tile.width;
    out.height = tile.height;

    const BBox rect = tile.rect();
    for (const auto& inst : fr.instances) {
        const double inside = intersection_area(inst.bbox, rect);
        if (inside <= 0.0 || inside / inst.bbox.area() < min_visible_fraction) continue;

        Instance t = inst;
        const double x1 = std::max(inst.bbox.x, rect.x);
        const double y1 = std::max(inst.bbox.y, rect.y);
        const double x2 = std::min(inst.bbox.right(), rect.right());
        const double y2 = std::min(inst.bbox.bottom(), rect.bottom());
        t.bbox = apply_map(tile.map, BBox::from_corners(x1, y1, x2, y2));
        if (inst.pose) {
            Pose p = apply_map(tile.map, *inst.pose);
            for (auto& k : p.keypoints) {
                const bool outside = k.x < 0.0 || k.y < 0.0 || k.x > tile.width || k.y > tile.height;
                if (!k.labeled() || outside) k = Keypoint{};
            }
            t.pose = p;
        }
        out.instances.push_back(std::move(t));
    }
    return out;
}

std::vector<Instance> merge_tiles(const std::vector<TilePredictions>& per_tile, double nms_iou) {
    std::vector<Instance> all;
    for (const auto& tp : per_tile) {
        const AffineMap back = invert_map(tp.tile.map);
        for (const auto& p : tp.predictions) {
            Instance f = p;
            f.bbox = apply_map(back, p.bbox);
            if (p.pose) f.pose = apply_map(back, *p.pose);
            all.push_back(std::move(f));
        }
    }
    // Ids from different tiles may collide; renumber in input order so the
    // NMS tie-break stays well defined.
    for (std::size_t i = 0; i < all.size(); ++i) all[i].id = std::int64_t(i);
    return nms(all, nms_iou);
}

PatchSpec build_patch(const BBox& b, double margin, int out_size) {
    if (!b.valid()) throw ValidationError("patch source bbox must have w > 0 and h > 0");
    if (!(1.0 + margin > 0.0)) throw ValidationError("patch margin must exceed -1");
    if (out_size <= 0) throw ValidationError("patch out_size must be positive");
    PatchSpec ps;
    ps.source = b;
    ps.center = b.center();
    ps.side = (1.0 + margin) * b.max_side();
    ps.out_size = out_size;
    const double scale = double(out_size) / ps.side;
    const Point o = ps.origin();
    ps.map = {scale, -o.x * scale, -o.y * scale};
    return ps;
}

Pose pose_to_patch(const PatchSpec& ps, const Pose& pose_in_frame) { return apply_map(ps.map, pose_in_frame); }

Pose pose_to_frame(const PatchSpec& ps, const Pose& pose_in_patch) {
    return apply_map(invert_map(ps.map), pose_in_patch);
}

}  // namespace herdpose
