#include "herdpose/core.hpp"

#include <algorithm>
#include <cmath>

namespace herdpose {

double intersection_area(const BBox& a, const BBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double iou(const BBox& a, const BBox& b) {
    // Exact equality short-circuits so iou(a, a) is 1 without rounding.
    if (a == b) return 1.0;
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Visibility visibility_from_code(int code) {
    switch (code) {
        case 0: return Visibility::NotLabeled;
        case 1: return Visibility::Occluded;
        case 2: return Visibility::Visible;
        default: throw ValidationError("visibility code must be 0, 1 or 2, got " + std::to_string(code));
    }
}

std::size_t Pose::num_labeled() const {
    return static_cast<std::size_t>(
        std::count_if(keypoints.begin(), keypoints.end(), [](const Keypoint& k) { return k.labeled(); }));
}

Skeleton Skeleton::elephant(double falloff) {
    Skeleton s;
    s.names = {"forehead", "ear_base_l", "ear_base_r", "skull_base",
               "shoulders", "hips", "ear_tip_l", "ear_tip_r"};
    s.edges = {{0, 3}, {1, 3}, {2, 3}, {1, 6}, {2, 7}, {3, 4}, {4, 5}};
    s.falloff.assign(kNumKeypoints, falloff);
    return s;
}

void Skeleton::validate() const {
    const Skeleton ref = elephant();
    if (names.size() != ref.names.size()) {
        throw ValidationError("skeleton size mismatch: expected " + std::to_string(ref.names.size()) +
                              " keypoint names, got " + std::to_string(names.size()));
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] != ref.names[i]) {
            throw ValidationError("skeleton name mismatch at slot " + std::to_string(i) + ": expected '" +
                                  ref.names[i] + "', got '" + names[i] + "'");
        }
    }
    if (falloff.size() != names.size()) throw ValidationError("skeleton falloff size mismatch");
    for (double k : falloff) {
        if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("skeleton falloff constants must be > 0");
    }
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || std::size_t(a) >= names.size() || std::size_t(b) >= names.size()) {
            throw ValidationError("skeleton edge references unknown keypoint");
        }
    }
}

void Instance::validate() const {
    const std::string who = "instance " + std::to_string(id);
    if (!std::isfinite(bbox.x) || !std::isfinite(bbox.y) || !bbox.valid() || !std::isfinite(bbox.area())) {
        throw ValidationError(who + ": bbox must have w > 0 and h > 0");
    }
    if (source == Source::GroundTruth && score) throw ValidationError(who + ": ground truth carries a score");
    if (source == Source::Prediction) {
        if (!score) throw ValidationError(who + ": prediction has no score");
        if (!(*score >= 0.0 && *score <= 1.0)) {
            throw ValidationError(who + ": score outside [0,1]");
        }
    }
    if (pose) {
        for (const auto& k : pose->keypoints) {
            if (k.labeled() && (!std::isfinite(k.x) || !std::isfinite(k.y))) {
                throw ValidationError(who + ": non-finite keypoint coordinate");
            }
        }
    }
}

std::string to_string(const FrameKey& k) { return k.video_id + "#" + std::to_string(k.frame_index); }

void FrameRecord::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("frame " + to_string(key()) + ": non-positive dimensions");
    if (frame_index < 0) throw ValidationError("frame " + to_string(key()) + ": negative frame index");
    const BBox frame = bounds();
    for (const auto& inst : instances) {
        inst.validate();
        if (intersection_area(inst.bbox, frame) <= 0.0) {
            throw ValidationError("frame " + to_string(key()) + ": instance " + std::to_string(inst.id) +
                                  " lies outside the frame");
        }
    }
    for (std::size_t i = 0; i < instances.size(); ++i) {
        for (std::size_t j = i + 1; j < instances.size(); ++j) {
            if (instances[i].id == instances[j].id) {
                throw ValidationError("frame " + to_string(key()) + ": duplicate instance id " +
                                      std::to_string(instances[i].id));
            }
        }
    }
}

Point apply_map(const AffineMap& m, Point p) { return {p.x * m.scale + m.dx, p.y * m.scale + m.dy}; }

Keypoint apply_map(const AffineMap& m, const Keypoint& k) {
    const Point p = apply_map(m, Point{k.x, k.y});
    return {p.x, p.y, k.vis};
}

Pose apply_map(const AffineMap& m, const Pose& pose) {
    Pose out;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) out.keypoints[i] = apply_map(m, pose.keypoints[i]);
    return out;
}

BBox apply_map(const AffineMap& m, const BBox& b) {
    const Point p = apply_map(m, Point{b.x, b.y});
    return {p.x, p.y, b.w * m.scale, b.h * m.scale};
}

AffineMap invert_map(const AffineMap& m) {
    if (!(m.scale > 0.0) || !std::isfinite(m.scale)) {
        throw ValidationError("affine map scale must be > 0 to invert");
    }
    const double s = 1.0 / m.scale;
    return {s, -m.dx * s, -m.dy * s};
}

AffineMap compose(const AffineMap& outer, const AffineMap& inner) {
    return {outer.scale * inner.scale, inner.dx * outer.scale + outer.dx, inner.dy * outer.scale + outer.dy};
}

}  // namespace herdpose
