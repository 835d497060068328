#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace herdpose {

/// Raised when an input violates a domain invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box in continuous frame pixels: top-left corner plus extent.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    double max_side() const { return w > h ? w : h; }
    Point center() const { return {x + 0.5 * w, y + 0.5 * h}; }
    bool valid() const { return w > 0.0 && h > 0.0; }

    static BBox from_corners(double x1, double y1, double x2, double y2) {
        return {x1, y1, x2 - x1, y2 - y1};
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Area of the overlap of two boxes; zero when they do not touch.
double intersection_area(const BBox& a, const BBox& b);

/// Intersection over union. Symmetric, in [0,1], exactly 1 for identical boxes.
double iou(const BBox& a, const BBox& b);

/// COCO integer codes: 0 not labeled, 1 labeled but occluded, 2 visible.
enum class Visibility : std::uint8_t { NotLabeled = 0, Occluded = 1, Visible = 2 };

Visibility visibility_from_code(int code);
inline int visibility_code(Visibility v) { return static_cast<int>(v); }

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    Visibility vis = Visibility::NotLabeled;

    bool labeled() const { return vis != Visibility::NotLabeled; }

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

inline constexpr std::size_t kNumKeypoints = 8;

/// Fixed eight-slot pose; a missing annotation is a NotLabeled slot.
struct Pose {
    std::array<Keypoint, kNumKeypoints> keypoints{};

    std::size_t num_labeled() const;

    friend bool operator==(const Pose&, const Pose&) = default;
};

struct Skeleton {
    std::vector<std::string> names;
    std::vector<std::pair<int, int>> edges;
    std::vector<double> falloff;

    /// forehead, ear_base_l, ear_base_r, skull_base, shoulders, hips, ear_tip_l, ear_tip_r
    static Skeleton elephant(double falloff = 0.1);

    std::size_t size() const { return names.size(); }
    /// Throws ValidationError naming the first broken invariant.
    void validate() const;

    friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

enum class Source : std::uint8_t { GroundTruth, Prediction };

struct Instance {
    std::int64_t id = 0;
    BBox bbox;
    std::optional<Pose> pose;
    std::optional<double> score;
    Source source = Source::GroundTruth;
    /// Identity of the individual across frames when known (annotated or tracker-assigned).
    std::optional<std::int64_t> track_id;

    void validate() const;

    friend bool operator==(const Instance&, const Instance&) = default;
};

struct FrameKey {
    std::string video_id;
    std::int64_t frame_index = 0;

    auto operator<=>(const FrameKey&) const = default;
    bool operator==(const FrameKey&) const = default;
};

std::string to_string(const FrameKey& k);

struct FrameRecord {
    std::int64_t image_id = 0;
    std::string file_name;
    std::string video_id;
    std::int64_t frame_index = 0;
    int width = 0;
    int height = 0;
    std::vector<Instance> instances;

    FrameKey key() const { return {video_id, frame_index}; }
    BBox bounds() const { return {0.0, 0.0, double(width), double(height)}; }
    void validate() const;

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// p -> p * scale + (dx, dy)
struct AffineMap {
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;

    static AffineMap identity() { return {}; }
    static AffineMap translation(double dx, double dy) { return {1.0, dx, dy}; }

    friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

Point apply_map(const AffineMap& m, Point p);
Keypoint apply_map(const AffineMap& m, const Keypoint& k);
Pose apply_map(const AffineMap& m, const Pose& pose);
BBox apply_map(const AffineMap& m, const BBox& b);
AffineMap invert_map(const AffineMap& m);
/// Composition: first `inner`, then `outer`.
AffineMap compose(const AffineMap& outer, const AffineMap& inner);

}  // namespace herdpose
