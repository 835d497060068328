#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "herdpose/core.hpp"
#include "herdpose/framing.hpp"
#include "herdpose/io.hpp"

namespace herdpose {

struct TrackerConfig {
    double iou_gate = 0.3;
    double lambda_app = 0.0;
    int confirm_hits = 3;
    int max_age = 5;
    /// Boxes whose longer side is below this (pixels) neither spawn tracks nor get exported.
    double min_size = 50.0;
    double pos_sigma = 1.0;   // px, process noise on the centre
    double vel_sigma = 0.5;   // px/frame, process noise on the velocity
    double meas_sigma = 1.0;  // px
    double init_vel_sigma = 10.0;
    double patch_margin = 0.2;
    int patch_out_size = 100;
    std::size_t gallery_size = 100;
};

Json tracker_config_to_json(const TrackerConfig& cfg);
TrackerConfig tracker_config_from_json(const Json& j, TrackerConfig base = {});

/// Constant-velocity filter over (cx, cy, area, aspect) with velocities on
/// the first three; aspect (w/h) is carried without a rate.
class BoxKalman {
public:
    using State = Eigen::Matrix<double, 7, 1>;
    using Cov = Eigen::Matrix<double, 7, 7>;
    using Meas = Eigen::Matrix<double, 4, 1>;

    BoxKalman() = default;
    BoxKalman(const BBox& first, const TrackerConfig& cfg);

    void predict();
    void update(const BBox& observed);

    BBox box() const;
    const State& state() const { return x_; }
    const Cov& covariance() const { return p_; }

    static Meas to_measurement(const BBox& b);
    static BBox to_box(double cx, double cy, double area, double aspect);

private:
    double side_scale() const;

    State x_ = State::Zero();
    Cov p_ = Cov::Identity();
    double pos_sigma_ = 1.0;
    double vel_sigma_ = 0.5;
    double meas_sigma_ = 1.0;
};

enum class TrackStatus { Tentative, Confirmed, Deleted };

std::string to_string(TrackStatus s);

struct TrackObservation {
    std::int64_t frame_index = 0;
    BBox box;
    std::optional<std::int64_t> detection_id;  // none on a missed frame (box is the prediction)
};

struct Track {
    std::int64_t track_id = 0;
    BoxKalman filter;
    TrackStatus status = TrackStatus::Tentative;
    bool ever_confirmed = false;
    int hits = 0;
    int misses_in_a_row = 0;
    std::vector<TrackObservation> history;
    std::vector<std::vector<double>> gallery;
    BBox predicted;
};

/// Instance -> unit-norm appearance feature.
using EmbeddingProvider = std::function<std::vector<double>(const Instance&)>;

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Minimum-cost assignment of rows to columns for a rectangular matrix
/// (shortest augmenting path). Returns the column for each row, or -1 when a
/// row is left out because there are more rows than columns.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct Association {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (track index, detection index)
    std::vector<std::size_t> unmatched_tracks;
    std::vector<std::size_t> unmatched_detections;
    double total_cost = 0.0;  // over the optimal assignment, before gating
};

/// Cost (1 - IoU) + lambda_app * (1 - cosine). Pairs below the IoU gate are
/// dropped after the global assignment is solved.
Association associate(const std::vector<BBox>& predicted, const std::vector<Instance>& dets, double iou_gate = 0.3,
                      double lambda_app = 0.0, const std::vector<std::vector<double>>* track_features = nullptr,
                      const std::vector<std::vector<double>>* det_features = nullptr);

class Tracker {
public:
    explicit Tracker(TrackerConfig cfg = {}, EmbeddingProvider embed = nullptr);

    /// Frames must arrive with strictly increasing indices; skipped indices
    /// count as frames without detections.
    void step(std::int64_t frame_index, const std::vector<Instance>& detections);

    /// Active (not deleted) tracks.
    std::vector<const Track*> active() const;
    /// Every track ever created, deleted ones included, ordered by id.
    const std::vector<Track>& tracks() const { return tracks_; }
    /// Detection id -> track id for the most recent step.
    const std::map<std::int64_t, std::int64_t>& last_assignment() const { return last_assignment_; }
    const TrackerConfig& config() const { return cfg_; }

private:
    void advance(Track& t);
    void mark_missed(Track& t, std::int64_t frame_index);

    TrackerConfig cfg_;
    EmbeddingProvider embed_;
    std::vector<Track> tracks_;
    std::int64_t next_id_ = 1;
    std::optional<std::int64_t> last_frame_;
    std::map<std::int64_t, std::int64_t> last_assignment_;
};

struct SegmentFrame {
    std::int64_t frame_index = 0;
    std::int64_t detection_id = 0;
    BBox box;
    PatchSpec patch;
};

struct Segment {
    std::string video_id;
    std::int64_t track_id = 0;
    std::int64_t first_frame = 0;
    std::int64_t last_frame = 0;
    std::vector<SegmentFrame> frames;
};

struct SegmentManifest {
    std::vector<Segment> segments;
    Json meta = Json::object();
};

/// Tracks that reached Confirmed and whose every matched detection has a
/// longer side of at least min_size. Missed frames are left out.
SegmentManifest export_manifest(const Tracker& tracker, const std::string& video_id);

Json segment_to_json(const Segment& s);
/// Header line with the metadata, then one line per segment.
std::string manifest_to_jsonl(const SegmentManifest& m);

}  // namespace herdpose
