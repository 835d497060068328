#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "herdpose/core.hpp"
#include "herdpose/ingest.hpp"
#include "herdpose/io.hpp"

namespace herdpose {

struct ScoreModel {
    double tp_alpha = 8.0;
    double tp_beta = 2.0;
    double fp_alpha = 2.0;
    double fp_beta = 8.0;
};

struct Corruption {
    double bbox_jitter = 0.0;       // px, per box coordinate
    double keypoint_jitter = 0.0;   // px, per keypoint axis
    double false_positives = 0.0;   // expected count per frame
    double miss_rate = 0.0;         // probability a true animal goes undetected
    ScoreModel scores;
};

/// A contiguous run of frames on which one animal is never detected.
struct Dropout {
    int animal = 0;
    std::int64_t first_frame = 0;
    std::int64_t length = 0;
};

struct SynthScenario {
    std::uint64_t seed = 42;
    int n_animals = 10;
    int frame_w = 3840;
    int frame_h = 2160;
    int n_frames = 20;
    std::string video_id = "synth";
    /// Body length range (px). Aerial footage puts calves near 8 px and adults near 70 px.
    double size_min = 8.0;
    double size_max = 70.0;
    double speed_min = 0.0;  // px/frame
    double speed_max = 2.0;
    double heading_noise = 0.0;  // rad/frame, sigma
    double occluded_rate = 0.0;  // probability an ear keypoint is marked occluded
    Corruption corruption;
    std::vector<Dropout> dropouts;

    void validate() const;
};

Json scenario_to_json(const SynthScenario& s);
SynthScenario scenario_from_json(const Json& j, SynthScenario base = {});

inline constexpr std::int64_t kFalsePositive = -1;

struct SynthOutput {
    Dataset ground_truth;
    PredictionSet predictions;
    /// Prediction id -> true animal id, or kFalsePositive.
    std::map<std::int64_t, std::int64_t> correspondence;
};

/// Pure function of the scenario: same input, byte-identical files.
SynthOutput generate(const SynthScenario& s);

Json correspondence_to_json(const SynthOutput& out);

struct OracleMetrics {
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    /// Per keypoint slot, distances between corresponding prediction and ground truth.
    std::vector<std::vector<double>> distances;

    double rmse(std::size_t slot) const;
    /// Pooled over all slots.
    double rmse_all() const;
    std::size_t num_distances() const;
};

/// Evaluation quantities read straight off the correspondence table,
/// bypassing IoU matching. Only Visible ground-truth keypoints contribute.
OracleMetrics oracle_metrics(const SynthOutput& out);

/// Body-frame keypoint template in units of body length (forward, lateral).
const std::array<Point, kNumKeypoints>& keypoint_template();

}  // namespace herdpose
