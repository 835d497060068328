#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "herdpose/core.hpp"
#include "herdpose/io.hpp"

namespace herdpose {

/// Annotated frames grouped by video. Immutable once validated.
struct Dataset {
    std::vector<FrameRecord> frames;
    Skeleton skeleton = Skeleton::elephant();
    std::string digest;
    /// Free-form provenance block written under the top-level "info" key.
    Json info = Json::object();

    const FrameRecord* find(const FrameKey& key) const;
    const FrameRecord* find_image(std::int64_t image_id) const;
    std::vector<std::string> video_ids() const;
    std::size_t num_instances() const;

    /// Checks every invariant eagerly; throws ValidationError on the first failure.
    void validate() const;

    bool operator==(const Dataset& o) const {
        return frames == o.frames && skeleton == o.skeleton;
    }
};

struct Prediction {
    std::string video_id;
    std::int64_t frame_index = 0;
    std::int64_t image_id = 0;
    Instance instance;

    FrameKey key() const { return {video_id, frame_index}; }

    friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionSet {
    std::vector<Prediction> entries;
    std::string digest;
    Json info = Json::object();

    /// Predictions grouped by frame key, file order preserved inside each group.
    std::map<FrameKey, std::vector<Instance>> by_frame() const;

    bool operator==(const PredictionSet& o) const { return entries == o.entries; }
};

struct SplitConfig {
    std::vector<std::string> test_videos;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct SplitAssignment {
    std::vector<FrameKey> train;
    std::vector<FrameKey> val;
    std::set<std::string> test_videos;
    std::vector<FrameKey> test;

    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

Dataset dataset_from_json(const Json& j, const std::string& origin = "annotations");
Json dataset_to_json(const Dataset& ds);
Dataset load_annotations(const std::filesystem::path& path);
void save_annotations(const Dataset& ds, const std::filesystem::path& path);

/// Accepts either a bare JSON list or {"info": ..., "predictions": [...]}.
PredictionSet predictions_from_json(const Json& j, const Dataset& ds, const std::string& origin = "predictions");
Json predictions_to_json(const PredictionSet& ps);
PredictionSet load_predictions(const std::filesystem::path& path, const Dataset& ds);
void save_predictions(const PredictionSet& ps, const std::filesystem::path& path);

/// Flat COCO keypoint triplets, 3 x 8 values.
Json pose_to_json(const Pose& pose);
Pose pose_from_json(const Json& flat, const std::string& who);
Json bbox_to_json(const BBox& b);
BBox bbox_from_json(const Json& j, const std::string& who);

/// Whole test videos are held out first; the remaining frames are shuffled
/// by `seed` and the first round(val_fraction * n) go to validation.
SplitAssignment make_split(const Dataset& ds, const SplitConfig& cfg);
SplitConfig split_config_from_json(const Json& j);
Json split_to_json(const SplitAssignment& s, const SplitConfig& cfg);

}  // namespace herdpose
