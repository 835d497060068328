#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "herdpose/core.hpp"
#include "herdpose/ingest.hpp"

namespace herdpose {

// ---------------------------------------------------------------------------
// De-duplication and matching
// ---------------------------------------------------------------------------

/// Greedy non-maximum suppression. Output is ordered by descending score
/// (ties: ascending id) and contains no pair with IoU >= iou_threshold.
std::vector<Instance> nms(std::vector<Instance> preds, double iou_threshold = 0.5);

/// Descending score, then ascending id. Used everywhere a confidence ranking is needed.
void sort_by_confidence(std::vector<Instance>& v);

struct MatchPair {
    std::int64_t prediction_id = 0;
    std::int64_t ground_truth_id = 0;
    double iou = 0.0;

    friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
    std::vector<MatchPair> pairs;  // in prediction confidence order
    std::vector<std::int64_t> unmatched_predictions;
    std::vector<std::int64_t> unmatched_ground_truths;

    friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

/// Predictions, most confident first, each claim the highest-IoU unclaimed
/// ground truth with IoU >= iou_threshold (IoU ties: lower ground-truth id).
MatchResult match(const std::vector<Instance>& preds, const std::vector<Instance>& gts, double iou_threshold = 0.5);

// ---------------------------------------------------------------------------
// Detection metrics
// ---------------------------------------------------------------------------

struct FrameEval {
    FrameKey key;
    std::vector<Instance> ground_truths;
    std::vector<Instance> predictions;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double score = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points;  // one per rank cut
    double ap = 0.0;
    std::size_t num_ground_truths = 0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
};

/// Confidence-ranked TP/FP labelling through `match` on every frame, then the
/// all-point interpolated area under the precision-recall curve.
/// Throws ValidationError when there is no ground truth at all.
PrCurve average_precision(const std::vector<FrameEval>& frames, double iou_threshold);

/// 0.30, 0.35, ..., 0.95
std::vector<double> default_sweep();

/// Arithmetic mean of AP over `thresholds`.
double map_sweep(const std::vector<FrameEval>& frames, const std::vector<double>& thresholds);

// ---------------------------------------------------------------------------
// Keypoint metrics
// ---------------------------------------------------------------------------

enum class AverageWeighting { Support, Unweighted };

struct KeypointConfig {
    double pck_alpha = 0.2;
    bool include_occluded = false;
    AverageWeighting weighting = AverageWeighting::Support;
};

/// A metric is absent (nullopt) when the slot has no support.
struct KeypointMetricRow {
    std::string name;
    std::optional<double> rmse;
    std::optional<double> pck;
    std::optional<double> oks;
    std::size_t support = 0;
};

struct KeypointReport {
    std::vector<KeypointMetricRow> rows;  // one per skeleton slot
    KeypointMetricRow average;
    /// Per pair: mean OKS term over its scored slots; then averaged over pairs.
    std::optional<double> instance_oks;
    std::size_t scored_pairs = 0;
};

/// Per-slot running sums. Frames are accumulated independently and merged in
/// a fixed order so the result does not depend on scheduling.
class KeypointAccumulator {
public:
    KeypointAccumulator(const Skeleton& skeleton, const KeypointConfig& cfg);

    void add(const MatchResult& matches, const std::vector<Instance>& preds, const std::vector<Instance>& gts);
    void merge(const KeypointAccumulator& other);
    KeypointReport finish() const;

private:
    struct Slot {
        double sum_sq = 0.0;
        double sum_oks = 0.0;
        std::size_t hits = 0;
        std::size_t support = 0;
    };

    Skeleton skeleton_;
    KeypointConfig cfg_;
    std::vector<Slot> slots_;
    double sum_instance_oks_ = 0.0;
    std::size_t scored_pairs_ = 0;
};

KeypointReport keypoint_metrics(const MatchResult& matches, const std::vector<Instance>& preds,
                                const std::vector<Instance>& gts, const Skeleton& skeleton,
                                const KeypointConfig& cfg = {});

// ---------------------------------------------------------------------------
// End-to-end evaluation
// ---------------------------------------------------------------------------

struct EvalConfig {
    double nms_iou = 0.5;
    double match_iou = 0.5;
    std::vector<double> sweep = default_sweep();
    KeypointConfig keypoints;
    /// Optional override of the skeleton's per-slot OKS falloff constants.
    std::vector<double> falloff;
    bool apply_nms = true;
};

struct ThresholdAp {
    double threshold = 0.0;
    double ap = 0.0;
};

struct MetricReport {
    double map50 = 0.0;
    double map_sweep = 0.0;
    std::vector<ThresholdAp> sweep;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    KeypointReport keypoints;
    Json meta = Json::object();
};

/// Per frame: NMS, match at match_iou, keypoint accumulation; detection AP at
/// 0.5 and over the sweep. `workers` only changes speed, never the result.
MetricReport evaluate(const Dataset& ds, const PredictionSet& preds, const EvalConfig& cfg, int workers = 1);

std::vector<FrameEval> build_frame_evals(const Dataset& ds, const PredictionSet& preds, bool apply_nms,
                                         double nms_iou, int workers = 1);

Json eval_config_to_json(const EvalConfig& cfg);
EvalConfig eval_config_from_json(const Json& j, EvalConfig base = {});

Json report_to_json(const MetricReport& r);
MetricReport report_from_json(const Json& j);
/// Detection table followed by the per-keypoint RMSE / PCK / OKS table.
std::string report_to_table(const MetricReport& r);
std::string report_to_csv(const MetricReport& r);

}  // namespace herdpose
