#include "herdpose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "herdpose/parallel.hpp"

namespace herdpose {

void sort_by_confidence(std::vector<Instance>& v) {
    std::stable_sort(v.begin(), v.end(), [](const Instance& a, const Instance& b) {
        const double sa = a.score.value_or(0.0);
        const double sb = b.score.value_or(0.0);
        if (sa != sb) return sa > sb;
        return a.id < b.id;
    });
}

std::vector<Instance> nms(std::vector<Instance> preds, double iou_threshold) {
    sort_by_confidence(preds);
    std::vector<Instance> kept;
    kept.reserve(preds.size());
    for (auto& p : preds) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Instance& k) {
            return iou(k.bbox, p.bbox) >= iou_threshold;
        });
        if (!suppressed) kept.push_back(std::move(p));
    }
    return kept;
}

MatchResult match(const std::vector<Instance>& preds, const std::vector<Instance>& gts, double iou_threshold) {
    std::vector<Instance> ranked = preds;
    sort_by_confidence(ranked);

    std::vector<std::size_t> gt_order(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) gt_order[i] = i;
    std::stable_sort(gt_order.begin(), gt_order.end(),
                     [&](std::size_t a, std::size_t b) { return gts[a].id < gts[b].id; });

    MatchResult out;
    std::vector<bool> claimed(gts.size(), false);
    for (const auto& p : ranked) {
        std::size_t best = gts.size();
        double best_iou = -1.0;
        for (std::size_t g : gt_order) {
            if (claimed[g]) continue;
            const double v = iou(p.bbox, gts[g].bbox);
            if (v >= iou_threshold && v > best_iou) {
                best = g;
                best_iou = v;
            }
        }
        if (best == gts.size()) {
            out.unmatched_predictions.push_back(p.id);
        } else {
            claimed[best] = true;
            out.pairs.push_back({p.id, gts[best].id, best_iou});
        }
    }
    for (std::size_t g : gt_order) {
        if (!claimed[g]) out.unmatched_ground_truths.push_back(gts[g].id);
    }
    return out;
}

namespace {

struct RankedDetection {
    double score;
    std::size_t frame;
    std::int64_t id;
    bool tp;
};

}  // namespace

PrCurve average_precision(const std::vector<FrameEval>& frames, double iou_threshold) {
    PrCurve curve;
    std::vector<RankedDetection> dets;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& fe = frames[f];
        curve.num_ground_truths += fe.ground_truths.size();
        const MatchResult m = match(fe.predictions, fe.ground_truths, iou_threshold);
        std::map<std::int64_t, bool> is_tp;
        for (const auto& pr : m.pairs) is_tp[pr.prediction_id] = true;
        for (const auto& p : fe.predictions) dets.push_back({p.score.value_or(0.0), f, p.id, is_tp.count(p.id) > 0});
    }
    if (curve.num_ground_truths == 0) throw ValidationError("average precision is undefined without ground truth");

    std::sort(dets.begin(), dets.end(), [](const RankedDetection& a, const RankedDetection& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.id < b.id;
    });

    const double n_gt = double(curve.num_ground_truths);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < dets.size(); ++k) {
        if (dets[k].tp) ++tp;
        curve.points.push_back({double(tp) / n_gt, double(tp) / double(k + 1), dets[k].score});
    }
    curve.true_positives = tp;
    curve.false_positives = dets.size() - tp;

    // Precision envelope from the right, then sum over recall steps.
    std::vector<double> envelope(curve.points.size());
    double running = 0.0;
    for (std::size_t k = curve.points.size(); k-- > 0;) {
        running = std::max(running, curve.points[k].precision);
        envelope[k] = running;
    }
    double prev_recall = 0.0;
    double ap = 0.0;
    for (std::size_t k = 0; k < curve.points.size(); ++k) {
        const double dr = curve.points[k].recall - prev_recall;
        if (dr > 0.0) ap += dr * envelope[k];
        prev_recall = curve.points[k].recall;
    }
    curve.ap = std::clamp(ap, 0.0, 1.0);
    return curve;
}

std::vector<double> default_sweep() {
    std::vector<double> t;
    for (int i = 0; i < 14; ++i) t.push_back((30 + 5 * i) / 100.0);
    return t;
}

double map_sweep(const std::vector<FrameEval>& frames, const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw ValidationError("mAP sweep needs at least one threshold");
    double sum = 0.0;
    for (double t : thresholds) {
        if (!(t > 0.0 && t <= 1.0)) throw ValidationError("IoU thresholds must lie in (0, 1]");
        sum += average_precision(frames, t).ap;
    }
    return sum / double(thresholds.size());
}

KeypointAccumulator::KeypointAccumulator(const Skeleton& skeleton, const KeypointConfig& cfg)
    : skeleton_(skeleton), cfg_(cfg), slots_(skeleton.size()) {}

void KeypointAccumulator::add(const MatchResult& matches, const std::vector<Instance>& preds,
                              const std::vector<Instance>& gts) {
    auto find = [](const std::vector<Instance>& v, std::int64_t id) -> const Instance* {
        for (const auto& i : v) {
            if (i.id == id) return &i;
        }
        return nullptr;
    };
    for (const auto& pair : matches.pairs) {
        const Instance* p = find(preds, pair.prediction_id);
        const Instance* g = find(gts, pair.ground_truth_id);
        if (!p || !g || !p->pose || !g->pose) continue;

        const double norm = cfg_.pck_alpha * g->bbox.max_side();
        const double s2 = g->bbox.area();
        double pair_oks = 0.0;
        std::size_t pair_n = 0;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            const Keypoint& gk = g->pose->keypoints[i];
            const Keypoint& pk = p->pose->keypoints[i];
            const bool scored_gt = gk.vis == Visibility::Visible ||
                                   (cfg_.include_occluded && gk.vis == Visibility::Occluded);
            if (!scored_gt || !pk.labeled()) continue;
            const double dx = pk.x - gk.x;
            const double dy = pk.y - gk.y;
            const double d2 = dx * dx + dy * dy;
            const double k = skeleton_.falloff[i];
            const double term = std::exp(-d2 / (2.0 * s2 * k * k));
            auto& slot = slots_[i];
            slot.sum_sq += d2;
            slot.sum_oks += term;
            if (std::sqrt(d2) <= norm) ++slot.hits;
            ++slot.support;
            pair_oks += term;
            ++pair_n;
        }
        if (pair_n > 0) {
            sum_instance_oks_ += pair_oks / double(pair_n);
            ++scored_pairs_;
        }
    }
}

void KeypointAccumulator::merge(const KeypointAccumulator& other) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        slots_[i].sum_sq += other.slots_[i].sum_sq;
        slots_[i].sum_oks += other.slots_[i].sum_oks;
        slots_[i].hits += other.slots_[i].hits;
        slots_[i].support += other.slots_[i].support;
    }
    sum_instance_oks_ += other.sum_instance_oks_;
    scored_pairs_ += other.scored_pairs_;
}

KeypointReport KeypointAccumulator::finish() const {
    KeypointReport rep;
    double w_total = 0.0, w_rmse = 0.0, w_pck = 0.0, w_oks = 0.0;
    std::size_t support_total = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        const auto& s = slots_[i];
        KeypointMetricRow row;
        row.name = skeleton_.names[i];
        row.support = s.support;
        if (s.support > 0) {
            const double n = double(s.support);
            row.rmse = std::sqrt(s.sum_sq / n);
            row.pck = 100.0 * double(s.hits) / n;
            row.oks = s.sum_oks / n;
            const double w = cfg_.weighting == AverageWeighting::Support ? n : 1.0;
            w_total += w;
            w_rmse += w * *row.rmse;
            w_pck += w * *row.pck;
            w_oks += w * *row.oks;
        }
        support_total += s.support;
        rep.rows.push_back(std::move(row));
    }
    rep.average.name = "Average";
    rep.average.support = support_total;
    if (w_total > 0.0) {
        rep.average.rmse = w_rmse / w_total;
        rep.average.pck = w_pck / w_total;
        rep.average.oks = w_oks / w_total;
    }
    rep.scored_pairs = scored_pairs_;
    if (scored_pairs_ > 0) rep.instance_oks = sum_instance_oks_ / double(scored_pairs_);
    return rep;
}

KeypointReport keypoint_metrics(const MatchResult& matches, const std::vector<Instance>& preds,
                                const std::vector<Instance>& gts, const Skeleton& skeleton,
                                const KeypointConfig& cfg) {
    KeypointAccumulator acc(skeleton, cfg);
    acc.add(matches, preds, gts);
    return acc.finish();
}

std::vector<FrameEval> build_frame_evals(const Dataset& ds, const PredictionSet& preds, bool apply_nms,
                                         double nms_iou, int workers) {
    auto grouped = preds.by_frame();
    std::vector<FrameEval> frames(ds.frames.size());
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        const auto& f = ds.frames[i];
        frames[i].key = f.key();
        frames[i].ground_truths = f.instances;
        if (auto it = grouped.find(f.key()); it != grouped.end()) frames[i].predictions = std::move(it->second);
    }
    if (apply_nms) {
        parallel_for(frames.size(), workers,
                     [&](std::size_t i) { frames[i].predictions = nms(std::move(frames[i].predictions), nms_iou); });
    }
    return frames;
}

MetricReport evaluate(const Dataset& ds, const PredictionSet& preds, const EvalConfig& cfg, int workers) {
    Skeleton skeleton = ds.skeleton;
    if (!cfg.falloff.empty()) {
        skeleton.falloff = cfg.falloff;
        skeleton.validate();
    }
    const auto frames = build_frame_evals(ds, preds, cfg.apply_nms, cfg.nms_iou, workers);

    std::vector<KeypointAccumulator> partial(frames.size(), KeypointAccumulator(skeleton, cfg.keypoints));
    std::vector<MatchResult> matches(frames.size());
    parallel_for(frames.size(), workers, [&](std::size_t i) {
        matches[i] = match(frames[i].predictions, frames[i].ground_truths, cfg.match_iou);
        partial[i].add(matches[i], frames[i].predictions, frames[i].ground_truths);
    });

    MetricReport rep;
    KeypointAccumulator total(skeleton, cfg.keypoints);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        total.merge(partial[i]);
        rep.true_positives += matches[i].pairs.size();
        rep.false_positives += matches[i].unmatched_predictions.size();
        rep.false_negatives += matches[i].unmatched_ground_truths.size();
    }
    rep.keypoints = total.finish();

    std::vector<double> thresholds = cfg.sweep;
    thresholds.push_back(0.5);
    std::vector<double> aps(thresholds.size());
    parallel_for(thresholds.size(), workers,
                 [&](std::size_t i) { aps[i] = average_precision(frames, thresholds[i]).ap; });
    rep.map50 = aps.back();
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
        rep.sweep.push_back({thresholds[i], aps[i]});
        sum += aps[i];
    }
    if (cfg.sweep.empty()) throw ValidationError("mAP sweep needs at least one threshold");
    rep.map_sweep = sum / double(cfg.sweep.size());

    rep.meta["config"] = eval_config_to_json(cfg);
    rep.meta["annotations_digest"] = ds.digest;
    rep.meta["predictions_digest"] = preds.digest;
    rep.meta["ap_interpolation"] = "all-point";
    rep.meta["frames"] = frames.size();
    return rep;
}

Json eval_config_to_json(const EvalConfig& cfg) {
    return Json{{"nms_iou", cfg.nms_iou},
                {"match_iou", cfg.match_iou},
                {"sweep", cfg.sweep},
                {"pck_alpha", cfg.keypoints.pck_alpha},
                {"include_occluded", cfg.keypoints.include_occluded},
                {"average_weighting", cfg.keypoints.weighting == AverageWeighting::Support ? "support" : "unweighted"},
                {"falloff", cfg.falloff},
                {"apply_nms", cfg.apply_nms}};
}

EvalConfig eval_config_from_json(const Json& j, EvalConfig base) {
    if (!j.is_object()) throw ValidationError("eval config must be a JSON object");
    try {
        if (j.contains("nms_iou")) base.nms_iou = j.at("nms_iou").get<double>();
        if (j.contains("match_iou")) base.match_iou = j.at("match_iou").get<double>();
        if (j.contains("sweep")) base.sweep = j.at("sweep").get<std::vector<double>>();
        if (j.contains("pck_alpha")) base.keypoints.pck_alpha = j.at("pck_alpha").get<double>();
        if (j.contains("include_occluded")) base.keypoints.include_occluded = j.at("include_occluded").get<bool>();
        if (j.contains("average_weighting")) {
            const auto w = j.at("average_weighting").get<std::string>();
            if (w == "support") {
                base.keypoints.weighting = AverageWeighting::Support;
            } else if (w == "unweighted") {
                base.keypoints.weighting = AverageWeighting::Unweighted;
            } else {
                throw ValidationError("average_weighting must be 'support' or 'unweighted'");
            }
        }
        if (j.contains("falloff")) base.falloff = j.at("falloff").get<std::vector<double>>();
        if (j.contains("apply_nms")) base.apply_nms = j.at("apply_nms").get<bool>();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("eval config: ") + e.what());
    }
    return base;
}

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json row_to_json(const KeypointMetricRow& r) {
    return Json{{"name", r.name}, {"rmse", opt(r.rmse)}, {"pck", opt(r.pck)}, {"oks", opt(r.oks)}, {"support", r.support}};
}

std::string cell(const std::optional<double>& v, int decimals) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t w, bool left = false) {
    if (s.size() >= w) return s;
    return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

Json report_to_json(const MetricReport& r) {
    Json sweep = Json::array();
    for (const auto& t : r.sweep) sweep.push_back({{"iou", t.threshold}, {"ap", t.ap}});
    Json rows = Json::array();
    for (const auto& row : r.keypoints.rows) rows.push_back(row_to_json(row));
    return Json{{"detection",
                 {{"map50", r.map50},
                  {"map_sweep", r.map_sweep},
                  {"sweep", sweep},
                  {"true_positives", r.true_positives},
                  {"false_positives", r.false_positives},
                  {"false_negatives", r.false_negatives}}},
                {"keypoints", rows},
                {"average", row_to_json(r.keypoints.average)},
                {"instance_oks", opt(r.keypoints.instance_oks)},
                {"scored_pairs", r.keypoints.scored_pairs},
                {"meta", r.meta}};
}

MetricReport report_from_json(const Json& j) {
    auto opt_num = [](const Json& v) -> std::optional<double> {
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
    };
    auto row = [&](const Json& v) {
        KeypointMetricRow r;
        r.name = v.at("name").get<std::string>();
        r.rmse = opt_num(v.at("rmse"));
        r.pck = opt_num(v.at("pck"));
        r.oks = opt_num(v.at("oks"));
        r.support = v.at("support").get<std::size_t>();
        return r;
    };
    try {
        MetricReport r;
        const Json& det = j.at("detection");
        r.map50 = det.at("map50").get<double>();
        r.map_sweep = det.at("map_sweep").get<double>();
        for (const auto& t : det.at("sweep")) r.sweep.push_back({t.at("iou").get<double>(), t.at("ap").get<double>()});
        r.true_positives = det.at("true_positives").get<std::size_t>();
        r.false_positives = det.at("false_positives").get<std::size_t>();
        r.false_negatives = det.at("false_negatives").get<std::size_t>();
        for (const auto& k : j.at("keypoints")) r.keypoints.rows.push_back(row(k));
        r.keypoints.average = row(j.at("average"));
        r.keypoints.instance_oks = opt_num(j.at("instance_oks"));
        r.keypoints.scored_pairs = j.at("scored_pairs").get<std::size_t>();
        r.meta = j.value("meta", Json::object());
        return r;
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("metric report: ") + e.what());
    }
}

std::string report_to_table(const MetricReport& r) {
    std::ostringstream out;
    std::string sweep_label = "mAP@sweep";
    if (!r.sweep.empty()) {
        char buf[64];
        const double step = r.sweep.size() > 1 ? r.sweep[1].threshold - r.sweep[0].threshold : 0.0;
        std::snprintf(buf, sizeof buf, "mAP@%.2f:%.2f:%.2f", r.sweep.front().threshold, step,
                      r.sweep.back().threshold);
        sweep_label = buf;
    }
    out << "Detection\n";
    out << pad("", 12, true) << pad(sweep_label, 20) << pad("mAP@0.5", 10) << "\n";
    out << pad("boxes", 12, true) << pad(cell(r.map_sweep, 4), 20) << pad(cell(r.map50, 4), 10) << "\n";
    out << "TP " << r.true_positives << "  FP " << r.false_positives << "  FN " << r.false_negatives << "\n\n";

    double alpha = 0.2;
    if (r.meta.contains("config")) alpha = r.meta["config"].value("pck_alpha", alpha);
    char head[96];
    std::snprintf(head, sizeof head, "Keypoints (PCK alpha %.3f, RMSE in frame pixels)\n", alpha);
    out << head;
    out << pad("", 12, true) << pad("RMSE", 10) << pad("PCK", 10) << pad("OKS", 10) << pad("n", 8) << "\n";
    auto line = [&](const KeypointMetricRow& row) {
        out << pad(row.name, 12, true) << pad(cell(row.rmse, 2), 10) << pad(cell(row.pck, 1), 10)
            << pad(cell(row.oks, 2), 10) << pad(std::to_string(row.support), 8) << "\n";
    };
    for (const auto& row : r.keypoints.rows) line(row);
    line(r.keypoints.average);
    out << "instance OKS " << cell(r.keypoints.instance_oks, 4) << " over " << r.keypoints.scored_pairs
        << " matched pairs\n";
    return out.str();
}

std::string report_to_csv(const MetricReport& r) {
    std::ostringstream out;
    out << "# " << dump_canonical(r.meta, false) << "\n";
    out << "section,name,rmse,pck,oks,support,ap\n";
    auto num = [](const std::optional<double>& v) { return v ? format_fixed6(*v) : std::string(); };
    out << "detection,map50,,,,," << format_fixed6(r.map50) << "\n";
    out << "detection,map_sweep,,,,," << format_fixed6(r.map_sweep) << "\n";
    for (const auto& t : r.sweep) out << "detection,ap@" << format_fixed6(t.threshold) << ",,,,," << format_fixed6(t.ap) << "\n";
    auto line = [&](const KeypointMetricRow& row) {
        out << "keypoint," << row.name << "," << num(row.rmse) << "," << num(row.pck) << "," << num(row.oks) << ","
            << row.support << ",\n";
    };
    for (const auto& row : r.keypoints.rows) line(row);
    line(r.keypoints.average);
    return out.str();
}

}  // namespace herdpose
