#include "herdpose/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace herdpose {

namespace {

constexpr double kMinArea = 1e-6;
constexpr double kMinAspect = 1e-6;
constexpr double kAspectProcessSigma = 0.01;  // relative, per frame

}  // namespace

Json tracker_config_to_json(const TrackerConfig& c) {
    return Json{{"iou_gate", c.iou_gate},         {"lambda_app", c.lambda_app},
                {"confirm_hits", c.confirm_hits}, {"max_age", c.max_age},
                {"min_size", c.min_size},         {"pos_sigma", c.pos_sigma},
                {"vel_sigma", c.vel_sigma},       {"meas_sigma", c.meas_sigma},
                {"init_vel_sigma", c.init_vel_sigma}, {"patch_margin", c.patch_margin},
                {"patch_out_size", c.patch_out_size}, {"gallery_size", c.gallery_size}};
}

TrackerConfig tracker_config_from_json(const Json& j, TrackerConfig c) {
    if (!j.is_object()) throw ValidationError("tracker config must be a JSON object");
    try {
        c.iou_gate = j.value("iou_gate", c.iou_gate);
        c.lambda_app = j.value("lambda_app", c.lambda_app);
        c.confirm_hits = j.value("confirm_hits", c.confirm_hits);
        c.max_age = j.value("max_age", c.max_age);
        c.min_size = j.value("min_size", c.min_size);
        c.pos_sigma = j.value("pos_sigma", c.pos_sigma);
        c.vel_sigma = j.value("vel_sigma", c.vel_sigma);
        c.meas_sigma = j.value("meas_sigma", c.meas_sigma);
        c.init_vel_sigma = j.value("init_vel_sigma", c.init_vel_sigma);
        c.patch_margin = j.value("patch_margin", c.patch_margin);
        c.patch_out_size = j.value("patch_out_size", c.patch_out_size);
        c.gallery_size = j.value("gallery_size", c.gallery_size);
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("tracker config: ") + e.what());
    }
    if (c.confirm_hits < 1 || c.max_age < 0) throw ValidationError("tracker lifecycle parameters out of range");
    return c;
}

// ---------------------------------------------------------------------------
// BoxKalman
// ---------------------------------------------------------------------------

BoxKalman::Meas BoxKalman::to_measurement(const BBox& b) {
    const Point c = b.center();
    Meas z;
    z << c.x, c.y, b.area(), b.w / b.h;
    return z;
}

BBox BoxKalman::to_box(double cx, double cy, double area, double aspect) {
    const double w = std::sqrt(area * aspect);
    const double h = area / w;
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

BoxKalman::BoxKalman(const BBox& first, const TrackerConfig& cfg)
    : pos_sigma_(cfg.pos_sigma), vel_sigma_(cfg.vel_sigma), meas_sigma_(cfg.meas_sigma) {
    x_.setZero();
    x_.head<4>() = to_measurement(first);
    const double side = side_scale();
    const double aspect = x_(3);
    p_.setZero();
    p_(0, 0) = p_(1, 1) = meas_sigma_ * meas_sigma_;
    p_(2, 2) = std::pow(2.0 * side * meas_sigma_, 2);
    p_(3, 3) = 2.0 * std::pow(aspect * meas_sigma_ / side, 2);
    p_(4, 4) = p_(5, 5) = cfg.init_vel_sigma * cfg.init_vel_sigma;
    p_(6, 6) = std::pow(2.0 * side * cfg.init_vel_sigma, 2);
}

double BoxKalman::side_scale() const { return std::sqrt(std::max(x_(2), kMinArea)); }

void BoxKalman::predict() {
    if (x_(2) + x_(6) <= 0.0) x_(6) = 0.0;
    Cov f = Cov::Identity();
    f(0, 4) = f(1, 5) = f(2, 6) = 1.0;

    const double side = side_scale();
    Cov q = Cov::Zero();
    q(0, 0) = q(1, 1) = pos_sigma_ * pos_sigma_;
    q(2, 2) = std::pow(2.0 * side * pos_sigma_, 2);
    q(3, 3) = std::pow(kAspectProcessSigma * x_(3), 2);
    q(4, 4) = q(5, 5) = vel_sigma_ * vel_sigma_;
    q(6, 6) = std::pow(2.0 * side * vel_sigma_, 2);

    x_ = f * x_;
    p_ = f * p_ * f.transpose() + q;
    p_ = 0.5 * (p_ + p_.transpose());
    x_(2) = std::max(x_(2), kMinArea);
}

void BoxKalman::update(const BBox& observed) {
    Eigen::Matrix<double, 4, 7> h = Eigen::Matrix<double, 4, 7>::Zero();
    h(0, 0) = h(1, 1) = h(2, 2) = h(3, 3) = 1.0;

    const double side = std::sqrt(observed.area());
    const double aspect = observed.w / observed.h;
    Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
    r(0, 0) = r(1, 1) = meas_sigma_ * meas_sigma_;
    r(2, 2) = std::pow(2.0 * side * meas_sigma_, 2);
    r(3, 3) = 2.0 * std::pow(aspect * meas_sigma_ / side, 2);

    const Meas y = to_measurement(observed) - h * x_;
    const Eigen::Matrix4d s = h * p_ * h.transpose() + r;
    const Eigen::Matrix<double, 7, 4> k = p_ * h.transpose() * s.ldlt().solve(Eigen::Matrix4d::Identity());
    x_ += k * y;

    // Joseph form keeps P symmetric positive semidefinite.
    const Cov ikh = Cov::Identity() - k * h;
    p_ = ikh * p_ * ikh.transpose() + k * r * k.transpose();
    p_ = 0.5 * (p_ + p_.transpose());

    x_(2) = std::max(x_(2), kMinArea);
    x_(3) = std::max(x_(3), kMinAspect);
}

BBox BoxKalman::box() const { return to_box(x_(0), x_(1), std::max(x_(2), kMinArea), std::max(x_(3), kMinAspect)); }

std::string to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::Tentative: return "tentative";
        case TrackStatus::Confirmed: return "confirmed";
        case TrackStatus::Deleted: return "deleted";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw ValidationError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / std::sqrt(na * nb);
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size();
    if (rows == 0) return {};
    const std::size_t cols = cost.front().size();
    for (const auto& r : cost) {
        if (r.size() != cols) throw ValidationError("cost matrix rows differ in length");
    }
    if (cols == 0) return std::vector<int>(rows, -1);

    if (rows > cols) {
        std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) t[j][i] = cost[i][j];
        }
        const auto col_to_row = solve_assignment(t);
        std::vector<int> out(rows, -1);
        for (std::size_t j = 0; j < cols; ++j) out[std::size_t(col_to_row[j])] = int(j);
        return out;
    }

    // Potentials u (rows), v (cols); way[] records the augmenting path.
    // 1-based with a virtual column 0.
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = rows, m = cols;
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(n, -1);
    for (std::size_t j = 1; j <= m; ++j) {
        if (p[j] != 0) out[p[j] - 1] = int(j - 1);
    }
    return out;
}

Association associate(const std::vector<BBox>& predicted, const std::vector<Instance>& dets, double iou_gate,
                      double lambda_app, const std::vector<std::vector<double>>* track_features,
                      const std::vector<std::vector<double>>* det_features) {
    const bool use_app = lambda_app > 0.0;
    if (use_app && (!track_features || !det_features)) {
        throw ValidationError("appearance weighting requires an embedding provider");
    }
    std::vector<std::vector<double>> ious(predicted.size(), std::vector<double>(dets.size()));
    std::vector<std::vector<double>> cost(predicted.size(), std::vector<double>(dets.size()));
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        for (std::size_t d = 0; d < dets.size(); ++d) {
            ious[t][d] = iou(predicted[t], dets[d].bbox);
            double c = 1.0 - ious[t][d];
            if (use_app) c += lambda_app * (1.0 - cosine_similarity((*track_features)[t], (*det_features)[d]));
            cost[t][d] = c;
        }
    }

    Association out;
    const auto assignment = solve_assignment(cost);
    std::vector<bool> det_used(dets.size(), false);
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        const int d = assignment.empty() ? -1 : assignment[t];
        if (d >= 0) {
            out.total_cost += cost[t][std::size_t(d)];
            if (ious[t][std::size_t(d)] >= iou_gate) {
                out.pairs.emplace_back(t, std::size_t(d));
                det_used[std::size_t(d)] = true;
                continue;
            }
        }
        out.unmatched_tracks.push_back(t);
    }
    for (std::size_t d = 0; d < dets.size(); ++d) {
        if (!det_used[d]) out.unmatched_detections.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

Tracker::Tracker(TrackerConfig cfg, EmbeddingProvider embed) : cfg_(cfg), embed_(std::move(embed)) {
    if (cfg_.lambda_app > 0.0 && !embed_) {
        throw ValidationError("lambda_app > 0 requires an embedding provider");
    }
}

std::vector<const Track*> Tracker::active() const {
    std::vector<const Track*> out;
    for (const auto& t : tracks_) {
        if (t.status != TrackStatus::Deleted) out.push_back(&t);
    }
    return out;
}

void Tracker::advance(Track& t) {
    t.filter.predict();
    t.predicted = t.filter.box();
}

void Tracker::mark_missed(Track& t, std::int64_t frame_index) {
    ++t.misses_in_a_row;
    t.history.push_back({frame_index, t.predicted, std::nullopt});
    if (t.misses_in_a_row > cfg_.max_age) t.status = TrackStatus::Deleted;
}

namespace {

std::vector<double> gallery_mean(const std::vector<std::vector<double>>& gallery) {
    std::vector<double> mean(gallery.front().size(), 0.0);
    for (const auto& g : gallery) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += g[i];
    }
    double norm = 0.0;
    for (double v : mean) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : mean) v /= norm;
    }
    return mean;
}

}  // namespace

void Tracker::step(std::int64_t frame_index, const std::vector<Instance>& detections) {
    if (last_frame_ && frame_index <= *last_frame_) {
        throw ValidationError("tracker frames must arrive in increasing order (got " + std::to_string(frame_index) +
                              " after " + std::to_string(*last_frame_) + ")");
    }
    const std::int64_t gap = last_frame_ ? frame_index - *last_frame_ : 1;
    last_frame_ = frame_index;
    last_assignment_.clear();

    for (std::int64_t skipped = gap - 1; skipped > 0; --skipped) {
        for (auto& t : tracks_) {
            if (t.status == TrackStatus::Deleted) continue;
            advance(t);
            mark_missed(t, frame_index - skipped);
        }
    }

    std::vector<std::size_t> live;
    std::vector<BBox> predicted;
    for (std::size_t i = 0; i < tracks_.size(); ++i) {
        if (tracks_[i].status == TrackStatus::Deleted) continue;
        advance(tracks_[i]);
        live.push_back(i);
        predicted.push_back(tracks_[i].predicted);
    }

    std::vector<std::vector<double>> det_features;
    std::vector<std::vector<double>> track_features;
    const bool use_app = cfg_.lambda_app > 0.0;
    if (embed_) {
        for (const auto& d : detections) det_features.push_back(embed_(d));
    }
    if (use_app) {
        // Every track is spawned with its first embedding, so galleries are never empty.
        for (std::size_t i : live) track_features.push_back(gallery_mean(tracks_[i].gallery));
    }

    const Association a = associate(predicted, detections, cfg_.iou_gate, cfg_.lambda_app,
                                    use_app ? &track_features : nullptr, use_app ? &det_features : nullptr);

    for (auto [ti, di] : a.pairs) {
        Track& t = tracks_[live[ti]];
        const Instance& d = detections[di];
        t.filter.update(d.bbox);
        ++t.hits;
        t.misses_in_a_row = 0;
        t.history.push_back({frame_index, d.bbox, d.id});
        if (t.status == TrackStatus::Tentative && t.hits >= cfg_.confirm_hits) {
            t.status = TrackStatus::Confirmed;
            t.ever_confirmed = true;
        }
        if (embed_) {
            t.gallery.push_back(det_features[di]);
            if (t.gallery.size() > cfg_.gallery_size) t.gallery.erase(t.gallery.begin());
        }
        last_assignment_[d.id] = t.track_id;
    }
    for (std::size_t ti : a.unmatched_tracks) mark_missed(tracks_[live[ti]], frame_index);

    for (std::size_t di : a.unmatched_detections) {
        const Instance& d = detections[di];
        if (d.bbox.max_side() < cfg_.min_size) continue;
        Track t;
        t.track_id = next_id_++;
        t.filter = BoxKalman(d.bbox, cfg_);
        t.predicted = d.bbox;
        t.hits = 1;
        t.history.push_back({frame_index, d.bbox, d.id});
        if (t.hits >= cfg_.confirm_hits) {
            t.status = TrackStatus::Confirmed;
            t.ever_confirmed = true;
        }
        if (embed_) t.gallery.push_back(det_features[di]);
        last_assignment_[d.id] = t.track_id;
        tracks_.push_back(std::move(t));
    }
}

SegmentManifest export_manifest(const Tracker& tracker, const std::string& video_id) {
    const TrackerConfig& cfg = tracker.config();
    SegmentManifest m;
    for (const auto& t : tracker.tracks()) {
        if (!t.ever_confirmed) continue;
        bool large_enough = true;
        Segment s;
        s.video_id = video_id;
        s.track_id = t.track_id;
        for (const auto& obs : t.history) {
            if (!obs.detection_id) continue;
            if (obs.box.max_side() < cfg.min_size) {
                large_enough = false;
                break;
            }
            s.frames.push_back({obs.frame_index, *obs.detection_id, obs.box,
                                build_patch(obs.box, cfg.patch_margin, cfg.patch_out_size)});
        }
        if (!large_enough || s.frames.empty()) continue;
        s.first_frame = s.frames.front().frame_index;
        s.last_frame = s.frames.back().frame_index;
        m.segments.push_back(std::move(s));
    }
    m.meta["video_id"] = video_id;
    m.meta["tracker"] = tracker_config_to_json(cfg);
    m.meta["size_gate"] = "max(w, h) >= min_size on track spawn and on every exported detection";
    return m;
}

Json segment_to_json(const Segment& s) {
    Json frames = Json::array();
    for (const auto& f : s.frames) {
        const Point o = f.patch.origin();
        frames.push_back({{"frame_index", f.frame_index},
                          {"detection_id", f.detection_id},
                          {"bbox", {f.box.x, f.box.y, f.box.w, f.box.h}},
                          {"patch", {{"x0", o.x}, {"y0", o.y}, {"side", f.patch.side},
                                     {"out_size", f.patch.out_size}, {"scale", f.patch.map.scale}}}});
    }
    return Json{{"video_id", s.video_id},
                {"track_id", s.track_id},
                {"first_frame", s.first_frame},
                {"last_frame", s.last_frame},
                {"frames", frames}};
}

std::string manifest_to_jsonl(const SegmentManifest& m) {
    std::string out = dump_canonical(Json{{"kind", "header"}, {"meta", m.meta}}, false) + "\n";
    for (const auto& s : m.segments) {
        Json j = segment_to_json(s);
        j["kind"] = "segment";
        out += dump_canonical(j, false) + "\n";
    }
    return out;
}

}  // namespace herdpose
