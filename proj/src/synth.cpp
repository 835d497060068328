#include "herdpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "herdpose/rng.hpp"

namespace herdpose {

namespace {

// Half extents of the body rectangle in units of body length.
constexpr double kHalfLength = 0.5;
constexpr double kHalfWidth = 0.275;
// Keeps the axis-aligned box inside the frame for any heading.
constexpr double kEdgeMargin = 0.6;
// Centre separation per unit of summed body length that keeps two boxes disjoint.
constexpr double kSeparation = 0.85;
constexpr int kPlacementAttempts = 10000;
constexpr int kFalsePositiveAttempts = 100;

struct Animal {
    double length = 0.0;
    Point c;
    double heading = 0.0;
    double speed = 0.0;
};

BBox body_box(const Animal& a) {
    const double cs = std::abs(std::cos(a.heading));
    const double sn = std::abs(std::sin(a.heading));
    const double hx = a.length * (kHalfLength * cs + kHalfWidth * sn);
    const double hy = a.length * (kHalfLength * sn + kHalfWidth * cs);
    return {a.c.x - hx, a.c.y - hy, 2.0 * hx, 2.0 * hy};
}

Pose body_pose(const Animal& a) {
    const double cs = std::cos(a.heading);
    const double sn = std::sin(a.heading);
    Pose p;
    const auto& tpl = keypoint_template();
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const double f = tpl[i].x * a.length;
        const double l = tpl[i].y * a.length;
        p.keypoints[i] = {a.c.x + f * cs - l * sn, a.c.y + f * sn + l * cs, Visibility::Visible};
    }
    return p;
}

bool too_close(const Animal& a, const Animal& b) {
    const double dx = a.c.x - b.c.x;
    const double dy = a.c.y - b.c.y;
    const double min_d = kSeparation * (a.length + b.length);
    return dx * dx + dy * dy < min_d * min_d;
}

BBox quantize(const BBox& b) { return {quantize6(b.x), quantize6(b.y), quantize6(b.w), quantize6(b.h)}; }

Pose quantize(const Pose& p) {
    Pose q = p;
    for (auto& k : q.keypoints) {
        if (k.labeled()) {
            k.x = quantize6(k.x);
            k.y = quantize6(k.y);
        } else {
            k = Keypoint{};
        }
    }
    return q;
}

bool in_dropout(const SynthScenario& s, int animal, std::int64_t frame) {
    return std::any_of(s.dropouts.begin(), s.dropouts.end(), [&](const Dropout& d) {
        return d.animal == animal && frame >= d.first_frame && frame < d.first_frame + d.length;
    });
}

// Moves every animal one frame: heading noise, reflection at the frame
// edges, and a bounce-back for any animal whose move would bring it too
// close to another (the previous configuration is always valid).
void advance(std::vector<Animal>& herd, const SynthScenario& s, Rng& rng) {
    std::vector<Animal> next = herd;
    for (auto& a : next) {
        a.heading += rng.normal() * s.heading_noise;
        double vx = a.speed * std::cos(a.heading);
        double vy = a.speed * std::sin(a.heading);
        double x = a.c.x + vx;
        double y = a.c.y + vy;
        const double m = kEdgeMargin * a.length;
        if (x < m) { x = 2 * m - x; vx = -vx; }
        if (x > s.frame_w - m) { x = 2 * (s.frame_w - m) - x; vx = -vx; }
        if (y < m) { y = 2 * m - y; vy = -vy; }
        if (y > s.frame_h - m) { y = 2 * (s.frame_h - m) - y; vy = -vy; }
        a.c = {std::clamp(x, m, s.frame_w - m), std::clamp(y, m, s.frame_h - m)};
        if (a.speed > 0.0) a.heading = std::atan2(vy, vx);
    }
    std::vector<bool> reverted(herd.size(), false);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < next.size(); ++i) {
            for (std::size_t j = i + 1; j < next.size(); ++j) {
                if (!too_close(next[i], next[j])) continue;
                for (std::size_t k : {i, j}) {
                    if (reverted[k]) continue;
                    reverted[k] = true;
                    next[k] = herd[k];
                    next[k].heading = herd[k].heading + std::numbers::pi;
                    changed = true;
                }
            }
        }
    }
    herd = std::move(next);
}

}  // namespace

const std::array<Point, kNumKeypoints>& keypoint_template() {
    // forehead, ear_base_l, ear_base_r, skull_base, shoulders, hips, ear_tip_l, ear_tip_r
    static const std::array<Point, kNumKeypoints> tpl = {{{0.45, 0.0},
                                                         {0.30, -0.12},
                                                         {0.30, 0.12},
                                                         {0.25, 0.0},
                                                         {0.10, 0.0},
                                                         {-0.35, 0.0},
                                                         {0.20, -0.25},
                                                         {0.20, 0.25}}};
    return tpl;
}

void SynthScenario::validate() const {
    auto rate = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string("synth: ") + what + " must lie in [0, 1]");
    };
    auto nonneg = [](double v, const char* what) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string("synth: ") + what + " must be >= 0");
    };
    if (n_animals < 0 || n_frames < 0) throw ValidationError("synth: counts must be non-negative");
    if (frame_w <= 0 || frame_h <= 0) throw ValidationError("synth: frame dimensions must be positive");
    if (!(size_min > 0.0 && size_min <= size_max)) throw ValidationError("synth: need 0 < size_min <= size_max");
    if (2.0 * kEdgeMargin * size_max >= std::min(frame_w, frame_h)) {
        throw ValidationError("synth: frame too small for the largest body size");
    }
    if (!(speed_min >= 0.0 && speed_min <= speed_max)) throw ValidationError("synth: need 0 <= speed_min <= speed_max");
    nonneg(heading_noise, "heading_noise");
    rate(occluded_rate, "occluded_rate");
    nonneg(corruption.bbox_jitter, "bbox_jitter");
    nonneg(corruption.keypoint_jitter, "keypoint_jitter");
    nonneg(corruption.false_positives, "false_positives");
    rate(corruption.miss_rate, "miss_rate");
    const auto& sc = corruption.scores;
    if (!(sc.tp_alpha > 0 && sc.tp_beta > 0 && sc.fp_alpha > 0 && sc.fp_beta > 0)) {
        throw ValidationError("synth: score model parameters must be > 0");
    }
    for (const auto& d : dropouts) {
        if (d.animal < 0 || d.animal >= n_animals || d.length < 0) throw ValidationError("synth: invalid dropout");
    }
}

Json scenario_to_json(const SynthScenario& s) {
    Json drops = Json::array();
    for (const auto& d : s.dropouts) {
        drops.push_back({{"animal", d.animal}, {"first_frame", d.first_frame}, {"length", d.length}});
    }
    const auto& c = s.corruption;
    return Json{{"seed", s.seed},
                {"n_animals", s.n_animals},
                {"frame_w", s.frame_w},
                {"frame_h", s.frame_h},
                {"n_frames", s.n_frames},
                {"video_id", s.video_id},
                {"size_min", s.size_min},
                {"size_max", s.size_max},
                {"speed_min", s.speed_min},
                {"speed_max", s.speed_max},
                {"heading_noise", s.heading_noise},
                {"occluded_rate", s.occluded_rate},
                {"corruption",
                 {{"bbox_jitter", c.bbox_jitter},
                  {"keypoint_jitter", c.keypoint_jitter},
                  {"false_positives", c.false_positives},
                  {"miss_rate", c.miss_rate},
                  {"scores",
                   {{"tp_alpha", c.scores.tp_alpha},
                    {"tp_beta", c.scores.tp_beta},
                    {"fp_alpha", c.scores.fp_alpha},
                    {"fp_beta", c.scores.fp_beta}}}}},
                {"dropouts", drops},
                {"prng", "xoshiro256** seeded by splitmix64"}};
}

SynthScenario scenario_from_json(const Json& j, SynthScenario s) {
    if (!j.is_object()) throw ValidationError("synth scenario must be a JSON object");
    try {
        s.seed = j.value("seed", s.seed);
        s.n_animals = j.value("n_animals", s.n_animals);
        s.frame_w = j.value("frame_w", s.frame_w);
        s.frame_h = j.value("frame_h", s.frame_h);
        s.n_frames = j.value("n_frames", s.n_frames);
        s.video_id = j.value("video_id", s.video_id);
        s.size_min = j.value("size_min", s.size_min);
        s.size_max = j.value("size_max", s.size_max);
        s.speed_min = j.value("speed_min", s.speed_min);
        s.speed_max = j.value("speed_max", s.speed_max);
        s.heading_noise = j.value("heading_noise", s.heading_noise);
        s.occluded_rate = j.value("occluded_rate", s.occluded_rate);
        if (auto it = j.find("corruption"); it != j.end()) {
            auto& c = s.corruption;
            c.bbox_jitter = it->value("bbox_jitter", c.bbox_jitter);
            c.keypoint_jitter = it->value("keypoint_jitter", c.keypoint_jitter);
            c.false_positives = it->value("false_positives", c.false_positives);
            c.miss_rate = it->value("miss_rate", c.miss_rate);
            if (auto sc = it->find("scores"); sc != it->end()) {
                c.scores.tp_alpha = sc->value("tp_alpha", c.scores.tp_alpha);
                c.scores.tp_beta = sc->value("tp_beta", c.scores.tp_beta);
                c.scores.fp_alpha = sc->value("fp_alpha", c.scores.fp_alpha);
                c.scores.fp_beta = sc->value("fp_beta", c.scores.fp_beta);
            }
        }
        if (auto it = j.find("dropouts"); it != j.end()) {
            s.dropouts.clear();
            for (const auto& d : *it) {
                s.dropouts.push_back({d.at("animal").get<int>(), d.at("first_frame").get<std::int64_t>(),
                                      d.at("length").get<std::int64_t>()});
            }
        }
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("synth scenario: ") + e.what());
    }
    s.validate();
    return s;
}

SynthOutput generate(const SynthScenario& s) {
    s.validate();
    Rng rng(s.seed);
    const auto& cor = s.corruption;

    std::vector<Animal> herd;
    for (int a = 0; a < s.n_animals; ++a) {
        Animal an;
        an.length = rng.uniform(s.size_min, s.size_max);
        an.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
        an.speed = rng.uniform(s.speed_min, s.speed_max);
        const double m = kEdgeMargin * an.length;
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
            an.c = {rng.uniform(m, s.frame_w - m), rng.uniform(m, s.frame_h - m)};
            placed = std::none_of(herd.begin(), herd.end(), [&](const Animal& o) { return too_close(an, o); });
        }
        if (!placed) throw ValidationError("synth: cannot place animals without overlap; frame too crowded");
        herd.push_back(an);
    }

    SynthOutput out;
    out.ground_truth.skeleton = Skeleton::elephant();
    std::int64_t next_pred_id = 1;
    for (int f = 0; f < s.n_frames; ++f) {
        if (f > 0) advance(herd, s, rng);

        FrameRecord fr;
        fr.image_id = f + 1;
        fr.video_id = s.video_id;
        fr.frame_index = f;
        fr.width = s.frame_w;
        fr.height = s.frame_h;
        char name[64];
        std::snprintf(name, sizeof name, "%s_%06d.jpg", s.video_id.c_str(), f);
        fr.file_name = name;

        std::vector<BBox> occupied;
        for (int a = 0; a < s.n_animals; ++a) {
            const Animal& an = herd[std::size_t(a)];
            Instance gt;
            gt.id = std::int64_t(f) * s.n_animals + a + 1;
            gt.source = Source::GroundTruth;
            gt.track_id = a;
            gt.bbox = quantize(body_box(an));
            Pose pose = body_pose(an);
            for (std::size_t slot : {1u, 2u, 6u, 7u}) {
                if (rng.bernoulli(s.occluded_rate)) pose.keypoints[slot].vis = Visibility::Occluded;
            }
            gt.pose = quantize(pose);
            occupied.push_back(gt.bbox);

            // Draw every variate even when unused so streams stay aligned across settings.
            const bool missed = rng.bernoulli(cor.miss_rate);
            double jb[4];
            for (double& v : jb) v = rng.normal() * cor.bbox_jitter;
            double jk[2 * kNumKeypoints];
            for (double& v : jk) v = rng.normal() * cor.keypoint_jitter;
            const double score = rng.beta(cor.scores.tp_alpha, cor.scores.tp_beta);
            if (missed || in_dropout(s, a, f)) {
                fr.instances.push_back(std::move(gt));
                continue;
            }

            Instance p;
            p.id = next_pred_id++;
            p.source = Source::Prediction;
            p.score = std::clamp(quantize6(score), 0.0, 1.0);
            const BBox& b = gt.bbox;
            p.bbox = quantize(BBox{b.x + jb[0], b.y + jb[1], std::max(b.w + jb[2], 1e-3), std::max(b.h + jb[3], 1e-3)});
            Pose pp = *gt.pose;
            for (std::size_t i = 0; i < kNumKeypoints; ++i) {
                auto& k = pp.keypoints[i];
                k.x += jk[2 * i];
                k.y += jk[2 * i + 1];
                k.vis = Visibility::Visible;
            }
            p.pose = quantize(pp);
            out.correspondence[p.id] = a;
            out.predictions.entries.push_back({fr.video_id, fr.frame_index, fr.image_id, std::move(p)});
            fr.instances.push_back(std::move(gt));
        }

        const double whole = std::floor(cor.false_positives);
        int n_fp = int(whole) + (rng.bernoulli(cor.false_positives - whole) ? 1 : 0);
        for (int k = 0; k < n_fp; ++k) {
            Animal ghost;
            ghost.length = rng.uniform(s.size_min, s.size_max);
            ghost.heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
            const double m = kEdgeMargin * ghost.length;
            BBox box;
            for (int attempt = 0; attempt < kFalsePositiveAttempts; ++attempt) {
                ghost.c = {rng.uniform(m, s.frame_w - m), rng.uniform(m, s.frame_h - m)};
                box = quantize(body_box(ghost));
                const bool clear = std::none_of(occupied.begin(), occupied.end(),
                                                [&](const BBox& o) { return intersection_area(o, box) > 0.0; });
                if (clear) break;
            }
            occupied.push_back(box);
            Instance p;
            p.id = next_pred_id++;
            p.source = Source::Prediction;
            p.score = std::clamp(quantize6(rng.beta(cor.scores.fp_alpha, cor.scores.fp_beta)), 0.0, 1.0);
            p.bbox = box;
            p.pose = quantize(body_pose(ghost));
            out.correspondence[p.id] = kFalsePositive;
            out.predictions.entries.push_back({fr.video_id, fr.frame_index, fr.image_id, std::move(p)});
        }
        out.ground_truth.frames.push_back(std::move(fr));
    }

    const Json scenario = scenario_to_json(s);
    out.ground_truth.info = {{"generator", "herdpose synth"}, {"scenario", scenario}};
    out.predictions.info = out.ground_truth.info;
    out.ground_truth.validate();
    out.ground_truth.digest = sha256_hex(dump_canonical(dataset_to_json(out.ground_truth)));
    out.predictions.digest = sha256_hex(dump_canonical(predictions_to_json(out.predictions)));
    return out;
}

Json correspondence_to_json(const SynthOutput& out) {
    Json list = Json::array();
    for (const auto& e : out.predictions.entries) {
        const std::int64_t animal = out.correspondence.at(e.instance.id);
        list.push_back({{"prediction_id", e.instance.id},
                        {"image_id", e.image_id},
                        {"animal_id", animal == kFalsePositive ? Json("FALSE_POSITIVE") : Json(animal)}});
    }
    return Json{{"info", out.ground_truth.info}, {"correspondence", list}};
}

double OracleMetrics::rmse(std::size_t slot) const {
    const auto& d = distances.at(slot);
    if (d.empty()) return 0.0;
    double s = 0.0;
    for (double v : d) s += v * v;
    return std::sqrt(s / double(d.size()));
}

double OracleMetrics::rmse_all() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& slot : distances) {
        for (double v : slot) s += v * v;
        n += slot.size();
    }
    return n ? std::sqrt(s / double(n)) : 0.0;
}

std::size_t OracleMetrics::num_distances() const {
    std::size_t n = 0;
    for (const auto& slot : distances) n += slot.size();
    return n;
}

OracleMetrics oracle_metrics(const SynthOutput& out) {
    OracleMetrics m;
    m.distances.assign(kNumKeypoints, {});
    std::map<FrameKey, const FrameRecord*> frames;
    for (const auto& f : out.ground_truth.frames) frames[f.key()] = &f;

    std::size_t gt_total = 0;
    for (const auto& f : out.ground_truth.frames) gt_total += f.instances.size();

    for (const auto& e : out.predictions.entries) {
        const std::int64_t animal = out.correspondence.at(e.instance.id);
        if (animal == kFalsePositive) {
            ++m.false_positives;
            continue;
        }
        ++m.true_positives;
        const FrameRecord* f = frames.at(e.key());
        const auto gt = std::find_if(f->instances.begin(), f->instances.end(),
                                     [&](const Instance& i) { return i.track_id == animal; });
        if (gt == f->instances.end() || !gt->pose || !e.instance.pose) continue;
        for (std::size_t i = 0; i < kNumKeypoints; ++i) {
            const auto& g = gt->pose->keypoints[i];
            const auto& p = e.instance.pose->keypoints[i];
            if (g.vis != Visibility::Visible || !p.labeled()) continue;
            m.distances[i].push_back(std::hypot(p.x - g.x, p.y - g.y));
        }
    }
    m.false_negatives = gt_total - m.true_positives;
    return m;
}

}  // namespace herdpose
