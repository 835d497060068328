#include "herdpose/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "herdpose/rng.hpp"

namespace herdpose {

namespace {

const Json& require(const Json& j, const char* key, const std::string& who) {
    if (!j.is_object()) throw ValidationError(who + ": expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(who + ": missing field '" + key + "'");
    return *it;
}

double as_number(const Json& j, const std::string& who) {
    if (!j.is_number()) throw ValidationError(who + ": expected a number");
    return j.get<double>();
}

std::int64_t as_int(const Json& j, const std::string& who) {
    if (!j.is_number_integer()) throw ValidationError(who + ": expected an integer");
    return j.get<std::int64_t>();
}

std::string as_string(const Json& j, const std::string& who) {
    if (j.is_string()) return j.get<std::string>();
    // Numeric video ids are common in exported COCO files.
    if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
    throw ValidationError(who + ": expected a string");
}

Skeleton skeleton_from_json(const Json& cats, const std::string& origin) {
    if (!cats.is_array() || cats.size() != 1) {
        throw ValidationError(origin + ": 'categories' must hold exactly one category");
    }
    const Json& c = cats[0];
    const std::string who = origin + ": category";
    Skeleton s;
    for (const auto& n : require(c, "keypoints", who)) s.names.push_back(as_string(n, who + " keypoints"));
    if (auto it = c.find("skeleton"); it != c.end()) {
        for (const auto& e : *it) {
            if (!e.is_array() || e.size() != 2) throw ValidationError(who + ": skeleton edges must be pairs");
            // COCO skeletons are 1-based.
            s.edges.emplace_back(int(as_int(e[0], who)) - 1, int(as_int(e[1], who)) - 1);
        }
    }
    if (auto it = c.find("falloff"); it != c.end()) {
        for (const auto& k : *it) s.falloff.push_back(as_number(k, who + " falloff"));
    } else {
        s.falloff.assign(s.names.size(), Skeleton::elephant().falloff.front());
    }
    s.validate();
    return s;
}

Json skeleton_to_json(const Skeleton& s) {
    Json edges = Json::array();
    for (auto [a, b] : s.edges) edges.push_back({a + 1, b + 1});
    return Json{{"id", 1},
                {"name", "elephant"},
                {"supercategory", "animal"},
                {"keypoints", s.names},
                {"skeleton", edges},
                {"falloff", s.falloff}};
}

}  // namespace

Json bbox_to_json(const BBox& b) { return Json::array({b.x, b.y, b.w, b.h}); }

BBox bbox_from_json(const Json& j, const std::string& who) {
    if (!j.is_array() || j.size() != 4) throw ValidationError(who + ": bbox must be [x, y, w, h]");
    return {as_number(j[0], who), as_number(j[1], who), as_number(j[2], who), as_number(j[3], who)};
}

Json pose_to_json(const Pose& pose) {
    Json flat = Json::array();
    for (const auto& k : pose.keypoints) {
        if (k.labeled()) {
            flat.push_back(k.x);
            flat.push_back(k.y);
        } else {
            flat.push_back(0.0);
            flat.push_back(0.0);
        }
        flat.push_back(visibility_code(k.vis));
    }
    return flat;
}

Pose pose_from_json(const Json& flat, const std::string& who) {
    if (!flat.is_array()) throw ValidationError(who + ": keypoints must be a flat list");
    if (flat.size() != 3 * kNumKeypoints) {
        throw ValidationError(who + ": pose length mismatch: expected " + std::to_string(3 * kNumKeypoints) +
                              " values, got " + std::to_string(flat.size()));
    }
    Pose pose;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        auto& k = pose.keypoints[i];
        k.vis = visibility_from_code(int(as_int(flat[3 * i + 2], who)));
        if (k.labeled()) {
            k.x = as_number(flat[3 * i], who);
            k.y = as_number(flat[3 * i + 1], who);
        }
    }
    return pose;
}

const FrameRecord* Dataset::find(const FrameKey& key) const {
    for (const auto& f : frames) {
        if (f.video_id == key.video_id && f.frame_index == key.frame_index) return &f;
    }
    return nullptr;
}

const FrameRecord* Dataset::find_image(std::int64_t image_id) const {
    for (const auto& f : frames) {
        if (f.image_id == image_id) return &f;
    }
    return nullptr;
}

std::vector<std::string> Dataset::video_ids() const {
    std::set<std::string> ids;
    for (const auto& f : frames) ids.insert(f.video_id);
    return {ids.begin(), ids.end()};
}

std::size_t Dataset::num_instances() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.instances.size();
    return n;
}

void Dataset::validate() const {
    skeleton.validate();
    std::set<FrameKey> keys;
    std::set<std::int64_t> image_ids;
    for (const auto& f : frames) {
        if (!keys.insert(f.key()).second) throw ValidationError("duplicate frame key " + to_string(f.key()));
        if (!image_ids.insert(f.image_id).second) {
            throw ValidationError("duplicate image id " + std::to_string(f.image_id));
        }
        f.validate();
        for (const auto& inst : f.instances) {
            if (inst.source != Source::GroundTruth) {
                throw ValidationError("frame " + to_string(f.key()) + ": annotation marked as prediction");
            }
        }
    }
}

Dataset dataset_from_json(const Json& j, const std::string& origin) {
    Dataset ds;
    ds.skeleton = skeleton_from_json(require(j, "categories", origin), origin);
    if (auto it = j.find("info"); it != j.end()) ds.info = *it;

    std::map<std::int64_t, std::size_t> by_image;
    for (const auto& im : require(j, "images", origin)) {
        const std::string who = origin + ": image";
        FrameRecord f;
        f.image_id = as_int(require(im, "id", who), who + " id");
        if (auto it = im.find("file_name"); it != im.end()) f.file_name = as_string(*it, who);
        f.width = int(as_int(require(im, "width", who), who + " width"));
        f.height = int(as_int(require(im, "height", who), who + " height"));
        f.video_id = as_string(require(im, "video_id", who), who + " video_id");
        f.frame_index = as_int(require(im, "frame_index", who), who + " frame_index");
        if (by_image.count(f.image_id)) throw ValidationError("duplicate image id " + std::to_string(f.image_id));
        by_image[f.image_id] = ds.frames.size();
        ds.frames.push_back(std::move(f));
    }

    for (const auto& a : require(j, "annotations", origin)) {
        const std::string who = origin + ": annotation";
        Instance inst;
        inst.source = Source::GroundTruth;
        inst.id = as_int(require(a, "id", who), who + " id");
        const std::string me = who + " " + std::to_string(inst.id);
        const std::int64_t image_id = as_int(require(a, "image_id", me), me + " image_id");
        inst.bbox = bbox_from_json(require(a, "bbox", me), me);
        if (auto it = a.find("keypoints"); it != a.end() && !it->is_null()) inst.pose = pose_from_json(*it, me);
        if (auto it = a.find("track_id"); it != a.end() && !it->is_null()) inst.track_id = as_int(*it, me);
        auto f = by_image.find(image_id);
        if (f == by_image.end()) {
            throw ValidationError(me + ": references unknown image id " + std::to_string(image_id));
        }
        ds.frames[f->second].instances.push_back(std::move(inst));
    }
    ds.validate();
    return ds;
}

Json dataset_to_json(const Dataset& ds) {
    Json images = Json::array();
    Json anns = Json::array();
    for (const auto& f : ds.frames) {
        images.push_back({{"id", f.image_id},
                          {"file_name", f.file_name},
                          {"width", f.width},
                          {"height", f.height},
                          {"video_id", f.video_id},
                          {"frame_index", f.frame_index}});
        for (const auto& inst : f.instances) {
            Json a = {{"id", inst.id},
                      {"image_id", f.image_id},
                      {"category_id", 1},
                      {"bbox", bbox_to_json(inst.bbox)},
                      {"area", inst.bbox.area()},
                      {"iscrowd", 0}};
            if (inst.pose) {
                a["keypoints"] = pose_to_json(*inst.pose);
                a["num_keypoints"] = inst.pose->num_labeled();
            } else {
                a["num_keypoints"] = 0;
            }
            if (inst.track_id) a["track_id"] = *inst.track_id;
            anns.push_back(std::move(a));
        }
    }
    return Json{{"info", ds.info},
                {"images", images},
                {"annotations", anns},
                {"categories", Json::array({skeleton_to_json(ds.skeleton)})}};
}

Dataset load_annotations(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    Dataset ds = dataset_from_json(parse_json(text, path.string()), path.string());
    ds.digest = sha256_hex(text);
    return ds;
}

void save_annotations(const Dataset& ds, const std::filesystem::path& path) {
    write_file_atomic(path, dump_canonical(dataset_to_json(ds)));
}

std::map<FrameKey, std::vector<Instance>> PredictionSet::by_frame() const {
    std::map<FrameKey, std::vector<Instance>> out;
    for (const auto& e : entries) out[e.key()].push_back(e.instance);
    return out;
}

PredictionSet predictions_from_json(const Json& j, const Dataset& ds, const std::string& origin) {
    PredictionSet ps;
    const Json* list = &j;
    if (j.is_object()) {
        list = &require(j, "predictions", origin);
        if (auto it = j.find("info"); it != j.end()) ps.info = *it;
    }
    if (!list->is_array()) throw ValidationError(origin + ": predictions must be a JSON list");

    std::vector<std::string> unknown;
    std::int64_t index = 0;
    for (const auto& p : *list) {
        const std::string who = origin + ": prediction #" + std::to_string(index);
        Prediction e;
        e.image_id = as_int(require(p, "image_id", who), who + " image_id");
        e.instance.source = Source::Prediction;
        e.instance.id = index;
        if (auto it = p.find("id"); it != p.end()) e.instance.id = as_int(*it, who + " id");
        e.instance.bbox = bbox_from_json(require(p, "bbox", who), who);
        const double score = as_number(require(p, "score", who), who + " score");
        if (!(score >= 0.0 && score <= 1.0)) {
            std::ostringstream msg;
            msg << who << ": malformed score " << score << " (must lie in [0,1])";
            throw ValidationError(msg.str());
        }
        e.instance.score = score;
        if (auto it = p.find("keypoints"); it != p.end() && !it->is_null()) {
            e.instance.pose = pose_from_json(*it, who);
        }
        if (auto it = p.find("track_id"); it != p.end() && !it->is_null()) e.instance.track_id = as_int(*it, who);
        ++index;
        const FrameRecord* f = ds.find_image(e.image_id);
        if (!f) {
            unknown.push_back(std::to_string(e.image_id));
            continue;
        }
        e.video_id = f->video_id;
        e.frame_index = f->frame_index;
        e.instance.validate();
        ps.entries.push_back(std::move(e));
    }
    if (!unknown.empty()) {
        std::string msg = origin + ": predictions reference unknown frames (image ids:";
        for (const auto& u : unknown) msg += " " + u;
        throw ValidationError(msg + ")");
    }
    for (const auto& [key, insts] : ps.by_frame()) {
        std::set<std::int64_t> ids;
        for (const auto& i : insts) {
            if (!ids.insert(i.id).second) {
                throw ValidationError(origin + ": duplicate prediction id " + std::to_string(i.id) + " on frame " +
                                      to_string(key));
            }
        }
    }
    return ps;
}

Json predictions_to_json(const PredictionSet& ps) {
    Json list = Json::array();
    for (const auto& e : ps.entries) {
        Json p = {{"id", e.instance.id},
                  {"image_id", e.image_id},
                  {"category_id", 1},
                  {"bbox", bbox_to_json(e.instance.bbox)},
                  {"score", e.instance.score.value_or(0.0)}};
        if (e.instance.pose) p["keypoints"] = pose_to_json(*e.instance.pose);
        if (e.instance.track_id) p["track_id"] = *e.instance.track_id;
        list.push_back(std::move(p));
    }
    return Json{{"info", ps.info}, {"predictions", list}};
}

PredictionSet load_predictions(const std::filesystem::path& path, const Dataset& ds) {
    const std::string text = read_file(path);
    PredictionSet ps = predictions_from_json(parse_json(text, path.string()), ds, path.string());
    ps.digest = sha256_hex(text);
    return ps;
}

void save_predictions(const PredictionSet& ps, const std::filesystem::path& path) {
    write_file_atomic(path, dump_canonical(predictions_to_json(ps)));
}

SplitAssignment make_split(const Dataset& ds, const SplitConfig& cfg) {
    if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
        throw ValidationError("val_fraction must lie in [0, 1)");
    }
    const auto videos = ds.video_ids();
    SplitAssignment out;
    for (const auto& v : cfg.test_videos) {
        if (!std::binary_search(videos.begin(), videos.end(), v)) {
            throw ValidationError("unknown test video id '" + v + "'");
        }
        out.test_videos.insert(v);
    }

    std::vector<FrameKey> pool;
    for (const auto& f : ds.frames) {
        if (out.test_videos.count(f.video_id)) {
            out.test.push_back(f.key());
        } else {
            pool.push_back(f.key());
        }
    }
    // Canonical order first so the permutation depends only on the frame set.
    std::sort(pool.begin(), pool.end());
    std::sort(out.test.begin(), out.test.end());
    Rng rng(cfg.seed);
    rng.shuffle(pool);

    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * double(pool.size())));
    out.val.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_val), pool.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.train.begin(), out.train.end());
    return out;
}

SplitConfig split_config_from_json(const Json& j) {
    const std::string who = "split config";
    SplitConfig cfg;
    for (const auto& v : require(j, "test_videos", who)) cfg.test_videos.push_back(as_string(v, who));
    if (auto it = j.find("val_fraction"); it != j.end()) cfg.val_fraction = as_number(*it, who + " val_fraction");
    if (auto it = j.find("seed"); it != j.end()) cfg.seed = static_cast<std::uint64_t>(as_int(*it, who + " seed"));
    return cfg;
}

Json split_to_json(const SplitAssignment& s, const SplitConfig& cfg) {
    auto keys = [](const std::vector<FrameKey>& ks) {
        Json a = Json::array();
        for (const auto& k : ks) a.push_back({{"video_id", k.video_id}, {"frame_index", k.frame_index}});
        return a;
    };
    return Json{{"config", {{"test_videos", cfg.test_videos}, {"val_fraction", cfg.val_fraction}, {"seed", cfg.seed}}},
                {"train", keys(s.train)},
                {"val", keys(s.val)},
                {"test", keys(s.test)},
                {"test_videos", Json(std::vector<std::string>(s.test_videos.begin(), s.test_videos.end()))}};
}

}  // namespace herdpose
