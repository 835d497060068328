#include "herdpose/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <thread>

#include "herdpose/eval.hpp"
#include "herdpose/framing.hpp"
#include "herdpose/ingest.hpp"
#include "herdpose/overlay.hpp"
#include "herdpose/parallel.hpp"
#include "herdpose/synth.hpp"
#include "herdpose/tracking.hpp"

namespace herdpose::cli {

namespace fs = std::filesystem;

int default_workers() {
    if (const char* env = std::getenv("HERDPOSE_WORKERS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

namespace {

/// Collects flags whose values override the resolved JSON config, applied
/// only when the flag was actually given on the command line.
class Overrides {
public:
    template <typename T>
    CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        setters_.push_back([opt, value, key](Json& j) {
            if (opt->count() > 0) j[Json::json_pointer(key)] = *value;
        });
        return opt;
    }

    CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& key, Json set_to,
                          const std::string& help) {
        CLI::Option* opt = app->add_flag(flag, help);
        setters_.push_back([opt, key, set_to](Json& j) {
            if (opt->count() > 0) j[Json::json_pointer(key)] = set_to;
        });
        return opt;
    }

    void apply(Json& j) const {
        for (const auto& s : setters_) s(j);
    }

private:
    std::vector<std::function<void(Json&)>> setters_;
};

/// defaults <- config file <- flags
Json resolve(Json defaults, const std::string& config_path, const Overrides& flags, const char* section) {
    if (!config_path.empty()) {
        Json file = parse_json(read_file(config_path), config_path);
        if (!file.is_object()) throw ValidationError(config_path + ": config must be a JSON object");
        if (auto it = file.find(section); it != file.end() && it->is_object()) file = *it;
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (!defaults.contains(it.key())) {
                throw ValidationError(config_path + ": unknown config key '" + it.key() + "'");
            }
        }
        defaults.merge_patch(file);
    }
    flags.apply(defaults);
    return defaults;
}

Json provenance(const char* command, const Json& config, Json inputs) {
    return Json{{"tool", "herdpose"}, {"command", command}, {"config", config}, {"inputs", std::move(inputs)}};
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, dump_canonical(j)); }

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string config;
    std::string out_dir;
    Overrides flags;
};

void setup_synth(CLI::App* app, SynthArgs& a) {
    app->add_option("--config", a.config, "JSON scenario file");
    app->add_option("--out-dir", a.out_dir, "Directory for annotations/predictions/correspondence/scenario files")
        ->required();
    a.flags.add<std::uint64_t>(app, "--seed", "/seed", "PRNG seed");
    a.flags.add<int>(app, "--animals", "/n_animals", "Number of animals");
    a.flags.add<int>(app, "--frames", "/n_frames", "Number of frames");
    a.flags.add<int>(app, "--width", "/frame_w", "Frame width (px)");
    a.flags.add<int>(app, "--height", "/frame_h", "Frame height (px)");
    a.flags.add<std::string>(app, "--video-id", "/video_id", "Video identifier");
    a.flags.add<double>(app, "--size-min", "/size_min", "Minimum body length (px)");
    a.flags.add<double>(app, "--size-max", "/size_max", "Maximum body length (px)");
    a.flags.add<double>(app, "--speed-min", "/speed_min", "Minimum speed (px/frame)");
    a.flags.add<double>(app, "--speed-max", "/speed_max", "Maximum speed (px/frame)");
    a.flags.add<double>(app, "--heading-noise", "/heading_noise", "Heading noise sigma (rad/frame)");
    a.flags.add<double>(app, "--occluded-rate", "/occluded_rate", "Probability an ear keypoint is occluded");
    a.flags.add<double>(app, "--bbox-jitter", "/corruption/bbox_jitter", "Prediction box jitter sigma (px)");
    a.flags.add<double>(app, "--keypoint-jitter", "/corruption/keypoint_jitter", "Keypoint jitter sigma (px)");
    a.flags.add<double>(app, "--false-positives", "/corruption/false_positives", "Expected false positives per frame");
    a.flags.add<double>(app, "--miss-rate", "/corruption/miss_rate", "Probability a true animal is missed");
}

int run_synth(SynthArgs& a, std::ostream& out) {
    Json defaults = scenario_to_json(SynthScenario{});
    defaults.erase("prng");
    const Json resolved = resolve(defaults, a.config, a.flags, "synth");
    const SynthScenario s = scenario_from_json(resolved);
    SynthOutput result = generate(s);

    const Json info = provenance("synth", scenario_to_json(s), Json::object());
    result.ground_truth.info = info;
    result.predictions.info = info;
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    save_annotations(result.ground_truth, dir / "annotations.json");
    save_predictions(result.predictions, dir / "predictions.json");
    Json corr = correspondence_to_json(result);
    corr["info"] = info;
    write_json(dir / "correspondence.json", corr);
    write_json(dir / "scenario.json", Json{{"info", info}, {"scenario", scenario_to_json(s)}});
    out << "synth: " << result.ground_truth.frames.size() << " frames, " << result.ground_truth.num_instances()
        << " animals, " << result.predictions.entries.size() << " predictions -> " << a.out_dir << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// tile
// ---------------------------------------------------------------------------

struct TileArgs {
    std::string config, ann, out, index;
    Overrides flags;
};

void setup_tile(CLI::App* app, TileArgs& a) {
    app->add_option("--config", a.config, "JSON config file");
    app->add_option("--ann", a.ann, "Annotation file")->required();
    app->add_option("--out", a.out, "Tiled annotation file")->required();
    app->add_option("--index", a.index, "Tile-index sidecar file")->required();
    a.flags.add<int>(app, "--side", "/side", "Tile edge (px)");
    a.flags.add<double>(app, "--overlap", "/overlap", "Window overlap ratio in [0,1)");
    a.flags.add<double>(app, "--min-visible", "/min_visible_fraction", "Box fraction needed to keep an instance");
    a.flags.add<std::string>(app, "--rounding", "/stride_rounding", "Stride rounding: nearest|down|up");
}

StrideRounding parse_rounding(const std::string& s) {
    if (s == "nearest") return StrideRounding::Nearest;
    if (s == "down") return StrideRounding::Down;
    if (s == "up") return StrideRounding::Up;
    throw ValidationError("stride_rounding must be nearest, down or up");
}

int run_tile(TileArgs& a, std::ostream& out, int workers) {
    const Json defaults = {{"side", 800}, {"overlap", 0.33}, {"min_visible_fraction", 0.5}, {"stride_rounding", "nearest"}};
    const Json cfg = resolve(defaults, a.config, a.flags, "tile");
    const int side = cfg.at("side").get<int>();
    const double overlap = cfg.at("overlap").get<double>();
    const double min_vis = cfg.at("min_visible_fraction").get<double>();
    const StrideRounding rounding = parse_rounding(cfg.at("stride_rounding").get<std::string>());

    const Dataset ds = load_annotations(a.ann);
    std::vector<std::vector<FrameRecord>> per_frame(ds.frames.size());
    std::vector<TileGrid> grids(ds.frames.size());
    parallel_for(ds.frames.size(), workers, [&](std::size_t i) {
        const auto& f = ds.frames[i];
        grids[i] = build_grid(f.width, f.height, side, overlap, rounding);
        for (const auto& t : grids[i].tiles) per_frame[i].push_back(project_to_tile(t, f, min_vis));
    });

    Dataset tiled;
    tiled.skeleton = ds.skeleton;
    const Json info = provenance("tile", cfg, {{"annotations", ds.digest}});
    tiled.info = info;
    Json index = Json::object();
    std::int64_t next_image = 1;
    for (std::size_t i = 0; i < ds.frames.size(); ++i) {
        Json records = Json::array();
        for (std::size_t k = 0; k < per_frame[i].size(); ++k) {
            const TileSpec& t = grids[i].tiles[k];
            FrameRecord fr = std::move(per_frame[i][k]);
            const std::string tag = "@r" + std::to_string(t.row) + "c" + std::to_string(t.col);
            fr.image_id = next_image++;
            fr.video_id += tag;
            fr.file_name += tag;
            records.push_back({{"row", t.row}, {"col", t.col}, {"x0", t.x0}, {"y0", t.y0}, {"side", t.side},
                               {"width", t.width}, {"height", t.height}, {"image_id", fr.image_id}});
            tiled.frames.push_back(std::move(fr));
        }
        index[to_string(ds.frames[i].key())] = records;
    }
    tiled.validate();
    save_annotations(tiled, a.out);
    write_json(a.index, Json{{"info", info}, {"tiles", index}});
    out << "tile: " << ds.frames.size() << " frames -> " << tiled.frames.size() << " tiles\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// patch
// ---------------------------------------------------------------------------

struct PatchArgs {
    std::string config, ann, pred, out, patches;
    bool to_frame = false;
    Overrides flags;
};

void setup_patch(CLI::App* app, PatchArgs& a) {
    app->add_option("--config", a.config, "JSON config file");
    app->add_option("--ann", a.ann, "Annotation file")->required();
    app->add_option("--pred", a.pred, "Prediction file; patches are cut around predictions instead of annotations");
    app->add_option("--out", a.out, "Output file")->required();
    app->add_flag("--to-frame", a.to_frame, "Map patch-space keypoints of --patches back to a frame-space prediction file");
    app->add_option("--patches", a.patches, "Patch file (with --to-frame)");
    a.flags.add<double>(app, "--margin", "/margin", "Margin added to the longer box side");
    a.flags.add<int>(app, "--out-size", "/out_size", "Patch edge after resampling (px)");
}

int run_patch(PatchArgs& a, std::ostream& out) {
    const Json cfg = resolve({{"margin", 0.2}, {"out_size", 100}}, a.config, a.flags, "patch");
    const double margin = cfg.at("margin").get<double>();
    const int out_size = cfg.at("out_size").get<int>();
    const Dataset ds = load_annotations(a.ann);

    if (a.to_frame) {
        if (a.patches.empty()) throw CLI::ValidationError("--to-frame requires --patches");
        const std::string text = read_file(a.patches);
        const Json pj = parse_json(text, a.patches);
        PredictionSet ps;
        try {
            for (const auto& e : pj.at("patches")) {
                const FrameRecord* f = ds.find_image(e.at("image_id").get<std::int64_t>());
                if (!f) throw ValidationError(a.patches + ": patch references unknown image");
                const Json& g = e.at("patch");
                const double scale = g.at("scale").get<double>();
                const AffineMap to_patch{scale, -g.at("x0").get<double>() * scale, -g.at("y0").get<double>() * scale};
                Instance inst;
                inst.source = Source::Prediction;
                inst.id = e.at("instance_id").get<std::int64_t>();
                inst.bbox = bbox_from_json(e.at("bbox"), a.patches);
                inst.score = e.contains("score") ? e.at("score").get<double>() : 1.0;
                if (e.contains("keypoints")) {
                    inst.pose = apply_map(invert_map(to_patch), pose_from_json(e.at("keypoints"), a.patches));
                }
                inst.validate();
                ps.entries.push_back({f->video_id, f->frame_index, f->image_id, std::move(inst)});
            }
        } catch (const Json::exception& e) {
            throw ValidationError(a.patches + ": " + e.what());
        }
        ps.info = provenance("patch --to-frame", cfg, {{"annotations", ds.digest}, {"patches", sha256_hex(text)}});
        save_predictions(ps, a.out);
        out << "patch: " << ps.entries.size() << " poses mapped to frame space\n";
        return kOk;
    }

    Json inputs = {{"annotations", ds.digest}};
    std::vector<Prediction> sources;
    bool from_preds = !a.pred.empty();
    if (from_preds) {
        const PredictionSet ps = load_predictions(a.pred, ds);
        inputs["predictions"] = ps.digest;
        sources = ps.entries;
    } else {
        for (const auto& f : ds.frames) {
            for (const auto& i : f.instances) sources.push_back({f.video_id, f.frame_index, f.image_id, i});
        }
    }
    Json list = Json::array();
    for (const auto& s : sources) {
        const PatchSpec p = build_patch(s.instance.bbox, margin, out_size);
        const Point o = p.origin();
        Json e = {{"image_id", s.image_id},
                  {"video_id", s.video_id},
                  {"frame_index", s.frame_index},
                  {"instance_id", s.instance.id},
                  {"source", from_preds ? "prediction" : "ground_truth"},
                  {"bbox", bbox_to_json(s.instance.bbox)},
                  {"patch", {{"x0", o.x}, {"y0", o.y}, {"side", p.side}, {"scale", p.map.scale}, {"out_size", out_size}}}};
        if (s.instance.score) e["score"] = *s.instance.score;
        if (s.instance.pose) e["keypoints"] = pose_to_json(pose_to_patch(p, *s.instance.pose));
        list.push_back(std::move(e));
    }
    write_json(a.out, Json{{"info", provenance("patch", cfg, inputs)}, {"patches", list}});
    out << "patch: " << list.size() << " patches\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// eval / report
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string config, ann, pred, out_json, out_csv, out_table;
    bool quiet = false;
    Overrides flags;
};

void setup_eval(CLI::App* app, EvalArgs& a) {
    app->add_option("--config", a.config, "JSON config file");
    app->add_option("--ann", a.ann, "Annotation file")->required();
    app->add_option("--pred", a.pred, "Prediction file")->required();
    app->add_option("--out-json", a.out_json, "Machine-readable report");
    app->add_option("--out-csv", a.out_csv, "CSV report");
    app->add_option("--out-table", a.out_table, "Human-readable table");
    app->add_flag("--quiet", a.quiet, "Do not print the table");
    a.flags.add<double>(app, "--nms-iou", "/nms_iou", "NMS IoU threshold");
    a.flags.add<double>(app, "--match-iou", "/match_iou", "Matching IoU threshold");
    a.flags.add<std::vector<double>>(app, "--sweep", "/sweep", "IoU thresholds for the mAP sweep");
    a.flags.add<double>(app, "--pck-alpha", "/pck_alpha", "PCK threshold as a fraction of the longer box side");
    a.flags.add<std::vector<double>>(app, "--falloff", "/falloff", "Per-keypoint OKS falloff constants (8 values)");
    a.flags.add_flag(app, "--include-occluded", "/include_occluded", true, "Score occluded keypoints too");
    a.flags.add_flag(app, "--unweighted-average", "/average_weighting", "unweighted", "Unweighted Average row");
    a.flags.add_flag(app, "--no-nms", "/apply_nms", false, "Skip NMS on predictions");
}

int run_eval(EvalArgs& a, std::ostream& out, int workers) {
    const Json defaults = eval_config_to_json(EvalConfig{});
    const Json cfg_json = resolve(defaults, a.config, a.flags, "eval");
    const EvalConfig cfg = eval_config_from_json(cfg_json);

    const Dataset ds = load_annotations(a.ann);
    const PredictionSet ps = load_predictions(a.pred, ds);
    MetricReport rep = evaluate(ds, ps, cfg, workers);
    rep.meta = provenance("eval", eval_config_to_json(cfg), {{"annotations", ds.digest}, {"predictions", ps.digest}});
    rep.meta["ap_interpolation"] = "all-point";
    rep.meta["frames"] = ds.frames.size();
    const std::string table = report_to_table(rep);
    if (!a.out_json.empty()) write_json(a.out_json, report_to_json(rep));
    if (!a.out_csv.empty()) write_file_atomic(a.out_csv, report_to_csv(rep));
    if (!a.out_table.empty()) write_file_atomic(a.out_table, table);
    if (!a.quiet) out << table;
    return kOk;
}

struct ReportArgs {
    std::string in;
};

int run_report(ReportArgs& a, std::ostream& out) {
    const MetricReport rep = report_from_json(parse_json(read_file(a.in), a.in));
    out << report_to_table(rep);
    return kOk;
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

struct TrackArgs {
    std::string config, ann, pred, out, out_pred;
    Overrides flags;
};

void setup_track(CLI::App* app, TrackArgs& a) {
    app->add_option("--config", a.config, "JSON config file");
    app->add_option("--ann", a.ann, "Annotation file (frame index and video of every image)")->required();
    app->add_option("--pred", a.pred, "Prediction file")->required();
    app->add_option("--out", a.out, "Segment manifest (JSON lines)")->required();
    app->add_option("--out-pred", a.out_pred, "Prediction file annotated with track ids");
    a.flags.add<double>(app, "--iou-gate", "/iou_gate", "Minimum IoU for an association");
    a.flags.add<int>(app, "--confirm-hits", "/confirm_hits", "Hits before a track is confirmed");
    a.flags.add<int>(app, "--max-age", "/max_age", "Consecutive misses tolerated before deletion");
    a.flags.add<double>(app, "--min-size", "/min_size", "Minimum longer box side (px) to spawn and export");
    a.flags.add<double>(app, "--nms-iou", "/nms_iou", "NMS IoU threshold applied to detections");
    a.flags.add<double>(app, "--margin", "/patch_margin", "Patch margin for exported segments");
}

int run_track(TrackArgs& a, std::ostream& out, int workers) {
    Json defaults = tracker_config_to_json(TrackerConfig{});
    defaults["nms_iou"] = 0.5;
    const Json cfg_json = resolve(defaults, a.config, a.flags, "track");
    Json tracker_json = cfg_json;
    tracker_json.erase("nms_iou");
    const TrackerConfig tcfg = tracker_config_from_json(tracker_json);
    if (tcfg.lambda_app > 0.0) {
        throw ValidationError("lambda_app > 0 needs an embedding provider, which the command line does not ship");
    }
    const double nms_iou = cfg_json.at("nms_iou").get<double>();

    const Dataset ds = load_annotations(a.ann);
    PredictionSet ps = load_predictions(a.pred, ds);
    const auto grouped = ps.by_frame();

    std::map<std::string, std::vector<const FrameRecord*>> videos;
    for (const auto& f : ds.frames) videos[f.video_id].push_back(&f);
    std::vector<std::string> order;
    for (auto& [v, frames] : videos) {
        std::sort(frames.begin(), frames.end(),
                  [](const FrameRecord* x, const FrameRecord* y) { return x->frame_index < y->frame_index; });
        order.push_back(v);
    }

    std::vector<SegmentManifest> manifests(order.size());
    std::vector<std::map<FrameKey, std::map<std::int64_t, std::int64_t>>> assigned(order.size());
    parallel_for(order.size(), workers, [&](std::size_t vi) {
        Tracker tracker(tcfg);
        for (const FrameRecord* f : videos.at(order[vi])) {
            std::vector<Instance> dets;
            if (auto it = grouped.find(f->key()); it != grouped.end()) dets = nms(it->second, nms_iou);
            tracker.step(f->frame_index, dets);
            assigned[vi][f->key()] = tracker.last_assignment();
        }
        manifests[vi] = export_manifest(tracker, order[vi]);
    });

    SegmentManifest all;
    all.meta = provenance("track", cfg_json, {{"annotations", ds.digest}, {"predictions", ps.digest}});
    all.meta["size_gate"] = "max(w, h) >= min_size on track spawn and on every exported detection";
    for (auto& m : manifests) {
        for (auto& s : m.segments) all.segments.push_back(std::move(s));
    }
    write_file_atomic(a.out, manifest_to_jsonl(all));

    if (!a.out_pred.empty()) {
        std::map<FrameKey, std::map<std::int64_t, std::int64_t>> lookup;
        for (auto& per_video : assigned) lookup.merge(per_video);
        for (auto& e : ps.entries) {
            e.instance.track_id.reset();
            const auto& frame = lookup[e.key()];
            if (auto it = frame.find(e.instance.id); it != frame.end()) e.instance.track_id = it->second;
        }
        ps.info = all.meta;
        save_predictions(ps, a.out_pred);
    }
    out << "track: " << order.size() << " videos, " << all.segments.size() << " segments\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// overlay
// ---------------------------------------------------------------------------

struct OverlayArgs {
    std::string ann, pred, out_dir;
    std::vector<std::int64_t> images;
};

int run_overlay(OverlayArgs& a, std::ostream& out, int workers) {
    const Dataset ds = load_annotations(a.ann);
    Json inputs = {{"annotations", ds.digest}};
    std::map<FrameKey, std::vector<Instance>> preds;
    if (!a.pred.empty()) {
        const PredictionSet ps = load_predictions(a.pred, ds);
        inputs["predictions"] = ps.digest;
        preds = ps.by_frame();
    }
    const Json meta = provenance("overlay", Json::object(), inputs);
    std::vector<const FrameRecord*> frames;
    for (const auto& f : ds.frames) {
        if (a.images.empty() || std::find(a.images.begin(), a.images.end(), f.image_id) != a.images.end()) {
            frames.push_back(&f);
        }
    }
    fs::create_directories(a.out_dir);
    parallel_for(frames.size(), workers, [&](std::size_t i) {
        const FrameRecord& f = *frames[i];
        std::vector<OverlayLayer> layers{{"gt", "#2ca02c", f.instances}};
        if (auto it = preds.find(f.key()); it != preds.end()) layers.push_back({"pred", "#d62728", it->second});
        char name[64];
        std::snprintf(name, sizeof name, "_%06lld.svg", static_cast<long long>(f.frame_index));
        emit_overlay(f, layers, ds.skeleton, fs::path(a.out_dir) / (f.video_id + name), meta);
    });
    out << "overlay: " << frames.size() << " SVG files -> " << a.out_dir << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

struct SplitArgs {
    std::string config, ann, out;
    Overrides flags;
};

void setup_split(CLI::App* app, SplitArgs& a) {
    app->add_option("--config", a.config, "Split file: {test_videos, val_fraction, seed}");
    app->add_option("--ann", a.ann, "Annotation file")->required();
    app->add_option("--out", a.out, "Split assignment output")->required();
    a.flags.add<std::vector<std::string>>(app, "--test-video", "/test_videos", "Held-out test video (repeatable)");
    a.flags.add<double>(app, "--val-fraction", "/val_fraction", "Validation fraction of the remaining frames");
    a.flags.add<std::uint64_t>(app, "--seed", "/seed", "Shuffle seed");
}

int run_split(SplitArgs& a, std::ostream& out) {
    const Json defaults = {{"test_videos", Json::array()}, {"val_fraction", 0.1}, {"seed", 0}};
    const Json cfg_json = resolve(defaults, a.config, a.flags, "split");
    const SplitConfig cfg = split_config_from_json(cfg_json);
    const Dataset ds = load_annotations(a.ann);
    const SplitAssignment s = make_split(ds, cfg);
    Json j = split_to_json(s, cfg);
    j["info"] = provenance("split", cfg_json, {{"annotations", ds.digest}});
    write_json(a.out, j);
    out << "split: train " << s.train.size() << ", val " << s.val.size() << ", test " << s.test.size() << " frames\n";
    return kOk;
}

constexpr const char* kFooter =
    "Exit codes: 0 success, 1 internal error, 2 usage error, 3 missing/unwritable file,\n"
    "            4 malformed JSON, 5 schema or invariant violation.\n"
    "Config precedence: flags > --config JSON file > built-in defaults.\n"
    "HERDPOSE_WORKERS sets the worker count; results do not depend on it.";

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"herdpose: tiling, patching, evaluation and tracking for aerial multi-animal pose data"};
    app.footer(kFooter);
    app.require_subcommand(1);

    SynthArgs synth;
    TileArgs tile;
    PatchArgs patch;
    EvalArgs eval;
    ReportArgs report;
    TrackArgs track;
    OverlayArgs overlay;
    SplitArgs split;

    setup_synth(app.add_subcommand("synth", "Generate a synthetic herd with corrupted predictions"), synth);
    setup_tile(app.add_subcommand("tile", "Tile annotated frames into overlapping windows"), tile);
    setup_patch(app.add_subcommand("patch", "Cut square per-animal patches (coordinates only)"), patch);
    setup_eval(app.add_subcommand("eval", "Detection mAP and per-keypoint RMSE/PCK/OKS"), eval);
    auto* rep = app.add_subcommand("report", "Print a saved metric report as a table");
    rep->add_option("--in", report.in, "Report JSON from eval --out-json")->required();
    setup_track(app.add_subcommand("track", "Track individuals and export segment manifests"), track);
    auto* ov = app.add_subcommand("overlay", "Write one SVG overlay per frame");
    ov->add_option("--ann", overlay.ann, "Annotation file")->required();
    ov->add_option("--pred", overlay.pred, "Prediction file");
    ov->add_option("--out-dir", overlay.out_dir, "Output directory")->required();
    ov->add_option("--image-id", overlay.images, "Only these image ids (repeatable)");
    setup_split(app.add_subcommand("split", "Video-exclusive train/val/test split"), split);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    const int workers = default_workers();
    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "synth") return run_synth(synth, out);
        if (name == "tile") return run_tile(tile, out, workers);
        if (name == "patch") return run_patch(patch, out);
        if (name == "eval") return run_eval(eval, out, workers);
        if (name == "report") return run_report(report, out);
        if (name == "track") return run_track(track, out, workers);
        if (name == "overlay") return run_overlay(overlay, out, workers);
        if (name == "split") return run_split(split, out);
        err << "error: unknown subcommand " << name << "\n";
        return kUsage;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        err << "error[io]: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "error[io]: " << e.what() << "\n";
        return kIo;
    } catch (const ParseError& e) {
        err << "error[parse]: " << e.what() << "\n";
        return kParse;
    } catch (const ValidationError& e) {
        err << "error[validation]: " << e.what() << "\n";
        return kValidation;
    } catch (const Json::exception& e) {
        err << "error[validation]: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
}

}  // namespace herdpose::cli
