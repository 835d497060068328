#include "herdpose/overlay.hpp"

#include <sstream>

namespace herdpose {

namespace {

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

const std::string& f6(double v, std::string& buf) {
    buf = format_fixed6(v);
    return buf;
}

}  // namespace

std::string render_overlay(const FrameRecord& frame, const std::vector<OverlayLayer>& layers,
                           const Skeleton& skeleton, const Json& meta) {
    std::ostringstream o;
    std::string a, b, c, d;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << frame.width << "\" height=\"" << frame.height
      << "\" viewBox=\"0 0 " << frame.width << " " << frame.height << "\">\n";
    Json m = meta;
    m["video_id"] = frame.video_id;
    m["frame_index"] = frame.frame_index;
    m["image_id"] = frame.image_id;
    o << "<metadata>" << xml_escape(dump_canonical(m, false)) << "</metadata>\n";

    for (const auto& layer : layers) {
        for (const auto& inst : layer.instances) {
            o << "<g class=\"" << layer.css_class << "\" data-id=\"" << inst.id << "\"";
            if (inst.track_id) o << " data-track=\"" << *inst.track_id << "\"";
            o << ">\n";
            o << "<rect x=\"" << f6(inst.bbox.x, a) << "\" y=\"" << f6(inst.bbox.y, b) << "\" width=\""
              << f6(inst.bbox.w, c) << "\" height=\"" << f6(inst.bbox.h, d) << "\" fill=\"none\" stroke=\""
              << layer.color << "\" stroke-width=\"1\"/>\n";
            if (inst.pose) {
                const auto& kps = inst.pose->keypoints;
                for (auto [i, j] : skeleton.edges) {
                    const auto& p = kps[std::size_t(i)];
                    const auto& q = kps[std::size_t(j)];
                    if (!p.labeled() || !q.labeled()) continue;
                    o << "<line class=\"edge\" x1=\"" << f6(p.x, a) << "\" y1=\"" << f6(p.y, b) << "\" x2=\""
                      << f6(q.x, c) << "\" y2=\"" << f6(q.y, d) << "\" stroke=\"" << layer.color
                      << "\" stroke-width=\"0.5\"/>\n";
                }
                for (std::size_t i = 0; i < kps.size(); ++i) {
                    const auto& k = kps[i];
                    if (!k.labeled()) continue;
                    const bool visible = k.vis == Visibility::Visible;
                    o << "<circle class=\"kp " << (visible ? "visible" : "occluded") << "\" data-slot=\"" << i
                      << "\" cx=\"" << f6(k.x, a) << "\" cy=\"" << f6(k.y, b) << "\" r=\"1.5\" fill=\""
                      << (visible ? layer.color : "none") << "\" stroke=\"" << layer.color << "\"/>\n";
                }
            }
            if (inst.track_id) {
                o << "<text x=\"" << f6(inst.bbox.x, a) << "\" y=\"" << f6(inst.bbox.y - 2.0, b)
                  << "\" font-size=\"10\" fill=\"" << layer.color << "\">" << *inst.track_id << "</text>\n";
            }
            o << "</g>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

void emit_overlay(const FrameRecord& frame, const std::vector<OverlayLayer>& layers, const Skeleton& skeleton,
                  const std::filesystem::path& out, const Json& meta) {
    write_file_atomic(out, render_overlay(frame, layers, skeleton, meta));
}

}  // namespace herdpose
