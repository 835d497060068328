#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "herdpose/core.hpp"
#include "herdpose/io.hpp"

namespace herdpose {

struct OverlayLayer {
    std::string css_class;  // "gt" or "pred"
    std::string color;
    std::vector<Instance> instances;
};

/// SVG in frame pixel coordinates: a rectangle per box, a line per skeleton
/// edge with both ends labeled, a circle per labeled keypoint (occluded ones
/// hollow) and a text label with the track id when present.
std::string render_overlay(const FrameRecord& frame, const std::vector<OverlayLayer>& layers,
                           const Skeleton& skeleton, const Json& meta = Json::object());

void emit_overlay(const FrameRecord& frame, const std::vector<OverlayLayer>& layers, const Skeleton& skeleton,
                  const std::filesystem::path& out, const Json& meta = Json::object());

}  // namespace herdpose
