#pragma once

#include <vector>

#include <json.hpp>

#include "dpark/detector.hpp"

namespace dpark {

// Wire schema shared by the sidecar protocol and mock scenarios:
//   locate: {"class": name, "bbox": [x, y, w, h], "confidence": c}
//   orient: {"kind": "space"|"aisle", "obb": [cx, cy, length, width, theta], "confidence": c}
// "obb" may also be given as four [x, y] corners; it is normalized either way.

nlohmann::json to_json(const Detection& d);
nlohmann::json to_json(const OBBDetection& d);

/// Throws ParseError describing the first offending field.
Detection detection_from_json(const nlohmann::json& j);
OBBDetection obb_detection_from_json(const nlohmann::json& j);

std::vector<Detection> detections_from_json(const nlohmann::json& arr);
std::vector<OBBDetection> obb_detections_from_json(const nlohmann::json& arr);

OrientedBox obb_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OrientedBox& b);

} // namespace dpark
