#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/detector.hpp"
#include "dpark/geometry.hpp"

namespace dpark::eval {

struct ImageInfo {
    std::string id;
    std::string file_name;
    int width = 0;
    int height = 0;
};

struct GroundTruthObject {
    std::string image_id;
    ParkingClass cls = ParkingClass::dp_one_aisle;
    Polygon polygon;
    std::int64_t annotation_id = 0;
};

struct Dataset {
    std::vector<ImageInfo> images;
    std::vector<GroundTruthObject> objects;
};

/// Parses COCO-style JSON (images / annotations with polygon segmentation / categories).
/// Categories must name ParkingClass values; throws ParseError naming an unknown category or a
/// dangling image reference.
Dataset parse_coco(const nlohmann::json& doc);
Dataset load_coco(const std::string& path);

nlohmann::json to_coco(const Dataset& ds);

std::map<ParkingClass, std::size_t> class_histogram(const Dataset& ds);

} // namespace dpark::eval
