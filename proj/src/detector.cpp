#include "dpark/detector.hpp"

#include <algorithm>
#include <charconv>

#include "dpark/detector_json.hpp"

namespace dpark {

namespace {

constexpr std::array<std::string_view, 7> kClassNames = {"access_aisle", "curbside",  "dp_no_aisle", "dp_one_aisle",
                                                         "dp_two_aisle", "one_aisle", "two_aisle"};

template <class T>
bool parse_number(std::string_view s, T& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

double finite_number(const nlohmann::json& j, const char* what) {
    if (!j.is_number()) throw ParseError(std::string(what) + " must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string(what) + " must be finite");
    return v;
}

double confidence_from(const nlohmann::json& j) {
    if (!j.contains("confidence")) throw ParseError("detection lacks confidence");
    const double c = finite_number(j.at("confidence"), "confidence");
    if (c < 0.0 || c > 1.0) throw ParseError("confidence outside [0, 1]");
    return c;
}

} // namespace

std::string_view to_string(ParkingClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::optional<ParkingClass> parse_parking_class(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i)
        if (kClassNames[i] == name) return kAllParkingClasses[i];
    return std::nullopt;
}

std::string_view to_string(ObbKind k) { return k == ObbKind::space ? "space" : "aisle"; }

std::optional<ObbKind> parse_obb_kind(std::string_view name) {
    if (name == "space") return ObbKind::space;
    if (name == "aisle") return ObbKind::aisle;
    return std::nullopt;
}

std::string ImageKey::str() const {
    return std::to_string(tile.z) + "/" + std::to_string(tile.x) + "/" + std::to_string(tile.y) + "@" +
           std::to_string(offset_x) + "," + std::to_string(offset_y);
}

ImageKey ImageKey::parse(std::string_view text) {
    const auto fail = [&] { return ParseError("malformed image key '" + std::string(text) + "'"); };
    const auto s1 = text.find('/');
    const auto s2 = text.find('/', s1 == std::string_view::npos ? s1 : s1 + 1);
    const auto at = text.find('@');
    const auto comma = text.find(',', at == std::string_view::npos ? at : at + 1);
    if (s1 == std::string_view::npos || s2 == std::string_view::npos || at == std::string_view::npos ||
        comma == std::string_view::npos || !(s1 < s2 && s2 < at && at < comma))
        throw fail();
    ImageKey k;
    if (!parse_number(text.substr(0, s1), k.tile.z) || !parse_number(text.substr(s1 + 1, s2 - s1 - 1), k.tile.x) ||
        !parse_number(text.substr(s2 + 1, at - s2 - 1), k.tile.y) ||
        !parse_number(text.substr(at + 1, comma - at - 1), k.offset_x) ||
        !parse_number(text.substr(comma + 1), k.offset_y))
        throw fail();
    return k;
}

Detector::Detector(std::shared_ptr<Backend> backend, DetectorThresholds thresholds)
    : backend_(std::move(backend)), thresholds_(thresholds) {
    if (!backend_) throw InvalidArgument("detector needs a backend");
    for (double t : {thresholds_.locate, thresholds_.orient})
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("confidence threshold outside [0, 1]");
}

std::vector<Detection> Detector::locate(const ImageKey& key, const RasterImage& img) const {
    if (img.width() != kLocateInputSize || img.height() != kLocateInputSize)
        throw InvalidArgument("locate expects a 512x512 image");
    auto dets = backend_->locate(key, img);
    std::erase_if(dets, [&](const Detection& d) {
        return d.cls == ParkingClass::access_aisle || d.confidence < thresholds_.locate;
    });
    return dets;
}

std::vector<OBBDetection> Detector::orient(const ImageKey& key, const RasterImage& img) const {
    if (img.width() != kOrientInputSize || img.height() != kOrientInputSize)
        throw InvalidArgument("orient expects a 100x100 image");
    auto dets = backend_->orient(key, img);
    std::erase_if(dets, [&](const OBBDetection& d) { return d.confidence < thresholds_.orient; });
    return dets;
}

nlohmann::json to_json(const Detection& d) {
    return {{"class", to_string(d.cls)},
            {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
            {"confidence", d.confidence}};
}

nlohmann::json to_json(const OrientedBox& b) {
    return nlohmann::json::array({b.center.x, b.center.y, b.length, b.width, b.theta});
}

nlohmann::json to_json(const OBBDetection& d) {
    return {{"kind", to_string(d.kind)}, {"obb", to_json(d.obb)}, {"confidence", d.confidence}};
}

Detection detection_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("detection must be an object");
    if (!j.contains("class") || !j.at("class").is_string()) throw ParseError("detection lacks a class string");
    const auto name = j.at("class").get<std::string>();
    const auto cls = parse_parking_class(name);
    if (!cls) throw ParseError("unknown class '" + name + "'");
    if (!j.contains("bbox") || !j.at("bbox").is_array() || j.at("bbox").size() != 4)
        throw ParseError("bbox must be [x, y, w, h]");
    const auto& b = j.at("bbox");
    Detection d;
    d.cls = *cls;
    d.bbox = {finite_number(b[0], "bbox x"), finite_number(b[1], "bbox y"), finite_number(b[2], "bbox w"),
              finite_number(b[3], "bbox h")};
    if (!(d.bbox.w > 0 && d.bbox.h > 0)) throw ParseError("bbox must have positive size");
    d.confidence = confidence_from(j);
    return d;
}

OrientedBox obb_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw ParseError("obb must be an array");
    if (j.size() == 5) {
        const double cx = finite_number(j[0], "obb cx"), cy = finite_number(j[1], "obb cy");
        const double a = finite_number(j[2], "obb length"), b = finite_number(j[3], "obb width");
        if (!(a > 0 && b > 0)) throw ParseError("obb must have positive size");
        return OrientedBox::normalized({cx, cy}, a, b, finite_number(j[4], "obb theta"));
    }
    if (j.size() == 4) {
        std::array<Vec2, 4> corners;
        for (std::size_t i = 0; i < 4; ++i) {
            if (!j[i].is_array() || j[i].size() != 2) throw ParseError("obb corner must be [x, y]");
            corners[i] = {finite_number(j[i][0], "corner x"), finite_number(j[i][1], "corner y")};
        }
        auto box = OrientedBox::from_corners(corners);
        if (!(box.width > 0)) throw ParseError("degenerate obb corners");
        return box;
    }
    throw ParseError("obb must be [cx, cy, length, width, theta] or four corners");
}

OBBDetection obb_detection_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("detection must be an object");
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ParseError("detection lacks a kind string");
    const auto name = j.at("kind").get<std::string>();
    const auto kind = parse_obb_kind(name);
    if (!kind) throw ParseError("unknown kind '" + name + "'");
    if (!j.contains("obb")) throw ParseError("detection lacks obb");
    return {*kind, obb_from_json(j.at("obb")), confidence_from(j)};
}

std::vector<Detection> detections_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ParseError("detections must be an array");
    std::vector<Detection> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(detection_from_json(j));
    return out;
}

std::vector<OBBDetection> obb_detections_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ParseError("detections must be an array");
    std::vector<OBBDetection> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(obb_detection_from_json(j));
    return out;
}

} // namespace dpark
