#include "dpark/eval/coco.hpp"

#include <fstream>
#include <set>

namespace dpark::eval {

namespace {

std::string id_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ParseError("id must be an integer or string");
}

Polygon ring_from_flat(const nlohmann::json& flat) {
    if (!flat.is_array() || flat.size() % 2 != 0) throw ParseError("segmentation ring must be an even-length array");
    Polygon ring;
    for (std::size_t i = 0; i < flat.size(); i += 2) {
        if (!flat[i].is_number() || !flat[i + 1].is_number()) throw ParseError("segmentation coordinate not numeric");
        ring.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
    }
    return ring;
}

} // namespace

Dataset parse_coco(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("COCO document must be an object");
    for (const char* key : {"images", "annotations", "categories"})
        if (!doc.contains(key) || !doc.at(key).is_array()) throw ParseError(std::string("COCO document lacks ") + key);

    std::map<std::string, ParkingClass> categories;
    for (const auto& c : doc.at("categories")) {
        const auto name = c.value("name", std::string{});
        const auto cls = parse_parking_class(name);
        if (!cls) throw ParseError("unknown category '" + name + "'");
        categories[id_text(c.at("id"))] = *cls;
    }

    Dataset ds;
    std::set<std::string> image_ids;
    for (const auto& im : doc.at("images")) {
        ImageInfo info;
        info.id = id_text(im.at("id"));
        info.file_name = im.value("file_name", std::string{});
        info.width = im.value("width", 0);
        info.height = im.value("height", 0);
        image_ids.insert(info.id);
        ds.images.push_back(std::move(info));
    }

    for (const auto& a : doc.at("annotations")) {
        GroundTruthObject obj;
        obj.annotation_id = a.contains("id") && a.at("id").is_number_integer() ? a.at("id").get<std::int64_t>() : 0;
        obj.image_id = id_text(a.at("image_id"));
        if (!image_ids.count(obj.image_id))
            throw ParseError("annotation " + std::to_string(obj.annotation_id) + " references missing image " + obj.image_id);
        const auto cat = id_text(a.at("category_id"));
        const auto it = categories.find(cat);
        if (it == categories.end()) throw ParseError("annotation references unknown category id " + cat);
        obj.cls = it->second;

        if (a.contains("segmentation") && a.at("segmentation").is_array() && !a.at("segmentation").empty()) {
            double best = -1.0;
            for (const auto& ring_json : a.at("segmentation")) {
                auto ring = ring_from_flat(ring_json);
                const double area = polygon_area(ring);
                if (area > best) {
                    best = area;
                    obj.polygon = std::move(ring);
                }
            }
        } else if (a.contains("bbox") && a.at("bbox").is_array() && a.at("bbox").size() == 4) {
            const auto& b = a.at("bbox");
            obj.polygon = to_polygon(Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
        } else {
            throw ParseError("annotation " + std::to_string(obj.annotation_id) + " has neither segmentation nor bbox");
        }
        if (obj.polygon.size() < 3)
            throw ParseError("annotation " + std::to_string(obj.annotation_id) + " polygon has fewer than 3 vertices");
        ds.objects.push_back(std::move(obj));
    }
    return ds;
}

Dataset load_coco(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    try {
        return parse_coco(doc);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

nlohmann::json to_coco(const Dataset& ds) {
    nlohmann::json doc = {{"images", nlohmann::json::array()},
                          {"annotations", nlohmann::json::array()},
                          {"categories", nlohmann::json::array()}};
    for (std::size_t i = 0; i < kAllParkingClasses.size(); ++i)
        doc["categories"].push_back({{"id", i + 1}, {"name", to_string(kAllParkingClasses[i])}});
    const auto numeric_or_text = [](const std::string& id) -> nlohmann::json {
        if (!id.empty() && id.find_first_not_of("0123456789") == std::string::npos) return std::stoll(id);
        return id;
    };
    for (const auto& im : ds.images)
        doc["images"].push_back(
            {{"id", numeric_or_text(im.id)}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
    std::int64_t next_id = 1;
    for (const auto& o : ds.objects) {
        nlohmann::json flat = nlohmann::json::array();
        for (const auto& p : o.polygon) {
            flat.push_back(p.x);
            flat.push_back(p.y);
        }
        const auto env = polygon_envelope(o.polygon);
        doc["annotations"].push_back({{"id", o.annotation_id ? o.annotation_id : next_id},
                                      {"image_id", numeric_or_text(o.image_id)},
                                      {"category_id", static_cast<int>(o.cls) + 1},
                                      {"segmentation", nlohmann::json::array({flat})},
                                      {"bbox", {env.x, env.y, env.w, env.h}},
                                      {"area", polygon_area(o.polygon)},
                                      {"iscrowd", 0}});
        ++next_id;
    }
    return doc;
}

std::map<ParkingClass, std::size_t> class_histogram(const Dataset& ds) {
    std::map<ParkingClass, std::size_t> h;
    for (auto c : kAllParkingClasses) h[c] = 0;
    for (const auto& o : ds.objects) ++h[o.cls];
    return h;
}

} // namespace dpark::eval
