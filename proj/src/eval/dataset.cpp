#include "dpark/eval/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "dpark/imagery.hpp"
#include "dpark/raster.hpp"

namespace dpark::eval {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Unbiased draw in [0, n) by rejection; portable unlike std::uniform_int_distribution.
std::uint64_t draw_below(std::mt19937_64& engine, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const auto v = engine();
        if (v < limit) return v % n;
    }
}

std::vector<std::string> sample_without_replacement(std::vector<std::string> pool, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 engine(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + draw_below(engine, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

HintImage hint_from_json(const nlohmann::json& j) {
    HintImage h;
    const auto& id = j.contains("image_id") ? j.at("image_id") : j.at("id");
    h.id = id.is_string() ? id.get<std::string>() : std::to_string(id.get<std::int64_t>());
    h.region = j.at("region").get<std::string>();
    if (j.contains("detections"))
        for (const auto& d : j.at("detections")) h.confidences.push_back(d.at("confidence").get<double>());
    return h;
}

std::map<std::string, std::size_t> quota_map(const nlohmann::json& j) {
    std::map<std::string, std::size_t> m;
    for (const auto& [region, n] : j.items()) m[region] = n.get<std::size_t>();
    return m;
}

} // namespace

std::vector<HintImage> load_hint_images(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<HintImage> out;
    try {
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && (text[first] == '[' || text.find("\"images\"") != std::string::npos)) {
            const auto doc = nlohmann::json::parse(text);
            const auto& arr = doc.is_array() ? doc : doc.at("images");
            for (const auto& j : arr) out.push_back(hint_from_json(j));
        } else {
            std::istringstream lines(text);
            std::string line;
            while (std::getline(lines, line))
                if (line.find_first_not_of(" \t\r") != std::string::npos)
                    out.push_back(hint_from_json(nlohmann::json::parse(line)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return out;
}

PoolQuotas quotas_from_json(const nlohmann::json& j) {
    PoolQuotas q;
    try {
        if (j.contains("may_contain")) q.may_contain = quota_map(j.at("may_contain"));
        if (j.contains("may_not_contain")) q.may_not_contain = quota_map(j.at("may_not_contain"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("quotas: ") + e.what());
    }
    return q;
}

PoolSample sample_pools(const std::vector<HintImage>& images, const PoolQuotas& quotas, double threshold,
                        std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> contain, not_contain;
    for (const auto& im : images) {
        const bool hit = std::any_of(im.confidences.begin(), im.confidences.end(), [&](double c) { return c > threshold; });
        (hit ? contain : not_contain)[im.region].push_back(im.id);
    }
    PoolSample out;
    out.seed = seed;
    out.threshold = threshold;
    for (const auto& [r, ids] : contain) out.may_contain_pool_size[r] = ids.size();
    for (const auto& [r, ids] : not_contain) out.may_not_contain_pool_size[r] = ids.size();

    const auto draw = [&](const char* pool_name, const std::map<std::string, std::size_t>& quota,
                          std::map<std::string, std::vector<std::string>>& pools,
                          std::map<std::string, std::vector<std::string>>& dest) {
        for (const auto& [region, k] : quota) {
            auto& pool = pools[region];
            if (k > pool.size())
                throw InvalidArgument(std::string(pool_name) + " quota " + std::to_string(k) + " for region " + region +
                                      " exceeds pool size " + std::to_string(pool.size()));
            dest[region] = sample_without_replacement(pool, k, seed ^ fnv1a(std::string(pool_name) + "/" + region));
        }
    };
    draw("may_contain", quotas.may_contain, contain, out.may_contain);
    draw("may_not_contain", quotas.may_not_contain, not_contain, out.may_not_contain);
    return out;
}

nlohmann::json to_json(const PoolSample& s) {
    return {{"seed", s.seed},
            {"threshold", s.threshold},
            {"pool_sizes", {{"may_contain", s.may_contain_pool_size}, {"may_not_contain", s.may_not_contain_pool_size}}},
            {"may_contain", s.may_contain},
            {"may_not_contain", s.may_not_contain}};
}

CropPlanSet plan_crops(const Dataset& ds, int size, bool test_split) {
    std::map<std::string, const ImageInfo*> images;
    for (const auto& im : ds.images) images[im.id] = &im;
    std::map<std::string, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < ds.objects.size(); ++i) by_image[ds.objects[i].image_id].push_back(i);

    CropPlanSet out;
    for (std::size_t i = 0; i < ds.objects.size(); ++i) {
        const auto& obj = ds.objects[i];
        if (obj.cls == ParkingClass::access_aisle) continue;
        const auto* info = images.at(obj.image_id);
        const int iw = info->width > 0 ? info->width : 512, ih = info->height > 0 ? info->height : 512;
        const Vec2 c = polygon_envelope(obj.polygon).centroid();
        CropPlan plan;
        plan.source_image_id = obj.image_id;
        plan.center_object = i;
        imagery::crop_origin(c.x, c.y, size, plan.origin_x, plan.origin_y);
        plan.padded = plan.origin_x < 0 || plan.origin_y < 0 || plan.origin_x + size > iw || plan.origin_y + size > ih;
        if (plan.padded && test_split) {
            ++out.excluded_edge;
            continue;
        }
        const Box crop_box{static_cast<double>(plan.origin_x), static_cast<double>(plan.origin_y),
                           static_cast<double>(size), static_cast<double>(size)};
        for (std::size_t j : by_image[obj.image_id]) {
            const auto& other = ds.objects[j];
            const Box env = polygon_envelope(other.polygon);
            if (std::min(env.right(), crop_box.right()) <= std::max(env.x, crop_box.x) ||
                std::min(env.bottom(), crop_box.bottom()) <= std::max(env.y, crop_box.y))
                continue;
            GroundTruthObject label = other;
            for (auto& p : label.polygon) p = p - Vec2{crop_box.x, crop_box.y};
            plan.labels.push_back(std::move(label));
        }
        out.crops.push_back(std::move(plan));
    }
    return out;
}

CropExport export_crops(const Dataset& ds, const std::string& images_dir, const std::string& out_dir, int size,
                        bool test_split) {
    namespace fs = std::filesystem;
    const auto plans = plan_crops(ds, size, test_split);
    std::map<std::string, const ImageInfo*> images;
    for (const auto& im : ds.images) images[im.id] = &im;

    CropExport out;
    out.excluded_edge = plans.excluded_edge;
    fs::create_directories(out_dir);
    std::string cached_id;
    RasterImage source;
    std::int64_t next_annotation = 1;
    for (std::size_t n = 0; n < plans.crops.size(); ++n) {
        const auto& plan = plans.crops[n];
        if (plan.source_image_id != cached_id) {
            source = read_image((fs::path(images_dir) / images.at(plan.source_image_id)->file_name).string());
            cached_id = plan.source_image_id;
        }
        RasterImage crop(size, size);
        crop.blit(source, -plan.origin_y, -plan.origin_x);
        const auto name = std::to_string(n) + ".png";
        write_png((fs::path(out_dir) / name).string(), crop);
        const auto crop_id = std::to_string(n);
        out.crops.images.push_back({crop_id, name, size, size});
        for (auto label : plan.labels) {
            label.image_id = crop_id;
            label.annotation_id = next_annotation++;
            out.crops.objects.push_back(std::move(label));
        }
    }
    return out;
}

} // namespace dpark::eval
