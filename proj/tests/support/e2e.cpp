#include "e2e.hpp"

#include <filesystem>

#include <fmt/format.h>

namespace dpark::testing {

namespace fs = std::filesystem;

EndToEnd prepare_end_to_end(std::uint64_t seed, const std::string& dir, geo::TileCoord origin, int cols, int rows,
                            int count) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::mt19937_64 rng(seed);
    EndToEnd e{random_scene(rng, origin, cols, rows, count), dir, {}};
    write_black_tiles(e.scene, (fs::path(dir) / "tiles").string());
    save_scenario((fs::path(dir) / "scenario.json").string(), scenario_for(e.scene));

    auto& c = e.config;
    c.source.kind = tiles::TileSource::Kind::local_directory;
    c.source.location = (fs::path(dir) / "tiles").string();
    c.source.tile_size = 256;
    c.source.native_zoom = origin.z;
    c.zoom = origin.z;
    c.bbox = scene_bbox(e.scene);
    c.backend.mock_scenario = (fs::path(dir) / "scenario.json").string();
    c.output_json = (fs::path(dir) / "report.json").string();
    c.output_geojson = (fs::path(dir) / "report.geojson").string();
    c.seed = seed;
    return e;
}

OracleErrors compare_to_scene(const pipeline::RegionReport& report, const Scene& scene) {
    OracleErrors out;
    if (report.spaces.size() != scene.spaces.size())
        out.mismatches.push_back(fmt::format("{} spaces reported, {} in the scene", report.spaces.size(), scene.spaces.size()));
    const Vec2 origin_px{static_cast<double>(scene.origin.x * 256), static_cast<double>(scene.origin.y * 256)};
    std::vector<char> used(report.spaces.size(), 0);
    for (std::size_t i = 0; i < scene.spaces.size(); ++i) {
        const auto& s = scene.spaces[i];
        const Vec2 want = origin_px + s.space.center;
        std::size_t best = report.spaces.size();
        double best_d = 1e300;
        for (std::size_t k = 0; k < report.spaces.size(); ++k) {
            const double d = norm(report.spaces[k].centroid_px - want);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        if (best == report.spaces.size() || best_d > 1.0) {
            out.mismatches.push_back(fmt::format("scene space {} not reported", i));
            continue;
        }
        if (used[best]) out.mismatches.push_back(fmt::format("report space {} claimed twice", best));
        used[best] = 1;
        const auto& r = report.spaces[best];
        out.max_centroid_px = std::max(out.max_centroid_px, best_d);
        if (r.cls != s.cls)
            out.mismatches.push_back(fmt::format("space {}: class {} != {}", i, to_string(r.cls), to_string(s.cls)));
        if (!r.total_width_px || !r.space_width_px) {
            out.mismatches.push_back(fmt::format("space {} uncharacterized", i));
            continue;
        }
        out.max_width_px = std::max({out.max_width_px, std::abs(*r.total_width_px - s.expected_total_px()),
                                     std::abs(*r.space_width_px - s.space.width)});
    }
    return out;
}

std::string report_without_timestamp(const std::string& json_text) {
    auto j = nlohmann::json::parse(json_text);
    j.erase("timestamp");
    return j.dump();
}

} // namespace dpark::testing
