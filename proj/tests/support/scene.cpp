#include "scene.hpp"

#include <algorithm>
#include <filesystem>
#include <numbers>

#include "dpark/scanner.hpp"

namespace dpark::testing {

double SceneSpace::expected_total_px() const {
    double total = space.width;
    for (const auto& a : left_aisles) total += a.width;
    for (const auto& a : right_aisles) total += a.width;
    return total;
}

OrientedBox flush_aisle(const OrientedBox& space, double a, bool right_side) {
    const double s = right_side ? 1.0 : -1.0;
    OrientedBox aisle = space;
    aisle.center = space.center + (s * (space.width / 2.0 + a / 2.0)) * space.normal();
    aisle.width = a;
    return aisle;
}

Scene random_scene(std::mt19937_64& rng, geo::TileCoord origin, int cols, int rows, int count, double spacing,
                   double inset) {
    Scene scene{origin, cols, rows, {}};
    std::uniform_real_distribution<double> px(inset, cols * 256.0 - inset), py(inset, rows * 256.0 - inset);
    std::uniform_real_distribution<double> len(36.0, 56.0), wid(14.0, 24.0), ais(8.0, 14.0);
    std::uniform_real_distribution<double> ang(0.0, std::numbers::pi), conf(0.5, 0.99);
    const ParkingClass classes[] = {ParkingClass::dp_no_aisle, ParkingClass::dp_one_aisle, ParkingClass::dp_two_aisle,
                                    ParkingClass::one_aisle,   ParkingClass::two_aisle,    ParkingClass::curbside};
    std::uniform_int_distribution<int> pick(0, 5);
    for (int tries = 0; static_cast<int>(scene.spaces.size()) < count && tries < 100000; ++tries) {
        const Vec2 c{px(rng), py(rng)};
        const bool clear = std::all_of(scene.spaces.begin(), scene.spaces.end(),
                                       [&](const SceneSpace& s) { return norm(s.space.center - c) >= spacing; });
        if (!clear) continue;
        SceneSpace s;
        s.cls = classes[pick(rng)];
        const double l = len(rng), w = wid(rng);
        s.space = OrientedBox::normalized(c, l, std::min(w, l - 1.0), ang(rng));
        s.confidence = conf(rng);
        const bool two = s.cls == ParkingClass::dp_two_aisle || s.cls == ParkingClass::two_aisle;
        const bool one = s.cls == ParkingClass::dp_one_aisle || s.cls == ParkingClass::one_aisle;
        if (two || one) s.right_aisles.push_back(flush_aisle(s.space, ais(rng), true));
        if (two) s.left_aisles.push_back(flush_aisle(s.space, ais(rng), false));
        scene.spaces.push_back(s);
    }
    return scene;
}

ImageKey crop_key(const imagery::Mosaic& m, double cx, double cy, int size) {
    int ox = 0, oy = 0;
    imagery::crop_origin(cx, cy, size, ox, oy);
    const int ts = m.tile_size();
    const std::int64_t gx = m.origin().x * ts + ox, gy = m.origin().y * ts + oy;
    const std::int64_t tx = gx >= 0 ? gx / ts : -((-gx + ts - 1) / ts);
    const std::int64_t ty = gy >= 0 ? gy / ts : -((-gy + ts - 1) / ts);
    return {{tx, ty, m.origin().z}, static_cast<int>(gx - tx * ts), static_cast<int>(gy - ty * ts)};
}

Scenario scenario_for(const Scene& scene) {
    const imagery::Mosaic m(scene.origin, scene.cols, scene.rows);
    Scenario out;
    for (const auto sq : scan::region_squares(m)) {
        for (int pass = 1; pass <= scan::kPassCount; ++pass) {
            const Vec2 o = scan::window_origin(m, sq, pass);
            auto& dets = out.locate[scan::window_key(m, sq, pass).str()];
            for (const auto& s : scene.spaces) {
                const Box b = s.locator_bbox();
                const double x0 = std::max(b.x, o.x), y0 = std::max(b.y, o.y);
                const double x1 = std::min(b.right(), o.x + 512), y1 = std::min(b.bottom(), o.y + 512);
                if (x1 <= x0 || y1 <= y0) continue;
                dets.push_back({s.cls, {x0 - o.x, y0 - o.y, x1 - x0, y1 - y0}, s.confidence});
            }
        }
    }
    for (const auto& s : scene.spaces) {
        const Vec2 c = s.locator_bbox().centroid();
        int ox = 0, oy = 0;
        imagery::crop_origin(c.x, c.y, kOrientInputSize, ox, oy);
        const Vec2 shift{double(ox), double(oy)};
        auto local = [&](OrientedBox b) {
            b.center = b.center - shift;
            return b;
        };
        auto& obbs = out.orient[crop_key(m, c.x, c.y).str()];
        obbs.push_back({ObbKind::space, local(s.space), 0.9});
        for (const auto& a : s.left_aisles) obbs.push_back({ObbKind::aisle, local(a), 0.8});
        for (const auto& a : s.right_aisles) obbs.push_back({ObbKind::aisle, local(a), 0.8});
    }
    return out;
}

void write_black_tiles(const Scene& scene, const std::string& root) {
    const RasterImage black(256, 256);
    for (int r = 0; r < scene.rows; ++r) {
        for (int c = 0; c < scene.cols; ++c) {
            const auto dir = std::filesystem::path(root) / std::to_string(scene.origin.z) /
                             std::to_string(scene.origin.x + c);
            std::filesystem::create_directories(dir);
            write_png((dir / (std::to_string(scene.origin.y + r) + ".png")).string(), black);
        }
    }
}

imagery::BBox scene_bbox(const Scene& scene) {
    const double inset = 0.25 / 256.0;
    const auto& o = scene.origin;
    return {geo::global_to_lonlat({o.x + inset, o.y + inset, o.z}),
            geo::global_to_lonlat({o.x + scene.cols - inset, o.y + scene.rows - inset, o.z})};
}

} // namespace dpark::testing
