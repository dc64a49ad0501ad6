#include "dpark/characterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpark/error.hpp"

namespace dpark::characterize {

std::optional<double> ray_obb_intersection(Vec2 origin, Vec2 direction, const OrientedBox& box) {
    // Slab test in the box frame.
    const Vec2 rel = origin - box.center;
    const Vec2 axes[2] = {box.axis(), box.normal()};
    const double half[2] = {box.length / 2.0, box.width / 2.0};
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i) {
        const double o = dot(rel, axes[i]);
        const double d = dot(direction, axes[i]);
        if (std::abs(d) < 1e-15) {
            if (std::abs(o) > half[i]) return std::nullopt;
            continue;
        }
        double t0 = (-half[i] - o) / d;
        double t1 = (half[i] - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return std::nullopt;
    }
    if (t_far < 0.0) return std::nullopt;
    return t_far;
}

std::optional<OBBDetection> select_center_space(const std::vector<OBBDetection>& obbs, Vec2 center) {
    std::optional<OBBDetection> best;
    for (const auto& d : obbs) {
        if (d.kind != ObbKind::space || !d.obb.contains(center)) continue;
        if (!best || d.confidence > best->confidence) best = d;
    }
    return best;
}

namespace {

struct Edge {
    Vec2 a;
    Vec2 b;
};

Edge long_edge(const OrientedBox& space, Side side) {
    const double s = side == Side::right ? 1.0 : -1.0;
    const Vec2 mid = space.center + (s * space.width / 2.0) * space.normal();
    const Vec2 half = (space.length / 2.0) * space.axis();
    return {mid - half, mid + half};
}

double polygon_edge_distance(const OrientedBox& box, const Edge& e) {
    // Zero when either endpoint lies inside the rectangle; otherwise the closest pair of segments.
    if (box.contains(e.a) || box.contains(e.b)) return 0.0;
    const auto c = box.corners();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 4; ++i) best = std::min(best, segment_distance(c[i], c[(i + 1) % 4], e.a, e.b));
    return best;
}

} // namespace

Associations associate_aisles(const OrientedBox& space, const std::vector<OBBDetection>& aisles,
                              const AisleRules& rules) {
    Associations out;
    const Vec2 u = space.axis(), n = space.normal();
    const double half_len = space.length / 2.0;
    for (const auto& a : aisles) {
        if (a.kind != ObbKind::aisle) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& c : a.obb.corners()) {
            const double t = dot(c - space.center, u);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
        const double overlap = std::min(hi, half_len) - std::max(lo, -half_len);
        if (overlap < rules.min_edge_overlap * space.length) continue;
        const Side side = dot(a.obb.center - space.center, n) >= 0.0 ? Side::right : Side::left;
        if (polygon_edge_distance(a.obb, long_edge(space, side)) > rules.max_edge_distance_px) continue;
        (side == Side::right ? out.right : out.left).aisles.push_back(a);
    }
    return out;
}

double aisle_extent(const OrientedBox& space, Side side, const std::vector<OBBDetection>& aisles) {
    const double s = side == Side::right ? 1.0 : -1.0;
    const Vec2 dir = s * space.normal();
    const Vec2 origin = space.center + (space.width / 2.0) * dir;
    double extent = 0.0;
    for (const auto& a : aisles) {
        if (const auto t = ray_obb_intersection(origin, dir, a.obb)) extent = std::max(extent, *t);
    }
    return extent;
}

double total_width(const OrientedBox& space, const SideAssociation& left, const SideAssociation& right) {
    return space.width + left.extent_px + right.extent_px;
}

double width_to_meters(double width_px, const geo::GeoPoint& centroid, int z, int tile_size, bool ground_corrected) {
    if (width_px < 0.0) throw InvalidArgument("negative width");
    if (width_px == 0.0) return 0.0;
    const auto start = geo::lonlat_to_global(centroid, z);
    const geo::GlobalTilePoint end{start.xf + width_px / tile_size, start.yf, z};
    const double meters = geo::mercator_distance(geo::lonlat_to_mercator(geo::global_to_lonlat(start)),
                                                 geo::lonlat_to_mercator(geo::global_to_lonlat(end)));
    return ground_corrected ? meters * geo::ground_scale_correction(centroid.lat) : meters;
}

std::optional<SpaceGeometry> characterize_crop(const std::vector<OBBDetection>& obbs, Vec2 center,
                                               const AisleRules& rules) {
    const auto space = select_center_space(obbs, center);
    if (!space) return std::nullopt;
    SpaceGeometry g;
    g.space = *space;
    g.sides = associate_aisles(space->obb, obbs, rules);
    g.sides.left.extent_px = aisle_extent(space->obb, Side::left, g.sides.left.aisles);
    g.sides.right.extent_px = aisle_extent(space->obb, Side::right, g.sides.right.aisles);
    g.space_width_px = space->obb.width;
    g.total_width_px = total_width(space->obb, g.sides.left, g.sides.right);
    g.ambiguous_axis = space->obb.length < 1.05 * space->obb.width;
    return g;
}

} // namespace dpark::characterize
