#include "dpark/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

namespace dpark {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_half_turn(double theta) {
    double t = std::fmod(theta, kPi);
    if (t < 0) t += kPi;
    if (t >= kPi) t -= kPi;
    return t;
}

} // namespace

OrientedBox OrientedBox::normalized(Vec2 center, double a, double b, double theta) {
    a = std::abs(a);
    b = std::abs(b);
    if (a < b) {
        std::swap(a, b);
        theta += kPi / 2.0;
    }
    return {center, a, b, wrap_half_turn(theta)};
}

OrientedBox OrientedBox::from_corners(const std::array<Vec2, 4>& c) {
    const Vec2 center = 0.25 * (c[0] + c[1] + c[2] + c[3]);
    // Average opposite edges so slightly non-rectangular quads still fit.
    const Vec2 e0 = 0.5 * ((c[1] - c[0]) + (c[2] - c[3]));
    const Vec2 e1 = 0.5 * ((c[3] - c[0]) + (c[2] - c[1]));
    const double theta = std::atan2(e0.y, e0.x);
    return normalized(center, norm(e0), norm(e1), theta);
}

std::array<Vec2, 4> OrientedBox::corners() const {
    const Vec2 u = (length / 2.0) * axis();
    const Vec2 n = (width / 2.0) * normal();
    return {center - u - n, center + u - n, center + u + n, center - u + n};
}

bool OrientedBox::contains(Vec2 p, double eps) const {
    const Vec2 d = p - center;
    return std::abs(dot(d, axis())) <= length / 2.0 + eps && std::abs(dot(d, normal())) <= width / 2.0 + eps;
}

Box OrientedBox::envelope() const { return polygon_envelope(to_polygon(*this)); }

double iou(const Box& a, const Box& b) {
    const double ia = a.area(), ib = b.area();
    if (ia <= 0.0 || ib <= 0.0) return 0.0;
    const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (ia + ib - inter);
}

double polygon_area(const Polygon& poly) {
    double acc = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) acc += cross(poly[i], poly[(i + 1) % n]);
    return std::abs(acc) / 2.0;
}

Box polygon_envelope(const Polygon& poly) {
    if (poly.empty()) return {};
    double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
    for (const auto& p : poly) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

Polygon to_polygon(const Box& b) { return {{b.x, b.y}, {b.right(), b.y}, {b.right(), b.bottom()}, {b.x, b.bottom()}}; }

Polygon to_polygon(const OrientedBox& b) {
    const auto c = b.corners();
    return {c.begin(), c.end()};
}

Polygon clip_to_convex(const Polygon& subject, const Polygon& convex_clip) {
    if (subject.size() < 3 || convex_clip.size() < 3) return {};
    double signed_area = 0.0;
    for (std::size_t i = 0, n = convex_clip.size(); i < n; ++i)
        signed_area += cross(convex_clip[i], convex_clip[(i + 1) % n]);
    const double orient = signed_area >= 0 ? 1.0 : -1.0;

    Polygon out = subject;
    for (std::size_t i = 0, n = convex_clip.size(); i < n && !out.empty(); ++i) {
        const Vec2 a = convex_clip[i], b = convex_clip[(i + 1) % n];
        const auto inside = [&](Vec2 p) { return orient * cross(b - a, p - a) >= 0.0; };
        const auto intersect = [&](Vec2 p, Vec2 q) {
            const double cp = cross(b - a, p - a), cq = cross(b - a, q - a);
            const double t = cp / (cp - cq);
            return p + t * (q - p);
        };
        Polygon input;
        input.swap(out);
        for (std::size_t j = 0, m = input.size(); j < m; ++j) {
            const Vec2 cur = input[j], prev = input[(j + m - 1) % m];
            const bool cin = inside(cur), pin = inside(prev);
            if (cin) {
                if (!pin) out.push_back(intersect(prev, cur));
                out.push_back(cur);
            } else if (pin) {
                out.push_back(intersect(prev, cur));
            }
        }
    }
    return out;
}

namespace {

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    const double t = len2 > 0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(p - (a + t * ab));
}

bool segments_intersect(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    const double d1 = cross(a1 - a0, b0 - a0), d2 = cross(a1 - a0, b1 - a0);
    const double d3 = cross(b1 - b0, a0 - b0), d4 = cross(b1 - b0, a1 - b0);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

} // namespace

double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    if (segments_intersect(a0, a1, b0, b1)) return 0.0;
    return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                     point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

} // namespace dpark
