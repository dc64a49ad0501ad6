#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace dpark {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

/// Axis-aligned box: top-left corner plus size, pixel units.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Vec2 centroid() const { return {x + w / 2.0, y + h / 2.0}; }
    double area() const { return w > 0 && h > 0 ? w * h : 0.0; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Rectangle with arbitrary rotation. `theta` is the direction of the long axis in image
/// coordinates (x right, y down), normalized to [0, pi); length >= width.
struct OrientedBox {
    Vec2 center;
    double length = 0.0;
    double width = 0.0;
    double theta = 0.0;

    /// Canonical form of any (center, side a along theta, side b) rectangle.
    static OrientedBox normalized(Vec2 center, double a, double b, double theta);
    /// Fits the canonical form to four corners given in boundary order.
    static OrientedBox from_corners(const std::array<Vec2, 4>& corners);

    /// Unit vector along the long axis.
    Vec2 axis() const { return {std::cos(theta), std::sin(theta)}; }
    /// Unit vector along the short axis: the long axis rotated by +90 degrees.
    Vec2 normal() const { return {-std::sin(theta), std::cos(theta)}; }

    /// Corners in boundary order, starting at center - L/2 axis - W/2 normal.
    std::array<Vec2, 4> corners() const;
    bool contains(Vec2 p, double eps = 1e-9) const;
    Box envelope() const;
    double area() const { return length * width; }

    friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

using Polygon = std::vector<Vec2>;

/// Intersection over union of two axis-aligned boxes; 0 when either is degenerate.
double iou(const Box& a, const Box& b);

/// Shoelace area (absolute value).
double polygon_area(const Polygon& poly);
Box polygon_envelope(const Polygon& poly);
Polygon to_polygon(const Box& b);
Polygon to_polygon(const OrientedBox& b);

/// Intersection of an arbitrary simple polygon with a convex polygon (Sutherland-Hodgman).
Polygon clip_to_convex(const Polygon& subject, const Polygon& convex_clip);

/// Smallest distance between the segments [a0, a1] and [b0, b1].
double segment_distance(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1);

} // namespace dpark
