#pragma once

#include <optional>
#include <vector>

#include "dpark/detector.hpp"
#include "dpark/geo.hpp"

namespace dpark::characterize {

struct AisleRules {
    /// Minimum overlap of the aisle's projection with a long edge, as a fraction of its length.
    double min_edge_overlap = 0.4;
    /// Maximum distance between the aisle rectangle and the long edge.
    double max_edge_distance_px = 20.0;
};

/// Long edges of a space sit at +-width/2 along OrientedBox::normal(); `right` is the +normal side.
enum class Side { left, right };

struct SideAssociation {
    Side side = Side::left;
    std::vector<OBBDetection> aisles;
    double extent_px = 0.0;
};

/// Farthest parametric hit of the ray origin + t*direction (t >= 0) with the box, or nullopt
/// when the ray misses. `direction` must be a unit vector.
std::optional<double> ray_obb_intersection(Vec2 origin, Vec2 direction, const OrientedBox& box);

/// Highest-confidence space whose rectangle contains `center`; the first one wins ties.
std::optional<OBBDetection> select_center_space(const std::vector<OBBDetection>& obbs, Vec2 center = {50.0, 50.0});

struct Associations {
    SideAssociation left{Side::left, {}, 0.0};
    SideAssociation right{Side::right, {}, 0.0};
};

/// Assigns aisles to the long sides they run along; extents are left at 0.
Associations associate_aisles(const OrientedBox& space, const std::vector<OBBDetection>& aisles,
                              const AisleRules& rules = {});

/// Distance from the midpoint of `side`'s long edge, along the outward normal, to the farthest
/// point where that ray meets any of `aisles`. Zero when nothing is hit.
double aisle_extent(const OrientedBox& space, Side side, const std::vector<OBBDetection>& aisles);

double total_width(const OrientedBox& space, const SideAssociation& left, const SideAssociation& right);

/// Converts a pixel span at `centroid` to EPSG:3857 meters by projecting both ends of the
/// span; scaled by cos(lat) when `ground_corrected`.
double width_to_meters(double width_px, const geo::GeoPoint& centroid, int z, int tile_size, bool ground_corrected);

struct SpaceGeometry {
    OBBDetection space;
    Associations sides;
    double space_width_px = 0.0;
    double total_width_px = 0.0;
    /// length/width below 1.05: which axis is "long" is a guess.
    bool ambiguous_axis = false;
};

/// Full characterization of one crop, or nullopt when no space contains the crop center.
std::optional<SpaceGeometry> characterize_crop(const std::vector<OBBDetection>& obbs, Vec2 center = {50.0, 50.0},
                                               const AisleRules& rules = {});

} // namespace dpark::characterize
