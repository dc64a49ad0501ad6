#pragma once

#include <cstdint>
#include <numbers>

namespace dpark::geo {

inline constexpr double kEarthRadius = 6378137.0;
inline constexpr double kMercatorHalfExtent = std::numbers::pi * kEarthRadius;
/// Latitude where the square Web Mercator world ends.
inline constexpr double kMaxLatitude = 85.0511287798066;

struct TileCoord {
    std::int64_t x = 0;
    std::int64_t y = 0;
    int z = 0;

    friend bool operator==(const TileCoord&, const TileCoord&) = default;
    friend auto operator<=>(const TileCoord&, const TileCoord&) = default;
};

/// Fractional position in tile units at zoom z.
struct GlobalTilePoint {
    double xf = 0.0;
    double yf = 0.0;
    int z = 0;
};

struct GeoPoint {
    double lon = 0.0;
    double lat = 0.0;
};

struct MercatorPoint {
    double xm = 0.0;
    double ym = 0.0;
};

struct PixelIndex {
    int row = 0;
    int col = 0;

    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Number of tiles along one axis at zoom z.
double world_tiles(int z);

bool is_valid(const TileCoord& t);

/// Maps the center of pixel `px` of tile `tile` to tile space. Throws
/// InvalidArgument if the pixel is outside the tile.
GlobalTilePoint pixel_to_global(const TileCoord& tile, PixelIndex px, int tile_size);

struct TilePixel {
    TileCoord tile;
    PixelIndex px;
};

/// Inverse of pixel_to_global: the tile and pixel whose area contains `p`.
TilePixel global_to_pixel(const GlobalTilePoint& p, int tile_size);

GeoPoint global_to_lonlat(const GlobalTilePoint& p);

/// Throws InvalidArgument when |lat| exceeds kMaxLatitude by more than 1e-6 degrees.
GlobalTilePoint lonlat_to_global(const GeoPoint& g, int z);

MercatorPoint lonlat_to_mercator(const GeoPoint& g);
GeoPoint mercator_to_lonlat(const MercatorPoint& m);

double mercator_distance(const MercatorPoint& a, const MercatorPoint& b);

/// cos(lat): ratio of ground distance to EPSG:3857 distance.
double ground_scale_correction(double lat_deg);

/// EPSG:3857 meters spanned by one pixel at zoom z (uniform in projected space).
double mercator_meters_per_pixel(int z, int tile_size);

} // namespace dpark::geo
