#include "dpark/geo.hpp"

#include <cmath>
#include <string>

#include "dpark/error.hpp"

namespace dpark::geo {

namespace {

constexpr double kPi = std::numbers::pi;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

} // namespace

double world_tiles(int z) { return std::ldexp(1.0, z); }

bool is_valid(const TileCoord& t) {
    if (t.z < 0 || t.z > 30) return false;
    const auto n = std::int64_t{1} << t.z;
    return t.x >= 0 && t.x < n && t.y >= 0 && t.y < n;
}

GlobalTilePoint pixel_to_global(const TileCoord& tile, PixelIndex px, int tile_size) {
    if (tile_size <= 0) throw InvalidArgument("tile_size must be positive");
    if (px.row < 0 || px.col < 0 || px.row >= tile_size || px.col >= tile_size) {
        throw InvalidArgument("pixel (" + std::to_string(px.row) + ", " + std::to_string(px.col) +
                              ") outside " + std::to_string(tile_size) + "px tile");
    }
    const double ts = tile_size;
    return {static_cast<double>(tile.x) + (px.col + 0.5) / ts,
            static_cast<double>(tile.y) + (px.row + 0.5) / ts, tile.z};
}

TilePixel global_to_pixel(const GlobalTilePoint& p, int tile_size) {
    if (tile_size <= 0) throw InvalidArgument("tile_size must be positive");
    const double gx = std::floor(p.xf * tile_size);
    const double gy = std::floor(p.yf * tile_size);
    const auto ix = static_cast<std::int64_t>(gx);
    const auto iy = static_cast<std::int64_t>(gy);
    const auto floordiv = [](std::int64_t a, std::int64_t b) {
        return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
    };
    TilePixel out;
    out.tile = {floordiv(ix, tile_size), floordiv(iy, tile_size), p.z};
    out.px.col = static_cast<int>(ix - out.tile.x * tile_size);
    out.px.row = static_cast<int>(iy - out.tile.y * tile_size);
    return out;
}

GeoPoint global_to_lonlat(const GlobalTilePoint& p) {
    const double n = world_tiles(p.z);
    const double lon = p.xf / n * 360.0 - 180.0;
    const double lat = rad2deg(std::atan(std::sinh(kPi - 2.0 * kPi * p.yf / n)));
    return {lon, lat};
}

GlobalTilePoint lonlat_to_global(const GeoPoint& g, int z) {
    // The limit is usually quoted rounded to six decimals (85.051129), a hair outside the exact
    // value; such inputs land a fraction of a pixel beyond the world edge instead of failing.
    if (!(std::abs(g.lat) <= kMaxLatitude + 1e-6)) {
        throw InvalidArgument("latitude " + std::to_string(g.lat) + " outside Web Mercator bounds");
    }
    const double n = world_tiles(z);
    const double lat = deg2rad(g.lat);
    return {(g.lon + 180.0) / 360.0 * n, (1.0 - std::asinh(std::tan(lat)) / kPi) / 2.0 * n, z};
}

MercatorPoint lonlat_to_mercator(const GeoPoint& g) {
    const double lat = deg2rad(g.lat);
    return {kEarthRadius * deg2rad(g.lon), kEarthRadius * std::log(std::tan(kPi / 4.0 + lat / 2.0))};
}

GeoPoint mercator_to_lonlat(const MercatorPoint& m) {
    return {rad2deg(m.xm / kEarthRadius), rad2deg(2.0 * std::atan(std::exp(m.ym / kEarthRadius)) - kPi / 2.0)};
}

double mercator_distance(const MercatorPoint& a, const MercatorPoint& b) {
    return std::hypot(a.xm - b.xm, a.ym - b.ym);
}

double ground_scale_correction(double lat_deg) { return std::cos(deg2rad(lat_deg)); }

double mercator_meters_per_pixel(int z, int tile_size) {
    return 2.0 * kMercatorHalfExtent / (world_tiles(z) * tile_size);
}

} // namespace dpark::geo
