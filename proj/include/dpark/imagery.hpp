#pragma once

#include <optional>
#include <vector>

#include "dpark/geo.hpp"
#include "dpark/raster.hpp"

namespace dpark::imagery {

/// Tile size every pipeline stage works in; 512-px sources are resampled down to it.
inline constexpr int kTileSize = 256;

/// Region given by its north-west and south-east corners.
struct BBox {
    geo::GeoPoint top_left;
    geo::GeoPoint bottom_right;
};

/// Row-major list of tiles whose extent intersects `bbox`. Throws on an inverted box.
std::vector<geo::TileCoord> enumerate_tiles(const BBox& bbox, int z);

/// Places four n x n tiles into one 2n x 2n image. Throws on size mismatch.
RasterImage stitch_2x2(const RasterImage& tl, const RasterImage& tr, const RasterImage& bl, const RasterImage& br);

/// Lanczos-3 resampling, pixel-identical to Pillow's Image.resize(..., LANCZOS) for RGB8.
RasterImage resample_lanczos(const RasterImage& img, int target_width, int target_height);

/// A rectangular grid of equally sized tiles; absent tiles read as black.
class Mosaic {
public:
    Mosaic(geo::TileCoord origin, int cols, int rows, int tile_size = kTileSize);

    const geo::TileCoord& origin() const { return origin_; }
    int cols() const { return cols_; }
    int rows() const { return rows_; }
    int tile_size() const { return tile_size_; }
    int width_px() const { return cols_ * tile_size_; }
    int height_px() const { return rows_ * tile_size_; }

    /// Nullptr when the tile is outside the grid or missing.
    const RasterImage* tile(int col, int row) const;
    void set_tile(int col, int row, RasterImage img);
    bool has_tile(int col, int row) const { return tile(col, row) != nullptr; }

    /// Tile by grid position; black when absent.
    RasterImage tile_or_black(int col, int row) const;

    /// Pixel rectangle in mosaic coordinates; pixels outside the grid or in missing tiles are black.
    /// `padded` reports whether any such pixel was produced.
    RasterImage extract(int x0, int y0, int width, int height, bool* padded = nullptr) const;

    /// Mosaic pixel coordinates (continuous, pixel (r, c) spans [c, c+1)) to tile space.
    geo::GlobalTilePoint to_global(double x, double y) const;
    /// Inverse of to_global.
    void from_global(const geo::GlobalTilePoint& p, double& x, double& y) const;

private:
    geo::TileCoord origin_;
    int cols_;
    int rows_;
    int tile_size_;
    std::vector<std::optional<RasterImage>> tiles_;
};

struct Crop {
    RasterImage image;
    int origin_x = 0; ///< mosaic pixel column of crop pixel (0, 0)
    int origin_y = 0;
    bool padded = false;
};

/// Top-left mosaic pixel of a `size` crop centred on the continuous position (cx, cy).
void crop_origin(double cx, double cy, int size, int& origin_x, int& origin_y);

/// size x size crop centred on (cx, cy) in mosaic pixel coordinates. Throws if the centre is
/// outside the mosaic.
Crop crop_centered(const Mosaic& m, double cx, double cy, int size);

} // namespace dpark::imagery
