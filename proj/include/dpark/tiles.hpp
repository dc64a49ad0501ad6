#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "dpark/error.hpp"
#include "dpark/geo.hpp"
#include "dpark/imagery.hpp"
#include "dpark/raster.hpp"

namespace dpark::tiles {

struct TileSource {
    enum class Kind { url_template, local_directory };

    Kind kind = Kind::url_template;
    /// URL template with {x}, {y}, {z} placeholders, or the root of a `<z>/<x>/<y>.png` tree.
    std::string location;
    int tile_size = 256;
    int native_zoom = 20;
    /// Sent as `<api_key_header>: <api_key>` when both are set.
    std::string api_key_header;
    std::string api_key;
    std::optional<double> resolution_cm_per_px;

    /// Throws InvalidArgument on a missing placeholder or unsupported tile size.
    void validate() const;
};

class TransportError : public Error {
public:
    using Error::Error;
};

struct FetchOptions {
    int max_in_flight = 8;
    int attempts = 3;
    std::chrono::milliseconds backoff{200};
    std::chrono::milliseconds timeout{30000};
};

std::string expand_template(const std::string& tmpl, const geo::TileCoord& t);

/// `<root>/<z>/<x>/<y>.png`
std::string cache_path(const std::string& root, const geo::TileCoord& t);

/// Native-resolution tile, or nullopt when the source has no tile there. A non-empty
/// `cache_dir` is consulted first and filled on a successful fetch. Transport failures
/// are retried with exponential backoff, then raised as TransportError.
std::optional<RasterImage> fetch_tile(const TileSource& src, const geo::TileCoord& t, const std::string& cache_dir,
                                      const FetchOptions& opts = {});

/// Concurrent fetch with at most `opts.max_in_flight` requests outstanding; result order matches `coords`.
std::vector<std::optional<RasterImage>> fetch_tiles(const TileSource& src, const std::vector<geo::TileCoord>& coords,
                                                    const std::string& cache_dir, const FetchOptions& opts = {});

struct MosaicLoad {
    imagery::Mosaic mosaic;
    std::vector<geo::TileCoord> missing;
};

/// Fetches the row-major tile list produced by enumerate_tiles and assembles it into a mosaic
/// of kTileSize tiles, resampling other native sizes with Lanczos.
MosaicLoad load_mosaic(const TileSource& src, const std::vector<geo::TileCoord>& coords, const std::string& cache_dir,
                       const FetchOptions& opts = {});

} // namespace dpark::tiles
