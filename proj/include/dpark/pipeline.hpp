#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/characterizer.hpp"
#include "dpark/detector.hpp"
#include "dpark/imagery.hpp"
#include "dpark/scanner.hpp"
#include "dpark/tiles.hpp"

namespace dpark::pipeline {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kDefaultApiKeyEnv = "DPARK_TILE_API_KEY";

struct BackendSpec {
    /// Exactly one of these is set.
    std::string mock_scenario;
    std::string sidecar_endpoint;
    double jitter_sigma_px = 0.0;
    int timeout_ms = 30000;
};

struct RunConfig {
    tiles::TileSource source;
    std::string api_key_env = kDefaultApiKeyEnv;
    int zoom = 20;
    imagery::BBox bbox;
    BackendSpec backend;
    DetectorThresholds thresholds;
    double dedup_iou = 0.5;
    bool ground_corrected = false;
    std::string output_json = "report.json";
    std::string output_geojson = "report.geojson";
    std::string cache_dir;
    std::uint64_t seed = 0;
    std::size_t workers = 4;
    tiles::FetchOptions fetch;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

/// Relative paths inside the document resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = {});
RunConfig load_config(const std::string& path);
nlohmann::json to_json(const RunConfig& c);

struct SpaceFlags {
    bool padded_crop = false;
    bool suspected_oversize = false;
    bool ground_corrected = false;
    bool uncharacterized = false;
    bool ambiguous_axis = false;
    bool boundary_adjacent = false;

    std::vector<std::string> names() const;
};

struct CharacterizedSpace {
    std::string id;
    ParkingClass cls = ParkingClass::dp_one_aisle;
    double confidence = 0.0;
    /// Global pixel coordinates at the run's zoom (tile units times the tile size).
    Vec2 centroid_px;
    geo::GeoPoint centroid;
    Box locator_bbox_px;
    /// Space rectangle in global pixels; absent when uncharacterized.
    std::optional<OrientedBox> space_obb_px;
    /// Closed lon/lat ring, counter-clockwise.
    std::vector<geo::GeoPoint> footprint;
    std::optional<double> space_width_px, left_extent_px, right_extent_px, total_width_px;
    std::optional<double> space_width_m, left_extent_m, right_extent_m, total_width_m;
    int left_aisles = 0;
    int right_aisles = 0;
    SpaceFlags flags;
};

struct FailedCrop {
    std::string key;
    std::string reason;
};

struct Coverage {
    std::vector<geo::TileCoord> missing_tiles;
    std::vector<scan::SkippedWindow> skipped_windows;
    std::vector<FailedCrop> failed_crops;
    int uncharacterized = 0;
    int suspected_oversize = 0;
    int boundary_adjacent = 0;
};

struct RegionReport {
    nlohmann::json config;
    std::vector<CharacterizedSpace> spaces;
    Coverage coverage;
    int tiles = 0;
    int squares = 0;
    int located = 0;
    std::string started_at;
    double elapsed_ms = 0.0;
};

enum class LogLevel { info, warn, error };
using LogSink = std::function<void(LogLevel, const std::string& event, const nlohmann::json& fields)>;

struct RegionOptions {
    int zoom = 20;
    imagery::BBox bbox;
    bool ground_corrected = false;
    scan::ScanConfig scan;
    characterize::AisleRules aisles;
    LogSink log;
};

/// Scan -> crop -> characterize -> georeference over an assembled mosaic.
RegionReport run_region(const imagery::Mosaic& mosaic, const Detector& detector, const RegionOptions& options);

/// Backend named by the config (mock scenario or sidecar endpoint).
std::shared_ptr<Backend> make_backend(const RunConfig& config);

/// Full run: enumerate and fetch tiles, then run_region. Unreachable sources or backends throw.
RegionReport run(const RunConfig& config, const LogSink& log = {});

nlohmann::json to_json(const RegionReport& r);
nlohmann::json to_geojson(const RegionReport& r);

/// Writes `to_json` and `to_geojson` documents.
void write_outputs(const RegionReport& r, const std::string& json_path, const std::string& geojson_path);

} // namespace dpark::pipeline
