#include "dpark/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "dpark/detector_json.hpp"
#include "dpark/mock_backend.hpp"
#include "dpark/parallel.hpp"
#include "dpark/sidecar_client.hpp"

namespace dpark::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCropSize = kOrientInputSize;

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (path.empty() || base_dir.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir) / path).lexically_normal().string();
}

geo::GeoPoint geo_point_from_json(const json& j, const char* what) {
    if (!j.is_object() || !j.contains("lat") || !j.contains("lon"))
        throw ParseError(std::string(what) + " must be {\"lat\": .., \"lon\": ..}");
    return {j.at("lon").get<double>(), j.at("lat").get<double>()};
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ParseError(std::string("unknown key '") + key + "' in " + where);
    }
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

bool inside(const imagery::BBox& b, const geo::GeoPoint& p) {
    return p.lon >= b.top_left.lon && p.lon <= b.bottom_right.lon && p.lat <= b.top_left.lat &&
           p.lat >= b.bottom_right.lat;
}

std::vector<geo::GeoPoint> footprint(const std::array<Vec2, 4>& corners_px, int z, int tile_size) {
    std::vector<geo::GeoPoint> ring;
    for (const auto& c : corners_px) ring.push_back(geo::global_to_lonlat({c.x / tile_size, c.y / tile_size, z}));
    double signed_area = 0.0;
    for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[(i + 1) % ring.size()];
        signed_area += a.lon * b.lat - b.lon * a.lat;
    }
    if (signed_area < 0.0) std::reverse(ring.begin(), ring.end());
    ring.push_back(ring.front());
    return ring;
}

void emit(const LogSink& log, LogLevel level, const std::string& event, const json& fields) {
    if (log) log(level, event, fields);
}

} // namespace

std::vector<std::string> SpaceFlags::names() const {
    std::vector<std::string> out;
    if (ambiguous_axis) out.emplace_back("ambiguous_axis");
    if (boundary_adjacent) out.emplace_back("boundary_adjacent");
    if (ground_corrected) out.emplace_back("ground_corrected");
    if (padded_crop) out.emplace_back("padded_crop");
    if (suspected_oversize) out.emplace_back("suspected_oversize");
    if (uncharacterized) out.emplace_back("uncharacterized");
    return out;
}

void RunConfig::validate() const {
    source.validate();
    if (zoom < 0 || zoom > 30) throw InvalidArgument("zoom out of range");
    if (source.native_zoom != zoom)
        throw InvalidArgument("zoom " + std::to_string(zoom) + " not served by source (native zoom " +
                              std::to_string(source.native_zoom) + ")");
    for (double t : {thresholds.locate, thresholds.orient, dedup_iou})
        if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("thresholds must lie in [0, 1]");
    if (backend.mock_scenario.empty() == backend.sidecar_endpoint.empty())
        throw InvalidArgument("backend needs exactly one of mock or sidecar");
    if (workers == 0) throw InvalidArgument("workers must be positive");
    if (bbox.top_left.lon > bbox.bottom_right.lon || bbox.top_left.lat < bbox.bottom_right.lat)
        throw InvalidArgument("bbox top_left must be north-west of bottom_right");
}

RunConfig config_from_json(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    reject_unknown(j,
                   {"schema", "source", "zoom", "bbox", "backend", "thresholds", "ground_corrected", "output", "cache_dir",
                    "seed", "workers", "fetch"},
                   "config");
    RunConfig c;
    try {
        const auto& src = j.at("source");
        reject_unknown(src, {"kind", "location", "tile_size", "native_zoom", "api_key_header", "api_key_env",
                             "resolution_cm_per_px"},
                       "source");
        const auto kind = src.value("kind", std::string("url_template"));
        if (kind == "url_template") c.source.kind = tiles::TileSource::Kind::url_template;
        else if (kind == "local_directory") c.source.kind = tiles::TileSource::Kind::local_directory;
        else throw ParseError("unknown source kind '" + kind + "'");
        c.source.location = src.at("location").get<std::string>();
        if (c.source.kind == tiles::TileSource::Kind::local_directory)
            c.source.location = resolve(c.source.location, base_dir);
        c.source.tile_size = src.value("tile_size", 256);
        c.zoom = j.value("zoom", 20);
        c.source.native_zoom = src.value("native_zoom", c.zoom);
        c.source.api_key_header = src.value("api_key_header", std::string{});
        c.api_key_env = src.value("api_key_env", std::string(kDefaultApiKeyEnv));
        if (src.contains("resolution_cm_per_px")) c.source.resolution_cm_per_px = src.at("resolution_cm_per_px").get<double>();

        const auto& bb = j.at("bbox");
        c.bbox.top_left = geo_point_from_json(bb.at("top_left"), "bbox.top_left");
        c.bbox.bottom_right = geo_point_from_json(bb.at("bottom_right"), "bbox.bottom_right");

        const auto& be = j.at("backend");
        reject_unknown(be, {"mock", "sidecar", "jitter_sigma_px", "timeout_ms"}, "backend");
        if (be.contains("mock")) c.backend.mock_scenario = resolve(be.at("mock").get<std::string>(), base_dir);
        if (be.contains("sidecar")) c.backend.sidecar_endpoint = be.at("sidecar").get<std::string>();
        c.backend.jitter_sigma_px = be.value("jitter_sigma_px", 0.0);
        c.backend.timeout_ms = be.value("timeout_ms", 30000);

        if (j.contains("thresholds")) {
            const auto& t = j.at("thresholds");
            reject_unknown(t, {"locate", "orient", "dedup_iou"}, "thresholds");
            c.thresholds.locate = t.value("locate", 0.3);
            c.thresholds.orient = t.value("orient", 0.3);
            c.dedup_iou = t.value("dedup_iou", 0.5);
        }
        c.ground_corrected = j.value("ground_corrected", false);
        if (j.contains("output")) {
            const auto& o = j.at("output");
            reject_unknown(o, {"json", "geojson"}, "output");
            c.output_json = resolve(o.value("json", c.output_json), base_dir);
            c.output_geojson = resolve(o.value("geojson", c.output_geojson), base_dir);
        } else {
            c.output_json = resolve(c.output_json, base_dir);
            c.output_geojson = resolve(c.output_geojson, base_dir);
        }
        c.cache_dir = resolve(j.value("cache_dir", std::string{}), base_dir);
        c.seed = j.value("seed", std::uint64_t{0});
        c.workers = j.value("workers", std::size_t{4});
        if (j.contains("fetch")) {
            const auto& f = j.at("fetch");
            reject_unknown(f, {"max_in_flight", "attempts", "backoff_ms", "timeout_ms"}, "fetch");
            c.fetch.max_in_flight = f.value("max_in_flight", 8);
            c.fetch.attempts = f.value("attempts", 3);
            c.fetch.backoff = std::chrono::milliseconds(f.value("backoff_ms", 200));
            c.fetch.timeout = std::chrono::milliseconds(f.value("timeout_ms", 30000));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return config_from_json(j, fs::path(path).parent_path().string());
}

json to_json(const RunConfig& c) {
    json source = {{"kind", c.source.kind == tiles::TileSource::Kind::url_template ? "url_template" : "local_directory"},
                   {"location", c.source.location},
                   {"tile_size", c.source.tile_size},
                   {"native_zoom", c.source.native_zoom},
                   {"api_key_header", c.source.api_key_header},
                   {"api_key_env", c.api_key_env}};
    if (c.source.resolution_cm_per_px) source["resolution_cm_per_px"] = *c.source.resolution_cm_per_px;
    json backend = json::object();
    if (!c.backend.mock_scenario.empty()) backend["mock"] = c.backend.mock_scenario;
    if (!c.backend.sidecar_endpoint.empty()) backend["sidecar"] = c.backend.sidecar_endpoint;
    backend["jitter_sigma_px"] = c.backend.jitter_sigma_px;
    backend["timeout_ms"] = c.backend.timeout_ms;
    return {{"schema", kSchemaVersion},
            {"source", source},
            {"zoom", c.zoom},
            {"bbox",
             {{"top_left", {{"lat", c.bbox.top_left.lat}, {"lon", c.bbox.top_left.lon}}},
              {"bottom_right", {{"lat", c.bbox.bottom_right.lat}, {"lon", c.bbox.bottom_right.lon}}}}},
            {"backend", backend},
            {"thresholds", {{"locate", c.thresholds.locate}, {"orient", c.thresholds.orient}, {"dedup_iou", c.dedup_iou}}},
            {"ground_corrected", c.ground_corrected},
            {"output", {{"json", c.output_json}, {"geojson", c.output_geojson}}},
            {"cache_dir", c.cache_dir},
            {"seed", c.seed},
            {"workers", c.workers},
            {"fetch",
             {{"max_in_flight", c.fetch.max_in_flight},
              {"attempts", c.fetch.attempts},
              {"backoff_ms", c.fetch.backoff.count()},
              {"timeout_ms", c.fetch.timeout.count()}}}};
}

RegionReport run_region(const imagery::Mosaic& mosaic, const Detector& detector, const RegionOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RegionReport rep;
    rep.started_at = iso_now();
    rep.tiles = mosaic.cols() * mosaic.rows();
    rep.squares = static_cast<int>(scan::region_squares(mosaic).size());

    auto scanned = scan::scan_region(mosaic, detector, options.scan);
    rep.located = static_cast<int>(scanned.detections.size());
    rep.coverage.skipped_windows = scanned.skipped;
    rep.coverage.suspected_oversize = scanned.suspected_oversize;
    for (const auto& s : scanned.skipped)
        emit(options.log, LogLevel::warn, "window_skipped", {{"key", s.key}, {"pass", s.pass}, {"reason", s.reason}});

    const int ts = mosaic.tile_size();
    const Vec2 mosaic_px{static_cast<double>(mosaic.origin().x * ts), static_cast<double>(mosaic.origin().y * ts)};
    std::vector<CharacterizedSpace> spaces(scanned.detections.size());
    std::vector<std::optional<FailedCrop>> failures(scanned.detections.size());

    parallel_for(scanned.detections.size(), options.scan.workers, [&](std::size_t i) {
        const auto& det = scanned.detections[i];
        auto& sp = spaces[i];
        sp.cls = det.cls;
        sp.confidence = det.confidence;
        sp.locator_bbox_px = {det.bbox.x + mosaic_px.x, det.bbox.y + mosaic_px.y, det.bbox.w, det.bbox.h};
        sp.flags.ground_corrected = options.ground_corrected;
        sp.flags.suspected_oversize =
            det.bbox.w > options.scan.max_object_px || det.bbox.h > options.scan.max_object_px;

        const Vec2 c = det.bbox.centroid();
        const auto crop = imagery::crop_centered(mosaic, std::clamp(c.x, 0.0, double(mosaic.width_px())),
                                                 std::clamp(c.y, 0.0, double(mosaic.height_px())), kCropSize);
        sp.flags.padded_crop = crop.padded;
        const std::int64_t gx = static_cast<std::int64_t>(mosaic_px.x) + crop.origin_x;
        const std::int64_t gy = static_cast<std::int64_t>(mosaic_px.y) + crop.origin_y;
        const auto floordiv = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && (a < 0)); };
        const ImageKey key{{floordiv(gx, ts), floordiv(gy, ts), mosaic.origin().z},
                           static_cast<int>(gx - floordiv(gx, ts) * ts),
                           static_cast<int>(gy - floordiv(gy, ts) * ts)};

        std::optional<characterize::SpaceGeometry> geom;
        try {
            geom = characterize::characterize_crop(detector.orient(key, crop.image), {kCropSize / 2.0, kCropSize / 2.0},
                                                   options.aisles);
        } catch (const BackendError& e) {
            failures[i] = FailedCrop{key.str(), e.what()};
        }

        const Vec2 crop_px{static_cast<double>(gx), static_cast<double>(gy)};
        if (geom) {
            auto obb = geom->space.obb;
            obb.center = obb.center + crop_px;
            sp.space_obb_px = obb;
            sp.centroid_px = obb.center;
            sp.flags.ambiguous_axis = geom->ambiguous_axis;
            sp.space_width_px = geom->space_width_px;
            sp.left_extent_px = geom->sides.left.extent_px;
            sp.right_extent_px = geom->sides.right.extent_px;
            sp.total_width_px = geom->total_width_px;
            sp.left_aisles = static_cast<int>(geom->sides.left.aisles.size());
            sp.right_aisles = static_cast<int>(geom->sides.right.aisles.size());
        } else {
            sp.flags.uncharacterized = true;
            sp.centroid_px = sp.locator_bbox_px.centroid();
        }
        sp.centroid = geo::global_to_lonlat({sp.centroid_px.x / ts, sp.centroid_px.y / ts, mosaic.origin().z});
        const auto corners = sp.space_obb_px ? sp.space_obb_px->corners() : [&] {
            const auto& b = sp.locator_bbox_px;
            return std::array<Vec2, 4>{Vec2{b.x, b.y}, Vec2{b.right(), b.y}, Vec2{b.right(), b.bottom()},
                                       Vec2{b.x, b.bottom()}};
        }();
        sp.footprint = footprint(corners, mosaic.origin().z, ts);
        const auto meters = [&](const std::optional<double>& px) -> std::optional<double> {
            if (!px) return std::nullopt;
            return characterize::width_to_meters(*px, sp.centroid, options.zoom, ts, options.ground_corrected);
        };
        sp.space_width_m = meters(sp.space_width_px);
        sp.left_extent_m = meters(sp.left_extent_px);
        sp.right_extent_m = meters(sp.right_extent_px);
        sp.total_width_m = meters(sp.total_width_px);
        sp.flags.boundary_adjacent = !inside(options.bbox, sp.centroid);
    });

    for (std::size_t i = 0; i < failures.size(); ++i) {
        if (!failures[i]) continue;
        emit(options.log, LogLevel::warn, "crop_skipped", {{"key", failures[i]->key}, {"reason", failures[i]->reason}});
        rep.coverage.failed_crops.push_back(*failures[i]);
    }
    std::stable_sort(spaces.begin(), spaces.end(), [](const auto& a, const auto& b) {
        if (a.centroid.lat != b.centroid.lat) return a.centroid.lat > b.centroid.lat;
        if (a.centroid.lon != b.centroid.lon) return a.centroid.lon < b.centroid.lon;
        return a.confidence > b.confidence;
    });
    for (std::size_t i = 0; i < spaces.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "s%06zu", i + 1);
        spaces[i].id = id;
        if (spaces[i].flags.uncharacterized) {
            ++rep.coverage.uncharacterized;
            emit(options.log, LogLevel::info, "characterization_miss",
                 {{"id", spaces[i].id}, {"class", to_string(spaces[i].cls)}});
        }
        if (spaces[i].flags.boundary_adjacent) ++rep.coverage.boundary_adjacent;
    }
    rep.spaces = std::move(spaces);
    rep.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
    if (!config.backend.mock_scenario.empty())
        return std::make_shared<MockBackend>(load_scenario(config.backend.mock_scenario),
                                             Jitter{config.backend.jitter_sigma_px, config.seed});
    SidecarOptions opts;
    opts.request_timeout = std::chrono::milliseconds(config.backend.timeout_ms);
    opts.handshake_timeout = std::chrono::milliseconds(config.backend.timeout_ms);
    return SidecarClient::connect(config.backend.sidecar_endpoint, opts);
}

RegionReport run(const RunConfig& config, const LogSink& log) {
    config.validate();
    auto source = config.source;
    if (const char* key = std::getenv(config.api_key_env.c_str())) source.api_key = key;

    const auto coords = imagery::enumerate_tiles(config.bbox, config.zoom);
    emit(log, LogLevel::info, "tiles_enumerated", {{"count", coords.size()}, {"zoom", config.zoom}});
    auto loaded = tiles::load_mosaic(source, coords, config.cache_dir, config.fetch);
    for (const auto& t : loaded.missing)
        emit(log, LogLevel::warn, "coverage_missing_tile", {{"z", t.z}, {"x", t.x}, {"y", t.y}});

    Detector detector(make_backend(config), config.thresholds);
    RegionOptions opts;
    opts.zoom = config.zoom;
    opts.bbox = config.bbox;
    opts.ground_corrected = config.ground_corrected;
    opts.scan.dedup_iou = config.dedup_iou;
    opts.scan.workers = config.workers;
    opts.log = log;
    auto rep = run_region(loaded.mosaic, detector, opts);
    rep.coverage.missing_tiles = loaded.missing;
    rep.config = to_json(config);
    if (rep.located == 0)
        emit(log, LogLevel::info, "no_detections", {{"missing_tiles", loaded.missing.size()}});
    emit(log, LogLevel::info, "run_complete",
         {{"spaces", rep.spaces.size()}, {"uncharacterized", rep.coverage.uncharacterized},
          {"missing_tiles", loaded.missing.size()}, {"skipped_windows", rep.coverage.skipped_windows.size()}});
    return rep;
}

json to_json(const RegionReport& r) {
    json spaces = json::array();
    for (const auto& s : r.spaces) {
        json ring = json::array();
        for (const auto& p : s.footprint) ring.push_back({p.lon, p.lat});
        spaces.push_back({{"id", s.id},
                          {"class", to_string(s.cls)},
                          {"confidence", s.confidence},
                          {"centroid", {{"lon", s.centroid.lon}, {"lat", s.centroid.lat}}},
                          {"centroid_px", {s.centroid_px.x, s.centroid_px.y}},
                          {"locator_bbox_px", {s.locator_bbox_px.x, s.locator_bbox_px.y, s.locator_bbox_px.w, s.locator_bbox_px.h}},
                          {"space_obb_px", s.space_obb_px ? dpark::to_json(*s.space_obb_px) : json(nullptr)},
                          {"footprint", ring},
                          {"space_width_px", optional_number(s.space_width_px)},
                          {"aisle_width_px_left", optional_number(s.left_extent_px)},
                          {"aisle_width_px_right", optional_number(s.right_extent_px)},
                          {"total_width_px", optional_number(s.total_width_px)},
                          {"space_width_m", optional_number(s.space_width_m)},
                          {"aisle_width_m_left", optional_number(s.left_extent_m)},
                          {"aisle_width_m_right", optional_number(s.right_extent_m)},
                          {"total_width_m", optional_number(s.total_width_m)},
                          {"aisles_left", s.left_aisles},
                          {"aisles_right", s.right_aisles},
                          {"flags", s.flags.names()}});
    }
    json missing = json::array();
    for (const auto& t : r.coverage.missing_tiles) missing.push_back({t.z, t.x, t.y});
    json skipped = json::array();
    for (const auto& w : r.coverage.skipped_windows)
        skipped.push_back({{"key", w.key}, {"pass", w.pass}, {"reason", w.reason}});
    json failed = json::array();
    for (const auto& f : r.coverage.failed_crops) failed.push_back({{"key", f.key}, {"reason", f.reason}});
    const int characterized = static_cast<int>(r.spaces.size()) - r.coverage.uncharacterized;
    return {{"schema", kSchemaVersion},
            {"config", r.config},
            {"timestamp", {{"started_at", r.started_at}, {"elapsed_ms", r.elapsed_ms}}},
            {"counts",
             {{"tiles", r.tiles},
              {"squares", r.squares},
              {"located", r.located},
              {"characterized", characterized},
              {"spaces", r.spaces.size()}}},
            {"coverage",
             {{"missing_tiles", missing},
              {"skipped_windows", skipped},
              {"failed_crops", failed},
              {"uncharacterized", r.coverage.uncharacterized},
              {"suspected_oversize", r.coverage.suspected_oversize},
              {"boundary_adjacent", r.coverage.boundary_adjacent},
              {"complete", missing.empty() && skipped.empty() && failed.empty()}}},
            {"spaces", spaces}};
}

json to_geojson(const RegionReport& r) {
    json features = json::array();
    for (const auto& s : r.spaces) {
        json ring = json::array();
        for (const auto& p : s.footprint) ring.push_back({p.lon, p.lat});
        features.push_back({{"type", "Feature"},
                            {"id", s.id},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
                            {"properties",
                             {{"class", to_string(s.cls)},
                              {"confidence", s.confidence},
                              {"space_width_m", optional_number(s.space_width_m)},
                              {"aisle_width_m_left", optional_number(s.left_extent_m)},
                              {"aisle_width_m_right", optional_number(s.right_extent_m)},
                              {"total_width_m", optional_number(s.total_width_m)},
                              {"flags", s.flags.names()}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

void write_outputs(const RegionReport& r, const std::string& json_path, const std::string& geojson_path) {
    const auto write = [](const std::string& path, const json& doc) {
        const fs::path p(path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(p);
        if (!out) throw IoError("cannot write " + path);
        out << doc.dump(2) << '\n';
        if (!out) throw IoError("short write to " + path);
    };
    write(json_path, to_json(r));
    write(geojson_path, to_geojson(r));
}

} // namespace dpark::pipeline
