#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/e2e.hpp"
#include "../support/geojson_check.hpp"
#include "dpark/pipeline.hpp"

using namespace dpark;
using namespace dpark::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json sample_config() {
    return json::parse(R"({
      "schema": 1,
      "source": {"kind": "local_directory", "location": "tiles", "tile_size": 256},
      "zoom": 20,
      "bbox": {"top_left": {"lat": 47.70, "lon": -122.40}, "bottom_right": {"lat": 47.69, "lon": -122.39}},
      "backend": {"mock": "scenario.json"},
      "thresholds": {"locate": 0.3, "orient": 0.3, "dedup_iou": 0.5},
      "output": {"json": "out/report.json", "geojson": "out/report.geojson"}
    })");
}

// Fails every orient call; locate passes through.
class OrientFails final : public Backend {
public:
    explicit OrientFails(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}
    std::vector<Detection> locate(const ImageKey& k, const RasterImage& img) override { return inner_->locate(k, img); }
    std::vector<OBBDetection> orient(const ImageKey&, const RasterImage&) override { throw TimeoutError("orient timed out"); }

private:
    std::shared_ptr<Backend> inner_;
};

pipeline::RegionOptions options_for(const Scene& s) {
    pipeline::RegionOptions o;
    o.zoom = s.origin.z;
    o.bbox = scene_bbox(s);
    return o;
}

} // namespace

TEST_CASE("config parsing") {
    const auto c = pipeline::config_from_json(sample_config(), "/data/run");
    CHECK(c.source.location == "/data/run/tiles");
    CHECK(c.source.native_zoom == 20);
    CHECK(c.backend.mock_scenario == "/data/run/scenario.json");
    CHECK(c.output_json == "/data/run/out/report.json");
    CHECK(c.bbox.top_left.lat == 47.70);
    CHECK(c.bbox.top_left.lon == -122.40);
    CHECK_NOTHROW(c.validate());
    // Round trip through to_json.
    CHECK(pipeline::to_json(pipeline::config_from_json(pipeline::to_json(c))) == pipeline::to_json(c));

    auto bad = sample_config();
    bad["zoomm"] = 3;
    CHECK_THROWS_AS(pipeline::config_from_json(bad), ParseError);
    bad = sample_config();
    bad["source"]["kind"] = "ftp";
    CHECK_THROWS_AS(pipeline::config_from_json(bad), ParseError);
    bad = sample_config();
    bad.erase("bbox");
    CHECK_THROWS_AS(pipeline::config_from_json(bad), ParseError);
    CHECK_THROWS_AS(pipeline::load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("documented example config loads") {
    const auto c = pipeline::load_config(DPARK_TEST_DATA "/../../docs/example_config.json");
    CHECK_NOTHROW(c.validate());
    CHECK(c.source.kind == tiles::TileSource::Kind::url_template);
    CHECK(c.cache_dir.find("docs") != std::string::npos);
}

TEST_CASE("config validation") {
    const auto base = pipeline::config_from_json(sample_config(), "/x");
    auto c = base;
    c.source.native_zoom = 19;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = base;
    c.backend.sidecar_endpoint = "python3 sidecar.py";
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = base;
    c.backend.mock_scenario.clear();
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = base;
    c.thresholds.locate = 1.5;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = base;
    c.dedup_iou = -0.1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("one space with one aisle") {
    Scene s{{168040, 366000, 20}, 2, 2, {}};
    SceneSpace sp;
    sp.cls = ParkingClass::dp_one_aisle;
    sp.space = {{300, 200}, 40, 20, 0.4};
    sp.right_aisles.push_back(flush_aisle(sp.space, 12, true));
    s.spaces.push_back(sp);
    const imagery::Mosaic m(s.origin, s.cols, s.rows);
    const Detector det(std::make_shared<MockBackend>(scenario_for(s)));
    const auto rep = pipeline::run_region(m, det, options_for(s));
    REQUIRE(rep.spaces.size() == 1);
    const auto& r = rep.spaces[0];
    CHECK(r.cls == ParkingClass::dp_one_aisle);
    CHECK(*r.total_width_px == doctest::Approx(32).epsilon(1e-12));
    CHECK(*r.space_width_px == doctest::Approx(20).epsilon(1e-12));
    CHECK(*r.right_extent_px == doctest::Approx(12).epsilon(1e-12));
    CHECK(*r.left_extent_px == 0.0);
    CHECK(r.right_aisles == 1);
    CHECK(r.left_aisles == 0);
    CHECK(norm(r.centroid_px - Vec2{168040 * 256 + 300.0, 366000 * 256 + 200.0}) < 1e-9);
    CHECK(*r.total_width_m ==
          doctest::Approx(characterize::width_to_meters(32, r.centroid, 20, 256, false)).epsilon(1e-9));
    CHECK(r.footprint.size() == 5);
    CHECK(r.footprint.front().lon == r.footprint.back().lon);
    CHECK(r.footprint.front().lat == r.footprint.back().lat);
    CHECK(rep.tiles == 4);
    CHECK(rep.squares == 1);
    CHECK(rep.located == 1);
    CHECK(rep.coverage.failed_crops.empty());
}

TEST_CASE("random scenes reproduce their ground truth") {
    for (std::uint64_t seed : {1, 2, 3}) {
        CAPTURE(seed);
        std::mt19937_64 rng(seed);
        const auto s = random_scene(rng, {168040, 366000, 20}, 6, 6, 40);
        REQUIRE(s.spaces.size() > 20);
        const imagery::Mosaic m(s.origin, s.cols, s.rows);
        const Detector det(std::make_shared<MockBackend>(scenario_for(s)));
        auto opts = options_for(s);
        opts.scan.workers = 3;
        const auto rep = pipeline::run_region(m, det, opts);
        const auto err = compare_to_scene(rep, s);
        for (const auto& msg : err.mismatches) FAIL_CHECK(msg);
        CHECK(err.max_centroid_px <= 1.0);
        CHECK(err.max_width_px <= 1e-6);
        CHECK(rep.coverage.uncharacterized == 0);
        CHECK(geojson_violations(pipeline::to_geojson(rep)).empty());
    }
}

TEST_CASE("full runs are deterministic and write valid outputs") {
    const auto dir = (fs::temp_directory_path() / "dpark_pipeline_e2e").string();
    auto e = prepare_end_to_end(7, dir);
    std::vector<json> events;
    const auto first = pipeline::run(e.config, [&](pipeline::LogLevel, const std::string& ev, const json& f) {
        events.push_back({{"event", ev}, {"fields", f}});
    });
    pipeline::write_outputs(first, e.config.output_json, e.config.output_geojson);
    const auto json1 = slurp(e.config.output_json), geo1 = slurp(e.config.output_geojson);

    auto second = pipeline::run(e.config);
    const auto err = compare_to_scene(second, e.scene);
    for (const auto& msg : err.mismatches) FAIL_CHECK(msg);
    pipeline::write_outputs(second, e.config.output_json, e.config.output_geojson);
    const auto json2 = slurp(e.config.output_json), geo2 = slurp(e.config.output_geojson);

    CHECK(report_without_timestamp(json1) == report_without_timestamp(json2));
    CHECK(geo1 == geo2);
    e.config.workers = 1;
    const auto serial = pipeline::to_json(pipeline::run(e.config));
    CHECK(serial["spaces"] == json::parse(json2)["spaces"]);
    const auto geo = json::parse(geo2);
    const auto violations = geojson_violations(geo);
    for (const auto& v : violations) FAIL_CHECK(v);
    CHECK(geo["features"].size() == e.scene.spaces.size());

    const auto report = json::parse(json2);
    CHECK(report["schema"] == pipeline::kSchemaVersion);
    CHECK(report["counts"]["tiles"] == 36);
    CHECK(report["counts"]["squares"] == 9);
    CHECK(report["coverage"]["complete"] == true);
    CHECK(report["spaces"].size() == e.scene.spaces.size());
    const auto& sp = report["spaces"][0];
    for (const char* key : {"id", "class", "confidence", "centroid", "footprint", "total_width_px", "total_width_m", "flags"})
        CHECK(sp.contains(key));
    // Sorted north to south.
    for (std::size_t i = 1; i < report["spaces"].size(); ++i)
        CHECK(report["spaces"][i - 1]["centroid"]["lat"].get<double>() >= report["spaces"][i]["centroid"]["lat"].get<double>());
    CHECK(std::any_of(events.begin(), events.end(), [](const json& j) { return j["event"] == "run_complete"; }));
}

TEST_CASE("missing tiles are reported as coverage gaps") {
    const auto dir = (fs::temp_directory_path() / "dpark_pipeline_missing").string();
    auto e = prepare_end_to_end(9, dir, {168040, 366000, 20}, 4, 4, 10);
    const auto& o = e.scene.origin;
    fs::remove(fs::path(dir) / "tiles" / "20" / std::to_string(o.x + 2) / (std::to_string(o.y + 1) + ".png"));
    const auto rep = pipeline::run(e.config);
    REQUIRE(rep.coverage.missing_tiles.size() == 1);
    CHECK(rep.coverage.missing_tiles[0] == geo::TileCoord{o.x + 2, o.y + 1, 20});
    CHECK(pipeline::to_json(rep)["coverage"]["complete"] == false);
}

TEST_CASE("orientation failures leave spaces uncharacterized") {
    std::mt19937_64 rng(4);
    const auto s = random_scene(rng, {168040, 366000, 20}, 4, 4, 8);
    const imagery::Mosaic m(s.origin, s.cols, s.rows);
    const Detector det(std::make_shared<OrientFails>(std::make_shared<MockBackend>(scenario_for(s))));
    const auto rep = pipeline::run_region(m, det, options_for(s));
    CHECK(rep.spaces.size() == s.spaces.size());
    CHECK(rep.coverage.failed_crops.size() == s.spaces.size());
    CHECK(rep.coverage.uncharacterized == static_cast<int>(s.spaces.size()));
    for (const auto& sp : rep.spaces) {
        CHECK(sp.flags.uncharacterized);
        CHECK_FALSE(sp.total_width_px);
        CHECK_FALSE(sp.space_obb_px);
    }
    CHECK(geojson_violations(pipeline::to_geojson(rep)).empty());
}

TEST_CASE("empty scripted crops count as characterization misses") {
    std::mt19937_64 rng(5);
    const auto s = random_scene(rng, {168040, 366000, 20}, 4, 4, 6);
    auto scenario = scenario_for(s);
    scenario.orient.clear();
    const imagery::Mosaic m(s.origin, s.cols, s.rows);
    const auto rep = pipeline::run_region(m, Detector(std::make_shared<MockBackend>(scenario)), options_for(s));
    CHECK(rep.coverage.uncharacterized == static_cast<int>(s.spaces.size()));
    CHECK(rep.coverage.failed_crops.empty());
}

TEST_CASE("sidecar backend runs through the pipeline") {
    const auto dir = (fs::temp_directory_path() / "dpark_pipeline_sidecar").string();
    auto e = prepare_end_to_end(3, dir, {168040, 366000, 20}, 2, 2, 1);
    e.config.backend.mock_scenario.clear();
    e.config.backend.sidecar_endpoint = DPARK_STUB_SIDECAR;
    e.config.backend.timeout_ms = 5000;
    const auto rep = pipeline::run(e.config);
    // The stub reports one confident locate box per window in the top-left corner.
    CHECK(rep.located >= 1);
    CHECK(rep.coverage.skipped_windows.empty());
}
