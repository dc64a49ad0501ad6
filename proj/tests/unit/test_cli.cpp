#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../support/e2e.hpp"
#include "../support/geojson_check.hpp"
#include "dpark/raster.hpp"

using namespace dpark;
using namespace dpark::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "dpark_cli";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(const std::string& args) {
    fs::create_directories(kTmp);
    const auto out = kTmp / "stdout.txt", err = kTmp / "stderr.txt";
    const std::string cmd = std::string(DPARK_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

std::string fmt_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d.png", i);
    return buf;
}

std::string data(const char* name) { return std::string(DPARK_TEST_DATA) + "/" + name; }

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(cli("").code == 2);
    CHECK(cli("--no-such-flag").code == 2);
    CHECK(cli("detect").code == 2);
    CHECK(cli("detect --config /nonexistent.json").code == 2);
    CHECK(cli("eval detections --preds " + data("preds.ndjson") + " --truth " + data("coco_fixture.json") +
              " --mode sideways")
              .code == 2);
    const auto help = cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("detect") != std::string::npos);
}

TEST_CASE("detect with a mock config") {
    auto e = prepare_end_to_end(21, (kTmp / "detect").string(), {168040, 366000, 20}, 4, 4, 12);
    const auto cfg = kTmp / "detect" / "config.json";
    std::ofstream(cfg) << pipeline::to_json(e.config).dump(2);
    const auto out_json = kTmp / "detect" / "cli" / "r.json", out_geo = kTmp / "detect" / "cli" / "r.geojson";
    const auto r = cli("--json detect --config " + cfg.string() + " --out-json " + out_json.string() + " --out-geojson " +
                       out_geo.string() + " --workers 2");
    CHECK(r.code == 0);
    REQUIRE(fs::exists(out_json));
    REQUIRE(fs::exists(out_geo));
    const auto report = json::parse(slurp(out_json));
    CHECK(report["spaces"].size() == e.scene.spaces.size());
    CHECK(report["config"]["workers"] == 2);
    CHECK(geojson_violations(json::parse(slurp(out_geo))).empty());
    // Every stderr line is a JSON object.
    std::istringstream lines(r.err);
    int n = 0;
    for (std::string line; std::getline(lines, line); ++n) CHECK(json::parse(line).is_object());
    CHECK(n > 0);

    // A config that parses but fails validation.
    auto bad = pipeline::to_json(e.config);
    bad["source"]["native_zoom"] = 19;
    std::ofstream(cfg) << bad.dump();
    CHECK(cli("detect --config " + cfg.string()).code == 1);
}

TEST_CASE("eval detections matches the golden table") {
    const auto r = cli("eval detections --preds " + data("preds.ndjson") + " --truth " + data("coco_fixture.json") +
                       " --iou 0.5");
    CHECK(r.code == 0);
    CHECK(r.out == slurp(data("eval_detections.golden.txt")));

    const auto j = cli("eval detections --preds " + data("preds.ndjson") + " --truth " + data("coco_fixture.json") +
                       " --as-json");
    REQUIRE(j.code == 0);
    json expected;
    std::ifstream(data("eval_expected.json")) >> expected;
    const auto doc = json::parse(j.out);
    long tp = 0;
    for (const auto& [_, c] : expected["counts"].items()) tp += c["tp"].get<long>();
    CHECK(doc["metrics"]["micro"]["tp"] == tp);
}

TEST_CASE("eval width") {
    const auto out = kTmp / "width.json";
    const auto r = cli("eval width --preds " + data("preds.ndjson") + " --refs " + data("refs.ndjson") + " --as-json --out " +
                       out.string());
    CHECK(r.code == 0);
    json expected;
    std::ifstream(data("eval_expected.json")) >> expected;
    const auto doc = json::parse(slurp(out));
    CHECK(doc["total"]["count"] == expected["width_total"]["count"]);
    CHECK(doc["total"]["mean_px"].get<double>() == doctest::Approx(expected["width_total"]["mean_px"].get<double>()));
}

TEST_CASE("dataset subcommands") {
    const auto dir = kTmp / "dataset";
    fs::remove_all(dir);
    fs::create_directories(dir / "images");
    {
        std::ofstream hints(dir / "hints.ndjson");
        for (int i = 0; i < 30; ++i)
            hints << json{{"image_id", i}, {"region", i % 2 ? "dc" : "seattle"},
                          {"detections", {{{"confidence", i % 3 ? 0.9 : 0.1}}}}}
                         .dump()
                  << "\n";
    }
    std::ofstream(dir / "quotas.json") << R"({"may_contain": {"dc": 5, "seattle": 4}, "may_not_contain": {"dc": 2}})";
    auto r = cli("dataset sample-pools --hints " + (dir / "hints.ndjson").string() + " --quotas " +
                 (dir / "quotas.json").string() + " --seed 9 --out " + (dir / "pools.json").string());
    CHECK(r.code == 0);
    const auto pools = json::parse(slurp(dir / "pools.json"));
    CHECK(pools["may_contain"]["dc"].size() == 5);
    CHECK(pools["may_contain"]["seattle"].size() == 4);
    CHECK(pools["seed"] == 9);
    std::ofstream(dir / "quotas.json") << R"({"may_contain": {"dc": 50}})";
    CHECK(cli("dataset sample-pools --hints " + (dir / "hints.ndjson").string() + " --quotas " +
              (dir / "quotas.json").string())
              .code == 1);

    RasterImage img(512, 512);
    for (int i = 1; i <= 20; ++i) write_png((dir / "images" / fmt_name(i)).string(), img);
    r = cli("dataset export-crops --coco " + data("coco_fixture.json") + " --images " + (dir / "images").string() +
            " --out " + (dir / "crops").string());
    CHECK(r.code == 0);
    const auto crops = json::parse(slurp(dir / "crops" / "annotations.json"));
    json expected;
    std::ifstream(data("eval_expected.json")) >> expected;
    const auto centres = expected["objects"].get<std::size_t>() - expected["histogram"]["access_aisle"].get<std::size_t>();
    CHECK(crops["images"].size() == centres);
    CHECK(fs::exists(dir / "crops" / "0.png"));
}

TEST_CASE("tiles fetch copies a local source") {
    auto e = prepare_end_to_end(5, (kTmp / "fetch").string(), {168040, 366000, 20}, 2, 2, 1);
    const auto cfg = kTmp / "fetch" / "config.json";
    std::ofstream(cfg) << pipeline::to_json(e.config).dump(2);
    const auto out = kTmp / "fetch" / "copy";
    CHECK(cli("tiles fetch --config " + cfg.string() + " --out " + out.string()).code == 0);
    const auto& o = e.scene.origin;
    for (int dx = 0; dx < 2; ++dx)
        for (int dy = 0; dy < 2; ++dy)
            CHECK(fs::exists(out / "20" / std::to_string(o.x + dx) / (std::to_string(o.y + dy) + ".png")));
}
