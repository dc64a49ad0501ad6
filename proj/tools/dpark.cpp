#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "dpark/error.hpp"
#include "dpark/eval/coco.hpp"
#include "dpark/eval/dataset.hpp"
#include "dpark/eval/metrics.hpp"
#include "dpark/pipeline.hpp"
#include "dpark/tiles.hpp"

using namespace dpark;
using nlohmann::json;

namespace {

// Usage problems found after CLI11 parsing (bad bbox text and the like) still exit 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

bool g_json_log = false;

const char* level_name(pipeline::LogLevel l) {
    switch (l) {
    case pipeline::LogLevel::info: return "info";
    case pipeline::LogLevel::warn: return "warn";
    case pipeline::LogLevel::error: return "error";
    }
    return "info";
}

void log_line(pipeline::LogLevel level, const std::string& event, const json& fields) {
    if (g_json_log) {
        json line = {{"level", level_name(level)}, {"event", event}};
        for (const auto& [k, v] : fields.items()) line[k] = v;
        std::cerr << line.dump() << '\n';
        return;
    }
    std::string text = fmt::format("[{}] {}", level_name(level), event);
    for (const auto& [k, v] : fields.items()) text += fmt::format(" {}={}", k, v.is_string() ? v.get<std::string>() : v.dump());
    std::cerr << text << '\n';
}

imagery::BBox parse_bbox(const std::string& text) {
    // north,west,south,east in degrees
    std::vector<double> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw UsageError("--bbox expects north,west,south,east; got '" + text + "'");
        }
    }
    if (v.size() != 4) throw UsageError("--bbox expects four numbers: north,west,south,east");
    return {{v[1], v[0]}, {v[3], v[2]}};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << text;
}

struct DetectArgs {
    std::string config;
    std::optional<int> zoom;
    std::string bbox;
    std::string mock;
    std::string sidecar;
    std::string out_json;
    std::string out_geojson;
    std::string cache_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<double> locate_threshold;
    std::optional<double> orient_threshold;
    std::optional<double> dedup_iou;
    bool ground_corrected = false;
};

int run_detect(const DetectArgs& a) {
    auto cfg = pipeline::load_config(a.config);
    if (a.zoom) cfg.zoom = cfg.source.native_zoom = *a.zoom;
    if (!a.bbox.empty()) cfg.bbox = parse_bbox(a.bbox);
    if (!a.mock.empty()) {
        cfg.backend.mock_scenario = a.mock;
        cfg.backend.sidecar_endpoint.clear();
    }
    if (!a.sidecar.empty()) {
        cfg.backend.sidecar_endpoint = a.sidecar;
        cfg.backend.mock_scenario.clear();
    }
    if (!a.out_json.empty()) cfg.output_json = a.out_json;
    if (!a.out_geojson.empty()) cfg.output_geojson = a.out_geojson;
    if (!a.cache_dir.empty()) cfg.cache_dir = a.cache_dir;
    if (a.seed) cfg.seed = *a.seed;
    if (a.workers) cfg.workers = *a.workers;
    if (a.locate_threshold) cfg.thresholds.locate = *a.locate_threshold;
    if (a.orient_threshold) cfg.thresholds.orient = *a.orient_threshold;
    if (a.dedup_iou) cfg.dedup_iou = *a.dedup_iou;
    if (a.ground_corrected) cfg.ground_corrected = true;

    const auto report = pipeline::run(cfg, log_line);
    pipeline::write_outputs(report, cfg.output_json, cfg.output_geojson);
    log_line(pipeline::LogLevel::info, "outputs_written", {{"json", cfg.output_json}, {"geojson", cfg.output_geojson}});
    return 0;
}

struct EvalArgs {
    std::string preds;
    std::string truth;
    double iou = 0.5;
    std::string mode = "envelope";
    std::string labels = "classes";
    bool as_json = false;
    std::string out;
};

int run_eval_detections(const EvalArgs& a) {
    const auto preds = eval::load_predictions(a.preds);
    const auto ds = eval::load_coco(a.truth);
    const auto space = a.labels == "obb" ? eval::LabelSpace::obb_kinds : eval::LabelSpace::classes;
    const auto mode = a.mode == "polygon" ? eval::IouMode::polygon : eval::IouMode::envelope;
    const auto ev = eval::evaluate(preds, eval::truths_from_dataset(ds, space), a.iou, mode);
    const auto m = eval::metrics(ev);
    const auto cm = eval::confusion_matrix(ev);
    if (a.as_json) {
        write_text(a.out, json{{"iou", a.iou}, {"metrics", eval::to_json(m)}, {"confusion", eval::to_json(cm)}}.dump(2) + "\n");
    } else {
        write_text(a.out, eval::detection_table(m) + "\n" + eval::summary_table(ev) + "\n" + eval::confusion_table(cm));
    }
    return 0;
}

int run_eval_width(const EvalArgs& a) {
    const auto preds = eval::load_predictions(a.preds);
    const auto refs = eval::load_predictions(a.truth);
    const auto mode = a.mode == "polygon" ? eval::IouMode::polygon : eval::IouMode::envelope;
    const auto stats = eval::width_compare(eval::width_samples(eval::evaluate(preds, refs, a.iou, mode)));
    write_text(a.out, a.as_json ? eval::to_json(stats).dump(2) + "\n" : eval::width_table(stats));
    return 0;
}

struct PoolArgs {
    std::string hints;
    std::string quotas;
    double threshold = 0.3;
    std::uint64_t seed = 0;
    std::string out;
};

int run_sample_pools(const PoolArgs& a) {
    std::ifstream in(a.quotas);
    if (!in) throw IoError("cannot open " + a.quotas);
    json q;
    try {
        in >> q;
    } catch (const json::exception& e) {
        throw ParseError(a.quotas + ": " + e.what());
    }
    const auto sample =
        eval::sample_pools(eval::load_hint_images(a.hints), eval::quotas_from_json(q), a.threshold, a.seed);
    write_text(a.out, eval::to_json(sample).dump(2) + "\n");
    return 0;
}

struct CropArgs {
    std::string coco;
    std::string images;
    std::string out;
    int size = 100;
    bool keep_edge = false;
};

int run_export_crops(const CropArgs& a) {
    const auto res = eval::export_crops(eval::load_coco(a.coco), a.images, a.out, a.size, !a.keep_edge);
    const auto path = (std::filesystem::path(a.out) / "annotations.json").string();
    write_text(path, eval::to_coco(res.crops).dump(2) + "\n");
    log_line(pipeline::LogLevel::info, "crops_exported",
             {{"crops", res.crops.images.size()}, {"excluded_edge", res.excluded_edge}, {"annotations", path}});
    return 0;
}

struct FetchArgs {
    std::string config;
    std::string bbox;
    std::optional<int> zoom;
    std::string out;
};

int run_tiles_fetch(const FetchArgs& a) {
    auto cfg = pipeline::load_config(a.config);
    if (a.zoom) cfg.zoom = cfg.source.native_zoom = *a.zoom;
    if (!a.bbox.empty()) cfg.bbox = parse_bbox(a.bbox);
    cfg.source.validate();
    if (const char* key = std::getenv(cfg.api_key_env.c_str())) cfg.source.api_key = key;
    const auto coords = imagery::enumerate_tiles(cfg.bbox, cfg.zoom);
    const auto got = tiles::fetch_tiles(cfg.source, coords, a.out, cfg.fetch);
    std::size_t missing = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i]) continue;
        ++missing;
        log_line(pipeline::LogLevel::warn, "coverage_missing_tile",
                 {{"z", coords[i].z}, {"x", coords[i].x}, {"y", coords[i].y}});
    }
    log_line(pipeline::LogLevel::info, "tiles_fetched",
             {{"requested", coords.size()}, {"missing", missing}, {"out", a.out}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Locate and measure disability parking in aerial imagery"};
    app.require_subcommand(1);
    app.add_flag("--json", g_json_log, "Log one JSON object per line on stderr");

    DetectArgs detect;
    auto* det = app.add_subcommand("detect", "Run the pipeline over a bounding box");
    det->add_option("--config", detect.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    det->add_option("--zoom", detect.zoom);
    det->add_option("--bbox", detect.bbox, "north,west,south,east");
    det->add_option("--mock", detect.mock, "Mock scenario file");
    det->add_option("--sidecar", detect.sidecar, "Sidecar command line or http(s) URL");
    det->add_option("--out-json", detect.out_json);
    det->add_option("--out-geojson", detect.out_geojson);
    det->add_option("--cache-dir", detect.cache_dir);
    det->add_option("--seed", detect.seed);
    det->add_option("--workers", detect.workers)->check(CLI::PositiveNumber);
    det->add_option("--locate-threshold", detect.locate_threshold)->check(CLI::Range(0.0, 1.0));
    det->add_option("--orient-threshold", detect.orient_threshold)->check(CLI::Range(0.0, 1.0));
    det->add_option("--dedup-iou", detect.dedup_iou)->check(CLI::Range(0.0, 1.0));
    det->add_flag("--ground-corrected", detect.ground_corrected, "Scale distances by cos(latitude)");

    auto* ev = app.add_subcommand("eval", "Evaluate predictions");
    ev->require_subcommand(1);
    EvalArgs evd, evw;
    auto* evdet = ev->add_subcommand("detections", "Precision, recall and F1 against COCO ground truth");
    evdet->add_option("--preds", evd.preds, "Predictions (NDJSON)")->required()->check(CLI::ExistingFile);
    evdet->add_option("--truth", evd.truth, "Ground truth (COCO JSON)")->required()->check(CLI::ExistingFile);
    evdet->add_option("--iou", evd.iou)->check(CLI::Range(0.0, 1.0));
    evdet->add_option("--mode", evd.mode)->check(CLI::IsMember({"envelope", "polygon"}));
    evdet->add_option("--labels", evd.labels, "classes or obb")->check(CLI::IsMember({"classes", "obb"}));
    evdet->add_flag("--as-json", evd.as_json, "Print metrics as JSON");
    evdet->add_option("--out", evd.out);
    auto* evwid = ev->add_subcommand("width", "Width error against reference measurements");
    evwid->add_option("--preds", evw.preds, "Predictions with width_px (NDJSON)")->required()->check(CLI::ExistingFile);
    evwid->add_option("--refs", evw.truth, "References with width_px (NDJSON)")->required()->check(CLI::ExistingFile);
    evwid->add_option("--iou", evw.iou)->check(CLI::Range(0.0, 1.0));
    evwid->add_option("--mode", evw.mode)->check(CLI::IsMember({"envelope", "polygon"}));
    evwid->add_flag("--as-json", evw.as_json);
    evwid->add_option("--out", evw.out);

    auto* ds = app.add_subcommand("dataset", "Dataset preparation");
    ds->require_subcommand(1);
    PoolArgs pools;
    auto* sp = ds->add_subcommand("sample-pools", "Draw may-contain / may-not-contain image pools");
    sp->add_option("--hints", pools.hints, "Hint-model output")->required()->check(CLI::ExistingFile);
    sp->add_option("--quotas", pools.quotas, "Per-region quotas (JSON)")->required()->check(CLI::ExistingFile);
    sp->add_option("--threshold", pools.threshold)->check(CLI::Range(0.0, 1.0));
    sp->add_option("--seed", pools.seed);
    sp->add_option("--out", pools.out);
    CropArgs crops;
    auto* ec = ds->add_subcommand("export-crops", "Cut one crop per parking object");
    ec->add_option("--coco", crops.coco)->required()->check(CLI::ExistingFile);
    ec->add_option("--images", crops.images)->required()->check(CLI::ExistingDirectory);
    ec->add_option("--out", crops.out)->required();
    ec->add_option("--size", crops.size)->check(CLI::PositiveNumber);
    ec->add_flag("--keep-edge", crops.keep_edge, "Keep crops that need padding");

    auto* tl = app.add_subcommand("tiles", "Tile utilities");
    tl->require_subcommand(1);
    FetchArgs fetch;
    auto* tf = tl->add_subcommand("fetch", "Download tiles for a bounding box into a directory tree");
    tf->add_option("--config", fetch.config)->required()->check(CLI::ExistingFile);
    tf->add_option("--bbox", fetch.bbox, "north,west,south,east");
    tf->add_option("--zoom", fetch.zoom);
    tf->add_option("--out", fetch.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        if (det->parsed()) return run_detect(detect);
        if (evdet->parsed()) return run_eval_detections(evd);
        if (evwid->parsed()) return run_eval_width(evw);
        if (sp->parsed()) return run_sample_pools(pools);
        if (ec->parsed()) return run_export_crops(crops);
        if (tf->parsed()) return run_tiles_fetch(fetch);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        log_line(pipeline::LogLevel::error, "fatal", {{"message", e.what()}});
        return 1;
    }
    return 2;
}
