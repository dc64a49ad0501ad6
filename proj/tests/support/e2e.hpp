#pragma once

#include <string>
#include <vector>

#include "dpark/pipeline.hpp"
#include "scene.hpp"

namespace dpark::testing {

// A random scene on disk: black tiles, a mock scenario file and a run config pointing at both.
struct EndToEnd {
    Scene scene;
    std::string dir;
    pipeline::RunConfig config;
};

EndToEnd prepare_end_to_end(std::uint64_t seed, const std::string& dir, geo::TileCoord origin = {168040, 366000, 20},
                            int cols = 6, int rows = 6, int count = 40);

struct OracleErrors {
    std::vector<std::string> mismatches;
    double max_centroid_px = 0.0;
    double max_width_px = 0.0;
};

// Pairs each scene space with the report space whose centroid is nearest; classes must agree
// and every space must be characterized.
OracleErrors compare_to_scene(const pipeline::RegionReport& report, const Scene& scene);

// JSON report with the timestamp block removed.
std::string report_without_timestamp(const std::string& json_text);

} // namespace dpark::testing
