#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/eval/coco.hpp"

namespace dpark::eval {

/// Hint-model output for one dataset candidate image.
struct HintImage {
    std::string id;
    std::string region;
    std::vector<double> confidences;
};

/// JSON array, {"images": [...]}, or NDJSON of {"image_id", "region", "detections": [{"confidence"}]}.
std::vector<HintImage> load_hint_images(const std::string& path);

struct PoolQuotas {
    std::map<std::string, std::size_t> may_contain;
    std::map<std::string, std::size_t> may_not_contain;
};

PoolQuotas quotas_from_json(const nlohmann::json& j);

struct PoolSample {
    std::uint64_t seed = 0;
    double threshold = 0.3;
    std::map<std::string, std::size_t> may_contain_pool_size;
    std::map<std::string, std::size_t> may_not_contain_pool_size;
    /// Sampled ids per region, sorted.
    std::map<std::string, std::vector<std::string>> may_contain;
    std::map<std::string, std::vector<std::string>> may_not_contain;
};

/// An image "may contain parking" when any hint confidence is strictly above `threshold`.
/// Each (pool, region) stratum is sampled without replacement with a stream derived from
/// `seed`; throws InvalidArgument when a quota exceeds its pool.
PoolSample sample_pools(const std::vector<HintImage>& images, const PoolQuotas& quotas, double threshold,
                        std::uint64_t seed);

nlohmann::json to_json(const PoolSample& s);

struct CropPlan {
    std::string source_image_id;
    std::size_t center_object = 0; ///< index into Dataset::objects
    int origin_x = 0;
    int origin_y = 0;
    bool padded = false;
    /// Objects of the source image overlapping the crop, in crop coordinates.
    std::vector<GroundTruthObject> labels;
};

struct CropPlanSet {
    std::vector<CropPlan> crops;
    std::size_t excluded_edge = 0;
};

/// One crop per parking object (everything except access aisles), centred on its envelope.
/// With `test_split`, crops that would need padding are dropped and counted.
CropPlanSet plan_crops(const Dataset& ds, int size = 100, bool test_split = true);

struct CropExport {
    Dataset crops;
    std::size_t excluded_edge = 0;
};

/// Writes each planned crop as `<out_dir>/<n>.png` and returns the crop dataset (labels in
/// crop coordinates). Source images are read from `images_dir/<file_name>`.
CropExport export_crops(const Dataset& ds, const std::string& images_dir, const std::string& out_dir, int size = 100,
                        bool test_split = true);

} // namespace dpark::eval
