#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpark/detector.hpp"

namespace dpark {

/// Scripted replies keyed by ImageKey text. Unknown keys answer with no detections.
///
/// File form:
///   {"locate": {"20/168046/366004@0,0": [<locate detection>...]},
///    "orient": {"20/168046/366004@78,12": [<orient detection>...]}}
struct Scenario {
    std::map<std::string, std::vector<Detection>> locate;
    std::map<std::string, std::vector<OBBDetection>> orient;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const Scenario& s);

/// Gaussian jitter on box parameters. sigma 0 disables it.
struct Jitter {
    double sigma_px = 0.0;
    std::uint64_t seed = 0;
};

class MockBackend final : public Backend {
public:
    explicit MockBackend(Scenario scenario, Jitter jitter = {});

    std::vector<Detection> locate(const ImageKey& key, const RasterImage& img) override;
    std::vector<OBBDetection> orient(const ImageKey& key, const RasterImage& img) override;

private:
    /// Index of this call among calls with the same task and key.
    std::uint64_t next_call(const std::string& task_key);

    Scenario scenario_;
    Jitter jitter_;
    std::mutex mutex_;
    std::map<std::string, std::uint64_t> calls_;
};

} // namespace dpark
